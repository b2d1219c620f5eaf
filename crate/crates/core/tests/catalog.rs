use std::path::{Path, PathBuf};

use coverlab::catalog::{Catalog, EntryKind, CATALOG_ENV};
use coverlab::suite::{checks, unreferenced};
use coverlab::{Error, Workspace};

fn source_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("catalog")
}

fn copy_catalog(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("coverlab-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    for kind in EntryKind::ALL {
        let from = source_dir().join(kind.as_str());
        let to = dir.join(kind.as_str());
        std::fs::create_dir_all(&to).unwrap();
        for f in std::fs::read_dir(from).unwrap() {
            let f = f.unwrap().path();
            std::fs::copy(&f, to.join(f.file_name().unwrap())).unwrap();
        }
    }
    dir
}

#[test]
fn two_component_system_rules() {
    let cat = Catalog::embedded().unwrap();
    let sys = cat.get("sys.rdDym2").unwrap().system().unwrap();
    let ws = Workspace::with("u v", "", "").unwrap();
    let expected = [("u_ty", "(u_x + v)*u_xy - u_y*u_xx"), ("v_ty", "(u_x + v)*v_xy - u_y*v_xx + v_x*v_y")];
    assert_eq!(sys.base_rules().len(), 2);
    for (rule, (lead, rhs)) in sys.base_rules().iter().zip(expected) {
        assert_eq!(rule.leading.to_string(), lead);
        assert!(rule.rhs.equals(&ws.nf(rhs).unwrap()));
    }
}

#[test]
fn spectral_covering() {
    let cat = Catalog::embedded().unwrap();
    let cov = &cat.covering("cov.lambda").unwrap().covering;
    let ws = Workspace::with("u", "p", "lambda").unwrap();
    assert!(cov.eq_t().equals(&ws.nf("(u_x - lambda)*p_x").unwrap()));
    assert!(cov.eq_y().equals(&ws.nf("u_y*p_x/lambda").unwrap()));
}

#[test]
fn unknown_id_is_an_error() {
    let cat = Catalog::embedded().unwrap();
    assert_eq!(cat.get("no.such.id").unwrap_err(), Error::UnknownEntry("no.such.id".into()));
}

#[test]
fn directory_catalog_matches_embedded() {
    let a = Catalog::embedded().unwrap();
    let b = Catalog::from_dir(&source_dir()).unwrap();
    assert!(a.ids().eq(b.ids()));
}

#[test]
fn corrupted_fixture_names_its_entry() {
    let dir = copy_catalog("corrupt");
    let path = dir.join("covering").join("cov.q.sys");
    let text = std::fs::read_to_string(&path).unwrap().replace("q_t = (u_x - q)*q_x", "q_t = (u_x - q)*q_x +");
    std::fs::write(&path, text).unwrap();
    let err = Catalog::from_dir(&dir).unwrap_err();
    let _ = std::fs::remove_dir_all(&dir);
    assert!(matches!(err, Error::InvalidEntry { ref id, .. } if id == "cov.q"), "{err}");
}

#[test]
fn dangling_reference_is_rejected() {
    let dir = copy_catalog("dangling");
    std::fs::remove_file(dir.join("equation").join("eq.universal.sys")).unwrap();
    let err = Catalog::from_dir(&dir).unwrap_err();
    let _ = std::fs::remove_dir_all(&dir);
    assert!(matches!(err, Error::InvalidEntry { ref message, .. } if message.contains("'eq.universal'")), "{err}");
}

#[test]
fn every_entry_is_checked() {
    let cat = Catalog::embedded().unwrap();
    assert_eq!(unreferenced(&cat), Vec::<String>::new());
    for c in checks() {
        for e in &c.entries {
            assert!(cat.get(e).is_ok(), "{} names missing entry {e}", c.id);
        }
    }
}

#[test]
fn entries_are_labelled_or_derived() {
    let cat = Catalog::embedded().unwrap();
    for e in cat.entries() {
        assert!(!e.label.is_empty(), "{}", e.id);
    }
    let derived: Vec<&str> = cat.entries().filter(|e| e.derived.is_some()).map(|e| e.id.as_str()).collect();
    assert_eq!(derived, ["bt.inverse_derived", "cov.deformed_bf_derived", "sys.bogdanov_compat"]);
}

#[test]
fn environment_override() {
    let dir = copy_catalog("env");
    std::fs::write(dir.join("covering").join("cov.q.sys"), "id: cov.q\nkind: covering\nq_t = (\n").unwrap();
    std::env::set_var(CATALOG_ENV, &dir);
    let overridden = Catalog::load();
    std::env::remove_var(CATALOG_ENV);
    let _ = std::fs::remove_dir_all(&dir);
    assert!(matches!(overridden, Err(Error::InvalidEntry { ref id, .. }) if id == "cov.q"));
    assert!(Catalog::load().is_ok());
}
