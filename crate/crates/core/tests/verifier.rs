use std::collections::{BTreeMap, BTreeSet};

use coverlab::catalog::{rename_system, Catalog, SystemRef};
use coverlab::jet::{Bindings, Covering};
use coverlab::suite::{run_suite, SuiteName, DISCREPANCY};
use coverlab::verify::{
    implicit_parameter_swap, rename_fields, solve_backlund_inverse, verify_backlund_forward, verify_covering, Status,
};
use coverlab::{FieldId, FieldKind, NormalForm, Workspace};

fn cat() -> Catalog {
    Catalog::embedded().unwrap()
}

fn ws() -> Workspace {
    Workspace::with("u v w r s", "p q", "lambda kappa").unwrap()
}

fn nf(s: &str) -> NormalForm {
    ws().nf(s).unwrap()
}

fn by_name(b: &Bindings, n: &str) -> NormalForm {
    b.jets().iter().find(|(j, _)| j.to_string() == n).unwrap().1.clone()
}

#[test]
fn derived_inverse() {
    let cat = cat();
    let inv = solve_backlund_inverse(&cat.transformation("bt.forward").unwrap().bindings).unwrap();
    let expected = [
        ("r_t", "u_x*v_y/u_y - v_x + v*v_y/u_y"),
        ("r_x", "v_y/u_y"),
        ("s_t", "-(u_x + v)*exp(-r)/u_y"),
        ("s_x", "-exp(-r)/u_y"),
    ];
    assert_eq!(inv.jets().len(), expected.len());
    for (name, value) in expected {
        let v = by_name(&inv, name);
        assert!(v.equals(&nf(value)), "{name} = {v}");
    }
    let stored = &cat.transformation("bt.inverse_derived").unwrap().bindings;
    assert_eq!(stored, &inv);
}

#[test]
fn printed_inverse_swaps_r_derivatives() {
    let cat = cat();
    let printed = &cat.transformation("bt.inverse_printed").unwrap().bindings;
    let derived = &cat.transformation("bt.inverse_derived").unwrap().bindings;
    assert!(by_name(printed, "r_x").equals(&by_name(derived, "r_t")));
    assert!(by_name(printed, "r_t").equals(&by_name(derived, "r_x")));
    assert!(by_name(printed, "s_x").equals(&by_name(derived, "s_x")));
}

#[test]
fn derived_deformed_covering() {
    let cat = cat();
    let cov = &cat.covering("cov.deformed_bf_derived").unwrap().covering;
    assert_eq!(cov.fiber().name(), "s");
    let ws = Workspace::with("w", "s", "").unwrap();
    assert!(cov.eq_t().equals(&ws.nf("w_t + s_x*exp(w) - s_x*exp(s)").unwrap()));
    assert!(cov.eq_y().equals(&ws.nf("exp(w - s)*(w_y - w_x + s_x)").unwrap()));
}

#[test]
fn reduction_factors() {
    let result = run_suite(&cat(), SuiteName::Reductions, 1).unwrap();
    let expected = [
        ("red.A", "1"),
        ("red.B", "1"),
        ("red.B.point_map", "-kappa"),
        ("red.C", "-exp(w)"),
        ("red.D", "exp(w)"),
        ("red.s_eq_x", "-1"),
    ];
    for (id, f) in expected {
        let r = result.get(id).unwrap();
        assert_eq!(r.status, Status::Pass, "{id}");
        assert_eq!(r.factor.as_deref(), Some(f), "{id}");
    }
}

#[test]
fn flipped_sign_residual() {
    let result = run_suite(&cat(), SuiteName::Reductions, 1).unwrap();
    let r = result.get("red.C.sign_sensitivity").unwrap();
    assert_eq!(r.status, Status::Pass);
    let d = r.diagnostic.as_deref().unwrap();
    let residual = d.rsplit(" gives ").next().unwrap();
    assert!(nf(residual).equals(&nf("exp(w)*w_ty + exp(2*w)*(w_x^2 + w_xx)")), "{d}");
    assert!(!residual.contains("w_t*w_y") && !residual.contains("w_y*w_t"));
}

#[test]
fn trivial_covering_has_zero_residual() {
    let cat = cat();
    let p = FieldId::fiber("p");
    for id in ["eq.rdDym", "sys.rdDym2", "eq.boyer_finley", "sys.bogdanov"] {
        let sys = cat.system(&SystemRef::plain(id)).unwrap();
        let v =
            verify_covering(&Covering::new(p.clone(), NormalForm::zero(), NormalForm::zero()).unwrap(), &sys).unwrap();
        assert!(v.passed && v.residual == "0", "{id}");
    }
}

#[test]
fn both_equations_are_needed() {
    let result = run_suite(&cat(), SuiteName::Coverings, 1).unwrap();
    assert_eq!(result.get("cov.gen").unwrap().status, Status::Pass);
    for (id, missing) in [("cov.gen.first_equation_only", "v_ty"), ("cov.gen.second_equation_only", "u_ty")] {
        let r = result.get(id).unwrap();
        assert_eq!(r.status, Status::Pass, "{id}");
        assert!(r.diagnostic.as_deref().unwrap().contains(missing), "{id}: {:?}", r.diagnostic);
    }
}

#[test]
fn swap_gives_parameter_free_covering() {
    let cat = cat();
    let swapped = implicit_parameter_swap(
        &cat.covering("cov.lambda").unwrap().covering,
        &FieldId::parameter("lambda"),
        &FieldId::fiber("q"),
    )
    .unwrap();
    let q = &cat.covering("cov.q").unwrap().covering;
    assert!(swapped.eq_t().equals(q.eq_t()) && swapped.eq_y().equals(q.eq_y()));
}

#[test]
fn renaming_preserves_outcomes() {
    let cat = cat();
    for e in cat.entries().filter_map(|e| e.covering()) {
        let sys = cat.system(&e.system).unwrap();
        let before = verify_covering(&e.covering, &sys).unwrap();
        let mut map = BTreeMap::new();
        let fields: BTreeSet<FieldId> = e
            .covering
            .eq_t()
            .jets()
            .into_iter()
            .chain(e.covering.eq_y().jets())
            .map(|j| j.field)
            .chain(sys.base_rules().iter().map(|r| r.leading.field.clone()))
            .chain([e.covering.fiber().clone()])
            .collect();
        for (i, f) in fields.iter().enumerate() {
            map.insert(f.clone(), FieldId::new(&format!("z{i}"), f.kind()));
        }
        let cov = Covering::new(
            map[e.covering.fiber()].clone(),
            rename_fields(e.covering.eq_t(), &map).unwrap(),
            rename_fields(e.covering.eq_y(), &map).unwrap(),
        )
        .unwrap();
        let after = verify_covering(&cov, &rename_system(&sys, &map).unwrap()).unwrap();
        assert_eq!(before.passed, after.passed, "{}", e.covering.fiber());
    }
}

#[test]
fn identity_transformation_maps_a_covering_to_itself() {
    let cat = cat();
    let cov = &cat.covering("cov.gen").unwrap().covering;
    let map: BTreeMap<FieldId, FieldId> =
        [(FieldId::base("u"), FieldId::base("a")), (FieldId::base("v"), FieldId::base("b"))].into();
    let mut bt = Bindings::new();
    for (from, to) in &map {
        bt.bind_field(from.clone(), NormalForm::jet(to.bare())).unwrap();
    }
    let image = Covering::new(
        cov.fiber().clone(),
        rename_fields(cov.eq_t(), &map).unwrap(),
        rename_fields(cov.eq_y(), &map).unwrap(),
    )
    .unwrap();
    let defines: BTreeSet<FieldId> = map.keys().cloned().collect();
    assert!(verify_backlund_forward(&bt, &defines, cov, &image).unwrap().passed);
}

#[test]
fn exactly_one_inverse_passes() {
    let result = run_suite(&cat(), SuiteName::Backlund, 1).unwrap();
    let printed = result.get("bt.inverse.printed").unwrap().status;
    let derived = result.get("bt.inverse.derived").unwrap().status;
    assert_eq!((printed, derived), (Status::Fail, Status::Pass));
    assert_eq!(result.get("bt.inverse.round_trip").unwrap().status, Status::Pass);
    let text = result.to_text();
    let line = text.lines().find(|l| l.starts_with(DISCREPANCY.trim_end_matches([':', ' ']))).unwrap();
    assert!(line.contains("r_x and r_t are interchanged"), "{line}");
}

#[test]
fn mutations_are_caught() {
    let result = run_suite(&cat(), SuiteName::Mutation, 4).unwrap();
    assert_eq!(result.checks.len(), 10);
    for r in &result.checks {
        assert_eq!(r.status, Status::Pass, "{}: {:?}", r.id, r.diagnostic);
    }
}

#[test]
fn field_kinds_survive_renaming() {
    let map: BTreeMap<FieldId, FieldId> = [(FieldId::base("u"), FieldId::new("a", FieldKind::Base))].into();
    let e = rename_fields(&nf("u_x*exp(u) + v"), &map).unwrap();
    assert!(e.equals(&Workspace::with("a v", "", "").unwrap().nf("a_x*exp(a) + v").unwrap()));
}
