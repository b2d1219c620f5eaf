//! Named fixtures: equations, systems, coverings, reductions and
//! transformations, validated at load.
//!
//! Entries live in `catalog/<kind>/<id>.sys`. The files are compiled in; the
//! `COVERLAB_CATALOG` environment variable points the loader at a directory
//! with the same layout instead.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use crate::expr::{Atom, FieldId, FieldKind, NormalForm, Workspace};
use crate::jet::{Bindings, Covering, Fixture, OrientedSystem, Rule};
use crate::verify::reduction::{change_of_unknown, reduced_covering, Relation};
use crate::verify::{rename_fields, solve_backlund_inverse};
use crate::Error;

pub const CATALOG_ENV: &str = "COVERLAB_CATALOG";

macro_rules! fixtures {
    ($($kind:literal / $id:literal),* $(,)?) => {
        &[$(($kind, $id, include_str!(concat!("../../catalog/", $kind, "/", $id, ".sys")))),*]
    };
}

const EMBEDDED: &[(&str, &str, &str)] = fixtures![
    "equation" / "eq.pavlov",
    "equation" / "eq.universal",
    "equation" / "eq.rdDym",
    "equation" / "eq.rdDym_general",
    "equation" / "eq.rdDym_general_transformed",
    "equation" / "eq.boyer_finley",
    "equation" / "eq.boyer_finley_r",
    "equation" / "eq.deformed_bf",
    "system" / "sys.bogdanov",
    "system" / "sys.bogdanov_compat",
    "system" / "sys.rdDym2",
    "covering" / "cov.lambda",
    "covering" / "cov.q",
    "covering" / "cov.gen",
    "covering" / "cov.boyer_finley",
    "covering" / "cov.deformed_bf",
    "covering" / "cov.bogdanov",
    "covering" / "cov.universal",
    "reduction" / "red.A",
    "reduction" / "red.B",
    "reduction" / "red.C",
    "reduction" / "red.D",
    "reduction" / "red.s_eq_x",
    "transformation" / "bt.forward",
    "transformation" / "bt.inverse_printed",
    "transformation" / "bt.scalar_forward",
    "transformation" / "bt.scalar_inverse",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntryKind {
    Equation,
    System,
    Covering,
    Reduction,
    Transformation,
}

impl EntryKind {
    pub const ALL: [EntryKind; 5] =
        [EntryKind::Equation, EntryKind::System, EntryKind::Covering, EntryKind::Reduction, EntryKind::Transformation];

    pub fn as_str(self) -> &'static str {
        match self {
            EntryKind::Equation => "equation",
            EntryKind::System => "system",
            EntryKind::Covering => "covering",
            EntryKind::Reduction => "reduction",
            EntryKind::Transformation => "transformation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        EntryKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for EntryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `id` or `id a -> b, c -> d`: a system entry with base fields renamed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SystemRef {
    pub id: String,
    pub rename: BTreeMap<String, String>,
}

impl SystemRef {
    pub fn parse(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (id, rest) = s.split_once(char::is_whitespace).unwrap_or((s, ""));
        let mut rename = BTreeMap::new();
        for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (a, b) = part.split_once("->").ok_or_else(|| format!("bad rename '{part}'"))?;
            rename.insert(a.trim().to_string(), b.trim().to_string());
        }
        Ok(SystemRef { id: id.to_string(), rename })
    }

    pub fn plain(id: &str) -> Self {
        SystemRef { id: id.to_string(), rename: BTreeMap::new() }
    }
}

impl fmt::Display for SystemRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)?;
        let parts: Vec<String> = self.rename.iter().map(|(a, b)| format!("{a} -> {b}")).collect();
        if !parts.is_empty() {
            write!(f, " {}", parts.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct CoveringEntry {
    pub covering: Covering,
    pub system: SystemRef,
}

/// `old = value(new)`: the fiber change applied to a reduced covering.
#[derive(Clone, Debug)]
pub struct FiberChange {
    pub old: FieldId,
    pub new: FieldId,
    pub value: NormalForm,
}

#[derive(Clone, Debug)]
pub struct ReductionEntry {
    pub source: SystemRef,
    pub target: SystemRef,
    pub bindings: Bindings,
    pub point: Option<Bindings>,
    pub point_target: Option<SystemRef>,
    pub relation: Option<Relation>,
    pub fiber_change: Option<FiberChange>,
    pub cover: Option<(String, String)>,
}

#[derive(Clone, Debug)]
pub struct TransformationEntry {
    pub defines: BTreeSet<FieldId>,
    pub bindings: Bindings,
    pub modulo: SystemRef,
    pub cover: Option<(String, String)>,
    pub induced: Option<SystemRef>,
    pub inverse_modulo: Option<SystemRef>,
}

#[derive(Clone, Debug)]
pub enum Payload {
    System(OrientedSystem),
    Covering(CoveringEntry),
    Reduction(Box<ReductionEntry>),
    Transformation(TransformationEntry),
}

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub id: String,
    pub kind: EntryKind,
    pub label: String,
    /// How a computed entry was obtained; `None` for transcribed ones.
    pub derived: Option<String>,
    pub workspace: Workspace,
    pub text: String,
    pub payload: Payload,
}

impl CatalogEntry {
    /// Parse and validate one fixture; `kind` and `id` come from its path.
    pub fn parse(kind: EntryKind, id: &str, text: &str) -> Result<Self, Error> {
        let invalid = |message: String| Error::InvalidEntry { id: id.to_string(), message };
        let fx = Fixture::parse(text).map_err(|e| invalid(e.to_string()))?;
        if fx.header("id") != Some(id) {
            return Err(invalid(format!("id header {:?} does not match the file name", fx.header("id"))));
        }
        if fx.header("kind") != Some(kind.as_str()) {
            return Err(invalid(format!("kind header {:?} does not match the directory", fx.header("kind"))));
        }
        let label = fx.header("label").map(str::to_string).ok_or_else(|| invalid("missing label".into()))?;
        let payload = payload(kind, &fx).map_err(|e| invalid(e.to_string()))?;
        Ok(CatalogEntry {
            id: id.to_string(),
            kind,
            label,
            derived: fx.header("derived").map(str::to_string),
            workspace: fx.workspace().clone(),
            text: text.to_string(),
            payload,
        })
    }

    pub fn system(&self) -> Option<&OrientedSystem> {
        match &self.payload {
            Payload::System(s) => Some(s),
            _ => None,
        }
    }

    pub fn covering(&self) -> Option<&CoveringEntry> {
        match &self.payload {
            Payload::Covering(c) => Some(c),
            _ => None,
        }
    }

    pub fn reduction(&self) -> Option<&ReductionEntry> {
        match &self.payload {
            Payload::Reduction(r) => Some(r),
            _ => None,
        }
    }

    pub fn transformation(&self) -> Option<&TransformationEntry> {
        match &self.payload {
            Payload::Transformation(t) => Some(t),
            _ => None,
        }
    }

    /// Every catalog id this entry points at.
    pub fn references(&self) -> Vec<String> {
        let mut out = Vec::new();
        match &self.payload {
            Payload::System(_) => {}
            Payload::Covering(c) => out.push(c.system.id.clone()),
            Payload::Reduction(r) => {
                out.push(r.source.id.clone());
                out.push(r.target.id.clone());
                out.extend(r.point_target.iter().map(|s| s.id.clone()));
                if let Some((a, b)) = &r.cover {
                    out.extend([a.clone(), b.clone()]);
                }
            }
            Payload::Transformation(t) => {
                out.push(t.modulo.id.clone());
                out.extend(t.induced.iter().chain(&t.inverse_modulo).map(|s| s.id.clone()));
                if let Some((a, b)) = &t.cover {
                    out.extend([a.clone(), b.clone()]);
                }
            }
        }
        out
    }
}

fn required<'a>(fx: &'a Fixture, key: &str) -> Result<&'a str, Error> {
    fx.header(key).ok_or_else(|| Error::Precondition(format!("missing header '{key}'")))
}

fn system_ref(fx: &Fixture, key: &str) -> Result<Option<SystemRef>, Error> {
    fx.header(key).map(|v| SystemRef::parse(v).map_err(Error::Precondition)).transpose()
}

fn arrow_pair(fx: &Fixture, key: &str) -> Result<Option<(String, String)>, Error> {
    let Some(v) = fx.header(key) else { return Ok(None) };
    let (a, b) = v.split_once("->").ok_or_else(|| Error::Precondition(format!("header '{key}' needs 'a -> b'")))?;
    Ok(Some((a.trim().to_string(), b.trim().to_string())))
}

fn single_jet(e: &NormalForm, what: &str) -> Result<crate::expr::JetVar, Error> {
    match e.atoms().into_iter().next() {
        Some(Atom::Jet(j)) if *e == NormalForm::jet(j.clone()) => Ok(j),
        _ => Err(Error::Precondition(format!("{what} must have a single jet on the left"))),
    }
}

fn fields(ws: &Workspace, names: &str) -> Result<BTreeSet<FieldId>, Error> {
    names
        .split_whitespace()
        .map(|n| ws.field(n).cloned().ok_or_else(|| Error::Precondition(format!("undeclared field '{n}'"))))
        .collect()
}

fn payload(kind: EntryKind, fx: &Fixture) -> Result<Payload, Error> {
    Ok(match kind {
        EntryKind::Equation | EntryKind::System => {
            let sys = fx.system()?;
            if kind == EntryKind::Equation && sys.base_rules().len() != 1 {
                return Err(Error::Precondition("an equation entry has exactly one relation".into()));
            }
            Payload::System(sys)
        }
        EntryKind::Covering => Payload::Covering(CoveringEntry {
            covering: fx.covering()?,
            system: system_ref(fx, "system")?.ok_or_else(|| Error::Precondition("missing header 'system'".into()))?,
        }),
        EntryKind::Reduction => {
            let point = match fx.header_relation("point")? {
                Some((l, r)) => {
                    let mut b = Bindings::new();
                    let j = single_jet(&l, "point")?;
                    if !j.index.is_zero() {
                        return Err(Error::Precondition("point map must bind a whole field".into()));
                    }
                    b.bind_field(j.field, r)?;
                    Some(b)
                }
                None => None,
            };
            let relation = match fx.header_relation("relation")? {
                Some((l, value)) => Some(Relation { jet: single_jet(&l, "relation")?, value }),
                None => None,
            };
            let fiber_change = match fx.header_relation("fiber_change")? {
                Some((l, value)) => {
                    let old = single_jet(&l, "fiber_change")?.field;
                    let new = value
                        .jets()
                        .into_iter()
                        .find(|j| j.field.kind() == FieldKind::Fiber)
                        .ok_or_else(|| Error::Precondition("fiber_change must mention the new fiber".into()))?
                        .field;
                    Some(FiberChange { old, new, value })
                }
                None => None,
            };
            Payload::Reduction(Box::new(ReductionEntry {
                source: system_ref(fx, "source")?
                    .ok_or_else(|| Error::Precondition("missing header 'source'".into()))?,
                target: system_ref(fx, "target")?
                    .ok_or_else(|| Error::Precondition("missing header 'target'".into()))?,
                bindings: fx.bindings()?,
                point,
                point_target: system_ref(fx, "point_target")?,
                relation,
                fiber_change,
                cover: arrow_pair(fx, "cover")?,
            }))
        }
        EntryKind::Transformation => {
            let defines = fields(fx.workspace(), required(fx, "defines")?)?;
            let bindings = fx.bindings()?;
            if let Some(f) = bindings.bound_fields().iter().find(|f| !defines.contains(*f)) {
                return Err(Error::Precondition(format!("binding for '{f}' which is not defined")));
            }
            Payload::Transformation(TransformationEntry {
                defines,
                bindings,
                modulo: system_ref(fx, "modulo")?
                    .ok_or_else(|| Error::Precondition("missing header 'modulo'".into()))?,
                cover: arrow_pair(fx, "cover")?,
                induced: system_ref(fx, "induced")?,
                inverse_modulo: system_ref(fx, "inverse_modulo")?,
            })
        }
    })
}

#[derive(Clone, Debug)]
pub struct Catalog {
    entries: BTreeMap<String, CatalogEntry>,
}

impl Catalog {
    /// The compiled-in catalog, or the directory named by `COVERLAB_CATALOG`.
    pub fn load() -> Result<Self, Error> {
        match std::env::var_os(CATALOG_ENV) {
            Some(dir) => Catalog::from_dir(Path::new(&dir)),
            None => Catalog::embedded(),
        }
    }

    pub fn embedded() -> Result<Self, Error> {
        Catalog::from_sources(EMBEDDED.iter().map(|(k, id, text)| (k.to_string(), id.to_string(), text.to_string())))
    }

    pub fn from_dir(dir: &Path) -> Result<Self, Error> {
        let io = |e: std::io::Error| Error::InvalidEntry { id: dir.display().to_string(), message: e.to_string() };
        let mut sources = Vec::new();
        for kind in EntryKind::ALL {
            let sub = dir.join(kind.as_str());
            if !sub.is_dir() {
                continue;
            }
            let mut paths: Vec<_> = std::fs::read_dir(&sub).map_err(io)?.collect::<Result<Vec<_>, _>>().map_err(io)?;
            paths.sort_by_key(|e| e.path());
            for e in paths {
                let path = e.path();
                if path.extension().and_then(|s| s.to_str()) != Some("sys") {
                    continue;
                }
                let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
                let text = std::fs::read_to_string(&path).map_err(io)?;
                sources.push((kind.as_str().to_string(), id, text));
            }
        }
        Catalog::from_sources(sources)
    }

    /// Build from `(kind, id, text)` triples, then add derived entries and
    /// check every cross reference.
    pub fn from_sources(sources: impl IntoIterator<Item = (String, String, String)>) -> Result<Self, Error> {
        let mut entries = BTreeMap::new();
        for (kind, id, text) in sources {
            let k = EntryKind::parse(&kind)
                .ok_or_else(|| Error::InvalidEntry { id: id.clone(), message: format!("unknown kind '{kind}'") })?;
            let entry = CatalogEntry::parse(k, &id, &text)?;
            if entries.insert(id.clone(), entry).is_some() {
                return Err(Error::InvalidEntry { id, message: "duplicate id".into() });
            }
        }
        let mut cat = Catalog { entries };
        cat.check_references()?;
        for (id, text) in
            [("bt.inverse_derived", cat.derive_inverse()), ("cov.deformed_bf_derived", cat.derive_deformed_covering())]
        {
            let invalid = |e: Error| Error::InvalidEntry { id: id.to_string(), message: e.to_string() };
            let text = text.map_err(invalid)?;
            let kind = if id.starts_with("bt.") { EntryKind::Transformation } else { EntryKind::Covering };
            let entry = CatalogEntry::parse(kind, id, &text)?;
            cat.entries.insert(id.to_string(), entry);
        }
        cat.check_references()?;
        Ok(cat)
    }

    fn check_references(&self) -> Result<(), Error> {
        for e in self.entries.values() {
            for r in e.references() {
                if !self.entries.contains_key(&r) {
                    return Err(Error::InvalidEntry { id: e.id.clone(), message: format!("unknown reference '{r}'") });
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<&CatalogEntry, Error> {
        self.entries.get(id).ok_or_else(|| Error::UnknownEntry(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = &CatalogEntry> {
        self.entries.values()
    }

    fn expect<'a, T>(&'a self, id: &str, want: &str, f: impl Fn(&'a CatalogEntry) -> Option<T>) -> Result<T, Error> {
        let e = self.get(id)?;
        f(e).ok_or_else(|| Error::InvalidEntry { id: id.to_string(), message: format!("not a {want}") })
    }

    /// The system behind a reference, with its renaming applied.
    pub fn system(&self, r: &SystemRef) -> Result<OrientedSystem, Error> {
        let sys = self.expect(&r.id, "system", CatalogEntry::system)?;
        if r.rename.is_empty() {
            return Ok(sys.clone());
        }
        let map: BTreeMap<FieldId, FieldId> =
            r.rename.iter().map(|(a, b)| (FieldId::base(a), FieldId::base(b))).collect();
        rename_system(sys, &map)
    }

    pub fn covering(&self, id: &str) -> Result<&CoveringEntry, Error> {
        self.expect(id, "covering", CatalogEntry::covering)
    }

    pub fn reduction(&self, id: &str) -> Result<&ReductionEntry, Error> {
        self.expect(id, "reduction", CatalogEntry::reduction)
    }

    pub fn transformation(&self, id: &str) -> Result<&TransformationEntry, Error> {
        self.expect(id, "transformation", CatalogEntry::transformation)
    }

    fn derive_inverse(&self) -> Result<String, Error> {
        let fwd = self.transformation("bt.forward")?;
        let modulo = fwd
            .inverse_modulo
            .as_ref()
            .ok_or_else(|| Error::Precondition("bt.forward has no inverse_modulo header".into()))?;
        let inv = solve_backlund_inverse(&fwd.bindings)?;
        let ws = &self.get("bt.forward")?.workspace;
        let defines: Vec<String> = inv.bound_fields().iter().map(|f| f.to_string()).collect();
        let mut text = format!(
            "id: bt.inverse_derived\nkind: transformation\nlabel: Backlund transformation, inverse solved from the forward map\n\
             derived: solved from bt.forward\ndefines: {}\nmodulo: {modulo}\n",
            defines.join(" ")
        );
        text.push_str(&declarations(ws));
        for (j, v) in inv.jets() {
            text.push_str(&format!("{j} = {v}\n"));
        }
        Ok(text)
    }

    fn derive_deformed_covering(&self) -> Result<String, Error> {
        let red = self.reduction("red.D")?;
        let (Some(relation), Some(change), Some((from, to))) = (&red.relation, &red.fiber_change, &red.cover) else {
            return Err(Error::Precondition("red.D lacks relation, fiber_change or cover".into()));
        };
        let source = self.system(&red.source)?;
        let elim = change_of_unknown(&red.bindings, relation, &source)?;
        let cov = reduced_covering(
            &self.covering(from)?.covering,
            &red.bindings,
            relation,
            &elim.eliminated,
            &change.new,
            &change.value,
        )?;
        let target = &self.covering(to)?.system;
        let mut ws = Workspace::new();
        for j in cov.eq_t().jets().into_iter().chain(cov.eq_y().jets()) {
            ws.declare(j.field.name(), j.field.kind())?;
        }
        ws.declare(cov.fiber().name(), FieldKind::Fiber)?;
        let f = cov.fiber();
        Ok(format!(
            "id: cov.deformed_bf_derived\nkind: covering\nlabel: deformed Boyer-Finley covering, obtained through red.D\n\
             derived: reduction of cov.gen through red.D\nsystem: {target}\n{}{f}_t = {}\n{f}_y = {}\n",
            declarations(&ws),
            cov.eq_t(),
            cov.eq_y()
        ))
    }
}

fn declarations(ws: &Workspace) -> String {
    let mut out = String::new();
    for kind in [FieldKind::Base, FieldKind::Fiber, FieldKind::Parameter] {
        let names: Vec<&str> = ws.of_kind(kind).map(|f| f.name()).collect();
        if !names.is_empty() {
            out.push_str(&format!("{}: {}\n", kind.keyword(), names.join(" ")));
        }
    }
    out
}

/// Rename fields in every rule, leadings included.
pub fn rename_system(sys: &OrientedSystem, map: &BTreeMap<FieldId, FieldId>) -> Result<OrientedSystem, Error> {
    let rules = sys
        .base_rules()
        .iter()
        .map(|r| {
            let leading = match map.get(&r.leading.field) {
                Some(f) => f.jet(r.leading.index),
                None => r.leading.clone(),
            };
            Ok(Rule { leading, rhs: rename_fields(&r.rhs, map)?, equation: rename_fields(&r.equation, map)? })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    OrientedSystem::new(rules)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn system_refs() {
        let r = SystemRef::parse("eq.pavlov s -> u").unwrap();
        assert_eq!(r.id, "eq.pavlov");
        assert_eq!(r.rename.get("s").map(String::as_str), Some("u"));
        assert_eq!(r.to_string(), "eq.pavlov s -> u");
        assert!(SystemRef::parse("eq.pavlov s u").is_err());
    }

    #[test]
    fn embedded_catalog_loads() {
        let cat = Catalog::embedded().unwrap();
        assert!(cat.get("bt.inverse_derived").unwrap().derived.is_some());
        assert!(cat.get("cov.deformed_bf_derived").unwrap().derived.is_some());
        assert!(matches!(cat.get("no.such.id"), Err(Error::UnknownEntry(_))));
    }

    #[test]
    fn renamed_system() {
        let cat = Catalog::embedded().unwrap();
        let sys = cat.system(&SystemRef::parse("eq.pavlov s -> u").unwrap()).unwrap();
        assert_eq!(sys.base_rules()[0].leading.to_string(), "u_yy");
    }

    #[test]
    fn corrupted_entry_names_its_id() {
        let bad = [(
            "system".to_string(),
            "sys.bad".to_string(),
            "id: sys.bad\nkind: system\nlabel: x\nbase: u\nu_t = (u_x\n".to_string(),
        )];
        match Catalog::from_sources(bad) {
            Err(Error::InvalidEntry { id, .. }) => assert_eq!(id, "sys.bad"),
            other => panic!("{other:?}"),
        }
    }
}
