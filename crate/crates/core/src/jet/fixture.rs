//! Plain-text fixture format for systems, coverings, bindings and maps.
//!
//! ```text
//! file    := line*
//! line    := blank | comment | header | relation
//! comment := "#" any*
//! header  := key ":" value            key = [a-z_]+
//! relation:= expr "=" expr
//! ```
//!
//! Headers `base`, `fiber` and `param` declare field names (space separated)
//! and must precede the first relation that uses them; every other header is
//! kept verbatim for the consumer. Relations are read with the expression
//! grammar. Printing a parsed fixture and parsing it again yields the same
//! headers and, up to normal form, the same relations.

use std::fmt;

use super::{Bindings, Covering, OrientedSystem, Rule};
use crate::expr::{Atom, Coordinate, Expr, FieldKind, NormalForm, Workspace};
use crate::Error;

#[derive(Clone, Debug)]
pub struct Relation {
    pub line: usize,
    pub lhs: Expr,
    pub rhs: Expr,
}

#[derive(Clone, Debug)]
pub struct Fixture {
    headers: Vec<(String, String)>,
    workspace: Workspace,
    relations: Vec<Relation>,
}

fn at_line(line: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        e @ Error::Fixture { .. } => e,
        e => Error::Fixture { line, message: e.to_string() },
    }
}

impl Fixture {
    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut fx = Fixture { headers: Vec::new(), workspace: Workspace::new(), relations: Vec::new() };
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            if let Some((key, value)) = header(s) {
                let kind = match key {
                    "base" => Some(FieldKind::Base),
                    "fiber" => Some(FieldKind::Fiber),
                    "param" => Some(FieldKind::Parameter),
                    _ => None,
                };
                if let Some(kind) = kind {
                    for name in value.split_whitespace() {
                        fx.workspace.declare(name, kind).map_err(at_line(line))?;
                    }
                }
                fx.headers.push((key.to_string(), value.to_string()));
                continue;
            }
            let Some((l, r)) = s.split_once('=') else {
                return Err(Error::Fixture { line, message: "expected 'key: value' or 'lhs = rhs'".into() });
            };
            let lhs = fx.workspace.parse(l).map_err(at_line(line))?;
            let rhs = fx.workspace.parse(r).map_err(at_line(line))?;
            fx.relations.push(Relation { line, lhs, rhs });
        }
        Ok(fx)
    }

    pub fn workspace(&self) -> &Workspace {
        &self.workspace
    }

    pub fn headers(&self) -> &[(String, String)] {
        &self.headers
    }

    pub fn header(&self, key: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    /// Parse a header value as an expression in this fixture's workspace.
    pub fn header_expr(&self, key: &str) -> Result<Option<NormalForm>, Error> {
        self.header(key).map(|v| self.workspace.nf(v)).transpose()
    }

    /// Parse a header value `lhs = rhs`.
    pub fn header_relation(&self, key: &str) -> Result<Option<(NormalForm, NormalForm)>, Error> {
        let Some(v) = self.header(key) else { return Ok(None) };
        let (l, r) = v
            .split_once('=')
            .ok_or_else(|| Error::Fixture { line: 0, message: format!("header '{key}' is not a relation") })?;
        Ok(Some((self.workspace.nf(l)?, self.workspace.nf(r)?)))
    }

    fn normalized(&self, r: &Relation) -> Result<(NormalForm, NormalForm), Error> {
        let f = at_line(r.line);
        Ok((r.lhs.normalize().map_err(&f)?, r.rhs.normalize().map_err(&f)?))
    }

    /// Every relation oriented into a rule.
    pub fn system(&self) -> Result<OrientedSystem, Error> {
        let mut rules = Vec::new();
        for r in &self.relations {
            let (l, rhs) = self.normalized(r)?;
            rules.push(Rule::from_relation(&l, &rhs).map_err(at_line(r.line))?);
        }
        OrientedSystem::new(rules)
    }

    /// Relations `f_t = ...` and `f_y = ...` for a single fiber field.
    pub fn covering(&self) -> Result<Covering, Error> {
        let mut fiber = None;
        let (mut eq_t, mut eq_y) = (None, None);
        for r in &self.relations {
            let f = at_line(r.line);
            let Expr::Atom(Atom::Jet(j)) = &r.lhs else {
                return Err(f(Error::InvalidCovering("left-hand side must be a fiber jet".into())));
            };
            if j.field.kind() != FieldKind::Fiber || j.order() != 1 {
                return Err(f(Error::InvalidCovering(format!("{j} is not a first fiber derivative"))));
            }
            if fiber.get_or_insert_with(|| j.field.clone()) != &j.field {
                return Err(f(Error::InvalidCovering("more than one fiber field".into())));
            }
            let rhs = r.rhs.normalize().map_err(&f)?;
            let slot = if j.index.get(Coordinate::T) == 1 {
                &mut eq_t
            } else if j.index.get(Coordinate::Y) == 1 {
                &mut eq_y
            } else {
                return Err(f(Error::InvalidCovering(format!("{j} is a stored jet"))));
            };
            if slot.replace(rhs).is_some() {
                return Err(f(Error::InvalidCovering(format!("{j} defined twice"))));
            }
        }
        match (fiber, eq_t, eq_y) {
            (Some(fiber), Some(t), Some(y)) => Covering::new(fiber, t, y),
            _ => Err(Error::InvalidCovering("need both fiber_t and fiber_y".into())),
        }
    }

    /// Relations read as substitutions: a bare field on the left binds the
    /// whole field, a jet binds that jet.
    pub fn bindings(&self) -> Result<Bindings, Error> {
        let mut b = Bindings::new();
        for r in &self.relations {
            let f = at_line(r.line);
            let Expr::Atom(Atom::Jet(j)) = &r.lhs else {
                return Err(f(Error::Fixture { line: r.line, message: "binding key must be a field or jet".into() }));
            };
            let value = r.rhs.normalize().map_err(&f)?;
            if j.index.is_zero() {
                b.bind_field(j.field.clone(), value).map_err(&f)?;
            } else {
                b.bind_jet(j.clone(), value).map_err(&f)?;
            }
        }
        Ok(b)
    }
}

fn header(s: &str) -> Option<(&str, &str)> {
    let (k, v) = s.split_once(':')?;
    let k = k.trim();
    (!k.is_empty() && k.chars().all(|c| c.is_ascii_lowercase() || c == '_')).then(|| (k, v.trim()))
}

impl fmt::Display for Fixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.headers {
            writeln!(f, "{k}: {v}")?;
        }
        for r in &self.relations {
            writeln!(f, "{} = {}", r.lhs, r.rhs)?;
        }
        Ok(())
    }
}

/// Fixture text for a system, with field declarations.
pub fn write_system(sys: &OrientedSystem, ws: &Workspace) -> String {
    let mut out = declarations(ws);
    out.push_str(&sys.to_string());
    out
}

/// Fixture text for a covering, with field declarations.
pub fn write_covering(cov: &Covering, ws: &Workspace) -> String {
    let mut out = declarations(ws);
    let f = cov.fiber().name();
    out.push_str(&format!("{f}_t = {}\n{f}_y = {}\n", cov.eq_t(), cov.eq_y()));
    out
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

#[cfg(test)]
mod tests {
    use super::*;

    const SYS: &str = "\
# two rules
id: sys.example
base: u v
u_ty = (u_x + v)*u_xy - u_y*u_xx
v_ty = (u_x + v)*v_xy - u_y*v_xx + v_x*v_y
";

    #[test]
    fn parses_headers_and_rules() {
        let fx = Fixture::parse(SYS).unwrap();
        assert_eq!(fx.header("id"), Some("sys.example"));
        let sys = fx.system().unwrap();
        assert_eq!(sys.rules().len(), 2);
        assert_eq!(sys.rules()[0].leading.to_string(), "u_ty");
    }

    #[test]
    fn system_round_trip() {
        let fx = Fixture::parse(SYS).unwrap();
        let sys = fx.system().unwrap();
        let text = write_system(&sys, fx.workspace());
        let again = Fixture::parse(&text).unwrap().system().unwrap();
        assert_eq!(again, sys);
        assert_eq!(write_system(&again, fx.workspace()), text);
        let printed = Fixture::parse(&fx.to_string()).unwrap();
        assert_eq!(printed.system().unwrap(), sys);
        assert_eq!(printed.headers(), fx.headers());
    }

    #[test]
    fn covering_round_trip() {
        let text = "base: u\nfiber: p\nparam: lambda\np_t = (u_x - lambda)*p_x\np_y = u_y*p_x/lambda\n";
        let fx = Fixture::parse(text).unwrap();
        let cov = fx.covering().unwrap();
        let again = Fixture::parse(&write_covering(&cov, fx.workspace())).unwrap().covering().unwrap();
        assert_eq!(again, cov);
    }

    #[test]
    fn errors_name_the_line() {
        let err = Fixture::parse("base: u\nu_ty = u_x +\n").unwrap_err();
        assert!(matches!(err, Error::Fixture { line: 2, .. }));
        let err = Fixture::parse("base: u\nu_ty = w\n").unwrap_err();
        assert!(matches!(err, Error::Fixture { line: 2, .. }));
        let err = Fixture::parse("base: u\nu_ty u_x\n").unwrap_err();
        assert!(matches!(err, Error::Fixture { line: 2, .. }));
    }
}
