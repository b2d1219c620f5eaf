//! Checks: covering compatibility, reductions, changes of unknown, the
//! implicit parameter swap and Bäcklund transformations.

pub mod backlund;
pub mod covering;
pub mod mutation;
pub mod reduction;

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use serde::Serialize;

use crate::expr::{Atom, FieldId, FieldKind, NormalForm};
use crate::Error;

pub use backlund::{
    solve_backlund_inverse, verify_backlund_compatibility, verify_backlund_forward, verify_induced_equation,
    verify_round_trip,
};
pub use covering::{implicit_parameter_swap, verify_covering};
pub use reduction::{
    change_of_unknown, reduced_covering, verify_change_of_unknown, verify_point_map, verify_reduction,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Error => "error",
        })
    }
}

/// One row of numeric output: refinement level data.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NumericRow {
    pub test: String,
    pub h: f64,
    pub delta: Option<f64>,
    pub residual: f64,
    pub slope: Option<f64>,
}

/// What a check found, before it is stamped with an id and timing.
#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub passed: bool,
    pub residual: String,
    pub factor: Option<String>,
    pub trace_len: usize,
    pub diagnostic: Option<String>,
    pub rows: Vec<NumericRow>,
}

impl Verdict {
    /// Pass iff the residual is zero.
    pub fn zero_test(residual: &NormalForm, trace_len: usize) -> Self {
        Verdict {
            passed: residual.is_zero(),
            residual: residual.to_string(),
            factor: None,
            trace_len,
            diagnostic: None,
            rows: Vec::new(),
        }
    }

    pub fn with_factor(mut self, factor: Option<&NormalForm>) -> Self {
        self.factor = factor.map(NormalForm::to_string);
        self
    }

    pub fn with_diagnostic(mut self, d: impl Into<String>) -> Self {
        self.diagnostic = Some(d.into());
        self
    }

    /// A pass/fail decision that does not come from a single residual. The
    /// residual reads `0` on a pass; `evidence` is kept as the diagnostic.
    pub fn decided(passed: bool, evidence: impl Into<String>) -> Self {
        let evidence = evidence.into();
        Verdict {
            passed,
            residual: if passed { "0".into() } else { evidence.clone() },
            factor: None,
            trace_len: 0,
            diagnostic: Some(evidence),
            rows: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub id: String,
    pub status: Status,
    pub residual: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factor: Option<String>,
    pub trace_len: usize,
    pub paper_eq: String,
    pub time_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub rows: Vec<NumericRow>,
}

impl CheckReport {
    /// Run `f`, timing it. Errors become `error` reports carrying the message.
    pub fn run(id: &str, paper_eq: &str, f: impl FnOnce() -> Result<Verdict, Error>) -> Self {
        let start = Instant::now();
        let result = f();
        let time_ms = start.elapsed().as_millis() as u64;
        match result {
            Ok(v) => CheckReport {
                id: id.to_string(),
                status: if v.passed { Status::Pass } else { Status::Fail },
                residual: Some(v.residual),
                factor: v.factor,
                trace_len: v.trace_len,
                paper_eq: paper_eq.to_string(),
                time_ms,
                diagnostic: v.diagnostic,
                rows: v.rows,
            },
            Err(e) => CheckReport {
                id: id.to_string(),
                status: Status::Error,
                residual: None,
                factor: None,
                trace_len: 0,
                paper_eq: paper_eq.to_string(),
                time_ms,
                diagnostic: Some(e.to_string()),
                rows: Vec::new(),
            },
        }
    }
}

/// Whether `q` is one of the admitted unit factors: `±1`, `±k^{±1}` for a
/// parameter `k`, or `±exp(±f)` for a bare base field `f`.
pub fn is_unit_factor(q: &NormalForm) -> bool {
    if q.has_denominator() {
        return false;
    }
    let Some((m, c)) = q.numerator().as_monomial() else { return false };
    if !(c.is_integer() && (c.numer() == &1.into() || c.numer() == &(-1).into())) {
        return false;
    }
    match (m.powers(), m.has_exp()) {
        ([], false) => true,
        ([(Atom::Jet(j), e)], false) => j.field.kind() == FieldKind::Parameter && e.abs() == 1,
        ([], true) => {
            let Some((k, kc)) = m.exp_key().as_monomial() else { return false };
            let unit_coeff = kc.is_integer() && (kc.numer() == &1.into() || kc.numer() == &(-1).into());
            match k.powers() {
                [(Atom::Jet(j), 1)] => unit_coeff && j.index.is_zero() && j.field.kind() == FieldKind::Base,
                _ => false,
            }
        }
        _ => false,
    }
}

/// `a / b` when it is an admitted unit factor.
pub fn unit_ratio(a: &NormalForm, b: &NormalForm) -> Option<NormalForm> {
    if a.is_zero() || b.is_zero() {
        return None;
    }
    let q = a.div(b).ok()?;
    is_unit_factor(&q).then_some(q)
}

/// Rename fields everywhere in `e`, keeping kinds.
pub fn rename_fields(e: &NormalForm, map: &BTreeMap<FieldId, FieldId>) -> Result<NormalForm, Error> {
    e.substitute_with(&mut |a| match a {
        Atom::Jet(j) => Ok(map.get(&j.field).map(|f| NormalForm::jet(f.jet(j.index)))),
        Atom::Coord(_) => Ok(None),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Workspace;

    #[test]
    fn unit_factors() {
        let ws = Workspace::with("w r u", "q", "kappa").unwrap();
        for s in ["1", "-1", "exp(w)", "-exp(-r)", "kappa", "-1/kappa"] {
            assert!(is_unit_factor(&ws.nf(s).unwrap()), "{s}");
        }
        for s in ["2", "u", "exp(2*w)", "exp(w_x)", "kappa^2", "exp(w)*kappa", "1/(1 + w)", "q"] {
            assert!(!is_unit_factor(&ws.nf(s).unwrap()), "{s}");
        }
    }

    #[test]
    fn error_reports_carry_no_residual() {
        let r = CheckReport::run("x", "label", || Err(Error::DivisionByZero));
        assert_eq!(r.status, Status::Error);
        assert!(r.residual.is_none() && r.diagnostic.is_some());
        let r = CheckReport::run("x", "label", || Ok(Verdict::zero_test(&NormalForm::zero(), 0)));
        assert_eq!((r.status, r.residual.as_deref()), (Status::Pass, Some("0")));
    }
}
