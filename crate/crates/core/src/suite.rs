//! Named suites of checks over the catalog, and their reports.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::catalog::{Catalog, SystemRef};
use crate::expr::{Coordinate, FieldId, FieldKind, JetVar, MultiIndex, NormalForm};
use crate::jet::{Bindings, Covering, OrientedSystem};
use crate::numeric::{self, fixtures, Certified, Order};
use crate::verify::mutation::Mutator;
use crate::verify::reduction::{change_of_unknown, reduced_covering, Relation};
use crate::verify::{
    implicit_parameter_swap, solve_backlund_inverse, verify_backlund_compatibility, verify_backlund_forward,
    verify_change_of_unknown, verify_covering, verify_induced_equation, verify_point_map, verify_reduction,
    verify_round_trip, CheckReport, NumericRow, Status, Verdict,
};
use crate::Error;

/// Prefix of diagnostics that flag a disagreement between transcribed and
/// derived data.
pub const DISCREPANCY: &str = "DISCREPANCY: ";

pub const MUTATION_COUNT: usize = 10;
pub const MUTATION_SEED: u64 = 0x5eed;

/// Residual slope window for certified solutions.
pub const SLOPE_RANGE: (f64, f64) = (1.6, 2.4);
pub const COMMUTE_MIN_SLOPE: f64 = 1.6;
pub const CONTROL_MAX_SLOPE: f64 = 0.5;
pub const MONOTONE_SLACK: f64 = 0.1;
pub const ROUNDING: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteName {
    All,
    Coverings,
    Reductions,
    Backlund,
    Mutation,
    Numeric,
}

impl SuiteName {
    pub const ALL: [SuiteName; 6] = [
        SuiteName::All,
        SuiteName::Coverings,
        SuiteName::Reductions,
        SuiteName::Backlund,
        SuiteName::Mutation,
        SuiteName::Numeric,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::All => "all",
            SuiteName::Coverings => "coverings",
            SuiteName::Reductions => "reductions",
            SuiteName::Backlund => "backlund",
            SuiteName::Mutation => "mutation",
            SuiteName::Numeric => "numeric",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        SuiteName::ALL.into_iter().find(|n| n.as_str() == s)
    }

    fn contains(self, other: SuiteName) -> bool {
        self == SuiteName::All || self == other
    }
}

type Run = Box<dyn Fn(&Catalog) -> Result<Verdict, Error> + Send + Sync>;

pub struct Check {
    pub id: String,
    pub suite: SuiteName,
    /// Entry whose label is reported as the check's reference.
    pub anchor: &'static str,
    /// Every catalog entry the check reads.
    pub entries: Vec<&'static str>,
    run: Run,
}

impl Check {
    fn new(
        id: impl Into<String>,
        suite: SuiteName,
        entries: &[&'static str],
        run: impl Fn(&Catalog) -> Result<Verdict, Error> + Send + Sync + 'static,
    ) -> Self {
        Check { id: id.into(), suite, anchor: entries[0], entries: entries.to_vec(), run: Box::new(run) }
    }

    pub fn run(&self, cat: &Catalog) -> CheckReport {
        let paper_eq = cat.get(self.anchor).map(|e| e.label.clone()).unwrap_or_else(|_| self.anchor.to_string());
        CheckReport::run(&self.id, &paper_eq, || (self.run)(cat))
    }
}

fn system(cat: &Catalog, id: &str) -> Result<OrientedSystem, Error> {
    cat.system(&SystemRef::plain(id))
}

fn covering(cat: &Catalog, id: &str) -> Result<Covering, Error> {
    Ok(cat.covering(id)?.covering.clone())
}

fn covering_against(cov: &'static str, sys: &'static str) -> Run {
    Box::new(move |cat| verify_covering(&covering(cat, cov)?, &system(cat, sys)?))
}

fn equal_coverings(a: &Covering, b: &Covering) -> Verdict {
    for c in [Coordinate::T, Coordinate::Y] {
        let d = a.equation(c).unwrap().sub(b.equation(c).unwrap());
        if !d.is_zero() || a.fiber() != b.fiber() {
            return Verdict::zero_test(&d, 1).with_diagnostic(format!("{}_{c} differs", a.fiber()));
        }
    }
    Verdict::zero_test(&NormalForm::zero(), 2)
}

/// `cov.gen` modulo one equation of the system: must fail, and the residual
/// must contain the leading of the equation left out.
fn partial_system(cat: &Catalog, keep: usize) -> Result<Verdict, Error> {
    let full = system(cat, "sys.rdDym2")?;
    let missing = full.base_rules()[1 - keep].leading.clone();
    let sub = full.subsystem(&[keep])?;
    let r = sub.reduce_traced(&covering(cat, "cov.gen")?.compatibility_residual()?)?;
    let names = r.value.jets().contains(&missing);
    let passed = !r.value.is_zero() && names;
    let mut v = Verdict::decided(
        passed,
        format!(
            "modulo {} alone the residual {} {missing}: {}",
            full.base_rules()[keep].leading,
            if names { "contains" } else { "lacks" },
            r.value
        ),
    );
    v.trace_len = r.trace_len;
    Ok(v)
}

fn free_residual(cat: &Catalog) -> Result<Verdict, Error> {
    let cov = covering(cat, "cov.lambda")?;
    let sys = system(cat, "eq.rdDym")?;
    let eq = &sys.base_rules()[0].equation;
    let p_x = NormalForm::jet(cov.fiber().jet(MultiIndex::unit(Coordinate::X)));
    let lambda = NormalForm::jet(FieldId::parameter("lambda").bare());
    let shape = eq.mul(&p_x).div(&lambda)?;
    let r = cov.compatibility_residual()?;
    let ratio = r.div(&shape)?;
    let passed = ratio.as_constant().is_some_and(|c| c != num::zero());
    Ok(Verdict::decided(passed, format!("free residual {r}; ratio to the equation times p_x/lambda: {ratio}"))
        .with_factor(Some(&ratio)))
}

fn swap(cat: &Catalog) -> Result<Verdict, Error> {
    let q = covering(cat, "cov.q")?;
    let out = implicit_parameter_swap(&covering(cat, "cov.lambda")?, &FieldId::parameter("lambda"), q.fiber())?;
    Ok(equal_coverings(&out, &q))
}

fn reduction_check(id: &'static str) -> Run {
    Box::new(move |cat| {
        let red = cat.reduction(id)?;
        let (src, tgt) = (cat.system(&red.source)?, cat.system(&red.target)?);
        verify_reduction(&red.bindings, &src, &tgt)
    })
}

fn reduction_a(cat: &Catalog) -> Result<Verdict, Error> {
    let red = cat.reduction("red.A")?;
    let src = cat.system(&red.source)?;
    let v = verify_reduction(&red.bindings, &src, &cat.system(&red.target)?)?;
    let second = red.bindings.apply(&src.base_rules()[1].equation)?;
    if !second.is_zero() {
        let mut v = Verdict::zero_test(&second, v.trace_len);
        v.passed = false;
        return Ok(v.with_diagnostic("second equation is not identically zero"));
    }
    Ok(v)
}

fn point_map(cat: &Catalog) -> Result<Verdict, Error> {
    let red = cat.reduction("red.B")?;
    let (Some(point), Some(to)) = (&red.point, &red.point_target) else {
        return Err(Error::Precondition("red.B has no point map".into()));
    };
    verify_point_map(point, &cat.system(&red.target)?, &cat.system(to)?)
}

fn relation_of(cat: &Catalog, id: &str) -> Result<Relation, Error> {
    cat.reduction(id)?.relation.clone().ok_or_else(|| Error::Precondition(format!("{id} has no relation")))
}

fn change_check(id: &'static str) -> Run {
    Box::new(move |cat| {
        let red = cat.reduction(id)?;
        verify_change_of_unknown(
            &red.bindings,
            &relation_of(cat, id)?,
            &cat.system(&red.source)?,
            &cat.system(&red.target)?,
        )
    })
}

fn reduced(cat: &Catalog, id: &str) -> Result<(Covering, Covering), Error> {
    let red = cat.reduction(id)?;
    let (Some(change), Some((from, to))) = (&red.fiber_change, &red.cover) else {
        return Err(Error::Precondition(format!("{id} lacks fiber_change or cover")));
    };
    let relation = relation_of(cat, id)?;
    let elim = change_of_unknown(&red.bindings, &relation, &cat.system(&red.source)?)?;
    let cov = reduced_covering(
        &covering(cat, from)?,
        &red.bindings,
        &relation,
        &elim.eliminated,
        &change.new,
        &change.value,
    )?;
    Ok((cov, covering(cat, to)?))
}

fn reduced_covering_check(id: &'static str) -> Run {
    Box::new(move |cat| {
        let red = cat.reduction(id)?;
        let (cov, _) = reduced(cat, id)?;
        let v = verify_covering(&cov, &cat.system(&red.target)?)?;
        Ok(v.with_diagnostic(format!("{}_t = {}; {}_y = {}", cov.fiber(), cov.eq_t(), cov.fiber(), cov.eq_y())))
    })
}

fn reduced_matches_catalog(id: &'static str) -> Run {
    Box::new(move |cat| {
        let (cov, listed) = reduced(cat, id)?;
        let red = cat.reduction(id)?;
        let to = &red.cover.as_ref().unwrap().1;
        let v = equal_coverings(&cov, &listed);
        if v.passed {
            return Ok(v);
        }
        let f = cov.fiber();
        Ok(v.with_diagnostic(format!(
            "{DISCREPANCY}{to} lists {f}_t = {}, {f}_y = {}; the reduction gives {f}_t = {}, {f}_y = {}",
            listed.eq_t(),
            listed.eq_y(),
            cov.eq_t(),
            cov.eq_y()
        )))
    })
}

fn sign_sensitivity(cat: &Catalog) -> Result<Verdict, Error> {
    let red = cat.reduction("red.C")?;
    let rel = relation_of(cat, "red.C")?;
    let flipped = Relation { jet: rel.jet.clone(), value: rel.value.neg() };
    let v = verify_change_of_unknown(&red.bindings, &flipped, &cat.system(&red.source)?, &cat.system(&red.target)?)?;
    Ok(Verdict::decided(
        !v.passed,
        format!("with {} = {} the pipeline gives {}", flipped.jet, flipped.value, v.residual),
    ))
}

fn transformation_parts(cat: &Catalog, id: &str) -> Result<(Bindings, BTreeSet<FieldId>, OrientedSystem), Error> {
    let t = cat.transformation(id)?;
    Ok((t.bindings.clone(), t.defines.clone(), cat.system(&t.modulo)?))
}

fn forward_cover(id: &'static str) -> Run {
    Box::new(move |cat| {
        let t = cat.transformation(id)?;
        let (from, to) = t.cover.as_ref().ok_or_else(|| Error::Precondition(format!("{id} has no cover")))?;
        verify_backlund_forward(&t.bindings, &t.defines, &covering(cat, from)?, &covering(cat, to)?)
    })
}

fn compat(id: &'static str, modulo: Option<&'static str>) -> Run {
    Box::new(move |cat| {
        let (b, d, sys) = transformation_parts(cat, id)?;
        let sys = match modulo {
            Some(m) => cat.system(&SystemRef::parse(m).map_err(Error::Precondition)?)?,
            None => sys,
        };
        verify_backlund_compatibility(&b, &d, &sys)
    })
}

fn printed_vs_derived(cat: &Catalog) -> Result<Verdict, Error> {
    let (pb, pd, ps) = transformation_parts(cat, "bt.inverse_printed")?;
    let (db, dd, ds) = transformation_parts(cat, "bt.inverse_derived")?;
    let printed = verify_backlund_compatibility(&pb, &pd, &ps)?.passed;
    let derived = verify_backlund_compatibility(&db, &dd, &ds)?.passed;
    let word = |p: bool| if p { "passes" } else { "fails" };
    let mut diffs = Vec::new();
    let mut swapped = Vec::new();
    for (j, pv) in pb.jets() {
        let Some(dv) = db.get_jet(j) else {
            diffs.push(format!("{j} missing from the derived inverse"));
            continue;
        };
        if !pv.equals(dv) {
            diffs.push(format!("printed {j} = {pv}, derived {j} = {dv}"));
            if let Some((k, _)) = db.jets().iter().find(|(k, v)| *k != j && v.equals(pv)) {
                if pb.get_jet(k).is_some_and(|w| w.equals(dv)) && j < k {
                    swapped.push(format!("{j} and {k} are interchanged"));
                }
            }
        }
    }
    let mut msg = format!("bt.inverse_printed {}, bt.inverse_derived {}", word(printed), word(derived));
    if !diffs.is_empty() {
        msg = format!("{DISCREPANCY}{msg}; {}", diffs.join("; "));
        if !swapped.is_empty() {
            msg.push_str(&format!("; {}", swapped.join("; ")));
        }
    }
    let mut v = Verdict::decided(printed != derived, msg.clone());
    v.diagnostic = Some(msg);
    Ok(v)
}

fn round_trip(cat: &Catalog) -> Result<Verdict, Error> {
    let fwd = &cat.transformation("bt.forward")?.bindings;
    let inv = &cat.transformation("bt.inverse_derived")?.bindings;
    let fresh = solve_backlund_inverse(fwd)?;
    if &fresh != inv {
        let same = fresh.jets().iter().all(|(j, v)| inv.get_jet(j).is_some_and(|w| w.equals(v)));
        if !same {
            return Ok(Verdict::decided(false, "catalog entry differs from a fresh solve"));
        }
    }
    verify_round_trip(fwd, inv)
}

fn induced(id: &'static str, eq: &'static str) -> Run {
    Box::new(move |cat| {
        let (b, d, sys) = transformation_parts(cat, id)?;
        let eq = cat.system(&SystemRef::parse(eq).map_err(Error::Precondition)?)?;
        verify_induced_equation(&b, &d, &eq, &sys)
    })
}

fn rebind(b: &Bindings, key: &JetVar, value: NormalForm) -> Result<Bindings, Error> {
    let mut out = Bindings::new();
    for (f, v) in b.fields() {
        if key.index.is_zero() && f == &key.field {
            out.bind_field(f.clone(), value.clone())?;
        } else {
            out.bind_field(f.clone(), v.clone())?;
        }
    }
    for (j, v) in b.jets() {
        out.bind_jet(j.clone(), if j == key { value.clone() } else { v.clone() })?;
    }
    Ok(out)
}

fn pool(cat: &Catalog, id: &str) -> Result<Vec<JetVar>, Error> {
    Ok(cat.get(id)?.workspace.of_kind(FieldKind::Base).map(FieldId::bare).collect())
}

/// What the i-th mutation perturbs.
#[derive(Clone, Copy, Debug)]
enum Target {
    Covering(&'static str, &'static str, Coordinate),
    Reduction(&'static str, &'static str),
    Forward(&'static str, &'static str),
}

const MUTATIONS: [Target; MUTATION_COUNT] = [
    Target::Covering("cov.lambda", "eq.rdDym", Coordinate::T),
    Target::Covering("cov.q", "eq.rdDym", Coordinate::Y),
    Target::Covering("cov.gen", "sys.rdDym2", Coordinate::T),
    Target::Covering("cov.gen", "sys.rdDym2", Coordinate::Y),
    Target::Covering("cov.boyer_finley", "eq.boyer_finley", Coordinate::T),
    Target::Covering("cov.universal", "eq.universal", Coordinate::Y),
    Target::Covering("cov.deformed_bf_derived", "eq.deformed_bf", Coordinate::T),
    Target::Reduction("red.A", "v"),
    Target::Reduction("red.B", "v"),
    Target::Forward("bt.forward", "u_y"),
];

fn mutation(i: usize) -> Run {
    Box::new(move |cat| {
        let mut m = Mutator::new(MUTATION_SEED + i as u64);
        let (what, v) = match MUTATIONS[i] {
            Target::Covering(id, sys, c) => {
                let cov = covering(cat, id)?;
                let pristine = verify_covering(&cov, &system(cat, sys)?)?;
                let mutated = m.mutate(cov.equation(c).unwrap(), &pool(cat, id)?);
                let (t, y) = match c {
                    Coordinate::T => (mutated.clone(), cov.eq_y().clone()),
                    _ => (cov.eq_t().clone(), mutated.clone()),
                };
                let bad = Covering::new(cov.fiber().clone(), t, y)?;
                (
                    format!("{id}: {}_{c} = {mutated}", cov.fiber()),
                    (pristine, verify_covering(&bad, &system(cat, sys)?)?),
                )
            }
            Target::Reduction(id, field) => {
                let red = cat.reduction(id)?;
                let (src, tgt) = (cat.system(&red.source)?, cat.system(&red.target)?);
                let key = FieldId::base(field).bare();
                let old = red.bindings.fields().get(&key.field).cloned().unwrap_or_else(NormalForm::zero);
                let mutated = m.mutate(&old, &pool(cat, id)?);
                let bad = rebind(&red.bindings, &key, mutated.clone())?;
                let pristine = verify_reduction(&red.bindings, &src, &tgt)?;
                (format!("{id}: {field} = {mutated}"), (pristine, verify_reduction(&bad, &src, &tgt)?))
            }
            Target::Forward(id, jet) => {
                let t = cat.transformation(id)?;
                let (from, to) = t.cover.as_ref().ok_or_else(|| Error::Precondition(format!("{id} has no cover")))?;
                let key = cat.get(id)?.workspace.nf(jet)?.jets().into_iter().next().expect("jet");
                let mutated = m.mutate(t.bindings.get_jet(&key).expect("bound"), &pool(cat, id)?);
                let bad = rebind(&t.bindings, &key, mutated.clone())?;
                let (a, b) = (covering(cat, from)?, covering(cat, to)?);
                let pristine = verify_backlund_forward(&t.bindings, &t.defines, &a, &b)?;
                (format!("{id}: {key} = {mutated}"), (pristine, verify_backlund_forward(&bad, &t.defines, &a, &b)?))
            }
        };
        let (pristine, mutated) = v;
        if !pristine.passed {
            return Err(Error::Precondition(format!("unmutated check already fails for {what}")));
        }
        Ok(Verdict::decided(!mutated.passed, format!("{what} gives residual {}", mutated.residual)))
    })
}

fn rd_dym(cat: &Catalog) -> Result<OrientedSystem, Error> {
    system(cat, "eq.rdDym")
}

fn residual_check(solution: fn() -> numeric::ExactSolution, sys: &'static str, control: bool) -> Run {
    Box::new(move |cat| {
        let sys = system(cat, sys)?;
        let sol = if control { Certified::control(solution()) } else { solution().certify(&sys)? };
        let conv = numeric::estimate_convergence_order(&sol, &sys, &fixtures::unit_grid(), 2)?;
        let (passed, what) = match (&conv.order, control) {
            (Order::Exact, false) => (true, "exact".to_string()),
            (Order::Slope(s), false) => (
                *s >= SLOPE_RANGE.0 && *s <= SLOPE_RANGE.1 && conv.monotone(MONOTONE_SLACK),
                format!("slope {s:.3}, monotone {}", conv.monotone(MONOTONE_SLACK)),
            ),
            (Order::Slope(s), true) => (*s < CONTROL_MAX_SLOPE, format!("control slope {s:.3}")),
            (Order::Exact, true) => (false, "control residual vanishes".to_string()),
        };
        let mut v = Verdict::decided(passed, format!("{}; residuals {:?}", what, conv.residuals));
        v.rows = conv.rows;
        Ok(v)
    })
}

fn commute(cat: &Catalog, sol: Certified) -> Result<numeric::Commutativity, Error> {
    let cov = covering(cat, "cov.lambda")?;
    numeric::commutativity_test(&cov, &FieldId::parameter("lambda"), 1.0, &sol, &numeric::FlowSpec::default())
}

fn commute_wave(cat: &Catalog) -> Result<Verdict, Error> {
    let sol = commute(cat, fixtures::cubic_wave().certify(&rd_dym(cat)?)?)?;
    let ctl = commute(cat, Certified::control(fixtures::control()))?;
    let slope = sol.slope.unwrap_or(f64::NAN);
    let dominated = sol.mismatch.iter().zip(&ctl.mismatch).all(|(a, b)| a < b);
    let mut v = Verdict::decided(
        slope >= COMMUTE_MIN_SLOPE && dominated,
        format!("slope {slope:.3}; below the control at every level: {dominated}; mismatch {:?}", sol.mismatch),
    );
    v.rows = sol.rows;
    Ok(v)
}

fn commute_zero(cat: &Catalog) -> Result<Verdict, Error> {
    let sol = commute(cat, fixtures::zero().certify(&rd_dym(cat)?)?)?;
    let worst = sol.mismatch.iter().fold(0.0f64, |m, v| m.max(*v));
    let mut v = Verdict::decided(worst <= ROUNDING, format!("max mismatch {worst:e}"));
    v.rows = sol.rows;
    Ok(v)
}

fn commute_control(cat: &Catalog) -> Result<Verdict, Error> {
    let sol = commute(cat, Certified::control(fixtures::control()))?;
    let slope = sol.slope.unwrap_or(f64::NAN);
    let mut v =
        Verdict::decided(slope < CONTROL_MAX_SLOPE, format!("control slope {slope:.3}; mismatch {:?}", sol.mismatch));
    v.rows = sol.rows;
    Ok(v)
}

/// Every check, in id order.
pub fn checks() -> Vec<Check> {
    use SuiteName::*;
    let mut out = Vec::new();
    for (cov, sys) in [
        ("cov.lambda", "eq.rdDym"),
        ("cov.q", "eq.rdDym"),
        ("cov.gen", "sys.rdDym2"),
        ("cov.boyer_finley", "eq.boyer_finley"),
        ("cov.deformed_bf", "eq.deformed_bf"),
        ("cov.deformed_bf_derived", "eq.deformed_bf"),
        ("cov.bogdanov", "sys.bogdanov"),
        ("cov.universal", "eq.universal"),
    ] {
        out.push(Check {
            id: cov.to_string(),
            suite: Coverings,
            anchor: cov,
            entries: vec![cov, sys],
            run: covering_against(cov, sys),
        });
    }
    out.push(Check {
        id: "cov.bogdanov.compat_system".into(),
        suite: Coverings,
        anchor: "sys.bogdanov_compat",
        entries: vec!["sys.bogdanov_compat", "cov.bogdanov"],
        run: covering_against("cov.bogdanov", "sys.bogdanov_compat"),
    });
    out.push(Check::new("cov.gen.first_equation_only", Coverings, &["sys.rdDym2", "cov.gen"], |c| {
        partial_system(c, 0)
    }));
    out.push(Check::new("cov.gen.second_equation_only", Coverings, &["sys.rdDym2", "cov.gen"], |c| {
        partial_system(c, 1)
    }));
    out.push(Check::new("cov.lambda.free_residual", Coverings, &["cov.lambda", "eq.rdDym"], free_residual));
    out.push(Check::new("cov.swap", Coverings, &["cov.q", "cov.lambda"], swap));

    out.push(Check::new("red.A", Reductions, &["red.A", "sys.rdDym2", "eq.rdDym"], reduction_a));
    out.push(Check {
        id: "red.B".into(),
        suite: Reductions,
        anchor: "red.B",
        entries: vec!["red.B", "sys.rdDym2", "eq.rdDym_general_transformed"],
        run: reduction_check("red.B"),
    });
    out.push(Check::new(
        "red.B.point_map",
        Reductions,
        &["eq.rdDym_general", "red.B", "eq.rdDym_general_transformed"],
        point_map,
    ));
    for (id, eq, derived, cov) in [
        ("red.C", "eq.boyer_finley", "cov.boyer_finley", "cov.boyer_finley"),
        ("red.D", "eq.deformed_bf", "cov.deformed_bf_derived", "cov.deformed_bf"),
    ] {
        out.push(Check {
            id: id.into(),
            suite: Reductions,
            anchor: eq,
            entries: vec![eq, id, "sys.rdDym2"],
            run: change_check(id),
        });
        out.push(Check {
            id: format!("{id}.covering"),
            suite: Reductions,
            anchor: derived,
            entries: vec![derived, id, "cov.gen", eq],
            run: reduced_covering_check(id),
        });
        out.push(Check {
            id: format!("{id}.covering.catalog"),
            suite: Reductions,
            anchor: cov,
            entries: vec![cov, id, "cov.gen"],
            run: reduced_matches_catalog(id),
        });
    }
    out.push(Check::new("red.C.sign_sensitivity", Reductions, &["red.C", "eq.boyer_finley"], sign_sensitivity));
    out.push(Check {
        id: "red.s_eq_x".into(),
        suite: Reductions,
        anchor: "red.s_eq_x",
        entries: vec!["red.s_eq_x", "sys.bogdanov", "eq.boyer_finley_r"],
        run: reduction_check("red.s_eq_x"),
    });

    out.push(Check {
        id: "bt.forward.cover".into(),
        suite: Backlund,
        anchor: "bt.forward",
        entries: vec!["bt.forward", "cov.gen", "cov.bogdanov"],
        run: forward_cover("bt.forward"),
    });
    out.push(Check {
        id: "bt.forward.compat".into(),
        suite: Backlund,
        anchor: "bt.forward",
        entries: vec!["bt.forward", "sys.bogdanov"],
        run: compat("bt.forward", None),
    });
    out.push(Check {
        id: "bt.forward.compat.compat_system".into(),
        suite: Backlund,
        anchor: "bt.forward",
        entries: vec!["bt.forward", "sys.bogdanov_compat"],
        run: compat("bt.forward", Some("sys.bogdanov_compat")),
    });
    out.push(Check {
        id: "bt.inverse.printed".into(),
        suite: Backlund,
        anchor: "bt.inverse_printed",
        entries: vec!["bt.inverse_printed", "sys.rdDym2"],
        run: compat("bt.inverse_printed", None),
    });
    out.push(Check {
        id: "bt.inverse.derived".into(),
        suite: Backlund,
        anchor: "bt.inverse_derived",
        entries: vec!["bt.inverse_derived", "sys.rdDym2"],
        run: compat("bt.inverse_derived", None),
    });
    out.push(Check::new(
        "bt.inverse.printed_vs_derived",
        Backlund,
        &["bt.inverse_printed", "bt.inverse_derived"],
        printed_vs_derived,
    ));
    out.push(Check::new("bt.inverse.round_trip", Backlund, &["bt.inverse_derived", "bt.forward"], round_trip));
    out.push(Check {
        id: "bt.scalar.forward.cover".into(),
        suite: Backlund,
        anchor: "bt.scalar_forward",
        entries: vec!["bt.scalar_forward", "cov.q", "cov.universal"],
        run: forward_cover("bt.scalar_forward"),
    });
    out.push(Check {
        id: "bt.scalar.forward.compat".into(),
        suite: Backlund,
        anchor: "bt.scalar_forward",
        entries: vec!["bt.scalar_forward", "eq.universal"],
        run: compat("bt.scalar_forward", None),
    });
    out.push(Check {
        id: "bt.scalar.induced.pavlov".into(),
        suite: Backlund,
        anchor: "eq.pavlov",
        entries: vec!["eq.pavlov", "bt.scalar_forward", "eq.universal"],
        run: induced("bt.scalar_forward", "eq.pavlov s -> u"),
    });
    out.push(Check {
        id: "bt.scalar.induced.rdDym".into(),
        suite: Backlund,
        anchor: "eq.rdDym",
        entries: vec!["eq.rdDym", "bt.scalar_forward", "eq.universal"],
        run: induced("bt.scalar_forward", "eq.rdDym"),
    });
    out.push(Check {
        id: "bt.scalar.inverse.compat".into(),
        suite: Backlund,
        anchor: "bt.scalar_inverse",
        entries: vec!["bt.scalar_inverse", "eq.pavlov"],
        run: compat("bt.scalar_inverse", None),
    });
    out.push(Check {
        id: "bt.scalar.inverse.compat.rdDym".into(),
        suite: Backlund,
        anchor: "bt.scalar_inverse",
        entries: vec!["bt.scalar_inverse", "eq.rdDym"],
        run: compat("bt.scalar_inverse", Some("eq.rdDym")),
    });

    for (i, t) in MUTATIONS.iter().enumerate() {
        let entries: Vec<&'static str> = match *t {
            Target::Covering(id, sys, _) => vec![id, sys],
            Target::Reduction(id, _) => vec![id],
            Target::Forward(id, _) => vec![id, "cov.gen", "cov.bogdanov"],
        };
        out.push(Check {
            id: format!("mutation.{i:02}"),
            suite: Mutation,
            anchor: entries[0],
            entries,
            run: mutation(i),
        });
    }

    out.push(Check::new("num.commute.control_xyt", Numeric, &["cov.lambda"], commute_control));
    out.push(Check::new("num.commute.cubic_wave", Numeric, &["cov.lambda", "eq.rdDym"], commute_wave));
    out.push(Check::new("num.commute.zero", Numeric, &["cov.lambda", "eq.rdDym"], commute_zero));
    out.push(Check {
        id: "num.residual.control_xyt".into(),
        suite: Numeric,
        anchor: "eq.rdDym",
        entries: vec!["eq.rdDym"],
        run: residual_check(fixtures::control, "eq.rdDym", true),
    });
    out.push(Check {
        id: "num.residual.cubic_wave".into(),
        suite: Numeric,
        anchor: "eq.rdDym",
        entries: vec!["eq.rdDym"],
        run: residual_check(fixtures::cubic_wave, "eq.rdDym", false),
    });
    out.push(Check {
        id: "num.residual.linear_pair".into(),
        suite: Numeric,
        anchor: "sys.rdDym2",
        entries: vec!["sys.rdDym2"],
        run: residual_check(fixtures::linear_pair, "sys.rdDym2", false),
    });
    out.push(Check {
        id: "num.residual.radical_pair".into(),
        suite: Numeric,
        anchor: "sys.rdDym2",
        entries: vec!["sys.rdDym2"],
        run: residual_check(fixtures::radical_pair, "sys.rdDym2", false),
    });

    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

pub fn checks_for(suite: SuiteName) -> Vec<Check> {
    checks().into_iter().filter(|c| suite.contains(c.suite)).collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub error: usize,
    pub total: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Discrepancy {
    pub id: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteResult {
    pub suite: SuiteName,
    pub checks: Vec<CheckReport>,
    pub summary: Summary,
    pub discrepancies: Vec<Discrepancy>,
    pub time_ms: u64,
}

impl SuiteResult {
    fn new(suite: SuiteName, mut checks: Vec<CheckReport>, time_ms: u64) -> Self {
        checks.sort_by(|a, b| a.id.cmp(&b.id));
        let mut summary = Summary { total: checks.len(), ..Summary::default() };
        let mut discrepancies = Vec::new();
        for c in &checks {
            match c.status {
                Status::Pass => summary.pass += 1,
                Status::Fail => summary.fail += 1,
                Status::Error => summary.error += 1,
            }
            if let Some(m) = c.diagnostic.as_deref().and_then(|d| d.strip_prefix(DISCREPANCY)) {
                discrepancies.push(Discrepancy { id: c.id.clone(), message: m.to_string() });
            }
        }
        SuiteResult { suite, checks, summary, discrepancies, time_ms }
    }

    /// 0 if every check passed, 2 if any errored, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.summary.error > 0 {
            2
        } else if self.summary.fail > 0 {
            1
        } else {
            0
        }
    }

    pub fn get(&self, id: &str) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let width = self.checks.iter().map(|c| c.id.len()).max().unwrap_or(0);
        for c in &self.checks {
            let factor = c.factor.as_deref().map(|f| format!("  factor {f}")).unwrap_or_default();
            let _ = writeln!(s, "{:<5}  {:<width$}{factor}  [{}]", c.status.to_string(), c.id, c.paper_eq);
            if c.status != Status::Pass {
                if let Some(r) = c.residual.as_deref() {
                    let _ = writeln!(s, "       residual: {r}");
                }
                if let Some(d) = c.diagnostic.as_deref() {
                    let _ = writeln!(s, "       {d}");
                }
            }
        }
        for d in &self.discrepancies {
            let _ = writeln!(s, "DISCREPANCY {}: {}", d.id, d.message);
        }
        let _ = writeln!(
            s,
            "{}: {} pass, {} fail, {} error, {} total ({} ms)",
            self.suite.as_str(),
            self.summary.pass,
            self.summary.fail,
            self.summary.error,
            self.summary.total,
            self.time_ms
        );
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn numeric_rows(&self) -> Vec<&NumericRow> {
        self.checks.iter().flat_map(|c| &c.rows).collect()
    }
}

/// Run a suite on `threads` workers (1 runs in the calling thread).
pub fn run_suite(cat: &Catalog, suite: SuiteName, threads: usize) -> Result<SuiteResult, Error> {
    let start = Instant::now();
    let checks = checks_for(suite);
    let reports: Vec<CheckReport> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Precondition(e.to_string()))?;
        pool.install(|| checks.par_iter().map(|c| c.run(cat)).collect())
    } else {
        checks.iter().map(|c| c.run(cat)).collect()
    };
    Ok(SuiteResult::new(suite, reports, start.elapsed().as_millis() as u64))
}

/// Catalog entries read by no check.
pub fn unreferenced(cat: &Catalog) -> Vec<String> {
    let used: BTreeSet<&str> = checks().iter().flat_map(|c| c.entries.clone()).collect();
    cat.ids().filter(|id| !used.contains(id)).map(str::to_string).collect()
}
