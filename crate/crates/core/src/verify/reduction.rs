use crate::expr::{Atom, Coordinate, FieldId, JetVar, NormalForm};
use crate::jet::{total_derivative, total_derivative_multi, Bindings, Covering, OrientedSystem, Rule};
use crate::Error;

use super::{unit_ratio, Verdict};

/// Pass iff every substituted source equation reduces to zero modulo the
/// prolonged target, and at least one of them is a unit multiple of a target
/// equation. The matching factor is recorded.
pub fn verify_reduction(
    bindings: &Bindings,
    source: &OrientedSystem,
    target: &OrientedSystem,
) -> Result<Verdict, Error> {
    let mut trace = 0;
    let mut factor = None;
    let mut failing = None;
    let mut identities = 0;
    for rule in source.base_rules() {
        let e = bindings.apply(&rule.equation)?;
        if e.is_zero() {
            identities += 1;
            continue;
        }
        if factor.is_none() {
            factor = target.base_rules().iter().find_map(|t| unit_ratio(&e, &t.equation));
        }
        let r = target.reduce_traced(&e)?;
        trace += r.trace_len;
        if !r.value.is_zero() && failing.is_none() {
            failing = Some(r.value);
        }
    }
    let residual = failing.clone().unwrap_or_else(NormalForm::zero);
    let mut v = Verdict::zero_test(&residual, trace).with_factor(factor.as_ref());
    if factor.is_none() {
        v.passed = false;
        v = v.with_diagnostic("no substituted equation is a unit multiple of the target");
    } else if identities > 0 {
        v = v.with_diagnostic(format!("{identities} substituted equation(s) vanish identically"));
    }
    Ok(v)
}

/// Pass iff the point map sends the equation of `from` to a unit multiple of
/// the equation of `to`.
pub fn verify_point_map(map: &Bindings, from: &OrientedSystem, to: &OrientedSystem) -> Result<Verdict, Error> {
    let mut factor = None;
    for (a, b) in from.base_rules().iter().zip(to.base_rules()) {
        let e = map.apply(&a.equation)?;
        match unit_ratio(&e, &b.equation) {
            Some(f) => {
                factor.get_or_insert(f);
            }
            None => {
                let r = to.reduce_traced(&e)?;
                let residual = if r.value.is_zero() { e } else { r.value };
                let mut v = Verdict::zero_test(&residual, r.trace_len);
                v.passed = false;
                return Ok(v.with_diagnostic("image is not a unit multiple of the target equation"));
            }
        }
    }
    Ok(Verdict::zero_test(&NormalForm::zero(), 1).with_factor(factor.as_ref()))
}

/// A relation `f_σ = value` used to eliminate every jet of `f` whose index
/// dominates σ.
#[derive(Clone, Debug)]
pub struct Relation {
    pub jet: JetVar,
    pub value: NormalForm,
}

impl Relation {
    pub fn rewrite(&self, e: &NormalForm) -> Result<NormalForm, Error> {
        e.substitute_with(&mut |a| match a {
            Atom::Jet(j) if j.field == self.jet.field => match j.index.minus(&self.jet.index) {
                Some(extra) => Ok(Some(total_derivative_multi(&self.value, extra, None)?)),
                None => Ok(None),
            },
            _ => Ok(None),
        })
    }
}

/// Outcome of the change-of-unknown pipeline.
#[derive(Clone, Debug)]
pub struct ChangeOfUnknown {
    /// The remaining pure-x jet solved from the rewritten first equation.
    pub eliminated: Rule,
    /// The y-differentiated first equation after all rewriting.
    pub result: NormalForm,
    pub trace_len: usize,
}

/// Substitute `bindings`, rewrite through `relation`, solve the rewritten
/// first equation for its remaining jet of the related field, and feed that
/// into the y-derivative of the first equation.
pub fn change_of_unknown(
    bindings: &Bindings,
    relation: &Relation,
    source: &OrientedSystem,
) -> Result<ChangeOfUnknown, Error> {
    let first = source.base_rules().first().ok_or_else(|| Error::Precondition("empty source system".into()))?;
    let e = bindings.apply(&first.equation)?;
    let rewritten = relation.rewrite(&e)?;
    let field = &relation.jet.field;
    let lead = rewritten
        .jets()
        .into_iter()
        .filter(|j| j.field == *field)
        .max_by(|a, b| a.order().cmp(&b.order()).then_with(|| a.cmp(b)))
        .ok_or_else(|| Error::Precondition(format!("no jet of {} left to isolate in {rewritten}", field.name())))?;
    let eliminated = Rule::orient(rewritten, lead.clone())
        .map_err(|e| Error::Precondition(format!("cannot isolate {lead}: {e}")))?;
    let sys = OrientedSystem::new(vec![eliminated.clone()])?;
    let dy = total_derivative(&e, Coordinate::Y, None)?;
    let reduced = sys.reduce_traced(&relation.rewrite(&dy)?)?;
    Ok(ChangeOfUnknown { eliminated, result: reduced.value, trace_len: reduced.trace_len + 1 })
}

/// Pass iff the pipeline result is a unit multiple of the target equation.
pub fn verify_change_of_unknown(
    bindings: &Bindings,
    relation: &Relation,
    source: &OrientedSystem,
    target: &OrientedSystem,
) -> Result<Verdict, Error> {
    let c = change_of_unknown(bindings, relation, source)?;
    let goal = &target.base_rules().first().ok_or_else(|| Error::Precondition("empty target system".into()))?.equation;
    if let Some(f) = unit_ratio(&c.result, goal) {
        return Ok(Verdict::zero_test(&NormalForm::zero(), c.trace_len)
            .with_factor(Some(&f))
            .with_diagnostic(format!("eliminated {} = {}", c.eliminated.leading, c.eliminated.rhs)));
    }
    let mut v = Verdict::zero_test(&c.result, c.trace_len);
    v.passed = false;
    Ok(v.with_diagnostic("pipeline result is not a unit multiple of the target equation"))
}

/// The covering induced on the reduced equation: substitute, rewrite through
/// the relation and the eliminated jet, then change the fiber by
/// `old = g(new)` so that `old_c = g'(new) new_c`.
pub fn reduced_covering(
    cov: &Covering,
    bindings: &Bindings,
    relation: &Relation,
    eliminated: &Rule,
    new_fiber: &FieldId,
    g: &NormalForm,
) -> Result<Covering, Error> {
    let sys = OrientedSystem::new(vec![eliminated.clone()])?;
    let mut change = Bindings::new();
    change.bind_field(cov.fiber().clone(), g.clone())?;
    let dg = g.partial(&Atom::Jet(new_fiber.bare()))?;
    let mut eqs = Vec::new();
    for c in [Coordinate::T, Coordinate::Y] {
        let e = bindings.apply(cov.equation(c).unwrap())?;
        let e = sys.reduce(&relation.rewrite(&e)?)?;
        eqs.push(change.apply(&e)?.div(&dg)?);
    }
    let eq_y = eqs.pop().unwrap();
    let eq_t = eqs.pop().unwrap();
    Covering::new(new_fiber.clone(), eq_t, eq_y)
}
