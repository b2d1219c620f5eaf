use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::{Arc, Mutex};

use super::total_derivative;
use crate::expr::{Atom, Coordinate, FieldKind, JetVar, MultiIndex, NormalForm};
use crate::Error;

/// Default cap on substitution passes of one reduction.
pub const ITERATION_CAP: usize = 64;

/// `leading = rhs`. `equation` keeps the relation as written (`lhs - rhs`),
/// which may differ from `leading - rhs` by a unit factor when the written
/// left-hand side was not a single jet.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub leading: JetVar,
    pub rhs: NormalForm,
    pub equation: NormalForm,
}

impl Rule {
    pub fn new(leading: JetVar, rhs: NormalForm) -> Self {
        let equation = NormalForm::jet(leading.clone()).sub(&rhs);
        Rule { leading, rhs, equation }
    }

    /// Solve the relation `equation = 0` for `leading`; the relation must be
    /// linear in it.
    pub fn orient(equation: NormalForm, leading: JetVar) -> Result<Self, Error> {
        let atom = Atom::Jet(leading.clone());
        let a = equation.partial(&atom)?;
        if a.is_zero() || a.contains_atom(&atom) {
            return Err(Error::Orientation(format!("relation is not linear in {leading}: {equation}")));
        }
        let rhs = NormalForm::jet(leading.clone()).sub(&equation.div(&a)?);
        if rhs.contains_atom(&atom) {
            return Err(Error::Orientation(format!("{leading} survives on the right-hand side")));
        }
        Ok(Rule { leading, rhs, equation })
    }

    /// Rule oriented on the highest-order jet of `lhs` (ties broken by jet order).
    pub fn from_relation(lhs: &NormalForm, rhs: &NormalForm) -> Result<Self, Error> {
        let candidates = lhs.jets().into_iter().filter(|j| j.field.kind() == FieldKind::Base);
        let leading = candidates
            .max_by(|a, b| a.order().cmp(&b.order()).then_with(|| a.cmp(b)))
            .ok_or_else(|| Error::Orientation(format!("no base jet on the left-hand side of {lhs} = {rhs}")))?;
        if lhs == &NormalForm::jet(leading.clone()) {
            let mut rule = Rule::new(leading, rhs.clone());
            rule.equation = lhs.sub(rhs);
            return Ok(rule);
        }
        Rule::orient(lhs.sub(rhs), leading)
    }
}

/// A system of rewrite rules `leading -> rhs`, prolonged on demand.
///
/// Values of principal jets (derivatives of a leading) are memoized once fully
/// reduced; the cache is internal and never observable.
#[derive(Clone, Debug)]
pub struct OrientedSystem {
    rules: Vec<Rule>,
    origin: Vec<Rule>,
    order: usize,
    cache: Arc<Mutex<HashMap<JetVar, NormalForm>>>,
}

impl PartialEq for OrientedSystem {
    fn eq(&self, other: &Self) -> bool {
        self.rules == other.rules && self.order == other.order
    }
}

/// Result of a reduction with the number of substitution passes it took.
#[derive(Clone, Debug, PartialEq)]
pub struct Reduced {
    pub value: NormalForm,
    pub trace_len: usize,
}

impl OrientedSystem {
    pub fn new(rules: Vec<Rule>) -> Result<Self, Error> {
        let mut seen = HashSet::new();
        for r in &rules {
            if r.leading.field.kind() != FieldKind::Base {
                return Err(Error::Orientation(format!("leading {} is not a base jet", r.leading)));
            }
            if !seen.insert(r.leading.clone()) {
                return Err(Error::LeadingCollision(r.leading.to_string()));
            }
        }
        for r in &rules {
            for j in r.rhs.jets() {
                if let Some(l) = rules.iter().find(|l| j.is_derivative_of(&l.leading)) {
                    if l.leading == r.leading || j == l.leading {
                        return Err(Error::Orientation(format!(
                            "leading {} occurs in the right-hand side of {}",
                            j, r.leading
                        )));
                    }
                }
            }
        }
        let order = rules.iter().map(|r| r.leading.order()).max().unwrap_or(0);
        Ok(OrientedSystem { origin: rules.clone(), rules, order, cache: Arc::default() })
    }

    pub fn empty() -> Self {
        OrientedSystem { rules: Vec::new(), origin: Vec::new(), order: 0, cache: Arc::default() }
    }

    /// Rules as listed: the original ones, plus their prolongations after
    /// [`OrientedSystem::prolong`].
    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// The rules the system was built from.
    pub fn base_rules(&self) -> &[Rule] {
        &self.origin
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Subsystem with the rules at the given positions.
    pub fn subsystem(&self, keep: &[usize]) -> Result<Self, Error> {
        OrientedSystem::new(keep.iter().map(|i| self.origin[*i].clone()).collect())
    }

    pub fn is_principal(&self, j: &JetVar) -> bool {
        self.origin.iter().any(|r| j.is_derivative_of(&r.leading))
    }

    fn rule_for(&self, j: &JetVar) -> Result<Option<&Rule>, Error> {
        let mut it = self.origin.iter().filter(|r| j.is_derivative_of(&r.leading));
        let first = it.next();
        if it.next().is_some() {
            return Err(Error::LeadingCollision(j.to_string()));
        }
        Ok(first)
    }

    /// All rules up to the given order: each original rule together with its
    /// total-derivative images, reduced and oriented on the derivative of the
    /// original leading.
    pub fn prolong(&self, order: usize) -> Result<OrientedSystem, Error> {
        let order = order.max(self.order);
        let mut rules = Vec::new();
        let mut leadings: BTreeMap<JetVar, usize> = BTreeMap::new();
        for (k, rule) in self.origin.iter().enumerate() {
            for extra in indices_up_to(order.saturating_sub(rule.leading.order())) {
                let j = JetVar::new(rule.leading.field.clone(), rule.leading.index.plus(&extra));
                if let Some(other) = leadings.insert(j.clone(), k) {
                    if other != k {
                        return Err(Error::LeadingCollision(j.to_string()));
                    }
                }
                if extra.is_zero() {
                    rules.push(rule.clone());
                } else {
                    let rhs = self.reducer().value(&j)?.expect("principal jet");
                    rules.push(Rule::new(j, rhs));
                }
            }
        }
        Ok(OrientedSystem { rules, origin: self.origin.clone(), order, cache: Arc::clone(&self.cache) })
    }

    fn reducer(&self) -> Reducer<'_> {
        Reducer { sys: self, in_progress: HashSet::new(), trace: 0 }
    }

    /// Normal form modulo the prolonged system.
    pub fn reduce(&self, e: &NormalForm) -> Result<NormalForm, Error> {
        Ok(self.reduce_traced(e)?.value)
    }

    pub fn reduce_traced(&self, e: &NormalForm) -> Result<Reduced, Error> {
        let mut r = self.reducer();
        let value = r.reduce(e)?;
        Ok(Reduced { value, trace_len: r.trace })
    }

    /// Apply `f` to every right-hand side and equation.
    pub fn map(&self, mut f: impl FnMut(&NormalForm) -> Result<NormalForm, Error>) -> Result<Self, Error> {
        let rules = self
            .origin
            .iter()
            .map(|r| Ok(Rule { leading: r.leading.clone(), rhs: f(&r.rhs)?, equation: f(&r.equation)? }))
            .collect::<Result<Vec<_>, Error>>()?;
        OrientedSystem::new(rules)
    }
}

fn indices_up_to(order: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for t in 0..=order {
        for y in 0..=order - t {
            for x in 0..=order - t - y {
                out.push(MultiIndex::new(t as u8, x as u8, y as u8));
            }
        }
    }
    out.sort_by_key(|m| (m.order(), *m));
    out
}

struct Reducer<'a> {
    sys: &'a OrientedSystem,
    in_progress: HashSet<JetVar>,
    trace: usize,
}

impl Reducer<'_> {
    fn reduce(&mut self, e: &NormalForm) -> Result<NormalForm, Error> {
        let mut cur = e.clone();
        for _ in 0..ITERATION_CAP {
            let principal: Vec<JetVar> = cur.jets().into_iter().filter(|j| self.sys.is_principal(j)).collect();
            if principal.is_empty() {
                return Ok(cur);
            }
            self.trace += 1;
            let mut values = HashMap::new();
            for j in principal {
                let v = self.value(&j)?.expect("principal jet");
                values.insert(Atom::Jet(j), v);
            }
            cur = cur.substitute_with(&mut |a| Ok(values.get(a).cloned()))?;
        }
        Err(Error::IterationCap(ITERATION_CAP))
    }

    /// Fully reduced value of a principal jet, `None` for parametric jets.
    fn value(&mut self, j: &JetVar) -> Result<Option<NormalForm>, Error> {
        let Some(rule) = self.sys.rule_for(j)? else { return Ok(None) };
        if let Some(v) = self.sys.cache.lock().unwrap().get(j) {
            return Ok(Some(v.clone()));
        }
        if !self.in_progress.insert(j.clone()) {
            return Err(Error::IterationCap(ITERATION_CAP));
        }
        let v = if *j == rule.leading {
            self.reduce(&rule.rhs)?
        } else {
            let extra = j.index.minus(&rule.leading.index).expect("dominates");
            let c = [Coordinate::X, Coordinate::Y, Coordinate::T].into_iter().find(|c| extra.get(*c) > 0).unwrap();
            let prev_jet = JetVar::new(j.field.clone(), j.index.lowered(c).unwrap());
            let prev = self.value(&prev_jet)?.expect("still principal");
            let d = total_derivative(&prev, c, None)?;
            self.reduce(&d)?
        };
        self.in_progress.remove(j);
        self.sys.cache.lock().unwrap().insert(j.clone(), v.clone());
        Ok(Some(v))
    }
}

/// Fixture rule lines, one per rule: `leading = rhs`.
impl fmt::Display for OrientedSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{} = {}", r.leading, r.rhs)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Workspace;

    fn ws() -> Workspace {
        Workspace::with("u v r s", "q", "kappa").unwrap()
    }

    fn jet(ws: &Workspace, s: &str) -> JetVar {
        ws.nf(s).unwrap().jets().into_iter().next().unwrap()
    }

    fn rd_dym2(ws: &Workspace) -> OrientedSystem {
        OrientedSystem::new(vec![
            Rule::new(jet(ws, "u_ty"), ws.nf("(u_x + v)*u_xy - u_y*u_xx").unwrap()),
            Rule::new(jet(ws, "v_ty"), ws.nf("(u_x + v)*v_xy - u_y*v_xx + v_x*v_y").unwrap()),
        ])
        .unwrap()
    }

    #[test]
    fn reduces_its_own_equation_to_zero() {
        let ws = ws();
        let sys = rd_dym2(&ws);
        let e = ws.nf("u_ty - (u_x + v)*u_xy + u_y*u_xx").unwrap();
        assert!(sys.reduce(&e).unwrap().is_zero());
        let e = ws.nf("u_x").unwrap();
        assert_eq!(sys.reduce(&e).unwrap(), e);
    }

    #[test]
    fn prolonged_consequences_reduce_to_zero() {
        let ws = ws();
        let sys = rd_dym2(&ws);
        let e = ws.nf("D[u_ty - (u_x + v)*u_xy + u_y*u_xx, x, t]").unwrap();
        let r = sys.reduce_traced(&e).unwrap();
        assert!(r.value.is_zero());
        assert!(r.trace_len >= 1);
    }

    #[test]
    fn prolongation_contains_higher_rules() {
        let ws = ws();
        let sys =
            OrientedSystem::new(vec![Rule::new(jet(&ws, "u_ty"), ws.nf("u_x*u_xy - u_y*u_xx").unwrap())]).unwrap();
        let p = sys.prolong(3).unwrap();
        assert!(p.rules().iter().any(|r| r.leading == jet(&ws, "u_txy")));
        assert_eq!(p.rules().len(), 4);
        assert_eq!(sys.prolong(2).unwrap(), sys);
        let e = ws.nf("u_txy*u_tyy").unwrap();
        assert_eq!(p.reduce(&e).unwrap(), sys.reduce(&e).unwrap());
        for r in p.rules() {
            assert!(r.rhs.jets().iter().all(|j| !sys.is_principal(j)));
        }
    }

    #[test]
    fn reduction_is_a_projection() {
        let ws = ws();
        let sys = rd_dym2(&ws);
        let e = ws.nf("u_tyy*v_txy + exp(u_ty)").unwrap();
        let once = sys.reduce(&e).unwrap();
        assert_eq!(sys.reduce(&once).unwrap(), once);
    }

    #[test]
    fn orientation_on_highest_jet() {
        let ws = ws();
        let lhs = ws.nf("D[exp(-r), x, x]").unwrap();
        let rhs = ws.nf("s_x*r_ty - s_t*r_xy").unwrap();
        let rule = Rule::from_relation(&lhs, &rhs).unwrap();
        assert_eq!(rule.leading, jet(&ws, "r_xx"));
        assert!(rule.rhs.equals(&ws.nf("r_x^2 - exp(r)*(s_x*r_ty - s_t*r_xy)").unwrap()));
    }

    #[test]
    fn collisions_and_self_reference() {
        let ws = ws();
        let two = OrientedSystem::new(vec![
            Rule::new(jet(&ws, "u_ty"), ws.nf("u_x").unwrap()),
            Rule::new(jet(&ws, "u_xx"), ws.nf("u_y").unwrap()),
        ])
        .unwrap();
        assert!(matches!(two.prolong(4), Err(Error::LeadingCollision(_))));
        assert!(OrientedSystem::new(vec![Rule::new(jet(&ws, "u_ty"), ws.nf("u_txy").unwrap())]).is_err());
    }

    #[test]
    fn cycles_hit_the_cap() {
        let ws = ws();
        let sys = OrientedSystem::new(vec![
            Rule::new(jet(&ws, "u_t"), ws.nf("v_x").unwrap()),
            Rule::new(jet(&ws, "v_x"), ws.nf("u_t").unwrap()),
        ]);
        // leadings appearing in other right-hand sides are rejected up front
        assert!(sys.is_err());
        let sys = OrientedSystem::new(vec![
            Rule::new(jet(&ws, "u_t"), ws.nf("v_xx").unwrap()),
            Rule::new(jet(&ws, "v_x"), ws.nf("u_tx").unwrap()),
        ])
        .unwrap();
        assert!(matches!(sys.reduce(&ws.nf("u_t").unwrap()), Err(Error::IterationCap(_))));
    }
}
