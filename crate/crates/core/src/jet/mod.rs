//! Total derivatives on jet space, coverings, substitution, and oriented
//! systems with on-demand prolongation.

pub mod fixture;
mod system;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

pub use fixture::Fixture;
pub use system::{OrientedSystem, Reduced, Rule, ITERATION_CAP};

use crate::expr::{Atom, Coordinate, FieldId, FieldKind, JetVar, MultiIndex, NormalForm};
use crate::Error;

/// Highest stored x-order of a fiber jet.
pub const FIBER_DEPTH: u8 = 4;

/// Total derivative along `c`. Fiber jets are rewritten through `ctx`; an
/// x-derivative of a stored fiber jet needs no covering.
pub fn total_derivative(e: &NormalForm, c: Coordinate, ctx: Option<&Covering>) -> Result<NormalForm, Error> {
    e.derive_with(&mut |a| atom_derivative(a, c, ctx))
}

/// Iterated total derivative over every coordinate of `index`.
pub fn total_derivative_multi(e: &NormalForm, index: MultiIndex, ctx: Option<&Covering>) -> Result<NormalForm, Error> {
    let mut out = e.clone();
    for c in index.coordinates().into_iter().rev() {
        out = total_derivative(&out, c, ctx)?;
    }
    Ok(out)
}

fn atom_derivative(a: &Atom, c: Coordinate, ctx: Option<&Covering>) -> Result<NormalForm, Error> {
    Ok(match a {
        Atom::Coord(k) if *k == c => NormalForm::one(),
        Atom::Coord(_) => NormalForm::zero(),
        Atom::Jet(j) => match j.field.kind() {
            FieldKind::Parameter => NormalForm::zero(),
            FieldKind::Base => NormalForm::jet(j.raised(c)),
            FieldKind::Fiber => match ctx {
                Some(cov) if cov.fiber == j.field => cov.value(j.index.raised(c))?,
                _ if c == Coordinate::X && is_stored(&j.index) => {
                    check_depth(&j.field, j.index.raised(c))?;
                    NormalForm::jet(j.raised(c))
                }
                _ => return Err(Error::MissingCovering(j.field.name().to_string())),
            },
        },
    })
}

fn is_stored(index: &MultiIndex) -> bool {
    index.get(Coordinate::T) == 0 && index.get(Coordinate::Y) == 0
}

fn check_depth(field: &FieldId, index: MultiIndex) -> Result<(), Error> {
    if index.get(Coordinate::X) > FIBER_DEPTH {
        return Err(Error::FiberDepth { field: field.name().to_string(), order: index.order() });
    }
    Ok(())
}

/// A one-dimensional covering: values of `fiber_t` and `fiber_y`.
#[derive(Clone, Debug)]
pub struct Covering {
    fiber: FieldId,
    eq_t: NormalForm,
    eq_y: NormalForm,
    cache: Arc<Mutex<HashMap<MultiIndex, NormalForm>>>,
}

impl PartialEq for Covering {
    fn eq(&self, other: &Self) -> bool {
        self.fiber == other.fiber && self.eq_t == other.eq_t && self.eq_y == other.eq_y
    }
}

impl Covering {
    pub fn new(fiber: FieldId, eq_t: NormalForm, eq_y: NormalForm) -> Result<Self, Error> {
        if fiber.kind() != FieldKind::Fiber {
            return Err(Error::InvalidCovering(format!("'{}' is not a fiber field", fiber.name())));
        }
        for e in [&eq_t, &eq_y] {
            for j in e.jets() {
                if j.field.kind() != FieldKind::Fiber {
                    continue;
                }
                if j.field != fiber {
                    return Err(Error::InvalidCovering(format!("second fiber field '{}'", j.field.name())));
                }
                if !is_stored(&j.index) {
                    return Err(Error::InvalidCovering(format!("non-stored fiber jet {j} in a defining equation")));
                }
                check_depth(&fiber, j.index)?;
            }
        }
        Ok(Covering { fiber, eq_t, eq_y, cache: Arc::default() })
    }

    pub fn fiber(&self) -> &FieldId {
        &self.fiber
    }

    pub fn eq_t(&self) -> &NormalForm {
        &self.eq_t
    }

    pub fn eq_y(&self) -> &NormalForm {
        &self.eq_y
    }

    pub fn equation(&self, c: Coordinate) -> Option<&NormalForm> {
        match c {
            Coordinate::T => Some(&self.eq_t),
            Coordinate::Y => Some(&self.eq_y),
            Coordinate::X => None,
        }
    }

    pub fn parameters(&self) -> BTreeSet<FieldId> {
        let mut out: BTreeSet<FieldId> = BTreeSet::new();
        for e in [&self.eq_t, &self.eq_y] {
            out.extend(e.jets().into_iter().filter(|j| j.field.kind() == FieldKind::Parameter).map(|j| j.field));
        }
        out
    }

    /// Apply `f` to both defining equations.
    pub fn map(&self, mut f: impl FnMut(&NormalForm) -> Result<NormalForm, Error>) -> Result<Covering, Error> {
        Covering::new(self.fiber.clone(), f(&self.eq_t)?, f(&self.eq_y)?)
    }

    /// Stored-form value of the fiber jet with the given index.
    pub fn value(&self, index: MultiIndex) -> Result<NormalForm, Error> {
        if is_stored(&index) {
            check_depth(&self.fiber, index)?;
            return Ok(NormalForm::jet(self.fiber.jet(index)));
        }
        if let Some(v) = self.cache.lock().unwrap().get(&index) {
            return Ok(v.clone());
        }
        let v = if index == MultiIndex::unit(Coordinate::T) {
            self.eq_t.clone()
        } else if index == MultiIndex::unit(Coordinate::Y) {
            self.eq_y.clone()
        } else {
            let c = [Coordinate::X, Coordinate::Y, Coordinate::T]
                .into_iter()
                .find(|c| index.lowered(*c).is_some_and(|i| !is_stored(&i)))
                .expect("non-stored index of order >= 2");
            let prev = self.value(index.lowered(c).unwrap())?;
            total_derivative(&prev, c, Some(self))?
        };
        self.cache.lock().unwrap().insert(index, v.clone());
        Ok(v)
    }

    /// Replace non-stored fiber jets by their values.
    pub fn rewrite(&self, e: &NormalForm) -> Result<NormalForm, Error> {
        e.substitute_with(&mut |a| match a {
            Atom::Jet(j) if j.field == self.fiber && !is_stored(&j.index) => Ok(Some(self.value(j.index)?)),
            _ => Ok(None),
        })
    }

    /// `D̃_y(eq_t) - D̃_t(eq_y)`, not reduced modulo any base system.
    pub fn compatibility_residual(&self) -> Result<NormalForm, Error> {
        let a = total_derivative(&self.eq_t, Coordinate::Y, Some(self))?;
        let b = total_derivative(&self.eq_y, Coordinate::T, Some(self))?;
        Ok(a.sub(&b))
    }
}

/// Substitution keys: single jets or whole fields.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Bindings {
    jets: BTreeMap<JetVar, NormalForm>,
    fields: BTreeMap<FieldId, NormalForm>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    fn check_parameter(field: &FieldId, value: &NormalForm) -> Result<(), Error> {
        if field.kind() == FieldKind::Parameter && value.as_constant().is_none() {
            return Err(Error::ParameterBinding(field.name().to_string()));
        }
        Ok(())
    }

    pub fn bind_jet(&mut self, j: JetVar, value: NormalForm) -> Result<(), Error> {
        Self::check_parameter(&j.field, &value)?;
        if self.fields.contains_key(&j.field) {
            return Err(Error::BindingConflict(j.to_string()));
        }
        if let Some(old) = self.jets.get(&j) {
            if !old.equals(&value) {
                return Err(Error::BindingConflict(j.to_string()));
            }
        }
        self.jets.insert(j, value);
        Ok(())
    }

    pub fn bind_field(&mut self, f: FieldId, value: NormalForm) -> Result<(), Error> {
        Self::check_parameter(&f, &value)?;
        if self.jets.keys().any(|j| j.field == f) {
            return Err(Error::BindingConflict(f.name().to_string()));
        }
        if let Some(old) = self.fields.get(&f) {
            if !old.equals(&value) {
                return Err(Error::BindingConflict(f.name().to_string()));
            }
        }
        self.fields.insert(f, value);
        Ok(())
    }

    pub fn jets(&self) -> &BTreeMap<JetVar, NormalForm> {
        &self.jets
    }

    pub fn fields(&self) -> &BTreeMap<FieldId, NormalForm> {
        &self.fields
    }

    pub fn is_empty(&self) -> bool {
        self.jets.is_empty() && self.fields.is_empty()
    }

    pub fn get_jet(&self, j: &JetVar) -> Option<&NormalForm> {
        self.jets.get(j)
    }

    /// Every field touched by a key.
    pub fn bound_fields(&self) -> BTreeSet<FieldId> {
        self.jets.keys().map(|j| j.field.clone()).chain(self.fields.keys().cloned()).collect()
    }

    /// Simultaneous substitution. A whole-field binding `f -> g` sends
    /// `f` with index σ to the σ-fold total derivative of `g`.
    pub fn apply(&self, e: &NormalForm) -> Result<NormalForm, Error> {
        if self.is_empty() {
            return Ok(e.clone());
        }
        let mut derived: HashMap<JetVar, NormalForm> = HashMap::new();
        e.substitute_with(&mut |a| {
            let Atom::Jet(j) = a else { return Ok(None) };
            if let Some(v) = self.jets.get(j) {
                return Ok(Some(v.clone()));
            }
            let Some(g) = self.fields.get(&j.field) else { return Ok(None) };
            if let Some(v) = derived.get(j) {
                return Ok(Some(v.clone()));
            }
            let v = total_derivative_multi(g, j.index, None)?;
            derived.insert(j.clone(), v.clone());
            Ok(Some(v))
        })
    }
}

pub fn substitute(e: &NormalForm, bindings: &Bindings) -> Result<NormalForm, Error> {
    bindings.apply(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Workspace;

    fn ws() -> Workspace {
        Workspace::with("u v w", "p q", "lambda").unwrap()
    }

    fn lambda_covering(ws: &Workspace) -> Covering {
        Covering::new(
            ws.field("p").unwrap().clone(),
            ws.nf("(u_x - lambda)*p_x").unwrap(),
            ws.nf("u_y*p_x/lambda").unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn index_increment_and_chain_rule() {
        let ws = ws();
        let d = total_derivative(&ws.nf("u_x").unwrap(), Coordinate::Y, None).unwrap();
        assert_eq!(d, ws.nf("u_xy").unwrap());
        let d = total_derivative(&ws.nf("exp(w)").unwrap(), Coordinate::X, None).unwrap();
        assert_eq!(d, ws.nf("exp(w)*w_x").unwrap());
        let d = total_derivative(&ws.nf("lambda*x^2").unwrap(), Coordinate::X, None).unwrap();
        assert_eq!(d, ws.nf("2*lambda*x").unwrap());
    }

    #[test]
    fn fiber_derivatives_go_through_the_covering() {
        let ws = ws();
        let cov = lambda_covering(&ws);
        let e = ws.nf("u_y*p_x/lambda").unwrap();
        let d = total_derivative(&e, Coordinate::T, Some(&cov)).unwrap();
        let expected = ws.nf("(u_ty*p_x + u_y*D[(u_x - lambda)*p_x, x])/lambda").unwrap();
        assert!(d.equals(&expected));
        assert!(matches!(total_derivative(&e, Coordinate::T, None), Err(Error::MissingCovering(_))));
    }

    #[test]
    fn trivial_covering_is_compatible() {
        let ws = ws();
        let cov = Covering::new(ws.field("q").unwrap().clone(), NormalForm::zero(), NormalForm::zero()).unwrap();
        assert!(cov.compatibility_residual().unwrap().is_zero());
    }

    #[test]
    fn fiber_depth_cap() {
        let ws = ws();
        let e = ws.nf("p_xxxx").unwrap();
        assert!(matches!(total_derivative(&e, Coordinate::X, None), Err(Error::FiberDepth { .. })));
    }

    #[test]
    fn whole_field_binding_differentiates() {
        let ws = ws();
        let mut b = Bindings::new();
        b.bind_field(ws.field("v").unwrap().clone(), ws.nf("-u_x").unwrap()).unwrap();
        let out = b.apply(&ws.nf("v_y + v").unwrap()).unwrap();
        assert_eq!(out, ws.nf("-u_xy - u_x").unwrap());
        assert!(matches!(
            b.bind_jet(ws.field("v").unwrap().jet(MultiIndex::new(0, 1, 0)), NormalForm::zero()),
            Err(Error::BindingConflict(_))
        ));
        assert!(matches!(
            b.bind_field(ws.field("lambda").unwrap().clone(), ws.nf("u").unwrap()),
            Err(Error::ParameterBinding(_))
        ));
    }

    #[test]
    fn identity_binding() {
        let ws = ws();
        let mut b = Bindings::new();
        let ux = ws.field("u").unwrap().jet(MultiIndex::new(0, 1, 0));
        b.bind_jet(ux, ws.nf("u_x").unwrap()).unwrap();
        let e = ws.nf("u_x^2 + u_y").unwrap();
        assert_eq!(b.apply(&e).unwrap(), e);
    }
}
