use crate::expr::{Atom, Coordinate, FieldId, FieldKind, MultiIndex, NormalForm};
use crate::jet::{Covering, OrientedSystem};
use crate::Error;

use super::Verdict;

/// Pass iff the compatibility residual of `cov` reduces to zero modulo `sys`.
pub fn verify_covering(cov: &Covering, sys: &OrientedSystem) -> Result<Verdict, Error> {
    let free = cov.compatibility_residual()?;
    let reduced = sys.reduce_traced(&free)?;
    Ok(Verdict::zero_test(&reduced.value, reduced.trace_len))
}

/// Trade the parameter of a covering `p_c = A_c(jets, param) p_x` for a new
/// fiber `q` defined implicitly by `q(t, x, y, p) = param`.
///
/// The derivation is carried out formally: with `q_p` a placeholder,
/// `p_c = -q_c/q_p` is substituted into every equation, the parameter is
/// replaced by `q`, and the result is solved for `q_c`.
pub fn implicit_parameter_swap(cov: &Covering, param: &FieldId, new_fiber: &FieldId) -> Result<Covering, Error> {
    if param.kind() != FieldKind::Parameter || new_fiber.kind() != FieldKind::Fiber {
        return Err(Error::Precondition("swap needs a parameter and a fiber field".into()));
    }
    let p = cov.fiber();
    let p_x = Atom::Jet(p.jet(MultiIndex::unit(Coordinate::X)));
    let q_p = FieldId::parameter("__q_p");
    let q_p_nf = NormalForm::jet(q_p.bare());
    let q_jet = |c: Coordinate| NormalForm::jet(new_fiber.jet(MultiIndex::unit(c)));
    let mut out = Vec::new();
    for c in [Coordinate::T, Coordinate::Y] {
        let eq = cov.equation(c).unwrap();
        let coeff = eq.partial(&p_x)?;
        if !eq.sub(&coeff.mul(&NormalForm::atom(p_x.clone()))).is_zero() {
            return Err(Error::Precondition(format!("{p}_{c} is not linear homogeneous in {p}_x")));
        }
        if coeff.jets().iter().any(|j| j.field == *p) {
            return Err(Error::Precondition(format!("coefficient of {p}_x in {p}_{c} depends on {p}")));
        }
        // p_c - A_c p_x with p_c = -q_c/q_p, p_x = -q_x/q_p, param = q
        let minus_over = |e: NormalForm| e.neg().div(&q_p_nf);
        let relation = minus_over(q_jet(c))?.sub(&coeff.mul(&minus_over(q_jet(Coordinate::X))?));
        let relation = relation.substitute_with(&mut |a| match a {
            Atom::Jet(j) if j.field == *param => Ok(Some(NormalForm::jet(new_fiber.bare()))),
            _ => Ok(None),
        })?;
        let target = Atom::Jet(new_fiber.jet(MultiIndex::unit(c)));
        let a = relation.partial(&target)?;
        let solved = NormalForm::atom(target).sub(&relation.div(&a)?);
        if solved.jets().iter().any(|j| j.field == q_p) {
            return Err(Error::Precondition("placeholder q_p did not cancel".into()));
        }
        out.push(solved);
    }
    let eq_y = out.pop().unwrap();
    let eq_t = out.pop().unwrap();
    Covering::new(new_fiber.clone(), eq_t, eq_y)
}
