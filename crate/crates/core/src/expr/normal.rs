use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num::{BigInt, BigRational, One, Zero};

use super::poly::{Monomial, Poly};
use super::{Atom, Expr, JetVar};
use crate::Error;

/// Canonical rational form: a Laurent-exponential numerator over a product of
/// syntactic denominator factors.
///
/// Monomials, coefficients and exponentials are units, so they never appear in
/// the denominator. Each denominator factor has leading coefficient 1 and no
/// monomial content. Factors are cancelled against the numerator by exact
/// division; no multivariate gcd is attempted, so zero testing (numerator is
/// the zero polynomial) is exact while non-zero forms are canonical only up to
/// how their denominators were assembled.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct NormalForm {
    num: Poly,
    den: BTreeMap<Poly, u32>,
}

type AtomMap<'a> = dyn FnMut(&Atom) -> Result<NormalForm, Error> + 'a;

impl NormalForm {
    pub fn zero() -> Self {
        NormalForm::default()
    }

    pub fn one() -> Self {
        NormalForm::from_poly(Poly::one())
    }

    pub fn constant(c: BigRational) -> Self {
        NormalForm::from_poly(Poly::constant(c))
    }

    pub fn int(n: i64) -> Self {
        NormalForm::constant(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_poly(p: Poly) -> Self {
        NormalForm { num: p, den: BTreeMap::new() }
    }

    pub fn atom(a: Atom) -> Self {
        NormalForm::from_poly(Poly::atom(a))
    }

    pub fn jet(j: JetVar) -> Self {
        NormalForm::atom(Atom::Jet(j))
    }

    pub fn from_expr(e: &Expr) -> Result<Self, Error> {
        Ok(match e {
            Expr::Const(c) => NormalForm::constant(c.clone()),
            Expr::Atom(a) => NormalForm::atom(a.clone()),
            Expr::Sum(items) => {
                let mut acc = NormalForm::zero();
                for item in items {
                    acc = acc.add(&NormalForm::from_expr(item)?);
                }
                acc
            }
            Expr::Product(items) => {
                let mut acc = NormalForm::one();
                for item in items {
                    acc = acc.mul(&NormalForm::from_expr(item)?);
                }
                acc
            }
            Expr::Pow(base, n) => NormalForm::from_expr(base)?.pow(*n)?,
            Expr::Exp(inner) => NormalForm::from_expr(inner)?.exp()?,
        })
    }

    /// `exp(self)`; the exponent must be an ordinary polynomial.
    pub fn exp(&self) -> Result<Self, Error> {
        if !self.den.is_empty() || !self.num.is_polynomial() {
            return Err(Error::ExponentNotPolynomial(self.to_string()));
        }
        if self.num.is_zero() {
            return Ok(NormalForm::one());
        }
        Ok(NormalForm::from_poly(Poly::term(Monomial::exponential(self.num.clone()), BigRational::one())))
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn denominator_factors(&self) -> impl Iterator<Item = (&Poly, u32)> {
        self.den.iter().map(|(f, k)| (f, *k))
    }

    /// The full denominator as a single polynomial.
    pub fn denominator(&self) -> Poly {
        self.den.iter().fold(Poly::one(), |acc, (f, k)| acc.mul(&f.pow(*k)))
    }

    pub fn has_denominator(&self) -> bool {
        !self.den.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.den.is_empty() && self.num.as_constant().is_some_and(|c| c.is_one())
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        if self.den.is_empty() {
            self.num.as_constant()
        } else {
            None
        }
    }

    /// Semantic equality: the difference normalizes to zero.
    pub fn equals(&self, other: &NormalForm) -> bool {
        self == other || self.sub(other).is_zero()
    }

    fn build(mut num: Poly, mut den: BTreeMap<Poly, u32>) -> Self {
        if num.is_zero() {
            return NormalForm::zero();
        }
        for (f, k) in den.iter_mut() {
            while *k > 0 && num.len() > 1 {
                match num.exact_div(f) {
                    Some(q) => {
                        num = q;
                        *k -= 1;
                    }
                    None => break,
                }
            }
        }
        den.retain(|_, k| *k > 0);
        NormalForm { num, den }
    }

    pub fn add(&self, other: &NormalForm) -> NormalForm {
        if other.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return other.clone();
        }
        if self.den == other.den {
            let num = self.num.add(&other.num);
            if self.den.is_empty() {
                return NormalForm::from_poly(num);
            }
            return NormalForm::build(num, self.den.clone());
        }
        let mut lcm = self.den.clone();
        for (f, k) in &other.den {
            let e = lcm.entry(f.clone()).or_insert(0);
            *e = (*e).max(*k);
        }
        let lift = |nf: &NormalForm| {
            let mut n = nf.num.clone();
            for (f, k) in &lcm {
                let have = nf.den.get(f).copied().unwrap_or(0);
                if *k > have {
                    n = n.mul(&f.pow(k - have));
                }
            }
            n
        };
        let num = lift(self).add(&lift(other));
        NormalForm::build(num, lcm)
    }

    pub fn neg(&self) -> NormalForm {
        NormalForm { num: self.num.neg(), den: self.den.clone() }
    }

    pub fn sub(&self, other: &NormalForm) -> NormalForm {
        self.add(&other.neg())
    }

    pub fn scale(&self, k: &BigRational) -> NormalForm {
        if k.is_zero() {
            return NormalForm::zero();
        }
        NormalForm { num: self.num.scale(k), den: self.den.clone() }
    }

    pub fn mul(&self, other: &NormalForm) -> NormalForm {
        if self.is_zero() || other.is_zero() {
            return NormalForm::zero();
        }
        let num = self.num.mul(&other.num);
        if self.den.is_empty() && other.den.is_empty() {
            return NormalForm::from_poly(num);
        }
        let mut den = self.den.clone();
        for (f, k) in &other.den {
            *den.entry(f.clone()).or_insert(0) += k;
        }
        NormalForm::build(num, den)
    }

    pub fn inv(&self) -> Result<NormalForm, Error> {
        if self.num.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let (c, unit, rest) = self.num.split_unit();
        let num = self.denominator().mul_term(&unit.inv(), &c.recip());
        let mut den = BTreeMap::new();
        if rest.len() > 1 {
            den.insert(rest, 1);
        }
        Ok(NormalForm::build(num, den))
    }

    pub fn div(&self, other: &NormalForm) -> Result<NormalForm, Error> {
        Ok(self.mul(&other.inv()?))
    }

    pub fn pow(&self, n: i64) -> Result<NormalForm, Error> {
        if n < 0 {
            return self.inv()?.pow(-n);
        }
        let n = u32::try_from(n).map_err(|_| Error::ExponentTooLarge(n))?;
        Ok(NormalForm {
            num: self.num.pow(n),
            den: self.den.iter().map(|(f, k)| (f.clone(), k * n)).filter(|(_, k)| *k > 0).collect(),
        })
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out = self.num.atoms();
        for f in self.den.keys() {
            f.collect_atoms(&mut out);
        }
        out
    }

    pub fn jets(&self) -> BTreeSet<JetVar> {
        self.atoms().into_iter().filter_map(|a| a.as_jet().cloned()).collect()
    }

    pub fn max_jet_order(&self) -> usize {
        self.jets().iter().map(JetVar::order).max().unwrap_or(0)
    }

    pub fn contains_atom(&self, a: &Atom) -> bool {
        self.atoms().contains(a)
    }

    /// Apply a derivation given by its values on atoms. Linear, Leibniz, and
    /// chain rule through powers and exponentials.
    pub fn derive_with(&self, d: &mut AtomMap<'_>) -> Result<NormalForm, Error> {
        let mut cache: HashMap<Atom, NormalForm> = HashMap::new();
        let mut cached = |a: &Atom| -> Result<NormalForm, Error> {
            if let Some(v) = cache.get(a) {
                return Ok(v.clone());
            }
            let v = d(a)?;
            cache.insert(a.clone(), v.clone());
            Ok(v)
        };
        let d_num = derive_poly(&self.num, &mut cached)?;
        if self.den.is_empty() {
            return Ok(d_num);
        }
        let inv_den = NormalForm { num: Poly::one(), den: self.den.clone() };
        let mut out = d_num.mul(&inv_den);
        for (f, k) in &self.den {
            let df = derive_poly(f, &mut cached)?;
            if df.is_zero() {
                continue;
            }
            let mut den = self.den.clone();
            *den.get_mut(f).unwrap() += 1;
            let coeff = BigRational::from_integer(BigInt::from(-(*k as i64)));
            let term = NormalForm::build(self.num.scale(&coeff), den);
            out = out.add(&term.mul(&df));
        }
        Ok(out)
    }

    /// Formal partial derivative with respect to one atom.
    pub fn partial(&self, a: &Atom) -> Result<NormalForm, Error> {
        self.derive_with(&mut |b: &Atom| Ok(if b == a { NormalForm::one() } else { NormalForm::zero() }))
    }

    /// Simultaneous substitution of atoms. `f` returns `None` for atoms that
    /// stay as they are. Exponents must remain polynomial.
    pub fn substitute_with(
        &self,
        f: &mut dyn FnMut(&Atom) -> Result<Option<NormalForm>, Error>,
    ) -> Result<NormalForm, Error> {
        let mut cache: HashMap<Atom, Option<NormalForm>> = HashMap::new();
        let mut cached = |a: &Atom| -> Result<Option<NormalForm>, Error> {
            if let Some(v) = cache.get(a) {
                return Ok(v.clone());
            }
            let v = f(a)?;
            cache.insert(a.clone(), v.clone());
            Ok(v)
        };
        let mut out = subst_poly(&self.num, &mut cached)?;
        for (g, k) in &self.den {
            let g = subst_poly(g, &mut cached)?;
            out = out.mul(&g.pow(-(*k as i64))?);
        }
        Ok(out)
    }

    /// Replace atoms by the values in `map`.
    pub fn substitute(&self, map: &BTreeMap<Atom, NormalForm>) -> Result<NormalForm, Error> {
        if map.is_empty() {
            return Ok(self.clone());
        }
        self.substitute_with(&mut |a| Ok(map.get(a).cloned()))
    }

    pub fn eval(&self, f: &dyn Fn(&Atom) -> f64) -> f64 {
        let mut v = self.num.eval(f);
        for (g, k) in &self.den {
            v /= g.eval(f).powi(*k as i32);
        }
        v
    }

    pub fn to_expr(&self) -> Expr {
        let poly_expr = |p: &Poly| {
            Expr::sum(p.terms().rev().map(|(m, c)| {
                let mut factors = vec![Expr::Const(c.clone())];
                for (a, e) in m.powers() {
                    factors.push(Expr::Atom(a.clone()).pow(*e as i64));
                }
                if m.has_exp() {
                    let key = NormalForm::from_poly(m.exp_key().clone()).to_expr();
                    factors.push(key.exp());
                }
                Expr::product(factors)
            }))
        };
        let mut factors = vec![poly_expr(&self.num)];
        for (g, k) in &self.den {
            factors.push(poly_expr(g).pow(-(*k as i64)));
        }
        Expr::product(factors)
    }
}

fn derive_poly(p: &Poly, d: &mut AtomMap<'_>) -> Result<NormalForm, Error> {
    let mut acc_poly = Poly::zero();
    let mut acc_nf = NormalForm::zero();
    let mut push = |rest: &Monomial, k: &BigRational, v: &NormalForm| {
        if v.den.is_empty() {
            acc_poly.add_assign(&v.num.mul_term(rest, k));
        } else {
            let scaled = NormalForm { num: v.num.mul_term(rest, k), den: v.den.clone() };
            acc_nf = acc_nf.add(&scaled);
        }
    };
    for (m, c) in p.terms() {
        for (a, e) in m.powers() {
            let da = d(a)?;
            if da.is_zero() {
                continue;
            }
            let (_, rest) = m.without(a);
            let rest = rest.mul(&Monomial::atom(a.clone(), e - 1));
            let k = c * BigRational::from_integer(BigInt::from(*e));
            push(&rest, &k, &da);
        }
        if m.has_exp() {
            let dk = derive_poly(m.exp_key(), d)?;
            if !dk.is_zero() {
                push(m, c, &dk);
            }
        }
    }
    Ok(NormalForm::from_poly(acc_poly).add(&acc_nf))
}

fn subst_poly(p: &Poly, f: &mut dyn FnMut(&Atom) -> Result<Option<NormalForm>, Error>) -> Result<NormalForm, Error> {
    let mut acc_poly = Poly::zero();
    let mut acc_nf = NormalForm::zero();
    for (m, c) in p.terms() {
        let mut kept = Monomial::one();
        let mut bound: Vec<(NormalForm, i32)> = Vec::new();
        for (a, e) in m.powers() {
            match f(a)? {
                Some(v) => bound.push((v, *e)),
                None => kept = kept.mul(&Monomial::atom(a.clone(), *e)),
            }
        }
        if m.has_exp() {
            let key = subst_poly(m.exp_key(), f)?;
            let ex = key.exp()?;
            let (em, ec) = ex.num.leading().expect("exp is a unit");
            kept = kept.mul(em);
            debug_assert!(ec.is_one());
        }
        let polynomial = bound.iter().all(|(v, e)| *e > 0 && v.den.is_empty());
        if polynomial {
            let mut term = Poly::term(kept, c.clone());
            for (v, e) in &bound {
                term = term.mul(&v.num.pow(*e as u32));
            }
            acc_poly.add_assign(&term);
        } else {
            let mut term = NormalForm::from_poly(Poly::term(kept, c.clone()));
            for (v, e) in &bound {
                term = term.mul(&v.pow(*e as i64)?);
            }
            acc_nf = acc_nf.add(&term);
        }
    }
    Ok(NormalForm::from_poly(acc_poly).add(&acc_nf))
}

impl fmt::Display for NormalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_empty() {
            return self.num.fmt(f);
        }
        if self.num.len() > 1 {
            write!(f, "({})", self.num)?;
        } else {
            write!(f, "{}", self.num)?;
        }
        for (g, k) in &self.den {
            if *k == 1 {
                write!(f, "/({g})")?;
            } else {
                write!(f, "/({g})^{k}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Workspace;

    fn ws() -> Workspace {
        Workspace::with("u v r s w", "q", "lambda kappa").unwrap()
    }

    fn nf(s: &str) -> NormalForm {
        ws().nf(s).unwrap()
    }

    #[test]
    fn cancellation_to_zero() {
        assert!(nf("(u_x + v) - v - u_x").is_zero());
    }

    #[test]
    fn exponentials_fuse_to_one() {
        assert!(nf("exp(r)*exp(-r)").is_one());
        assert!(nf("exp(0)").is_one());
        assert!(nf("exp(r)^2 - exp(2*r)").is_zero());
    }

    #[test]
    fn non_polynomial_exponent_is_rejected() {
        let e = ws().parse("exp(1/r)").unwrap();
        assert!(matches!(NormalForm::from_expr(&e), Err(Error::ExponentNotPolynomial(_))));
        let e = ws().parse("exp(exp(r))").unwrap();
        assert!(matches!(NormalForm::from_expr(&e), Err(Error::ExponentNotPolynomial(_))));
    }

    #[test]
    fn syntactic_common_factors_cancel() {
        let a = nf("(u_x^2 - v^2)/(u_x + v)");
        assert_eq!(a, nf("u_x - v"));
        let b = nf("1/(u_x + v) + 1/(u_x - v)");
        assert!(b.sub(&nf("2*u_x/(u_x^2 - v^2)")).is_zero());
    }

    #[test]
    fn inverse_of_monomial_stays_laurent() {
        let a = nf("exp(-r)/s_x");
        assert!(!a.has_denominator());
        assert_eq!(a.to_string(), "exp(-r)/s_x");
        assert!(nf("1/(2*s_x*exp(r))").sub(&nf("exp(-r)/(2*s_x)")).is_zero());
    }

    #[test]
    fn canonical_printing() {
        assert_eq!(nf("u_x*u_xy - u_y*u_xx").to_string(), "u_x*u_xy - u_xx*u_y");
        assert_eq!(nf("0").to_string(), "0");
        assert_eq!(nf("3/2*u_x - 1").to_string(), "3/2*u_x - 1");
        assert_eq!(nf("u_x/(u_x + v)").to_string(), "u_x/(u_x + v)");
    }

    #[test]
    fn division_by_zero() {
        assert!(matches!(nf("u_x - u_x").inv(), Err(Error::DivisionByZero)));
    }

    #[test]
    fn partial_derivatives() {
        let e = nf("u_x^2*exp(3*u_x) + v");
        let ux = Atom::Jet(ws().field("u").unwrap().jet(crate::expr::MultiIndex::new(0, 1, 0)));
        let d = e.partial(&ux).unwrap();
        assert!(d.sub(&nf("2*u_x*exp(3*u_x) + 3*u_x^2*exp(3*u_x)")).is_zero());
    }

    #[test]
    fn quotient_rule_through_denominators() {
        let ws = ws();
        let ux = Atom::Jet(ws.field("u").unwrap().jet(crate::expr::MultiIndex::new(0, 1, 0)));
        let e = ws.nf("1/(u_x + v)").unwrap();
        let d = e.partial(&ux).unwrap();
        assert!(d.sub(&ws.nf("-1/(u_x + v)^2").unwrap()).is_zero());
    }

    #[test]
    fn evaluation() {
        let e = nf("exp(-r)/s_x + 1/(u_x + 1)");
        let v = e.eval(&|a| match a.to_string().as_str() {
            "r" => 0.0,
            "s_x" => 2.0,
            "u_x" => 1.0,
            _ => f64::NAN,
        });
        assert!((v - 1.0).abs() < 1e-15);
    }
}
