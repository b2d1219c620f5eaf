use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::{BigRational, One, Signed, ToPrimitive, Zero};

use super::Atom;

/// A Laurent monomial in atoms, times at most one exponential `exp(key)`.
///
/// `exp` is the exponent polynomial; the zero polynomial means no exponential
/// factor, so `exp(0)` can never be represented.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial {
    degree: i64,
    powers: Vec<(Atom, i32)>,
    exp: Poly,
}

impl Monomial {
    pub fn one() -> Self {
        Monomial { degree: 0, powers: Vec::new(), exp: Poly::zero() }
    }

    pub fn atom(a: Atom, e: i32) -> Self {
        if e == 0 {
            return Monomial::one();
        }
        Monomial { degree: e as i64, powers: vec![(a, e)], exp: Poly::zero() }
    }

    pub fn exponential(key: Poly) -> Self {
        Monomial { degree: 0, powers: Vec::new(), exp: key }
    }

    fn from_parts(powers: Vec<(Atom, i32)>, exp: Poly) -> Self {
        let degree = powers.iter().map(|(_, e)| *e as i64).sum();
        Monomial { degree, powers, exp }
    }

    pub fn powers(&self) -> &[(Atom, i32)] {
        &self.powers
    }

    pub fn exp_key(&self) -> &Poly {
        &self.exp
    }

    pub fn has_exp(&self) -> bool {
        !self.exp.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.powers.is_empty() && self.exp.is_zero()
    }

    pub fn degree(&self) -> i64 {
        self.degree
    }

    pub fn power_of(&self, a: &Atom) -> i32 {
        self.powers.binary_search_by(|(b, _)| b.cmp(a)).map(|i| self.powers[i].1).unwrap_or(0)
    }

    /// Whether the monomial is an ordinary polynomial monomial (no negative
    /// powers, no exponential).
    pub fn is_polynomial(&self) -> bool {
        self.exp.is_zero() && self.powers.iter().all(|(_, e)| *e > 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let powers = merge_powers(&self.powers, &other.powers, |a, b| a + b);
        let exp = if other.exp.is_zero() {
            self.exp.clone()
        } else if self.exp.is_zero() {
            other.exp.clone()
        } else {
            self.exp.add(&other.exp)
        };
        Monomial::from_parts(powers, exp)
    }

    pub fn inv(&self) -> Monomial {
        Monomial {
            degree: -self.degree,
            powers: self.powers.iter().map(|(a, e)| (a.clone(), -e)).collect(),
            exp: self.exp.neg(),
        }
    }

    pub fn pow(&self, n: i32) -> Monomial {
        if n == 0 {
            return Monomial::one();
        }
        Monomial {
            degree: self.degree * n as i64,
            powers: self.powers.iter().map(|(a, e)| (a.clone(), e * n)).collect(),
            exp: self.exp.scale(&BigRational::from_integer(n.into())),
        }
    }

    /// Componentwise minimum of the atom powers (absent atoms count as 0).
    /// The exponential factor is dropped.
    pub fn min_powers(&self, other: &Monomial) -> Monomial {
        Monomial::from_parts(merge_powers(&self.powers, &other.powers, i32::min), Poly::zero())
    }

    /// Split off one atom: returns its power and the remaining monomial.
    pub fn without(&self, a: &Atom) -> (i32, Monomial) {
        let e = self.power_of(a);
        if e == 0 {
            return (0, self.clone());
        }
        let powers = self.powers.iter().filter(|(b, _)| b != a).cloned().collect();
        (e, Monomial::from_parts(powers, self.exp.clone()))
    }

    pub fn atoms(&self, out: &mut BTreeSet<Atom>) {
        out.extend(self.powers.iter().map(|(a, _)| a.clone()));
        self.exp.collect_atoms(out);
    }

    pub fn eval(&self, f: &dyn Fn(&Atom) -> f64) -> f64 {
        let mut v = 1.0;
        for (a, e) in &self.powers {
            v *= f(a).powi(*e);
        }
        if !self.exp.is_zero() {
            v *= self.exp.eval(f).exp();
        }
        v
    }

    /// Compare atom powers lexicographically: the first atom (in atom order)
    /// whose exponents differ decides, higher exponent is larger.
    fn lex_cmp(&self, other: &Monomial) -> Ordering {
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.powers, &other.powers);
        while i < a.len() || j < b.len() {
            let (ea, eb) = match (a.get(i), b.get(j)) {
                (Some((x, ex)), Some((y, ey))) => match x.cmp(y) {
                    Ordering::Equal => {
                        i += 1;
                        j += 1;
                        (*ex, *ey)
                    }
                    Ordering::Less => {
                        i += 1;
                        (*ex, 0)
                    }
                    Ordering::Greater => {
                        j += 1;
                        (0, *ey)
                    }
                },
                (Some((_, ex)), None) => {
                    i += 1;
                    (*ex, 0)
                }
                (None, Some((_, ey))) => {
                    j += 1;
                    (0, *ey)
                }
                (None, None) => unreachable!(),
            };
            if ea != eb {
                return ea.cmp(&eb);
            }
        }
        Ordering::Equal
    }

    fn fmt_with_coeff(&self, f: &mut fmt::Formatter<'_>, coeff: &BigRational) -> fmt::Result {
        let mut factors: Vec<String> = Vec::new();
        for (a, e) in self.powers.iter().filter(|(_, e)| *e > 0) {
            if *e == 1 {
                factors.push(a.to_string());
            } else {
                factors.push(format!("{a}^{e}"));
            }
        }
        if !self.exp.is_zero() {
            factors.push(format!("exp({})", self.exp));
        }
        if factors.is_empty() {
            write!(f, "{coeff}")?;
        } else if coeff.is_one() {
            f.write_str(&factors.join("*"))?;
        } else {
            write!(f, "{coeff}*{}", factors.join("*"))?;
        }
        for (a, e) in self.powers.iter().filter(|(_, e)| *e < 0) {
            if *e == -1 {
                write!(f, "/{a}")?;
            } else {
                write!(f, "/{a}^{}", -e)?;
            }
        }
        Ok(())
    }
}

fn merge_powers(a: &[(Atom, i32)], b: &[(Atom, i32)], op: impl Fn(i32, i32) -> i32) -> Vec<(Atom, i32)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let (atom, e) = match (a.get(i), b.get(j)) {
            (Some((x, ex)), Some((y, ey))) => match x.cmp(y) {
                Ordering::Equal => {
                    i += 1;
                    j += 1;
                    (x, op(*ex, *ey))
                }
                Ordering::Less => {
                    i += 1;
                    (x, op(*ex, 0))
                }
                Ordering::Greater => {
                    j += 1;
                    (y, op(0, *ey))
                }
            },
            (Some((x, ex)), None) => {
                i += 1;
                (x, op(*ex, 0))
            }
            (None, Some((y, ey))) => {
                j += 1;
                (y, op(0, *ey))
            }
            (None, None) => unreachable!(),
        };
        if e != 0 {
            out.push((atom.clone(), e));
        }
    }
    out
}

/// Graded lexicographic, then the exponent key. Compatible with multiplication.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree.cmp(&other.degree).then_with(|| self.lex_cmp(other)).then_with(|| self.exp.cmp(&other.exp))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse Laurent-exponential polynomial with rational coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Poly {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn one() -> Self {
        Poly::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        Poly::term(Monomial::one(), c)
    }

    pub fn term(m: Monomial, c: BigRational) -> Self {
        let mut p = Poly::zero();
        p.add_term(m, c);
        p
    }

    pub fn atom(a: Atom) -> Self {
        Poly::term(Monomial::atom(a, 1), BigRational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn as_monomial(&self) -> Option<(&Monomial, &BigRational)> {
        if self.terms.len() == 1 {
            self.terms.iter().next()
        } else {
            None
        }
    }

    /// True when every term is an ordinary polynomial monomial.
    pub fn is_polynomial(&self) -> bool {
        self.terms.keys().all(Monomial::is_polynomial)
    }

    pub fn leading(&self) -> Option<(&Monomial, &BigRational)> {
        self.terms.iter().next_back()
    }

    pub fn trailing(&self) -> Option<(&Monomial, &BigRational)> {
        self.terms.iter().next()
    }

    pub fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add_assign(&mut self, other: &Poly) {
        for (m, c) in &other.terms {
            self.add_term(m.clone(), c.clone());
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let (mut big, small) = if self.len() >= other.len() { (self.clone(), other) } else { (other.clone(), self) };
        big.add_assign(small);
        big
    }

    pub fn neg(&self) -> Poly {
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect() }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }

    pub fn scale(&self, k: &BigRational) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect() }
    }

    pub fn mul_term(&self, m: &Monomial, k: &BigRational) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        // multiplication by a monomial is order preserving, so keys stay distinct
        Poly { terms: self.terms.iter().map(|(n, c)| (n.mul(m), c * k)).collect() }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let (a, b) = if self.len() <= other.len() { (self, other) } else { (other, self) };
        let mut out = Poly::zero();
        for (m, c) in &a.terms {
            for (n, d) in &b.terms {
                out.add_term(m.mul(n), c * d);
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Poly {
        if let Some((m, c)) = self.as_monomial() {
            return Poly::term(m.pow(n as i32), num::pow(c.clone(), n as usize));
        }
        let mut out = Poly::one();
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Write `self = c * m * q` where `c * m` is a unit (coefficient, Laurent
    /// monomial and exponential) and `q` has leading coefficient 1 and no
    /// monomial content. Returns `(c, m, q)`; `self` must be non-zero.
    pub fn split_unit(&self) -> (BigRational, Monomial, Poly) {
        let (lead_m, lead_c) = self.leading().expect("split_unit of zero");
        let mut content = lead_m.clone();
        for m in self.terms.keys() {
            content = content.min_powers(m);
        }
        let unit = content.mul(&Monomial::exponential(lead_m.exp.clone()));
        let q = self.mul_term(&unit.inv(), &lead_c.recip());
        (lead_c.clone(), unit, q)
    }

    /// Exact division by `f` (whose leading coefficient is 1) via leading-term
    /// elimination. Returns `None` when `f` does not divide `self` or the
    /// bounded search gives up.
    pub fn exact_div(&self, f: &Poly) -> Option<Poly> {
        let (f_lead, f_lc) = f.leading()?;
        let (f_trail, _) = f.trailing()?;
        let Some((self_trail, _)) = self.trailing() else {
            return Some(Poly::zero());
        };
        let self_trail = self_trail.clone();
        let f_lead_inv = f_lead.inv();
        let mut rem = self.clone();
        let mut quot = Poly::zero();
        let cap = 4 * (self.len() + f.len()) + 64;
        for _ in 0..cap {
            let Some((m, c)) = rem.leading() else {
                return Some(quot);
            };
            let qm = m.mul(&f_lead_inv);
            if qm.mul(f_trail) < self_trail {
                return None;
            }
            let qc = c / f_lc;
            rem = rem.sub(&f.mul_term(&qm, &qc));
            quot.add_term(qm, qc);
        }
        None
    }

    pub fn collect_atoms(&self, out: &mut BTreeSet<Atom>) {
        for m in self.terms.keys() {
            m.atoms(out);
        }
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    pub fn eval(&self, f: &dyn Fn(&Atom) -> f64) -> f64 {
        self.terms.iter().map(|(m, c)| c.to_f64().unwrap_or(f64::NAN) * m.eval(f)).sum()
    }
}

/// Lexicographic order on coefficient vectors, scanning monomials from the
/// largest down. Compatible with addition, consistent with structural `Eq`.
impl Ord for Poly {
    fn cmp(&self, other: &Self) -> Ordering {
        let mut a = self.terms.iter().rev().peekable();
        let mut b = other.terms.iter().rev().peekable();
        let zero = BigRational::zero();
        loop {
            let ord = match (a.peek().copied(), b.peek().copied()) {
                (None, None) => return Ordering::Equal,
                (Some((_, ca)), None) => {
                    a.next();
                    ca.cmp(&zero)
                }
                (None, Some((_, cb))) => {
                    b.next();
                    zero.cmp(cb)
                }
                (Some((ma, ca)), Some((mb, cb))) => match ma.cmp(mb) {
                    Ordering::Equal => {
                        let o = ca.cmp(cb);
                        a.next();
                        b.next();
                        o
                    }
                    Ordering::Greater => {
                        let o = ca.cmp(&zero);
                        a.next();
                        o
                    }
                    Ordering::Less => {
                        let o = zero.cmp(cb);
                        b.next();
                        o
                    }
                },
            };
            if ord != Ordering::Equal {
                return ord;
            }
        }
    }
}

impl PartialOrd for Poly {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Canonical printing: terms from the leading monomial down.
impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            match (i, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            m.fmt_with_coeff(f, &c.abs())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Coordinate, FieldId, MultiIndex};

    fn jet(name: &str, t: u8, x: u8, y: u8) -> Atom {
        Atom::Jet(FieldId::base(name).jet(MultiIndex::new(t, x, y)))
    }

    fn r(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    #[test]
    fn monomial_order_is_multiplicative() {
        let a = Monomial::atom(jet("u", 0, 1, 0), 1);
        let b = Monomial::atom(jet("u", 0, 0, 1), 1);
        let c = Monomial::atom(Atom::Coord(Coordinate::X), -1);
        assert_eq!(a.cmp(&b), a.mul(&c).cmp(&b.mul(&c)));
        assert!(a.pow(2) > a);
    }

    #[test]
    fn exp_factors_fuse_and_cancel() {
        let key = Poly::atom(jet("r", 0, 0, 0));
        let e = Monomial::exponential(key.clone());
        let e_inv = Monomial::exponential(key.neg());
        assert!(e.mul(&e_inv).is_one());
        assert_eq!(e.mul(&e).exp_key(), &key.scale(&r(2)));
    }

    #[test]
    fn exact_division() {
        let x = Poly::atom(jet("u", 0, 1, 0));
        let y = Poly::atom(jet("v", 0, 0, 0));
        let f = x.add(&y);
        let prod = f.mul(&x.sub(&y));
        let (_, _, f_norm) = f.split_unit();
        assert_eq!(prod.exact_div(&f_norm).unwrap().mul(&f_norm), prod);
        assert!(x.mul(&x).add(&Poly::one()).exact_div(&f_norm).is_none());
    }

    #[test]
    fn split_unit_removes_monomial_content() {
        let x = Poly::atom(jet("u", 0, 1, 0));
        let y = Poly::atom(jet("v", 0, 0, 0));
        let p = x.mul(&x).scale(&r(3)).add(&x.mul(&y).scale(&r(6)));
        let (c, m, q) = p.split_unit();
        assert_eq!(q.len(), 2);
        assert!(q.leading().unwrap().1.is_one());
        assert_eq!(q.mul_term(&m, &c), p);
    }
}
