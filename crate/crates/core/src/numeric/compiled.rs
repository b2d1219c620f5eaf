use num::ToPrimitive;

use crate::expr::{Atom, Poly};
use crate::{Error, NormalForm};

#[derive(Clone, Debug)]
struct Term {
    coeff: f64,
    powers: Vec<(usize, i32)>,
    exp: Option<Box<CompiledPoly>>,
}

#[derive(Clone, Debug)]
struct CompiledPoly {
    terms: Vec<Term>,
}

impl CompiledPoly {
    fn new(p: &Poly, vars: &[Atom]) -> Result<Self, Error> {
        let mut terms = Vec::new();
        for (m, c) in p.terms() {
            let coeff = c.to_f64().ok_or_else(|| Error::Numeric(format!("coefficient {c} out of range")))?;
            let powers = m
                .powers()
                .iter()
                .map(|(a, e)| {
                    vars.iter()
                        .position(|v| v == a)
                        .map(|i| (i, *e))
                        .ok_or_else(|| Error::Numeric(format!("no value for {a}")))
                })
                .collect::<Result<_, _>>()?;
            let exp = if m.has_exp() { Some(Box::new(CompiledPoly::new(m.exp_key(), vars)?)) } else { None };
            terms.push(Term { coeff, powers, exp });
        }
        Ok(CompiledPoly { terms })
    }

    fn eval(&self, values: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let mut v = t.coeff;
                for (i, e) in &t.powers {
                    v *= values[*i].powi(*e);
                }
                if let Some(k) = &t.exp {
                    v *= k.eval(values).exp();
                }
                v
            })
            .sum()
    }
}

/// A normal form prepared for repeated floating-point evaluation, with
/// atoms read from a slice in the order given at construction.
#[derive(Clone, Debug)]
pub struct Compiled {
    num: CompiledPoly,
    den: Vec<(CompiledPoly, i32)>,
}

impl Compiled {
    pub fn new(e: &NormalForm, vars: &[Atom]) -> Result<Self, Error> {
        Ok(Compiled {
            num: CompiledPoly::new(e.numerator(), vars)?,
            den: e
                .denominator_factors()
                .map(|(f, k)| Ok((CompiledPoly::new(f, vars)?, k as i32)))
                .collect::<Result<_, Error>>()?,
        })
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        let mut v = self.num.eval(values);
        for (f, k) in &self.den {
            v /= f.eval(values).powi(*k);
        }
        v
    }
}
