//! Seeded perturbations for checking that verifiers reject wrong input.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expr::{JetVar, NormalForm};

pub struct Mutator {
    rng: ChaCha8Rng,
}

impl Mutator {
    pub fn new(seed: u64) -> Self {
        Mutator { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Add `c * m` to `e`, where `m` is a product of one or two jets drawn
    /// from `e` itself (or from `pool` if `e` has none) and `c` is a nonzero
    /// integer in `[-3, 3]`. The result always differs from `e`.
    pub fn mutate(&mut self, e: &NormalForm, pool: &[JetVar]) -> NormalForm {
        let mut atoms: Vec<JetVar> = e.jets().into_iter().collect();
        if atoms.is_empty() {
            atoms = pool.to_vec();
        }
        assert!(!atoms.is_empty(), "nothing to build a mutation from");
        let n = self.rng.gen_range(1..=2);
        let mut m = NormalForm::one();
        for _ in 0..n {
            m = m.mul(&NormalForm::jet(atoms.choose(&mut self.rng).unwrap().clone()));
        }
        let c = *[-3, -2, -1, 1, 2, 3].choose(&mut self.rng).unwrap();
        e.add(&m.mul(&NormalForm::int(c)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Workspace;

    #[test]
    fn deterministic_and_nontrivial() {
        let ws = Workspace::with("u v", "", "").unwrap();
        let e = ws.nf("u_x*v - v_y").unwrap();
        let a = Mutator::new(7).mutate(&e, &[]);
        let b = Mutator::new(7).mutate(&e, &[]);
        assert_eq!(a, b);
        assert!(!a.equals(&e));
        let zero = Mutator::new(1).mutate(&NormalForm::zero(), &[ws.field("u").unwrap().bare()]);
        assert!(!zero.is_zero());
    }
}
