//! Dense GF(2) polynomial vectors for kernel searches on small windows.
//!
//! A polynomial on `n <= 13` variables is a `2^n`-bit coefficient vector
//! (bit `m` = coefficient of the monomial with variable mask `m`). The
//! Moebius/zeta butterfly converts between coefficients and truth tables in
//! place; it is an involution over GF(2), so one routine serves both ways.

use crate::anf::{AnfPoly, Monomial, VarUniverse};
use crate::{Error, Result};
use std::sync::Arc;

/// Hard cap on dense coefficient vectors (2^22 bits = 512 KiB); kernel
/// searches gate themselves at 13 variables separately.
pub const MAX_DENSE_VARS: usize = 22;

const FOLD_MASKS: [u64; 6] = [
    0x5555_5555_5555_5555,
    0x3333_3333_3333_3333,
    0x0f0f_0f0f_0f0f_0f0f,
    0x00ff_00ff_00ff_00ff,
    0x0000_ffff_0000_ffff,
    0x0000_0000_ffff_ffff,
];

/// In-place butterfly: interprets `words` as `2^nvars` bits and applies the
/// subset-XOR transform. Coefficients -> truth table and back are the same map.
pub fn butterfly(words: &mut [u64], nvars: usize) {
    debug_assert!(words.len() * 64 >= 1 << nvars);
    for i in 0..nvars {
        if i < 6 {
            let shift = 1u32 << i;
            let mask = FOLD_MASKS[i];
            for w in words.iter_mut() {
                *w ^= (*w & mask) << shift;
            }
        } else {
            let wstep = 1usize << (i - 6);
            let total = (1usize << nvars) / 64;
            let mut base = 0;
            while base < total {
                for k in 0..wstep {
                    words[base + wstep + k] ^= words[base + k];
                }
                base += 2 * wstep;
            }
        }
    }
}

/// Dense polynomial: coefficient bit vector over `nvars` variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DensePoly {
    nvars: usize,
    words: Vec<u64>,
}

impl DensePoly {
    pub fn zero(nvars: usize) -> Result<Self> {
        if nvars > MAX_DENSE_VARS {
            return Err(Error::ArityTooLarge(nvars, MAX_DENSE_VARS));
        }
        let words = ((1usize << nvars).div_ceil(64)).max(1);
        Ok(DensePoly { nvars, words: vec![0; words] })
    }

    pub fn from_sparse(p: &AnfPoly) -> Result<Self> {
        let mut out = Self::zero(p.universe().arity())?;
        for m in p.terms() {
            out.set_coeff(m.0 as usize, true);
        }
        Ok(out)
    }

    pub fn to_sparse(&self, universe: &Arc<VarUniverse>) -> Result<AnfPoly> {
        assert_eq!(universe.arity(), self.nvars);
        AnfPoly::from_terms(
            universe.clone(),
            (0..1usize << self.nvars)
                .filter(|&m| self.coeff(m))
                .map(|m| Monomial(m as u32)),
        )
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn coeff(&self, m: usize) -> bool {
        (self.words[m / 64] >> (m % 64)) & 1 == 1
    }

    pub fn set_coeff(&mut self, m: usize, v: bool) {
        if v {
            self.words[m / 64] |= 1 << (m % 64);
        } else {
            self.words[m / 64] &= !(1 << (m % 64));
        }
    }

    pub fn xor_assign(&mut self, other: &DensePoly) {
        debug_assert_eq!(self.nvars, other.nvars);
        for (d, s) in self.words.iter_mut().zip(&other.words) {
            *d ^= s;
        }
    }

    /// Truth table of the polynomial as a packed bit vector.
    pub fn truth_table(&self) -> Vec<u64> {
        let mut tt = self.words.clone();
        butterfly(&mut tt, self.nvars);
        tt
    }

    pub fn from_truth_table(nvars: usize, tt: &[u64]) -> Result<Self> {
        let mut p = Self::zero(nvars)?;
        let len = p.words.len();
        p.words.copy_from_slice(&tt[..len]);
        butterfly(&mut p.words, nvars);
        Ok(p)
    }

    /// Product via pointwise AND of truth tables.
    pub fn mul(&self, other: &DensePoly) -> DensePoly {
        debug_assert_eq!(self.nvars, other.nvars);
        let mut a = self.truth_table();
        let b = other.truth_table();
        for (x, y) in a.iter_mut().zip(&b) {
            *x &= y;
        }
        Self::from_truth_table(self.nvars, &a).unwrap()
    }

    pub fn eval(&self, point: usize) -> bool {
        let tt = self.truth_table();
        (tt[point / 64] >> (point % 64)) & 1 == 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn butterfly_is_involution() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for nvars in [1usize, 5, 6, 7, 9, 12] {
            let words = ((1usize << nvars) / 64).max(1);
            let orig: Vec<u64> = (0..words).map(|_| rng.gen()).collect();
            let mut w = orig.clone();
            butterfly(&mut w, nvars);
            butterfly(&mut w, nvars);
            // mask off unused high bits for short tables
            if nvars < 6 {
                let mask = (1u64 << (1 << nvars)) - 1;
                assert_eq!(w[0] & mask, orig[0] & mask);
            } else {
                assert_eq!(w, orig);
            }
        }
    }

    #[test]
    fn dense_matches_sparse_semantics() {
        let u = VarUniverse::xvars(7);
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..30 {
            let table: Vec<bool> = (0..128).map(|_| rng.gen()).collect();
            let sparse = crate::anf::truth_table_to_anf(&u, &table).unwrap();
            let dense = DensePoly::from_sparse(&sparse).unwrap();
            let tt = dense.truth_table();
            for (i, &b) in table.iter().enumerate() {
                assert_eq!((tt[i / 64] >> (i % 64)) & 1 == 1, b);
            }
            assert_eq!(dense.to_sparse(&u).unwrap(), sparse);
        }
    }

    #[test]
    fn dense_mul_matches_sparse_mul() {
        let u = VarUniverse::xvars(6);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..30 {
            let ta: Vec<bool> = (0..64).map(|_| rng.gen()).collect();
            let tb: Vec<bool> = (0..64).map(|_| rng.gen()).collect();
            let a = crate::anf::truth_table_to_anf(&u, &ta).unwrap();
            let b = crate::anf::truth_table_to_anf(&u, &tb).unwrap();
            let want = a.mul(&b).unwrap();
            let got = DensePoly::from_sparse(&a)
                .unwrap()
                .mul(&DensePoly::from_sparse(&b).unwrap())
                .to_sparse(&u)
                .unwrap();
            assert_eq!(got, want);
        }
    }
}
