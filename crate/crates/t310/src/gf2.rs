//! Bit-packed linear algebra over GF(2).
//!
//! Rows are stored as `u64` words, little-endian within a row: column `c`
//! lives in word `c / 64`, bit `c % 64`. Everything the kernel and rank
//! routines return is re-checkable by multiplication; [`BitMatrix::kernel`]
//! asserts `M * v = 0` for every basis vector it hands out.

/// Packed GF(2) vector helpers shared by the matrix code and callers.
pub fn vec_get(words: &[u64], i: usize) -> bool {
    (words[i / 64] >> (i % 64)) & 1 == 1
}

pub fn vec_set(words: &mut [u64], i: usize, v: bool) {
    if v {
        words[i / 64] |= 1 << (i % 64);
    } else {
        words[i / 64] &= !(1 << (i % 64));
    }
}

pub fn vec_xor(dst: &mut [u64], src: &[u64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

pub fn vec_is_zero(words: &[u64]) -> bool {
    words.iter().all(|&w| w == 0)
}

/// Index of the highest set bit, if any.
pub fn vec_top_bit(words: &[u64]) -> Option<usize> {
    for (wi, &w) in words.iter().enumerate().rev() {
        if w != 0 {
            return Some(wi * 64 + 63 - w.leading_zeros() as usize);
        }
    }
    None
}

/// Dense bit matrix over GF(2).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    row_words: usize,
    bits: Vec<u64>,
}

impl BitMatrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        let row_words = cols.div_ceil(64).max(1);
        BitMatrix { rows, cols, row_words, bits: vec![0; rows * row_words] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        (self.bits[r * self.row_words + c / 64] >> (c % 64)) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        let w = &mut self.bits[r * self.row_words + c / 64];
        if v {
            *w |= 1 << (c % 64);
        } else {
            *w &= !(1 << (c % 64));
        }
    }

    pub fn row(&self, r: usize) -> &[u64] {
        &self.bits[r * self.row_words..(r + 1) * self.row_words]
    }

    /// Extract column `c` as a packed vector of `rows` bits.
    pub fn column(&self, c: usize) -> Vec<u64> {
        let mut out = vec![0u64; self.rows.div_ceil(64).max(1)];
        for r in 0..self.rows {
            if self.get(r, c) {
                out[r / 64] |= 1 << (r % 64);
            }
        }
        out
    }

    /// `M * v` for a packed vector of `cols` bits; result has `rows` bits.
    pub fn mul_vec(&self, v: &[u64]) -> Vec<u64> {
        assert!(v.len() >= self.row_words);
        let mut out = vec![0u64; self.rows.div_ceil(64).max(1)];
        for r in 0..self.rows {
            let mut acc = 0u64;
            for (w, &x) in self.row(r).iter().zip(v) {
                acc ^= w & x;
            }
            if acc.count_ones() % 2 == 1 {
                out[r / 64] |= 1 << (r % 64);
            }
        }
        out
    }

    /// Rank by plain row elimination on a scratch copy.
    pub fn rank(&self) -> usize {
        let mut work = self.clone();
        let mut rank = 0;
        let mut pivot_row_of: Vec<Option<usize>> = vec![None; work.cols];
        for r in 0..work.rows {
            loop {
                let top = match vec_top_bit(work.row(r)) {
                    Some(b) => b,
                    None => break,
                };
                match pivot_row_of[top] {
                    Some(p) => {
                        let (lo, hi) = if p < r { (p, r) } else { (r, p) };
                        let (a, b) = work.bits.split_at_mut(hi * work.row_words);
                        let src = &a[lo * work.row_words..lo * work.row_words + work.row_words];
                        let dst = &mut b[..work.row_words];
                        // p < r always holds here because pivots are assigned in order
                        debug_assert!(p < r);
                        vec_xor(dst, src);
                        let _ = lo;
                    }
                    None => {
                        pivot_row_of[top] = Some(r);
                        rank += 1;
                        break;
                    }
                }
            }
        }
        rank
    }

    /// Basis of the right null space `{v : M v = 0}`, each vector packed over
    /// `cols` bits. Every returned vector is re-multiplied against the matrix
    /// before being handed out.
    pub fn kernel(&self) -> Vec<Vec<u64>> {
        let col_words = self.rows.div_ceil(64).max(1);
        let combo_words = self.cols.div_ceil(64).max(1);
        // pivot slot per row index: (reduced column, combination of original columns)
        let mut pivots: Vec<Option<(Vec<u64>, Vec<u64>)>> = vec![None; self.rows.max(1)];
        let mut basis = Vec::new();
        for j in 0..self.cols {
            let mut cur = self.column(j);
            let mut combo = vec![0u64; combo_words];
            combo[j / 64] |= 1 << (j % 64);
            loop {
                let top = match vec_top_bit(&cur) {
                    Some(b) => b,
                    None => {
                        debug_assert!(vec_is_zero(&self.mul_vec(&combo)));
                        basis.push(combo);
                        break;
                    }
                };
                match &pivots[top] {
                    Some((pc, pcombo)) => {
                        vec_xor(&mut cur, pc);
                        let pcombo = pcombo.clone();
                        vec_xor(&mut combo, &pcombo);
                    }
                    None => {
                        pivots[top] = Some((cur, combo));
                        break;
                    }
                }
            }
        }
        for v in &basis {
            assert!(
                vec_is_zero(&self.mul_vec(v)),
                "kernel vector failed re-multiplication"
            );
        }
        let _ = col_words;
        basis
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn identity_has_empty_kernel() {
        let m = BitMatrix::identity(17);
        assert_eq!(m.rank(), 17);
        assert!(m.kernel().is_empty());
    }

    #[test]
    fn zero_matrix_kernel_is_full() {
        let m = BitMatrix::zero(5, 9);
        assert_eq!(m.rank(), 0);
        let k = m.kernel();
        assert_eq!(k.len(), 9);
    }

    #[test]
    fn kernel_dim_matches_independent_rank() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..20 {
            let rows = rng.gen_range(1..40);
            let cols = rng.gen_range(1..40);
            let mut m = BitMatrix::zero(rows, cols);
            for r in 0..rows {
                for c in 0..cols {
                    m.set(r, c, rng.gen());
                }
            }
            let k = m.kernel();
            assert_eq!(k.len(), cols - m.rank());
            // basis vectors are linearly independent: stack them as rows and re-rank
            let mut stacked = BitMatrix::zero(k.len(), cols);
            for (i, v) in k.iter().enumerate() {
                for c in 0..cols {
                    stacked.set(i, c, vec_get(v, c));
                }
            }
            assert_eq!(stacked.rank(), k.len());
        }
    }

    #[test]
    fn mul_vec_agrees_with_bitwise_definition() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let mut m = BitMatrix::zero(70, 130);
        for r in 0..70 {
            for c in 0..130 {
                m.set(r, c, rng.gen());
            }
        }
        let mut v = vec![0u64; 3];
        for c in 0..130 {
            vec_set(&mut v, c, rng.gen());
        }
        let out = m.mul_vec(&v);
        for r in 0..70 {
            let mut acc = false;
            for c in 0..130 {
                acc ^= m.get(r, c) && vec_get(&v, c);
            }
            assert_eq!(acc, vec_get(&out, r));
        }
    }
}
