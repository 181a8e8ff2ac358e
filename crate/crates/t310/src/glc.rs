//! Nonlinear invariant search on closed bit windows.
//!
//! A window is a tail range of the state renamed downward to letters
//! (u25..u36 become l..a on the 12-bit window, u17..u36 become t..a on the
//! 20-bit one); the per-round IV bit and the key bit entering the first Z
//! block are the formal symbols `F` and `L`.
//!
//! The window map stores, for every window letter, the old-state bit
//! expressed as a polynomial over the next state's letters (plus `F`, `L`):
//! shift lanes map to single letters, and a dropped bit `u_{D(i)}` unfolds
//! through the fresh-bit equation of chain stage `i`, with Z blocks expanded
//! to their algebraic normal form on the (shifted) input letters. A
//! polynomial `p` is a one-round invariant when substituting every letter by
//! its image returns `p` itself.
//!
//! On the 12-bit window the invariant space is the kernel of the 4096 x 4096
//! coefficient matrix of `monomial + image(monomial)`; on the 20-bit window
//! only pointwise verification of given polynomials is offered, matching the
//! sparse way those invariants are exhibited.

use crate::anf::{AnfPoly, Monomial, VarUniverse};
use crate::boolfn::BooleanFunc6;
use crate::cipher::LongTermKey;
use crate::dense::{butterfly, DensePoly};
use crate::gf2::{vec_get, BitMatrix};
use crate::{Error, Result};
use std::sync::Arc;

/// Window choice: the closed tail ranges supported by the letter renaming.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Window {
    /// u25..u36 renamed l..a.
    W12,
    /// u17..u36 renamed t..a.
    W20,
}

impl Window {
    pub fn lo(self) -> u8 {
        match self {
            Window::W12 => 25,
            Window::W20 => 17,
        }
    }

    pub fn len(self) -> usize {
        match self {
            Window::W12 => 12,
            Window::W20 => 20,
        }
    }

    pub fn from_len(len: usize) -> Result<Self> {
        match len {
            12 => Ok(Window::W12),
            20 => Ok(Window::W20),
            other => Err(Error::OutOfRange(format!("window length {other} (12 or 20)"))),
        }
    }

    /// Letter for a window position: u36 is `a`, going up toward the low end.
    pub fn letter_of(self, pos: u8) -> char {
        debug_assert!(pos >= self.lo() && pos <= 36);
        (b'a' + (36 - pos)) as char
    }

    pub fn pos_of_letter_index(self, idx: usize) -> u8 {
        36 - idx as u8
    }
}

/// Universe of a window: the letters (bit i is the letter for u_{36-i}),
/// then `F`, then `L`.
pub fn window_universe(window: Window) -> Arc<VarUniverse> {
    let mut names: Vec<String> = (0..window.len())
        .map(|i| ((b'a' + i as u8) as char).to_string())
        .collect();
    names.push("F".into());
    names.push("L".into());
    VarUniverse::new(names).unwrap()
}

/// Symbolic one-round map of a window.
#[derive(Clone, Debug)]
pub struct WindowMap {
    pub window: Window,
    pub universe: Arc<VarUniverse>,
    /// Image per letter index (0 = `a`); dropped positions whose backward
    /// equation cannot be closed stay `None`.
    images: Vec<Option<AnfPoly>>,
    /// Dropped positions without an image, with the reason.
    pub unresolved: Vec<(u8, String)>,
    /// The D/P indices consumed by the fresh-bit equations, for the report.
    pub closure_report: Vec<String>,
}

impl WindowMap {
    pub fn image_of_letter(&self, idx: usize) -> Option<&AnfPoly> {
        self.images.get(idx).and_then(|p| p.as_ref())
    }

    pub fn f_index(&self) -> usize {
        self.window.len()
    }

    pub fn l_index(&self) -> usize {
        self.window.len() + 1
    }

    /// The identity map on a window (every letter is its own image); useful
    /// as the degenerate no-F-dependence reference.
    pub fn identity(window: Window) -> WindowMap {
        let universe = window_universe(window);
        let images = (0..window.len())
            .map(|i| Some(AnfPoly::var(universe.clone(), i)))
            .collect();
        WindowMap {
            window,
            universe,
            images,
            unresolved: vec![],
            closure_report: vec!["identity map".into()],
        }
    }
}

/// Build the backward window map for a key, with the cipher's chain as the
/// single source of the fresh-bit equations and `z` expanded to its ANF.
///
/// Forward closure is a precondition: every fresh bit landing inside the
/// window may only read window bits (plus `F`, `L`); an escaping D or P tap
/// is reported by index. Backward images are then resolved greedily; dropped
/// positions whose equation loops through a not-yet-expressible tap are left
/// imageless and listed in `unresolved`.
pub fn build_window_map(key: &LongTermKey, window: Window, z: BooleanFunc6) -> Result<WindowMap> {
    let lo = window.lo();
    let universe = window_universe(window);
    let len = window.len();
    let in_window = |v: u8| v >= lo && v <= 36;
    let letter_idx = |pos: u8| (36 - pos) as usize;

    // fresh equations whose output lands in the window
    let fresh: Vec<usize> = (1..=9).filter(|&i| 4 * i - 3 >= lo as usize).collect();

    // forward closure: collect every escaping tap
    let mut escapes = Vec::new();
    let mut closure_report = Vec::new();
    for &i in &fresh {
        let d = key.d(i);
        if d == 0 || !in_window(d) {
            escapes.push(format!("D({i})={d}"));
        } else {
            closure_report.push(format!("D({i})={d}"));
        }
        let taps: &[usize] = match i {
            9 => &[],
            8 => &[1, 2, 3, 4, 5],
            7 => &[1, 2, 3, 4, 5, 6],
            6 => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12],
            5 => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13],
            _ => unreachable!(),
        };
        for &j in taps {
            let v = key.p(j);
            if v == 0 || !in_window(v) {
                escapes.push(format!("P({j})={v}"));
            }
        }
    }
    escapes.sort();
    escapes.dedup();
    if !escapes.is_empty() {
        return Err(Error::ClosureViolation(format!(
            "window {{{}..36}} is not closed; escaping taps: {}",
            lo,
            escapes.join(", ")
        )));
    }

    let mut images: Vec<Option<AnfPoly>> = vec![None; len];
    // shift lanes: old bit p reappears at p+1
    for pos in lo..=36 {
        if pos % 4 != 0 {
            images[letter_idx(pos)] =
                Some(AnfPoly::var(universe.clone(), letter_idx(pos + 1)));
        }
    }

    // pending backward equations for dropped positions covered by the chain
    let mut pending: Vec<(u8, usize)> = Vec::new(); // (position, equation i)
    for &i in &fresh {
        let d = key.d(i);
        if d % 4 == 0 && images[letter_idx(d)].is_none() {
            pending.push((d, i));
        }
    }

    let z_anf = z.anf();
    let f_var = AnfPoly::var(universe.clone(), len);
    let l_var = AnfPoly::var(universe.clone(), len + 1);

    // expand Z on argument images (x0..x5)
    let z_on = |args: &[AnfPoly]| -> Result<AnfPoly> {
        let mut out = AnfPoly::zero(universe.clone());
        for mono in z_anf.terms() {
            let mut term = AnfPoly::one(universe.clone());
            for v in mono.vars() {
                term = term.mul(&args[v])?;
            }
            out = out.add(&term)?;
        }
        Ok(out)
    };

    loop {
        let mut progressed = false;
        let mut next_pending = Vec::new();
        'eqs: for (d, i) in pending.drain(..) {
            let img_of = |pos: u8, images: &Vec<Option<AnfPoly>>| -> Option<AnfPoly> {
                images[letter_idx(pos)].clone()
            };
            // expr = letter(4i-3) + F + sum of W_k, k = i..8
            let mut expr = AnfPoly::var(universe.clone(), letter_idx(4 * i as u8 - 3))
                .add(&f_var)
                .unwrap();
            for k in (i..=8).rev() {
                match k {
                    8 => {
                        let mut args = vec![l_var.clone()];
                        for j in 1..=5 {
                            match img_of(key.p(j), &images) {
                                Some(p) => args.push(p),
                                None => {
                                    next_pending.push((d, i));
                                    continue 'eqs;
                                }
                            }
                        }
                        expr = expr.add(&z_on(&args)?)?;
                    }
                    7 => match img_of(key.p(6), &images) {
                        Some(p) => expr = expr.add(&p)?,
                        None => {
                            next_pending.push((d, i));
                            continue 'eqs;
                        }
                    },
                    6 => {
                        let mut args = Vec::with_capacity(6);
                        for j in 7..=12 {
                            match img_of(key.p(j), &images) {
                                Some(p) => args.push(p),
                                None => {
                                    next_pending.push((d, i));
                                    continue 'eqs;
                                }
                            }
                        }
                        expr = expr.add(&z_on(&args)?)?;
                    }
                    5 => match img_of(key.p(13), &images) {
                        Some(p) => expr = expr.add(&p)?,
                        None => {
                            next_pending.push((d, i));
                            continue 'eqs;
                        }
                    },
                    _ => unreachable!(),
                }
            }
            images[letter_idx(d)] = Some(expr);
            progressed = true;
        }
        if next_pending.is_empty() {
            break;
        }
        if !progressed {
            pending = next_pending;
            break;
        }
        pending = next_pending;
    }

    let mut unresolved: Vec<(u8, String)> = pending
        .iter()
        .map(|&(d, i)| {
            (d, format!("equation of stage {i} loops through a tap on position {d}"))
        })
        .collect();
    for pos in (lo..=36).filter(|p| p % 4 == 0) {
        if images[letter_idx(pos)].is_none() && !unresolved.iter().any(|(p, _)| *p == pos) {
            unresolved.push((pos, "no chain stage recovers this dropped bit".into()));
        }
    }
    unresolved.sort();

    Ok(WindowMap {
        window,
        universe,
        images,
        unresolved,
        closure_report,
    })
}

/// L handling for verification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LMode {
    Zero,
    One,
    Both,
}

impl LMode {
    pub fn parse(s: &str) -> Option<LMode> {
        match s {
            "0" => Some(LMode::Zero),
            "1" => Some(LMode::One),
            "both" => Some(LMode::Both),
            _ => None,
        }
    }

    fn bits(self) -> &'static [bool] {
        match self {
            LMode::Zero => &[false],
            LMode::One => &[true],
            LMode::Both => &[false, true],
        }
    }
}

fn subst_symbol(p: &AnfPoly, idx: usize, bit: bool) -> AnfPoly {
    let universe = p.universe().clone();
    let mut terms: Vec<Monomial> = Vec::new();
    for m in p.terms() {
        if m.contains(idx) {
            if bit {
                terms.push(Monomial(m.0 & !(1 << idx)));
            }
        } else {
            terms.push(m);
        }
    }
    AnfPoly::from_terms(universe, terms).unwrap()
}

/// Apply the map to a polynomial over the window letters: substitute each
/// letter by its image, expand, and fix `F` (and `L` unless symbolic).
/// Computed through truth tables over the window universe, which is the
/// same expansion as sparse substitution but bounded by the window size.
pub fn apply_map(map: &WindowMap, p: &AnfPoly, f: bool, l: Option<bool>) -> Result<AnfPoly> {
    if p.universe() != &map.universe {
        return Err(Error::UniverseMismatch("polynomial not over the window universe".into()));
    }
    let arity = map.universe.arity();
    let mut needed = vec![false; map.window.len()];
    for m in p.terms() {
        for v in m.vars() {
            if v >= map.window.len() {
                return Err(Error::Precondition(format!(
                    "polynomial mentions the symbol `{}`; apply fixes it",
                    map.universe.name(v)
                )));
            }
            needed[v] = true;
        }
    }
    // letter image truth tables with F (and L) substituted
    let words = (1usize << arity).div_ceil(64);
    let mut letter_tt: Vec<Option<Vec<u64>>> = vec![None; map.window.len()];
    for (idx, need) in needed.iter().enumerate() {
        if !need {
            continue;
        }
        let img = map
            .image_of_letter(idx)
            .ok_or_else(|| Error::MissingImage(map.universe.name(idx).chars().next().unwrap(), map.window.pos_of_letter_index(idx)))?;
        let mut img = subst_symbol(img, map.f_index(), f);
        if let Some(lb) = l {
            img = subst_symbol(&img, map.l_index(), lb);
        }
        letter_tt[idx] = Some(DensePoly::from_sparse(&img)?.truth_table());
    }
    let mut acc = vec![0u64; words];
    let ones = vec![u64::MAX; words];
    for m in p.terms() {
        let mut tt = ones.clone();
        for v in m.vars() {
            let lt = letter_tt[v].as_ref().unwrap();
            for (a, b) in tt.iter_mut().zip(lt) {
                *a &= b;
            }
        }
        for (a, b) in acc.iter_mut().zip(&tt) {
            *a ^= b;
        }
    }
    butterfly(&mut acc, arity);
    let terms = (0..1usize << arity)
        .filter(|&mask| (acc[mask / 64] >> (mask % 64)) & 1 == 1)
        .map(|mask| Monomial(mask as u32));
    AnfPoly::from_terms(map.universe.clone(), terms)
}

/// Result of a pointwise invariant check.
#[derive(Clone, Debug)]
pub struct VerifyOutcome {
    pub holds: bool,
    /// `apply_map(p) + p` for the first failing L value.
    pub difference: Option<AnfPoly>,
}

/// True iff `apply_map(p) = p` under the given `F` and every `L` in the
/// requested mode.
pub fn verify_invariant(
    map: &WindowMap,
    p: &AnfPoly,
    f: bool,
    l: LMode,
) -> Result<VerifyOutcome> {
    for &lb in l.bits() {
        let image = apply_map(map, p, f, Some(lb))?;
        if &image != p {
            return Ok(VerifyOutcome {
                holds: false,
                difference: Some(image.add(p)?),
            });
        }
    }
    Ok(VerifyOutcome { holds: true, difference: None })
}

/// Basis of the one-round invariant space for fixed `F` and `L`.
#[derive(Clone, Debug)]
pub struct InvariantBasis {
    pub f_bit: bool,
    pub l_bit: bool,
    pub dimension: usize,
    pub basis: Vec<AnfPoly>,
}

/// Kernel search over all `2^n` window monomials (n <= 13): the matrix
/// column of a monomial is `monomial + image(monomial)` and the kernel is
/// the invariant space. Every basis element is re-verified by [`apply_map`].
pub fn invariant_space(map: &WindowMap, f: bool, l: bool) -> Result<InvariantBasis> {
    let n = map.window.len();
    if n > 13 {
        return Err(Error::ArityTooLarge(n, 13));
    }
    if let Some((pos, why)) = map.unresolved.first() {
        return Err(Error::ClosureViolation(format!(
            "no backward image for position {pos} ({why}); kernel search needs every letter"
        )));
    }
    let size = 1usize << n;
    let words = size.div_ceil(64);
    // letter truth tables over the n-letter space (images contain only
    // letters after fixing F and L, and letters occupy the low mask bits)
    let mut letter_tt: Vec<Vec<u64>> = Vec::with_capacity(n);
    for idx in 0..n {
        let img = map.image_of_letter(idx).unwrap();
        let img = subst_symbol(&subst_symbol(img, map.f_index(), f), map.l_index(), l);
        let mut dense = vec![0u64; words];
        for m in img.terms() {
            debug_assert!((m.0 as usize) < size, "image uses a fixed symbol");
            dense[m.0 as usize / 64] ^= 1 << (m.0 % 64);
        }
        butterfly(&mut dense, n);
        letter_tt.push(dense);
    }
    // monomial image truth tables by subset dynamic programming
    let mut tts: Vec<Vec<u64>> = Vec::with_capacity(size);
    tts.push(vec![u64::MAX; words]);
    for m in 1..size {
        let low = m & m.wrapping_neg();
        let b = low.trailing_zeros() as usize;
        let mut tt = tts[m ^ low].clone();
        for (a, c) in tt.iter_mut().zip(&letter_tt[b]) {
            *a &= c;
        }
        tts.push(tt);
    }
    // operator matrix: column m = anf(image(m)) + e_m
    let mut matrix = BitMatrix::zero(size, size);
    for (m, tt) in tts.into_iter().enumerate() {
        let mut anf = tt;
        butterfly(&mut anf, n);
        anf[m / 64] ^= 1 << (m % 64);
        for (coeff, word) in anf.iter().enumerate() {
            let mut w = *word;
            while w != 0 {
                let bit = w.trailing_zeros() as usize;
                matrix.set(coeff * 64 + bit, m, true);
                w &= w - 1;
            }
        }
    }
    let kernel = matrix.kernel();
    let mut basis = Vec::with_capacity(kernel.len());
    for v in &kernel {
        let terms = (0..size).filter(|&m| vec_get(v, m)).map(|m| Monomial(m as u32));
        let p = AnfPoly::from_terms(map.universe.clone(), terms)?;
        let back = apply_map(map, &p, f, Some(l))?;
        assert_eq!(back, p, "kernel element failed re-application");
        basis.push(p);
    }
    Ok(InvariantBasis { f_bit: f, l_bit: l, dimension: basis.len(), basis })
}

/// Overlap report between the F=0 and F=1 invariant spaces of one map.
#[derive(Clone, Debug)]
pub struct FDualityReport {
    pub dim_f0: usize,
    pub dim_f1: usize,
    pub intersection_dim: usize,
    /// Intersection dimension with the constant polynomial's span removed.
    pub intersection_dim_nonconstant: usize,
}

/// Intersection dimension of two bases computed on the same map.
pub fn check_f_duality(
    map: &WindowMap,
    basis_f0: &InvariantBasis,
    basis_f1: &InvariantBasis,
) -> FDualityReport {
    let n = map.window.len();
    let size = 1usize << n;
    let rank_of = |rows: &[&AnfPoly]| -> usize {
        let mut m = BitMatrix::zero(rows.len(), size);
        for (r, p) in rows.iter().enumerate() {
            for mono in p.terms() {
                m.set(r, mono.0 as usize, true);
            }
        }
        m.rank()
    };
    let a: Vec<&AnfPoly> = basis_f0.basis.iter().collect();
    let b: Vec<&AnfPoly> = basis_f1.basis.iter().collect();
    let dim_a = rank_of(&a);
    let dim_b = rank_of(&b);
    let mut joint = a.clone();
    joint.extend(b.iter().copied());
    let dim_sum = rank_of(&joint);
    let intersection = dim_a + dim_b - dim_sum;
    // the constant polynomial is invariant under any map; it lies in the
    // intersection whenever it lies in both spans
    let one = AnfPoly::one(map.universe.clone());
    let in_span = |rows: &[&AnfPoly], dim: usize| {
        let mut with = rows.to_vec();
        with.push(&one);
        rank_of(&with) == dim
    };
    let const_in_both = in_span(&a, dim_a) && in_span(&b, dim_b);
    FDualityReport {
        dim_f0: dim_a,
        dim_f1: dim_b,
        intersection_dim: intersection,
        intersection_dim_nonconstant: intersection - usize::from(const_in_both),
    }
}

/// Long-term keys used by the invariant-search demonstrations. They are not
/// KT1 members; the extraction bit is set to 1 and never used here.
pub mod sample_keys {
    use crate::cipher::LongTermKey;

    /// 12-bit window search key (original and alternative Z experiments).
    pub fn search_12bit() -> LongTermKey {
        LongTermKey::new(
            [1, 13, 3, 2, 11, 12, 32, 28, 36],
            [
                35, 27, 26, 34, 31, 29, 25, 14, 7, 22, 15, 33, 8, 30, 6, 10, 23, 4, 24, 18,
                9, 20, 17, 19, 16, 5, 21,
            ],
            1,
        )
        .unwrap()
    }

    /// First duality example key (12-bit window, invariant only at F=1).
    pub fn duality_a() -> LongTermKey {
        LongTermKey::new(
            [1, 26, 9, 34, 4, 19, 28, 36, 32],
            [
                30, 35, 31, 25, 33, 27, 5, 22, 17, 29, 13, 20, 1, 9, 21, 3, 24, 7, 6, 28,
                26, 2, 32, 23, 18, 4, 34,
            ],
            1,
        )
        .unwrap()
    }

    /// Second duality example key (12-bit window, invariant only at F=1).
    pub fn duality_b() -> LongTermKey {
        LongTermKey::new(
            [0, 30, 26, 6, 7, 1, 28, 36, 32],
            [
                26, 30, 29, 31, 27, 36, 5, 18, 9, 15, 10, 19, 28, 13, 21, 32, 17, 25, 14, 7,
                11, 3, 20, 35, 34, 33, 2,
            ],
            1,
        )
        .unwrap()
    }

    /// 20-bit toy key used with the product Boolean function.
    pub fn toy_20bit() -> LongTermKey {
        LongTermKey::new(
            [17, 25, 26, 35, 18, 34, 30, 32, 28],
            [
                27, 29, 31, 21, 33, 19, 26, 25, 22, 32, 23, 17, 24, 16, 18, 9, 5, 10, 35,
                13, 36, 30, 34, 11, 2, 28, 14,
            ],
            1,
        )
        .unwrap()
    }

    /// 20-bit key with a degree-4 symmetric invariant at F=0, L=0.
    pub fn search_20bit_a() -> LongTermKey {
        LongTermKey::new(
            [0, 12, 16, 4, 36, 28, 20, 32, 24],
            [
                22, 29, 18, 31, 30, 32, 35, 27, 34, 28, 33, 26, 20, 24, 21, 17, 13, 25, 27,
                8, 19, 36, 23, 16, 4, 15, 14,
            ],
            1,
        )
        .unwrap()
    }

    /// 20-bit key with an invariant at F=1 for both L values.
    pub fn search_20bit_b() -> LongTermKey {
        LongTermKey::new(
            [0, 4, 8, 12, 24, 20, 28, 36, 32],
            [
                18, 29, 26, 31, 30, 36, 35, 19, 21, 23, 24, 34, 33, 15, 32, 14, 12, 3, 20,
                16, 4, 2, 13, 11, 1, 12, 10,
            ],
            1,
        )
        .unwrap()
    }

    /// The product function x1x2x3x4x5 used with the toy 20-bit key.
    pub fn toy_z() -> crate::boolfn::BooleanFunc6 {
        crate::boolfn::BooleanFunc6::from_table((1u64 << 62) | (1u64 << 63))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cipher::{known_key, round, CipherState};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn parse(u: &Arc<VarUniverse>, s: &str) -> AnfPoly {
        AnfPoly::parse(u, s).unwrap()
    }

    #[test]
    fn letters_and_universe() {
        assert_eq!(Window::W12.letter_of(36), 'a');
        assert_eq!(Window::W12.letter_of(25), 'l');
        assert_eq!(Window::W20.letter_of(17), 't');
        let u = window_universe(Window::W12);
        assert_eq!(u.arity(), 14);
        assert_eq!(u.name(12), "F");
        assert_eq!(u.name(13), "L");
    }

    #[test]
    fn shift_images_are_single_letters() {
        let map = build_window_map(
            &sample_keys::search_12bit(),
            Window::W12,
            BooleanFunc6::z(),
        )
        .unwrap();
        let u = &map.universe;
        // d (u33) shifts to c
        let d_idx = u.index_of("d").unwrap();
        assert_eq!(map.image_of_letter(d_idx).unwrap(), &parse(u, "c"));
        // a (u36) drops through the last chain stage: F + d
        let a_idx = u.index_of("a").unwrap();
        assert_eq!(map.image_of_letter(a_idx).unwrap(), &parse(u, "F+d"));
        assert!(map.unresolved.is_empty());
    }

    #[test]
    fn key_625_fails_window_closure() {
        let err = build_window_map(&known_key("625").unwrap(), Window::W12, BooleanFunc6::z())
            .unwrap_err();
        match err {
            Error::ClosureViolation(msg) => {
                assert!(msg.contains("P(1)=7"), "{msg}");
                assert!(msg.contains("D(8)=20"), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn apply_map_on_symmetric_invariants() {
        let map =
            build_window_map(&sample_keys::search_12bit(), Window::W12, BooleanFunc6::z())
                .unwrap();
        let u = &map.universe;
        let d = parse(u, "d");
        assert_eq!(apply_map(&map, &d, false, Some(false)).unwrap(), parse(u, "c"));
        for text in ["a+b+c+d", "bd+ac", "ab+ad+bc+cd", "abc+abd+acd+bcd", "abcd"] {
            let p = parse(u, text);
            let out = apply_map(&map, &p, false, Some(false)).unwrap();
            assert_eq!(out, p, "{text} should be invariant at F=0");
        }
    }

    #[test]
    fn duality_example_a_is_f1_only() {
        let map =
            build_window_map(&sample_keys::duality_a(), Window::W12, BooleanFunc6::z()).unwrap();
        let u = &map.universe;
        let p = parse(
            u,
            "efghijkl+defghijkl+cefghijkl+cdefghijkl+befghijkl+bdefghijkl+bcefghijkl+\
             bcdefghijkl+aefghijkl+adefghijkl+acefghijkl+acdefghijkl+abefghijkl+\
             abdefghijkl+abcefghijkl+abcdefghijkl",
        );
        assert!(verify_invariant(&map, &p, true, LMode::One).unwrap().holds);
        let fail = verify_invariant(&map, &p, false, LMode::One).unwrap();
        assert!(!fail.holds);
        assert!(fail.difference.is_some());
    }

    #[test]
    fn duality_example_b_is_f1_only() {
        let map =
            build_window_map(&sample_keys::duality_b(), Window::W12, BooleanFunc6::z()).unwrap();
        let u = &map.universe;
        let p = parse(
            u,
            "abcdijkl+abcdhijkl+abcdgijkl+abcdghijkl+abcdfijkl+abcdfhijkl+abcdfgijkl+\
             abcdfghijkl+abcdeijkl+abcdehijkl+abcdegijkl+abcdeghijkl+abcdefijkl+\
             abcdefhijkl+abcdefgijkl+abcdefghijkl",
        );
        assert!(verify_invariant(&map, &p, true, LMode::One).unwrap().holds);
        assert!(!verify_invariant(&map, &p, false, LMode::One).unwrap().holds);
        // image of i under this key collapses to l + h
        let i_idx = u.index_of("i").unwrap();
        assert_eq!(map.image_of_letter(i_idx).unwrap(), &parse(u, "l+h"));
    }

    #[test]
    fn toy_20bit_invariants() {
        let map =
            build_window_map(&sample_keys::toy_20bit(), Window::W20, sample_keys::toy_z())
                .unwrap();
        let u = &map.universe;
        let p = parse(u, "h+g+f+e+fgh+egh+efh+efg");
        let r = parse(u, "g+f+gh+eh+fg+ef");
        assert!(verify_invariant(&map, &p, false, LMode::Both).unwrap().holds);
        assert!(!verify_invariant(&map, &p, true, LMode::Zero).unwrap().holds);
        assert!(verify_invariant(&map, &r, true, LMode::Both).unwrap().holds);
        assert!(!map.unresolved.is_empty());
    }

    #[test]
    fn symmetric_20bit_invariant_at_f0_l0() {
        let map =
            build_window_map(&sample_keys::search_20bit_a(), Window::W20, BooleanFunc6::z())
                .unwrap();
        let u = &map.universe;
        let p = parse(u, "h+g+f+e+gh+fh+eh+fg+eg+ef+fgh+egh+efh+efg+efgh");
        assert!(verify_invariant(&map, &p, false, LMode::Zero).unwrap().holds);
        assert!(!verify_invariant(&map, &p, false, LMode::One).unwrap().holds);
        assert!(!verify_invariant(&map, &p, true, LMode::Zero).unwrap().holds);
    }

    #[test]
    fn product_20bit_invariant_for_both_l() {
        let map =
            build_window_map(&sample_keys::search_20bit_b(), Window::W20, BooleanFunc6::z())
                .unwrap();
        let u = &map.universe;
        let p = parse(u, "abcdijkl")
            .mul(&parse(u, "1+h+g+f+e+gh+fh+eh+fg+eg+ef+fgh+egh+efh+efg+efgh"))
            .unwrap();
        assert_eq!(p.term_count(), 16);
        assert!(verify_invariant(&map, &p, true, LMode::Both).unwrap().holds);
        assert!(!verify_invariant(&map, &p, false, LMode::Both).unwrap().holds);
    }

    #[test]
    fn invariant_space_dimensions_and_containment() {
        let key = sample_keys::search_12bit();
        let map = build_window_map(&key, Window::W12, BooleanFunc6::z()).unwrap();
        let b00 = invariant_space(&map, false, false).unwrap();
        assert_eq!(b00.dimension, 30);
        let b01 = invariant_space(&map, false, true).unwrap();
        assert_eq!(b01.dimension, 44);
        let alt = build_window_map(&key, Window::W12, BooleanFunc6::alt_z()).unwrap();
        let balt = invariant_space(&alt, false, true).unwrap();
        assert_eq!(balt.dimension, 54);
        // the five symmetric polynomials lie in the alternative space too
        let u = &alt.universe;
        for text in ["a+b+c+d", "bd+ac", "ab+ad+bc+cd", "abc+abd+acd+bcd", "abcd"] {
            let p = parse(u, text);
            assert!(
                verify_invariant(&alt, &p, false, LMode::One).unwrap().holds,
                "{text}"
            );
        }
    }

    #[test]
    fn invariant_space_rejects_20bit_windows() {
        let map =
            build_window_map(&sample_keys::search_20bit_a(), Window::W20, BooleanFunc6::z())
                .unwrap();
        assert!(matches!(
            invariant_space(&map, false, false),
            Err(Error::ArityTooLarge(20, 13))
        ));
    }

    #[test]
    fn f_duality_on_example_key() {
        let map =
            build_window_map(&sample_keys::duality_a(), Window::W12, BooleanFunc6::z()).unwrap();
        let b0 = invariant_space(&map, false, true).unwrap();
        let b1 = invariant_space(&map, true, true).unwrap();
        let rep = check_f_duality(&map, &b0, &b1);
        assert_eq!(rep.dim_f0, b0.dimension);
        assert_eq!(rep.dim_f1, b1.dimension);
        // the example polynomial lives in exactly one of the two spaces
        let u = &map.universe;
        let p = parse(
            u,
            "efghijkl+defghijkl+cefghijkl+cdefghijkl+befghijkl+bdefghijkl+bcefghijkl+\
             bcdefghijkl+aefghijkl+adefghijkl+acefghijkl+acdefghijkl+abefghijkl+\
             abdefghijkl+abcefghijkl+abcdefghijkl",
        );
        let in_f0 = verify_invariant(&map, &p, false, LMode::One).unwrap().holds;
        let in_f1 = verify_invariant(&map, &p, true, LMode::One).unwrap().holds;
        assert!(in_f1 && !in_f0);
        // identity map: both spaces are everything, intersection is full
        let id = WindowMap::identity(Window::W12);
        let i0 = invariant_space(&id, false, false).unwrap();
        let i1 = invariant_space(&id, true, false).unwrap();
        let rep = check_f_duality(&id, &i0, &i1);
        assert_eq!(rep.intersection_dim, 4096);
        let _ = rep.intersection_dim_nonconstant;
    }

    #[test]
    fn window_invariants_hold_on_concrete_rounds() {
        // link the symbolic engine to the cipher: a reported invariant keeps
        // its value across one real round with f = F and s2 = L
        let mut rng = ChaCha12Rng::seed_from_u64(61);
        let key = sample_keys::search_12bit();
        let map = build_window_map(&key, Window::W12, BooleanFunc6::z()).unwrap();
        let basis = invariant_space(&map, false, false).unwrap();
        let eval = |p: &AnfPoly, st: CipherState| -> bool {
            let mut assign = vec![None; map.universe.arity()];
            for idx in 0..map.window.len() {
                assign[idx] = Some(st.bit((36 - idx) as usize));
            }
            p.eval(&assign).unwrap()
        };
        for _ in 0..2000 {
            let st = CipherState::from_raw(rng.gen::<u64>() & ((1 << 36) - 1));
            let p = &basis.basis[rng.gen_range(0..basis.basis.len())];
            let out = round(st, rng.gen(), false, false, &key);
            assert_eq!(eval(p, st), eval(p, out));
        }
    }
}
