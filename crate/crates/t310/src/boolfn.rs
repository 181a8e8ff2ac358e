//! Spectral and algebraic analysis of 6-variable Boolean functions.
//!
//! Spectrum conventions: the Walsh histogram tallies the transform of the
//! 0/1-valued truth table over the 63 nonzero masks (for a balanced function
//! the squared values then sum to `64*wt - wt^2`); the full-vector API also
//! exposes the standard polarity (+-1) spectrum for cross-checking. The
//! autocorrelation uses the +-1 form over all 64 shifts including zero.

use crate::anf::{AnfPoly, VarUniverse};
use crate::gf2::BitMatrix;
use crate::{Error, Result};
use std::collections::BTreeMap;
use std::fmt;

/// Truth table of the cipher's 6-input nonlinear component, bit `x` = Z(x)
/// with `x0` in the low-order index bit. Derived from its ANF
/// (see [`z_anf_terms`]); the unit tests re-derive it term by term.
pub const Z_TT: u64 = 0x32C1_73F5_86D9_E06A;

/// A randomly generated 6-variable function kept as a second reference
/// sample for spectrum tables and invariant-space searches.
pub const ALT_Z_TT: u64 = 0x0E5D_EB54_0CC4_6EC4;

/// Monomials of Z's algebraic normal form, each a mask over x0..x5.
pub fn z_anf_terms() -> &'static [u32] {
    // x0, x4, x5, x0x3, x1x2, x1x4, x3x4, x4x5,
    // x0x2x3, x0x2x5, x0x3x4, x1x2x5, x1x3x5, x2x4x5,
    // x0x1x2x3, x0x1x2x4, x0x1x4x5, x1x2x3x5, x0x1x2x3x4, x0x2x3x4x5
    &[
        0b000001, 0b010000, 0b100000, 0b001001, 0b000110, 0b010010, 0b011000, 0b110000,
        0b001101, 0b100101, 0b011001, 0b100110, 0b101010, 0b110100, 0b001111, 0b010111,
        0b110011, 0b101110, 0b011111, 0b111101,
    ]
}

/// Monomials of the alternative reference function's ANF.
pub fn alt_z_anf_terms() -> &'static [u32] {
    &[
        0b000010, 0b000011, 0b001001, 0b100100, 0b101000, 0b110000, 0b000111, 0b100101,
        0b011001, 0b101001, 0b110001, 0b100110, 0b110010, 0b110100, 0b011011, 0b110101,
        0b111001, 0b011110, 0b101110, 0b110110, 0b111010, 0b011111, 0b101111, 0b111011,
        0b111101, 0b111110,
    ]
}

/// A 6-variable Boolean function as a 64-entry truth table.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct BooleanFunc6(u64);

impl BooleanFunc6 {
    pub fn from_table(tt: u64) -> Self {
        BooleanFunc6(tt)
    }

    /// The cipher's Z function.
    pub fn z() -> Self {
        BooleanFunc6(Z_TT)
    }

    /// The alternative reference function.
    pub fn alt_z() -> Self {
        BooleanFunc6(ALT_Z_TT)
    }

    pub fn table(self) -> u64 {
        self.0
    }

    pub fn bit(self, x: usize) -> bool {
        (self.0 >> x) & 1 == 1
    }

    pub fn weight(self) -> u32 {
        self.0.count_ones()
    }

    /// 16 hex digits, index 0 in the low nibble.
    pub fn to_hex(self) -> String {
        format!("{:016X}", self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.len() != 16 {
            return Err(Error::Parse(format!(
                "truth table must be 16 hex digits, got {}",
                s.len()
            )));
        }
        u64::from_str_radix(s, 16)
            .map(BooleanFunc6)
            .map_err(|e| Error::Parse(format!("bad truth table hex: {e}")))
    }

    /// ANF over the x0..x5 universe.
    pub fn anf(self) -> AnfPoly {
        let u = VarUniverse::xvars(6);
        let table: Vec<bool> = (0..64).map(|x| self.bit(x)).collect();
        crate::anf::truth_table_to_anf(&u, &table).unwrap()
    }
}

/// Histogram of spectrum values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpectrumHistogram {
    pub entries: BTreeMap<i32, u32>,
}

impl SpectrumHistogram {
    fn tally(values: impl Iterator<Item = i32>) -> Self {
        let mut entries = BTreeMap::new();
        for v in values {
            *entries.entry(v).or_insert(0) += 1;
        }
        SpectrumHistogram { entries }
    }

    pub fn total(&self) -> u32 {
        self.entries.values().sum()
    }
}

impl fmt::Display for SpectrumHistogram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (v, c) in &self.entries {
            writeln!(f, "{v:>6}  {c}")?;
        }
        Ok(())
    }
}

/// Walsh transform of the 0/1 truth table: `W[a] = sum_x f(x) * (-1)^(a.x)`.
/// The histogram covers the 63 nonzero masks; `W[0]` equals the weight.
pub fn walsh_spectrum(f: BooleanFunc6) -> ([i32; 64], SpectrumHistogram) {
    let mut w = [0i32; 64];
    for (a, slot) in w.iter_mut().enumerate() {
        let mut acc = 0;
        for x in 0..64usize {
            if f.bit(x) {
                acc += if (a & x).count_ones() % 2 == 0 { 1 } else { -1 };
            }
        }
        *slot = acc;
    }
    let hist = SpectrumHistogram::tally(w[1..].iter().copied());
    (w, hist)
}

/// Standard polarity Walsh spectrum `sum_x (-1)^(f(x) ^ a.x)`, kept for
/// cross-checking: for `a != 0` it equals `-2 W[a]`.
pub fn polarity_walsh_spectrum(f: BooleanFunc6) -> [i32; 64] {
    let mut w = [0i32; 64];
    for (a, slot) in w.iter_mut().enumerate() {
        let mut acc = 0;
        for x in 0..64usize {
            let s = f.bit(x) as u32 + (a & x).count_ones();
            acc += if s % 2 == 0 { 1 } else { -1 };
        }
        *slot = acc;
    }
    w
}

/// Autocorrelation `r(x) = sum_y (-1)^(f(y) ^ f(y^x))` over all 64 shifts.
pub fn autocorrelation_spectrum(f: BooleanFunc6) -> ([i32; 64], SpectrumHistogram) {
    let mut r = [0i32; 64];
    for (x, slot) in r.iter_mut().enumerate() {
        let mut acc = 0;
        for y in 0..64usize {
            acc += if f.bit(y) == f.bit(y ^ x) { 1 } else { -1 };
        }
        *slot = acc;
    }
    let hist = SpectrumHistogram::tally(r.iter().copied());
    (r, hist)
}

/// Basis of the annihilator space for one side of a Boolean function.
#[derive(Clone, Debug)]
pub struct AnnihilatorReport {
    /// Which constant side: g vanishes on `{x : f(x) = side}`,
    /// i.e. `(f + 1 + side) * g = 0`.
    pub side: u8,
    pub basis: Vec<AnfPoly>,
    /// Number of basis elements of the solution space.
    pub count: usize,
}

/// All g of degree <= `max_degree` with `g(x) = 0` wherever `f(x) = side`,
/// computed as the kernel of the evaluation matrix whose rows are the points
/// of that side and whose columns are the admissible monomials.
pub fn annihilator_space(f: BooleanFunc6, side: u8, max_degree: u32) -> Result<AnnihilatorReport> {
    if max_degree > 6 {
        return Err(Error::OutOfRange(format!(
            "max_degree {max_degree} exceeds 6"
        )));
    }
    let monomials: Vec<u32> = (0..64u32).filter(|m| m.count_ones() <= max_degree).collect();
    let points: Vec<usize> = (0..64).filter(|&x| f.bit(x) == (side == 1)).collect();
    let mut m = BitMatrix::zero(points.len(), monomials.len());
    for (r, &x) in points.iter().enumerate() {
        for (c, &mono) in monomials.iter().enumerate() {
            // monomial value at x: all its variables set
            m.set(r, c, x as u32 & mono == mono);
        }
    }
    let kernel = m.kernel();
    let u = VarUniverse::xvars(6);
    let mut basis = Vec::with_capacity(kernel.len());
    for v in &kernel {
        let terms = monomials
            .iter()
            .enumerate()
            .filter(|(c, _)| crate::gf2::vec_get(v, *c))
            .map(|(_, &mono)| crate::anf::Monomial(mono));
        let g = AnfPoly::from_terms(u.clone(), terms)?;
        // (f + 1 + side) * g must vanish everywhere
        let tt = crate::anf::anf_to_truth_table(&g);
        for x in 0..64usize {
            let fx = f.bit(x) ^ true ^ (side == 1);
            assert!(!(fx && tt[x]), "annihilator failed brute-force check");
        }
        basis.push(g);
    }
    let count = basis.len();
    Ok(AnnihilatorReport { side, basis, count })
}

/// Witness for a failed restricted-annihilator identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RestrictedAnnihilatorWitness {
    /// Assignment (x0..x5) where the product is nonzero.
    pub point: [bool; 6],
    /// Which identity failed: false = the x0=0 identity, true = the x0=1 one.
    pub x0_one_case: bool,
}

/// Brute-force check of the two restricted annihilator identities of Z over
/// all 32 assignments of (x1..x5):
/// with x0 = 0, `Z * (1+x2)(1+x4)(1+x5) = 0`;
/// with x0 = 1, the same product additionally multiplied by x3 is 0.
pub fn verify_z_restricted_annihilators() -> std::result::Result<(), RestrictedAnnihilatorWitness> {
    verify_restricted_annihilators_of(BooleanFunc6::z())
}

/// Same identities checked against an arbitrary table (used to show a
/// perturbed Z breaks them).
pub fn verify_restricted_annihilators_of(
    f: BooleanFunc6,
) -> std::result::Result<(), RestrictedAnnihilatorWitness> {
    // 1 + x2 + x4 + x5 + x2x4 + x2x5 + x4x5 + x2x4x5 = (1+x2)(1+x4)(1+x5)
    let annih = |x: usize| (x >> 2) & 1 == 0 && (x >> 4) & 1 == 0 && (x >> 5) & 1 == 0;
    for rest in 0..32usize {
        let x0_0 = rest << 1;
        if f.bit(x0_0) && annih(x0_0) {
            return Err(RestrictedAnnihilatorWitness {
                point: point_bits(x0_0),
                x0_one_case: false,
            });
        }
        let x0_1 = (rest << 1) | 1;
        if f.bit(x0_1) && annih(x0_1) && (x0_1 >> 3) & 1 == 1 {
            return Err(RestrictedAnnihilatorWitness {
                point: point_bits(x0_1),
                x0_one_case: true,
            });
        }
    }
    Ok(())
}

fn point_bits(x: usize) -> [bool; 6] {
    [
        x & 1 == 1,
        (x >> 1) & 1 == 1,
        (x >> 2) & 1 == 1,
        (x >> 3) & 1 == 1,
        (x >> 4) & 1 == 1,
        (x >> 5) & 1 == 1,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anf::anf_to_truth_table;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn z_table_matches_its_anf() {
        let u = VarUniverse::xvars(6);
        let p = AnfPoly::from_terms(
            u,
            z_anf_terms().iter().map(|&m| crate::anf::Monomial(m)),
        )
        .unwrap();
        let tt = anf_to_truth_table(&p);
        let mut packed = 0u64;
        for (i, &b) in tt.iter().enumerate() {
            if b {
                packed |= 1 << i;
            }
        }
        assert_eq!(packed, Z_TT);
        assert_eq!(BooleanFunc6::z().weight(), 32);
    }

    #[test]
    fn alt_table_matches_its_anf() {
        let u = VarUniverse::xvars(6);
        let p = AnfPoly::from_terms(
            u,
            alt_z_anf_terms().iter().map(|&m| crate::anf::Monomial(m)),
        )
        .unwrap();
        let tt = anf_to_truth_table(&p);
        let mut packed = 0u64;
        for (i, &b) in tt.iter().enumerate() {
            if b {
                packed |= 1 << i;
            }
        }
        assert_eq!(packed, ALT_Z_TT);
    }

    #[test]
    fn z_walsh_histogram_reference_values() {
        let (_, hist) = walsh_spectrum(BooleanFunc6::z());
        let want: &[(i32, u32)] = &[
            (-10, 1),
            (-8, 2),
            (-6, 8),
            (-4, 5),
            (-2, 10),
            (0, 16),
            (2, 8),
            (4, 7),
            (6, 5),
            (8, 1),
        ];
        assert_eq!(hist.entries, want.iter().copied().collect());
        assert_eq!(hist.total(), 63);
        // squared-sum check for a balanced function: 64*32 - 32^2 = 1024
        let sq: i64 = hist
            .entries
            .iter()
            .map(|(&v, &c)| (v as i64) * (v as i64) * c as i64)
            .sum();
        assert_eq!(sq, 1024);
    }

    #[test]
    fn z_autocorrelation_histogram_reference_values() {
        let (vec, hist) = autocorrelation_spectrum(BooleanFunc6::z());
        assert_eq!(vec[0], 64);
        let want: &[(i32, u32)] = &[
            (-24, 3),
            (-16, 6),
            (-8, 13),
            (0, 20),
            (8, 17),
            (16, 3),
            (24, 1),
            (64, 1),
        ];
        assert_eq!(hist.entries, want.iter().copied().collect());
        assert_eq!(hist.total(), 64);
    }

    #[test]
    fn alt_function_histogram_reference_values() {
        let (_, wh) = walsh_spectrum(BooleanFunc6::alt_z());
        let want_w: &[(i32, u32)] = &[
            (-12, 1),
            (-8, 2),
            (-6, 5),
            (-4, 6),
            (-2, 14),
            (0, 13),
            (2, 11),
            (4, 8),
            (6, 1),
            (8, 1),
            (12, 1),
        ];
        assert_eq!(wh.entries, want_w.iter().copied().collect());
        let (_, ah) = autocorrelation_spectrum(BooleanFunc6::alt_z());
        let want_a: &[(i32, u32)] = &[
            (-32, 2),
            (-24, 5),
            (-16, 6),
            (-8, 10),
            (0, 17),
            (8, 11),
            (16, 9),
            (24, 2),
            (32, 1),
            (64, 1),
        ];
        assert_eq!(ah.entries, want_a.iter().copied().collect());
    }

    #[test]
    fn constant_zero_spectrum() {
        let f = BooleanFunc6::from_table(0);
        let (vec, hist) = walsh_spectrum(f);
        assert!(vec.iter().all(|&v| v == 0));
        assert_eq!(hist.entries, [(0, 63)].into_iter().collect());
    }

    #[test]
    fn spectra_match_naive_double_loop_on_random_functions() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..100 {
            let f = BooleanFunc6::from_table(rng.gen());
            let (w, _) = walsh_spectrum(f);
            let pw = polarity_walsh_spectrum(f);
            for a in 0..64usize {
                let mut acc = 0i32;
                for x in 0..64usize {
                    if f.bit(x) {
                        acc += if (a & x).count_ones() % 2 == 0 { 1 } else { -1 };
                    }
                }
                assert_eq!(w[a], acc);
                if a != 0 {
                    assert_eq!(pw[a], -2 * w[a]);
                }
            }
            let (r, _) = autocorrelation_spectrum(f);
            for x in 0..64usize {
                let mut acc = 0i32;
                for y in 0..64usize {
                    acc += if f.bit(y) == f.bit(y ^ x) { 1 } else { -1 };
                }
                assert_eq!(r[x], acc);
            }
            assert_eq!(r[0], 64);
        }
    }

    #[test]
    fn z_annihilator_space_dimension_is_32_per_side() {
        for side in [0u8, 1u8] {
            let rep = annihilator_space(BooleanFunc6::z(), side, 6).unwrap();
            assert_eq!(rep.count, 32, "side {side}");
        }
    }

    #[test]
    fn listed_annihilators_of_z_verify() {
        let u = VarUniverse::xvars(6);
        let listed = [
            "x0*x1*x4+x0*x2*x3+x0*x2*x5+x0*x3*x4+x0*x3*x5+x0*x4*x5+x0+x1*x2*x3+x1*x2*x4+x1*x2*x5+x1*x2+x1*x3*x5+x1*x4*x5+x2*x3*x5+x2*x3+x4*x5+x4+x5+1",
            "x0*x1*x2*x3+x0*x1*x4+x0*x2*x3*x4+x0*x2*x3*x5+x0*x2*x4*x5+x0*x2*x5+x0*x3*x4*x5+x0*x3*x4+x0*x3*x5+x0+x1*x2*x3*x4+x1*x2*x4*x5+x1*x2*x4+x1*x2*x5+x1*x2+x4*x5+x4+x5+1",
            "x0*x1*x2*x3+x0*x1*x2*x4*x5+x0*x1*x4+x0*x2*x3*x5+x0*x2*x5+x0*x3*x4*x5+x0*x3*x4+x0*x3*x5+x0+x1*x2*x4*x5+x1*x2*x4+x1*x2*x5+x1*x2+x4*x5+x4+x5+1",
            "x0*x1*x2*x3*x4*x5",
        ];
        let z = BooleanFunc6::z();
        for (i, text) in listed.iter().enumerate() {
            let g = AnfPoly::parse(&u, text).unwrap();
            let gt = anf_to_truth_table(&g);
            // all four annihilate the f(x)=1 side: f*g = 0 pointwise
            for x in 0..64usize {
                assert!(!(z.bit(x) && gt[x]), "listed g #{i} fails at {x}");
            }
            assert!(!g.is_zero());
        }
    }

    #[test]
    fn constant_one_side_one_has_empty_basis() {
        let f = BooleanFunc6::from_table(u64::MAX);
        let rep = annihilator_space(f, 1, 6).unwrap();
        assert_eq!(rep.count, 0);
        assert!(rep.basis.is_empty());
    }

    #[test]
    fn annihilator_basis_products_vanish_via_poly_mul() {
        let u = VarUniverse::xvars(6);
        let z = BooleanFunc6::z();
        for side in [0u8, 1u8] {
            // f + 1 + side as a polynomial
            let table: Vec<bool> = (0..64).map(|x| z.bit(x) ^ true ^ (side == 1)).collect();
            let fpoly = crate::anf::truth_table_to_anf(&u, &table).unwrap();
            let rep = annihilator_space(z, side, 6).unwrap();
            for g in rep.basis.iter().take(8) {
                let prod = fpoly.mul(g).unwrap();
                assert!(anf_to_truth_table(&prod).iter().all(|&b| !b));
            }
        }
    }

    #[test]
    fn restricted_annihilator_identities_hold_for_z() {
        assert!(verify_z_restricted_annihilators().is_ok());
    }

    #[test]
    fn perturbed_z_breaks_restricted_identities() {
        // scan for a bit inside the annihilated region and flip it
        let z = BooleanFunc6::z();
        let mut found = false;
        for x in 0..64usize {
            let in_region =
                x & 1 == 0 && (x >> 2) & 1 == 0 && (x >> 4) & 1 == 0 && (x >> 5) & 1 == 0;
            if in_region && !z.bit(x) {
                let f = BooleanFunc6::from_table(z.table() ^ (1 << x));
                let witness = verify_restricted_annihilators_of(f).unwrap_err();
                assert!(!witness.x0_one_case);
                found = true;
                break;
            }
        }
        assert!(found, "no flippable bit found in the annihilated region");
    }

    #[test]
    fn hex_round_trip() {
        let z = BooleanFunc6::z();
        assert_eq!(BooleanFunc6::from_hex(&z.to_hex()).unwrap(), z);
        assert_eq!(z.to_hex(), "32C173F586D9E06A");
    }
}
