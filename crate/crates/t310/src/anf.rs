//! Multivariate polynomial arithmetic over GF(2) in algebraic normal form.
//!
//! A polynomial is a set of monomials combined by XOR; a monomial is a subset
//! of the declared variables (the empty subset is the constant 1). Variables
//! are idempotent (`x * x = x`), so products reduce to set unions with GF(2)
//! coefficient folding.
//!
//! Two representations are used in the crate: the sparse term-set
//! [`AnfPoly`] here (fine up to the 22-variable window work), and the dense
//! coefficient vectors in [`crate::dense`] used for kernel searches on up to
//! 13 variables.

use crate::{Error, Result};
use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

/// Maximum number of variables a universe may declare.
pub const MAX_ARITY: usize = 22;

/// An ordered set of variable names; variable `i` corresponds to bit `i` of a
/// monomial mask (lexicographic by subset mask).
#[derive(Debug, PartialEq, Eq)]
pub struct VarUniverse {
    names: Vec<String>,
}

impl VarUniverse {
    pub fn new<S: Into<String>>(names: Vec<S>) -> Result<Arc<Self>> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() > MAX_ARITY {
            return Err(Error::OutOfRange(format!(
                "universe arity {} exceeds {}",
                names.len(),
                MAX_ARITY
            )));
        }
        let mut seen = BTreeSet::new();
        for n in &names {
            if n.is_empty() || n == "1" {
                return Err(Error::Parse(format!("invalid variable name `{n}`")));
            }
            if !seen.insert(n.clone()) {
                return Err(Error::Parse(format!("duplicate variable name `{n}`")));
            }
        }
        Ok(Arc::new(VarUniverse { names }))
    }

    /// The `x0..x{n-1}` universe used for Boolean-function work.
    pub fn xvars(n: usize) -> Arc<Self> {
        Self::new((0..n).map(|i| format!("x{i}")).collect()).unwrap()
    }

    pub fn arity(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Longest variable name matching a prefix of `s`, for the term parser.
    fn match_prefix(&self, s: &str) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize)> = None;
        for (i, n) in self.names.iter().enumerate() {
            if s.starts_with(n.as_str()) {
                match best {
                    Some((_, len)) if len >= n.len() => {}
                    _ => best = Some((i, n.len())),
                }
            }
        }
        best
    }
}

/// A monomial: subset of a universe's variables, stored as a bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(pub u32);

impl Monomial {
    pub const ONE: Monomial = Monomial(0);

    pub fn var(i: usize) -> Self {
        Monomial(1 << i)
    }

    pub fn degree(self) -> u32 {
        self.0.count_ones()
    }

    pub fn contains(self, var: usize) -> bool {
        (self.0 >> var) & 1 == 1
    }

    pub fn union(self, other: Monomial) -> Monomial {
        Monomial(self.0 | other.0)
    }

    pub fn vars(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |i| (self.0 >> i) & 1 == 1)
    }
}

/// GF(2) polynomial: XOR-sum of monomials over a shared universe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnfPoly {
    universe: Arc<VarUniverse>,
    terms: BTreeSet<Monomial>,
}

impl AnfPoly {
    pub fn zero(universe: Arc<VarUniverse>) -> Self {
        AnfPoly { universe, terms: BTreeSet::new() }
    }

    pub fn one(universe: Arc<VarUniverse>) -> Self {
        let mut p = Self::zero(universe);
        p.terms.insert(Monomial::ONE);
        p
    }

    pub fn var(universe: Arc<VarUniverse>, i: usize) -> Self {
        assert!(i < universe.arity());
        let mut p = Self::zero(universe);
        p.terms.insert(Monomial::var(i));
        p
    }

    pub fn from_terms<I: IntoIterator<Item = Monomial>>(
        universe: Arc<VarUniverse>,
        terms: I,
    ) -> Result<Self> {
        let mut p = Self::zero(universe);
        for m in terms {
            if p.universe.arity() < 32 && m.0 >> p.universe.arity() != 0 {
                return Err(Error::OutOfRange(format!(
                    "monomial mask {:#x} uses variables outside the universe",
                    m.0
                )));
            }
            p.toggle(m);
        }
        Ok(p)
    }

    pub fn universe(&self) -> &Arc<VarUniverse> {
        &self.universe
    }

    pub fn terms(&self) -> impl Iterator<Item = Monomial> + '_ {
        self.terms.iter().copied()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|m| m.degree()).max().unwrap_or(0)
    }

    fn toggle(&mut self, m: Monomial) {
        if !self.terms.remove(&m) {
            self.terms.insert(m);
        }
    }

    fn check_same_universe(&self, other: &AnfPoly) -> Result<()> {
        if !Arc::ptr_eq(&self.universe, &other.universe) && self.universe != other.universe {
            return Err(Error::UniverseMismatch(format!(
                "[{}] vs [{}]",
                self.universe.names.join(","),
                other.universe.names.join(",")
            )));
        }
        Ok(())
    }

    /// XOR of term sets (symmetric difference).
    pub fn add(&self, other: &AnfPoly) -> Result<AnfPoly> {
        self.check_same_universe(other)?;
        let mut out = self.clone();
        for &m in &other.terms {
            out.toggle(m);
        }
        Ok(out)
    }

    /// Distributed product; per-term product is variable-set union, reduced
    /// modulo `x^2 = x` with GF(2) coefficient folding.
    pub fn mul(&self, other: &AnfPoly) -> Result<AnfPoly> {
        self.check_same_universe(other)?;
        let mut out = Self::zero(self.universe.clone());
        for &a in &self.terms {
            for &b in &other.terms {
                out.toggle(a.union(b));
            }
        }
        Ok(out)
    }

    /// Evaluate at an assignment. Every variable occurring in the polynomial
    /// must be assigned; untouched variables may be `None`.
    pub fn eval(&self, assignment: &[Option<bool>]) -> Result<bool> {
        let mut acc = false;
        for &m in &self.terms {
            let mut t = true;
            for v in m.vars() {
                match assignment.get(v).copied().flatten() {
                    Some(b) => t &= b,
                    None => {
                        return Err(Error::UnassignedVariable(
                            self.universe.name(v).to_string(),
                        ))
                    }
                }
            }
            acc ^= t;
        }
        Ok(acc)
    }

    /// Substitute variables by polynomial images over the same universe.
    /// Unbound variables pass through unchanged.
    pub fn substitute(&self, bindings: &[Option<&AnfPoly>]) -> Result<AnfPoly> {
        for b in bindings.iter().flatten() {
            self.check_same_universe(b)?;
        }
        let mut out = Self::zero(self.universe.clone());
        for &m in &self.terms {
            let mut term = Self::one(self.universe.clone());
            for v in m.vars() {
                let image = match bindings.get(v).copied().flatten() {
                    Some(p) => p.clone(),
                    None => Self::var(self.universe.clone(), v),
                };
                term = term.mul(&image)?;
            }
            out = out.add(&term)?;
        }
        Ok(out)
    }

    /// Parse the text format: terms joined by `+` or `⊕`, products written by
    /// juxtaposition or `*`, `1` for the constant term.
    pub fn parse(universe: &Arc<VarUniverse>, text: &str) -> Result<AnfPoly> {
        let mut p = Self::zero(universe.clone());
        let cleaned: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if cleaned.is_empty() || cleaned == "0" {
            return Ok(p);
        }
        for term in cleaned.split(['+', '⊕']) {
            if term.is_empty() {
                return Err(Error::Parse(format!("empty term in `{text}`")));
            }
            let mut mask = Monomial::ONE;
            let mut rest = term;
            while !rest.is_empty() {
                if let Some(r) = rest.strip_prefix('*') {
                    rest = r;
                    continue;
                }
                if let Some(r) = rest.strip_prefix('1') {
                    // constant factor: only meaningful alone or with `*`
                    rest = r;
                    continue;
                }
                match universe.match_prefix(rest) {
                    Some((i, len)) => {
                        mask = mask.union(Monomial::var(i));
                        rest = &rest[len..];
                    }
                    None => {
                        return Err(Error::UnknownVariable(format!(
                            "`{rest}` in term `{term}`"
                        )))
                    }
                }
            }
            p.toggle(mask);
        }
        Ok(p)
    }
}

impl fmt::Display for AnfPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for m in &self.terms {
            if !first {
                write!(f, "+")?;
            }
            first = false;
            if m.0 == 0 {
                write!(f, "1")?;
            } else {
                let names: Vec<&str> = m.vars().map(|v| self.universe.name(v)).collect();
                let sep = if names.iter().any(|n| n.len() > 1) { "*" } else { "" };
                write!(f, "{}", names.join(sep))?;
            }
        }
        Ok(())
    }
}

/// Interpolate the ANF of a truth table by the Moebius transform.
/// `table[i]` is the function value at the point whose bit `k` is variable
/// `k`'s value. The result round-trips through [`anf_to_truth_table`].
pub fn truth_table_to_anf(universe: &Arc<VarUniverse>, table: &[bool]) -> Result<AnfPoly> {
    let n = universe.arity();
    if table.len() != 1 << n {
        return Err(Error::BadTableLength(table.len()));
    }
    let mut coeffs: Vec<bool> = table.to_vec();
    for i in 0..n {
        let step = 1usize << i;
        for block in (0..coeffs.len()).step_by(step * 2) {
            for k in 0..step {
                coeffs[block + step + k] ^= coeffs[block + k];
            }
        }
    }
    let terms = coeffs
        .iter()
        .enumerate()
        .filter(|(_, &c)| c)
        .map(|(m, _)| Monomial(m as u32));
    AnfPoly::from_terms(universe.clone(), terms)
}

/// Evaluate a polynomial on every point of its universe (the inverse of
/// [`truth_table_to_anf`]).
pub fn anf_to_truth_table(p: &AnfPoly) -> Vec<bool> {
    let n = p.universe().arity();
    let mut coeffs = vec![false; 1 << n];
    for m in p.terms() {
        coeffs[m.0 as usize] = true;
    }
    for i in 0..n {
        let step = 1usize << i;
        for block in (0..coeffs.len()).step_by(step * 2) {
            for k in 0..step {
                coeffs[block + step + k] ^= coeffs[block + k];
            }
        }
    }
    coeffs
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn abc() -> Arc<VarUniverse> {
        VarUniverse::new(vec!["a", "b", "c"]).unwrap()
    }

    #[test]
    fn add_cancels() {
        let u = abc();
        let ab = AnfPoly::parse(&u, "a+b").unwrap();
        let bc = AnfPoly::parse(&u, "b+c").unwrap();
        assert_eq!(ab.add(&bc).unwrap(), AnfPoly::parse(&u, "a+c").unwrap());
        assert!(ab.add(&ab).unwrap().is_zero());
        let zero = AnfPoly::zero(u.clone());
        assert_eq!(ab.add(&zero).unwrap(), ab);
    }

    #[test]
    fn mul_is_idempotent_on_variables() {
        let u = abc();
        let a = AnfPoly::var(u.clone(), 0);
        assert_eq!(a.mul(&a).unwrap(), a);
        let a1 = AnfPoly::parse(&u, "a+1").unwrap();
        assert_eq!(a1.mul(&a1).unwrap(), a1);
    }

    #[test]
    fn substitute_examples() {
        let u = abc();
        // a+b with a -> b cancels
        let p = AnfPoly::parse(&u, "a+b").unwrap();
        let b = AnfPoly::var(u.clone(), 1);
        let img = p.substitute(&[Some(&b), None, None]).unwrap();
        assert!(img.is_zero());
        // ab with a -> c+1 distributes to bc+b
        let p = AnfPoly::parse(&u, "ab").unwrap();
        let c1 = AnfPoly::parse(&u, "c+1").unwrap();
        let img = p.substitute(&[Some(&c1), None, None]).unwrap();
        assert_eq!(img, AnfPoly::parse(&u, "bc+b").unwrap());
    }

    #[test]
    fn eval_requires_assignment() {
        let u = abc();
        let p = AnfPoly::parse(&u, "ab+c").unwrap();
        assert!(matches!(
            p.eval(&[Some(true), None, Some(false)]),
            Err(Error::UnassignedVariable(_))
        ));
        assert!(!p.eval(&[Some(true), Some(false), Some(false)]).unwrap());
        assert!(p.eval(&[Some(true), Some(true), Some(false)]).unwrap());
    }

    #[test]
    fn universe_mismatch_is_detected() {
        let u = abc();
        let v = VarUniverse::new(vec!["a", "b", "d"]).unwrap();
        let p = AnfPoly::var(u, 0);
        let q = AnfPoly::var(v, 0);
        assert!(matches!(p.add(&q), Err(Error::UniverseMismatch(_))));
    }

    #[test]
    fn truth_table_round_trip_exhaustive_4_vars() {
        let u = VarUniverse::xvars(4);
        for f in 0u32..(1 << 16) {
            let table: Vec<bool> = (0..16).map(|i| (f >> i) & 1 == 1).collect();
            let p = truth_table_to_anf(&u, &table).unwrap();
            assert_eq!(anf_to_truth_table(&p), table);
        }
    }

    #[test]
    fn truth_table_round_trip_random_6_vars() {
        let u = VarUniverse::xvars(6);
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let table: Vec<bool> = (0..64).map(|_| rng.gen()).collect();
            let p = truth_table_to_anf(&u, &table).unwrap();
            assert_eq!(anf_to_truth_table(&p), table);
        }
    }

    #[test]
    fn constant_and_single_variable_tables() {
        let u = VarUniverse::xvars(6);
        let zero = truth_table_to_anf(&u, &[false; 64]).unwrap();
        assert!(zero.is_zero());
        let x0: Vec<bool> = (0..64).map(|i| i & 1 == 1).collect();
        let p = truth_table_to_anf(&u, &x0).unwrap();
        assert_eq!(p, AnfPoly::var(u, 0));
    }

    #[test]
    fn mul_matches_pointwise_and() {
        let u = VarUniverse::xvars(5);
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..50 {
            let ta: Vec<bool> = (0..32).map(|_| rng.gen()).collect();
            let tb: Vec<bool> = (0..32).map(|_| rng.gen()).collect();
            let a = truth_table_to_anf(&u, &ta).unwrap();
            let b = truth_table_to_anf(&u, &tb).unwrap();
            let prod = a.mul(&b).unwrap();
            let tp = anf_to_truth_table(&prod);
            for i in 0..32 {
                assert_eq!(tp[i], ta[i] & tb[i]);
            }
        }
    }

    #[test]
    fn parse_and_display_round_trip() {
        let u = abc();
        for text in ["a+b+c", "ab+ac", "1+abc", "0"] {
            let p = AnfPoly::parse(&u, text).unwrap();
            let q = AnfPoly::parse(&u, &p.to_string()).unwrap();
            assert_eq!(p, q);
        }
        // multi-char names need separators on output but parse by longest match
        let xu = VarUniverse::xvars(6);
        let p = AnfPoly::parse(&xu, "x0x1 + x5").unwrap();
        let q = AnfPoly::parse(&xu, &p.to_string()).unwrap();
        assert_eq!(p, q);
        assert_eq!(p.term_count(), 2);
    }
}
