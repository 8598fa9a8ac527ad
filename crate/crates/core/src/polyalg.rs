//! Monomials, sparse polynomials and the binary exponent reduction `r`.
//!
//! Variables are indexed from 0. Exponent vectors are stored densely and
//! ordered graded-lexicographically: lower total degree first, then the vector
//! with the larger leading exponent first, so that `e_0` precedes `e_1`.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExponentVec(Vec<u32>);

impl ExponentVec {
    pub fn new(entries: Vec<u32>) -> Self {
        ExponentVec(entries)
    }

    pub fn zeros(n: usize) -> Self {
        ExponentVec(vec![0; n])
    }

    /// `k * e_i` in dimension `n`.
    pub fn unit(n: usize, i: usize, k: u32) -> Self {
        let mut v = vec![0; n];
        v[i] = k;
        ExponentVec(v)
    }

    /// 0/1 indicator of `set`.
    pub fn indicator(n: usize, set: &[usize]) -> Self {
        let mut v = vec![0; n];
        for &i in set {
            v[i] = 1;
        }
        ExponentVec(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u32 {
        self.0[i]
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// The monomial degree convention `max_i alpha_i`.
    pub fn max_degree(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > 0)
            .map(|(i, _)| i)
    }

    pub fn add(&self, other: &ExponentVec) -> ExponentVec {
        debug_assert_eq!(self.dim(), other.dim());
        ExponentVec(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, c: u32) -> ExponentVec {
        ExponentVec(self.0.iter().map(|a| a * c).collect())
    }

    /// `x^alpha`, with `0^0 = 1`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .filter(|(&a, _)| a > 0)
            .map(|(&a, &xi)| xi.powi(a as i32))
            .product()
    }
}

impl Ord for ExponentVec {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for ExponentVec {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Split of the variables into binary (`x_i` in {0,1}) and box (`x_i` in [0,1]) ones.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexPartition {
    is_bin: Vec<bool>,
}

impl IndexPartition {
    pub fn new(n: usize, bin: &[usize], box_: &[usize]) -> Result<Self> {
        let mut seen = vec![0u8; n];
        let mut is_bin = vec![false; n];
        for (&i, b) in bin.iter().map(|i| (i, true)).chain(box_.iter().map(|i| (i, false))) {
            if i >= n {
                return Err(Error::InvalidParameter(format!("variable index {i} out of range for n={n}")));
            }
            seen[i] += 1;
            is_bin[i] = b;
        }
        if let Some(i) = seen.iter().position(|&c| c != 1) {
            return Err(Error::InvalidParameter(format!(
                "variable {i} must be listed exactly once in bin or box"
            )));
        }
        Ok(IndexPartition { is_bin })
    }

    pub fn all_binary(n: usize) -> Self {
        IndexPartition { is_bin: vec![true; n] }
    }

    pub fn all_box(n: usize) -> Self {
        IndexPartition { is_bin: vec![false; n] }
    }

    pub fn n(&self) -> usize {
        self.is_bin.len()
    }

    pub fn is_binary(&self, i: usize) -> bool {
        self.is_bin[i]
    }

    pub fn bin(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.is_bin[i]).collect()
    }

    pub fn box_indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| !self.is_bin[i]).collect()
    }
}

/// Family of complementarity sets `C`, each meaning `prod_{j in C} x_j = 0`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplementarityFamily {
    sets: Vec<Vec<usize>>,
}

impl ComplementarityFamily {
    pub fn new(n: usize, sets: Vec<Vec<usize>>) -> Result<Self> {
        let mut out = Vec::with_capacity(sets.len());
        for mut c in sets {
            c.sort_unstable();
            c.dedup();
            if c.is_empty() {
                return Err(Error::InvalidParameter("empty complementarity set".into()));
            }
            if let Some(&i) = c.iter().find(|&&i| i >= n) {
                return Err(Error::InvalidParameter(format!(
                    "complementarity index {i} out of range for n={n}"
                )));
            }
            out.push(c);
        }
        Ok(ComplementarityFamily { sets: out })
    }

    pub fn empty() -> Self {
        ComplementarityFamily { sets: Vec::new() }
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// The 0/1 exponent vectors `gamma` with `x^gamma = 0` required.
    pub fn gamma(&self, n: usize) -> Vec<ExponentVec> {
        self.sets.iter().map(|c| ExponentVec::indicator(n, c)).collect()
    }

    /// True if `x` satisfies every complementarity constraint exactly.
    pub fn satisfied_by(&self, x: &[f64]) -> bool {
        self.sets.iter().all(|c| c.iter().any(|&i| x[i] == 0.0))
    }
}

/// Polynomial in minimal representation: unique exponent keys, no zero coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    n: usize,
    terms: BTreeMap<ExponentVec, f64>,
}

impl Polynomial {
    pub fn zero(n: usize) -> Self {
        Polynomial { n, terms: BTreeMap::new() }
    }

    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (ExponentVec, f64)>) -> Result<Self> {
        let mut p = Polynomial::zero(n);
        for (a, c) in terms {
            p.add_term(a, c)?;
        }
        Ok(p)
    }

    /// Adds `c x^alpha`, merging with an existing term and dropping exact zeros.
    pub fn add_term(&mut self, alpha: ExponentVec, c: f64) -> Result<()> {
        if alpha.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: alpha.dim() });
        }
        let entry = self.terms.entry(alpha);
        match entry {
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let v = *o.get() + c;
                if v == 0.0 {
                    o.remove();
                } else {
                    *o.get_mut() = v;
                }
            }
            std::collections::btree_map::Entry::Vacant(v) => {
                if c != 0.0 {
                    v.insert(c);
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&ExponentVec, f64)> {
        self.terms.iter().map(|(a, &c)| (a, c))
    }

    pub fn coef(&self, alpha: &ExponentVec) -> f64 {
        self.terms.get(alpha).copied().unwrap_or(0.0)
    }

    pub fn support(&self) -> impl Iterator<Item = &ExponentVec> {
        self.terms.keys()
    }

    /// Degree under the `max_i alpha_i` convention.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(ExponentVec::max_degree).max().unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(ExponentVec::total_degree).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(a, c)| c * a.eval(x)).sum()
    }
}

/// `r(alpha)`: binary exponents capped at one, box exponents unchanged.
pub fn reduce_exponent(alpha: &ExponentVec, part: &IndexPartition) -> Result<ExponentVec> {
    if alpha.dim() != part.n() {
        return Err(Error::DimensionMismatch { expected: part.n(), found: alpha.dim() });
    }
    Ok(reduce_unchecked(alpha, part))
}

pub(crate) fn reduce_unchecked(alpha: &ExponentVec, part: &IndexPartition) -> ExponentVec {
    ExponentVec(
        alpha
            .0
            .iter()
            .enumerate()
            .map(|(i, &a)| if part.is_bin[i] { a.min(1) } else { a })
            .collect(),
    )
}

/// Replaces every key by `r(alpha)`, summing coefficients that collapse together.
pub fn canonicalize_objective(f: &Polynomial, part: &IndexPartition) -> Result<Polynomial> {
    if f.n != part.n() {
        return Err(Error::DimensionMismatch { expected: part.n(), found: f.n });
    }
    let mut out = Polynomial::zero(f.n);
    for (a, c) in f.terms() {
        out.add_term(reduce_unchecked(a, part), c)?;
    }
    Ok(out)
}

/// `alpha >= gamma` componentwise.
pub fn dominates(alpha: &ExponentVec, gamma: &ExponentVec) -> bool {
    alpha.0.iter().zip(&gamma.0).all(|(a, g)| a >= g)
}

/// `r(c * alpha)`.
pub fn scaled_reduce(alpha: &ExponentVec, c: u32, part: &IndexPartition) -> Result<ExponentVec> {
    reduce_exponent(&alpha.scale(c), part)
}
