//! Sparse multivariate polynomials over `f64`.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::error::{check_dim, AgrfError, Result};

/// Default cap on the number of terms a product or substitution may create.
pub const MAX_TERMS: usize = 1_000_000;

/// Exponent vector of a monomial `x^α = x₁^α₁ ⋯ xₙ^αₙ`.
///
/// Ordered graded-lexicographically: total degree first, then exponents
/// compared left to right.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zeros(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// `e_i`
    pub fn unit(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        MultiIndex(e)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `x^α` at a point.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .filter(|(&e, _)| e > 0)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product()
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A polynomial in `n` variables stored as a sparse map from exponent
/// vectors to nonzero coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    n: usize,
    terms: BTreeMap<MultiIndex, f64>,
}

impl Polynomial {
    pub fn zero(n: usize) -> Self {
        Polynomial {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        let mut p = Self::zero(n);
        p.add_term(MultiIndex::zeros(n), c);
        p
    }

    /// The coordinate polynomial `x_i`.
    pub fn variable(n: usize, i: usize) -> Self {
        let mut p = Self::zero(n);
        p.add_term(MultiIndex::unit(n, i), 1.0);
        p
    }

    /// Collects `(coefficient, exponents)` pairs, merging repeats.
    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, Vec<u32>)>,
    {
        let mut p = Self::zero(n);
        for (c, e) in terms {
            check_dim(n, e.len())?;
            p.add_term(MultiIndex(e), c);
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Adds `c x^α`, dropping the entry if the coefficient cancels to zero.
    pub fn add_term(&mut self, alpha: MultiIndex, c: f64) {
        debug_assert_eq!(alpha.len(), self.n);
        if c == 0.0 {
            return;
        }
        match self.terms.entry(alpha) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = *o.get() + c;
                if s == 0.0 {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    /// Terms in graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.terms.iter().map(|(k, &v)| (k, v))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(MultiIndex::degree).max().unwrap_or(0)
    }

    pub fn coefficient(&self, exponents: &[u32]) -> f64 {
        self.terms
            .get(&MultiIndex(exponents.to_vec()))
            .copied()
            .unwrap_or(0.0)
    }

    /// Largest exponent of each variable.
    pub fn max_exponents(&self) -> Vec<u32> {
        let mut out = vec![0; self.n];
        for alpha in self.terms.keys() {
            for (o, &e) in out.iter_mut().zip(alpha.exponents()) {
                *o = (*o).max(e);
            }
        }
        out
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.terms().map(|(alpha, c)| c * alpha.evaluate(x)).sum()
    }

    /// `∂p/∂x_i`
    pub fn partial_derivative(&self, i: usize) -> Polynomial {
        let mut out = Self::zero(self.n);
        for (alpha, c) in self.terms() {
            let e = alpha.0[i];
            if e == 0 {
                continue;
            }
            let mut beta = alpha.clone();
            beta.0[i] -= 1;
            out.add_term(beta, c * e as f64);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut out = Self::zero(self.n);
        if s != 0.0 {
            for (alpha, c) in self.terms() {
                out.add_term(alpha.clone(), c * s);
            }
        }
        out
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.n, other.n, "dimension mismatch in Polynomial::add");
        let mut out = self.clone();
        for (alpha, c) in other.terms() {
            out.add_term(alpha.clone(), c);
        }
        out
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.scale(-1.0))
    }

    /// Product, failing with `Overflow` past `max_terms` terms.
    pub fn mul_capped(&self, other: &Polynomial, max_terms: usize) -> Result<Polynomial> {
        assert_eq!(self.n, other.n, "dimension mismatch in Polynomial::mul");
        let mut out = Self::zero(self.n);
        for (a, ca) in self.terms() {
            for (b, cb) in other.terms() {
                out.add_term(a.add(b), ca * cb);
            }
            if out.num_terms() > max_terms {
                return Err(AgrfError::Overflow(format!(
                    "polynomial product exceeds {max_terms} terms"
                )));
            }
        }
        Ok(out)
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial> {
        self.mul_capped(other, MAX_TERMS)
    }

    /// `x_i · p(x)`
    pub fn multiply_by_coordinate(&self, i: usize) -> Polynomial {
        assert!(i < self.n, "coordinate {i} out of range for n = {}", self.n);
        let mut out = Self::zero(self.n);
        for (alpha, c) in self.terms() {
            let mut beta = alpha.clone();
            beta.0[i] += 1;
            out.terms.insert(beta, c);
        }
        out
    }
}
