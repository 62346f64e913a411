//! Closed-form Gaussian expectations of polynomials.
//!
//! Under `x ~ N(m, C)` with `C = L Lᵀ` we write `x = m + L z`, `z ~ N(0, I)`.
//! Substituting into a polynomial gives a polynomial in `z`, whose
//! expectation is a weighted sum of standard monomial moments
//! `E[z^β] = ∏ (β_k − 1)!!` (zero if any `β_k` is odd).

use std::cell::RefCell;
use std::collections::HashMap;

use super::poly::{MultiIndex, Polynomial, MAX_TERMS};
use crate::error::{check_dim, AgrfError, Result};
use crate::linalg::{cholesky_jittered, LowerTriangular, SymMatrix};

/// Largest total degree accepted by [`std_monomial_moment`].
pub const MAX_MOMENT_DEGREE: u32 = 40;

/// `(k − 1)!!` for even `k`, exact in `u128` up to `k = 40`.
fn odd_double_factorial(k: u32) -> u128 {
    debug_assert!(k.is_multiple_of(2));
    (1..k).step_by(2).map(u128::from).product()
}

/// `E_{z ~ N(0, I)}[z^α]`.
pub fn std_monomial_moment(alpha: &MultiIndex) -> Result<f64> {
    let degree = alpha.degree();
    if degree > MAX_MOMENT_DEGREE {
        return Err(AgrfError::Overflow(format!(
            "monomial degree {degree} exceeds cap {MAX_MOMENT_DEGREE}"
        )));
    }
    if alpha.exponents().iter().any(|e| e % 2 == 1) {
        return Ok(0.0);
    }
    // the product of per-coordinate factors is bounded by (degree − 1)!!
    let exact: u128 = alpha
        .exponents()
        .iter()
        .map(|&e| odd_double_factorial(e))
        .product();
    Ok(exact as f64)
}

/// Expands polynomials under `x = offset + L z`.
///
/// Powers of the linear forms `offset_i + (L z)_i` are cached, so one
/// instance can be reused for several polynomials at the same state.
#[derive(Debug)]
pub struct AffineSubstitution {
    offset: Vec<f64>,
    factor: LowerTriangular,
    max_terms: usize,
    powers: RefCell<Vec<Vec<Polynomial>>>,
}

impl AffineSubstitution {
    pub fn new(offset: &[f64], factor: LowerTriangular) -> Result<Self> {
        check_dim(factor.dim(), offset.len())?;
        let n = offset.len();
        let powers = (0..n)
            .map(|i| {
                let mut lin = Polynomial::constant(n, offset[i]);
                for (k, &l) in factor.row(i).iter().enumerate() {
                    lin.add_term(MultiIndex::unit(n, k), l);
                }
                vec![Polynomial::constant(n, 1.0), lin]
            })
            .collect();
        Ok(AffineSubstitution {
            offset: offset.to_vec(),
            factor,
            max_terms: MAX_TERMS,
            powers: RefCell::new(powers),
        })
    }

    pub fn with_max_terms(mut self, max_terms: usize) -> Self {
        self.max_terms = max_terms;
        self
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn factor(&self) -> &LowerTriangular {
        &self.factor
    }

    fn power(&self, i: usize, e: u32) -> Result<Polynomial> {
        let mut powers = self.powers.borrow_mut();
        let row = &mut powers[i];
        while row.len() <= e as usize {
            let next = row[row.len() - 1].mul_capped(&row[1], self.max_terms)?;
            row.push(next);
        }
        Ok(row[e as usize].clone())
    }

    /// `(offset + L z)^α` as a polynomial in `z`.
    pub fn monomial(&self, alpha: &MultiIndex) -> Result<Polynomial> {
        let n = self.dim();
        let mut acc = Polynomial::constant(n, 1.0);
        for (i, &e) in alpha.exponents().iter().enumerate() {
            if e > 0 {
                acc = acc.mul_capped(&self.power(i, e)?, self.max_terms)?;
            }
        }
        Ok(acc)
    }

    /// `q(z) = p(offset + L z)`, fully expanded.
    pub fn apply(&self, p: &Polynomial) -> Result<Polynomial> {
        check_dim(self.dim(), p.dim())?;
        let mut out = Polynomial::zero(self.dim());
        for (alpha, c) in p.terms() {
            for (beta, d) in self.monomial(alpha)?.terms() {
                out.add_term(beta.clone(), c * d);
            }
            if out.num_terms() > self.max_terms {
                return Err(AgrfError::Overflow(format!(
                    "substituted polynomial exceeds {} terms",
                    self.max_terms
                )));
            }
        }
        Ok(out)
    }
}

/// `p(m + L z)` expanded in `z`.
pub fn substitute_affine(p: &Polynomial, m: &[f64], l: &LowerTriangular) -> Result<Polynomial> {
    AffineSubstitution::new(m, l.clone())?.apply(p)
}

/// `E_{z ~ N(0, I)}[q(z)]`
pub fn expect_standard(q: &Polynomial) -> Result<f64> {
    let mut sum = 0.0;
    for (beta, c) in q.terms() {
        sum += c * std_monomial_moment(beta)?;
    }
    Ok(sum)
}

/// Gaussian `N(m, C)` prepared for repeated expectation queries.
///
/// Caches the Cholesky factor and every raw moment `E[x^α]` computed so
/// far, so `E[f]`, `E[x_i f]` and `E[x_i x_j f]` at one state share work.
/// Not meant to be shared across threads; build one per state.
#[derive(Debug)]
pub struct GaussianMoments {
    mean: Vec<f64>,
    cov: SymMatrix,
    subst: AffineSubstitution,
    raw_moments: RefCell<HashMap<MultiIndex, f64>>,
}

impl GaussianMoments {
    /// Factors `cov`, retrying once with a tiny diagonal jitter.
    pub fn new(mean: &[f64], cov: &SymMatrix) -> Result<Self> {
        check_dim(cov.dim(), mean.len())?;
        let factor = cholesky_jittered(cov)?;
        Ok(GaussianMoments {
            mean: mean.to_vec(),
            cov: cov.clone(),
            subst: AffineSubstitution::new(mean, factor)?,
            raw_moments: RefCell::new(HashMap::new()),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &SymMatrix {
        &self.cov
    }

    pub fn factor(&self) -> &LowerTriangular {
        self.subst.factor()
    }

    pub fn substitution(&self) -> &AffineSubstitution {
        &self.subst
    }

    /// `E[x^α]`
    pub fn raw_moment(&self, alpha: &MultiIndex) -> Result<f64> {
        if let Some(&v) = self.raw_moments.borrow().get(alpha) {
            return Ok(v);
        }
        let v = expect_standard(&self.subst.monomial(alpha)?)?;
        self.raw_moments.borrow_mut().insert(alpha.clone(), v);
        Ok(v)
    }

    /// `E[p(x)]`
    pub fn expect(&self, p: &Polynomial) -> Result<f64> {
        check_dim(self.dim(), p.dim())?;
        let mut sum = 0.0;
        for (alpha, c) in p.terms() {
            sum += c * self.raw_moment(alpha)?;
        }
        Ok(sum)
    }
}

/// `E_{x ~ N(m, C)}[p(x)]`.
pub fn expect_polynomial(p: &Polynomial, m: &[f64], c: &SymMatrix) -> Result<f64> {
    let g = GaussianMoments::new(m, c)?;
    expect_standard(&g.substitution().apply(p)?)
}
