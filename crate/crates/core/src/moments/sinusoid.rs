//! Gaussian expectations of sinusoids via `E[e^{i aᵀx}]` and its moments.

use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

use super::gaussian::{std_monomial_moment, GaussianMoments};
use super::poly::{MultiIndex, Polynomial};
use crate::error::Result;
use crate::linalg::{dot, SymMatrix};

/// A complex number as an explicit `(re, im)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ComplexScalar {
    pub re: f64,
    pub im: f64,
}

impl ComplexScalar {
    pub const ONE: ComplexScalar = ComplexScalar { re: 1.0, im: 0.0 };
    pub const I: ComplexScalar = ComplexScalar { re: 0.0, im: 1.0 };

    pub fn new(re: f64, im: f64) -> Self {
        ComplexScalar { re, im }
    }

    /// `r e^{iθ}`
    pub fn from_polar(r: f64, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        ComplexScalar { re: r * c, im: r * s }
    }

    pub fn scale(self, s: f64) -> Self {
        ComplexScalar {
            re: self.re * s,
            im: self.im * s,
        }
    }

    /// `self^k`
    pub fn powu(self, k: u32) -> Self {
        (0..k).fold(Self::ONE, |acc, _| acc * self)
    }
}

impl Add for ComplexScalar {
    type Output = ComplexScalar;
    fn add(self, o: ComplexScalar) -> ComplexScalar {
        ComplexScalar::new(self.re + o.re, self.im + o.im)
    }
}

impl Mul for ComplexScalar {
    type Output = ComplexScalar;
    fn mul(self, o: ComplexScalar) -> ComplexScalar {
        ComplexScalar::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }
}

/// `amplitude · cos(frequencyᵀ x + phase)`; a sine is phase `−π/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinusoidTerm {
    #[serde(rename = "amp")]
    pub amplitude: f64,
    #[serde(rename = "freq")]
    pub frequency: Vec<f64>,
    pub phase: f64,
}

impl SinusoidTerm {
    pub fn new(amplitude: f64, frequency: Vec<f64>, phase: f64) -> Self {
        SinusoidTerm {
            amplitude,
            frequency,
            phase,
        }
    }

    pub fn dim(&self) -> usize {
        self.frequency.len()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.amplitude * (dot(&self.frequency, x) + self.phase).cos()
    }

    /// `−amplitude · sin(aᵀx + φ) · a`
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let s = -self.amplitude * (dot(&self.frequency, x) + self.phase).sin();
        self.frequency.iter().map(|a| s * a).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.amplitude.is_finite() && self.phase.is_finite() && self.frequency.iter().all(|v| v.is_finite())
    }
}

/// Polynomial weight multiplying an integrand: `1`, `x_j`, or `x_j x_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    One,
    Coord(usize),
    Pair(usize, usize),
}

impl Weight {
    pub fn evaluate(self, x: &[f64]) -> f64 {
        match self {
            Weight::One => 1.0,
            Weight::Coord(j) => x[j],
            Weight::Pair(j, k) => x[j] * x[k],
        }
    }

    /// `w(x) · p(x)`
    pub fn apply(self, p: &Polynomial) -> Polynomial {
        match self {
            Weight::One => p.clone(),
            Weight::Coord(j) => p.multiply_by_coordinate(j),
            Weight::Pair(j, k) => p.multiply_by_coordinate(j).multiply_by_coordinate(k),
        }
    }
}

fn check(a: &[f64], m: &[f64], c: &SymMatrix) {
    assert!(
        a.len() == m.len() && m.len() == c.dim(),
        "dimension mismatch: frequency {}, mean {}, covariance {}",
        a.len(),
        m.len(),
        c.dim()
    );
}

/// `E[e^{i aᵀx}] = e^{i aᵀm − aᵀCa/2}`
pub fn expect_complex_exponential(a: &[f64], m: &[f64], c: &SymMatrix) -> ComplexScalar {
    check(a, m, c);
    ComplexScalar::from_polar((-0.5 * c.quad_form(a)).exp(), dot(a, m))
}

/// `E[x_j e^{i aᵀx}] = (m_j + i C_jᵀa) · E[e^{i aᵀx}]`
pub fn expect_x_complex_exponential(a: &[f64], m: &[f64], c: &SymMatrix, j: usize) -> ComplexScalar {
    let base = expect_complex_exponential(a, m, c);
    ComplexScalar::new(m[j], dot(c.row(j), a)) * base
}

/// `E[x_j x_k e^{i aᵀx}] = (C_jk + m_j m_k − (C_jᵀa)(C_kᵀa) + i(m_j C_kᵀa + m_k C_jᵀa)) · E[e^{i aᵀx}]`
pub fn expect_xx_complex_exponential(
    a: &[f64],
    m: &[f64],
    c: &SymMatrix,
    j: usize,
    k: usize,
) -> ComplexScalar {
    let base = expect_complex_exponential(a, m, c);
    let cja = dot(c.row(j), a);
    let cka = dot(c.row(k), a);
    ComplexScalar::new(c.get(j, k) + m[j] * m[k] - cja * cka, m[j] * cka + m[k] * cja) * base
}

/// `E[w(x) e^{i aᵀx}]` for the three supported weights.
pub fn expect_weighted_complex_exponential(
    a: &[f64],
    m: &[f64],
    c: &SymMatrix,
    weight: Weight,
) -> ComplexScalar {
    match weight {
        Weight::One => expect_complex_exponential(a, m, c),
        Weight::Coord(j) => expect_x_complex_exponential(a, m, c, j),
        Weight::Pair(j, k) => expect_xx_complex_exponential(a, m, c, j, k),
    }
}

/// `E[w(x) · amplitude · cos(aᵀx + φ)] = amplitude · Re(e^{iφ} E[w(x) e^{i aᵀx}])`.
///
/// Needs no factorization of `C`, so a zero covariance gives the point-mass
/// value.
pub fn expect_sinusoid(term: &SinusoidTerm, m: &[f64], c: &SymMatrix, weight: Weight) -> f64 {
    let e = expect_weighted_complex_exponential(&term.frequency, m, c, weight);
    term.amplitude * (ComplexScalar::from_polar(1.0, term.phase) * e).re
}

/// `E_{w ~ N(0,1)}[w^p e^{i b w}] = e^{−b²/2} E[(w + i b)^p]`, expanded
/// binomially.
fn std_poly_exponential_1d(p: u32, b: f64) -> Result<ComplexScalar> {
    let ib = ComplexScalar::new(0.0, b);
    let mut acc = ComplexScalar::default();
    let mut binom = 1.0f64;
    for j in 0..=p {
        if j > 0 {
            binom = binom * (p - j + 1) as f64 / j as f64;
        }
        if j % 2 == 0 {
            let mom = std_monomial_moment(&MultiIndex::new(vec![j]))?;
            acc = acc + ib.powu(p - j).scale(binom * mom);
        }
    }
    Ok(acc.scale((-0.5 * b * b).exp()))
}

/// `E[q(x) e^{i aᵀx}]` for an arbitrary polynomial `q`, by the same affine
/// substitution used for polynomial expectations: with `x = m + L z`,
/// `e^{i aᵀx} = e^{i aᵀm} ∏_k e^{i (Lᵀa)_k z_k}`, and the `z_k` factor
/// independently.
pub fn expect_polynomial_times_exponential(
    q: &Polynomial,
    a: &[f64],
    g: &GaussianMoments,
) -> Result<ComplexScalar> {
    let substituted = g.substitution().apply(q)?;
    let b = g.factor().transpose_mul_vec(a);
    let mut sum = ComplexScalar::default();
    for (beta, coef) in substituted.terms() {
        let mut prod = ComplexScalar::ONE;
        for (k, &e) in beta.exponents().iter().enumerate() {
            prod = prod * std_poly_exponential_1d(e, b[k])?;
        }
        sum = sum + prod.scale(coef);
    }
    Ok(sum * ComplexScalar::from_polar(1.0, dot(a, g.mean())))
}

/// `E[q(x) · amplitude · cos(aᵀx + φ)]`
pub fn expect_polynomial_times_sinusoid(
    q: &Polynomial,
    term: &SinusoidTerm,
    g: &GaussianMoments,
) -> Result<f64> {
    let e = expect_polynomial_times_exponential(q, &term.frequency, g)?;
    Ok(term.amplitude * (ComplexScalar::from_polar(1.0, term.phase) * e).re)
}
