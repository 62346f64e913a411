//! The approximately Gaussian replicator flow and its quadratic theory.
//!
//! For `x ~ N(m, C)` the flow is
//!
//! ```text
//! ṁ_i  = m_i E[f] − E[x_i f]
//! Ċ_ij = (C_ij − m_i m_j) E[f] − E[x_i x_j f] + m_i E[x_j f] + m_j E[x_i f]
//! ```
//!
//! For `f(x) = xᵀAx + bᵀx + c` this collapses to `ṁ = −2CAm − Cb`,
//! `Ċ = −2CAC`, with solution `C(t) = (C₀⁻¹ + 2tA)⁻¹` and
//! `m(t) = C(t)(C₀⁻¹m₀ − tb)`.

use crate::error::{check_dim, AgrfError, Result};
use crate::linalg::{cholesky, dot, inverse_general, inverse_spd, solve, SymMatrix};
use crate::moments::{
    expect_polynomial_times_sinusoid, expect_sinusoid, GaussianMoments, Polynomial, SinusoidTerm, Weight,
};
use crate::objective::{Objective, QuadraticForm};

/// Mean and positive definite covariance of the current Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    mean: Vec<f64>,
    cov: SymMatrix,
}

impl GaussianState {
    pub fn new(mean: Vec<f64>, cov: SymMatrix) -> Result<Self> {
        check_dim(cov.dim(), mean.len())?;
        if mean.iter().any(|v| !v.is_finite()) || !cov.is_finite() {
            return Err(AgrfError::InvalidArgument("state has non-finite entries".into()));
        }
        cholesky(&cov)?;
        Ok(GaussianState { mean, cov })
    }

    /// `N(mean, s·I)`
    pub fn isotropic(mean: Vec<f64>, s: f64) -> Result<Self> {
        let n = mean.len();
        Self::new(mean, SymMatrix::scaled_identity(n, s))
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
}

/// Time derivative `(ṁ, Ċ)` of a state.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowDerivative {
    pub d_mean: Vec<f64>,
    pub d_cov: SymMatrix,
}

/// Full covariance dynamics, or the restriction that keeps a diagonal
/// covariance diagonal by zeroing off-diagonal derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlowMode {
    #[default]
    Full,
    Diagonal,
}

fn check_state(obj: &Objective, state: &GaussianState, mode: FlowMode) -> Result<()> {
    check_dim(obj.dim(), state.dim())?;
    if mode == FlowMode::Diagonal && !state.cov.is_diagonal() {
        return Err(AgrfError::NotDiagonal);
    }
    Ok(())
}

/// `E[w(x) f(x)]` for the polynomial part plus every sinusoid.
pub fn expect_objective(obj: &Objective, g: &GaussianMoments, weight: Weight) -> Result<f64> {
    let poly = g.expect(&weight.apply(obj.poly()))?;
    let sin: f64 = obj
        .sinusoids()
        .iter()
        .map(|s| expect_sinusoid(s, g.mean(), g.cov(), weight))
        .sum();
    Ok(poly + sin)
}

/// `E_{x ~ N(m, C)}[f(x)]`
pub fn expected_value(obj: &Objective, state: &GaussianState) -> Result<f64> {
    check_dim(obj.dim(), state.dim())?;
    let g = GaussianMoments::new(&state.mean, &state.cov)?;
    expect_objective(obj, &g, Weight::One)
}

/// The flow's vector field. Quadratic objectives take the closed-form path.
pub fn agrf_rhs(obj: &Objective, state: &GaussianState, mode: FlowMode) -> Result<FlowDerivative> {
    check_state(obj, state, mode)?;
    match obj.as_quadratic() {
        Some(qf) => {
            let mut d = quadratic_rhs(&qf, state)?;
            if mode == FlowMode::Diagonal {
                d.d_cov = SymMatrix::from_diagonal(&d.d_cov.diagonal());
            }
            Ok(d)
        }
        None => agrf_rhs_symbolic(obj, state, mode),
    }
}

/// The flow's vector field evaluated from Gaussian expectations, with no
/// quadratic shortcut.
pub fn agrf_rhs_symbolic(obj: &Objective, state: &GaussianState, mode: FlowMode) -> Result<FlowDerivative> {
    check_state(obj, state, mode)?;
    let n = state.dim();
    let m = &state.mean;
    let c = &state.cov;
    let g = GaussianMoments::new(m, c)?;

    let ef = expect_objective(obj, &g, Weight::One)?;
    let exf = (0..n)
        .map(|i| expect_objective(obj, &g, Weight::Coord(i)))
        .collect::<Result<Vec<f64>>>()?;

    let d_mean = (0..n).map(|i| m[i] * ef - exf[i]).collect();

    let mut d_cov = SymMatrix::zeros(n);
    for i in 0..n {
        let upper = match mode {
            FlowMode::Full => n,
            FlowMode::Diagonal => i + 1,
        };
        for j in i..upper {
            let exxf = expect_objective(obj, &g, Weight::Pair(i, j))?;
            let v = (c.get(i, j) - m[i] * m[j]) * ef - exxf + m[i] * exf[j] + m[j] * exf[i];
            d_cov.set(i, j, v);
        }
    }
    Ok(FlowDerivative { d_mean, d_cov })
}

/// `ṁ = −2CAm − Cb`, `Ċ = −2CAC`
pub fn quadratic_rhs(qf: &QuadraticForm, state: &GaussianState) -> Result<FlowDerivative> {
    check_dim(qf.dim(), state.dim())?;
    let c = &state.cov;
    let d_mean = c.mat_vec(&qf.gradient(&state.mean)).into_iter().map(|v| -v).collect();
    let d_cov = c.sandwich(&qf.a).scale(-2.0);
    Ok(FlowDerivative { d_mean, d_cov })
}

/// `C(t) = (C₀⁻¹ + 2tA)⁻¹`
pub fn analytic_cov(qf: &QuadraticForm, c0: &SymMatrix, t: f64) -> Result<SymMatrix> {
    check_dim(qf.dim(), c0.dim())?;
    let c0_inv = inverse_spd(c0)?;
    if t == 0.0 {
        return Ok(c0.clone());
    }
    let precision = c0_inv.add(&qf.a.scale(2.0 * t));
    inverse_general(&precision).ok_or(AgrfError::SingularAtTime { t })
}

/// `m(t) = C(t)(C₀⁻¹m₀ − tb)`
pub fn analytic_mean(qf: &QuadraticForm, m0: &[f64], c0: &SymMatrix, t: f64) -> Result<Vec<f64>> {
    check_dim(qf.dim(), m0.len())?;
    let ct = analytic_cov(qf, c0, t)?;
    if t == 0.0 {
        return Ok(m0.to_vec());
    }
    let c0_inv_m0 = solve(c0, m0)?;
    let rhs: Vec<f64> = c0_inv_m0.iter().zip(&qf.b).map(|(u, b)| u - t * b).collect();
    Ok(ct.mat_vec(&rhs))
}

/// `lim m(t) = −½ A⁻¹ b` for positive definite `A`.
pub fn quadratic_limit(qf: &QuadraticForm) -> Result<Vec<f64>> {
    let neg_b: Vec<f64> = qf.b.iter().map(|v| -v).collect();
    solve(&qf.a.scale(2.0), &neg_b)
}

/// The matrix `(C₀⁻¹ + t∇²f)⁻¹` that turns the mean dynamics into the
/// preconditioned gradient flow `ṁ = −P(t)∇f(m)`. Equal to `C(t)` since
/// `∇²f = 2A`; it interpolates from `C₀` at small `t` to the Newton scaling
/// `(2tA)⁻¹` at large `t`.
pub fn newton_preconditioner(qf: &QuadraticForm, c0: &SymMatrix, t: f64) -> Result<SymMatrix> {
    let hessian = qf.a.scale(2.0);
    check_dim(hessian.dim(), c0.dim())?;
    let c0_inv = inverse_spd(c0)?;
    if t == 0.0 {
        return Ok(c0.clone());
    }
    inverse_general(&c0_inv.add(&hessian.scale(t))).ok_or(AgrfError::SingularAtTime { t })
}

/// `∇f(m)ᵀ ṁ`, the instantaneous rate of change of `f(m(t))`.
pub fn descent_rate(obj: &Objective, state: &GaussianState) -> Result<f64> {
    let d = agrf_rhs(obj, state, FlowMode::Full)?;
    Ok(dot(&obj.gradient(&state.mean), &d.d_mean))
}

/// `f(m) E[f] − E[f²]`; negative values mean the small-covariance descent
/// condition holds. The sign reading assumes `f > 0`.
pub fn approx_descent_functional(obj: &Objective, state: &GaussianState) -> Result<f64> {
    check_dim(obj.dim(), state.dim())?;
    let g = GaussianMoments::new(&state.mean, &state.cov)?;
    let ef = expect_objective(obj, &g, Weight::One)?;
    Ok(obj.evaluate(&state.mean) * ef - expect_square(obj, &g)?)
}

/// `E[f²]` with `f = p + Σ s`: `p²` by polynomial multiplication, `p·s`
/// by the polynomial-times-exponential route, and `s·t` by product-to-sum.
fn expect_square(obj: &Objective, g: &GaussianMoments) -> Result<f64> {
    let p: &Polynomial = obj.poly();
    let mut total = g.expect(&p.mul(p)?)?;
    let sins = obj.sinusoids();
    for s in sins {
        total += 2.0 * expect_polynomial_times_sinusoid(p, s, g)?;
    }
    for s in sins {
        for t in sins {
            for (sign, phase) in [(1.0, s.phase + t.phase), (-1.0, s.phase - t.phase)] {
                let freq = s.frequency.iter().zip(&t.frequency).map(|(a, b)| a + sign * b).collect();
                let term = SinusoidTerm::new(0.5 * s.amplitude * t.amplitude, freq, phase);
                total += expect_sinusoid(&term, g.mean(), g.cov(), Weight::One);
            }
        }
    }
    Ok(total)
}
