//! Exact Gaussian expectations of polynomials and sinusoids, plus a
//! seeded Monte Carlo estimator for cross-checking them.

mod gaussian;
mod monte_carlo;
mod poly;
mod sinusoid;

pub use gaussian::{
    expect_polynomial, expect_standard, std_monomial_moment, substitute_affine, AffineSubstitution,
    GaussianMoments, MAX_MOMENT_DEGREE,
};
pub use monte_carlo::mc_expectation;
pub use poly::{MultiIndex, Polynomial, MAX_TERMS};
pub use sinusoid::{
    expect_complex_exponential, expect_polynomial_times_exponential, expect_polynomial_times_sinusoid,
    expect_sinusoid, expect_weighted_complex_exponential, expect_x_complex_exponential,
    expect_xx_complex_exponential, ComplexScalar, SinusoidTerm, Weight,
};
