//! Seeded Monte Carlo estimates of Gaussian expectations, used as an
//! independent check on the closed forms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, AgrfError, Result};
use crate::linalg::{cholesky, SymMatrix};

/// Sample mean and standard error of `g(x)` over `x = m + L z`.
///
/// The stream is a ChaCha8 generator seeded with `seed`, so identical
/// inputs give bit-identical output.
pub fn mc_expectation<F>(g: F, m: &[f64], c: &SymMatrix, samples: usize, seed: u64) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> f64,
{
    check_dim(c.dim(), m.len())?;
    if samples < 2 {
        return Err(AgrfError::InvalidArgument("need at least two samples".into()));
    }
    let l = cholesky(c)?;
    let n = m.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = vec![0.0; n];
    let mut x = vec![0.0; n];

    // Welford
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for k in 0..samples {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        for i in 0..n {
            x[i] = m[i] + l.row(i).iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
        }
        let v = g(&x);
        let delta = v - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = m2 / (samples - 1) as f64;
    Ok((mean, (var / samples as f64).sqrt()))
}
