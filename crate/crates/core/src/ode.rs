//! Adaptive Bogacki-Shampine 3(2) integration of the flow over the packed
//! `(m, C)` state, with the covariance-determinant stopping event.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, AgrfError, Result};
use crate::flow::{agrf_rhs, expected_value, FlowDerivative, FlowMode, GaussianState};
use crate::linalg::{determinant, SymMatrix};
use crate::objective::Objective;

/// Horizons at or below this many simulated seconds produce only the
/// initial point.
pub const TIME_RESOLUTION: f64 = 1e-8;

/// Relative accuracy of the determinant event time.
pub const EVENT_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub t_max: f64,
    pub det_eps: f64,
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub record_every_step: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            t_max: 30.0,
            det_eps: 1e-4,
            rtol: 1e-3,
            atol: 1e-6,
            max_steps: 100_000,
            record_every_step: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(AgrfError::InvalidArgument(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("t_max", self.t_max)?;
        positive("det_eps", self.det_eps)?;
        positive("rtol", self.rtol)?;
        positive("atol", self.atol)?;
        if self.max_steps == 0 {
            return Err(AgrfError::InvalidArgument("max_steps must be at least 1".into()));
        }
        Ok(())
    }

    fn tolerance(&self) -> Tolerance {
        Tolerance {
            rtol: self.rtol,
            atol: self.atol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub t: f64,
    pub mean: Vec<f64>,
    pub cov: SymMatrix,
    pub f_at_mean: f64,
    pub expected_f: f64,
    pub det_cov: f64,
    /// Step that produced this point; 0 for the initial point.
    pub step_size: f64,
}

impl TracePoint {
    pub fn new(obj: &Objective, state: &GaussianState, t: f64, step_size: f64) -> Self {
        TracePoint {
            t,
            mean: state.mean().to_vec(),
            cov: state.cov().clone(),
            f_at_mean: obj.evaluate(state.mean()),
            expected_f: expected_value(obj, state).unwrap_or(f64::NAN),
            det_cov: determinant(state.cov()),
            step_size,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Termination {
    DetBelowEps,
    TimeLimit,
    StepFailure,
    NonFinite,
    MaxSteps,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::DetBelowEps => "DetBelowEps",
            Termination::TimeLimit => "TimeLimit",
            Termination::StepFailure => "StepFailure",
            Termination::NonFinite => "NonFinite",
            Termination::MaxSteps => "MaxSteps",
        }
    }

    /// Whether the run ended by one of the two intended stopping rules.
    pub fn is_normal(self) -> bool {
        matches!(self, Termination::DetBelowEps | Termination::TimeLimit)
    }
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TracePoint>,
    pub termination: Termination,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn last(&self) -> &TracePoint {
        self.points.last().expect("trajectory has at least one point")
    }
}

/// Length of the packed vector for dimension `n`.
pub fn packed_len(n: usize) -> usize {
    n + n * (n + 1) / 2
}

/// Inverse of [`packed_len`].
pub fn dim_from_packed_len(len: usize) -> Option<usize> {
    (0..=len).find(|&n| packed_len(n) == len)
}

fn pack_parts(mean: &[f64], cov: &SymMatrix) -> Vec<f64> {
    let n = mean.len();
    let mut out = Vec::with_capacity(packed_len(n));
    out.extend_from_slice(mean);
    for i in 0..n {
        out.extend_from_slice(&cov.row(i)[i..]);
    }
    out
}

fn unpack_parts(p: &[f64], n: usize) -> Result<(Vec<f64>, SymMatrix)> {
    check_dim(packed_len(n), p.len())?;
    let mut cov = SymMatrix::zeros(n);
    let mut k = n;
    for i in 0..n {
        for j in i..n {
            cov.set(i, j, p[k]);
            k += 1;
        }
    }
    Ok((p[..n].to_vec(), cov))
}

/// Mean entries, then the upper triangle of the covariance row by row.
pub fn pack(state: &GaussianState) -> Vec<f64> {
    pack_parts(state.mean(), state.cov())
}

/// Rebuilds a state; the lower triangle mirrors the upper.
pub fn unpack(p: &[f64], n: usize) -> Result<GaussianState> {
    let (mean, cov) = unpack_parts(p, n)?;
    GaussianState::new(mean, cov)
}

pub fn pack_derivative(d: &FlowDerivative) -> Vec<f64> {
    pack_parts(&d.d_mean, &d.d_cov)
}

pub fn unpack_derivative(p: &[f64], n: usize) -> Result<FlowDerivative> {
    let (d_mean, d_cov) = unpack_parts(p, n)?;
    Ok(FlowDerivative { d_mean, d_cov })
}

/// Result of one Bogacki-Shampine step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// Third-order solution.
    pub y_next: Vec<f64>,
    /// `f(t + h, y_next)`, reusable as the next step's first stage.
    pub f_next: Vec<f64>,
    /// Weighted RMS norm of the embedded error; a step is acceptable at `≤ 1`.
    pub error: f64,
}

fn axpy(y: &[f64], h: f64, terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut out = y.to_vec();
    for (c, k) in terms {
        for (o, v) in out.iter_mut().zip(k.iter()) {
            *o += h * c * v;
        }
    }
    out
}

fn ensure_finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(AgrfError::NonFinite(what.into()))
    }
}

/// One Bogacki-Shampine 3(2) step from `(t, y)` with first stage `f0`
/// (computed if absent).
pub fn rk23_step<F>(rhs: &mut F, t: f64, y: &[f64], f0: Option<&[f64]>, h: f64, tol: Tolerance) -> Result<StepOutput>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    if !(h > 0.0) {
        return Err(AgrfError::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let k1 = match f0 {
        Some(f) => f.to_vec(),
        None => rhs(t, y)?,
    };
    ensure_finite(&k1, "stage 1")?;
    let k2 = rhs(t + 0.5 * h, &axpy(y, h, &[(0.5, &k1)]))?;
    ensure_finite(&k2, "stage 2")?;
    let k3 = rhs(t + 0.75 * h, &axpy(y, h, &[(0.75, &k2)]))?;
    ensure_finite(&k3, "stage 3")?;
    let y_next = axpy(y, h, &[(2.0 / 9.0, &k1), (1.0 / 3.0, &k2), (4.0 / 9.0, &k3)]);
    ensure_finite(&y_next, "solution")?;
    let k4 = rhs(t + h, &y_next)?;
    ensure_finite(&k4, "stage 4")?;

    let mut sum = 0.0;
    for i in 0..y.len() {
        let e = h * (-5.0 / 72.0 * k1[i] + 1.0 / 12.0 * k2[i] + 1.0 / 9.0 * k3[i] - 1.0 / 8.0 * k4[i]);
        let sc = tol.atol + tol.rtol * y[i].abs().max(y_next[i].abs());
        sum += (e / sc).powi(2);
    }
    let error = if y.is_empty() { 0.0 } else { (sum / y.len() as f64).sqrt() };
    Ok(StepOutput {
        y_next,
        f_next: k4,
        error,
    })
}

/// `steps` fixed steps of size `h`; returns the final value.
pub fn integrate_fixed_step<F>(rhs: &mut F, t0: f64, y0: &[f64], h: f64, steps: usize) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let tol = Tolerance { rtol: 1.0, atol: 1.0 };
    let mut y = y0.to_vec();
    let mut f = rhs(t0, &y)?;
    for k in 0..steps {
        let out = rk23_step(rhs, t0 + k as f64 * h, &y, Some(&f), h, tol)?;
        y = out.y_next;
        f = out.f_next;
    }
    Ok(y)
}

fn rms_scaled(v: &[f64], y: &[f64], tol: Tolerance) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let s: f64 = v
        .iter()
        .zip(y)
        .map(|(a, b)| (a / (tol.atol + tol.rtol * b.abs())).powi(2))
        .sum();
    (s / v.len() as f64).sqrt()
}

/// Starting step from the magnitudes of `y`, `ẏ` and a probe of `ÿ`.
fn initial_step<F>(rhs: &mut F, y0: &[f64], f0: &[f64], tol: Tolerance, t_max: f64) -> f64
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let d0 = rms_scaled(y0, y0, tol);
    let d1 = rms_scaled(f0, y0, tol);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(t_max / 10.0);
    let h = match rhs(h0, &axpy(y0, h0, &[(1.0, f0)])) {
        Ok(f1) if f1.iter().all(|v| v.is_finite()) => {
            let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
            let d2 = rms_scaled(&diff, y0, tol) / h0;
            let h1 = if d1.max(d2) <= 1e-15 {
                (h0 * 1e-3).max(1e-6)
            } else {
                (0.01 / d1.max(d2)).powf(1.0 / 3.0)
            };
            (100.0 * h0).min(h1)
        }
        _ => h0,
    };
    h.min(t_max / 10.0)
}

enum Failure {
    NotPd,
    NonFinite,
}

fn classify(e: &AgrfError) -> Failure {
    match e {
        AgrfError::NotPositiveDefinite | AgrfError::SingularAtTime { .. } => Failure::NotPd,
        _ => Failure::NonFinite,
    }
}

fn packed_det(y: &[f64], n: usize) -> f64 {
    unpack_parts(y, n).map(|(_, c)| determinant(&c)).unwrap_or(f64::NAN)
}

/// Integrates the flow from `state0` until `det(C) < det_eps`, `t_max`,
/// or a numerical failure.
pub fn integrate(obj: &Objective, state0: &GaussianState, config: &SolverConfig, mode: FlowMode) -> Result<Trajectory> {
    check_dim(obj.dim(), state0.dim())?;
    config.validate()?;
    if mode == FlowMode::Diagonal && !state0.cov().is_diagonal() {
        return Err(AgrfError::NotDiagonal);
    }
    let n = state0.dim();
    let tol = config.tolerance();
    let mut rhs = |_t: f64, y: &[f64]| -> Result<Vec<f64>> {
        let s = unpack(y, n)?;
        Ok(pack_derivative(&agrf_rhs(obj, &s, mode)?))
    };

    let mut traj = Trajectory {
        points: vec![TracePoint::new(obj, state0, 0.0, 0.0)],
        termination: Termination::TimeLimit,
        accepted_steps: 0,
        rejected_steps: 0,
    };
    if traj.points[0].det_cov < config.det_eps {
        traj.termination = Termination::DetBelowEps;
        return Ok(traj);
    }
    if config.t_max <= TIME_RESOLUTION {
        return Ok(traj);
    }

    let mut t = 0.0;
    let mut y = pack(state0);
    let mut f = match rhs(0.0, &y) {
        Ok(f) if f.iter().all(|v| v.is_finite()) => f,
        _ => {
            traj.termination = Termination::NonFinite;
            return Ok(traj);
        }
    };
    let h_min = 1e-12 * config.t_max;
    let mut h = initial_step(&mut rhs, &y, &f, tol, config.t_max);
    let mut retried = false;
    let mut last: Option<(f64, Vec<f64>, f64)> = None;

    let termination = loop {
        if t >= config.t_max {
            break Termination::TimeLimit;
        }
        if traj.accepted_steps + traj.rejected_steps >= config.max_steps {
            break Termination::MaxSteps;
        }
        if h < h_min {
            break Termination::StepFailure;
        }
        let remaining = config.t_max - t;
        let (h_try, hits_end) = if h >= remaining { (remaining, true) } else { (h, false) };

        let out = match rk23_step(&mut rhs, t, &y, Some(&f), h_try, tol) {
            Ok(out) => out,
            Err(e) => match classify(&e) {
                Failure::NotPd if !retried => {
                    retried = true;
                    traj.rejected_steps += 1;
                    h = 0.5 * h_try;
                    continue;
                }
                Failure::NotPd => break Termination::StepFailure,
                Failure::NonFinite => break Termination::NonFinite,
            },
        };

        let factor = if out.error == 0.0 {
            5.0
        } else {
            (0.9 * out.error.powf(-1.0 / 3.0)).clamp(0.2, 5.0)
        };
        if out.error > 1.0 || out.error.is_nan() {
            traj.rejected_steps += 1;
            h = h_try * if out.error.is_nan() { 0.2 } else { factor };
            continue;
        }

        traj.accepted_steps += 1;
        retried = false;
        let det = packed_det(&out.y_next, n);
        if det < config.det_eps {
            let (tau, y_event) = locate_event(&mut rhs, t, &y, &f, h_try, &out.y_next, n, tol, config.det_eps);
            last = Some((t + tau, y_event, tau));
            break Termination::DetBelowEps;
        }

        t = if hits_end { config.t_max } else { t + h_try };
        y = out.y_next;
        f = out.f_next;
        if config.record_every_step {
            push_point(&mut traj, obj, &y, n, t, h_try);
        } else {
            last = Some((t, y.clone(), h_try));
        }
        h = h_try * factor;
    };

    if let Some((t_end, y_end, step)) = last {
        push_point(&mut traj, obj, &y_end, n, t_end, step);
    }
    traj.termination = termination;
    Ok(traj)
}

fn push_point(traj: &mut Trajectory, obj: &Objective, y: &[f64], n: usize, t: f64, step: f64) {
    let (mean, cov) = unpack_parts(y, n).expect("packed length is fixed");
    let point = match GaussianState::new(mean.clone(), cov.clone()) {
        Ok(s) => TracePoint::new(obj, &s, t, step),
        Err(_) => TracePoint {
            t,
            f_at_mean: obj.evaluate(&mean),
            expected_f: f64::NAN,
            det_cov: determinant(&cov),
            mean,
            cov,
            step_size: step,
        },
    };
    match traj.points.last_mut() {
        Some(p) if p.t == t => *p = point,
        _ => traj.points.push(point),
    }
}

/// Bisects the step length from `(t, y)` until the determinant crossing
/// is bracketed to `EVENT_RTOL` relative time; returns the step and the
/// state on the far side of the crossing.
#[allow(clippy::too_many_arguments)]
fn locate_event<F>(
    rhs: &mut F,
    t: f64,
    y: &[f64],
    f: &[f64],
    h: f64,
    y_hi: &[f64],
    n: usize,
    tol: Tolerance,
    det_eps: f64,
) -> (f64, Vec<f64>)
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let (mut lo, mut hi) = (0.0, h);
    let mut y_best = y_hi.to_vec();
    while hi - lo > EVENT_RTOL * (t + hi) {
        let mid = 0.5 * (lo + hi);
        match rk23_step(rhs, t, y, Some(f), mid, tol) {
            Ok(out) if packed_det(&out.y_next, n) < det_eps => {
                hi = mid;
                y_best = out.y_next;
            }
            _ => lo = mid,
        }
    }
    (hi, y_best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{analytic_cov, analytic_mean};
    use crate::linalg::norm2;
    use crate::objective::{anisotropic_quadratic, QuadraticForm};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn scalar_ode(_t: f64, y: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![-2.0 * y[0] * y[0]])
    }

    #[test]
    fn pack_examples() {
        let s = GaussianState::isotropic(vec![2.0], 3.0).unwrap();
        assert_eq!(pack(&s), vec![2.0, 3.0]);
        let s = GaussianState::isotropic(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(pack(&s), vec![0.0, 0.0, 1.0, 0.0, 1.0]);
        assert!(matches!(unpack(&[1.0, 2.0, 3.0], 2), Err(AgrfError::DimensionMismatch { .. })));
        assert_eq!(dim_from_packed_len(9), Some(3));
        assert_eq!(dim_from_packed_len(4), None);
    }

    #[test]
    fn rk23_trivial_cases() {
        let tol = Tolerance { rtol: 1e-3, atol: 1e-6 };
        let mut zero = |_t: f64, y: &[f64]| -> Result<Vec<f64>> { Ok(vec![0.0; y.len()]) };
        let out = rk23_step(&mut zero, 0.0, &[1.5, -2.0], None, 0.3, tol).unwrap();
        assert_eq!(out.y_next, vec![1.5, -2.0]);
        assert_eq!(out.error, 0.0);

        let mut one = |_t: f64, _y: &[f64]| -> Result<Vec<f64>> { Ok(vec![1.0]) };
        let out = rk23_step(&mut one, 0.0, &[0.0], None, 0.5, tol).unwrap();
        assert_eq!(out.y_next, vec![0.5]);

        // y' = 3t² is integrated exactly
        let mut cubic = |t: f64, _y: &[f64]| -> Result<Vec<f64>> { Ok(vec![3.0 * t * t]) };
        let out = rk23_step(&mut cubic, 1.0, &[1.0], None, 0.5, tol).unwrap();
        assert_relative_eq!(out.y_next[0], 1.5f64.powi(3), max_relative = 1e-15);
    }

    #[test]
    fn rk23_reports_non_finite() {
        let tol = Tolerance { rtol: 1e-3, atol: 1e-6 };
        let mut blow = |_t: f64, y: &[f64]| -> Result<Vec<f64>> { Ok(vec![y[0] * f64::INFINITY]) };
        assert!(matches!(
            rk23_step(&mut blow, 0.0, &[1.0], None, 0.1, tol),
            Err(AgrfError::NonFinite(_))
        ));
    }

    #[test]
    fn fixed_step_third_order() {
        let exact = 1.0 / 3.0;
        let errs: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&h: &f64| {
                let steps = (1.0 / h).round() as usize;
                let y = integrate_fixed_step(&mut scalar_ode, 0.0, &[1.0], h, steps).unwrap();
                (y[0] - exact).abs()
            })
            .collect();
        assert!(errs[0] / errs[1] >= 6.0, "{errs:?}");
        assert!(errs[1] / errs[2] >= 6.0, "{errs:?}");
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig { t_max: 0.0, ..Default::default() };
        assert!(matches!(bad.validate(), Err(AgrfError::InvalidArgument(_))));
        let bad = SolverConfig { rtol: -1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(SolverConfig::default().validate().is_ok());
    }

    #[test]
    fn tiny_horizon_gives_single_point() {
        let obj = anisotropic_quadratic();
        let s = GaussianState::isotropic(vec![0.0, 0.0], 1.0).unwrap();
        let cfg = SolverConfig { t_max: 1e-9, ..Default::default() };
        let tr = integrate(&obj, &s, &cfg, FlowMode::Full).unwrap();
        assert_eq!(tr.points.len(), 1);
        assert_eq!(tr.termination, Termination::TimeLimit);
        assert_eq!(tr.points[0].t, 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let obj = anisotropic_quadratic();
        let s = GaussianState::isotropic(vec![0.0], 1.0).unwrap();
        assert!(matches!(
            integrate(&obj, &s, &SolverConfig::default(), FlowMode::Full),
            Err(AgrfError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn quadratic_run_stops_on_determinant() {
        let obj = anisotropic_quadratic();
        let s = GaussianState::isotropic(vec![0.0, 0.0], 1.0).unwrap();
        let tr = integrate(&obj, &s, &SolverConfig::default(), FlowMode::Full).unwrap();
        assert_eq!(tr.termination, Termination::DetBelowEps);
        let last = tr.last();
        assert!((last.det_cov - 1e-4).abs() <= 1e-6, "{}", last.det_cov);
        // det = 1/((1+2t)(1+8t)) = 1e-4 at the positive root of 16t² + 10t + 1 − 1e4
        let t_event = (-10.0 + (100.0f64 + 64.0 * 9999.0).sqrt()) / 32.0;
        assert!((last.t - t_event).abs() < 0.01 * t_event, "{} vs {t_event}", last.t);
        for w in tr.points.windows(2) {
            assert!(w[1].t > w[0].t);
            assert!(w[1].f_at_mean <= w[0].f_at_mean + 1e-12);
        }
    }

    #[test]
    fn record_every_step_off_keeps_endpoints() {
        let obj = anisotropic_quadratic();
        let s = GaussianState::isotropic(vec![0.0, 0.0], 1.0).unwrap();
        let full = integrate(&obj, &s, &SolverConfig::default(), FlowMode::Full).unwrap();
        let cfg = SolverConfig { record_every_step: false, ..Default::default() };
        let sparse = integrate(&obj, &s, &cfg, FlowMode::Full).unwrap();
        assert_eq!(sparse.points.len(), 2);
        assert_eq!(sparse.last(), full.last());
    }

    #[test]
    fn max_steps_stops_the_run() {
        let obj = anisotropic_quadratic();
        let s = GaussianState::isotropic(vec![0.0, 0.0], 1.0).unwrap();
        let cfg = SolverConfig { max_steps: 3, ..Default::default() };
        let tr = integrate(&obj, &s, &cfg, FlowMode::Full).unwrap();
        assert_eq!(tr.termination, Termination::MaxSteps);
        assert!(tr.accepted_steps + tr.rejected_steps <= 3);
    }

    #[test]
    fn concave_objective_fails_gracefully() {
        // Ċ = 2C² blows up at t = ½
        let obj = QuadraticForm::new(SymMatrix::scaled_identity(1, -1.0), vec![0.0], 0.0)
            .unwrap()
            .to_objective();
        let s = GaussianState::isotropic(vec![1.0], 1.0).unwrap();
        let tr = integrate(&obj, &s, &SolverConfig::default(), FlowMode::Full).unwrap();
        assert!(!tr.termination.is_normal(), "{:?}", tr.termination);
        assert!(tr.last().t < 0.55, "{:?} {}", tr.termination, tr.last().t);
    }

    fn pd(n: usize, raw: &[f64], floor: f64) -> SymMatrix {
        let mut c = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                c.set(i, j, (0..n).map(|k| raw[i * 3 + k] * raw[j * 3 + k]).sum());
            }
        }
        c.shift_diagonal(floor)
    }

    fn rel_err(state: &TracePoint, qf: &QuadraticForm, m0: &[f64], c0: &SymMatrix) -> f64 {
        let exact_m = analytic_mean(qf, m0, c0, state.t).unwrap();
        let exact_c = analytic_cov(qf, c0, state.t).unwrap();
        let exact = pack_parts(&exact_m, &exact_c);
        let got = pack_parts(&state.mean, &state.cov);
        let diff: Vec<f64> = got.iter().zip(&exact).map(|(a, b)| a - b).collect();
        norm2(&diff) / norm2(&exact)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn pack_round_trip_is_exact(
            n in 1usize..=3,
            raw in prop::collection::vec(-1.0f64..1.0, 9),
            m in prop::collection::vec(-1e3f64..1e3, 3),
        ) {
            let s = GaussianState::new(m[..n].to_vec(), pd(n, &raw, 0.1)).unwrap();
            let back = unpack(&pack(&s), n).unwrap();
            prop_assert_eq!(back, s);
        }

        #[test]
        fn quadratic_trajectories_track_closed_form(
            n in 1usize..=3,
            a_raw in prop::collection::vec(-1.0f64..1.0, 9),
            c_raw in prop::collection::vec(-1.0f64..1.0, 9),
            b in prop::collection::vec(-2.0f64..2.0, 3),
            m0 in prop::collection::vec(-2.0f64..2.0, 3),
        ) {
            let qf = QuadraticForm::new(pd(n, &a_raw, 0.1), b[..n].to_vec(), 0.0).unwrap();
            let c0 = pd(n, &c_raw, 0.3);
            let m0 = m0[..n].to_vec();
            let s = GaussianState::new(m0.clone(), c0.clone()).unwrap();
            let obj = qf.to_objective();
            let cfg = SolverConfig::default();
            let tr = integrate(&obj, &s, &cfg, FlowMode::Full).unwrap();
            prop_assert!(tr.termination.is_normal());
            for p in &tr.points {
                prop_assert!(rel_err(p, &qf, &m0, &c0) <= 10.0 * cfg.rtol);
                prop_assert!(crate::linalg::cholesky(&p.cov).is_ok());
            }
            for w in tr.points.windows(2) {
                prop_assert!(w[1].f_at_mean <= w[0].f_at_mean + 1e-9 * w[0].f_at_mean.abs().max(1.0));
            }
            if tr.termination == Termination::DetBelowEps {
                prop_assert!((tr.last().det_cov - cfg.det_eps).abs() <= 0.01 * cfg.det_eps);
            }

            let tight = SolverConfig { rtol: cfg.rtol / 2.0, atol: cfg.atol / 2.0, ..cfg };
            let fine = integrate(&obj, &s, &tight, FlowMode::Full).unwrap();
            let final_err = |traj: &Trajectory| {
                let p = traj.last();
                let exact = analytic_mean(&qf, &m0, &c0, p.t).unwrap();
                norm2(&p.mean.iter().zip(&exact).map(|(a, b)| a - b).collect::<Vec<_>>())
            };
            prop_assert!(final_err(&fine) <= final_err(&tr), "{} > {}", final_err(&fine), final_err(&tr));
        }
    }
}
