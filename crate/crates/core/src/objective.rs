//! Gaussian-integrable objectives: a polynomial plus cosine terms.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::Deserialize;

use crate::error::{check_dim, AgrfError, Result};
use crate::linalg::{dot, SymMatrix};
use crate::moments::{MultiIndex, Polynomial, SinusoidTerm};

/// `f(x) = poly(x) + Σ amplitude · cos(aᵀx + φ)`
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    n: usize,
    poly: Polynomial,
    sinusoids: Vec<SinusoidTerm>,
}

/// `f(x) = xᵀAx + bᵀx + c`
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pub a: SymMatrix,
    pub b: Vec<f64>,
    pub c: f64,
}

impl QuadraticForm {
    pub fn new(a: SymMatrix, b: Vec<f64>, c: f64) -> Result<Self> {
        check_dim(a.dim(), b.len())?;
        Ok(QuadraticForm { a, b, c })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.a.quad_form(x) + dot(&self.b, x) + self.c
    }

    /// `2Ax + b`
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.a
            .mat_vec(x)
            .iter()
            .zip(&self.b)
            .map(|(ax, b)| 2.0 * ax + b)
            .collect()
    }

    pub fn to_objective(&self) -> Objective {
        let n = self.dim();
        let mut p = Polynomial::constant(n, self.c);
        for i in 0..n {
            p.add_term(MultiIndex::unit(n, i), self.b[i]);
            for j in 0..n {
                let mut e = vec![0; n];
                e[i] += 1;
                e[j] += 1;
                p.add_term(MultiIndex::new(e), self.a.get(i, j));
            }
        }
        Objective::from_polynomial(p)
    }
}

impl Objective {
    pub fn new(poly: Polynomial, sinusoids: Vec<SinusoidTerm>) -> Result<Self> {
        let n = poly.dim();
        for s in &sinusoids {
            check_dim(n, s.dim())?;
            if !s.is_finite() {
                return Err(AgrfError::InvalidArgument("non-finite sinusoid term".into()));
            }
        }
        if poly.terms().any(|(_, c)| !c.is_finite()) {
            return Err(AgrfError::InvalidArgument("non-finite polynomial coefficient".into()));
        }
        Ok(Objective { n, poly, sinusoids })
    }

    pub fn from_polynomial(poly: Polynomial) -> Self {
        Objective {
            n: poly.dim(),
            poly,
            sinusoids: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn poly(&self) -> &Polynomial {
        &self.poly
    }

    pub fn sinusoids(&self) -> &[SinusoidTerm] {
        &self.sinusoids
    }

    /// Same objective plus a constant.
    pub fn shifted(&self, c: f64) -> Objective {
        Objective {
            n: self.n,
            poly: self.poly.add(&Polynomial::constant(self.n, c)),
            sinusoids: self.sinusoids.clone(),
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.poly.evaluate(x) + self.sinusoids.iter().map(|s| s.evaluate(x)).sum::<f64>()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = (0..self.n)
            .map(|i| self.poly.partial_derivative(i).evaluate(x))
            .collect();
        for s in &self.sinusoids {
            for (gi, si) in g.iter_mut().zip(s.gradient(x)) {
                *gi += si;
            }
        }
        g
    }

    /// `(A, b, c)` when the objective is a polynomial of degree at most two.
    /// Cross terms `k x_i x_j` are split evenly as `A_ij = A_ji = k / 2`.
    pub fn as_quadratic(&self) -> Option<QuadraticForm> {
        if !self.sinusoids.is_empty() || self.poly.degree() > 2 {
            return None;
        }
        let n = self.n;
        let mut a = SymMatrix::zeros(n);
        let mut b = vec![0.0; n];
        let mut c = 0.0;
        for (alpha, coef) in self.poly.terms() {
            let nz: Vec<usize> = (0..n).filter(|&i| alpha.exponents()[i] > 0).collect();
            match (alpha.degree(), nz.as_slice()) {
                (0, _) => c = coef,
                (1, [i]) => b[*i] = coef,
                (2, [i]) => a.set(*i, *i, coef),
                (2, [i, j]) => a.set(*i, *j, 0.5 * coef),
                _ => unreachable!("degree <= 2"),
            }
        }
        Some(QuadraticForm { a, b, c })
    }

    /// Serializes to the objective-file JSON: terms in graded-lex order,
    /// floats with 17 significant digits.
    pub fn to_json(&self) -> String {
        let mut s = String::new();
        write!(s, "{{\"n\":{},\"poly\":[", self.n).unwrap();
        for (k, (alpha, c)) in self.poly.terms().enumerate() {
            if k > 0 {
                s.push(',');
            }
            write!(s, "{{\"c\":{},\"e\":[", fmt_f64(c)).unwrap();
            let exps: Vec<String> = alpha.exponents().iter().map(u32::to_string).collect();
            write!(s, "{}]}}", exps.join(",")).unwrap();
        }
        s.push_str("],\"sin\":[");
        for (k, t) in self.sinusoids.iter().enumerate() {
            if k > 0 {
                s.push(',');
            }
            let freq: Vec<String> = t.frequency.iter().map(|&v| fmt_f64(v)).collect();
            write!(
                s,
                "{{\"amp\":{},\"freq\":[{}],\"phase\":{}}}",
                fmt_f64(t.amplitude),
                freq.join(","),
                fmt_f64(t.phase)
            )
            .unwrap();
        }
        s.push_str("]}");
        s
    }
}

/// 17 significant digits in JSON-compatible scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectiveDoc {
    n: usize,
    #[serde(default)]
    poly: Vec<PolyTermDoc>,
    #[serde(default)]
    sin: Vec<SinusoidTerm>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PolyTermDoc {
    c: f64,
    e: Vec<u32>,
}

/// Parses an objective-file JSON document.
pub fn parse_objective(document: &str) -> Result<Objective> {
    let doc: ObjectiveDoc = serde_json::from_str(document).map_err(|e| AgrfError::Parse(e.to_string()))?;
    if doc.n == 0 {
        return Err(AgrfError::Parse("dimension must be positive".into()));
    }
    let poly = Polynomial::from_terms(doc.n, doc.poly.into_iter().map(|t| (t.c, t.e)))?;
    Objective::new(poly, doc.sin)
}

fn separable(n: usize, per_coord: &[(f64, u32)], constant: f64) -> Polynomial {
    let mut p = Polynomial::constant(n, constant);
    for i in 0..n {
        for &(c, e) in per_coord {
            let mut alpha = vec![0; n];
            alpha[i] = e;
            p.add_term(MultiIndex::new(alpha), c);
        }
    }
    p
}

/// Shifted Styblinski-Tang: `78.43 + ½ Σ (x_i⁴ − 16x_i² + 5x_i)`.
pub fn styblinski_tang(n: usize) -> Objective {
    assert!(n >= 1);
    Objective::from_polynomial(separable(n, &[(0.5, 4), (-8.0, 2), (2.5, 1)], 78.43))
}

/// Rastrigin: `10n + Σ (x_i² − 10 cos(2π x_i))`.
pub fn rastrigin(n: usize) -> Objective {
    assert!(n >= 1);
    let poly = separable(n, &[(1.0, 2)], 10.0 * n as f64);
    let sinusoids = (0..n)
        .map(|i| {
            let mut a = vec![0.0; n];
            a[i] = 2.0 * PI;
            SinusoidTerm::new(-10.0, a, 0.0)
        })
        .collect();
    Objective { n, poly, sinusoids }
}

/// Three-hump camel: `2x² − 1.05x⁴ + x⁶/6 + xy + y²`.
pub fn three_hump() -> Objective {
    let p = Polynomial::from_terms(
        2,
        vec![
            (2.0, vec![2, 0]),
            (-1.05, vec![4, 0]),
            (1.0 / 6.0, vec![6, 0]),
            (1.0, vec![1, 1]),
            (1.0, vec![0, 2]),
        ],
    )
    .expect("fixed dimension");
    Objective::from_polynomial(p)
}

/// `(3/2)x⁴ − (1/4)x³ − 3x² + (3/4)x + 1`: local minimum `f(1) = 0`,
/// global minimum `f(−1) = −1`.
pub fn quartic_example() -> Objective {
    let p = Polynomial::from_terms(
        1,
        vec![
            (1.5, vec![4]),
            (-0.25, vec![3]),
            (-3.0, vec![2]),
            (0.75, vec![1]),
            (1.0, vec![0]),
        ],
    )
    .expect("fixed dimension");
    Objective::from_polynomial(p)
}

/// `(x − 3)² + 4(y − 3)²`, slow along `x`.
pub fn anisotropic_quadratic() -> Objective {
    QuadraticForm {
        a: SymMatrix::from_diagonal(&[1.0, 4.0]),
        b: vec![-6.0, -24.0],
        c: 45.0,
    }
    .to_objective()
}

/// Newton iteration on `2x³ − 16x + 2.5`, the per-coordinate stationarity
/// condition of Styblinski-Tang.
pub fn styblinski_tang_stationary_point(start: f64) -> f64 {
    let mut x = start;
    for _ in 0..50 {
        let g = 2.0 * x * x * x - 16.0 * x + 2.5;
        let dg = 6.0 * x * x - 16.0;
        let step = g / dg;
        x -= step;
        if step.abs() < 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Named benchmark objectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Benchmark {
    StyblinskiTang,
    Rastrigin,
    ThreeHump,
    Quartic,
    Quadratic,
}

impl Benchmark {
    pub const ALL: [Benchmark; 5] = [
        Benchmark::StyblinskiTang,
        Benchmark::Rastrigin,
        Benchmark::ThreeHump,
        Benchmark::Quartic,
        Benchmark::Quadratic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::StyblinskiTang => "styblinski-tang",
            Benchmark::Rastrigin => "rastrigin",
            Benchmark::ThreeHump => "three-hump",
            Benchmark::Quartic => "quartic",
            Benchmark::Quadratic => "quadratic",
        }
    }

    pub fn from_name(name: &str) -> Option<Benchmark> {
        Self::ALL.into_iter().find(|b| b.name() == name)
    }

    /// `None` for benchmarks defined in any dimension.
    pub fn fixed_dim(self) -> Option<usize> {
        match self {
            Benchmark::StyblinskiTang | Benchmark::Rastrigin => None,
            Benchmark::ThreeHump | Benchmark::Quadratic => Some(2),
            Benchmark::Quartic => Some(1),
        }
    }

    pub fn build(self, n: usize) -> Result<Objective> {
        if n == 0 {
            return Err(AgrfError::InvalidArgument("dimension must be positive".into()));
        }
        if let Some(d) = self.fixed_dim() {
            check_dim(d, n)?;
        }
        Ok(match self {
            Benchmark::StyblinskiTang => styblinski_tang(n),
            Benchmark::Rastrigin => rastrigin(n),
            Benchmark::ThreeHump => three_hump(),
            Benchmark::Quartic => quartic_example(),
            Benchmark::Quadratic => anisotropic_quadratic(),
        })
    }

    /// Global minimizer in dimension `n`, and whether it is known in closed
    /// form (`true`) or located numerically (`false`).
    pub fn minimizer(self, n: usize) -> (Vec<f64>, bool) {
        match self {
            Benchmark::StyblinskiTang => (vec![styblinski_tang_stationary_point(-2.9); n], false),
            Benchmark::Rastrigin => (vec![0.0; n], true),
            Benchmark::ThreeHump => (vec![0.0, 0.0], true),
            Benchmark::Quartic => (vec![-1.0], true),
            Benchmark::Quadratic => (vec![3.0, 3.0], true),
        }
    }
}
