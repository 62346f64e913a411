//! Small dense symmetric linear algebra.
//!
//! Dimensions here are desk scale (n up to about ten), so everything is
//! stored densely in row-major order and factorizations are the textbook
//! unblocked ones.

use crate::error::{check_dim, AgrfError, Result};

/// Diagonal shift tried once when a covariance fails to factor.
pub const CHOLESKY_JITTER: f64 = 1e-12;

/// A real symmetric `n x n` matrix.
///
/// Both triangles are stored and kept exactly equal; every mutating path
/// writes the mirrored entry as well.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = s;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    /// Builds a matrix from its upper triangle; the lower triangle of `rows`
    /// is ignored.
    pub fn from_upper(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            check_dim(n, row.len())?;
            for j in i..n {
                m.set(i, j, row[j]);
            }
        }
        Ok(m)
    }

    /// Builds a matrix from full rows, rejecting input that is not exactly
    /// symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for row in rows {
            check_dim(n, row.len())?;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if rows[i][j] != rows[j][i] {
                    return Err(AgrfError::InvalidArgument(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Self::from_upper(rows)
    }

    /// Builds a matrix from a row-major buffer of length `n * n`,
    /// symmetrizing it.
    pub fn symmetrize_flat(n: usize, raw: &[f64]) -> Result<Self> {
        check_dim(n * n, raw.len())?;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = if i == j {
                    raw[i * n + i]
                } else {
                    0.5 * (raw[i * n + j] + raw[j * n + i])
                };
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets entries `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    /// Row-major view of all `n * n` entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.n).all(|i| ((i + 1)..self.n).all(|j| self.get(i, j) == 0.0))
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `vᵀ S v`
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        self.mat_vec(v).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, other.n, "dimension mismatch in SymMatrix::add");
        SymMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        self.add(&other.scale(-1.0))
    }

    /// `self * inner * self`, which is symmetric whenever both factors are.
    pub fn sandwich(&self, inner: &SymMatrix) -> SymMatrix {
        let n = self.n;
        let left = matmul(n, &self.data, &inner.data);
        let full = matmul(n, &left, &self.data);
        Self::symmetrize_flat(n, &full).expect("square buffer")
    }

    /// Adds `s` to every diagonal entry.
    pub fn shift_diagonal(&self, s: f64) -> SymMatrix {
        let mut out = self.clone();
        for i in 0..self.n {
            out.data[i * self.n + i] += s;
        }
        out
    }
}

/// Returns `(M + Mᵀ) / 2` for a square row-major matrix given as rows.
pub fn symmetrize(rows: &[Vec<f64>]) -> Result<SymMatrix> {
    let n = rows.len();
    let mut flat = Vec::with_capacity(n * n);
    for row in rows {
        check_dim(n, row.len())?;
        flat.extend_from_slice(row);
    }
    SymMatrix::symmetrize_flat(n, &flat)
}

fn matmul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

/// Lower-triangular Cholesky factor with a strictly positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular {
    n: usize,
    data: Vec<f64>,
}

impl LowerTriangular {
    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        LowerTriangular { n, data }
    }

    /// Builds a factor from full rows; entries above the diagonal must be
    /// zero and the diagonal must be positive.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            check_dim(n, row.len())?;
            if row[i] <= 0.0 || row[(i + 1)..].iter().any(|&v| v != 0.0) {
                return Err(AgrfError::InvalidArgument(
                    "not a lower-triangular factor with positive diagonal".into(),
                ));
            }
            data.extend_from_slice(row);
        }
        Ok(LowerTriangular { n, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..i * self.n + i + 1]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].to_vec())
            .collect()
    }

    /// `L z`
    pub fn mul_vec(&self, z: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(z).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `Lᵀ v`
    pub fn transpose_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            for (k, l) in self.row(i).iter().enumerate() {
                out[k] += l * v[i];
            }
        }
        out
    }

    /// `L Lᵀ`
    pub fn reconstruct(&self) -> SymMatrix {
        let n = self.n;
        let mut s = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = (0..=j).map(|k| self.get(i, k) * self.get(j, k)).sum();
                s.set(i, j, v);
            }
        }
        s
    }

    fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let s: f64 = (0..i).map(|k| self.get(i, k) * y[k]).sum();
            y[i] = (b[i] - s) / self.get(i, i);
        }
        y
    }

    fn solve_upper_transposed(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for i in (0..self.n).rev() {
            let s: f64 = ((i + 1)..self.n).map(|k| self.get(k, i) * x[k]).sum();
            x[i] = (y[i] - s) / self.get(i, i);
        }
        x
    }

    /// Solves `L Lᵀ x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper_transposed(&self.solve_lower(b))
    }
}

/// Cholesky factorization `S = L Lᵀ`.
pub fn cholesky(s: &SymMatrix) -> Result<LowerTriangular> {
    let n = s.dim();
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = s.get(j, j);
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(AgrfError::NotPositiveDefinite);
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in (j + 1)..n {
            let mut v = s.get(i, j);
            for k in 0..j {
                v -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = v / djj;
        }
    }
    Ok(LowerTriangular { n, data: l })
}

/// Cholesky with a single retry after adding [`CHOLESKY_JITTER`] to the
/// diagonal, for covariances that are numerically on the PSD boundary.
pub fn cholesky_jittered(s: &SymMatrix) -> Result<LowerTriangular> {
    cholesky(s).or_else(|_| cholesky(&s.shift_diagonal(CHOLESKY_JITTER)))
}

/// Determinant of a symmetric matrix. Uses Cholesky when `s` is positive
/// definite and falls back to LU with partial pivoting otherwise, so it
/// never fails on finite input.
pub fn determinant(s: &SymMatrix) -> f64 {
    match cholesky(s) {
        Ok(l) => {
            let p: f64 = (0..s.dim()).map(|i| l.get(i, i)).product();
            p * p
        }
        Err(_) => lu_determinant(s.dim(), s.as_slice()),
    }
}

fn lu_determinant(n: usize, flat: &[f64]) -> f64 {
    let mut a = flat.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))
            .unwrap_or(col);
        let p = a[pivot * n + col];
        if p == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            det = -det;
        }
        det *= p;
        for r in (col + 1)..n {
            let f = a[r * n + col] / p;
            if f != 0.0 {
                for j in col..n {
                    a[r * n + j] -= f * a[col * n + j];
                }
            }
        }
    }
    det
}

/// Solves `S y = rhs` for positive definite `S`.
pub fn solve(s: &SymMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    check_dim(s.dim(), rhs.len())?;
    Ok(cholesky(s)?.solve(rhs))
}

/// Inverse of a positive definite matrix.
pub fn inverse_spd(s: &SymMatrix) -> Result<SymMatrix> {
    let l = cholesky(s)?;
    Ok(inverse_from_columns(s.dim(), |e| l.solve(e)))
}

/// Inverse of a symmetric matrix by Gauss-Jordan elimination with partial
/// pivoting. Returns `None` when a pivot is negligible relative to the
/// matrix scale.
pub fn inverse_general(s: &SymMatrix) -> Option<SymMatrix> {
    let n = s.dim();
    let scale = s.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    let tol = scale * 1e-14 * n as f64;
    let mut a = s.as_slice().to_vec();
    let mut inv = SymMatrix::identity(n).as_slice().to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))
            .unwrap_or(col);
        let p = a[pivot * n + col];
        if p.abs() <= tol {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
                inv.swap(col * n + j, pivot * n + j);
            }
        }
        for j in 0..n {
            a[col * n + j] /= p;
            inv[col * n + j] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r * n + col];
            if f != 0.0 {
                for j in 0..n {
                    a[r * n + j] -= f * a[col * n + j];
                    inv[r * n + j] -= f * inv[col * n + j];
                }
            }
        }
    }
    SymMatrix::symmetrize_flat(n, &inv).ok()
}

fn inverse_from_columns(n: usize, solve_col: impl Fn(&[f64]) -> Vec<f64>) -> SymMatrix {
    let mut flat = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = solve_col(&e);
        for i in 0..n {
            flat[i * n + j] = col[i];
        }
    }
    SymMatrix::symmetrize_flat(n, &flat).expect("square buffer")
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn m2(a: f64, b: f64, c: f64) -> SymMatrix {
        SymMatrix::from_rows(&[vec![a, b], vec![b, c]]).unwrap()
    }

    #[test]
    fn cholesky_identity() {
        let l = cholesky(&SymMatrix::identity(2)).unwrap();
        assert_eq!(l, LowerTriangular::identity(2));
    }

    #[test]
    fn cholesky_two_by_two() {
        let l = cholesky(&m2(4.0, 2.0, 3.0)).unwrap();
        assert_relative_eq!(l.get(0, 0), 2.0);
        assert_relative_eq!(l.get(1, 0), 1.0);
        assert_relative_eq!(l.get(1, 1), 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(l.get(0, 1), 0.0);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        assert_eq!(cholesky(&m2(1.0, 2.0, 1.0)), Err(AgrfError::NotPositiveDefinite));
    }

    #[test]
    fn cholesky_jitter_rescues_boundary() {
        assert!(cholesky(&SymMatrix::zeros(1)).is_err());
        assert!(cholesky_jittered(&SymMatrix::zeros(1)).is_ok());
        assert!(cholesky_jittered(&m2(1.0, 2.0, 1.0)).is_err());
    }

    #[test]
    fn determinant_examples() {
        assert_eq!(determinant(&SymMatrix::identity(3)), 1.0);
        assert_relative_eq!(determinant(&m2(4.0, 2.0, 3.0)), 8.0, max_relative = 1e-14);
        assert_eq!(determinant(&SymMatrix::zeros(3)), 0.0);
        // indefinite: LU fallback
        assert_relative_eq!(determinant(&m2(1.0, 2.0, 1.0)), -3.0, max_relative = 1e-14);
    }

    #[test]
    fn solve_examples() {
        let v = vec![0.3, -1.2];
        assert_eq!(solve(&SymMatrix::identity(2), &v).unwrap(), v);
        let y = solve(&SymMatrix::from_diagonal(&[2.0, 4.0]), &[2.0, 4.0]).unwrap();
        assert_relative_eq!(y[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(y[1], 1.0, epsilon = 1e-15);
        let y = solve(&m2(4.0, 2.0, 3.0), &[6.0, 5.0]).unwrap();
        assert_relative_eq!(y[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(y[1], 1.0, epsilon = 1e-14);
        assert_eq!(solve(&m2(1.0, 2.0, 1.0), &[1.0, 1.0]), Err(AgrfError::NotPositiveDefinite));
    }

    #[test]
    fn symmetrize_examples() {
        let s = m2(1.0, 0.5, 2.0);
        assert_eq!(symmetrize(&s.to_rows()).unwrap(), s);
        let s = symmetrize(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(s.to_rows(), vec![vec![0.0, 0.5], vec![0.5, 0.0]]);
        let s = symmetrize(&[vec![1.0, 2.0], vec![4.0, 3.0]]).unwrap();
        assert_eq!(s.to_rows(), vec![vec![1.0, 3.0], vec![3.0, 3.0]]);
    }

    #[test]
    fn from_rows_rejects_asymmetric_and_ragged() {
        assert!(SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.5, 1.0]]).is_err());
        assert!(matches!(
            SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0]]),
            Err(AgrfError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn general_inverse_handles_indefinite() {
        let s = m2(1.0, 2.0, 1.0);
        let inv = inverse_general(&s).unwrap();
        let prod = matmul(2, s.as_slice(), inv.as_slice());
        for i in 0..2 {
            for j in 0..2 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(prod[i * 2 + j], e, epsilon = 1e-14);
            }
        }
        assert!(inverse_general(&m2(1.0, 1.0, 1.0)).is_none());
    }

    /// Determinant oracle: product of the roots of the characteristic
    /// polynomial, found independently of any factorization.
    fn char_poly_det(s: &SymMatrix) -> f64 {
        match s.dim() {
            1 => s.get(0, 0),
            2 => {
                // λ² − tr λ + det: roots by quadratic formula
                let tr = s.trace();
                let disc = (tr * tr - 4.0 * (s.get(0, 0) * s.get(1, 1) - s.get(0, 1).powi(2))).max(0.0);
                let l1 = 0.5 * (tr + disc.sqrt());
                let l2 = 0.5 * (tr - disc.sqrt());
                l1 * l2
            }
            3 => {
                // trigonometric solution of the symmetric 3x3 eigenproblem
                let a = |i, j| s.get(i, j);
                let p1 = a(0, 1).powi(2) + a(0, 2).powi(2) + a(1, 2).powi(2);
                let q = s.trace() / 3.0;
                let p2 = (a(0, 0) - q).powi(2) + (a(1, 1) - q).powi(2) + (a(2, 2) - q).powi(2) + 2.0 * p1;
                let p = (p2 / 6.0).sqrt();
                if p == 0.0 {
                    return q * q * q;
                }
                let b = s.shift_diagonal(-q).scale(1.0 / p);
                let b_det = b.get(0, 0) * (b.get(1, 1) * b.get(2, 2) - b.get(1, 2) * b.get(2, 1))
                    - b.get(0, 1) * (b.get(1, 0) * b.get(2, 2) - b.get(1, 2) * b.get(2, 0))
                    + b.get(0, 2) * (b.get(1, 0) * b.get(2, 1) - b.get(1, 1) * b.get(2, 0));
                let r = (b_det / 2.0).clamp(-1.0, 1.0);
                let phi = r.acos() / 3.0;
                let e1 = q + 2.0 * p * phi.cos();
                let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
                let e2 = 3.0 * q - e1 - e3;
                e1 * e2 * e3
            }
            _ => unreachable!(),
        }
    }

    fn random_pd(n: usize, entries: &[f64]) -> SymMatrix {
        // S = R Rᵀ + 1e-6 I
        let mut s = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = (0..n).map(|k| entries[i * n + k] * entries[j * n + k]).sum();
                s.set(i, j, v);
            }
        }
        s.shift_diagonal(1e-6)
    }

    proptest! {
        #[test]
        fn cholesky_reconstructs(n in 1usize..=5, entries in prop::collection::vec(-3.0f64..3.0, 25)) {
            let s = random_pd(n, &entries);
            let l = cholesky(&s).unwrap();
            let diff = l.reconstruct().sub(&s).frobenius_norm();
            prop_assert!(diff <= 1e-10 * s.frobenius_norm());
        }

        #[test]
        fn determinant_matches_eigen_product(n in 1usize..=3, entries in prop::collection::vec(-3.0f64..3.0, 9)) {
            let s = random_pd(n, &entries);
            let d = determinant(&s);
            let oracle = char_poly_det(&s);
            // the oracle loses relative accuracy when eigenvalues are tiny
            let scale = s.frobenius_norm().powi(n as i32);
            prop_assert!((d - oracle).abs() <= 1e-9 * oracle.abs().max(1e-6 * scale),
                "det {} oracle {}", d, oracle);
        }

        #[test]
        fn solve_recovers_rhs(n in 1usize..=5, entries in prop::collection::vec(-3.0f64..3.0, 25),
                              rhs in prop::collection::vec(-5.0f64..5.0, 5)) {
            let s = random_pd(n, &entries).shift_diagonal(0.1);
            let b = &rhs[..n];
            let y = solve(&s, b).unwrap();
            let back = s.mat_vec(&y);
            let err: f64 = back.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            prop_assert!(err <= 1e-9 * norm2(b).max(1e-12));
        }
    }
}
