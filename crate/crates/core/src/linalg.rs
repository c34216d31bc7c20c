//! Small dense linear algebra.
//!
//! Everything in this crate works on matrices of at most a few dozen rows,
//! so a row-major `Vec<f64>` with O(n³) kernels is all that is needed. The
//! symmetric eigensolver is cyclic Jacobi, which is unconditionally stable
//! for symmetric input and accurate to working precision at these sizes.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use thiserror::Error;

/// Absolute asymmetry (relative to `1 + max|a|`) above which a matrix
/// passed to a symmetric-only routine is rejected.
pub const SYMMETRY_TOL: f64 = 1e-8;

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_REL_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("Jacobi iteration did not converge in {0} sweeps")]
    NoConvergence(usize),
}

/// Dense row-major real matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major data.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch {
                expected: format!("{} entries", rows * cols),
                got: format!("{} entries", data.len()),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a slice of equally long rows.
    ///
    /// Panics on ragged input; intended for literals.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), ncols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: nrows,
            cols: ncols,
            data,
        }
    }

    pub fn column(v: &[f64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn row(v: &[f64]) -> Self {
        Self {
            rows: 1,
            cols: v.len(),
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    /// Largest absolute entry (0 for an empty matrix).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest |a_ij - a_ji|.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// `(a + aᵀ) / 2`.
    pub fn symmetrized(&self) -> Self {
        let mut s = self.clone();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix, LinalgError> {
        if self.cols != rhs.rows {
            return Err(LinalgError::DimensionMismatch {
                expected: format!("{} rows", self.cols),
                got: format!("{} rows", rhs.rows),
            });
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// `self * v` for a plain vector.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// `vᵀ self v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        assert!(self.is_square() && self.rows == v.len());
        let mut acc = 0.0;
        for i in 0..self.rows {
            let mut row = 0.0;
            for j in 0..self.cols {
                row += self[(i, j)] * v[j];
            }
            acc += v[i] * row;
        }
        acc
    }

    /// Copies `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Matrix) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols);
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    /// Largest absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn check_square_finite(&self) -> Result<(), LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        if !self.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        Ok(())
    }

    /// Validates a symmetric-only input and returns its symmetrized copy.
    pub fn checked_symmetric(&self) -> Result<Matrix, LinalgError> {
        self.check_square_finite()?;
        let asym = self.asymmetry();
        if asym > SYMMETRY_TOL * (1.0 + self.max_abs()) {
            return Err(LinalgError::Asymmetric(asym));
        }
        Ok(self.symmetrized())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|j| format!("{:>12.5e}", self[(i, j)]))
                .collect();
            writeln!(f, "  {}", row.join(" "))?;
        }
        write!(f, "]")
    }
}

fn zip_with(a: &Matrix, b: &Matrix, op: impl Fn(f64, f64) -> f64) -> Matrix {
    assert_eq!(
        (a.rows, a.cols),
        (b.rows, b.cols),
        "elementwise op on mismatched shapes"
    );
    Matrix {
        rows: a.rows,
        cols: a.cols,
        data: a.data.iter().zip(&b.data).map(|(x, y)| op(*x, *y)).collect(),
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        zip_with(self, rhs, |a, b| a + b)
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        zip_with(self, rhs, |a, b| a - b)
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    /// Panics on incompatible shapes; use [`Matrix::matmul`] for a checked product.
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs).expect("matrix product shape mismatch")
    }
}

/// Eigendecomposition `a = V diag(values) Vᵀ` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in the order of `values`.
    pub vectors: Matrix,
}

impl SymEigen {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(f64::INFINITY)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NEG_INFINITY)
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// The input is symmetrized first; asymmetry beyond [`SYMMETRY_TOL`] is an
/// error. Sweeps stop once the off-diagonal Frobenius norm falls below
/// `1e-12 ‖a‖_F`.
pub fn sym_eigen(a: &Matrix) -> Result<SymEigen, LinalgError> {
    let mut m = a.checked_symmetric()?;
    let n = m.rows;
    let mut v = Matrix::identity(n);
    let threshold = JACOBI_REL_TOL * m.frobenius();

    let off_norm = |m: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[(i, j)] * m[(i, j)];
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off_norm(&m) <= threshold;
    let mut sweep = 0;
    while !converged && sweep < JACOBI_MAX_SWEEPS {
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                // Rotation angle that annihilates m[p][q].
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        sweep += 1;
        converged = off_norm(&m) <= threshold;
    }
    if !converged {
        return Err(LinalgError::NoConvergence(JACOBI_MAX_SWEEPS));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, dst)] = v[(k, src)];
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &Matrix) -> Result<f64, LinalgError> {
    sym_eigen(a).map(|e| e.min())
}

/// Cholesky factor `L` with `L Lᵀ = a + shift·I`.
///
/// Returns `Ok(None)` when a pivot is not strictly positive; that outcome
/// is an answer, not a failure.
pub fn cholesky(a: &Matrix, shift: f64) -> Result<Option<Matrix>, LinalgError> {
    let a = a.checked_symmetric()?;
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)] + shift;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Ok(None);
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(Some(l))
}

/// Solves `L Lᵀ x = rhs` given the lower Cholesky factor.
pub fn cholesky_solve(l: &Matrix, rhs: &Matrix) -> Matrix {
    let n = l.rows;
    assert_eq!(rhs.rows, n);
    let mut x = rhs.clone();
    for c in 0..rhs.cols {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in (i + 1)..n {
                s -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// Solves `a x = rhs` for symmetric positive definite `a`.
pub fn solve_pd(a: &Matrix, rhs: &Matrix) -> Result<Matrix, LinalgError> {
    if rhs.rows != a.rows {
        return Err(LinalgError::DimensionMismatch {
            expected: format!("{} rows", a.rows),
            got: format!("{} rows", rhs.rows),
        });
    }
    if !rhs.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let l = cholesky(a, 0.0)?.ok_or(LinalgError::NotPositiveDefinite)?;
    Ok(cholesky_solve(&l, rhs))
}

/// Inverse of a symmetric positive definite matrix, symmetrized.
pub fn inverse_pd(a: &Matrix) -> Result<Matrix, LinalgError> {
    solve_pd(a, &Matrix::identity(a.rows)).map(|x| x.symmetrized())
}

/// `L⁻¹ a L⁻ᵀ` for a lower-triangular `L`, symmetrized.
pub fn congruence_solve(l: &Matrix, a: &Matrix) -> Matrix {
    let n = l.rows;
    assert_eq!(a.rows, n);
    assert_eq!(a.cols, n);
    // X = L⁻¹ a, column by column.
    let mut x = a.clone();
    for c in 0..n {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    // G = L⁻¹ Xᵀ, i.e. (X L⁻ᵀ)ᵀ; X L⁻ᵀ is symmetric in exact arithmetic.
    let mut g = x.transpose();
    for c in 0..n {
        for i in 0..n {
            let mut s = g[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * g[(k, c)];
            }
            g[(i, c)] = s / l[(i, i)];
        }
    }
    g.symmetrized()
}

/// Householder QR of a tall matrix, kept in factored form.
#[derive(Debug, Clone)]
pub struct Qr {
    /// Householder vectors below the diagonal, `R` on and above it.
    packed: Matrix,
    /// Scalars `τ` of each reflector `I - τ v vᵀ` (with `v₀ = 1`).
    tau: Vec<f64>,
}

impl Qr {
    /// Factors `a` (rows ≥ cols). Fails on non-finite input or when a column
    /// is exactly dependent on the previous ones.
    pub fn new(a: &Matrix) -> Result<Self, LinalgError> {
        if a.rows < a.cols {
            return Err(LinalgError::DimensionMismatch {
                expected: format!("at least {} rows", a.cols),
                got: format!("{} rows", a.rows),
            });
        }
        if !a.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let (m, n) = (a.rows, a.cols);
        let mut p = a.clone();
        let mut tau = vec![0.0; n];
        for j in 0..n {
            let norm = (j..m).map(|i| p[(i, j)] * p[(i, j)]).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(LinalgError::NotPositiveDefinite);
            }
            let alpha = if p[(j, j)] > 0.0 { -norm } else { norm };
            let v0 = p[(j, j)] - alpha;
            for i in (j + 1)..m {
                p[(i, j)] /= v0;
            }
            tau[j] = -v0 / alpha;
            p[(j, j)] = alpha;
            for c in (j + 1)..n {
                let mut s = p[(j, c)];
                for i in (j + 1)..m {
                    s += p[(i, j)] * p[(i, c)];
                }
                s *= tau[j];
                p[(j, c)] -= s;
                for i in (j + 1)..m {
                    p[(i, c)] -= s * p[(i, j)];
                }
            }
        }
        Ok(Self { packed: p, tau })
    }

    pub fn cols(&self) -> usize {
        self.packed.cols
    }

    /// `Qᵀ b`, truncated to the first `cols` entries.
    pub fn qt_mul(&self, b: &[f64]) -> Vec<f64> {
        let (m, n) = (self.packed.rows, self.packed.cols);
        assert_eq!(b.len(), m);
        let mut y = b.to_vec();
        for j in 0..n {
            let mut s = y[j];
            for i in (j + 1)..m {
                s += self.packed[(i, j)] * y[i];
            }
            s *= self.tau[j];
            y[j] -= s;
            for i in (j + 1)..m {
                y[i] -= s * self.packed[(i, j)];
            }
        }
        y.truncate(n);
        y
    }

    /// Solves `R x = b`.
    pub fn solve_r(&self, b: &[f64]) -> Vec<f64> {
        let n = self.cols();
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.packed[(i, k)] * x[k];
            }
            x[i] = s / self.packed[(i, i)];
        }
        x
    }

    /// Solves `Rᵀ x = b`.
    pub fn solve_rt(&self, b: &[f64]) -> Vec<f64> {
        let n = self.cols();
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.packed[(k, i)] * x[k];
            }
            x[i] = s / self.packed[(i, i)];
        }
        x
    }

    /// Least-squares solution of `min ‖a x - b‖`.
    pub fn least_squares(&self, b: &[f64]) -> Vec<f64> {
        self.solve_r(&self.qt_mul(b))
    }

    pub fn r(&self) -> Matrix {
        let n = self.cols();
        let mut r = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                r[(i, j)] = self.packed[(i, j)];
            }
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn qr_reproduces_normal_matrix_and_least_squares() {
        let a = Matrix::from_rows(&[
            [1.0, 2.0, 0.5],
            [0.0, 1.0, -1.0],
            [3.0, -1.0, 2.0],
            [1.0, 1.0, 1.0],
            [-2.0, 0.5, 0.0],
        ]);
        let qr = Qr::new(&a).unwrap();
        let r = qr.r();
        let ata = &a.transpose() * &a;
        assert!((&r.transpose() * &r).max_abs_diff(&ata) < 1e-12);
        let b = [1.0, -2.0, 0.5, 3.0, 1.0];
        let x = qr.least_squares(&b);
        // Normal equations hold at the least-squares solution.
        let resid: Vec<f64> = (0..5).map(|i| a.mul_vec(&x)[i] - b[i]).collect();
        let normal = a.transpose().mul_vec(&resid);
        assert!(normal.iter().all(|v| v.abs() < 1e-12));
        let y = qr.solve_rt(&[1.0, 2.0, 3.0]);
        let back = r.transpose().mul_vec(&y);
        assert!((back[0] - 1.0).abs() < 1e-12 && (back[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn qr_rejects_short_and_dependent() {
        assert!(Qr::new(&Matrix::zeros(2, 3)).is_err());
        let a = Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0]]);
        assert!(Qr::new(&a).is_err());
    }

    #[test]
    fn congruence_matches_explicit_inverse() {
        let f = Matrix::from_rows(&[[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]]);
        let l = cholesky(&f, 0.0).unwrap().unwrap();
        let c = Matrix::from_rows(&[[1.0, 2.0, 0.0], [2.0, -1.0, 1.0], [0.0, 1.0, 0.5]]);
        let g = congruence_solve(&l, &c);
        let inv = inverse_pd(&f).unwrap();
        // tr(L⁻¹ C L⁻ᵀ) = tr(F⁻¹ C)
        assert_abs_diff_eq!(g.trace(), (&inv * &c).trace(), epsilon = 1e-12);
        let back = &(&l * &g) * &l.transpose();
        assert!(back.max_abs_diff(&c) < 1e-12);
    }

    fn check_decomposition(a: &Matrix, e: &SymEigen) {
        let n = a.rows();
        let vt_v = &e.vectors.transpose() * &e.vectors;
        assert!(vt_v.max_abs_diff(&Matrix::identity(n)) <= 1e-10);
        let av = a * &e.vectors;
        let vl = &e.vectors * &Matrix::from_diag(&e.values);
        assert!(av.max_abs_diff(&vl) <= 1e-8 * (1.0 + a.max_abs()));
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eigen_of_diagonal_is_sorted_diagonal() {
        let a = Matrix::from_diag(&[3.0, 1.0, 2.0]);
        let e = sym_eigen(&a).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        check_decomposition(&a, &e);
    }

    #[test]
    fn eigen_of_identity() {
        let e = sym_eigen(&Matrix::identity(4)).unwrap();
        assert_eq!(e.values, vec![1.0; 4]);
    }

    #[test]
    fn eigen_of_swap_matrix() {
        // char. polynomial λ² - 1
        let a = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]);
        let e = sym_eigen(&a).unwrap();
        assert_abs_diff_eq!(e.values[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-14);
        check_decomposition(&a, &e);
    }

    #[test]
    fn eigen_rejects_bad_input() {
        let rect = Matrix::zeros(2, 3);
        assert!(matches!(
            sym_eigen(&rect),
            Err(LinalgError::NotSquare { .. })
        ));
        let mut nan = Matrix::identity(2);
        nan[(0, 1)] = f64::NAN;
        assert_eq!(sym_eigen(&nan).unwrap_err(), LinalgError::NonFinite);
        let asym = Matrix::from_rows(&[[1.0, 1.0], [0.0, 1.0]]);
        assert!(matches!(
            sym_eigen(&asym),
            Err(LinalgError::Asymmetric(_))
        ));
    }

    #[test]
    fn eigen_tolerates_tiny_asymmetry() {
        let a = Matrix::from_rows(&[[2.0, 1.0 + 1e-13], [1.0, 2.0]]);
        let e = sym_eigen(&a).unwrap();
        assert_abs_diff_eq!(e.values[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.values[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn cholesky_examples() {
        let l = cholesky(&Matrix::identity(3), 0.0).unwrap().unwrap();
        assert_eq!(l, Matrix::identity(3));
        let l = cholesky(&Matrix::from_diag(&[4.0, 9.0]), 0.0)
            .unwrap()
            .unwrap();
        assert_eq!(l, Matrix::from_diag(&[2.0, 3.0]));
        assert!(cholesky(&Matrix::from_diag(&[-1.0, 1.0]), 0.0)
            .unwrap()
            .is_none());
        // shift rescues an indefinite diagonal
        assert!(cholesky(&Matrix::from_diag(&[-1.0, 1.0]), 2.0)
            .unwrap()
            .is_some());
    }

    #[test]
    fn cholesky_fails_on_non_finite() {
        let mut a = Matrix::identity(2);
        a[(1, 1)] = f64::INFINITY;
        assert_eq!(cholesky(&a, 0.0).unwrap_err(), LinalgError::NonFinite);
    }

    #[test]
    fn solve_pd_examples() {
        let b = Matrix::column(&[1.5, -2.0, 0.25]);
        assert_eq!(solve_pd(&Matrix::identity(3), &b).unwrap(), b);
        let x = solve_pd(&Matrix::from_diag(&[2.0, 4.0]), &Matrix::column(&[2.0, 4.0])).unwrap();
        assert!(x.max_abs_diff(&Matrix::column(&[1.0, 1.0])) <= 1e-15);
        assert_eq!(
            solve_pd(&Matrix::from_diag(&[1.0, -1.0]), &Matrix::column(&[1.0, 1.0])).unwrap_err(),
            LinalgError::NotPositiveDefinite
        );
    }

    #[test]
    fn solve_pd_recovers_known_solution() {
        // a = G Gᵀ + I is PD; rhs built from a known x*.
        let g = Matrix::from_rows(&[
            [0.3, -1.2, 0.5, 2.0, 0.1],
            [1.1, 0.4, -0.7, 0.0, 0.9],
            [-0.2, 0.8, 1.5, -1.0, 0.3],
            [0.6, 0.0, -0.4, 1.2, -1.1],
            [0.9, -0.5, 0.2, 0.7, 1.4],
        ]);
        let a = &(&g * &g.transpose()) + &Matrix::identity(5);
        let x_star = Matrix::column(&[1.0, -2.0, 0.5, 3.0, -0.75]);
        let rhs = &a * &x_star;
        let x = solve_pd(&a, &rhs).unwrap();
        assert!(x.max_abs_diff(&x_star) <= 1e-12 * 10.0);
        let resid = &(&a * &x) - &rhs;
        assert!(resid.max_abs() <= 1e-9 * (1.0 + rhs.max_abs()));
    }

    fn symmetric_matrix(max_n: usize) -> impl Strategy<Value = Matrix> {
        (1..=max_n).prop_flat_map(|n| {
            proptest::collection::vec(-10.0f64..10.0, n * n).prop_map(move |d| {
                let m = Matrix::from_vec(n, n, d).unwrap();
                m.symmetrized()
            })
        })
    }

    proptest! {
        #[test]
        fn eigen_invariants_hold(a in symmetric_matrix(8)) {
            let e = sym_eigen(&a).unwrap();
            check_decomposition(&a, &e);
            let tr = a.trace();
            let sum: f64 = e.values.iter().sum();
            prop_assert!((sum - tr).abs() <= 1e-9 * (1.0 + tr.abs()));
        }

        #[test]
        fn cholesky_agrees_with_eigen_on_definiteness(a in symmetric_matrix(6)) {
            let min = sym_eigen(&a).unwrap().min();
            let chol_ok = cholesky(&a, 1e-12 * a.max_abs()).unwrap().is_some();
            // Outside the 1e-10 band the two classifications must agree.
            if min > 1e-10 * (1.0 + a.max_abs()) {
                prop_assert!(chol_ok);
            } else if min < -1e-10 * (1.0 + a.max_abs()) {
                prop_assert!(!chol_ok);
            }
        }

        #[test]
        fn solve_then_multiply_is_identity(
            a in symmetric_matrix(6),
            seed in proptest::collection::vec(-5.0f64..5.0, 6),
        ) {
            let n = a.rows();
            let pd = &(&a * &a.transpose()) + &Matrix::identity(n);
            let b = Matrix::column(&seed[..n]);
            let x = solve_pd(&pd, &b).unwrap();
            let back = &pd * &x;
            prop_assert!(back.max_abs_diff(&b) <= 1e-9 * (1.0 + b.max_abs()));
        }
    }
}
