//! Complex-matrix primitives: Hermitian log-determinants and eigenvalues,
//! Gram–Schmidt residuals, and circularly-symmetric Gaussian sampling.
//!
//! Factorizations are delegated to `nalgebra`; this module owns the input
//! validation and the tolerances the solvers rely on.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = nalgebra::Complex<f64>;

/// Absolute (scaled) tolerance for Hermitian symmetry and PSD checks.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Residuals with squared norm below this are treated as zero.
pub const RESIDUAL_FLOOR: f64 = 1e-12;

/// Dense complex matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: entries.len(),
            });
        }
        Self::from_matrix(DMatrix::from_row_iterator(rows, cols, entries))
    }

    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Shape("matrix has non-finite entries".into()));
        }
        Ok(ComplexMatrix(m))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        ComplexMatrix(DMatrix::identity(n, n))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        ComplexMatrix(m)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn row(&self, i: usize) -> Vec<C64> {
        self.0.row(i).iter().copied().collect()
    }

    pub fn to_row_major(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            out.extend(self.0.row(i).iter().copied());
        }
        out
    }

    pub fn as_matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn adjoint(&self) -> ComplexMatrix {
        ComplexMatrix(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// Squared Frobenius norm.
    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Validates a Hermitian PSD input and returns its symmetrized copy
/// `(A + A^H)/2`.
fn checked_hermitian_psd(a: &ComplexMatrix) -> Result<DMatrix<C64>> {
    let m = a.as_matrix();
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = max_abs(m).max(1.0);
    let asymmetry = max_abs(&(m - m.adjoint()));
    if asymmetry > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian { asymmetry });
    }
    let sym = hermitize(m);
    let lambda_min = hermitian_eigenvalues(&sym).into_iter().fold(f64::INFINITY, f64::min);
    if lambda_min < -HERMITIAN_TOL * scale {
        return Err(Error::Indefinite);
    }
    Ok(sym)
}

pub(crate) fn hermitize(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// `log2 det(I + A)` for a Hermitian matrix with `A > -I`, without checks.
pub(crate) fn logdet_i_plus_unchecked(a: &DMatrix<C64>) -> f64 {
    let n = a.nrows();
    let shifted = DMatrix::<C64>::identity(n, n) + a;
    // complex Cholesky does not reject indefinite input by itself; a valid
    // factor has a real positive diagonal
    let factor = Cholesky::new(shifted).filter(|ch| {
        let l = ch.l_dirty();
        (0..n).all(|i| l[(i, i)].re > 0.0 && l[(i, i)].im.abs() <= 1e-12 * l[(i, i)].re)
    });
    match factor {
        Some(ch) => {
            let l = ch.l_dirty();
            2.0 * (0..n).map(|i| l[(i, i)].re.ln()).sum::<f64>() / std::f64::consts::LN_2
        }
        None => {
            hermitian_eigenvalues(a)
                .iter()
                .map(|&l| l.max(0.0).ln_1p())
                .sum::<f64>()
                / std::f64::consts::LN_2
        }
    }
}

pub(crate) fn hermitian_eigenvalues(a: &DMatrix<C64>) -> Vec<f64> {
    SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect()
}

/// `log2 det(I + A)` for Hermitian positive semidefinite `A`, computed from a
/// Cholesky factorization of `I + A`.
pub fn logdet_i_plus(a: &ComplexMatrix) -> Result<f64> {
    let sym = checked_hermitian_psd(a)?;
    Ok(logdet_i_plus_unchecked(&sym).max(0.0))
}

/// Largest eigenvalue of a Hermitian positive semidefinite matrix.
pub fn hermitian_eigen_max(a: &ComplexMatrix) -> Result<f64> {
    let sym = checked_hermitian_psd(a)?;
    Ok(hermitian_eigenvalues(&sym)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Squared norm of `row` minus its projection onto the span of the
/// orthonormal `basis`, and the normalized residual when it is nonzero.
pub fn residual_after_projection(row: &[C64], basis: &[Vec<C64>]) -> Result<(f64, Option<Vec<C64>>)> {
    for b in basis {
        if b.len() != row.len() {
            return Err(Error::DimensionMismatch {
                expected: row.len(),
                found: b.len(),
            });
        }
    }
    let mut r = row.to_vec();
    // two passes of modified Gram-Schmidt
    for _ in 0..2 {
        for b in basis {
            project_out(&mut r, b);
        }
    }
    let norm_sq = vec_norm_sq(&r);
    if norm_sq < RESIDUAL_FLOOR {
        return Ok((norm_sq, None));
    }
    let inv = 1.0 / norm_sq.sqrt();
    let unit = r.iter().map(|z| z * inv).collect();
    Ok((norm_sq, Some(unit)))
}

/// `r <- r - <b, r> b` for unit `b`.
pub(crate) fn project_out(r: &mut [C64], b: &[C64]) {
    let coef: C64 = b.iter().zip(r.iter()).map(|(bi, ri)| bi.conj() * ri).sum();
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri -= coef * bi;
    }
}

pub(crate) fn vec_norm_sq(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Draws a `rows x cols` matrix of i.i.d. CN(0, 1) entries, filled in
/// row-major order.
pub fn sample_complex_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let entries: Vec<C64> = (0..rows * cols)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re * s, im * s)
        })
        .collect();
    ComplexMatrix(DMatrix::from_row_iterator(rows, cols, entries))
}
