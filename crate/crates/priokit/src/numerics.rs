//! Dense matrix utilities shared by the rest of the crate: SVD-based rank
//! decisions, the extended damped pseudoinverse, spectral radius, and the
//! residual evaluation for the KYP certificate equations.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("damping must be in [0, inf], got {0}")]
    InvalidDamping(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Tolerance used for every rank decision in the crate.
///
/// Singular values below `max(rel_tol * sigma_max, abs_tol)` are treated as
/// zero. The factorization and the projector hierarchy route through one
/// shared tolerance so that rank-dependent branches stay consistent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankTolerance {
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for RankTolerance {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
        }
    }
}

impl RankTolerance {
    pub fn new(rel_tol: f64, abs_tol: f64) -> Self {
        assert!(rel_tol > 0.0, "rel_tol must be positive");
        assert!(abs_tol >= 0.0, "abs_tol must be nonnegative");
        Self { rel_tol, abs_tol }
    }

    /// Cutoff below which a singular value counts as zero.
    pub fn threshold(&self, sigma_max: f64) -> f64 {
        (self.rel_tol * sigma_max).max(self.abs_tol)
    }
}

fn check_finite(m: &DMatrix<f64>) -> Result<(), NumericsError> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NumericsError::NonFinite)
    }
}

/// Thin singular value decomposition `A = U diag(sigma) V^T` with singular
/// values sorted in decreasing order. Columns of `U`/`V` belonging to zero
/// singular values are left as zero.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<f64>,
}

/// One-sided Jacobi SVD.
///
/// Rotates column pairs until all mutual inner products vanish, which gives
/// singular values to high relative accuracy and stays robust on matrices
/// with exactly repeated rows (where bidiagonalization-based solvers can
/// mis-converge). Intended for the small dense matrices this crate works
/// with; cost is O(min(p,n)^2 max(p,n)) per sweep.
pub fn jacobi_svd(a: &DMatrix<f64>) -> Svd {
    let (p, n) = a.shape();
    let mn = p.min(n);
    if mn == 0 {
        return Svd {
            u: DMatrix::zeros(p, 0),
            sigma: Vec::new(),
            v: DMatrix::zeros(n, 0),
        };
    }
    let transposed = p < n;
    let mut w = if transposed { a.transpose() } else { a.clone() };
    let cols = w.ncols();
    let mut right = DMatrix::identity(cols, cols);

    for _sweep in 0..60 {
        let mut worst = 0.0_f64;
        for i in 0..cols {
            for j in (i + 1)..cols {
                let alpha = w.column(i).norm_squared();
                let beta = w.column(j).norm_squared();
                let gamma = w.column(i).dot(&w.column(j));
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let rel = gamma.abs() / (alpha * beta).sqrt();
                worst = worst.max(rel);
                if rel <= 1e-15 {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..w.nrows() {
                    let wi = w[(r, i)];
                    let wj = w[(r, j)];
                    w[(r, i)] = c * wi - s * wj;
                    w[(r, j)] = s * wi + c * wj;
                }
                for r in 0..cols {
                    let vi = right[(r, i)];
                    let vj = right[(r, j)];
                    right[(r, i)] = c * vi - s * vj;
                    right[(r, j)] = s * vi + c * vj;
                }
            }
        }
        if worst <= 1e-15 {
            break;
        }
    }

    let mut order: Vec<usize> = (0..cols).collect();
    let norms: Vec<f64> = (0..cols).map(|i| w.column(i).norm()).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap());

    let mut left = DMatrix::zeros(w.nrows(), cols);
    let mut sigma = Vec::with_capacity(cols);
    let mut v = DMatrix::zeros(cols, cols);
    for (slot, &idx) in order.iter().enumerate() {
        let s = norms[idx];
        sigma.push(s);
        if s > 0.0 {
            let col = w.column(idx) / s;
            left.column_mut(slot).copy_from(&col);
        }
        v.column_mut(slot).copy_from(&right.column(idx));
    }
    if transposed {
        Svd {
            u: v,
            sigma,
            v: left,
        }
    } else {
        Svd {
            u: left,
            sigma,
            v,
        }
    }
}

/// Largest singular value of `m` (0 for an empty matrix).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Singular values of `m` in decreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    jacobi_svd(m).sigma
}

/// Moore-Penrose pseudoinverse by SVD truncation with the shared tolerance.
pub fn svd_pinv(m: &DMatrix<f64>, tol: RankTolerance) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(cols, rows);
    }
    let svd = jacobi_svd(m);
    let sigma_max = svd.sigma.first().copied().unwrap_or(0.0);
    let thr = tol.threshold(sigma_max);
    let mut pinv = DMatrix::zeros(cols, rows);
    for (i, &s) in svd.sigma.iter().enumerate() {
        if s > thr {
            let vi = svd.v.column(i);
            let ui = svd.u.column(i);
            // pinv += (1/s) v_i u_i^T
            for r in 0..cols {
                for c in 0..rows {
                    pinv[(r, c)] += vi[r] * ui[c] / s;
                }
            }
        }
    }
    pinv
}

/// Extended damped pseudoinverse `M^{+(c)}`.
///
/// Returns the Moore-Penrose pseudoinverse for `c = 0`, the Tikhonov form
/// `M^T (M M^T + c^2 I)^{-1}` for finite positive `c`, and the zero matrix of
/// transposed shape for `c = +inf`. Infinity is handled as a dedicated branch,
/// never as a large float.
pub fn damped_pinv(
    m: &DMatrix<f64>,
    c: f64,
    tol: RankTolerance,
) -> Result<DMatrix<f64>, NumericsError> {
    check_finite(m)?;
    if c.is_nan() || c < 0.0 {
        return Err(NumericsError::InvalidDamping(c));
    }
    let (rows, cols) = m.shape();
    if c.is_infinite() {
        return Ok(DMatrix::zeros(cols, rows));
    }
    if rows == 0 || cols == 0 {
        return Ok(DMatrix::zeros(cols, rows));
    }
    if c == 0.0 {
        return Ok(svd_pinv(m, tol));
    }
    let gram = m * m.transpose() + DMatrix::identity(rows, rows) * (c * c);
    let inv = match gram.clone().cholesky() {
        Some(chol) => chol.inverse(),
        None => gram
            .lu()
            .try_inverse()
            .ok_or(NumericsError::NonFinite)?,
    };
    Ok(m.transpose() * inv)
}

/// Number of singular values above the tolerance threshold.
pub fn numeric_rank(m: &DMatrix<f64>, tol: RankTolerance) -> Result<usize, NumericsError> {
    check_finite(m)?;
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0);
    }
    let sv = singular_values(m);
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let thr = tol.threshold(sigma_max);
    Ok(sv.iter().filter(|&&s| s > thr).count())
}

/// Maximum modulus of the eigenvalues of a square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64, NumericsError> {
    check_finite(m)?;
    if !m.is_square() {
        return Err(NumericsError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let eig = m.clone().complex_eigenvalues();
    Ok(eig.iter().fold(0.0_f64, |a, z| a.max(z.norm())))
}

/// Residuals of the KYP certificate equations.
///
/// Returns `(lyapunov_residual, gain_residual)` where the first is the
/// Frobenius norm of `X A_cl + A_cl^T X + R^T R + 2 theta X` and the second is
/// the Frobenius norm of `X B - K^T`. Both must be small for a certified gain.
pub fn kyp_residual(
    a_cl: &DMatrix<f64>,
    x: &DMatrix<f64>,
    r: &DMatrix<f64>,
    theta: f64,
    b: &DMatrix<f64>,
    k: &DMatrix<f64>,
) -> Result<(f64, f64), NumericsError> {
    let n = a_cl.nrows();
    if !a_cl.is_square() || x.shape() != (n, n) {
        return Err(NumericsError::DimensionMismatch(format!(
            "A_cl {}x{}, X {}x{}",
            a_cl.nrows(),
            a_cl.ncols(),
            x.nrows(),
            x.ncols()
        )));
    }
    if r.ncols() != n || b.nrows() != n || k.ncols() != n || b.ncols() != k.nrows() {
        return Err(NumericsError::DimensionMismatch(format!(
            "R {}x{}, B {}x{}, K {}x{}",
            r.nrows(),
            r.ncols(),
            b.nrows(),
            b.ncols(),
            k.nrows(),
            k.ncols()
        )));
    }
    for m in [a_cl, x, r, b, k] {
        check_finite(m)?;
    }
    let lyap = x * a_cl + a_cl.transpose() * x + r.transpose() * r + x * (2.0 * theta);
    let gain = x * b - k.transpose();
    Ok((lyap.norm(), gain.norm()))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &v| a.min(v))
}

/// Uniform sample in an axis-aligned box, written into a vector.
pub fn sample_box<R: rand::Rng>(rng: &mut R, bounds: &[(f64, f64)]) -> DVector<f64> {
    DVector::from_iterator(
        bounds.len(),
        bounds.iter().map(|&(lo, hi)| {
            if lo == hi {
                lo
            } else {
                rng.random_range(lo..hi)
            }
        }),
    )
}
