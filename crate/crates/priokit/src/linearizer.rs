//! Prioritized linearizing inputs.
//!
//! The canonical damped least-squares linearizer is provided in recursive and
//! closed form, the general block-triangular Gamma form on top of it, and a
//! brute-force lexicographic reference solver used as a testing oracle.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::factorization::PrioritizedDecomposition;
use crate::numerics::{damped_pinv, NumericsError, RankTolerance};

#[derive(Debug, Error)]
pub enum LinearizerError {
    #[error("expected {expected} damping values, got {got}")]
    DampingLength { expected: usize, got: usize },
    #[error("vector `{name}` has length {got}, expected {expected}")]
    VectorLength {
        name: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("Gamma block ({i},{j}) has shape {got_r}x{got_c}, expected {exp_r}x{exp_c}")]
    GammaShape {
        i: usize,
        j: usize,
        got_r: usize,
        got_c: usize,
        exp_r: usize,
        exp_c: usize,
    },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Per-task damping for the canonical linearizer.
///
/// The default ramp activates damping only when the smallest accepted singular
/// value of the diagonal block drops below `eps_sing`:
/// `lambda_i^2 = lambda_max^2 * max(0, 1 - (sigma_min_i / eps_sing)^2)`,
/// with `sigma_min_i = 0` whenever `rho_i < p_i`. An infinite entry disables
/// the task entirely.
#[derive(Debug, Clone, PartialEq)]
pub enum DampingSchedule {
    Zero,
    Ramp { lambda_max: f64, eps_sing: f64 },
    Fixed(Vec<f64>),
}

impl Default for DampingSchedule {
    fn default() -> Self {
        DampingSchedule::Ramp {
            lambda_max: 0.1,
            eps_sing: 0.05,
        }
    }
}

impl DampingSchedule {
    pub fn lambdas(&self, d: &PrioritizedDecomposition) -> Vec<f64> {
        let k = d.task_count();
        match self {
            DampingSchedule::Zero => vec![0.0; k],
            DampingSchedule::Fixed(values) => {
                assert_eq!(values.len(), k, "fixed damping must list one value per task");
                values.clone()
            }
            DampingSchedule::Ramp {
                lambda_max,
                eps_sing,
            } => {
                assert!(*lambda_max >= 0.0, "lambda_max must be nonnegative");
                assert!(*eps_sing > 0.0, "eps_sing must be positive");
                (0..k)
                .map(|i| {
                    let sigma_min = if d.rank(i) < d.task_dims()[i] {
                        0.0
                    } else {
                        crate::numerics::singular_values(d.l_block(i, i))
                            .last()
                            .copied()
                            .unwrap_or(0.0)
                    };
                    let ratio = sigma_min / eps_sing;
                    (lambda_max * lambda_max * (1.0 - ratio * ratio).max(0.0)).sqrt()
                })
                .collect()
            }
        }
    }
}

/// Decomposed linearizing input together with its per-task residuals.
#[derive(Debug, Clone)]
pub struct LinearizerResult {
    pub u_total: DVector<f64>,
    /// Orthogonal components `u_1, ..., u_k, N u_f`.
    pub u_parts: Vec<DVector<f64>>,
    /// Residuals `e_i = v_i - kappa_i - J_i u`, evaluated blockwise so that
    /// `e_i` never touches data of lower-priority tasks.
    pub residuals: Vec<DVector<f64>>,
    /// Block lower-triangular residual matrix mapping `v - kappa` to `e`.
    pub residual_matrix: DMatrix<f64>,
    /// Prioritized damped pseudoinverse, populated by the closed form.
    pub j_oplus: Option<DMatrix<f64>>,
}

fn check_lengths(
    d: &PrioritizedDecomposition,
    kappa: &DVector<f64>,
    v: &DVector<f64>,
    u_f: &DVector<f64>,
) -> Result<(), LinearizerError> {
    let p: usize = d.task_dims().iter().sum();
    if kappa.len() != p {
        return Err(LinearizerError::VectorLength {
            name: "kappa",
            got: kappa.len(),
            expected: p,
        });
    }
    if v.len() != p {
        return Err(LinearizerError::VectorLength {
            name: "v",
            got: v.len(),
            expected: p,
        });
    }
    if u_f.len() != d.input_dim() {
        return Err(LinearizerError::VectorLength {
            name: "u_f",
            got: u_f.len(),
            expected: d.input_dim(),
        });
    }
    Ok(())
}

fn check_lambda(d: &PrioritizedDecomposition, lambda: &[f64]) -> Result<(), LinearizerError> {
    if lambda.len() != d.task_count() {
        return Err(LinearizerError::DampingLength {
            expected: d.task_count(),
            got: lambda.len(),
        });
    }
    for &l in lambda {
        if l.is_nan() || l < 0.0 {
            return Err(NumericsError::InvalidDamping(l).into());
        }
    }
    Ok(())
}

fn task_offsets(d: &PrioritizedDecomposition) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(d.task_count());
    let mut acc = 0;
    for &p in d.task_dims() {
        offsets.push(acc);
        acc += p;
    }
    offsets
}

/// Damped pseudoinverses of the diagonal blocks, `W_i = L_ii^{+(lambda_i)}`.
fn diagonal_damped_pinvs(
    d: &PrioritizedDecomposition,
    lambda: &[f64],
    tol: RankTolerance,
) -> Result<Vec<DMatrix<f64>>, LinearizerError> {
    (0..d.task_count())
        .map(|i| damped_pinv(d.l_block(i, i), lambda[i], tol).map_err(Into::into))
        .collect()
}

/// Residuals evaluated from the block structure: `e_i` only reads data of
/// tasks `j <= i`, which keeps higher-priority residuals bit-stable under
/// changes to lower-priority commands and to `u_f`.
fn block_residuals(
    d: &PrioritizedDecomposition,
    kappa: &DVector<f64>,
    v: &DVector<f64>,
    u_parts: &[DVector<f64>],
) -> Vec<DVector<f64>> {
    let offsets = task_offsets(d);
    (0..d.task_count())
        .map(|i| {
            let p_i = d.task_dims()[i];
            let mut e = v.rows(offsets[i], p_i) - kappa.rows(offsets[i], p_i);
            for j in 0..=i {
                if d.rank(j) > 0 {
                    e -= d.l_block(i, j) * (d.q_block(j) * &u_parts[j]);
                }
            }
            e
        })
        .collect()
}

/// Unipotent block forward substitution: solves `(I_p + L_L W) T = RHS`
/// over the block row structure, where `(L_L W)_{ij} = L_ij W_j` for `j < i`.
fn forward_substitute(
    d: &PrioritizedDecomposition,
    w: &[DMatrix<f64>],
    rhs: &DMatrix<f64>,
) -> DMatrix<f64> {
    let offsets = task_offsets(d);
    let mut t = rhs.clone();
    for i in 0..d.task_count() {
        let p_i = d.task_dims()[i];
        let mut row = rhs.rows(offsets[i], p_i).into_owned();
        for j in 0..i {
            let coupled = d.l_block(i, j) * (&w[j] * t.rows(offsets[j], d.task_dims()[j]));
            row -= coupled;
        }
        t.rows_mut(offsets[i], p_i).copy_from(&row);
    }
    t
}

/// Canonical residual matrix `E = I_p - (L W) T` with `T = (I + L_L W)^{-1}`.
fn canonical_residual_matrix(
    d: &PrioritizedDecomposition,
    w: &[DMatrix<f64>],
    t: &DMatrix<f64>,
) -> DMatrix<f64> {
    let p: usize = d.task_dims().iter().sum();
    let offsets = task_offsets(d);
    let mut lw = DMatrix::zeros(p, p);
    for i in 0..d.task_count() {
        for j in 0..=i {
            if d.rank(j) > 0 {
                lw.view_mut(
                    (offsets[i], offsets[j]),
                    (d.task_dims()[i], d.task_dims()[j]),
                )
                .copy_from(&(d.l_block(i, j) * &w[j]));
            }
        }
    }
    DMatrix::identity(p, p) - lw * t
}

/// Canonical prioritized linearizer, recursive form.
///
/// `u_{1:i} = u_{1:i-1} + Q_i^T L_ii^{+(lambda_i)} (v_i - kappa_i - J_i u_{1:i-1})`
/// with the free component `N u_f` appended last.
pub fn canonical_linearizer_recursive(
    d: &PrioritizedDecomposition,
    kappa: &DVector<f64>,
    v: &DVector<f64>,
    u_f: &DVector<f64>,
    lambda: &[f64],
) -> Result<LinearizerResult, LinearizerError> {
    check_lengths(d, kappa, v, u_f)?;
    check_lambda(d, lambda)?;
    let tol = RankTolerance::default();
    let k = d.task_count();
    let offsets = task_offsets(d);
    let w = diagonal_damped_pinvs(d, lambda, tol)?;

    let mut u_acc = DVector::zeros(d.input_dim());
    let mut u_parts = Vec::with_capacity(k + 1);
    for i in 0..k {
        let p_i = d.task_dims()[i];
        let j_i = d.task_jacobian(i);
        let rhs = v.rows(offsets[i], p_i) - kappa.rows(offsets[i], p_i) - &j_i * &u_acc;
        let u_i = d.q_block(i).transpose() * (&w[i] * rhs);
        u_acc += &u_i;
        u_parts.push(u_i);
    }
    let u_free = d.projector(k) * u_f;
    let u_total = &u_acc + &u_free;
    u_parts.push(u_free);

    let residuals = block_residuals(d, kappa, v, &u_parts);
    let p: usize = d.task_dims().iter().sum();
    let t = forward_substitute(d, &w, &DMatrix::identity(p, p));
    let residual_matrix = canonical_residual_matrix(d, &w, &t);

    Ok(LinearizerResult {
        u_total,
        u_parts,
        residuals,
        residual_matrix,
        j_oplus: None,
    })
}

/// Canonical prioritized linearizer, closed form.
///
/// `u = J^{oplus(lambda)} (v - kappa) + N u_f` where the prioritized damped
/// pseudoinverse is `Q^T L_D^{+(lambda)} (I_p + L_L L_D^{+(lambda)})^{-1}`,
/// evaluated by block forward substitution over the unipotent triangular
/// factor rather than by a general inverse.
pub fn canonical_linearizer_closed(
    d: &PrioritizedDecomposition,
    kappa: &DVector<f64>,
    v: &DVector<f64>,
    u_f: &DVector<f64>,
    lambda: &[f64],
) -> Result<LinearizerResult, LinearizerError> {
    check_lengths(d, kappa, v, u_f)?;
    check_lambda(d, lambda)?;
    let tol = RankTolerance::default();
    let k = d.task_count();
    let offsets = task_offsets(d);
    let p: usize = d.task_dims().iter().sum();
    let w = diagonal_damped_pinvs(d, lambda, tol)?;

    // y = (I + L_L W)^{-1} (v - kappa), then u_i = Q_i^T W_i y_i
    let vk = v - kappa;
    let y = forward_substitute(d, &w, &DMatrix::from_column_slice(p, 1, vk.as_slice()));
    let mut u_parts = Vec::with_capacity(k + 1);
    let mut u_acc = DVector::zeros(d.input_dim());
    for i in 0..k {
        let y_i = y.view((offsets[i], 0), (d.task_dims()[i], 1)).into_owned();
        let s_i = &w[i] * DVector::from_column_slice(y_i.as_slice());
        let u_i = d.q_block(i).transpose() * s_i;
        u_acc += &u_i;
        u_parts.push(u_i);
    }
    let u_free = d.projector(k) * u_f;
    let u_total = &u_acc + &u_free;
    u_parts.push(u_free);

    let t = forward_substitute(d, &w, &DMatrix::identity(p, p));
    let residual_matrix = canonical_residual_matrix(d, &w, &t);

    // J^{oplus} = Q^T W T
    let mut wt = DMatrix::zeros(d.cumulative_rank(k), p);
    let mut row = 0;
    for i in 0..k {
        if d.rank(i) > 0 {
            let block = &w[i] * t.rows(offsets[i], d.task_dims()[i]);
            wt.rows_mut(row, d.rank(i)).copy_from(&block);
            row += d.rank(i);
        }
    }
    let mut q = DMatrix::zeros(d.cumulative_rank(k), d.input_dim());
    let mut row = 0;
    for i in 0..k {
        if d.rank(i) > 0 {
            q.rows_mut(row, d.rank(i)).copy_from(d.q_block(i));
            row += d.rank(i);
        }
    }
    let j_oplus = q.transpose() * wt;

    let residuals = block_residuals(d, kappa, v, &u_parts);
    Ok(LinearizerResult {
        u_total,
        u_parts,
        residuals,
        residual_matrix,
        j_oplus: Some(j_oplus),
    })
}

/// Block lower-triangular gain matrix for the general linearizer form.
#[derive(Debug, Clone)]
pub struct GammaForm {
    /// blocks[i][j] with shape p_i x p_j, j <= i.
    blocks: Vec<Vec<DMatrix<f64>>>,
}

impl GammaForm {
    pub fn new(
        blocks: Vec<Vec<DMatrix<f64>>>,
        task_dims: &[usize],
    ) -> Result<Self, LinearizerError> {
        for (i, row) in blocks.iter().enumerate() {
            if row.len() != i + 1 {
                return Err(LinearizerError::GammaShape {
                    i,
                    j: row.len(),
                    got_r: 0,
                    got_c: 0,
                    exp_r: task_dims[i],
                    exp_c: 0,
                });
            }
            for (j, b) in row.iter().enumerate() {
                if b.shape() != (task_dims[i], task_dims[j]) {
                    return Err(LinearizerError::GammaShape {
                        i,
                        j,
                        got_r: b.nrows(),
                        got_c: b.ncols(),
                        exp_r: task_dims[i],
                        exp_c: task_dims[j],
                    });
                }
            }
        }
        Ok(Self { blocks })
    }

    pub fn zero(task_dims: &[usize]) -> Self {
        let blocks = (0..task_dims.len())
            .map(|i| {
                (0..=i)
                    .map(|j| DMatrix::zeros(task_dims[i], task_dims[j]))
                    .collect()
            })
            .collect();
        Self { blocks }
    }

    pub fn block(&self, i: usize, j: usize) -> &DMatrix<f64> {
        &self.blocks[i][j]
    }

    /// Residual matrix `E = I_p - L L_D^T Gamma` assembled from the block
    /// formulas `E_ii = I - L_ii L_ii^T Gamma_ii` and
    /// `E_ij = -sum_{a=j..i} L_ia L_aa^T Gamma_aj`.
    pub fn residual_matrix(&self, d: &PrioritizedDecomposition) -> DMatrix<f64> {
        let p: usize = d.task_dims().iter().sum();
        let offsets = task_offsets(d);
        let mut e = DMatrix::identity(p, p);
        for i in 0..d.task_count() {
            for j in 0..=i {
                let mut block = DMatrix::zeros(d.task_dims()[i], d.task_dims()[j]);
                for a in j..=i {
                    block += d.l_block(i, a) * d.l_block(a, a).transpose() * &self.blocks[a][j];
                }
                let mut view = e.view_mut(
                    (offsets[i], offsets[j]),
                    (d.task_dims()[i], d.task_dims()[j]),
                );
                view -= block;
            }
        }
        e
    }

    /// Check the regularity conditions on the diagonal blocks at a given
    /// decomposition: `rank(L_ii L_ii^T Gamma_ii) = rho_i` and positive
    /// semidefiniteness of the symmetric part.
    pub fn satisfies_diagonal_conditions(
        &self,
        d: &PrioritizedDecomposition,
        tol: RankTolerance,
    ) -> bool {
        (0..d.task_count()).all(|i| {
            let m = d.l_block(i, i) * d.l_block(i, i).transpose() * &self.blocks[i][i];
            let rank_ok = crate::numerics::numeric_rank(&m, tol)
                .map(|r| r == d.rank(i))
                .unwrap_or(false);
            let scale = m.norm().max(1.0);
            rank_ok && crate::numerics::min_symmetric_eigenvalue(&m) >= -1e-10 * scale
        })
    }
}

/// Canonical choice of Gamma reproducing the closed-form canonical linearizer:
/// `Gamma = diag(L_ii^{*(lambda_i)}) (I_p + L_L L_D^{+(lambda)})^{-1}`.
pub fn canonical_gamma(
    d: &PrioritizedDecomposition,
    lambda: &[f64],
) -> Result<GammaForm, LinearizerError> {
    check_lambda(d, lambda)?;
    let tol = RankTolerance::default();
    let k = d.task_count();
    let p: usize = d.task_dims().iter().sum();
    let offsets = task_offsets(d);
    let w = diagonal_damped_pinvs(d, lambda, tol)?;
    let t = forward_substitute(d, &w, &DMatrix::identity(p, p));

    // L_ii^{*(lambda)} = (L_ii L_ii^T + lambda^2 I)^+ (zero when lambda = inf).
    // The lambda = 0 case inverts through the SVD of L_ii itself: truncating
    // the gram matrix directly would square the spectrum and shift the
    // effective rank cutoff from rel_tol to sqrt(rel_tol).
    let mut star = Vec::with_capacity(k);
    for i in 0..k {
        let p_i = d.task_dims()[i];
        let block = if lambda[i].is_infinite() {
            DMatrix::zeros(p_i, p_i)
        } else if lambda[i] > 0.0 {
            let gram = d.l_block(i, i) * d.l_block(i, i).transpose()
                + DMatrix::identity(p_i, p_i) * (lambda[i] * lambda[i]);
            gram.clone()
                .cholesky()
                .map(|c| c.inverse())
                .or_else(|| gram.lu().try_inverse())
                .ok_or(NumericsError::NonFinite)?
        } else {
            let svd = crate::numerics::jacobi_svd(d.l_block(i, i));
            let sigma_max = svd.sigma.first().copied().unwrap_or(0.0);
            let thr = tol.threshold(sigma_max);
            let mut block = DMatrix::zeros(p_i, p_i);
            for (l, &s) in svd.sigma.iter().enumerate() {
                if s > thr {
                    block += svd.u.column(l) * svd.u.column(l).transpose() / (s * s);
                }
            }
            block
        };
        star.push(block);
    }

    let blocks = (0..k)
        .map(|i| {
            (0..=i)
                .map(|j| &star[i] * t.view((offsets[i], offsets[j]), (d.task_dims()[i], d.task_dims()[j])))
                .collect()
        })
        .collect();
    GammaForm::new(blocks, d.task_dims())
}

/// General prioritized linearizer `u = Q^T L_D^T Gamma (v - kappa) + N u_f`.
pub fn gamma_linearizer(
    d: &PrioritizedDecomposition,
    kappa: &DVector<f64>,
    v: &DVector<f64>,
    u_f: &DVector<f64>,
    gamma: &GammaForm,
) -> Result<LinearizerResult, LinearizerError> {
    check_lengths(d, kappa, v, u_f)?;
    for (i, row) in gamma.blocks.iter().enumerate() {
        for (j, b) in row.iter().enumerate() {
            if b.shape() != (d.task_dims()[i], d.task_dims()[j]) {
                return Err(LinearizerError::GammaShape {
                    i,
                    j,
                    got_r: b.nrows(),
                    got_c: b.ncols(),
                    exp_r: d.task_dims()[i],
                    exp_c: d.task_dims()[j],
                });
            }
        }
    }
    let k = d.task_count();
    let offsets = task_offsets(d);
    let vk = v - kappa;

    let mut u_parts = Vec::with_capacity(k + 1);
    let mut u_acc = DVector::zeros(d.input_dim());
    for i in 0..k {
        let mut t_i = DVector::zeros(d.task_dims()[i]);
        for j in 0..=i {
            t_i += gamma.block(i, j) * vk.rows(offsets[j], d.task_dims()[j]);
        }
        let u_i = d.q_block(i).transpose() * (d.l_block(i, i).transpose() * t_i);
        u_acc += &u_i;
        u_parts.push(u_i);
    }
    let u_free = d.projector(k) * u_f;
    let u_total = &u_acc + &u_free;
    u_parts.push(u_free);

    let residual_matrix = gamma.residual_matrix(d);
    let residuals = block_residuals(d, kappa, v, &u_parts);
    Ok(LinearizerResult {
        u_total,
        u_parts,
        residuals,
        residual_matrix,
        j_oplus: None,
    })
}

/// Independent lexicographic least-squares reference solver (lambda = 0).
///
/// Sequentially minimizes `||v_i - kappa_i - J_i u||^2` over the orthogonal
/// component in the range of `P_i`, using plain SVD pseudoinverses of
/// `J_i P_i`. Returns the minimizer and the per-level minimal objective
/// values. This path deliberately avoids the LQ-block formulas so it can
/// serve as a ground-truth oracle for the canonical linearizer.
pub fn lex_oracle(
    d: &PrioritizedDecomposition,
    kappa: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<(DVector<f64>, Vec<f64>), LinearizerError> {
    check_lengths(d, kappa, v, &DVector::zeros(d.input_dim()))?;
    let offsets = task_offsets(d);
    let mut u = DVector::zeros(d.input_dim());
    let mut objectives = Vec::with_capacity(d.task_count());
    for i in 0..d.task_count() {
        let p_i = d.task_dims()[i];
        let j_i = d.task_jacobian(i);
        let m_i = &j_i * d.projector(i);
        let rhs = v.rows(offsets[i], p_i) - kappa.rows(offsets[i], p_i) - &j_i * &u;
        let pinv = crate::numerics::svd_pinv(&m_i, RankTolerance::default());
        u += pinv * rhs;
        let e = v.rows(offsets[i], p_i) - kappa.rows(offsets[i], p_i) - &j_i * &u;
        objectives.push(e.norm_squared());
    }
    Ok((u, objectives))
}
