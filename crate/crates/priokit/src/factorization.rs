//! Prioritized LQ factorization of a stacked task Jacobian and the projector
//! hierarchy built on top of it.
//!
//! The stacked Jacobian `J = col(J_1, ..., J_k)` is factored as `J = L_e Q_e`
//! with a block lower-triangular `L_e` and row-orthonormal blocks `Q_i`, rows
//! processed strictly in priority order. Rows whose residual falls below the
//! shared rank tolerance are dropped, which is where the per-task ranks
//! `rho_i` come from. The final block `Q_{k+1}` spans the null space of `J`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::numerics::{NumericsError, RankTolerance};

#[derive(Debug, Error)]
pub enum FactorizationError {
    #[error("task stack is empty")]
    EmptyStack,
    #[error("task {task} has {got} columns, expected {expected}")]
    ColumnMismatch {
        task: usize,
        got: usize,
        expected: usize,
    },
    #[error("task {0} has zero rows")]
    EmptyTask(usize),
    #[error("task index {index} out of range (k = {k})")]
    TaskIndexOutOfRange { index: usize, k: usize },
    #[error("input vector has length {got}, expected {expected}")]
    InputLength { got: usize, expected: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Ordered task Jacobians `J_1, ..., J_k` sharing the input dimension `m`.
#[derive(Debug, Clone)]
pub struct TaskJacobianStack {
    blocks: Vec<DMatrix<f64>>,
}

impl TaskJacobianStack {
    pub fn new(blocks: Vec<DMatrix<f64>>) -> Result<Self, FactorizationError> {
        if blocks.is_empty() {
            return Err(FactorizationError::EmptyStack);
        }
        let m = blocks[0].ncols();
        for (i, b) in blocks.iter().enumerate() {
            if b.nrows() == 0 {
                return Err(FactorizationError::EmptyTask(i));
            }
            if b.ncols() != m {
                return Err(FactorizationError::ColumnMismatch {
                    task: i,
                    got: b.ncols(),
                    expected: m,
                });
            }
            if !b.iter().all(|v| v.is_finite()) {
                return Err(NumericsError::NonFinite.into());
            }
        }
        Ok(Self { blocks })
    }

    /// Split a stacked `p x m` matrix into task blocks of the given row counts.
    pub fn from_stacked(j: &DMatrix<f64>, task_dims: &[usize]) -> Result<Self, FactorizationError> {
        let total: usize = task_dims.iter().sum();
        if total != j.nrows() {
            return Err(FactorizationError::InputLength {
                got: j.nrows(),
                expected: total,
            });
        }
        let mut blocks = Vec::with_capacity(task_dims.len());
        let mut row = 0;
        for &p in task_dims {
            blocks.push(j.rows(row, p).into_owned());
            row += p;
        }
        Self::new(blocks)
    }

    pub fn task_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn input_dim(&self) -> usize {
        self.blocks[0].ncols()
    }

    pub fn task_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.nrows()).collect()
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn stacked(&self) -> DMatrix<f64> {
        let m = self.input_dim();
        let p: usize = self.blocks.iter().map(|b| b.nrows()).sum();
        let mut out = DMatrix::zeros(p, m);
        let mut row = 0;
        for b in &self.blocks {
            out.rows_mut(row, b.nrows()).copy_from(b);
            row += b.nrows();
        }
        out
    }
}

/// Pointwise regularity of the stack: which tasks keep full row rank and
/// which priority prefixes keep full cumulative rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegularityReport {
    pub per_task_full_rank: Vec<bool>,
    pub cumulative_full_rank: Vec<bool>,
}

/// Result of the prioritized LQ factorization.
///
/// Blocks with `rho_j = 0` are stored with a zero dimension so that all
/// downstream block algebra works without special cases.
#[derive(Debug, Clone)]
pub struct PrioritizedDecomposition {
    m: usize,
    task_dims: Vec<usize>,
    /// rho_1, ..., rho_k, rho_{k+1} where the last entry is the null-space dimension.
    ranks: Vec<usize>,
    /// l_blocks[i][j] is the (i, j) block of L_e, shape p_i x rho_j, j <= i.
    l_blocks: Vec<Vec<DMatrix<f64>>>,
    /// q_blocks[i] is Q_{i+1}, shape rho_{i+1} x m; the last entry spans N(J).
    q_blocks: Vec<DMatrix<f64>>,
    /// projectors[i] = Q_{i+1}^T Q_{i+1}, shape m x m.
    projectors: Vec<DMatrix<f64>>,
}

impl PrioritizedDecomposition {
    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn task_count(&self) -> usize {
        self.task_dims.len()
    }

    pub fn task_dims(&self) -> &[usize] {
        &self.task_dims
    }

    /// Ranks `rho_1, ..., rho_{k+1}` (the last entry is the null-space dimension).
    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn rank(&self, i: usize) -> usize {
        self.ranks[i]
    }

    pub fn null_rank(&self) -> usize {
        *self.ranks.last().unwrap()
    }

    /// Cumulative rank of the first `i` tasks (`i` in `0..=k`).
    pub fn cumulative_rank(&self, i: usize) -> usize {
        self.ranks[..i].iter().sum()
    }

    /// Block `L_{ij}` for `j <= i < k` (zero-based).
    pub fn l_block(&self, i: usize, j: usize) -> &DMatrix<f64> {
        &self.l_blocks[i][j]
    }

    /// Row block `Q_{i+1}` for `i` in `0..=k`; index `k` is the null-space block.
    pub fn q_block(&self, i: usize) -> &DMatrix<f64> {
        &self.q_blocks[i]
    }

    /// Orthogonal projector `P_{i+1}` for `i` in `0..=k`.
    pub fn projector(&self, i: usize) -> &DMatrix<f64> {
        &self.projectors[i]
    }

    /// Reconstruct `J_i = sum_{j<=i} L_{ij} Q_j`.
    pub fn task_jacobian(&self, i: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.task_dims[i], self.m);
        for j in 0..=i {
            if self.ranks[j] > 0 {
                out += &self.l_blocks[i][j] * &self.q_blocks[j];
            }
        }
        out
    }

    pub fn stacked_jacobian(&self) -> DMatrix<f64> {
        let p: usize = self.task_dims.iter().sum();
        let mut out = DMatrix::zeros(p, self.m);
        let mut row = 0;
        for i in 0..self.task_count() {
            out.rows_mut(row, self.task_dims[i])
                .copy_from(&self.task_jacobian(i));
            row += self.task_dims[i];
        }
        out
    }

    pub fn regularity(&self) -> RegularityReport {
        let k = self.task_count();
        let per_task = (0..k).map(|i| self.ranks[i] == self.task_dims[i]).collect();
        let mut cumulative = Vec::with_capacity(k);
        let mut rho_sum = 0;
        let mut p_sum = 0;
        for i in 0..k {
            rho_sum += self.ranks[i];
            p_sum += self.task_dims[i];
            cumulative.push(rho_sum == p_sum);
        }
        RegularityReport {
            per_task_full_rank: per_task,
            cumulative_full_rank: cumulative,
        }
    }
}

/// Prioritized LQ factorization of a task stack.
///
/// Gram-Schmidt over the rows in priority order, with one re-orthogonalization
/// pass and tolerance-based row dropping. The dropping threshold is anchored
/// to the largest singular value of the full stack so that the accepted
/// per-prefix ranks agree with SVD rank decisions under the same tolerance.
/// The null-space block is recovered from the eigendecomposition of the
/// residual projector rather than by continuing Gram-Schmidt.
pub fn prioritized_lq(
    stack: &TaskJacobianStack,
    tol: RankTolerance,
) -> Result<PrioritizedDecomposition, FactorizationError> {
    let m = stack.input_dim();
    let k = stack.task_count();
    let task_dims = stack.task_dims();
    let sigma_max = crate::numerics::spectral_norm(&stack.stacked());
    let thr = tol.threshold(sigma_max);

    // Accepted orthonormal rows in acceptance order, tagged with their task.
    let mut q_rows: Vec<DVector<f64>> = Vec::new();
    let mut q_task: Vec<usize> = Vec::new();
    // Per global row: coefficients against the columns accepted before it,
    // plus its own diagonal entry when accepted.
    let mut row_coeffs: Vec<Vec<f64>> = Vec::new();
    let mut row_diag: Vec<Option<f64>> = Vec::new();
    let mut row_task: Vec<usize> = Vec::new();

    for (task, block) in stack.blocks().iter().enumerate() {
        for r in 0..block.nrows() {
            let mut v: DVector<f64> = block.row(r).transpose();
            let mut coeffs = vec![0.0; q_rows.len()];
            // twice-is-enough re-orthogonalization
            for _pass in 0..2 {
                for (idx, q) in q_rows.iter().enumerate() {
                    let d = v.dot(q);
                    coeffs[idx] += d;
                    v.axpy(-d, q, 1.0);
                }
            }
            let norm = v.norm();
            if norm > thr {
                q_rows.push(v / norm);
                q_task.push(task);
                row_diag.push(Some(norm));
            } else {
                row_diag.push(None);
            }
            row_coeffs.push(coeffs);
            row_task.push(task);
        }
    }

    // Per-task ranks and global column offsets of each task's accepted rows.
    let mut ranks: Vec<usize> = vec![0; k];
    for &t in &q_task {
        ranks[t] += 1;
    }
    let rho: usize = ranks.iter().sum();

    // Assemble Q blocks.
    let mut q_blocks: Vec<DMatrix<f64>> = Vec::with_capacity(k + 1);
    for (i, &rho_i) in ranks.iter().enumerate() {
        let mut q = DMatrix::zeros(rho_i, m);
        let mut local = 0;
        for (idx, &t) in q_task.iter().enumerate() {
            if t == i {
                q.row_mut(local).copy_from(&q_rows[idx].transpose());
                local += 1;
            }
        }
        q_blocks.push(q);
    }

    // Map global accepted index -> (task, local column within the task block).
    let mut col_of: Vec<(usize, usize)> = Vec::with_capacity(q_task.len());
    {
        let mut counters = vec![0usize; k];
        for &t in &q_task {
            col_of.push((t, counters[t]));
            counters[t] += 1;
        }
    }

    // Assemble L blocks row by row.
    let mut l_blocks: Vec<Vec<DMatrix<f64>>> = (0..k)
        .map(|i| (0..=i).map(|j| DMatrix::zeros(task_dims[i], ranks[j])).collect())
        .collect();
    {
        let mut local_row = vec![0usize; k];
        let mut accepted_so_far = 0usize;
        for (g, &task) in row_task.iter().enumerate() {
            let r = local_row[task];
            for (idx, &c) in row_coeffs[g].iter().enumerate() {
                let (tj, lj) = col_of[idx];
                l_blocks[task][tj][(r, lj)] = c;
            }
            if let Some(d) = row_diag[g] {
                let (tj, lj) = col_of[accepted_so_far];
                debug_assert_eq!(tj, task);
                l_blocks[task][tj][(r, lj)] = d;
                accepted_so_far += 1;
            }
            local_row[task] += 1;
        }
    }

    // Null-space block from the eigendecomposition of the residual projector.
    let null_dim = m - rho;
    let q_null = if null_dim == 0 {
        DMatrix::zeros(0, m)
    } else {
        let mut residual = DMatrix::identity(m, m);
        for q in &q_blocks {
            if q.nrows() > 0 {
                residual -= q.transpose() * q;
            }
        }
        let eig = residual.symmetric_eigen();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap()
        });
        let mut q = DMatrix::zeros(null_dim, m);
        for (row, &idx) in order.iter().take(null_dim).enumerate() {
            q.row_mut(row)
                .copy_from(&eig.eigenvectors.column(idx).transpose());
        }
        q
    };
    q_blocks.push(q_null);
    ranks.push(null_dim);

    let projectors = q_blocks
        .iter()
        .map(|q| q.transpose() * q)
        .collect::<Vec<_>>();

    Ok(PrioritizedDecomposition {
        m,
        task_dims,
        ranks,
        l_blocks,
        q_blocks,
        projectors,
    })
}

/// Null-space projector `N_{1:i} = I_m - sum_{j<=i} P_j`; `i = 0` gives the identity.
pub fn null_projector(
    d: &PrioritizedDecomposition,
    i: usize,
) -> Result<DMatrix<f64>, FactorizationError> {
    let k = d.task_count();
    if i > k {
        return Err(FactorizationError::TaskIndexOutOfRange { index: i, k });
    }
    let mut n = DMatrix::identity(d.input_dim(), d.input_dim());
    for j in 0..i {
        n -= d.projector(j);
    }
    Ok(n)
}

/// Orthogonal decomposition `u = P_1 u + ... + P_{k+1} u`.
pub fn decompose_input(
    d: &PrioritizedDecomposition,
    u: &DVector<f64>,
) -> Result<Vec<DVector<f64>>, FactorizationError> {
    if u.len() != d.input_dim() {
        return Err(FactorizationError::InputLength {
            got: u.len(),
            expected: d.input_dim(),
        });
    }
    Ok((0..=d.task_count()).map(|i| d.projector(i) * u).collect())
}
