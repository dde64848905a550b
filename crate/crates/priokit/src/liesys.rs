//! Input-affine system models with prioritized task outputs.
//!
//! A `SystemModel` carries the drift `f`, input matrix `G`, and per-task
//! output maps together with their declared relative degrees, analytic drift
//! terms `kappa_i`, task Jacobians `J_i`, and extractors for the chain
//! coordinates `xi_i`. Analytic expressions are the source of truth for the
//! control path; nested finite differences exist only to validate them.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::factorization::{FactorizationError, TaskJacobianStack};

pub type StateFn = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type StateMatFn = Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model normalization violated: {0}")]
    Normalization(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("task index {index} out of range (k = {k})")]
    TaskIndex { index: usize, k: usize },
    #[error("G(0) does not have full column rank")]
    InputRankDeficient,
}

/// One prioritized task: output map, relative degrees, and the analytic
/// highest-derivative data.
pub struct TaskSpec {
    pub output_dim: usize,
    /// Relative degree of each output component, all >= 1.
    pub rel_deg: Vec<usize>,
    pub h: StateFn,
    /// Drift term `kappa_i(x) = col(L_f^{r_ij} h_ij)`.
    pub kappa: StateFn,
    /// Input gain rows `J_i(x) = col(L_G L_f^{r_ij - 1} h_ij)`, shape p_i x m.
    pub jacobian: StateMatFn,
    /// Chain coordinates `xi_i(x) = col(h_ij, L_f h_ij, ..., L_f^{r_ij-1} h_ij)`.
    pub xi: StateFn,
}

impl TaskSpec {
    /// Total relative degree `r_i` of this task.
    pub fn total_rel_deg(&self) -> usize {
        self.rel_deg.iter().sum()
    }
}

/// Input-affine system `xdot = f(x) + G(x) u` with prioritized task outputs.
pub struct SystemModel {
    state_dim: usize,
    input_dim: usize,
    pub f: StateFn,
    pub g: StateMatFn,
    tasks: Vec<TaskSpec>,
    /// Selector for the internal coordinates eta, available for catalog systems.
    pub internal_coords: Option<StateFn>,
}

impl SystemModel {
    pub fn new(
        state_dim: usize,
        input_dim: usize,
        f: StateFn,
        g: StateMatFn,
        tasks: Vec<TaskSpec>,
        internal_coords: Option<StateFn>,
    ) -> Result<Self, ModelError> {
        if tasks.is_empty() {
            return Err(ModelError::Dimension("at least one task required".into()));
        }
        let origin = DVector::zeros(state_dim);
        let f0 = f(&origin);
        if f0.len() != state_dim {
            return Err(ModelError::Dimension(format!(
                "f returns length {}, expected {}",
                f0.len(),
                state_dim
            )));
        }
        if f0.norm() > 1e-12 {
            return Err(ModelError::Normalization("f(0) != 0".into()));
        }
        let g0 = g(&origin);
        if g0.shape() != (state_dim, input_dim) {
            return Err(ModelError::Dimension(format!(
                "G returns {}x{}, expected {}x{}",
                g0.nrows(),
                g0.ncols(),
                state_dim,
                input_dim
            )));
        }
        if crate::numerics::numeric_rank(&g0, Default::default()).unwrap_or(0) < input_dim {
            return Err(ModelError::InputRankDeficient);
        }
        for (i, t) in tasks.iter().enumerate() {
            if t.rel_deg.len() != t.output_dim || t.rel_deg.iter().any(|&r| r == 0) {
                return Err(ModelError::Dimension(format!(
                    "task {i}: rel_deg must list one entry >= 1 per output"
                )));
            }
            let h0 = (t.h)(&origin);
            if h0.len() != t.output_dim {
                return Err(ModelError::Dimension(format!(
                    "task {i}: h returns length {}, expected {}",
                    h0.len(),
                    t.output_dim
                )));
            }
            if h0.norm() > 1e-12 {
                return Err(ModelError::Normalization(format!("task {i}: h(0) != 0")));
            }
            if (t.kappa)(&origin).norm() > 1e-12 {
                return Err(ModelError::Normalization(format!(
                    "task {i}: kappa(0) != 0"
                )));
            }
            let j0 = (t.jacobian)(&origin);
            if j0.shape() != (t.output_dim, input_dim) {
                return Err(ModelError::Dimension(format!(
                    "task {i}: J returns {}x{}, expected {}x{}",
                    j0.nrows(),
                    j0.ncols(),
                    t.output_dim,
                    input_dim
                )));
            }
            if (t.xi)(&origin).len() != t.total_rel_deg() {
                return Err(ModelError::Dimension(format!(
                    "task {i}: xi extractor must return length {}",
                    t.total_rel_deg()
                )));
            }
        }
        Ok(Self {
            state_dim,
            input_dim,
            f,
            g,
            tasks,
            internal_coords,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn tasks(&self) -> &[TaskSpec] {
        &self.tasks
    }

    pub fn task(&self, i: usize) -> Result<&TaskSpec, ModelError> {
        self.tasks.get(i).ok_or(ModelError::TaskIndex {
            index: i,
            k: self.tasks.len(),
        })
    }

    pub fn output_dims(&self) -> Vec<usize> {
        self.tasks.iter().map(|t| t.output_dim).collect()
    }

    pub fn total_output_dim(&self) -> usize {
        self.tasks.iter().map(|t| t.output_dim).sum()
    }

    pub fn jacobian_stack(&self, x: &DVector<f64>) -> Result<TaskJacobianStack, FactorizationError> {
        TaskJacobianStack::new(self.tasks.iter().map(|t| (t.jacobian)(x)).collect())
    }

    pub fn stacked_kappa(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.total_output_dim());
        let mut row = 0;
        for t in &self.tasks {
            out.rows_mut(row, t.output_dim).copy_from(&(t.kappa)(x));
            row += t.output_dim;
        }
        out
    }

    pub fn xi(&self, i: usize, x: &DVector<f64>) -> DVector<f64> {
        (self.tasks[i].xi)(x)
    }
}

/// Nested central-difference approximation of the iterated Lie derivative
/// `L_f^order g(x)`.
///
/// Each nesting level is one first-order directional difference along `f`,
/// so truncation is O(step^2) per level. Validation use only; the control
/// path always evaluates analytic expressions.
pub fn lie_derivative_fd(
    g: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    f: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    x: &DVector<f64>,
    order: usize,
    step: f64,
) -> DVector<f64> {
    assert!(order >= 1, "order must be >= 1");
    assert!(step > 0.0, "step must be positive");
    if order == 1 {
        directional_diff(g, x, &f(x), step)
    } else {
        let inner = |y: &DVector<f64>| lie_derivative_fd(g, f, y, order - 1, step);
        directional_diff(&inner, x, &f(x), step)
    }
}

fn directional_diff(
    g: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    x: &DVector<f64>,
    dir: &DVector<f64>,
    step: f64,
) -> DVector<f64> {
    let plus = g(&(x + dir * step));
    let minus = g(&(x - dir * step));
    (plus - minus) / (2.0 * step)
}

/// Finite-difference row `L_G phi(x)`: directional derivatives of a scalar
/// function along each column of `G(x)`.
fn lg_row(
    phi: &dyn Fn(&DVector<f64>) -> f64,
    g: &DMatrix<f64>,
    x: &DVector<f64>,
    step: f64,
) -> DVector<f64> {
    DVector::from_iterator(
        g.ncols(),
        (0..g.ncols()).map(|l| {
            let col = g.column(l).into_owned();
            let plus = phi(&(x + &col * step));
            let minus = phi(&(x - &col * step));
            (plus - minus) / (2.0 * step)
        }),
    )
}

/// Default finite-difference step for task validation.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Outcome of checking a task's declared relative-degree data against
/// finite differences.
#[derive(Debug, Clone)]
pub struct TaskValidationReport {
    /// Max over samples of `||L_G L_f^j h_i||` for `j < r_i - 1` (must vanish).
    pub vanishing_dev: f64,
    /// Max deviation between the analytic `J_i` and its FD estimate.
    pub jacobian_dev: f64,
    /// Max deviation between the analytic `kappa_i` and its FD estimate.
    pub kappa_dev: f64,
    pub tol: f64,
}

impl TaskValidationReport {
    pub fn passed(&self) -> bool {
        self.vanishing_dev <= self.tol && self.jacobian_dev <= self.tol && self.kappa_dev <= self.tol
    }
}

/// Check the vanishing condition `L_G L_f^j h_i = 0` for `j <= r_i - 2` and
/// the consistency of the user-supplied `kappa_i` and `J_i` at the given
/// sample points. Failure is a report outcome, not an error.
pub fn validate_task(
    sys: &SystemModel,
    task: usize,
    sample_points: &[DVector<f64>],
    tol: f64,
) -> Result<TaskValidationReport, ModelError> {
    let t = sys.task(task)?;
    let step = DEFAULT_FD_STEP;
    let mut vanishing_dev: f64 = 0.0;
    let mut jacobian_dev: f64 = 0.0;
    let mut kappa_dev: f64 = 0.0;

    for x in sample_points {
        let g_x = (sys.g)(x);
        let j_analytic = (t.jacobian)(x);
        let kappa_analytic = (t.kappa)(x);
        for out in 0..t.output_dim {
            let r = t.rel_deg[out];
            let h_comp = |y: &DVector<f64>| (t.h)(y)[out];
            // phi_alpha(y) = L_f^alpha h (scalar), alpha = 0 is h itself
            let phi = |alpha: usize, y: &DVector<f64>| -> f64 {
                if alpha == 0 {
                    h_comp(y)
                } else {
                    let h_vec = |z: &DVector<f64>| DVector::from_vec(vec![h_comp(z)]);
                    lie_derivative_fd(&h_vec, &*sys.f, y, alpha, step)[0]
                }
            };
            // (a) vanishing condition, vacuous for r = 1
            for alpha in 0..r.saturating_sub(1) {
                let row = lg_row(&|y| phi(alpha, y), &g_x, x, step);
                vanishing_dev = vanishing_dev.max(row.norm());
            }
            // (b) J_i row
            let row_fd = lg_row(&|y| phi(r - 1, y), &g_x, x, step);
            jacobian_dev = jacobian_dev.max((row_fd - j_analytic.row(out).transpose()).norm());
            // (c) kappa_i component
            let kappa_fd = phi(r, x);
            kappa_dev = kappa_dev.max((kappa_fd - kappa_analytic[out]).abs());
        }
    }
    Ok(TaskValidationReport {
        vanishing_dev,
        jacobian_dev,
        kappa_dev,
        tol,
    })
}

/// Canonical chain-of-integrators blocks for one task.
#[derive(Debug, Clone)]
pub struct ChainBlocks {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

/// Chain-of-integrators matrices per task plus the stacked block diagonals.
#[derive(Debug, Clone)]
pub struct NormalFormMatrices {
    pub per_task: Vec<ChainBlocks>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

fn chain_blocks(rel_deg: &[usize]) -> ChainBlocks {
    let r: usize = rel_deg.iter().sum();
    let p = rel_deg.len();
    let mut a = DMatrix::zeros(r, r);
    let mut b = DMatrix::zeros(r, p);
    let mut c = DMatrix::zeros(p, r);
    let mut offset = 0;
    for (chain, &rc) in rel_deg.iter().enumerate() {
        for i in 0..rc.saturating_sub(1) {
            a[(offset + i, offset + i + 1)] = 1.0;
        }
        b[(offset + rc - 1, chain)] = 1.0;
        c[(chain, offset)] = 1.0;
        offset += rc;
    }
    ChainBlocks { a, b, c }
}

fn block_diag(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Canonical normal-form matrices for every task of the system.
pub fn build_normal_form(sys: &SystemModel) -> NormalFormMatrices {
    let per_task: Vec<ChainBlocks> = sys.tasks().iter().map(|t| chain_blocks(&t.rel_deg)).collect();
    let a = block_diag(&per_task.iter().map(|t| &t.a).collect::<Vec<_>>());
    let b = block_diag(&per_task.iter().map(|t| &t.b).collect::<Vec<_>>());
    let c = block_diag(&per_task.iter().map(|t| &t.c).collect::<Vec<_>>());
    NormalFormMatrices { per_task, a, b, c }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::numeric_rank;
    use nalgebra::dmatrix;

    #[test]
    fn lie_derivative_linear_case_exact() {
        let g = |x: &DVector<f64>| DVector::from_vec(vec![x[0]]);
        let f = |x: &DVector<f64>| DVector::from_vec(vec![x[1], 0.0]);
        let x = DVector::from_vec(vec![0.0, 3.0]);
        let v = lie_derivative_fd(&g, &f, &x, 1, 1e-5);
        assert!((v[0] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn lie_derivative_quadratic() {
        let g = |x: &DVector<f64>| DVector::from_vec(vec![x[0] * x[0]]);
        let f = |_: &DVector<f64>| DVector::from_vec(vec![1.0, 0.0]);
        let x = DVector::from_vec(vec![2.0, 0.0]);
        let v = lie_derivative_fd(&g, &f, &x, 1, 1e-4);
        assert!((v[0] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn lie_derivative_second_order() {
        // L_f^2 x1 under f = (x2, x1) at (1, 1) equals x1 = 1
        let g = |x: &DVector<f64>| DVector::from_vec(vec![x[0]]);
        let f = |x: &DVector<f64>| DVector::from_vec(vec![x[1], x[0]]);
        let x = DVector::from_vec(vec![1.0, 1.0]);
        let v = lie_derivative_fd(&g, &f, &x, 2, 1e-5);
        assert!((v[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn chain_blocks_examples() {
        let single = chain_blocks(&[1]);
        assert_eq!(single.a, DMatrix::zeros(1, 1));
        assert_eq!(single.b, dmatrix![1.0]);
        assert_eq!(single.c, dmatrix![1.0]);

        let double = chain_blocks(&[2]);
        assert_eq!(double.a, dmatrix![0.0, 1.0; 0.0, 0.0]);
        assert_eq!(double.b, DMatrix::from_column_slice(2, 1, &[0.0, 1.0]));
        assert_eq!(double.c, DMatrix::from_row_slice(1, 2, &[1.0, 0.0]));
    }

    #[test]
    fn stacked_normal_form_is_block_diagonal() {
        let sys = crate::simulator::catalog_entry("internal-dyn").unwrap().build();
        let nf = build_normal_form(&sys);
        assert_eq!(nf.a, DMatrix::zeros(2, 2));
        assert_eq!(nf.b, DMatrix::identity(2, 2));
        assert_eq!(nf.c, DMatrix::identity(2, 2));
    }

    #[test]
    fn pbh_controllable_and_observable() {
        for rel_deg in [vec![1usize], vec![2], vec![3], vec![1, 2]] {
            let blocks = chain_blocks(&rel_deg);
            let r = blocks.a.nrows();
            // A is nilpotent, eigenvalue 0 only: PBH at 0
            let mut ctrl = DMatrix::zeros(r, r + blocks.b.ncols());
            ctrl.view_mut((0, 0), (r, r)).copy_from(&blocks.a);
            ctrl.view_mut((0, r), blocks.b.shape()).copy_from(&blocks.b);
            assert_eq!(numeric_rank(&ctrl, Default::default()).unwrap(), r);
            let mut obs = DMatrix::zeros(r + blocks.c.nrows(), r);
            obs.view_mut((0, 0), (r, r)).copy_from(&blocks.a);
            obs.view_mut((r, 0), blocks.c.shape()).copy_from(&blocks.c);
            assert_eq!(numeric_rank(&obs, Default::default()).unwrap(), r);
        }
    }

    #[test]
    fn validate_task_detects_corruption() {
        let entry = crate::simulator::catalog_entry("trig-singular").unwrap();
        let sys = entry.build();
        let points: Vec<DVector<f64>> = (0..20)
            .map(|i| {
                let s = i as f64 / 19.0;
                DVector::from_vec(vec![2.0 * s - 1.0, 1.0 - 2.0 * s])
            })
            .collect();
        let report = validate_task(&sys, 1, &points, 1e-4).unwrap();
        assert!(report.passed(), "catalog system should validate: {report:?}");

        // corrupt J_2 by scaling it by 2
        let corrupted = SystemModel::new(
            2,
            2,
            Box::new(|_| DVector::zeros(2)),
            Box::new(|_| DMatrix::identity(2, 2)),
            vec![
                TaskSpec {
                    output_dim: 1,
                    rel_deg: vec![1],
                    h: Box::new(|x: &DVector<f64>| DVector::from_vec(vec![x[0]])),
                    kappa: Box::new(|_| DVector::zeros(1)),
                    jacobian: Box::new(|_| DMatrix::from_row_slice(1, 2, &[1.0, 0.0])),
                    xi: Box::new(|x: &DVector<f64>| DVector::from_vec(vec![x[0]])),
                },
                TaskSpec {
                    output_dim: 1,
                    rel_deg: vec![1],
                    h: Box::new(|x: &DVector<f64>| DVector::from_vec(vec![x[1] * x[0].cos()])),
                    kappa: Box::new(|_| DVector::zeros(1)),
                    jacobian: Box::new(|x: &DVector<f64>| {
                        DMatrix::from_row_slice(1, 2, &[-2.0 * x[1] * x[0].sin(), 2.0 * x[0].cos()])
                    }),
                    xi: Box::new(|x: &DVector<f64>| DVector::from_vec(vec![x[1] * x[0].cos()])),
                },
            ],
            None,
        )
        .unwrap();
        let report = validate_task(&corrupted, 1, &points, 1e-4).unwrap();
        assert!(!report.passed());
        // deviation is on the order of ||J_2|| itself
        assert!(report.jacobian_dev > 0.1);

        // r = 1 everywhere: the vanishing check is vacuous
        assert_eq!(report.vanishing_dev, 0.0);
    }

    #[test]
    fn model_normalization_enforced() {
        let bad = SystemModel::new(
            1,
            1,
            Box::new(|_| DVector::from_vec(vec![1.0])),
            Box::new(|_| DMatrix::identity(1, 1)),
            vec![TaskSpec {
                output_dim: 1,
                rel_deg: vec![1],
                h: Box::new(|x: &DVector<f64>| x.clone()),
                kappa: Box::new(|_| DVector::zeros(1)),
                jacobian: Box::new(|_| DMatrix::identity(1, 1)),
                xi: Box::new(|x: &DVector<f64>| x.clone()),
            }],
            None,
        );
        assert!(matches!(bad, Err(ModelError::Normalization(_))));
    }
}
