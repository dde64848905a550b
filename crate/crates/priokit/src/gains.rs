//! Tracking-gain synthesis and certification, plus the M-matrix boundedness
//! analysis combining per-task Lyapunov certificates.
//!
//! Gains are synthesized per output chain by repeated pole placement; the
//! certificate `(X, R, theta)` for the KYP equations is found by a bisection
//! on `theta` with a convex subgradient feasibility search over the free
//! entries of `X` (the columns hit by `X B = K^T` are pinned). Certificates
//! are always re-validated through the independent residual evaluation.

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::factorization::prioritized_lq;
use crate::liesys::SystemModel;
use crate::linearizer::{canonical_gamma, DampingSchedule};
use crate::numerics::{
    kyp_residual, min_symmetric_eigenvalue, sample_box, spectral_norm, spectral_radius,
    NumericsError, RankTolerance,
};
use crate::reference::ReferenceSpec;

#[derive(Debug, Error)]
pub enum GainError {
    #[error("not SPR: {0}")]
    NotSpr(String),
    #[error("KYP infeasible at tolerance: {0}")]
    KypInfeasible(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Certified tracking gain for one task.
#[derive(Debug, Clone)]
pub struct GainEntry {
    pub varsigma: f64,
    pub k: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub theta: f64,
    /// min over the frequency grid of the smallest eigenvalue of H + H^*.
    pub spr_margin: f64,
}

impl GainEntry {
    /// Condition-style ratio `sigma_max(X) / sigma_min(X)`.
    pub fn sigma_tilde(&self) -> f64 {
        let sv = crate::numerics::singular_values(&self.x);
        let max = sv.first().copied().unwrap_or(0.0);
        let min = sv.last().copied().unwrap_or(0.0);
        max / min
    }
}

/// Certified gains for the tasks in priority order.
#[derive(Debug, Clone, Default)]
pub struct GainSet {
    pub entries: Vec<GainEntry>,
}

/// Gain rows for chains of the given lengths: each output chain of length
/// `rho` gets the coefficients of `(s + pole_scale)^rho` divided by
/// `varsigma`, so `A - varsigma B K` has all poles at `-pole_scale`.
pub fn synthesize_gain(rel_deg: &[usize], varsigma: f64, pole_scale: f64) -> DMatrix<f64> {
    assert!(varsigma > 0.0, "varsigma must be positive");
    assert!(pole_scale > 0.0, "pole_scale must be positive");
    let p = rel_deg.len();
    let r: usize = rel_deg.iter().sum();
    let mut k = DMatrix::zeros(p, r);
    let mut offset = 0;
    for (chain, &rc) in rel_deg.iter().enumerate() {
        // (s + mu)^rc = sum_j C(rc, j) mu^(rc - j) s^j
        for j in 0..rc {
            let coeff = binomial(rc, j) as f64 * pole_scale.powi((rc - j) as i32);
            k[(chain, offset + j)] = coeff / varsigma;
        }
        offset += rc;
    }
    k
}

fn binomial(n: usize, k: usize) -> u64 {
    let mut result = 1u64;
    for i in 0..k {
        result = result * (n - i) as u64 / (i + 1) as u64;
    }
    result
}

fn hurwitz_abscissa(a_cl: &DMatrix<f64>) -> f64 {
    a_cl.clone()
        .complex_eigenvalues()
        .iter()
        .fold(f64::NEG_INFINITY, |acc, z| acc.max(z.re))
}

/// Smallest eigenvalue of the Hermitian matrix `H + H^*`, through the real
/// symmetric embedding `[[Re, -Im], [Im, Re]]`.
fn min_hermitian_part_eigenvalue(h: &DMatrix<Complex<f64>>) -> f64 {
    let p = h.nrows();
    let s = h + h.adjoint();
    let mut embed = DMatrix::zeros(2 * p, 2 * p);
    for i in 0..p {
        for j in 0..p {
            embed[(i, j)] = s[(i, j)].re;
            embed[(i, j + p)] = -s[(i, j)].im;
            embed[(i + p, j)] = s[(i, j)].im;
            embed[(i + p, j + p)] = s[(i, j)].re;
        }
    }
    embed
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &v| a.min(v))
}

/// Strict positive realness check of `H(s) = K (sI - A + varsigma B K)^{-1} B`
/// on a logarithmic frequency grid over `[1e-3, 1e3]`.
///
/// Returns the worst (smallest) eigenvalue of the Hermitian part over the
/// grid; the transfer function passes when it is strictly positive and the
/// closed loop is Hurwitz.
pub fn spr_grid_margin(
    k: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    varsigma: f64,
) -> Result<f64, GainError> {
    let r = a.nrows();
    let a_cl = a - b * k * varsigma;
    let a_c: DMatrix<Complex<f64>> = a_cl.map(|v| Complex::new(v, 0.0));
    let b_c: DMatrix<Complex<f64>> = b.map(|v| Complex::new(v, 0.0));
    let k_c: DMatrix<Complex<f64>> = k.map(|v| Complex::new(v, 0.0));
    let mut worst = f64::INFINITY;
    let n_points = 121;
    for idx in 0..n_points {
        let exponent = -3.0 + 6.0 * idx as f64 / (n_points - 1) as f64;
        let omega = 10f64.powf(exponent);
        let mut m = -&a_c;
        for i in 0..r {
            m[(i, i)] += Complex::new(0.0, omega);
        }
        let inv = m
            .lu()
            .try_inverse()
            .ok_or_else(|| GainError::NotSpr(format!("jwI - A_cl singular at omega = {omega}")))?;
        let h = &k_c * inv * &b_c;
        worst = worst.min(min_hermitian_part_eigenvalue(&h));
    }
    Ok(worst)
}

/// Chain-end row index of each column of `B` (columns must be unit vectors,
/// the shape produced by the normal form).
fn chain_end_indices(b: &DMatrix<f64>) -> Result<Vec<usize>, GainError> {
    let mut ends = Vec::with_capacity(b.ncols());
    for l in 0..b.ncols() {
        let mut idx = None;
        for i in 0..b.nrows() {
            let v = b[(i, l)];
            if v == 1.0 && idx.is_none() {
                idx = Some(i);
            } else if v != 0.0 {
                return Err(GainError::Input(
                    "B must have unit-vector columns (chain-of-integrators form)".into(),
                ));
            }
        }
        ends.push(idx.ok_or_else(|| GainError::Input("B has a zero column".into()))?);
    }
    Ok(ends)
}

struct PinnedStructure {
    pinned: DMatrix<f64>,
    /// symmetric free coordinate pairs (a <= b), both outside the pinned columns
    free_pairs: Vec<(usize, usize)>,
}

impl PinnedStructure {
    fn build(k: &DMatrix<f64>, ends: &[usize]) -> Result<Self, GainError> {
        let r = k.ncols();
        let mut pinned = DMatrix::zeros(r, r);
        for (l, &c) in ends.iter().enumerate() {
            for a in 0..r {
                pinned[(a, c)] = k[(l, a)];
                pinned[(c, a)] = k[(l, a)];
            }
        }
        // symmetry consistency of the pinned intersection
        for (l, &c) in ends.iter().enumerate() {
            for (l2, &c2) in ends.iter().enumerate() {
                if (k[(l, c2)] - k[(l2, c)]).abs() > 1e-12 * (1.0 + spectral_norm(k)) {
                    return Err(GainError::KypInfeasible(
                        "X B = K^T is incompatible with X = X^T for this K".into(),
                    ));
                }
            }
        }
        let is_end = |i: usize| ends.contains(&i);
        let mut free_pairs = Vec::new();
        for a in 0..r {
            for b in a..r {
                if !is_end(a) && !is_end(b) {
                    free_pairs.push((a, b));
                }
            }
        }
        Ok(Self {
            pinned,
            free_pairs,
        })
    }

    fn assemble(&self, z: &[f64]) -> DMatrix<f64> {
        let mut x = self.pinned.clone();
        for (idx, &(a, b)) in self.free_pairs.iter().enumerate() {
            x[(a, b)] = z[idx];
            x[(b, a)] = z[idx];
        }
        x
    }
}

/// Feasibility search at fixed theta: find free entries of X making
/// `X A_cl + A_cl^T X + 2 theta X` negative semidefinite while X stays
/// positive definite. The objective is convex in the free entries, so a
/// normalized subgradient descent with a diminishing step converges; we stop
/// at the first certificate.
fn kyp_feasible_at(
    structure: &PinnedStructure,
    a_cl: &DMatrix<f64>,
    theta: f64,
    scale: f64,
) -> Option<DMatrix<f64>> {
    let x_floor = 1e-8 * scale;
    let eval = |x: &DMatrix<f64>| -> (f64, f64) {
        let f = x * a_cl + a_cl.transpose() * x + x * (2.0 * theta);
        let lam_max_f = -min_symmetric_eigenvalue(&(-f));
        let lam_min_x = min_symmetric_eigenvalue(x);
        (lam_max_f, lam_min_x)
    };
    if structure.free_pairs.is_empty() {
        let x = structure.pinned.clone();
        let (lf, lx) = eval(&x);
        return (lf <= 0.0 && lx >= x_floor).then_some(x);
    }

    let nf = structure.free_pairs.len();
    let mut inits: Vec<Vec<f64>> = Vec::new();
    // diagonal free entries at the K scale, off-diagonals zero
    inits.push(
        structure
            .free_pairs
            .iter()
            .map(|&(a, b)| if a == b { scale } else { 0.0 })
            .collect(),
    );
    inits.push(vec![0.0; nf]);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..3 {
        inits.push((0..nf).map(|_| rng.random_range(-scale..scale)).collect());
    }

    for init in inits {
        let mut z = init;
        let mut best: Option<DMatrix<f64>> = None;
        let mut best_score = f64::INFINITY;
        let mut last_improvement = 0usize;
        for iter in 0..4000 {
            let x = structure.assemble(&z);
            let f = &x * a_cl + a_cl.transpose() * &x + &x * (2.0 * theta);
            let sym_f = (&f + f.transpose()) * 0.5;
            let eig_f = sym_f.symmetric_eigen();
            let (mut lam_max_f, mut v_idx) = (f64::NEG_INFINITY, 0);
            for (i, &l) in eig_f.eigenvalues.iter().enumerate() {
                if l > lam_max_f {
                    lam_max_f = l;
                    v_idx = i;
                }
            }
            let eig_x = x.clone().symmetric_eigen();
            let (mut lam_min_x, mut u_idx) = (f64::INFINITY, 0);
            for (i, &l) in eig_x.eigenvalues.iter().enumerate() {
                if l < lam_min_x {
                    lam_min_x = l;
                    u_idx = i;
                }
            }
            if lam_max_f <= 0.0 && lam_min_x >= x_floor {
                best = Some(x);
                break;
            }
            // subgradient of the active convex term
            let term_f = lam_max_f / scale;
            let term_x = (x_floor - lam_min_x) / scale;
            let score = term_f.max(term_x);
            if score < best_score - 1e-12 {
                best_score = score;
                last_improvement = iter;
            } else if iter - last_improvement > 600 {
                // stalled above feasibility: treat this init as infeasible
                break;
            }
            let mut grad = vec![0.0; nf];
            if term_f >= term_x {
                let v = eig_f.eigenvectors.column(v_idx);
                let w = a_cl * v + v * theta;
                for (idx, &(a, b)) in structure.free_pairs.iter().enumerate() {
                    grad[idx] = if a == b {
                        2.0 * v[a] * w[a]
                    } else {
                        2.0 * (v[a] * w[b] + v[b] * w[a])
                    };
                }
            } else {
                let u = eig_x.eigenvectors.column(u_idx);
                for (idx, &(a, b)) in structure.free_pairs.iter().enumerate() {
                    grad[idx] = if a == b { -u[a] * u[a] } else { -2.0 * u[a] * u[b] };
                }
            }
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm < 1e-300 {
                break;
            }
            let step = scale * 0.5 / ((iter + 1) as f64).sqrt();
            for (zi, gi) in z.iter_mut().zip(&grad) {
                *zi -= step * gi / norm;
            }
        }
        if best.is_some() {
            return best;
        }
    }
    None
}

/// Certify a gain against the KYP equations.
///
/// Steps: Hurwitz check, SPR frequency-grid check, then a bisection driving
/// `theta` as high as feasibility allows (absolute tolerance 1e-3). The
/// returned certificate is re-validated by `kyp_residual`.
pub fn certify_gain(
    k: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    varsigma: f64,
) -> Result<GainEntry, GainError> {
    if varsigma <= 0.0 {
        return Err(GainError::Input("varsigma must be positive".into()));
    }
    let r = a.nrows();
    if !a.is_square() || b.nrows() != r || k.ncols() != r || k.nrows() != b.ncols() {
        return Err(GainError::Input(format!(
            "shape mismatch: A {}x{}, B {}x{}, K {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            k.nrows(),
            k.ncols()
        )));
    }
    let a_cl = a - b * k * varsigma;
    let abscissa = hurwitz_abscissa(&a_cl);
    if abscissa >= 0.0 {
        return Err(GainError::NotSpr(format!(
            "closed loop not Hurwitz (spectral abscissa {abscissa:.3e})"
        )));
    }
    let spr_margin = spr_grid_margin(k, a, b, varsigma)?;
    if spr_margin <= 0.0 {
        return Err(GainError::NotSpr(format!(
            "Hermitian part of H(jw) not positive definite on the grid (min eigenvalue {spr_margin:.3e})"
        )));
    }

    let ends = chain_end_indices(b)?;
    let structure = PinnedStructure::build(k, &ends)?;
    let scale = spectral_norm(k).max(1.0);

    // find a feasible theta, halving downward from just below the decay rate
    let theta_top = 0.999 * (-abscissa);
    let mut theta_lo = theta_top;
    let mut found = None;
    for _ in 0..14 {
        if let Some(x) = kyp_feasible_at(&structure, &a_cl, theta_lo, scale) {
            found = Some((theta_lo, x));
            break;
        }
        theta_lo *= 0.5;
    }
    let (mut theta, mut x_best) = found.ok_or_else(|| {
        GainError::KypInfeasible("no feasible theta found down to 1e-4 of the decay rate".into())
    })?;

    // bisect upward toward the infeasible side
    let mut hi = theta_top;
    if theta < theta_top {
        let mut lo = theta;
        while hi - lo > 1e-3 {
            let mid = 0.5 * (lo + hi);
            match kyp_feasible_at(&structure, &a_cl, mid, scale) {
                Some(x) => {
                    lo = mid;
                    theta = mid;
                    x_best = x;
                }
                None => hi = mid,
            }
        }
    }

    // R from the eigenvalue factorization of -F(X)
    let f = &x_best * &a_cl + a_cl.transpose() * &x_best + &x_best * (2.0 * theta);
    let eig = ((-&f + (-&f).transpose()) * 0.5).symmetric_eigen();
    let mut r_mat = DMatrix::zeros(r, r);
    for i in 0..r {
        let lam = eig.eigenvalues[i].max(0.0);
        let row = eig.eigenvectors.column(i).transpose() * lam.sqrt();
        r_mat.row_mut(i).copy_from(&row);
    }

    let (lyap_res, gain_res) = kyp_residual(&a_cl, &x_best, &r_mat, theta, b, k)?;
    if lyap_res > 1e-8 || gain_res > 1e-10 {
        return Err(GainError::KypInfeasible(format!(
            "certificate failed re-validation: lyapunov residual {lyap_res:.3e}, gain residual {gain_res:.3e}"
        )));
    }

    Ok(GainEntry {
        varsigma,
        k: k.clone(),
        x: x_best,
        r: r_mat,
        theta,
        spr_margin,
    })
}

/// Sampled sup-norm bounds feeding the M-matrix analysis.
#[derive(Debug, Clone)]
pub struct BoundEstimates {
    /// m_e[(i, j)] bounds the spectral norm of the residual block E_ij.
    pub m_e: DMatrix<f64>,
    /// Per-task Lipschitz-style bound `||kappa_i(x)|| <= l_kappa_i ||x||`.
    pub l_kappa: Vec<f64>,
    pub m_xi_star: f64,
    pub m_kappa_star: f64,
    /// Inflation applied to the sampled suprema.
    pub margin: f64,
    pub samples: usize,
}

/// Estimate residual-block and drift bounds by sampling the box.
///
/// All suprema are sample maxima inflated by 10%; the margin and sample count
/// are part of the output. Reference bounds come from a dense time grid over
/// one period.
pub fn estimate_bounds(
    sys: &SystemModel,
    damping: &DampingSchedule,
    bounds_box: &[(f64, f64)],
    samples: usize,
    refs: &ReferenceSpec,
    seed: u64,
    tol: RankTolerance,
) -> Result<BoundEstimates, GainError> {
    if bounds_box.len() != sys.state_dim() {
        return Err(GainError::Input(format!(
            "box lists {} intervals, state dim is {}",
            bounds_box.len(),
            sys.state_dim()
        )));
    }
    if bounds_box.iter().any(|&(lo, hi)| hi < lo) || samples == 0 {
        return Err(GainError::Input("empty box or zero samples".into()));
    }
    let k = sys.task_count();
    let margin = 0.1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m_e: DMatrix<f64> = DMatrix::zeros(k, k);
    let mut l_kappa = vec![0.0_f64; k];

    for _ in 0..samples {
        let x = sample_box(&mut rng, bounds_box);
        let stack = sys
            .jacobian_stack(&x)
            .map_err(|e| GainError::Input(e.to_string()))?;
        let d = prioritized_lq(&stack, tol).map_err(|e| GainError::Input(e.to_string()))?;
        let lambdas = damping.lambdas(&d);
        let gamma = canonical_gamma(&d, &lambdas).map_err(|e| GainError::Input(e.to_string()))?;
        let e = gamma.residual_matrix(&d);
        let mut row = 0;
        for i in 0..k {
            let p_i = sys.tasks()[i].output_dim;
            let mut col = 0;
            for j in 0..=i {
                let p_j = sys.tasks()[j].output_dim;
                let block = e.view((row, col), (p_i, p_j)).into_owned();
                m_e[(i, j)] = m_e[(i, j)].max(spectral_norm(&block));
                col += p_j;
            }
            row += p_i;
        }
        let xn = x.norm();
        if xn > 1e-12 {
            for (i, task) in sys.tasks().iter().enumerate() {
                l_kappa[i] = l_kappa[i].max((task.kappa)(&x).norm() / xn);
            }
        }
    }
    m_e *= 1.0 + margin;
    for l in &mut l_kappa {
        *l *= 1.0 + margin;
    }

    // reference bounds over one period
    let period = refs.period();
    let grid = 10_000;
    let mut m_xi_star = 0.0_f64;
    let mut m_kappa_star = 0.0_f64;
    for g in 0..=grid {
        let t = period * g as f64 / grid as f64;
        let mut xi_sq = 0.0;
        let mut ks_sq = 0.0;
        for (i, task) in sys.tasks().iter().enumerate() {
            xi_sq += refs.xi_star(i, &task.rel_deg, t).norm_squared();
            ks_sq += refs.kappa_star(i, &task.rel_deg, t).norm_squared();
        }
        m_xi_star = m_xi_star.max(xi_sq.sqrt());
        m_kappa_star = m_kappa_star.max(ks_sq.sqrt());
    }

    Ok(BoundEstimates {
        m_e,
        l_kappa,
        m_xi_star,
        m_kappa_star,
        margin,
        samples,
    })
}

/// Sampled estimate of the per-task coercivity constants: the minimum over
/// the box of the smallest eigenvalue of the symmetric part of
/// `L_ii L_ii^T Gamma_ii`. A value near zero means the task passes through
/// singular points and must be excluded from the certified prefix.
pub fn estimate_varsigma(
    sys: &SystemModel,
    damping: &DampingSchedule,
    bounds_box: &[(f64, f64)],
    samples: usize,
    seed: u64,
    tol: RankTolerance,
) -> Result<Vec<f64>, GainError> {
    let k = sys.task_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut varsigma = vec![f64::INFINITY; k];
    for _ in 0..samples {
        let x = sample_box(&mut rng, bounds_box);
        let stack = sys
            .jacobian_stack(&x)
            .map_err(|e| GainError::Input(e.to_string()))?;
        let d = prioritized_lq(&stack, tol).map_err(|e| GainError::Input(e.to_string()))?;
        let lambdas = damping.lambdas(&d);
        let gamma = canonical_gamma(&d, &lambdas).map_err(|e| GainError::Input(e.to_string()))?;
        for i in 0..k {
            let m = d.l_block(i, i) * d.l_block(i, i).transpose() * gamma.block(i, i);
            varsigma[i] = varsigma[i].min(0.5 * min_symmetric_eigenvalue(&(&m + m.transpose())));
        }
    }
    Ok(varsigma.into_iter().map(|v| v.max(0.0)).collect())
}

/// Outcome of the M-matrix feasibility test `sr(Y^{-1} Z) < 1`.
#[derive(Debug, Clone)]
pub struct MMatrixReport {
    pub y: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub sr: f64,
    pub feasible: bool,
    /// Positive weight vector with `(Y - Z) w > 0`, present when feasible.
    pub w: Option<DVector<f64>>,
    pub v: Option<DVector<f64>>,
}

impl MMatrixReport {
    /// Build the report from explicit Y and Z matrices.
    ///
    /// Y must be unit upper-triangular with nonpositive off-diagonal entries
    /// and Z nonnegative; the weight vector solves `(Y - Z) w = 1`.
    pub fn from_matrices(y: DMatrix<f64>, z: DMatrix<f64>) -> Result<Self, GainError> {
        let n = y.nrows();
        if !y.is_square() || z.shape() != (n, n) {
            return Err(GainError::Input("Y and Z must be square of equal size".into()));
        }
        for i in 0..n {
            if (y[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(GainError::Input("Y must have unit diagonal".into()));
            }
            for j in 0..n {
                if i > j && y[(i, j)] != 0.0 {
                    return Err(GainError::Input("Y must be upper triangular".into()));
                }
                if i < j && y[(i, j)] > 0.0 {
                    return Err(GainError::Input(
                        "off-diagonal entries of Y must be nonpositive".into(),
                    ));
                }
                if z[(i, j)] < 0.0 {
                    return Err(GainError::Input("Z must be nonnegative".into()));
                }
            }
        }
        let y_inv = y
            .clone()
            .lu()
            .try_inverse()
            .ok_or_else(|| GainError::Input("Y not invertible".into()))?;
        let sr = spectral_radius(&(&y_inv * &z))?;
        if sr >= 1.0 {
            return Ok(Self {
                y,
                z,
                sr,
                feasible: false,
                w: None,
                v: None,
            });
        }
        let diff = &y - &z;
        let ones = DVector::from_element(n, 1.0);
        let w = diff
            .clone()
            .lu()
            .solve(&ones)
            .ok_or_else(|| GainError::Input("Y - Z not invertible".into()))?;
        let v = &diff * &w;
        let feasible = w.iter().all(|&x| x > 0.0) && v.iter().all(|&x| x > 0.0);
        Ok(Self {
            y,
            z,
            sr,
            feasible,
            w: Some(w),
            v: Some(v),
        })
    }
}

/// M-matrix analysis of the first `i0` tasks from sampled bounds and
/// certified gains.
pub fn mmatrix_analysis(
    bounds: &BoundEstimates,
    gains: &GainSet,
    i0: usize,
) -> Result<MMatrixReport, GainError> {
    if i0 == 0 || i0 > gains.entries.len() || i0 > bounds.m_e.nrows() {
        return Err(GainError::Input(format!(
            "i0 = {i0} out of range (gains: {}, bounds: {})",
            gains.entries.len(),
            bounds.m_e.nrows()
        )));
    }
    let sigma_tilde: Vec<f64> = gains.entries[..i0].iter().map(|g| g.sigma_tilde()).collect();
    let theta: Vec<f64> = gains.entries[..i0].iter().map(|g| g.theta).collect();
    let k_norm: Vec<f64> = gains.entries[..i0]
        .iter()
        .map(|g| spectral_norm(&g.k))
        .collect();

    let mut y = DMatrix::identity(i0, i0);
    let mut z = DMatrix::zeros(i0, i0);
    for i in 0..i0 {
        for j in 0..i0 {
            if i < j {
                y[(i, j)] = -(sigma_tilde[j] / theta[j]) * bounds.m_e[(j, i)] * k_norm[i];
            }
            let mut sum = 0.0;
            for a in 0..=j {
                sum += bounds.m_e[(j, a)] * bounds.l_kappa[a];
            }
            z[(i, j)] = (sigma_tilde[j] / theta[j]) * sum;
        }
    }
    MMatrixReport::from_matrices(y, z)
}
