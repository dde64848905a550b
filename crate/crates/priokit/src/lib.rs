//! Prioritized input-output feedback linearization for multivariate
//! input-affine systems whose input gain matrix may lose rank.
//!
//! The crate is organized around the pipeline used by the closed-loop
//! controller:
//!
//! - [`numerics`]: shared dense-matrix utilities (SVD rank, extended damped
//!   pseudoinverse, spectral radius, KYP residuals).
//! - [`factorization`]: the prioritized LQ factorization `J = L_e Q_e` of a
//!   stacked task Jacobian and the orthogonal-projector hierarchy.
//! - [`liesys`]: input-affine system models with per-task relative-degree
//!   data and finite-difference validation of user-supplied derivatives.
//! - [`linearizer`]: canonical and generalized prioritized linearizing
//!   inputs, their residual matrices, and a lexicographic reference solver.
//! - [`gains`]: SPR/KYP tracking-gain synthesis and the M-matrix
//!   boundedness analysis.
//! - [`reference`]: analytic reference signals and their chain derivatives.
//! - [`simulator`]: the closed-loop tracking simulator and the catalog of
//!   singularity-exhibiting benchmark systems.

pub mod factorization;
pub mod gains;
pub mod liesys;
pub mod linearizer;
pub mod numerics;
pub mod reference;
pub mod simulator;

pub use factorization::{
    decompose_input, null_projector, prioritized_lq, PrioritizedDecomposition, RegularityReport,
    TaskJacobianStack,
};
pub use linearizer::{
    canonical_gamma, canonical_linearizer_closed, canonical_linearizer_recursive,
    gamma_linearizer, lex_oracle, DampingSchedule, GammaForm, LinearizerResult,
};
pub use numerics::{damped_pinv, kyp_residual, numeric_rank, spectral_radius, RankTolerance};
pub use simulator::{catalog, catalog_entry, fit_envelope, run_scenario, Scenario, Trace};
