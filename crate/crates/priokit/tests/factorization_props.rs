//! Property tests of the prioritized LQ factorization on random stacks with
//! planted rank deficiencies.

mod common;

use common::random_stack;
use nalgebra::DMatrix;
use priokit::factorization::{null_projector, prioritized_lq};
use priokit::numerics::{numeric_rank, RankTolerance};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DRAWS: usize = 300;

#[test]
fn reconstruction_and_projector_algebra() {
    let tol = RankTolerance::default();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..DRAWS {
        let stack = random_stack(&mut rng, 4, 6);
        let d = prioritized_lq(&stack, tol).unwrap();
        let k = d.task_count();
        let m = d.input_dim();

        for (i, block) in stack.blocks().iter().enumerate() {
            let recon = d.task_jacobian(i);
            let err = (&recon - block).norm();
            assert!(
                err <= 1e-10 * (1.0 + block.norm()),
                "reconstruction error {err} for task {i}"
            );
        }

        let mut sum = DMatrix::zeros(m, m);
        for i in 0..=k {
            let p_i = d.projector(i);
            assert!((p_i * p_i - p_i).norm() <= 1e-10, "projector not idempotent");
            for j in 0..=k {
                if i != j {
                    assert!(
                        (d.projector(i) * d.projector(j)).norm() <= 1e-10,
                        "projectors {i} and {j} not orthogonal"
                    );
                }
            }
            sum += p_i;
        }
        assert!((sum - DMatrix::identity(m, m)).norm() <= 1e-10, "partition of identity");
    }
}

#[test]
fn prefix_ranks_match_svd() {
    let tol = RankTolerance::default();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for _ in 0..DRAWS {
        let stack = random_stack(&mut rng, 4, 6);
        let d = prioritized_lq(&stack, tol).unwrap();
        let j = stack.stacked();
        let dims = stack.task_dims();
        let mut rows = 0;
        for i in 0..d.task_count() {
            rows += dims[i];
            let prefix = j.rows(0, rows).into_owned();
            assert_eq!(
                d.cumulative_rank(i + 1),
                numeric_rank(&prefix, tol).unwrap(),
                "prefix {} rank mismatch",
                i + 1
            );
        }
        // diagonal blocks have full column rank
        for i in 0..d.task_count() {
            assert_eq!(
                numeric_rank(d.l_block(i, i), tol).unwrap(),
                d.rank(i),
                "L_ii rank deficiency"
            );
        }
    }
}

#[test]
fn range_identity_between_q_and_j() {
    // row spaces of Q_{1:i} and J_{1:i} coincide: mutual projection residuals
    let tol = RankTolerance::default();
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for _ in 0..100 {
        let stack = random_stack(&mut rng, 3, 5);
        let d = prioritized_lq(&stack, tol).unwrap();
        let j = stack.stacked();
        let dims = stack.task_dims();
        let m = d.input_dim();
        let mut rows = 0;
        for i in 0..d.task_count() {
            rows += dims[i];
            let mut p_sum = DMatrix::zeros(m, m);
            for a in 0..=i {
                p_sum += d.projector(a);
            }
            let prefix = j.rows(0, rows).into_owned();
            // J rows live in the span of Q_{1:i}
            assert!((&prefix - &prefix * &p_sum).norm() <= 1e-10 * (1.0 + prefix.norm()));
            // and the span has no excess dimension
            assert_eq!(
                numeric_rank(&p_sum, tol).unwrap(),
                d.cumulative_rank(i + 1)
            );
        }
    }
}

#[test]
fn task_jacobian_annihilates_preceding_null_complement() {
    // J_i P_i = J_i N_{1:i-1}
    let tol = RankTolerance::default();
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for _ in 0..100 {
        let stack = random_stack(&mut rng, 4, 6);
        let d = prioritized_lq(&stack, tol).unwrap();
        for (i, block) in stack.blocks().iter().enumerate() {
            let lhs = block * d.projector(i);
            let rhs = block * null_projector(&d, i).unwrap();
            assert!(
                (lhs - rhs).norm() <= 1e-10 * (1.0 + block.norm()),
                "J_i P_i != J_i N_(1:i-1) at task {i}"
            );
        }
    }
}

#[test]
fn null_projector_matches_pseudoinverse_route() {
    // N_{1:i} = I - J_{1:i}^+ J_{1:i} within tolerance
    let tol = RankTolerance::default();
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for _ in 0..100 {
        let stack = random_stack(&mut rng, 3, 5);
        let d = prioritized_lq(&stack, tol).unwrap();
        let j = stack.stacked();
        let dims = stack.task_dims();
        let m = d.input_dim();
        let mut rows = 0;
        for i in 0..d.task_count() {
            rows += dims[i];
            let prefix = j.rows(0, rows).into_owned();
            let pinv = priokit::numerics::damped_pinv(&prefix, 0.0, tol).unwrap();
            let direct = DMatrix::identity(m, m) - pinv * &prefix;
            let ours = null_projector(&d, i + 1).unwrap();
            assert!((direct - ours).norm() <= 1e-8, "null projector mismatch at {i}");
        }
    }
}
