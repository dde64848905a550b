#![allow(dead_code)]

//! Shared random-instance generators for the property tests.

use nalgebra::{DMatrix, DVector};
use priokit::factorization::{prioritized_lq, PrioritizedDecomposition, TaskJacobianStack};
use priokit::numerics::RankTolerance;
use rand::Rng;

/// Random task stack with rank deficiencies planted through duplicated and
/// near-duplicated rows (perturbations far below the rank tolerance).
pub fn random_stack<R: Rng>(rng: &mut R, max_k: usize, max_m: usize) -> TaskJacobianStack {
    let k = rng.random_range(1..=max_k);
    let m = rng.random_range(1..=max_m);
    let mut rows: Vec<DVector<f64>> = Vec::new();
    let mut blocks = Vec::with_capacity(k);
    for _ in 0..k {
        let p_i = rng.random_range(1..=2usize);
        let mut block = DMatrix::zeros(p_i, m);
        for r in 0..p_i {
            let style = rng.random_range(0..10u32);
            let row: DVector<f64> = if !rows.is_empty() && style < 2 {
                // exact duplicate of an earlier row
                rows[rng.random_range(0..rows.len())].clone()
            } else if !rows.is_empty() && style < 4 {
                // near-duplicate, perturbed far below the tolerance
                let base = rows[rng.random_range(0..rows.len())].clone();
                let noise =
                    DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0)) * 1e-13;
                base + noise
            } else if !rows.is_empty() && style < 5 {
                // linear combination of two earlier rows
                let a = rows[rng.random_range(0..rows.len())].clone();
                let b = rows[rng.random_range(0..rows.len())].clone();
                a * rng.random_range(-1.0..1.0) + b * rng.random_range(-1.0..1.0)
            } else {
                DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0))
            };
            block.row_mut(r).copy_from(&row.transpose());
            rows.push(row);
        }
        blocks.push(block);
    }
    TaskJacobianStack::new(blocks).unwrap()
}

pub fn random_decomposition<R: Rng>(
    rng: &mut R,
    max_k: usize,
    max_m: usize,
) -> (TaskJacobianStack, PrioritizedDecomposition) {
    let stack = random_stack(rng, max_k, max_m);
    let d = prioritized_lq(&stack, RankTolerance::default()).unwrap();
    (stack, d)
}

/// Random damping vector drawing each entry from {0, 0.1, inf}.
pub fn random_lambda<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    (0..k)
        .map(|_| match rng.random_range(0..3u32) {
            0 => 0.0,
            1 => 0.1,
            _ => f64::INFINITY,
        })
        .collect()
}

pub fn random_vector<R: Rng>(rng: &mut R, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.random_range(-1.0..1.0))
}
