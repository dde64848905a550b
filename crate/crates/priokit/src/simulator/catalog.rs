//! Benchmark systems with documented singular sets.
//!
//! All catalog systems are authored so the chain coordinates are literal
//! state components and the drift terms and task Jacobians are analytic.

use nalgebra::{DMatrix, DVector};

use crate::liesys::{SystemModel, TaskSpec};

use super::SimError;

/// A catalog system: identifier, singular-set description, recommended
/// sampling box, and a builder (system models hold closures and are built
/// fresh per use).
pub struct CatalogEntry {
    pub id: &'static str,
    pub description: &'static str,
    pub singular_set: &'static str,
    pub recommended_box: Vec<(f64, f64)>,
    build_fn: fn() -> SystemModel,
}

impl CatalogEntry {
    pub fn build(&self) -> SystemModel {
        (self.build_fn)()
    }
}

fn build_lin_conflict() -> SystemModel {
    SystemModel::new(
        3,
        3,
        Box::new(|_| DVector::zeros(3)),
        Box::new(|_| DMatrix::identity(3, 3)),
        vec![
            TaskSpec {
                output_dim: 2,
                rel_deg: vec![1, 1],
                h: Box::new(|x: &DVector<f64>| DVector::from_vec(vec![x[0], x[1]])),
                kappa: Box::new(|_| DVector::zeros(2)),
                jacobian: Box::new(|_| {
                    DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
                }),
                xi: Box::new(|x: &DVector<f64>| DVector::from_vec(vec![x[0], x[1]])),
            },
            TaskSpec {
                output_dim: 1,
                rel_deg: vec![1],
                h: Box::new(|x: &DVector<f64>| DVector::from_vec(vec![x[0]])),
                kappa: Box::new(|_| DVector::zeros(1)),
                jacobian: Box::new(|_| DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0])),
                xi: Box::new(|x: &DVector<f64>| DVector::from_vec(vec![x[0]])),
            },
        ],
        Some(Box::new(|x: &DVector<f64>| DVector::from_vec(vec![x[2]]))),
    )
    .expect("lin-conflict model is well-formed")
}

fn build_trig_singular() -> SystemModel {
    SystemModel::new(
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
                    DMatrix::from_row_slice(1, 2, &[-x[1] * x[0].sin(), x[0].cos()])
                }),
                xi: Box::new(|x: &DVector<f64>| DVector::from_vec(vec![x[1] * x[0].cos()])),
            },
        ],
        None,
    )
    .expect("trig-singular model is well-formed")
}

fn build_internal_dyn() -> SystemModel {
    SystemModel::new(
        3,
        2,
        Box::new(|x: &DVector<f64>| DVector::from_vec(vec![0.0, 0.0, x[0] - x[2]])),
        Box::new(|_| DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0])),
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
                h: Box::new(|x: &DVector<f64>| DVector::from_vec(vec![x[1]])),
                kappa: Box::new(|_| DVector::zeros(1)),
                jacobian: Box::new(|_| DMatrix::from_row_slice(1, 2, &[0.0, 1.0])),
                xi: Box::new(|x: &DVector<f64>| DVector::from_vec(vec![x[1]])),
            },
        ],
        Some(Box::new(|x: &DVector<f64>| DVector::from_vec(vec![x[2]]))),
    )
    .expect("internal-dyn model is well-formed")
}

/// The bundled benchmark systems, in a fixed order.
pub fn catalog() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            id: "lin-conflict",
            description: "n = m = 3 driftless integrator; the scalar task 2 is a copy of the \
                          first component of task 1, so rho_2 = 0 everywhere and E_21 != 0",
            singular_set: "everywhere (J_2 lies in the row space of J_1 for all x)",
            recommended_box: vec![(-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)],
            build_fn: build_lin_conflict,
        },
        CatalogEntry {
            id: "trig-singular",
            description: "n = m = 2 driftless integrator with h_1 = x_1, h_2 = x_2 cos(x_1); \
                          task 2 loses rank where cos(x_1) = 0 while task 1 stays regular",
            singular_set: "cos(x_1) = 0",
            recommended_box: vec![(-2.0, 2.0), (-2.0, 2.0)],
            build_fn: build_trig_singular,
        },
        CatalogEntry {
            id: "internal-dyn",
            description: "n = 3, m = 2 with exponentially stable internal dynamics \
                          x3' = x1 - x3; both tasks stay full rank",
            singular_set: "empty (J is constant full rank)",
            recommended_box: vec![(-1.5, 1.5), (-1.5, 1.5), (-1.5, 1.5)],
            build_fn: build_internal_dyn,
        },
    ]
}

/// Look up a catalog system by id.
pub fn catalog_entry(id: &str) -> Result<CatalogEntry, SimError> {
    catalog()
        .into_iter()
        .find(|e| e.id == id)
        .ok_or_else(|| SimError::UnknownSystem(id.to_string()))
}
