//! Reference signals for the tracking controller.
//!
//! Each task output is a finite sum of constants and sinusoids, so every
//! derivative needed by the chain coordinates is analytic and bounded on
//! `[0, inf)`. The target `xi_i*(t)` stacks derivatives along each output
//! chain and `kappa_i*(t)` collects the highest derivatives, mirroring the
//! chain coordinates the extractors produce.

use nalgebra::DVector;
use thiserror::Error;

use crate::liesys::SystemModel;

#[derive(Debug, Error)]
pub enum ReferenceError {
    #[error("reference lists {got} tasks, system has {expected}")]
    TaskCount { got: usize, expected: usize },
    #[error("task {task}: reference lists {got} signals, output dim is {expected}")]
    SignalCount {
        task: usize,
        got: usize,
        expected: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SignalTerm {
    Constant(f64),
    Sinusoid { amplitude: f64, omega: f64, phase: f64 },
}

impl SignalTerm {
    /// n-th time derivative; sinusoids shift phase by `n * pi / 2`.
    fn derivative(&self, t: f64, order: usize) -> f64 {
        match *self {
            SignalTerm::Constant(c) => {
                if order == 0 {
                    c
                } else {
                    0.0
                }
            }
            SignalTerm::Sinusoid {
                amplitude,
                omega,
                phase,
            } => {
                amplitude
                    * omega.powi(order as i32)
                    * (omega * t + phase + order as f64 * std::f64::consts::FRAC_PI_2).sin()
            }
        }
    }
}

/// One scalar output signal: a sum of terms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputSignal {
    pub terms: Vec<SignalTerm>,
}

impl OutputSignal {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: vec![SignalTerm::Constant(c)],
        }
    }

    pub fn sinusoid(amplitude: f64, omega: f64, phase: f64) -> Self {
        Self {
            terms: vec![SignalTerm::Sinusoid {
                amplitude,
                omega,
                phase,
            }],
        }
    }

    pub fn derivative(&self, t: f64, order: usize) -> f64 {
        self.terms.iter().map(|term| term.derivative(t, order)).sum()
    }

    /// Scale every term amplitude (used in reference sweeps).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|term| match *term {
                    SignalTerm::Constant(c) => SignalTerm::Constant(c * factor),
                    SignalTerm::Sinusoid {
                        amplitude,
                        omega,
                        phase,
                    } => SignalTerm::Sinusoid {
                        amplitude: amplitude * factor,
                        omega,
                        phase,
                    },
                })
                .collect(),
        }
    }
}

/// References for one task, one signal per output component.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaskReference {
    pub signals: Vec<OutputSignal>,
}

/// Full reference specification, one entry per task in priority order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReferenceSpec {
    pub tasks: Vec<TaskReference>,
}

impl ReferenceSpec {
    /// All-zero references matching the given output dims.
    pub fn zero(output_dims: &[usize]) -> Self {
        Self {
            tasks: output_dims
                .iter()
                .map(|&p| TaskReference {
                    signals: vec![OutputSignal::default(); p],
                })
                .collect(),
        }
    }

    pub fn validate_against(&self, sys: &SystemModel) -> Result<(), ReferenceError> {
        if self.tasks.len() != sys.task_count() {
            return Err(ReferenceError::TaskCount {
                got: self.tasks.len(),
                expected: sys.task_count(),
            });
        }
        for (i, (task_ref, task)) in self.tasks.iter().zip(sys.tasks()).enumerate() {
            if task_ref.signals.len() != task.output_dim {
                return Err(ReferenceError::SignalCount {
                    task: i,
                    got: task_ref.signals.len(),
                    expected: task.output_dim,
                });
            }
        }
        Ok(())
    }

    pub fn y_star(&self, task: usize, t: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.tasks[task].signals.len(),
            self.tasks[task].signals.iter().map(|s| s.derivative(t, 0)),
        )
    }

    /// `xi_i*(t)`: derivatives 0..r_ij-1 stacked per output chain.
    pub fn xi_star(&self, task: usize, rel_deg: &[usize], t: f64) -> DVector<f64> {
        let total: usize = rel_deg.iter().sum();
        let mut out = DVector::zeros(total);
        let mut idx = 0;
        for (signal, &r) in self.tasks[task].signals.iter().zip(rel_deg) {
            for order in 0..r {
                out[idx] = signal.derivative(t, order);
                idx += 1;
            }
        }
        out
    }

    /// `kappa_i*(t)`: the r_ij-th derivatives per output chain.
    pub fn kappa_star(&self, task: usize, rel_deg: &[usize], t: f64) -> DVector<f64> {
        DVector::from_iterator(
            rel_deg.len(),
            self.tasks[task]
                .signals
                .iter()
                .zip(rel_deg)
                .map(|(signal, &r)| signal.derivative(t, r)),
        )
    }

    /// Longest period among sinusoid terms, at least 1.
    pub fn period(&self) -> f64 {
        let mut period: f64 = 1.0;
        for task in &self.tasks {
            for signal in &task.signals {
                for term in &signal.terms {
                    if let SignalTerm::Sinusoid { omega, .. } = term {
                        if *omega > 0.0 {
                            period = period.max(2.0 * std::f64::consts::PI / omega);
                        }
                    }
                }
            }
        }
        period
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            tasks: self
                .tasks
                .iter()
                .map(|t| TaskReference {
                    signals: t.signals.iter().map(|s| s.scaled(factor)).collect(),
                })
                .collect(),
        }
    }
}
