//! Versioned TOML scenario files.
//!
//! The schema is strict: unknown keys are rejected so that a typo in a
//! control parameter can never be silently ignored, and files with a
//! different `spec_version` are refused outright.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use priokit::linearizer::DampingSchedule;
use priokit::numerics::RankTolerance;
use priokit::reference::{OutputSignal, ReferenceSpec, SignalTerm, TaskReference};
use priokit::simulator::{catalog_entry, Scenario, UfSpec};

use crate::CliError;

pub const SPEC_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub spec_version: u32,
    pub system: SystemSection,
    pub damping: DampingSection,
    pub gains: GainsSection,
    pub reference: ReferenceSection,
    pub sim: SimSection,
    #[serde(default)]
    pub uf: Option<UfSection>,
    pub analysis: AnalysisSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub id: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingSection {
    pub mode: String,
    #[serde(default)]
    pub lambda_max: Option<f64>,
    #[serde(default)]
    pub eps_sing: Option<f64>,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    pub mode: String,
    #[serde(default)]
    pub varsigma: Option<Vec<f64>>,
    #[serde(default)]
    pub pole_scale: Option<f64>,
    /// Explicit gain blocks: per task, a row-major p_i x r_i matrix.
    #[serde(default)]
    pub k: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    pub tasks: Vec<ReferenceTask>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceTask {
    pub signals: Vec<SignalSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSection {
    #[serde(default)]
    pub constant: Option<f64>,
    #[serde(default)]
    pub sinusoids: Option<Vec<SinusoidSection>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinusoidSection {
    pub amplitude: f64,
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub x0: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "default_settling")]
    pub settling: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_settling() -> f64 {
    5.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UfSection {
    pub mode: String,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub omega: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    pub i0: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub box_bounds: Vec<[f64; 2]>,
}

fn default_samples() -> usize {
    10_000
}

/// Analysis inputs that live beside the resolved scenario.
pub struct AnalysisParams {
    pub samples: usize,
    pub box_bounds: Vec<(f64, f64)>,
    pub seed: u64,
    /// varsigma per task used for gain certification.
    pub varsigma: Vec<f64>,
}

pub struct LoadedScenario {
    pub scenario: Scenario,
    pub analysis: AnalysisParams,
    pub system_id: String,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| CliError::Input(format!("scenario parse: {e}")))?;
        if file.spec_version != SPEC_VERSION {
            return Err(CliError::Input(format!(
                "unsupported spec_version {} (expected {})",
                file.spec_version, SPEC_VERSION
            )));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Resolve the file into a runnable scenario. `PRIOKIT_SEED` overrides
    /// the seed recorded in the file.
    pub fn resolve(self) -> Result<LoadedScenario, CliError> {
        let entry = catalog_entry(&self.system.id)
            .map_err(|e| CliError::Input(e.to_string()))?;
        let system = entry.build();
        let k = system.task_count();

        let damping = match self.damping.mode.as_str() {
            "zero" => DampingSchedule::Zero,
            "ramp" => DampingSchedule::Ramp {
                lambda_max: self.damping.lambda_max.unwrap_or(0.1),
                eps_sing: self.damping.eps_sing.unwrap_or(0.05),
            },
            "fixed" => {
                let values = self
                    .damping
                    .values
                    .ok_or_else(|| CliError::Input("fixed damping needs `values`".into()))?;
                if values.len() != k {
                    return Err(CliError::Input(format!(
                        "damping lists {} values for {} tasks",
                        values.len(),
                        k
                    )));
                }
                DampingSchedule::Fixed(values)
            }
            other => {
                return Err(CliError::Input(format!(
                    "unknown damping mode `{other}` (zero | ramp | fixed)"
                )))
            }
        };

        let varsigma = match &self.gains.varsigma {
            Some(v) if v.len() == k => v.clone(),
            Some(v) if v.len() == 1 => vec![v[0]; k],
            Some(v) => {
                return Err(CliError::Input(format!(
                    "gains.varsigma lists {} values for {} tasks",
                    v.len(),
                    k
                )))
            }
            None => vec![1.0; k],
        };
        if varsigma.iter().any(|&v| !(v > 0.0)) {
            return Err(CliError::Input("varsigma entries must be positive".into()));
        }

        let k_gains: Vec<DMatrix<f64>> = match self.gains.mode.as_str() {
            "synthesize" => {
                let pole = self.gains.pole_scale.unwrap_or(1.0);
                if !(pole > 0.0) {
                    return Err(CliError::Input("pole_scale must be positive".into()));
                }
                system
                    .tasks()
                    .iter()
                    .zip(&varsigma)
                    .map(|(t, &vs)| priokit::gains::synthesize_gain(&t.rel_deg, vs, pole))
                    .collect()
            }
            "explicit" => {
                let blocks = self
                    .gains
                    .k
                    .as_ref()
                    .ok_or_else(|| CliError::Input("explicit gains need `k`".into()))?;
                if blocks.len() != k {
                    return Err(CliError::Input(format!(
                        "gains.k lists {} blocks for {} tasks",
                        blocks.len(),
                        k
                    )));
                }
                blocks
                    .iter()
                    .map(|rows| {
                        let nrows = rows.len();
                        let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
                        if rows.iter().any(|r| r.len() != ncols) {
                            return Err(CliError::Input("ragged gain block".into()));
                        }
                        Ok(DMatrix::from_fn(nrows, ncols, |r, c| rows[r][c]))
                    })
                    .collect::<Result<_, _>>()?
            }
            other => {
                return Err(CliError::Input(format!(
                    "unknown gains mode `{other}` (synthesize | explicit)"
                )))
            }
        };

        let refs = ReferenceSpec {
            tasks: self
                .reference
                .tasks
                .iter()
                .map(|t| TaskReference {
                    signals: t
                        .signals
                        .iter()
                        .map(|s| {
                            let mut terms = Vec::new();
                            if let Some(c) = s.constant {
                                terms.push(SignalTerm::Constant(c));
                            }
                            for sin in s.sinusoids.iter().flatten() {
                                terms.push(SignalTerm::Sinusoid {
                                    amplitude: sin.amplitude,
                                    omega: sin.omega,
                                    phase: sin.phase,
                                });
                            }
                            OutputSignal { terms }
                        })
                        .collect(),
                })
                .collect(),
        };

        let u_f = match &self.uf {
            None => UfSpec::Zero,
            Some(section) => match section.mode.as_str() {
                "zero" => UfSpec::Zero,
                "constant" => UfSpec::Constant(
                    section
                        .values
                        .clone()
                        .ok_or_else(|| CliError::Input("constant u_f needs `values`".into()))?,
                ),
                "sinusoid" => UfSpec::Sinusoid {
                    base: section
                        .values
                        .clone()
                        .ok_or_else(|| CliError::Input("sinusoid u_f needs `values`".into()))?,
                    omega: section
                        .omega
                        .ok_or_else(|| CliError::Input("sinusoid u_f needs `omega`".into()))?,
                },
                other => {
                    return Err(CliError::Input(format!(
                        "unknown uf mode `{other}` (zero | constant | sinusoid)"
                    )))
                }
            },
        };

        let seed = match std::env::var("PRIOKIT_SEED") {
            Ok(text) => text
                .parse::<u64>()
                .map_err(|_| CliError::Input(format!("PRIOKIT_SEED=`{text}` is not a u64")))?,
            Err(_) => self.sim.seed,
        };

        let scenario = Scenario {
            system,
            damping,
            k_gains,
            refs,
            x0: DVector::from_vec(self.sim.x0.clone()),
            t_end: self.sim.t_end,
            dt: self.sim.dt,
            settling: self.sim.settling,
            u_f,
            i0: self.analysis.i0,
            tol: RankTolerance::default(),
        };
        scenario
            .validate()
            .map_err(|e| CliError::Input(e.to_string()))?;

        Ok(LoadedScenario {
            scenario,
            analysis: AnalysisParams {
                samples: self.analysis.samples,
                box_bounds: self.analysis.box_bounds.iter().map(|b| (b[0], b[1])).collect(),
                seed,
                varsigma,
            },
            system_id: self.system.id,
        })
    }
}

/// Bounds-override file for `analyze --bounds`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsFile {
    pub m_e: Vec<Vec<f64>>,
    pub l_kappa: Vec<f64>,
    pub m_xi_star: f64,
    pub m_kappa_star: f64,
}

impl BoundsFile {
    pub fn load(path: &Path) -> Result<priokit::gains::BoundEstimates, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        let file: BoundsFile =
            toml::from_str(&text).map_err(|e| CliError::Input(format!("bounds parse: {e}")))?;
        let k = file.m_e.len();
        if file.m_e.iter().any(|row| row.len() != k) || file.l_kappa.len() != k {
            return Err(CliError::Input(
                "bounds file: m_e must be square and l_kappa must match its size".into(),
            ));
        }
        Ok(priokit::gains::BoundEstimates {
            m_e: DMatrix::from_fn(k, k, |r, c| file.m_e[r][c]),
            l_kappa: file.l_kappa,
            m_xi_star: file.m_xi_star,
            m_kappa_star: file.m_kappa_star,
            margin: 0.0,
            samples: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
spec_version = 1

[system]
id = "trig-singular"

[damping]
mode = "ramp"

[gains]
mode = "synthesize"
pole_scale = 1.0

[[reference.tasks]]
[[reference.tasks.signals]]
constant = 0.0

[[reference.tasks]]
[[reference.tasks.signals]]
constant = 0.0

[sim]
x0 = [0.0, 0.0]
t_end = 1.0
dt = 0.001

[analysis]
i0 = 1
box_bounds = [[-2.0, 2.0], [-2.0, 2.0]]
"#;

    #[test]
    fn minimal_scenario_parses_and_resolves() {
        let file = ScenarioFile::parse(MINIMAL).unwrap();
        let loaded = file.resolve().unwrap();
        assert_eq!(loaded.system_id, "trig-singular");
        assert_eq!(loaded.scenario.k_gains.len(), 2);
        assert_eq!(loaded.analysis.samples, 10_000);
    }

    #[test]
    fn wrong_version_rejected() {
        let text = MINIMAL.replace("spec_version = 1", "spec_version = 2");
        assert!(matches!(
            ScenarioFile::parse(&text),
            Err(CliError::Input(_))
        ));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace("[sim]", "[sim]\nturbo = true");
        assert!(matches!(
            ScenarioFile::parse(&text),
            Err(CliError::Input(_))
        ));
    }

    #[test]
    fn zero_dt_rejected_at_resolution() {
        let text = MINIMAL.replace("dt = 0.001", "dt = 0.0");
        let file = ScenarioFile::parse(&text).unwrap();
        assert!(matches!(file.resolve(), Err(CliError::Input(_))));
    }

    #[test]
    fn infinite_fixed_damping_parses() {
        let text = MINIMAL.replace(
            "[damping]\nmode = \"ramp\"",
            "[damping]\nmode = \"fixed\"\nvalues = [0.0, inf]",
        );
        let file = ScenarioFile::parse(&text).unwrap();
        let loaded = file.resolve().unwrap();
        match loaded.scenario.damping {
            DampingSchedule::Fixed(v) => {
                assert_eq!(v[0], 0.0);
                assert!(v[1].is_infinite());
            }
            other => panic!("expected fixed damping, got {other:?}"),
        }
    }
}
