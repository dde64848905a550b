//! The four subcommands. Each returns the rendered report text; the binary
//! prints it and maps errors to exit codes.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;

use priokit::factorization::{prioritized_lq, TaskJacobianStack};
use priokit::gains::{
    certify_gain, estimate_bounds, estimate_varsigma, mmatrix_analysis, GainEntry, GainError,
    GainSet,
};
use priokit::liesys::build_normal_form;
use priokit::linearizer::{
    canonical_linearizer_closed, canonical_linearizer_recursive, lex_oracle,
};
use priokit::numerics::{kyp_residual, RankTolerance};
use priokit::simulator::run_scenario;

use crate::report::{
    self, fmt_f64, parse_float_list, parse_matrix_file, render_decomposition, render_summary,
    render_trace_csv, write_atomic,
};
use crate::scenario_file::{BoundsFile, LoadedScenario, ScenarioFile};
use crate::CliError;

/// `priokit decompose <matrix file> --dims p1,p2,... [--tol rel[,abs]]`
pub fn cmd_decompose(matrix_path: &Path, dims: &str, tol: Option<&str>) -> Result<String, CliError> {
    let text = std::fs::read_to_string(matrix_path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", matrix_path.display())))?;
    let matrix = parse_matrix_file(&text)?;
    let task_dims: Vec<usize> = dims
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| CliError::Input(format!("bad task dim `{s}`: {e}")))
        })
        .collect::<Result<_, _>>()?;
    let tol = parse_tolerance(tol)?;
    let stack = TaskJacobianStack::from_stacked(&matrix, &task_dims)
        .map_err(|e| CliError::Input(e.to_string()))?;
    let d = prioritized_lq(&stack, tol).map_err(|e| CliError::Numerical(e.to_string()))?;
    Ok(render_decomposition(&d, &matrix))
}

fn parse_tolerance(tol: Option<&str>) -> Result<RankTolerance, CliError> {
    match tol {
        None => Ok(RankTolerance::default()),
        Some(text) => {
            let parts = parse_float_list(text)?;
            match parts.as_slice() {
                [rel] if *rel > 0.0 => Ok(RankTolerance::new(*rel, RankTolerance::default().abs_tol)),
                [rel, abs] if *rel > 0.0 && *abs >= 0.0 => Ok(RankTolerance::new(*rel, *abs)),
                _ => Err(CliError::Input(format!("bad tolerance `{text}`"))),
            }
        }
    }
}

/// `priokit linearize <scenario> [--state ...] [--v ...] [--lambda ...] [--time t]`
pub fn cmd_linearize(
    scenario_path: &Path,
    state: Option<&str>,
    v_cmd: Option<&str>,
    lambda: Option<&str>,
    time: f64,
) -> Result<String, CliError> {
    let loaded = ScenarioFile::load(scenario_path)?.resolve()?;
    let sc = &loaded.scenario;
    let sys = &sc.system;

    let x = match state {
        Some(text) => {
            let values = parse_float_list(text)?;
            if values.len() != sys.state_dim() {
                return Err(CliError::Input(format!(
                    "--state lists {} values, state dim is {}",
                    values.len(),
                    sys.state_dim()
                )));
            }
            DVector::from_vec(values)
        }
        None => sc.x0.clone(),
    };

    let stack = sys
        .jacobian_stack(&x)
        .map_err(|e| CliError::Input(e.to_string()))?;
    let d = prioritized_lq(&stack, sc.tol).map_err(|e| CliError::Numerical(e.to_string()))?;
    let lambdas = match lambda {
        Some(text) => {
            let values = parse_float_list(text)?;
            if values.len() != sys.task_count() {
                return Err(CliError::Input(format!(
                    "--lambda lists {} values for {} tasks",
                    values.len(),
                    sys.task_count()
                )));
            }
            values
        }
        None => sc.damping.lambdas(&d),
    };

    // command vector: explicit or from the tracking law at the given time
    let p = sys.total_output_dim();
    let v = match v_cmd {
        Some(text) => {
            let values = parse_float_list(text)?;
            if values.len() != p {
                return Err(CliError::Input(format!(
                    "--v lists {} values, total output dim is {p}",
                    values.len()
                )));
            }
            DVector::from_vec(values)
        }
        None => {
            let mut v = DVector::zeros(p);
            let mut row = 0;
            for (i, task) in sys.tasks().iter().enumerate() {
                let err = sys.xi(i, &x) - sc.refs.xi_star(i, &task.rel_deg, time);
                let v_i = -(&sc.k_gains[i] * err) + sc.refs.kappa_star(i, &task.rel_deg, time);
                v.rows_mut(row, task.output_dim).copy_from(&v_i);
                row += task.output_dim;
            }
            v
        }
    };
    let kappa = sys.stacked_kappa(&x);
    let u_f = DVector::zeros(sys.input_dim());

    let rec = canonical_linearizer_recursive(&d, &kappa, &v, &u_f, &lambdas)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let clo = canonical_linearizer_closed(&d, &kappa, &v, &u_f, &lambdas)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let (_, objectives) = lex_oracle(&d, &kappa, &v).map_err(|e| CliError::Numerical(e.to_string()))?;

    let mut out = String::new();
    let _ = writeln!(out, "# prioritized linearizer report");
    let _ = writeln!(out, "state = {}", report::vector_to_row(&x));
    let _ = writeln!(
        out,
        "ranks = {}",
        (0..sys.task_count())
            .map(|i| d.rank(i).to_string())
            .collect::<Vec<_>>()
            .join(",")
    );
    let _ = writeln!(
        out,
        "lambda = {}",
        lambdas.iter().map(|l| fmt_f64(*l)).collect::<Vec<_>>().join(",")
    );
    let _ = writeln!(out, "v = {}", report::vector_to_row(&v));
    let _ = writeln!(out, "u_total = {}", report::vector_to_row(&rec.u_total));
    for (i, part) in rec.u_parts.iter().enumerate() {
        let label = if i < sys.task_count() {
            format!("u_part_{}", i + 1)
        } else {
            "u_part_free".to_string()
        };
        let _ = writeln!(out, "{label} = {}", report::vector_to_row(part));
    }
    for (i, e) in rec.residuals.iter().enumerate() {
        let _ = writeln!(out, "res_norm_{} = {}", i + 1, fmt_f64(e.norm()));
    }
    let _ = writeln!(
        out,
        "recursive_vs_closed = {}",
        fmt_f64((&rec.u_total - &clo.u_total).norm())
    );
    for (i, (e, obj)) in rec.residuals.iter().zip(&objectives).enumerate() {
        let _ = writeln!(out, "canonical_objective_{} = {}", i + 1, fmt_f64(e.norm_squared()));
        let _ = writeln!(out, "oracle_objective_{} = {}", i + 1, fmt_f64(*obj));
    }
    Ok(out)
}

/// `priokit simulate <scenario> --out <dir> [--dt dt]`
///
/// Writes `trace.csv` and `summary.txt` into the output directory (atomically)
/// and fails with a numerical error when the run diverged; the partial trace
/// is still written in that case.
pub fn cmd_simulate(
    scenario_path: &Path,
    out_dir: &Path,
    dt_override: Option<f64>,
) -> Result<String, CliError> {
    let mut loaded = ScenarioFile::load(scenario_path)?.resolve()?;
    if let Some(dt) = dt_override {
        loaded.scenario.dt = dt;
    }
    loaded
        .scenario
        .validate()
        .map_err(|e| CliError::Input(e.to_string()))?;
    let (trace, summary) =
        run_scenario(&loaded.scenario).map_err(|e| CliError::Input(e.to_string()))?;

    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", out_dir.display())))?;
    write_atomic(&out_dir.join("trace.csv"), &render_trace_csv(&trace))?;
    write_atomic(
        &out_dir.join("summary.txt"),
        &render_summary(&loaded.system_id, &trace, &summary),
    )?;

    if summary.diverged {
        return Err(CliError::Numerical(format!(
            "simulation diverged after {} steps; partial trace written to {}",
            trace.records.len(),
            out_dir.display()
        )));
    }
    Ok(format!(
        "wrote {} records to {}\nsup_err_i0 = {}\n",
        trace.records.len(),
        out_dir.display(),
        fmt_f64(summary.sup_err_i0)
    ))
}

/// `priokit analyze <scenario> [--samples n] [--bounds file] [--envelope trace.csv]`
pub fn cmd_analyze(
    scenario_path: &Path,
    samples: Option<usize>,
    bounds_path: Option<&Path>,
    envelope_trace: Option<&Path>,
) -> Result<String, CliError> {
    let loaded = ScenarioFile::load(scenario_path)?.resolve()?;
    let LoadedScenario {
        scenario: sc,
        analysis,
        system_id,
    } = loaded;
    let sys = &sc.system;
    let samples = samples.unwrap_or(analysis.samples);
    let nf = build_normal_form(sys);

    let mut out = String::new();
    let _ = writeln!(out, "# analysis report");
    let _ = writeln!(out, "system = {system_id}");
    let _ = writeln!(out, "i0 = {}", sc.i0);
    let _ = writeln!(out, "samples = {samples}");
    let _ = writeln!(out, "seed = {}", analysis.seed);

    // gain certification, task by task
    let mut entries: Vec<GainEntry> = Vec::new();
    for (i, blocks) in nf.per_task.iter().enumerate() {
        let k_i = &sc.k_gains[i];
        match certify_gain(k_i, &blocks.a, &blocks.b, analysis.varsigma[i]) {
            Ok(entry) => {
                let a_cl = &blocks.a - &blocks.b * k_i * entry.varsigma;
                let (lyap, gain) =
                    kyp_residual(&a_cl, &entry.x, &entry.r, entry.theta, &blocks.b, k_i)
                        .map_err(|e| CliError::Numerical(e.to_string()))?;
                let _ = writeln!(out, "gain_task_{}_theta = {}", i + 1, fmt_f64(entry.theta));
                let _ = writeln!(out, "gain_task_{}_sigma_tilde = {}", i + 1, fmt_f64(entry.sigma_tilde()));
                let _ = writeln!(out, "gain_task_{}_spr_margin = {}", i + 1, fmt_f64(entry.spr_margin));
                let _ = writeln!(out, "gain_task_{}_lyapunov_residual = {}", i + 1, fmt_f64(lyap));
                let _ = writeln!(out, "gain_task_{}_gain_residual = {}", i + 1, fmt_f64(gain));
                entries.push(entry);
            }
            Err(err @ (GainError::NotSpr(_) | GainError::KypInfeasible(_))) => {
                return Err(CliError::Numerical(format!("gain for task {}: {err}", i + 1)));
            }
            Err(err) => return Err(CliError::Input(err.to_string())),
        }
    }
    let gains = GainSet { entries };

    // sampled coercivity estimates: tasks at ~0 cannot be part of i0
    let varsigma_est = estimate_varsigma(
        sys,
        &sc.damping,
        &analysis.box_bounds,
        samples.min(2000),
        analysis.seed,
        sc.tol,
    )
    .map_err(|e| CliError::Input(e.to_string()))?;
    for (i, v) in varsigma_est.iter().enumerate() {
        let _ = writeln!(out, "varsigma_estimate_task_{} = {}", i + 1, fmt_f64(*v));
        if i < sc.i0 && *v <= 1e-9 {
            let _ = writeln!(
                out,
                "warning = task {} has no coercivity margin on the box; exclude it from i0",
                i + 1
            );
        }
    }

    // bounds: sampled, unless an override file is given
    let bounds = match bounds_path {
        Some(path) => BoundsFile::load(path)?,
        None => estimate_bounds(
            sys,
            &sc.damping,
            &analysis.box_bounds,
            samples,
            &sc.refs,
            analysis.seed,
            sc.tol,
        )
        .map_err(|e| CliError::Input(e.to_string()))?,
    };
    let k = sys.task_count();
    let _ = writeln!(out, "bounds_margin = {}", fmt_f64(bounds.margin));
    for i in 0..k.min(bounds.m_e.nrows()) {
        let row: Vec<String> = (0..k.min(bounds.m_e.ncols()))
            .map(|j| fmt_f64(bounds.m_e[(i, j)]))
            .collect();
        let _ = writeln!(out, "m_e_row_{} = {}", i + 1, row.join(" "));
    }
    for (i, l) in bounds.l_kappa.iter().enumerate() {
        let _ = writeln!(out, "l_kappa_{} = {}", i + 1, fmt_f64(*l));
    }
    let _ = writeln!(out, "m_xi_star = {}", fmt_f64(bounds.m_xi_star));
    let _ = writeln!(out, "m_kappa_star = {}", fmt_f64(bounds.m_kappa_star));

    // M-matrix feasibility
    let report = mmatrix_analysis(&bounds, &gains, sc.i0)
        .map_err(|e| CliError::Input(e.to_string()))?;
    for i in 0..sc.i0 {
        let row: Vec<String> = (0..sc.i0).map(|j| fmt_f64(report.y[(i, j)])).collect();
        let _ = writeln!(out, "y_row_{} = {}", i + 1, row.join(" "));
    }
    for i in 0..sc.i0 {
        let row: Vec<String> = (0..sc.i0).map(|j| fmt_f64(report.z[(i, j)])).collect();
        let _ = writeln!(out, "z_row_{} = {}", i + 1, row.join(" "));
    }
    let _ = writeln!(out, "spectral_radius = {}", fmt_f64(report.sr));
    if report.feasible {
        let _ = writeln!(out, "feasible = true");
        let w = report.w.as_ref().unwrap();
        let v = report.v.as_ref().unwrap();
        let _ = writeln!(out, "w = {}", report::vector_to_row(w));
        let _ = writeln!(out, "v = {}", report::vector_to_row(v));
    } else {
        let _ = writeln!(out, "feasible = false");
        let _ = writeln!(out, "infeasible = sr(Y^-1 Z) >= 1 or nonpositive weights");
    }

    // envelope fits against an existing trace
    if let Some(path) = envelope_trace {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        let parsed = report::parse_trace_csv(&text)?;
        for (i, series) in parsed.xi_err_norms.iter().enumerate() {
            match priokit::simulator::fit_envelope_series(&parsed.times, series, sc.settling) {
                Ok(env) => {
                    let _ = writeln!(out, "envelope_task_{}_a = {}", i + 1, fmt_f64(env.amplitude));
                    let _ = writeln!(out, "envelope_task_{}_b = {}", i + 1, fmt_f64(env.rate));
                    let _ = writeln!(out, "envelope_task_{}_c = {}", i + 1, fmt_f64(env.floor));
                }
                Err(err) => {
                    let _ = writeln!(out, "envelope_task_{}_error = {}", i + 1, err);
                }
            }
        }
    }
    Ok(out)
}
