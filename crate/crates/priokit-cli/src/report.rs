//! Report and trace rendering.
//!
//! Floats are printed with 17 significant digits so that reports diff cleanly
//! and parse back to the exact same values. Files are written atomically
//! (write to a temporary sibling, then rename).

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use priokit::factorization::PrioritizedDecomposition;
use priokit::simulator::{Summary, Trace};

use crate::CliError;

/// 17 significant digits; round-trips f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn parse_f64(text: &str) -> Result<f64, CliError> {
    text.trim()
        .parse::<f64>()
        .map_err(|e| CliError::Input(format!("bad float `{text}`: {e}")))
}

fn fmt_row(row: &[f64]) -> String {
    row.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(" ")
}

/// Write a file atomically: temp sibling plus rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| CliError::Input(format!("cannot rename into {}: {e}", path.display())))?;
    Ok(())
}

/// Render the decomposition report: ranks, every L block, every Q block, and
/// the projector/reconstruction check residuals.
pub fn render_decomposition(
    d: &PrioritizedDecomposition,
    stacked: &DMatrix<f64>,
) -> String {
    let k = d.task_count();
    let m = d.input_dim();
    let mut out = String::new();
    let _ = writeln!(out, "# prioritized LQ decomposition");
    let _ = writeln!(out, "m = {m}");
    let _ = writeln!(out, "tasks = {k}");
    let _ = writeln!(
        out,
        "task_dims = {}",
        d.task_dims().iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",")
    );
    let _ = writeln!(
        out,
        "ranks = {}",
        (0..k).map(|i| d.rank(i).to_string()).collect::<Vec<_>>().join(",")
    );
    let _ = writeln!(out, "null_rank = {}", d.null_rank());
    for i in 0..k {
        for j in 0..=i {
            let block = d.l_block(i, j);
            let _ = writeln!(out, "[L {} {}] rows={} cols={}", i + 1, j + 1, block.nrows(), block.ncols());
            for r in 0..block.nrows() {
                let row: Vec<f64> = (0..block.ncols()).map(|c| block[(r, c)]).collect();
                let _ = writeln!(out, "{}", fmt_row(&row));
            }
        }
    }
    for i in 0..=k {
        let q = d.q_block(i);
        let _ = writeln!(out, "[Q {}] rows={} cols={}", i + 1, q.nrows(), q.ncols());
        for r in 0..q.nrows() {
            let row: Vec<f64> = (0..q.ncols()).map(|c| q[(r, c)]).collect();
            let _ = writeln!(out, "{}", fmt_row(&row));
        }
    }

    // check residuals
    let mut idem: f64 = 0.0;
    let mut cross: f64 = 0.0;
    let mut sum = DMatrix::zeros(m, m);
    for i in 0..=k {
        let p = d.projector(i);
        idem = idem.max((p * p - p).norm());
        for j in 0..=k {
            if i != j {
                cross = cross.max((d.projector(i) * d.projector(j)).norm());
            }
        }
        sum += p;
    }
    let completeness = (sum - DMatrix::identity(m, m)).norm();
    let recon = (d.stacked_jacobian() - stacked).norm();
    let _ = writeln!(out, "projector_idempotency_residual = {}", fmt_f64(idem));
    let _ = writeln!(out, "projector_orthogonality_residual = {}", fmt_f64(cross));
    let _ = writeln!(out, "projector_completeness_residual = {}", fmt_f64(completeness));
    let _ = writeln!(out, "reconstruction_residual = {}", fmt_f64(recon));
    out
}

/// Blocks recovered from a decomposition report.
pub struct ParsedDecomposition {
    pub task_dims: Vec<usize>,
    pub ranks: Vec<usize>,
    pub l_blocks: Vec<Vec<DMatrix<f64>>>,
    pub q_blocks: Vec<DMatrix<f64>>,
}

impl ParsedDecomposition {
    /// Reconstruct the stacked Jacobian `J_i = sum_j L_ij Q_j`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let m = self.q_blocks[0].ncols();
        let p: usize = self.task_dims.iter().sum();
        let mut out = DMatrix::zeros(p, m);
        let mut row = 0;
        for (i, &p_i) in self.task_dims.iter().enumerate() {
            let mut block = DMatrix::zeros(p_i, m);
            for j in 0..=i {
                if self.ranks[j] > 0 {
                    block += &self.l_blocks[i][j] * &self.q_blocks[j];
                }
            }
            out.rows_mut(row, p_i).copy_from(&block);
            row += p_i;
        }
        out
    }
}

/// Parse a decomposition report back into its blocks.
pub fn parse_decomposition(text: &str) -> Result<ParsedDecomposition, CliError> {
    let mut task_dims: Option<Vec<usize>> = None;
    let mut ranks: Option<Vec<usize>> = None;
    let mut l_blocks: Vec<Vec<DMatrix<f64>>> = Vec::new();
    let mut q_blocks: Vec<DMatrix<f64>> = Vec::new();

    let parse_counts = |value: &str| -> Result<Vec<usize>, CliError> {
        value
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| CliError::Input(format!("bad count `{s}`: {e}")))
            })
            .collect()
    };

    let mut lines = text.lines().peekable();
    while let Some(line) = lines.next() {
        let line = line.trim();
        if let Some(value) = line.strip_prefix("task_dims = ") {
            task_dims = Some(parse_counts(value)?);
        } else if let Some(value) = line.strip_prefix("ranks = ") {
            ranks = Some(parse_counts(value)?);
        } else if line.starts_with("[L ") || line.starts_with("[Q ") {
            let header: Vec<&str> = line.split_whitespace().collect();
            let rows: usize = header
                .iter()
                .find_map(|t| t.strip_prefix("rows="))
                .ok_or_else(|| CliError::Input("block header missing rows=".into()))?
                .parse()
                .map_err(|e| CliError::Input(format!("bad rows: {e}")))?;
            let cols: usize = header
                .iter()
                .find_map(|t| t.strip_prefix("cols="))
                .ok_or_else(|| CliError::Input("block header missing cols=".into()))?
                .parse()
                .map_err(|e| CliError::Input(format!("bad cols: {e}")))?;
            let mut block = DMatrix::zeros(rows, cols);
            for r in 0..rows {
                let row_line = lines
                    .next()
                    .ok_or_else(|| CliError::Input("truncated block".into()))?;
                let entries: Vec<&str> = row_line.split_whitespace().collect();
                if entries.len() != cols {
                    return Err(CliError::Input(format!(
                        "block row has {} entries, expected {cols}",
                        entries.len()
                    )));
                }
                for (c, e) in entries.iter().enumerate() {
                    block[(r, c)] = parse_f64(e)?;
                }
            }
            if line.starts_with("[L ") {
                // block rows arrive in order (i, 1), (i, 2), ..., (i, i+1)
                let i: usize = header[1]
                    .parse::<usize>()
                    .map_err(|e| CliError::Input(format!("bad L index: {e}")))?
                    - 1;
                if l_blocks.len() <= i {
                    l_blocks.push(Vec::new());
                }
                l_blocks[i].push(block);
            } else {
                q_blocks.push(block);
            }
        }
    }

    let task_dims = task_dims.ok_or_else(|| CliError::Input("report missing task_dims".into()))?;
    let mut ranks = ranks.ok_or_else(|| CliError::Input("report missing ranks".into()))?;
    if q_blocks.len() != task_dims.len() + 1 || l_blocks.len() != task_dims.len() {
        return Err(CliError::Input("report block structure incomplete".into()));
    }
    ranks.push(q_blocks.last().unwrap().nrows());
    Ok(ParsedDecomposition {
        task_dims,
        ranks,
        l_blocks,
        q_blocks,
    })
}

/// Header of the trace CSV for the given dimensions.
pub fn trace_header(state_dim: usize, task_count: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((0..state_dim).map(|i| format!("x{i}")));
    cols.extend((1..=task_count).map(|i| format!("xi_err_norm_{i}")));
    cols.extend((1..=task_count).map(|i| format!("res_norm_{i}")));
    cols.extend((1..=task_count).map(|i| format!("rank_{i}")));
    cols.extend((1..=task_count).map(|i| format!("lambda_{i}")));
    cols.push("u_norm".to_string());
    cols.push("event".to_string());
    cols.join(",")
}

pub fn render_trace_csv(trace: &Trace) -> String {
    let k = trace.task_dims.len();
    let mut out = String::new();
    let _ = writeln!(out, "{}", trace_header(trace.state_dim, k));
    for rec in &trace.records {
        let mut cols = Vec::with_capacity(2 + trace.state_dim + 4 * k);
        cols.push(fmt_f64(rec.t));
        for i in 0..trace.state_dim {
            cols.push(fmt_f64(rec.x[i]));
        }
        for e in &rec.xi_err {
            cols.push(fmt_f64(e.norm()));
        }
        for r in &rec.res_norms {
            cols.push(fmt_f64(*r));
        }
        for r in &rec.ranks {
            cols.push(r.to_string());
        }
        for l in &rec.lambdas {
            cols.push(fmt_f64(*l));
        }
        cols.push(fmt_f64(rec.u_norm));
        cols.push(if rec.rank_event { "1" } else { "0" }.to_string());
        let _ = writeln!(out, "{}", cols.join(","));
    }
    out
}

/// Time stamps and per-task error norms recovered from a trace CSV.
pub struct ParsedTrace {
    pub times: Vec<f64>,
    pub xi_err_norms: Vec<Vec<f64>>,
}

pub fn parse_trace_csv(text: &str) -> Result<ParsedTrace, CliError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Input("empty trace file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let err_cols: Vec<usize> = cols
        .iter()
        .enumerate()
        .filter(|(_, name)| name.starts_with("xi_err_norm_"))
        .map(|(i, _)| i)
        .collect();
    if err_cols.is_empty() {
        return Err(CliError::Input("trace header has no xi_err_norm columns".into()));
    }
    let mut times = Vec::new();
    let mut xi_err_norms = vec![Vec::new(); err_cols.len()];
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(CliError::Input(format!(
                "trace row has {} fields, header has {}",
                fields.len(),
                cols.len()
            )));
        }
        times.push(parse_f64(fields[0])?);
        for (slot, &c) in err_cols.iter().enumerate() {
            xi_err_norms[slot].push(parse_f64(fields[c])?);
        }
    }
    Ok(ParsedTrace {
        times,
        xi_err_norms,
    })
}

pub fn render_summary(system_id: &str, trace: &Trace, summary: &Summary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "spec_version = 1");
    let _ = writeln!(out, "system = {system_id}");
    let _ = writeln!(out, "records = {}", trace.records.len());
    let _ = writeln!(out, "dt = {}", fmt_f64(trace.dt));
    let _ = writeln!(out, "diverged = {}", summary.diverged);
    let _ = writeln!(out, "settling = {}", fmt_f64(summary.settling));
    let _ = writeln!(out, "sup_err_i0 = {}", fmt_f64(summary.sup_err_i0));
    for (i, v) in summary.sup_err_task.iter().enumerate() {
        let _ = writeln!(out, "sup_err_task_{} = {}", i + 1, fmt_f64(*v));
    }
    for (i, v) in summary.res_max.iter().enumerate() {
        let _ = writeln!(out, "res_max_{} = {}", i + 1, fmt_f64(*v));
    }
    for (i, v) in summary.res_mean.iter().enumerate() {
        let _ = writeln!(out, "res_mean_{} = {}", i + 1, fmt_f64(*v));
    }
    let _ = writeln!(out, "rank_events = {}", summary.rank_events);
    for (i, env) in summary.envelopes.iter().enumerate() {
        match env {
            Ok(e) => {
                let _ = writeln!(out, "envelope_task_{}_a = {}", i + 1, fmt_f64(e.amplitude));
                let _ = writeln!(out, "envelope_task_{}_b = {}", i + 1, fmt_f64(e.rate));
                let _ = writeln!(out, "envelope_task_{}_c = {}", i + 1, fmt_f64(e.floor));
            }
            Err(err) => {
                let _ = writeln!(out, "envelope_task_{}_error = {}", i + 1, err);
            }
        }
    }
    out
}

/// Parse a whitespace-separated matrix file: one row per line.
pub fn parse_matrix_file(text: &str) -> Result<DMatrix<f64>, CliError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Result<Vec<f64>, CliError> = line.split_whitespace().map(parse_f64).collect();
        rows.push(row?);
    }
    if rows.is_empty() {
        return Err(CliError::Input("matrix file has no rows".into()));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::Input("matrix file has ragged rows".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}

/// Parse a comma-separated list of floats; `inf` spells infinity.
pub fn parse_float_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            if s.eq_ignore_ascii_case("inf") {
                Ok(f64::INFINITY)
            } else {
                parse_f64(s)
            }
        })
        .collect()
}

pub fn vector_to_row(v: &DVector<f64>) -> String {
    fmt_row(v.as_slice())
}
