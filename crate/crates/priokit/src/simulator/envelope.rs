//! Exponential-plus-floor envelope fitting for tracking-error traces.

use super::Trace;

/// Envelope `a * exp(-b (t - T1)) + c` dominating a tracking-error signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub amplitude: f64,
    pub rate: f64,
    pub floor: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvelopeError {
    #[error("need at least {needed} samples after T1, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("no positive decay rate dominates the signal")]
    NoPositiveDecay,
    #[error("task index {0} out of range")]
    TaskIndex(usize),
}

/// Fit a single-exponential envelope to `||xi_err_i(t)||` for `t >= t1`.
pub fn fit_envelope(trace: &Trace, task: usize, t1: f64) -> Result<Envelope, EnvelopeError> {
    if task >= trace.task_dims.len() {
        return Err(EnvelopeError::TaskIndex(task));
    }
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    for rec in &trace.records {
        if rec.t >= t1 {
            ts.push(rec.t);
            ys.push(rec.xi_err[task].norm());
        }
    }
    fit_envelope_series(&ts, &ys, t1)
}

/// Envelope fit on an explicit time series.
///
/// The floor `c` is the maximum over the trailing quarter of the window (the
/// smallest constant that covers the signal's tail). When the signal carries
/// a transient above that floor, its decay rate comes from a least-squares
/// fit of `ln(y - c)` and the amplitude is inflated until the envelope
/// dominates every sample; a non-positive fitted rate is a failure. A signal
/// with no meaningful mass above the floor gets the constant envelope.
pub fn fit_envelope_series(ts: &[f64], ys: &[f64], t1: f64) -> Result<Envelope, EnvelopeError> {
    let n = ts.len().min(ys.len());
    if n < 100 {
        return Err(EnvelopeError::InsufficientSamples { needed: 100, got: n });
    }
    let tau: Vec<f64> = ts[..n].iter().map(|&t| t - t1).collect();
    let y = &ys[..n];
    let y_max = y.iter().cloned().fold(0.0_f64, f64::max);
    if y_max == 0.0 {
        return Ok(Envelope {
            amplitude: 0.0,
            rate: 1.0,
            floor: 0.0,
        });
    }

    let tail_start = n - n / 4;
    let floor = y[tail_start..].iter().cloned().fold(0.0_f64, f64::max);
    let range = y_max - floor;
    if range <= 1e-3 * y_max {
        // the tail already touches the peak: only the constant bound is informative
        return Ok(Envelope {
            amplitude: 0.0,
            rate: 1.0,
            floor,
        });
    }

    // samples meaningfully above the floor carry the transient
    let cut = floor + 0.01 * range;
    let fit: Vec<usize> = (0..n).filter(|&j| y[j] > cut).collect();
    if fit.len() < 2 {
        return Ok(Envelope {
            amplitude: 0.0,
            rate: 1.0,
            floor,
        });
    }

    // least squares on ln(y - c) = ln(a) - b tau
    let m = fit.len() as f64;
    let (mut st, mut sl, mut stt, mut stl) = (0.0, 0.0, 0.0, 0.0);
    for &j in &fit {
        let l = (y[j] - floor).ln();
        st += tau[j];
        sl += l;
        stt += tau[j] * tau[j];
        stl += tau[j] * l;
    }
    let denom = m * stt - st * st;
    if denom.abs() < 1e-300 {
        return Err(EnvelopeError::NoPositiveDecay);
    }
    let slope = (m * stl - st * sl) / denom;
    let rate = -slope;
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(EnvelopeError::NoPositiveDecay);
    }

    // inflate the amplitude until every sample above the floor is dominated,
    // working in logs to avoid overflow
    let mut log_a = f64::NEG_INFINITY;
    for j in 0..n {
        if y[j] > floor {
            log_a = log_a.max((y[j] - floor).ln() + rate * tau[j]);
        }
    }
    Ok(Envelope {
        amplitude: log_a.exp(),
        rate,
        floor,
    })
}
