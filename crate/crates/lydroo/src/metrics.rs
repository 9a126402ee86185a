//! Post-processing of per-frame series: trailing moving averages and the
//! queue stability verdict.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default smoothing window, frames.
pub const DEFAULT_WINDOW: usize = 200;

/// Trailing moving average: entry `t` is the mean of the last
/// `min(t + 1, window)` entries. Output length equals input length.
pub fn moving_average<R: Real>(series: &[R], window: usize) -> Vec<R> {
    assert!(window >= 1, "window must be >= 1");
    // summed per entry rather than rolled forward: no drift accumulates
    let mut out = Vec::with_capacity(series.len());
    for t in 0..series.len() {
        let start = (t + 1).saturating_sub(window);
        let len = t + 1 - start;
        let sum: R = series[start..=t].iter().copied().sum();
        out.push(sum / R::of(len as f64));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityVerdict {
    Stable,
    Diverging,
}

impl StabilityVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            StabilityVerdict::Stable => "stable",
            StabilityVerdict::Diverging => "diverging",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StabilityOptions<R> {
    /// Fraction of the series (from the end) the slope is fitted on.
    pub tail_fraction: R,
    /// Divergence threshold as a fraction of the mean arrival per frame.
    pub slope_epsilon: R,
    /// Smoothing window applied before fitting.
    pub window: usize,
}

impl<R: Real> Default for StabilityOptions<R> {
    fn default() -> Self {
        StabilityOptions {
            tail_fraction: R::of(0.25),
            slope_epsilon: R::of(0.01),
            window: DEFAULT_WINDOW,
        }
    }
}

/// Least-squares slope of `values` against frame index.
fn slope<R: Real>(values: &[R]) -> R {
    let n = R::of(values.len() as f64);
    let mut sx = R::zero();
    let mut sy = R::zero();
    let mut sxx = R::zero();
    let mut sxy = R::zero();
    for (i, &v) in values.iter().enumerate() {
        let x = R::of(i as f64);
        sx += x;
        sy += v;
        sxx += x * x;
        sxy += x * v;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Classifies a total-queue-length series as stable or diverging by the
/// least-squares slope of its smoothed tail: diverging iff the backlog
/// grows faster than `slope_epsilon` times the mean arrivals per frame.
pub fn stability_verdict<R: Real>(
    total_queue: &[R],
    mean_arrival_per_frame: R,
    opts: &StabilityOptions<R>,
) -> Result<StabilityVerdict> {
    if total_queue.len() < 400 {
        return Err(Error::InvalidInput(format!(
            "stability verdict needs at least 400 frames, got {}",
            total_queue.len()
        )));
    }
    let smoothed = moving_average(total_queue, opts.window);
    let tail_len = ((R::of(total_queue.len() as f64) * opts.tail_fraction).as_f64() as usize).max(2);
    let tail = &smoothed[smoothed.len() - tail_len..];
    let verdict = if slope(tail) > opts.slope_epsilon * mean_arrival_per_frame {
        StabilityVerdict::Diverging
    } else {
        StabilityVerdict::Stable
    };
    Ok(verdict)
}
