//! Order-preserving quantization of the relaxed offloading decision into
//! binary candidate actions, the noisy variant used for exploration, and
//! the adaptive candidate-count controller.

use std::collections::VecDeque;

use rand::Rng;

use crate::domain::OffloadAction;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// First `count` order-preserving binary candidates for a relaxed decision.
///
/// Candidate 1 thresholds at 0.5 (strict: 0.5 maps to 0). Candidate k >= 2
/// thresholds at the (k-1)-th entry of `relaxed` ordered by ascending
/// distance to 0.5, with the boundary rule: a coordinate equal to the
/// threshold maps to 1 iff the threshold is <= 0.5.
pub fn opq_quantize<R: Real>(relaxed: &[R], count: usize) -> Result<Vec<OffloadAction>> {
    let n = relaxed.len();
    if count == 0 || count > n {
        return Err(Error::InvalidInput(format!(
            "candidate count must be in 1..={n}, got {count}"
        )));
    }
    let half = R::of(0.5);
    let mut candidates = Vec::with_capacity(count);
    candidates.push(OffloadAction {
        bits: relaxed.iter().map(|&x| x > half).collect(),
    });
    if count == 1 {
        return Ok(candidates);
    }
    let mut order: Vec<usize> = (0..n).collect();
    // stable ascending distance to 0.5 keeps ties deterministic by index
    order.sort_by(|&i, &j| {
        (relaxed[i] - half)
            .abs()
            .partial_cmp(&(relaxed[j] - half).abs())
            .expect("relaxed decisions are finite")
    });
    for k in 2..=count {
        let threshold = relaxed[order[k - 2]];
        let bits = relaxed
            .iter()
            .map(|&x| x > threshold || (x == threshold && threshold <= half))
            .collect();
        candidates.push(OffloadAction { bits });
    }
    Ok(candidates)
}

/// Ordered candidate set of the noisy order-preserving method: the first
/// `m/2` actions quantize the relaxed decision itself, the next `m/2`
/// quantize `sigmoid(relaxed + n)` with standard normal noise.
pub fn nop_candidates<R: Real, G: Rng + ?Sized>(
    relaxed: &[R],
    m: usize,
    rng: &mut G,
) -> Result<Vec<OffloadAction>> {
    if m < 2 || !m.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "candidate count must be an even number >= 2, got {m}"
        )));
    }
    let mut candidates = opq_quantize(relaxed, m / 2)?;
    let noisy: Vec<R> = relaxed
        .iter()
        .map(|&x| {
            let z = x + R::std_normal(rng);
            R::one() / (R::one() + (-z).exp())
        })
        .collect();
    candidates.extend(opq_quantize(&noisy, m / 2)?);
    Ok(candidates)
}

/// Adaptive candidate-count state: tracks the recent best-candidate orders
/// and shrinks or grows the number of evaluated candidates accordingly.
#[derive(Debug, Clone)]
pub struct QuantizerState {
    n_wd: usize,
    /// Current candidate count, even, in [2, 2N].
    m: usize,
    /// Frames between updates.
    update_interval: u64,
    /// Last `update_interval` values of the selected index modulo m/2.
    history: VecDeque<usize>,
}

impl QuantizerState {
    pub fn new(n_wd: usize, update_interval: u64) -> Self {
        QuantizerState {
            n_wd,
            m: 2 * n_wd,
            update_interval,
            history: VecDeque::with_capacity(update_interval as usize),
        }
    }

    pub fn candidate_count(&self) -> usize {
        self.m
    }

    /// Reduces a selected candidate index to its order within either half
    /// and records it.
    pub fn record_selection(&mut self, best_index: usize) -> usize {
        let m_star = best_index % (self.m / 2);
        if self.history.len() == self.update_interval as usize {
            self.history.pop_front();
        }
        self.history.push_back(m_star);
        m_star
    }

    /// On scheduled frames, sets `m = 2 min(max(recent m*) + 1, N)`.
    pub fn maybe_update(&mut self, t: u64) {
        if !t.is_multiple_of(self.update_interval) || self.history.is_empty() {
            return;
        }
        let recent_max = *self.history.iter().max().expect("nonempty");
        self.m = 2 * (recent_max + 1).min(self.n_wd);
        debug_assert!(self.m >= 2 && self.m <= 2 * self.n_wd && self.m.is_multiple_of(2));
    }
}
