//! Shared data types, their units, and their invariants.
//!
//! External quantities are SI: bits, seconds, watts, joules, Hz. The
//! drift-plus-penalty bookkeeping (queue lengths fed into the per-frame
//! objective) runs in units of [`SystemConfig::data_unit`] bits; one
//! megabit by default, which is the scale the default `lyapunov_v` and
//! `energy_queue_scale` constants are calibrated for. Setting
//! `data_unit = 1` recovers plain bits everywhere.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Slack tolerance for feasibility checks on O(1) quantities
/// (time fractions, binary gating).
pub const SLACK_TOL: f64 = 1e-9;

/// `lhs <= rhs` up to slack scaled by the magnitude of `rhs`, so the same
/// constant works for fractions (O(1)) and for rates in bits (O(1e7)).
pub fn within_slack<R: Real>(lhs: R, rhs: R) -> bool {
    let tol = R::of(SLACK_TOL) * R::one().max(rhs.abs());
    lhs <= rhs + tol
}

/// Per-device static parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct WdProfile<R> {
    /// Rate weight c_i in the long-term objective.
    pub weight: R,
    /// Mean task data arrival per frame, bits.
    pub arrival_mean: R,
    /// Local CPU frequency cap, Hz.
    pub cpu_max: R,
    /// Transmit power cap, watts.
    pub tx_power_max: R,
    /// Long-term average power threshold, watts.
    pub power_threshold: R,
    /// Distance to the edge server, meters.
    pub distance: R,
}

/// All fixed scalars of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig<R> {
    /// Number of wireless devices.
    pub n_wd: usize,
    /// Frame duration T, seconds. Only T = 1 is accepted in this version:
    /// per-frame totals and per-second averages must coincide.
    pub frame_duration: R,
    /// Shared uplink bandwidth W, Hz.
    pub bandwidth: R,
    /// Rate loss factor v_u >= 1 from communication overhead.
    pub rate_overhead: R,
    /// Receiver noise power N0, watts.
    pub noise_power: R,
    /// Processing density phi, CPU cycles per bit.
    pub cycles_per_bit: R,
    /// Computing energy efficiency kappa, joule.s^2/cycle^3.
    pub energy_efficiency: R,
    /// Drift-plus-penalty rate weight V.
    pub lyapunov_v: R,
    /// Virtual energy queue scale nu.
    pub energy_queue_scale: R,
    /// Bits per internal data unit used by the queue bookkeeping
    /// (default 1e6; set to 1 for raw bits).
    pub data_unit: R,
    /// Per-device profiles, length `n_wd`.
    pub per_wd: Vec<WdProfile<R>>,
}

/// Noise power spectral density, dBm/Hz.
const NOISE_PSD_DBM: f64 = -174.0;

/// Default noise power for bandwidth `w` Hz: N0 = W * 10^(-174/10) mW.
pub fn default_noise_power<R: Real>(w: R) -> R {
    w * R::of(10f64.powf((NOISE_PSD_DBM - 30.0) / 10.0))
}

impl<R: Real> SystemConfig<R> {
    /// Reference configuration: `n` devices spaced evenly on [120, 255] m,
    /// weights alternating 1.5/1.0, 3 Mb mean arrivals, 0.3 GHz CPUs,
    /// 0.1 W transmit cap, 0.08 W average-power threshold.
    pub fn reference(n: usize) -> Self {
        let per_wd = (0..n)
            .map(|i| {
                let frac = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
                WdProfile {
                    weight: R::of(if i % 2 == 0 { 1.5 } else { 1.0 }),
                    arrival_mean: R::of(3e6),
                    cpu_max: R::of(3e8),
                    tx_power_max: R::of(0.1),
                    power_threshold: R::of(0.08),
                    distance: R::of(120.0 + 135.0 * frac),
                }
            })
            .collect();
        let bandwidth = R::of(2e6);
        SystemConfig {
            n_wd: n,
            frame_duration: R::one(),
            bandwidth,
            rate_overhead: R::of(1.1),
            noise_power: default_noise_power(bandwidth),
            cycles_per_bit: R::of(100.0),
            energy_efficiency: R::of(1e-26),
            lyapunov_v: R::of(20.0),
            energy_queue_scale: R::of(1000.0),
            data_unit: R::of(1e6),
            per_wd,
        }
    }

    /// Cycles per internal data unit: `cycles_per_bit * data_unit`.
    pub fn cycles_per_unit(&self) -> R {
        self.cycles_per_bit * self.data_unit
    }

    pub fn weights(&self) -> Vec<R> {
        self.per_wd.iter().map(|w| w.weight).collect()
    }

    /// Total mean arrivals per frame, bits.
    pub fn total_arrival_mean(&self) -> R {
        self.per_wd.iter().map(|w| w.arrival_mean).sum()
    }

    /// Multiply every per-WD arrival mean by `scale`.
    pub fn scale_arrivals(&mut self, scale: R) {
        for wd in &mut self.per_wd {
            wd.arrival_mean *= scale;
        }
    }
}

fn require_positive<R: Real>(value: R, field: &'static str) -> Result<()> {
    if !(value > R::zero()) || !value.is_finite() {
        return Err(Error::InvalidConfig {
            field,
            reason: format!("must be strictly positive and finite, got {value}"),
        });
    }
    Ok(())
}

/// Checks every invariant of a [`SystemConfig`], reporting the first
/// violation with its field name.
pub fn validate_config<R: Real>(cfg: SystemConfig<R>) -> Result<SystemConfig<R>> {
    if cfg.n_wd == 0 {
        return Err(Error::InvalidConfig {
            field: "n_wd",
            reason: "network must contain at least one WD".into(),
        });
    }
    if cfg.per_wd.len() != cfg.n_wd {
        return Err(Error::InvalidConfig {
            field: "per_wd",
            reason: format!("expected {} profiles, got {}", cfg.n_wd, cfg.per_wd.len()),
        });
    }
    require_positive(cfg.frame_duration, "frame_duration")?;
    if (cfg.frame_duration - R::one()).abs() > R::of(SLACK_TOL) {
        return Err(Error::InvalidConfig {
            field: "frame_duration",
            reason: "only T = 1 s is supported (per-frame totals must equal per-second averages)"
                .into(),
        });
    }
    require_positive(cfg.bandwidth, "bandwidth")?;
    if cfg.rate_overhead < R::one() {
        return Err(Error::InvalidConfig {
            field: "rate_overhead",
            reason: format!("rate_overhead < 1 (got {})", cfg.rate_overhead),
        });
    }
    require_positive(cfg.noise_power, "noise_power")?;
    require_positive(cfg.cycles_per_bit, "cycles_per_bit")?;
    require_positive(cfg.energy_efficiency, "energy_efficiency")?;
    require_positive(cfg.lyapunov_v, "lyapunov_v")?;
    require_positive(cfg.energy_queue_scale, "energy_queue_scale")?;
    require_positive(cfg.data_unit, "data_unit")?;
    for (i, wd) in cfg.per_wd.iter().enumerate() {
        // power_threshold <= tx_power_max is NOT required; the two caps are
        // independent constraints.
        for (v, name) in [
            (wd.weight, "weight"),
            (wd.arrival_mean, "arrival_mean"),
            (wd.cpu_max, "cpu_max"),
            (wd.tx_power_max, "tx_power_max"),
            (wd.power_threshold, "power_threshold"),
            (wd.distance, "distance"),
        ] {
            if !(v > R::zero()) || !v.is_finite() {
                return Err(Error::InvalidConfig {
                    field: "per_wd",
                    reason: format!("WD {i}: {name} must be strictly positive, got {v}"),
                });
            }
        }
    }
    Ok(cfg)
}

/// Per-frame observation: channel gains plus both queue states.
/// `data_queue` is in internal data units; `energy_queue` is the scaled
/// virtual energy queue.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameInput<R> {
    pub channel: Vec<R>,
    pub data_queue: Vec<R>,
    pub energy_queue: Vec<R>,
}

impl<R: Real> FrameInput<R> {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.channel.len() != n || self.data_queue.len() != n || self.energy_queue.len() != n {
            return Err(Error::InvalidInput(format!(
                "frame input vectors must have length {n}"
            )));
        }
        if self.channel.iter().any(|h| !(*h > R::zero())) {
            return Err(Error::InvalidInput("channel gains must be > 0".into()));
        }
        if self
            .data_queue
            .iter()
            .chain(self.energy_queue.iter())
            .any(|q| !(*q >= R::zero()))
        {
            return Err(Error::InvalidInput("queue lengths must be >= 0".into()));
        }
        Ok(())
    }
}

/// Binary offloading decision, one bit per WD (true = offload).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OffloadAction {
    pub bits: Vec<bool>,
}

impl OffloadAction {
    pub fn all_local(n: usize) -> Self {
        OffloadAction {
            bits: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Indices of offloading WDs.
    pub fn offloaders(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.then_some(i))
            .collect()
    }
}

/// Continuous per-frame resource allocation for a fixed binary action.
/// `tau` are time-share fractions, `cpu` local frequencies in Hz,
/// `offload_energy` joules per frame, `offload_rate` bits per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceAllocation<R> {
    pub tau: Vec<R>,
    pub cpu: Vec<R>,
    pub offload_energy: Vec<R>,
    pub offload_rate: Vec<R>,
}

impl<R: Real> ResourceAllocation<R> {
    pub fn zero(n: usize) -> Self {
        ResourceAllocation {
            tau: vec![R::zero(); n],
            cpu: vec![R::zero(); n],
            offload_energy: vec![R::zero(); n],
            offload_rate: vec![R::zero(); n],
        }
    }

    /// Checks complementary gating by `x`, the time budget, and all box
    /// constraints; `queue_bits` is the data queue in bits.
    pub fn validate(
        &self,
        action: &OffloadAction,
        cfg: &SystemConfig<R>,
        queue_bits: &[R],
    ) -> Result<()> {
        let n = cfg.n_wd;
        if self.tau.len() != n
            || self.cpu.len() != n
            || self.offload_energy.len() != n
            || self.offload_rate.len() != n
            || action.len() != n
        {
            return Err(Error::Infeasible("allocation length mismatch".into()));
        }
        let tau_sum: R = self.tau.iter().copied().sum();
        if !within_slack(tau_sum, R::one()) {
            return Err(Error::Infeasible(format!("sum tau = {tau_sum} > 1")));
        }
        for i in 0..n {
            let (tau, f, e, r) = (
                self.tau[i],
                self.cpu[i],
                self.offload_energy[i],
                self.offload_rate[i],
            );
            if tau < R::zero() || f < R::zero() || e < R::zero() || r < R::zero() {
                return Err(Error::Infeasible(format!("WD {i}: negative allocation")));
            }
            if action.bits[i] {
                if f != R::zero() {
                    return Err(Error::Infeasible(format!("WD {i}: offloading but f > 0")));
                }
                if !within_slack(e, cfg.per_wd[i].tx_power_max * tau) {
                    return Err(Error::Infeasible(format!(
                        "WD {i}: offload energy {e} exceeds power cap over tau = {tau}"
                    )));
                }
                if !within_slack(r, queue_bits[i]) {
                    return Err(Error::Infeasible(format!(
                        "WD {i}: offload rate {r} exceeds queue {}",
                        queue_bits[i]
                    )));
                }
            } else {
                if tau != R::zero() || e != R::zero() || r != R::zero() {
                    return Err(Error::Infeasible(format!(
                        "WD {i}: local but tau/e/r nonzero"
                    )));
                }
                if !within_slack(f, cfg.per_wd[i].cpu_max) {
                    return Err(Error::Infeasible(format!("WD {i}: f = {f} exceeds cap")));
                }
                if !within_slack(
                    f * cfg.frame_duration / cfg.cycles_per_bit,
                    queue_bits[i],
                ) {
                    return Err(Error::Infeasible(format!(
                        "WD {i}: local bits exceed queue {}",
                        queue_bits[i]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Everything recorded about one executed frame. Quantities are physical
/// (bits, watts) except `energy_queue` (scaled) and `objective`
/// (data-unit based, as optimized).
#[derive(Debug, Clone)]
pub struct FrameRecord<R> {
    pub frame: u64,
    pub channel: Vec<R>,
    /// Data queues at frame start, bits.
    pub data_queue_bits: Vec<R>,
    /// Virtual energy queues at frame start (scaled).
    pub energy_queue: Vec<R>,
    pub action: OffloadAction,
    pub allocation: ResourceAllocation<R>,
    /// Bits processed this frame per WD.
    pub processed_bits: Vec<R>,
    /// Computation rate per WD, bits/s.
    pub rate: Vec<R>,
    /// Power consumption per WD, watts.
    pub power: Vec<R>,
    /// Task data arrivals observed this frame, bits.
    pub arrivals_bits: Vec<R>,
    /// Optimized per-frame objective value G.
    pub objective: R,
    /// Number of candidate actions evaluated (DRL scheme only).
    pub candidate_count: Option<usize>,
    /// Index of the selected candidate (DRL scheme only).
    pub best_index: Option<usize>,
    /// Selected index modulo half the candidate count (DRL scheme only).
    pub best_index_mod: Option<usize>,
    /// Training loss, present only on frames where a training step ran.
    pub training_loss: Option<R>,
    /// Wall-clock time spent producing the decision, seconds.
    pub decide_seconds: f64,
}
