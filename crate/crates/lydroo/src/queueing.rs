//! Frame physics (local computing, TDMA offloading) and the data / virtual
//! energy queue recursions, plus the per-frame drift-plus-penalty objective.
//!
//! `local_bits_energy`, `offload_bits` and `frame_rate_energy` work in
//! physical units (bits, joules, watts). Queue state and the objective use
//! the configured data unit; with `data_unit = 1` both coincide.

use crate::domain::{within_slack, OffloadAction, ResourceAllocation, SystemConfig};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Data queues (data units) and scaled virtual energy queues, one per WD.
/// Both start at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueState<R> {
    pub data: Vec<R>,
    pub energy: Vec<R>,
}

impl<R: Real> QueueState<R> {
    pub fn initial(n: usize) -> Self {
        QueueState {
            data: vec![R::zero(); n],
            energy: vec![R::zero(); n],
        }
    }

    /// Total data backlog, bits.
    pub fn total_data_bits(&self, cfg: &SystemConfig<R>) -> R {
        self.data.iter().copied().sum::<R>() * cfg.data_unit
    }
}

/// Bits processed and joules consumed by local computing at CPU frequency
/// `f` for one frame: `(f T / phi, kappa f^3 T)`.
pub fn local_bits_energy<R: Real>(f: R, cfg: &SystemConfig<R>) -> (R, R) {
    let t = cfg.frame_duration;
    let bits = f * t / cfg.cycles_per_bit;
    let energy = cfg.energy_efficiency * f * f * f * t;
    (bits, energy)
}

/// Bits offloaded in one frame over time share `tau` with transmit energy
/// `e` joules on channel gain `h`:
/// `(W tau T / v_u) log2(1 + e h / (tau T N0))`, with the continuity limit
/// 0 at `tau = 0`.
pub fn offload_bits<R: Real>(tau: R, e: R, h: R, cfg: &SystemConfig<R>) -> Result<R> {
    if tau < R::zero() || e < R::zero() {
        return Err(Error::InvalidInput(format!(
            "offload_bits requires tau, e >= 0 (got tau = {tau}, e = {e})"
        )));
    }
    if tau == R::zero() {
        if e > R::zero() {
            // e <= P^max tau forces e = 0 here
            return Err(Error::InvalidInput(
                "positive transmit energy with zero time share".into(),
            ));
        }
        return Ok(R::zero());
    }
    let t = cfg.frame_duration;
    let snr = e * h / (tau * t * cfg.noise_power);
    Ok(cfg.bandwidth * tau * t / cfg.rate_overhead * (R::one() + snr).log2())
}

/// Computation rate (bits/s) and power (watts) per WD for an executed
/// action, with exactly one branch active per WD according to `x`.
pub fn frame_rate_energy<R: Real>(
    action: &OffloadAction,
    alloc: &ResourceAllocation<R>,
    channel: &[R],
    cfg: &SystemConfig<R>,
) -> Result<(Vec<R>, Vec<R>)> {
    let t = cfg.frame_duration;
    let mut rate = Vec::with_capacity(cfg.n_wd);
    let mut power = Vec::with_capacity(cfg.n_wd);
    for i in 0..cfg.n_wd {
        if action.bits[i] {
            let bits = offload_bits(alloc.tau[i], alloc.offload_energy[i], channel[i], cfg)?;
            rate.push(bits / t);
            power.push(alloc.offload_energy[i] / t);
        } else {
            let (bits, joules) = local_bits_energy(alloc.cpu[i], cfg);
            rate.push(bits / t);
            power.push(joules / t);
        }
    }
    Ok((rate, power))
}

/// Advances both queue recursions by one frame.
///
/// `processed` and `arrivals` are in data units, `power` in watts:
/// `Q' = Q - D + A` and `Y' = max(Y + nu e - nu gamma, 0)`.
/// Processing beyond the queue (outside slack) is a hard error: it
/// signals an allocator bug, not a valid state.
pub fn update_queues<R: Real>(
    state: &QueueState<R>,
    processed: &[R],
    power: &[R],
    arrivals: &[R],
    cfg: &SystemConfig<R>,
) -> Result<QueueState<R>> {
    let nu = cfg.energy_queue_scale;
    let mut data = Vec::with_capacity(cfg.n_wd);
    let mut energy = Vec::with_capacity(cfg.n_wd);
    for i in 0..cfg.n_wd {
        if !within_slack(processed[i], state.data[i]) {
            return Err(Error::Causality {
                wd: i,
                processed: processed[i].as_f64(),
                queued: state.data[i].as_f64(),
            });
        }
        // max(Q - D, 0) absorbs the slack so Q stays nonnegative exactly
        data.push((state.data[i] - processed[i]).max(R::zero()) + arrivals[i]);
        let gamma = cfg.per_wd[i].power_threshold;
        energy.push((state.energy[i] + nu * power[i] - nu * gamma).max(R::zero()));
    }
    Ok(QueueState { data, energy })
}

/// Per-frame objective weights: `a_i = Q_i + V c_i`, and the energy queue
/// as stored.
pub fn objective_coefficients<R: Real>(state: &QueueState<R>, cfg: &SystemConfig<R>) -> (Vec<R>, Vec<R>) {
    let a = state
        .data
        .iter()
        .zip(&cfg.per_wd)
        .map(|(&q, wd)| q + cfg.lyapunov_v * wd.weight)
        .collect();
    (a, state.energy.clone())
}

/// Drift-plus-penalty value of an executed allocation:
/// `G = sum_i a_i r_i - sum_i Y_i e_i`, with rates converted to data units
/// so they match the queue bookkeeping.
pub fn per_frame_objective<R: Real>(
    action: &OffloadAction,
    alloc: &ResourceAllocation<R>,
    state: &QueueState<R>,
    channel: &[R],
    cfg: &SystemConfig<R>,
) -> Result<R> {
    let (rate, power) = frame_rate_energy(action, alloc, channel, cfg)?;
    let (a, y) = objective_coefficients(state, cfg);
    let t = cfg.frame_duration;
    let mut g = R::zero();
    for i in 0..cfg.n_wd {
        g = g + a[i] * (rate[i] * t / cfg.data_unit) - y[i] * power[i];
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cfg(n: usize) -> SystemConfig<f64> {
        // data_unit = 1 gives the raw-bits reading used by the examples
        let mut cfg = SystemConfig::reference(n);
        cfg.data_unit = 1.0;
        cfg
    }

    #[test]
    fn local_bits_energy_direct_values() {
        let cfg = unit_cfg(1);
        let (bits, joules) = local_bits_energy(1e8, &cfg);
        assert_eq!(bits, 1e6);
        assert!((joules - 0.01).abs() < 1e-15);
        assert_eq!(local_bits_energy(0.0, &cfg), (0.0, 0.0));
    }

    #[test]
    fn local_scaling_laws() {
        let cfg = unit_cfg(1);
        let (b1, e1) = local_bits_energy(1.3e8, &cfg);
        let (b2, e2) = local_bits_energy(2.6e8, &cfg);
        assert!((b2 / b1 - 2.0).abs() < 1e-12);
        assert!((e2 / e1 - 8.0).abs() < 1e-12);
    }

    #[test]
    fn offload_bits_zero_energy_is_zero() {
        let cfg = unit_cfg(1);
        assert_eq!(offload_bits(0.5, 0.0, 1e-10, &cfg).unwrap(), 0.0);
        assert_eq!(offload_bits(0.0, 0.0, 1e-10, &cfg).unwrap(), 0.0);
        assert!(offload_bits(0.0, 0.1, 1e-10, &cfg).is_err());
    }

    #[test]
    fn offload_bits_snr_three_gives_two_bits_per_symbol() {
        // tau = 0.5, W = 2e6, v_u = 1, T = 1, SNR = 3 -> 2e6 bits
        let mut cfg = unit_cfg(1);
        cfg.rate_overhead = 1.0;
        let tau = 0.5f64;
        let h = 1e-10;
        let e = 3.0 * tau * cfg.noise_power / h;
        let bits = offload_bits(tau, e, h, &cfg).unwrap();
        assert!((bits - 2e6).abs() / 2e6 < 1e-12);
    }

    #[test]
    fn offload_bits_increasing_concave_in_energy() {
        let cfg = unit_cfg(1);
        let (tau, h) = (0.4f64, 3e-11);
        let step = 1e-4;
        let mut prev = offload_bits(tau, 0.0, h, &cfg).unwrap();
        let mut prev_diff = f64::INFINITY;
        for k in 1..200 {
            let bits = offload_bits(tau, step * k as f64, h, &cfg).unwrap();
            let diff = bits - prev;
            assert!(diff > 0.0, "not increasing at k = {k}");
            assert!(diff < prev_diff, "not concave at k = {k}");
            prev = bits;
            prev_diff = diff;
        }
    }

    #[test]
    fn frame_rate_energy_dispatches_by_action() {
        let cfg = unit_cfg(2);
        let action = OffloadAction {
            bits: vec![false, true],
        };
        let mut alloc = ResourceAllocation::zero(2);
        alloc.cpu[0] = 1e8;
        alloc.tau[1] = 0.5;
        alloc.offload_energy[1] = 0.0;
        let h = vec![1e-10, 1e-10];
        let (rate, power) = frame_rate_energy(&action, &alloc, &h, &cfg).unwrap();
        assert_eq!(rate[0], 1e6);
        assert!((power[0] - 0.01).abs() < 1e-15);
        assert_eq!(rate[1], 0.0);
        assert_eq!(power[1], 0.0);
    }

    #[test]
    fn data_queue_recursion() {
        let cfg = unit_cfg(1);
        let state = QueueState {
            data: vec![5e6],
            energy: vec![0.0],
        };
        let next = update_queues(&state, &[2e6], &[0.0], &[1e6], &cfg).unwrap();
        assert_eq!(next.data[0], 4e6);
    }

    #[test]
    fn energy_queue_recursion_and_hinge() {
        let mut cfg = unit_cfg(1);
        cfg.per_wd[0].power_threshold = 0.08;
        let state = QueueState {
            data: vec![1.0],
            energy: vec![0.0],
        };
        let next = update_queues(&state, &[0.0], &[0.1], &[0.0], &cfg).unwrap();
        assert!((next.energy[0] - 20.0).abs() < 1e-9);

        let state = QueueState {
            data: vec![1.0],
            energy: vec![5.0],
        };
        // 5 + 1000*0.05 - 1000*0.08 = -25 -> hinge at 0
        let next = update_queues(&state, &[0.0], &[0.05], &[0.0], &cfg).unwrap();
        assert_eq!(next.energy[0], 0.0);
    }

    #[test]
    fn causality_violation_is_hard_error() {
        let cfg = unit_cfg(1);
        let state = QueueState {
            data: vec![1e6],
            energy: vec![0.0],
        };
        let err = update_queues(&state, &[1.1e6], &[0.0], &[0.0], &cfg).unwrap_err();
        assert!(matches!(err, Error::Causality { wd: 0, .. }));
    }

    #[test]
    fn objective_coefficients_arithmetic() {
        let mut cfg = unit_cfg(2);
        cfg.per_wd[0].weight = 1.5;
        cfg.per_wd[1].weight = 1.0;
        let state = QueueState {
            data: vec![0.0, 1e6],
            energy: vec![3.0, 4.0],
        };
        let (a, y) = objective_coefficients(&state, &cfg);
        assert_eq!(a[0], 30.0);
        assert_eq!(a[1], 1_000_020.0);
        assert_eq!(y, vec![3.0, 4.0]);
    }

    #[test]
    fn objective_is_monotone_in_queue() {
        let cfg = unit_cfg(1);
        let lo = QueueState {
            data: vec![1e5],
            energy: vec![0.0],
        };
        let hi = QueueState {
            data: vec![2e5],
            energy: vec![0.0],
        };
        let (a_lo, _) = objective_coefficients(&lo, &cfg);
        let (a_hi, _) = objective_coefficients(&hi, &cfg);
        assert!(a_hi[0] > a_lo[0]);
    }

    #[test]
    fn per_frame_objective_matches_hand_sum() {
        // independent recomputation: evaluate the two branch formulas by
        // hand and combine
        let cfg = unit_cfg(2);
        let action = OffloadAction {
            bits: vec![false, true],
        };
        let mut alloc = ResourceAllocation::zero(2);
        alloc.cpu[0] = 1.7e8;
        alloc.tau[1] = 0.6;
        alloc.offload_energy[1] = 0.03;
        let h = vec![2e-11, 4e-11];
        let state = QueueState {
            data: vec![4e6, 7e6],
            energy: vec![12.0, 340.0],
        };
        alloc.offload_rate[1] = offload_bits(alloc.tau[1], alloc.offload_energy[1], h[1], &cfg).unwrap();

        let g = per_frame_objective(&action, &alloc, &state, &h, &cfg).unwrap();

        let a0 = 4e6 + 20.0 * 1.5;
        let a1 = 7e6 + 20.0 * 1.0;
        let r0 = 1.7e8 / 100.0;
        let e0 = 1e-26 * 1.7e8f64.powi(3);
        let r1 = 2e6 * 0.6 / 1.1 * (1.0 + 0.03 * 4e-11 / (0.6 * cfg.noise_power)).log2();
        let e1 = 0.03;
        let expected = a0 * r0 - 12.0 * e0 + a1 * r1 - 340.0 * e1;
        assert!((g - expected).abs() / expected.abs() < 1e-12);
    }

    #[test]
    fn zero_allocation_objective_is_zero() {
        let cfg = unit_cfg(3);
        let action = OffloadAction::all_local(3);
        let alloc = ResourceAllocation::zero(3);
        let state = QueueState {
            data: vec![1e6, 2e6, 0.0],
            energy: vec![1.0, 2.0, 3.0],
        };
        let h = vec![1e-10; 3];
        assert_eq!(
            per_frame_objective(&action, &alloc, &state, &h, &cfg).unwrap(),
            0.0
        );
    }
}
