//! Shared test-side oracles: brute-force grid search over the per-frame
//! allocation problem and random instance generation. Everything here is
//! independent of the solver's internals: values come from direct
//! evaluation of the rate/energy formulas on dense grids.

use lydroo::env::{mean_gain, substream, Stream};
use lydroo::{FrameInput, OffloadAction, SystemConfig};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Grid steps pinned by the acceptance setup: 1e-3 on tau and on
/// e/(P^max tau), 1e4 Hz on f.
pub const TAU_STEP: f64 = 1e-3;
pub const ENERGY_RATIO_STEP: f64 = 1e-3;
pub const CPU_STEP: f64 = 1e4;

/// Offloaded data per frame in data units, from the raw formulas.
fn rate_du(tau: f64, e: f64, h: f64, cfg: &SystemConfig<f64>) -> f64 {
    if tau <= 0.0 || e <= 0.0 {
        return 0.0;
    }
    let t = cfg.frame_duration;
    let snr = e * h / (tau * t * cfg.noise_power);
    cfg.bandwidth * tau * t / cfg.rate_overhead * (1.0 + snr).log2() / cfg.data_unit
}

/// Best offloading contribution of one user at fixed `tau` by scanning the
/// energy grid: maximizes `a min(q, r) - y e` over `e = ratio p_max tau`,
/// optionally capped by an absolute energy budget.
fn best_energy_value(
    tau: f64,
    a: f64,
    y: f64,
    q: f64,
    h: f64,
    p_max: f64,
    budget: Option<f64>,
    cfg: &SystemConfig<f64>,
) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let mut best = 0.0f64;
    let steps = (1.0 / ENERGY_RATIO_STEP) as usize;
    for k in 0..=steps {
        let mut e = k as f64 * ENERGY_RATIO_STEP * p_max * tau;
        if let Some(b) = budget {
            e = e.min(b);
        }
        let value = a * rate_du(tau, e, h, cfg).min(q) - y * e;
        if value > best {
            best = value;
        }
    }
    best
}

/// Best local contribution of one user by scanning the CPU grid (including
/// the exact cap), maximizing `a f/phi - y kappa f^3` under the frequency,
/// queue, and optional energy-budget caps.
fn best_local_value(
    a: f64,
    y: f64,
    q: f64,
    cpu_max: f64,
    budget: Option<f64>,
    cfg: &SystemConfig<f64>,
) -> f64 {
    let t = cfg.frame_duration;
    let phi_du = cfg.cycles_per_bit * cfg.data_unit;
    let mut cap = cpu_max.min(phi_du * q / t);
    if let Some(b) = budget {
        cap = cap.min((b / (cfg.energy_efficiency * t)).cbrt());
    }
    if cap <= 0.0 {
        return 0.0;
    }
    let value = |f: f64| {
        a * f * t / phi_du - y * cfg.energy_efficiency * f * f * f * t
    };
    let mut best = value(cap);
    let mut f = 0.0;
    while f < cap {
        let v = value(f);
        if v > best {
            best = v;
        }
        f += CPU_STEP;
    }
    best
}

/// Grid-search value of the drift-plus-penalty allocation problem for a
/// fixed action with at most two offloaders.
pub fn oracle_allocation_value(
    action: &OffloadAction,
    input: &FrameInput<f64>,
    cfg: &SystemConfig<f64>,
) -> f64 {
    oracle_value(action, input, None, cfg)
}

/// Grid-search value of the myopic problem (weights as objective, zero
/// virtual queues, per-WD energy budgets).
pub fn oracle_myopic_value(
    action: &OffloadAction,
    input: &FrameInput<f64>,
    budgets: &[f64],
    cfg: &SystemConfig<f64>,
) -> f64 {
    oracle_value(action, input, Some(budgets), cfg)
}

fn oracle_value(
    action: &OffloadAction,
    input: &FrameInput<f64>,
    budgets: Option<&[f64]>,
    cfg: &SystemConfig<f64>,
) -> f64 {
    let n = cfg.n_wd;
    let myopic = budgets.is_some();
    let mut total = 0.0;
    let mut offloaders = Vec::new();
    for i in 0..n {
        let (a, y) = if myopic {
            (cfg.per_wd[i].weight, 0.0)
        } else {
            (
                input.data_queue[i] + cfg.lyapunov_v * cfg.per_wd[i].weight,
                input.energy_queue[i],
            )
        };
        let budget = budgets.map(|b| b[i]);
        if action.bits[i] {
            offloaders.push((i, a, y, budget));
        } else {
            total += best_local_value(
                a,
                y,
                input.data_queue[i],
                cfg.per_wd[i].cpu_max,
                budget,
                cfg,
            );
        }
    }

    let user_value = |&(i, a, y, budget): &(usize, f64, f64, Option<f64>), tau: f64| {
        best_energy_value(
            tau,
            a,
            y,
            input.data_queue[i],
            input.channel[i],
            cfg.per_wd[i].tx_power_max,
            budget,
            cfg,
        )
    };

    match offloaders.len() {
        0 => {}
        1 => {
            let steps = (1.0 / TAU_STEP) as usize;
            let mut best = 0.0f64;
            for k in 0..=steps {
                let v = user_value(&offloaders[0], k as f64 * TAU_STEP);
                if v > best {
                    best = v;
                }
            }
            total += best;
        }
        2 => {
            // the objective never decreases in either time share, so the
            // full budget tau1 + tau2 = 1 is scanned
            let steps = (1.0 / TAU_STEP) as usize;
            let mut best = 0.0f64;
            for k in 0..=steps {
                let tau1 = k as f64 * TAU_STEP;
                let v = user_value(&offloaders[0], tau1) + user_value(&offloaders[1], 1.0 - tau1);
                if v > best {
                    best = v;
                }
            }
            total += best;
        }
        more => panic!("oracle supports at most 2 offloaders, got {more}"),
    }
    total
}

/// A random but physically plausible frame observation, spanning small and
/// large queues (both sides of the queue cap) and idle or loaded virtual
/// energy queues.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    n: usize,
    cfg: &SystemConfig<f64>,
) -> FrameInput<f64> {
    let channel = (0..n)
        .map(|_| {
            let d = rng.random_range(120.0..255.0);
            mean_gain::<f64>(d).unwrap() * rng.random_range(0.2..3.0)
        })
        .collect();
    let du = cfg.data_unit;
    let data_queue = (0..n)
        .map(|_| rng.random_range(0.05..12.0) * 1e6 / du)
        .collect();
    let energy_queue = (0..n)
        .map(|_| {
            if rng.random_bool(0.3) {
                0.0
            } else {
                rng.random_range(1.0..2000.0)
            }
        })
        .collect();
    FrameInput {
        channel,
        data_queue,
        energy_queue,
    }
}

/// Random action with at most `max_offloaders` ones.
pub fn random_action(rng: &mut ChaCha8Rng, n: usize, max_offloaders: usize) -> OffloadAction {
    loop {
        let bits: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        if bits.iter().filter(|&&b| b).count() <= max_offloaders {
            return OffloadAction { bits };
        }
    }
}

pub fn instance_rng(seed: u64) -> ChaCha8Rng {
    substream(seed, Stream::Instance)
}

/// Analytic-versus-finite-difference gradient comparison for the policy
/// network. Returns (max relative error over checked coordinates, number of
/// coordinates excluded for sitting on a ReLU kink, total coordinates).
///
/// Central differences are invalid across a ReLU boundary: the two
/// evaluations land on different linear pieces. Such coordinates are
/// detected by comparing the hidden-layer activation signs at `theta +- h`
/// and excluded, which is the standard finite-difference validity filter.
pub fn gradient_check(seed: u64) -> (f64, usize, usize) {
    use lydroo::{InitScheme, PolicyNetwork};

    let n_wd = 2;
    let mut rng = substream(seed, Stream::NetInit);
    let mut net = PolicyNetwork::<f64>::new(n_wd, InitScheme::ScaledNormal, &mut rng);

    let batch_features: Vec<Vec<f64>> = (0..4)
        .map(|s| {
            (0..3 * n_wd)
                .map(|i| ((seed as f64 + 1.0) * (s * 7 + i + 1) as f64 * 0.713).sin())
                .collect()
        })
        .collect();
    let batch_labels: Vec<Vec<f64>> = (0..4)
        .map(|s| (0..n_wd).map(|i| ((s + i) % 2) as f64).collect())
        .collect();
    let batch: Vec<(&[f64], &[f64])> = batch_features
        .iter()
        .zip(&batch_labels)
        .map(|(f, l)| (f.as_slice(), l.as_slice()))
        .collect();

    let (_, analytic) = net.loss_and_gradient(&batch);
    let base = net.params();
    let step = 1e-5;
    let mut max_rel = 0.0f64;
    let mut excluded = 0usize;

    // ReLU activity pattern of every hidden unit across the batch
    let relu_signs = |net: &PolicyNetwork<f64>| -> Vec<bool> {
        batch_features
            .iter()
            .flat_map(|f| net.forward_cached(f).relu_pattern())
            .collect()
    };

    for k in 0..base.len() {
        let mut up = base.clone();
        up[k] += step;
        net.set_params(&up);
        let loss_up = net.loss(&batch);
        let signs_up = relu_signs(&net);

        let mut down = base.clone();
        down[k] -= step;
        net.set_params(&down);
        let loss_down = net.loss(&batch);
        let signs_down = relu_signs(&net);

        net.set_params(&base);

        let fd = (loss_up - loss_down) / (2.0 * step);
        let a = analytic[k];
        if signs_up != signs_down {
            excluded += 1;
            continue;
        }
        // absolute floor: central differences carry ~1e-11 round-off at
        // this step size, so gradients below 1e-6 can only be compared
        // absolutely, which the floor does implicitly
        let denom = a.abs().max(fd.abs()).max(1e-6);
        let rel = (a - fd).abs() / denom;
        if rel > max_rel {
            max_rel = rel;
        }
    }
    (max_rel, excluded, base.len())
}
