//! Per-frame decision procedures for the four schemes and the frame loop
//! that ties decisions to the queue dynamics.
//!
//! The DRL scheme runs actor -> critic -> selection -> replay/training in
//! one `decide` call; the benchmarks wrap the binary search routines over
//! the same allocator. `step` owns a frame: sample channels, decide,
//! execute, sample arrivals, update queues, emit the record.

use std::str::FromStr;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::allocator::{solve_allocation, solve_myopic_allocation, AllocatorOptions};
use crate::domain::{FrameInput, FrameRecord, OffloadAction, ResourceAllocation, SystemConfig};
use crate::env::{reference_gain, substream, EnvState, Stream};
use crate::error::{Error, Result};
use crate::learner::{ReplayMemory, Trainer, TrainerConfig};
use crate::mlp::{InitScheme, PolicyNetwork};
use crate::quantizer::{nop_candidates, QuantizerState};
use crate::queueing::{frame_rate_energy, update_queues, QueueState};
use crate::scalar::Real;

/// Networks at most this large are searched exhaustively by the myopic
/// scheme; larger ones fall back to coordinate descent.
const MYOPIC_EXHAUSTIVE_MAX_WD: usize = 12;

/// Divisor applied to the virtual energy queues when building DNN features.
const ENERGY_FEATURE_SCALE: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Lydroo,
    Lycd,
    Myopic,
    Exhaustive,
}

impl SchemeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeKind::Lydroo => "lydroo",
            SchemeKind::Lycd => "lycd",
            SchemeKind::Myopic => "myopic",
            SchemeKind::Exhaustive => "exhaustive",
        }
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lydroo" => Ok(SchemeKind::Lydroo),
            "lycd" => Ok(SchemeKind::Lycd),
            "myopic" => Ok(SchemeKind::Myopic),
            "exhaustive" => Ok(SchemeKind::Exhaustive),
            other => Err(Error::InvalidInput(format!(
                "unknown scheme '{other}' (expected lydroo|lycd|myopic|exhaustive)"
            ))),
        }
    }
}

/// Engine-level knobs shared by every scheme.
#[derive(Debug, Clone)]
pub struct RunOptions<R> {
    pub allocator: AllocatorOptions<R>,
    /// Evaluate candidate actions / bit flips on the rayon pool.
    pub parallel: bool,
}

impl<R: Real> Default for RunOptions<R> {
    fn default() -> Self {
        RunOptions {
            allocator: AllocatorOptions::default(),
            parallel: true,
        }
    }
}

/// Hyperparameters of the DRL scheme.
#[derive(Debug, Clone)]
pub struct LydrooOptions<R> {
    pub replay_capacity: usize,
    pub trainer: TrainerConfig<R>,
    /// Frames between candidate-count updates.
    pub quantizer_interval: u64,
    pub init: InitScheme,
}

impl<R: Real> Default for LydrooOptions<R> {
    fn default() -> Self {
        let replay_capacity = 1024;
        LydrooOptions {
            replay_capacity,
            trainer: TrainerConfig::for_capacity(replay_capacity),
            quantizer_interval: 32,
            init: InitScheme::default(),
        }
    }
}

/// The DRL scheme's mutable state.
pub struct LydrooState<R> {
    pub net: PolicyNetwork<R>,
    trainer: Trainer<R>,
    replay: ReplayMemory<R>,
    quantizer: QuantizerState,
    noise_rng: ChaCha8Rng,
    channel_ref: R,
}

/// One scheme instance: discriminator plus scheme-specific state.
pub enum Scheme<R> {
    Lydroo(Box<LydrooState<R>>),
    Lycd,
    Exhaustive,
    Myopic {
        /// Joules spent so far per WD; nondecreasing over frames.
        cumulative_energy: Vec<R>,
    },
}

impl<R: Real> Scheme<R> {
    pub fn new(
        kind: SchemeKind,
        cfg: &SystemConfig<R>,
        seed: u64,
        lydroo: &LydrooOptions<R>,
    ) -> Result<Self> {
        Ok(match kind {
            SchemeKind::Lycd => Scheme::Lycd,
            SchemeKind::Exhaustive => Scheme::Exhaustive,
            SchemeKind::Myopic => Scheme::Myopic {
                cumulative_energy: vec![R::zero(); cfg.n_wd],
            },
            SchemeKind::Lydroo => {
                let mut init_rng = substream(seed, Stream::NetInit);
                let net = PolicyNetwork::new(cfg.n_wd, lydroo.init, &mut init_rng);
                let trainer = Trainer::new(
                    lydroo.trainer.clone(),
                    &net,
                    substream(seed, Stream::ReplaySample),
                );
                Scheme::Lydroo(Box::new(LydrooState {
                    net,
                    trainer,
                    replay: ReplayMemory::new(lydroo.replay_capacity),
                    quantizer: QuantizerState::new(cfg.n_wd, lydroo.quantizer_interval),
                    noise_rng: substream(seed, Stream::QuantizerNoise),
                    channel_ref: reference_gain(cfg)?,
                }))
            }
        })
    }

    pub fn kind(&self) -> SchemeKind {
        match self {
            Scheme::Lydroo(_) => SchemeKind::Lydroo,
            Scheme::Lycd => SchemeKind::Lycd,
            Scheme::Exhaustive => SchemeKind::Exhaustive,
            Scheme::Myopic { .. } => SchemeKind::Myopic,
        }
    }
}

/// Outcome of one per-frame decision.
pub struct Decision<R> {
    pub action: OffloadAction,
    pub allocation: ResourceAllocation<R>,
    pub objective: R,
    pub candidate_count: Option<usize>,
    pub best_index: Option<usize>,
    pub best_index_mod: Option<usize>,
    pub training_loss: Option<R>,
    pub decide_seconds: f64,
}

/// Normalized DNN input: per-WD channel gain relative to the nearest WD's
/// mean gain, data queue in data units, energy queue scaled down. All stay O(1)
/// in the regimes the simulator targets.
pub fn features<R: Real>(input: &FrameInput<R>, channel_ref: R) -> Vec<R> {
    let scale = R::of(ENERGY_FEATURE_SCALE);
    let mut f = Vec::with_capacity(3 * input.channel.len());
    f.extend(input.channel.iter().map(|&h| h / channel_ref));
    f.extend(input.data_queue.iter().copied());
    f.extend(input.energy_queue.iter().map(|&y| y / scale));
    f
}

fn evaluate_candidates<R: Real>(
    candidates: &[OffloadAction],
    input: &FrameInput<R>,
    cfg: &SystemConfig<R>,
    opts: &RunOptions<R>,
) -> Result<(usize, ResourceAllocation<R>, R)> {
    // duplicates are common once the policy sharpens; evaluate each distinct
    // action once but report the original candidate index, which is what
    // the adaptive candidate-count update keys on
    let mut distinct: Vec<(usize, &OffloadAction)> = Vec::new();
    for (idx, action) in candidates.iter().enumerate() {
        if !distinct.iter().any(|(_, a)| *a == action) {
            distinct.push((idx, action));
        }
    }
    let solve = |action: &OffloadAction| solve_allocation(action, input, cfg, &opts.allocator);
    // thread spawn/sync overhead dwarfs the work once the policy has
    // sharpened to a handful of candidates
    let results: Vec<(ResourceAllocation<R>, R)> = if opts.parallel && distinct.len() > 8 {
        distinct
            .par_iter()
            .map(|(_, a)| solve(a))
            .collect::<Result<_>>()?
    } else {
        distinct
            .iter()
            .map(|(_, a)| solve(a))
            .collect::<Result<_>>()?
    };
    let mut best = 0;
    for k in 1..results.len() {
        if results[k].1 > results[best].1 {
            best = k;
        }
    }
    let (alloc, g) = results.into_iter().nth(best).expect("nonempty candidates");
    Ok((distinct[best].0, alloc, g))
}

fn decide_lydroo<R: Real>(
    state: &mut LydrooState<R>,
    input: &FrameInput<R>,
    t: u64,
    cfg: &SystemConfig<R>,
    opts: &RunOptions<R>,
) -> Result<Decision<R>> {
    state.quantizer.maybe_update(t);
    let started = Instant::now();

    let feats = features(input, state.channel_ref);
    let relaxed = state.net.forward(&feats);
    let m = state.quantizer.candidate_count();
    let candidates = nop_candidates(&relaxed, m, &mut state.noise_rng)?;
    let (best_index, allocation, objective) =
        evaluate_candidates(&candidates, input, cfg, opts)?;
    let action = candidates[best_index].clone();
    let decide_seconds = started.elapsed().as_secs_f64();

    let best_index_mod = state.quantizer.record_selection(best_index);
    state.replay.store(feats, &action);
    let training_loss = state.trainer.maybe_train(&state.replay, &mut state.net, t);

    Ok(Decision {
        action,
        allocation,
        objective,
        candidate_count: Some(m),
        best_index: Some(best_index),
        best_index_mod: Some(best_index_mod),
        training_loss,
        decide_seconds,
    })
}

impl<R: Real> Scheme<R> {
    /// Chooses the frame's action and allocation for observation `input` at
    /// frame `t` (1-based).
    pub fn decide(
        &mut self,
        input: &FrameInput<R>,
        t: u64,
        cfg: &SystemConfig<R>,
        opts: &RunOptions<R>,
    ) -> Result<Decision<R>> {
        input.validate(cfg.n_wd)?;
        match self {
            Scheme::Lydroo(state) => decide_lydroo(state, input, t, cfg, opts),
            Scheme::Lycd => {
                let started = Instant::now();
                let (action, allocation, objective) = crate::search::coordinate_descent_best(
                    cfg.n_wd,
                    |x| solve_allocation(x, input, cfg, &opts.allocator),
                    opts.parallel,
                    None,
                )?;
                Ok(Decision {
                    action,
                    allocation,
                    objective,
                    candidate_count: None,
                    best_index: None,
                    best_index_mod: None,
                    training_loss: None,
                    decide_seconds: started.elapsed().as_secs_f64(),
                })
            }
            Scheme::Exhaustive => {
                let started = Instant::now();
                let (action, allocation, objective) = crate::search::exhaustive_best(
                    cfg.n_wd,
                    |x| solve_allocation(x, input, cfg, &opts.allocator),
                    opts.parallel,
                )?;
                Ok(Decision {
                    action,
                    allocation,
                    objective,
                    candidate_count: None,
                    best_index: None,
                    best_index_mod: None,
                    training_loss: None,
                    decide_seconds: started.elapsed().as_secs_f64(),
                })
            }
            Scheme::Myopic { cumulative_energy } => {
                let started = Instant::now();
                // spendable energy: average-power budget accrued up to this
                // frame minus everything already consumed
                let budgets: Vec<R> = cumulative_energy
                    .iter()
                    .zip(&cfg.per_wd)
                    .map(|(&spent, wd)| {
                        (R::of(t as f64) * wd.power_threshold * cfg.frame_duration - spent)
                            .max(R::zero())
                    })
                    .collect();
                let eval =
                    |x: &OffloadAction| solve_myopic_allocation(x, input, &budgets, cfg, &opts.allocator);
                let (action, allocation, objective) = if cfg.n_wd <= MYOPIC_EXHAUSTIVE_MAX_WD {
                    crate::search::exhaustive_best(cfg.n_wd, eval, opts.parallel)?
                } else {
                    crate::search::coordinate_descent_best(cfg.n_wd, eval, opts.parallel, None)?
                };
                Ok(Decision {
                    action,
                    allocation,
                    objective,
                    candidate_count: None,
                    best_index: None,
                    best_index_mod: None,
                    training_loss: None,
                    decide_seconds: started.elapsed().as_secs_f64(),
                })
            }
        }
    }
}

/// Runs one frame end to end and returns the record plus the advanced
/// queue state. Feasibility violations abort: they indicate solver bugs.
pub fn step<R: Real>(
    scheme: &mut Scheme<R>,
    env: &mut EnvState<R>,
    queues: &QueueState<R>,
    t: u64,
    cfg: &SystemConfig<R>,
    opts: &RunOptions<R>,
) -> Result<(FrameRecord<R>, QueueState<R>)> {
    let channel = env.sample_channels();
    let input = FrameInput {
        channel,
        data_queue: queues.data.clone(),
        energy_queue: queues.energy.clone(),
    };
    let decision = scheme.decide(&input, t, cfg, opts)?;

    // hard feasibility gate on every executed frame
    let queue_bits: Vec<R> = queues.data.iter().map(|&q| q * cfg.data_unit).collect();
    decision
        .allocation
        .validate(&decision.action, cfg, &queue_bits)?;

    let (rate, power) = frame_rate_energy(&decision.action, &decision.allocation, &input.channel, cfg)?;
    let t_frame = cfg.frame_duration;
    let mut processed_du = Vec::with_capacity(cfg.n_wd);
    for i in 0..cfg.n_wd {
        let d = rate[i] * t_frame / cfg.data_unit;
        if !crate::domain::within_slack(d, queues.data[i]) {
            return Err(Error::Causality {
                wd: i,
                processed: (d * cfg.data_unit).as_f64(),
                queued: (queues.data[i] * cfg.data_unit).as_f64(),
            });
        }
        processed_du.push(d.min(queues.data[i]));
    }

    if let Scheme::Myopic { cumulative_energy } = scheme {
        for (spent, &p) in cumulative_energy.iter_mut().zip(&power) {
            *spent += p * t_frame;
        }
    }

    let arrivals_bits = env.sample_arrivals();
    let arrivals_du: Vec<R> = arrivals_bits.iter().map(|&a| a / cfg.data_unit).collect();
    let next = update_queues(queues, &processed_du, &power, &arrivals_du, cfg)?;

    let record = FrameRecord {
        frame: t,
        data_queue_bits: queue_bits,
        energy_queue: input.energy_queue.clone(),
        channel: input.channel,
        action: decision.action,
        allocation: decision.allocation,
        processed_bits: processed_du.iter().map(|&d| d * cfg.data_unit).collect(),
        rate,
        power,
        arrivals_bits,
        objective: decision.objective,
        candidate_count: decision.candidate_count,
        best_index: decision.best_index,
        best_index_mod: decision.best_index_mod,
        training_loss: decision.training_loss,
        decide_seconds: decision.decide_seconds,
    };
    Ok((record, next))
}
