//! Discrete-time simulator and optimization library for stable online
//! computation offloading in a multi-user mobile-edge-computing network.
//!
//! Each frame, every device either computes queued task data locally or
//! offloads it to the edge server over a shared TDMA uplink. A
//! drift-plus-penalty objective (data queues plus virtual energy queues)
//! turns the long-term throughput/stability/average-power problem into a
//! per-frame mixed-integer program; the binary offloading action is picked
//! by a learned actor with an exact convex critic (`lydroo`), coordinate
//! descent (`lycd`), exhaustive enumeration, or a queue-blind myopic
//! baseline, with the continuous resource allocation always solved exactly.
//!
//! The core is generic over the scalar type (`f32`/`f64`) via [`Real`];
//! the aliases below pin the double-precision instantiation the harness
//! runs with.

pub mod allocator;
pub mod domain;
pub mod engine;
pub mod env;
pub mod error;
pub mod harness;
pub mod learner;
pub mod metrics;
pub mod mlp;
pub mod quantizer;
pub mod queueing;
pub mod scalar;
pub mod search;

pub use error::{Error, Result};
pub use scalar::Real;

pub use allocator::{solve_allocation, solve_myopic_allocation, AllocatorOptions};
pub use domain::{
    validate_config, FrameInput, FrameRecord, OffloadAction, ResourceAllocation, SystemConfig,
    WdProfile,
};
pub use engine::{step, Decision, LydrooOptions, RunOptions, Scheme, SchemeKind};
pub use env::EnvState;
pub use harness::{
    load_config, parse_config_str, run_experiment, run_experiment_with, RunConfig, RunOutput,
    RunSummary,
};
pub use learner::{ReplayMemory, Trainer, TrainerConfig};
pub use metrics::{moving_average, stability_verdict, StabilityOptions, StabilityVerdict};
pub use mlp::{Adam, InitScheme, PolicyNetwork};
pub use quantizer::{nop_candidates, opq_quantize, QuantizerState};
pub use queueing::{
    frame_rate_energy, local_bits_energy, objective_coefficients, offload_bits,
    per_frame_objective, update_queues, QueueState,
};
pub use search::{coordinate_descent_best, exhaustive_best};

/// Double-precision instantiations used by the CLI and the test harness.
pub type SystemConfig64 = SystemConfig<f64>;
pub type FrameInput64 = FrameInput<f64>;
pub type ResourceAllocation64 = ResourceAllocation<f64>;
pub type FrameRecord64 = FrameRecord<f64>;
pub type QueueState64 = QueueState<f64>;
pub type EnvState64 = EnvState<f64>;
pub type PolicyNetwork64 = PolicyNetwork<f64>;
pub type Scheme64 = Scheme<f64>;
pub type AllocatorOptions64 = AllocatorOptions<f64>;
pub type RunOptions64 = RunOptions<f64>;
