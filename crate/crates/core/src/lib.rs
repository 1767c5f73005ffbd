//! Throughput-optimal spectrum sensing time for a cognitive-radio secondary
//! user that hands over sequentially through a list of primary channels.
//!
//! Two routes to the optimum are provided. The analytic route evaluates the
//! closed-form average throughput and maximizes it over the sensing time
//! ([`optimizer`]). The learning route treats the link as a black box: a
//! small feed-forward network ([`mff`]) learns the cost 1/rate from windowed
//! throughput measurements ([`simenv`]) and a gradient-flow network ([`kc`])
//! settles at the constrained minimum of the learned cost ([`adaptive`]).

pub mod adaptive;
pub mod detector;
pub mod error;
pub mod exec;
pub mod kc;
pub mod link;
pub mod mff;
pub mod optimizer;
pub mod qfunc;
pub mod simenv;

pub use adaptive::{run_adaptive, AdaptiveConfig, AdaptiveOutcome, CycleRecord};
pub use detector::{
    ed_decide, Decision, DetectorConfig, EnergySampler, Hypothesis, OperatingPoint,
};
pub use error::{Error, Result};
pub use exec::{stream_rng, Execution, SimRng};
pub use kc::{run_to_convergence, CostSurface, KcConfig, KcState};
pub use link::{
    capacities, Capacities, ChannelExtension, Fading, Scenario, ThroughputPoint, DEFAULT_P_FREE,
};
pub use mff::{train_step, MffNetwork, TrainingBuffer};
pub use optimizer::{
    max_throughput_l, optimize_tau, optimize_tau_tf, tf_to_alpha_bar, MaxThroughput,
    OptimizationResult, SearchOptions, TradeoffResult,
};
pub use qfunc::{gaussian_tail, gaussian_tail_inverse};
pub use simenv::{
    estimate_throughput, run_slot, simulate_batch, DecisionMode, EstimatorConfig, SlotSimulator,
    SlotStats, SlotTrace,
};
