//! Joint user pairing and resource allocation for semantic feature multiple
//! access downlinks.
//!
//! Paired users share one time-frequency group; the interference between
//! their superposed features is a logistic function of transmit power and
//! compression ratio. The solver alternates between compression ratios,
//! power/bandwidth, and the pairing itself, keeping every accepted iterate
//! feasible for latency, energy and distortion constraints.

pub mod compression;
pub mod error;
pub mod feasibility;
pub mod harness;
pub mod link;
pub mod orchestrator;
pub mod pair;
pub mod pairing;
pub mod power_bandwidth;
pub mod profiles;
pub mod scenario;

pub use error::{Error, Result};
pub use pair::Pair;
pub use harness::{RunConfig, ResultRow, AggregateRow};
pub use link::{AllocationState, GroupContext};
pub use orchestrator::{run_scheme, solve_proposed, Scheme, SchemeResult, SolveOptions, SolveTrace};
pub use profiles::{synth_profiles, PairProfileSet, ProfileGenParams, RhoSurface};
pub use scenario::{Scenario, ScenarioParams, SystemBudgets};
