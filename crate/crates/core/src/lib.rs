//! Opportunistic cooperative probing and user scheduling for cache-aided relay
//! networks.
//!
//! A base station serves one request at a time. For each arriving user it may
//! deliver directly, drop the user, or probe some cache-equipped relays and then
//! decide again. The throughput-optimal rule prices time at the maximal
//! throughput `eta*`, the root of `Omega(eta) = eta * tau_s`.
//!
//! * [`model`]: configuration, geometry, channels and random draws.
//! * [`delivery`]: rates and latencies of the delivery modes.
//! * [`reward`]: Monte Carlo estimators of the probe reward and of `Omega`.
//! * [`optimizer`]: fixed-point and bisection solvers for `eta*`.
//! * [`policy`]: the threshold policy, its lookup grid and the baselines.
//! * [`sim`]: renewal-reward frame simulator.
//! * [`sweep`]: parameter sweeps with CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod delivery;
pub mod error;
pub mod model;
pub mod optimizer;
pub mod policy;
pub mod reward;
pub mod rng;
pub mod sim;
pub mod sweep;

pub use delivery::{DeliveryMode, DeliveryOutcome};
pub use error::{Error, Result};
pub use model::{Observation, Point, ProbeReport, Request, Scenario, SystemConfig};
pub use optimizer::{EtaSolution, SolveMethod, SolverOptions};
pub use policy::{FirstStageDecision, MLookupGrid, Policy, PolicyKind, SecondStageDecision};
pub use reward::{EstimatorSettings, Estimate, OmegaEstimator, RewardContext};
pub use rng::RandomStream;
pub use sim::{FrameOutcome, SimStats};
