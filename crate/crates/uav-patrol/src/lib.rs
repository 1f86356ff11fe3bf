//! Planning library for multi-UAV patrol missions with edge offloading.
//!
//! A fleet of UAVs must visit a set of cruise points, collect inspection
//! data at each one, and get that data processed, either on the onboard
//! CPU or by offloading it to ground base stations while cruising toward
//! the next point. The pipeline splits the mission into three stages:
//!
//! 1. [`assignment`]: partition cruise points across UAVs, balancing
//!    flight distance, data load, and offload capacity.
//! 2. [`routing`]: order each UAV's points into an open path with a
//!    hybrid time-energy edge weight.
//! 3. [`trajectory`]: per mission leg, optimize waypoints, slot
//!    durations, the TDMA offload schedule, and CPU frequencies.
//!
//! [`harness`] glues the stages together, runs baseline strategies for
//! comparison, and emits CSV/SVG artifacts; [`scenario`] holds the world
//! model; [`channel`] and [`energy`] provide the physical primitives.

pub mod assignment;
pub mod channel;
pub mod energy;
pub mod harness;
pub mod output;
pub mod routing;
pub mod scenario;
pub mod trajectory;

pub use harness::{compare_strategies, run_strategy, Strategy};
pub use scenario::{generate_scenario, load_scenario, save_scenario, Scenario};

/// Crate-wide error type.
///
/// `Infeasible` is reserved for missions that violate a hard resource
/// bound (capacity, data deadline); the CLI maps it to exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;
