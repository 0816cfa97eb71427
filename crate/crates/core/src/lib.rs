//! Broadcast scheduling with unit pages: a PTAS pipeline for maximum flow time,
//! LP roundings for weighted throughput, and brute-force oracles to check them.
//!
//! Times are integers, a transmission at time `t >= 1` satisfies every outstanding
//! request for its page released strictly before `t`.

pub mod baselines;
pub mod derand;
pub mod dispatch;
pub mod error;
pub mod generate;
pub mod io;
mod lp;
pub mod maxflow_exact;
pub mod maxflow_lp;
pub mod metrics;
pub mod oracles;
pub mod params;
pub mod throughput_lp;
pub mod throughput_rounding;
pub mod types;

pub use error::{Error, Result};
pub use types::{reduce_horizon, FractionalSchedule, Instance, PageId, Request, Schedule, TentativeSchedule, Time, TOL};
