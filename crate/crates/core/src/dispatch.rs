//! Chooses the max-flow algorithm by the size of the flow bound being tried.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::fifo_schedule;
use crate::error::{Error, Result};
use crate::maxflow_exact::{convert_schedule, dp_constant_pieces, dp_simplified, simplify_instance};
use crate::maxflow_lp::randomized_maxflow_round;
use crate::metrics::evaluate_max_flow;
use crate::params::eps_reciprocal;
use crate::types::{Instance, Schedule, Time};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolvePath {
    Empty,
    Constant,
    Simplified,
    Lp { derandomized: bool },
}

impl std::fmt::Display for SolvePath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolvePath::Empty => f.write_str("empty"),
            SolvePath::Constant => f.write_str("dp-constant"),
            SolvePath::Simplified => f.write_str("dp-simplified"),
            SolvePath::Lp { derandomized: false } => f.write_str("lp-random"),
            SolvePath::Lp { derandomized: true } => f.write_str("lp-derand"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub eps: f64,
    pub force: bool,
    pub seed: u64,
    /// Largest bound handled by the exact DP; default `1/eps^2`.
    pub constant_limit: Option<Time>,
    /// Largest bound handled by the simplified DP; default `(1/eps^3) ln m`.
    pub simplified_limit: Option<f64>,
}

impl SolveOptions {
    pub fn new(eps: f64) -> Self {
        SolveOptions {
            eps,
            force: false,
            seed: 0,
            constant_limit: None,
            simplified_limit: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MaxFlowSolution {
    pub schedule: Schedule,
    /// The bound at which the chosen algorithm first succeeded.
    pub bound: Time,
    pub max_flow: Time,
    pub path: SolvePath,
}

/// Tries bounds `1, 2, ...` up to the FIFO value, handing each to the algorithm
/// its size calls for, and returns the first success.
pub fn solve_maxflow(instance: &Instance, opts: &SolveOptions) -> Result<MaxFlowSolution> {
    let k = eps_reciprocal(opts.eps)?;
    if instance.is_empty() {
        return Ok(MaxFlowSolution {
            schedule: Schedule::new(),
            bound: 0,
            max_flow: 0,
            path: SolvePath::Empty,
        });
    }
    let constant_limit = opts.constant_limit.unwrap_or(k * k);
    let simplified_limit = opts
        .simplified_limit
        .unwrap_or(((k * k * k) as f64) * (instance.len() as f64).ln());
    let fifo = evaluate_max_flow(instance, &fifo_schedule(instance))
        .max_flow
        .expect("FIFO serves every request");
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let upper = fifo + k;
    for bound in 1..=upper {
        let (attempt, path) = if bound <= constant_limit {
            (dp_constant_pieces(instance, bound, opts.force), SolvePath::Constant)
        } else if (bound as f64) <= simplified_limit {
            if bound % k != 0 {
                continue;
            }
            let attempt = simplify_instance(instance, bound, opts.eps)
                .and_then(|s| dp_simplified(&s))
                .and_then(|ts| convert_schedule(&ts, opts.eps, bound));
            (attempt, SolvePath::Simplified)
        } else {
            match randomized_maxflow_round(instance, bound, opts.eps, &mut rng) {
                Ok(r) => (Ok(r.schedule), SolvePath::Lp { derandomized: r.derandomized }),
                Err(e) => (Err(e), SolvePath::Lp { derandomized: false }),
            }
        };
        match attempt {
            Ok(schedule) => {
                let max_flow = evaluate_max_flow(instance, &schedule).max_flow.ok_or_else(|| {
                    Error::Internal(format!("{path} schedule leaves a request unserved"))
                })?;
                return Ok(MaxFlowSolution {
                    schedule,
                    bound,
                    max_flow,
                    path,
                });
            }
            Err(Error::Infeasible) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Internal(format!("no algorithm succeeded up to bound {upper}")))
}
