//! Brute-force optima and a Monte Carlo harness.

use std::collections::{BTreeSet, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::fifo_schedule;
use crate::error::{Error, Result};
use crate::metrics::{evaluate_max_flow, evaluate_throughput};
use crate::types::{Instance, PageId, Schedule, Time};

/// Memoised states explored before an oracle gives up.
pub const ORACLE_LIMIT: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub optimum: f64,
    pub witness: Schedule,
    pub explored: u64,
}

struct FlowSearch<'a> {
    inst: &'a Instance,
    limit: u64,
    memo: HashMap<(Time, u64), (Time, Option<PageId>)>,
    explored: u64,
}

impl FlowSearch<'_> {
    /// Smallest achievable max flow over requests still unsatisfied, from time `t` on.
    fn best(&mut self, t: Time, done: u64) -> Result<(Time, Option<PageId>)> {
        let reqs = self.inst.requests();
        let full = if reqs.len() == 64 { u64::MAX } else { (1u64 << reqs.len()) - 1 };
        if done == full {
            return Ok((0, None));
        }
        if let Some(&v) = self.memo.get(&(t, done)) {
            return Ok(v);
        }
        self.explored += 1;
        if self.explored > self.limit {
            return Err(Error::TooLarge(format!("max-flow oracle explored over {} states", self.limit)));
        }
        let pages: BTreeSet<PageId> = reqs
            .iter()
            .enumerate()
            .filter(|(i, r)| done >> i & 1 == 0 && r.release < t)
            .map(|(_, r)| r.page)
            .collect();
        let result = if pages.is_empty() {
            let next = reqs
                .iter()
                .enumerate()
                .filter(|(i, _)| done >> i & 1 == 0)
                .map(|(_, r)| r.release)
                .min()
                .expect("something left");
            let (v, _) = self.best(next + 1, done)?;
            (v, None)
        } else {
            let mut best: Option<(Time, Option<PageId>)> = None;
            for p in pages {
                let mut nd = done;
                let mut worst = 0;
                for (i, r) in reqs.iter().enumerate() {
                    if done >> i & 1 == 0 && r.release < t && r.page == p {
                        nd |= 1 << i;
                        worst = worst.max(t - r.release);
                    }
                }
                let (rest, _) = self.best(t + 1, nd)?;
                let v = worst.max(rest);
                if best.is_none_or(|(b, _)| v < b) {
                    best = Some((v, Some(p)));
                }
            }
            best.expect("non-empty")
        };
        self.memo.insert((t, done), result);
        Ok(result)
    }
}

/// Exact minimum max flow by memoised search over which requests are satisfied.
/// Each step sends some page with an outstanding request, or idles when there is none.
pub fn brute_maxflow(instance: &Instance) -> Result<OracleResult> {
    brute_maxflow_limited(instance, ORACLE_LIMIT)
}

/// [`brute_maxflow`] giving up after `limit` search states.
pub fn brute_maxflow_limited(instance: &Instance, limit: u64) -> Result<OracleResult> {
    if instance.len() > 64 {
        return Err(Error::TooLarge("oracle handles at most 64 requests".into()));
    }
    if instance.is_empty() {
        return Ok(OracleResult {
            optimum: 0.0,
            witness: Schedule::new(),
            explored: 0,
        });
    }
    let mut s = FlowSearch {
        limit,
        inst: instance,
        memo: HashMap::new(),
        explored: 0,
    };
    let (opt, _) = s.best(1, 0)?;
    let mut witness = Schedule::new();
    let mut t = 1;
    let mut done = 0u64;
    let full = if instance.len() == 64 { u64::MAX } else { (1u64 << instance.len()) - 1 };
    while done != full {
        let (_, choice) = s.best(t, done)?;
        match choice {
            Some(p) => {
                witness.assign(t, p)?;
                for (i, r) in instance.requests().iter().enumerate() {
                    if r.release < t && r.page == p {
                        done |= 1 << i;
                    }
                }
                t += 1;
            }
            None => {
                t = instance
                    .requests()
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| done >> i & 1 == 0)
                    .map(|(_, r)| r.release)
                    .min()
                    .expect("something left")
                    + 1;
            }
        }
    }
    debug_assert!(evaluate_max_flow(instance, &witness).max_flow <= evaluate_max_flow(instance, &fifo_schedule(instance)).max_flow);
    Ok(OracleResult {
        optimum: opt as f64,
        witness,
        explored: s.explored,
    })
}

struct ProfitSearch<'a> {
    inst: &'a Instance,
    limit: u64,
    end: Time,
    memo: HashMap<(Time, u64), (f64, Option<PageId>)>,
    explored: u64,
}

impl ProfitSearch<'_> {
    /// Requests still open at `t`: unsatisfied, deadline not passed.
    fn key(&self, t: Time, done: u64) -> u64 {
        let mut k = done;
        for (i, r) in self.inst.requests().iter().enumerate() {
            if r.deadline.expect("throughput") < t {
                k &= !(1 << i);
            }
        }
        k
    }

    fn best(&mut self, t: Time, done: u64) -> Result<(f64, Option<PageId>)> {
        if t > self.end {
            return Ok((0.0, None));
        }
        let done = self.key(t, done);
        if let Some(&v) = self.memo.get(&(t, done)) {
            return Ok(v);
        }
        self.explored += 1;
        if self.explored > self.limit {
            return Err(Error::TooLarge(format!("throughput oracle explored over {} states", self.limit)));
        }
        let reqs = self.inst.requests();
        let live = |i: usize| {
            let (lo, hi) = reqs[i].window().expect("throughput");
            done >> i & 1 == 0 && lo <= t && t <= hi
        };
        let pages: BTreeSet<PageId> = (0..reqs.len()).filter(|&i| live(i)).map(|i| reqs[i].page).collect();
        let result = if pages.is_empty() {
            (self.best(t + 1, done)?.0, None)
        } else {
            let mut best: Option<(f64, Option<PageId>)> = None;
            for p in pages {
                let mut nd = done;
                let mut gain = 0.0;
                for i in 0..reqs.len() {
                    if live(i) && reqs[i].page == p {
                        nd |= 1 << i;
                        gain += reqs[i].weight_or_zero();
                    }
                }
                let v = gain + self.best(t + 1, nd)?.0;
                if best.is_none_or(|(b, _)| v > b) {
                    best = Some((v, Some(p)));
                }
            }
            best.expect("non-empty")
        };
        self.memo.insert((t, done), result);
        Ok(result)
    }
}

/// Exact maximum profit by memoised search over satisfied requests.
pub fn brute_throughput(instance: &Instance) -> Result<OracleResult> {
    brute_throughput_limited(instance, ORACLE_LIMIT)
}

/// [`brute_throughput`] giving up after `limit` search states.
pub fn brute_throughput_limited(instance: &Instance, limit: u64) -> Result<OracleResult> {
    instance.require_throughput()?;
    if instance.len() > 64 {
        return Err(Error::TooLarge("oracle handles at most 64 requests".into()));
    }
    let end = instance.throughput_horizon();
    let mut s = ProfitSearch {
        limit,
        inst: instance,
        end,
        memo: HashMap::new(),
        explored: 0,
    };
    let (opt, _) = s.best(1, 0)?;
    let mut witness = Schedule::new();
    let mut done = 0u64;
    for t in 1..=end {
        if let (_, Some(p)) = s.best(t, done)? {
            witness.assign(t, p)?;
            for (i, r) in instance.requests().iter().enumerate() {
                let (lo, hi) = r.window().expect("throughput");
                if r.page == p && lo <= t && t <= hi {
                    done |= 1 << i;
                }
            }
        }
    }
    let check = evaluate_throughput(instance, &witness)?.profit;
    if (check - opt).abs() > 1e-9 * (1.0 + opt.abs()) {
        return Err(Error::Internal(format!("witness profit {check} differs from optimum {opt}")));
    }
    Ok(OracleResult {
        optimum: opt,
        witness,
        explored: s.explored,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloSummary {
    pub mean: f64,
    pub stderr: f64,
    /// Ten equal-width bins over `[min, max]`: `(low, high, count)`.
    pub histogram: Vec<(f64, f64, usize)>,
    pub values: Vec<f64>,
}

/// Runs `trials` draws from one generator seeded with `seed`.
pub fn monte_carlo<F>(trials: usize, seed: u64, mut run: F) -> Result<MonteCarloSummary>
where
    F: FnMut(&mut ChaCha8Rng) -> Result<f64>,
{
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..trials).map(|_| run(&mut rng)).collect::<Result<_>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = 10;
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in &values {
        let b = if width > 0.0 { (((v - lo) / width) as usize).min(bins - 1) } else { 0 };
        counts[b] += 1;
    }
    let histogram = counts
        .into_iter()
        .enumerate()
        .map(|(b, c)| (lo + b as f64 * width, lo + (b + 1) as f64 * width, c))
        .collect();
    Ok(MonteCarloSummary {
        mean,
        stderr: (var / n).sqrt(),
        histogram,
        values,
    })
}
