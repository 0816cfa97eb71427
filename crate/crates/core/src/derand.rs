//! Deterministic alpha selection by pessimistic estimators.

use std::f64::consts::E;

use crate::error::{Error, Result};
use crate::maxflow_lp::{group_profiles, GroupPartition, GroupProfile};
use crate::types::{crossings, snap, FractionalSchedule, Time, TOL};

/// Estimator bookkeeping over all intervals with both endpoints in the restricted time set.
#[derive(Clone, Debug)]
pub struct EstimatorState {
    lambda: f64,
    eps: f64,
    bound: Time,
    intervals: Vec<(Time, Time)>,
    big: Vec<bool>,
    /// `[g][i]`: cumulative group mass before the interval and through its end.
    before: Vec<Vec<f64>>,
    after: Vec<Vec<f64>>,
    mu: Vec<Vec<f64>>,
    ln_denom: Vec<f64>,
    ln_fixed: Vec<f64>,
    ln_free: Vec<f64>,
    fixed: Vec<f64>,
    profiles: Vec<GroupProfile>,
    times: Vec<Time>,
}

fn frac(v: f64) -> f64 {
    let v = snap(v);
    v - v.floor()
}

impl EstimatorState {
    pub fn new(
        fractional: &FractionalSchedule,
        partition: &GroupPartition,
        timesteps: &[Time],
        eps: f64,
        bound: Time,
    ) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0 / 3.0 + TOL) {
            return Err(Error::Regime(format!("derandomisation needs 0 < eps <= 1/3, got {eps}")));
        }
        let lambda = 1.0 + 3.0 * eps;
        let profiles = group_profiles(fractional, partition)?;
        let mut times = timesteps.to_vec();
        times.sort_unstable();
        times.dedup();
        let mut intervals = Vec::new();
        for (i, &a) in times.iter().enumerate() {
            for &b in &times[i..] {
                intervals.push((a, b));
            }
        }
        let k = profiles.len();
        let mut before = vec![Vec::with_capacity(intervals.len()); k];
        let mut after = vec![Vec::with_capacity(intervals.len()); k];
        let mut mu = vec![Vec::with_capacity(intervals.len()); k];
        for (g, prof) in profiles.iter().enumerate() {
            for &(a, b) in &intervals {
                let lo = prof.cum_at(a - 1);
                let hi = prof.cum_at(b);
                before[g].push(lo);
                after[g].push(hi);
                mu[g].push(frac(hi - lo));
            }
        }
        let threshold = eps * bound as f64;
        let mut big = Vec::with_capacity(intervals.len());
        let mut ln_denom = Vec::with_capacity(intervals.len());
        let mut ln_free = Vec::with_capacity(intervals.len());
        for i in 0..intervals.len() {
            let total: f64 = (0..k).map(|g| mu[g][i]).sum();
            let is_big = total >= threshold - TOL;
            big.push(is_big);
            ln_denom.push(if is_big {
                lambda * lambda.ln() * total
            } else {
                6.0 * eps * bound as f64
            });
            ln_free.push((0..k).map(|g| ln_expect(is_big, lambda, mu[g][i])).sum());
        }
        Ok(EstimatorState {
            lambda,
            eps,
            bound,
            ln_fixed: vec![0.0; intervals.len()],
            intervals,
            big,
            before,
            after,
            mu,
            ln_denom,
            ln_free,
            fixed: Vec::new(),
            profiles,
            times,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn group_count(&self) -> usize {
        self.profiles.len()
    }

    pub fn intervals(&self) -> &[(Time, Time)] {
        &self.intervals
    }

    pub fn is_big(&self, i: usize) -> bool {
        self.big[i]
    }

    pub fn mu(&self, g: usize, i: usize) -> f64 {
        self.mu[g][i]
    }

    pub fn mu_total(&self, i: usize) -> f64 {
        (0..self.group_count()).map(|g| self.mu[g][i]).sum()
    }

    pub fn fixed(&self) -> &[f64] {
        &self.fixed
    }

    /// Transmissions of group `g` inside interval `i` at `alpha`, minus the integer part of its mass.
    pub fn realized(&self, g: usize, i: usize, alpha: f64) -> i64 {
        let lo = self.before[g][i];
        let hi = self.after[g][i];
        crossings(lo, hi, alpha) - snap(hi - lo).floor() as i64
    }

    fn ln_real(&self, i: usize, x: i64) -> f64 {
        if self.big[i] {
            x as f64 * self.lambda.ln()
        } else {
            x as f64
        }
    }

    /// Conditional estimator for interval `i` given the currently fixed prefix.
    pub fn estimator(&self, i: usize) -> f64 {
        (self.ln_fixed[i] + self.ln_free[i] - self.ln_denom[i]).exp()
    }

    /// Estimator for interval `i` with the first `prefix.len()` groups fixed to `prefix`,
    /// recomputed from scratch.
    pub fn estimator_with(&self, i: usize, prefix: &[f64]) -> f64 {
        let mut ln = -self.ln_denom[i];
        for g in 0..self.group_count() {
            ln += match prefix.get(g) {
                Some(&a) => self.ln_real(i, self.realized(g, i, a)),
                None => ln_expect(self.big[i], self.lambda, self.mu[g][i]),
            };
        }
        ln.exp()
    }

    pub fn total(&self) -> f64 {
        (0..self.intervals.len()).map(|i| self.estimator(i)).sum()
    }

    /// Estimator sum if the next free group were fixed to `alpha`.
    pub fn total_if(&self, alpha: f64) -> f64 {
        let g = self.fixed.len();
        (0..self.intervals.len())
            .map(|i| {
                let ln = self.ln_fixed[i] + self.ln_real(i, self.realized(g, i, alpha)) + self.ln_free[i]
                    - ln_expect(self.big[i], self.lambda, self.mu[g][i])
                    - self.ln_denom[i];
                ln.exp()
            })
            .sum()
    }

    /// Fixes the next free group.
    pub fn fix(&mut self, alpha: f64) {
        let g = self.fixed.len();
        assert!(g < self.group_count(), "all groups already fixed");
        for i in 0..self.intervals.len() {
            self.ln_fixed[i] += self.ln_real(i, self.realized(g, i, alpha));
            self.ln_free[i] -= ln_expect(self.big[i], self.lambda, self.mu[g][i]);
        }
        self.fixed.push(alpha);
    }

    /// Breakpoints of `alpha -> realized(g, ., alpha)` plus the midpoint of every gap.
    pub fn candidate_alphas(&self, g: usize) -> Vec<f64> {
        let prof = &self.profiles[g];
        let mut points: Vec<f64> = self
            .times
            .iter()
            .flat_map(|&t| [prof.cum_at(t - 1), prof.cum_at(t)])
            .map(frac)
            .filter(|&f| f > TOL && f < 1.0 - TOL)
            .collect();
        points.sort_by(f64::total_cmp);
        points.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
        let mut out = Vec::with_capacity(2 * points.len() + 1);
        let mut prev = 0.0;
        for &b in &points {
            out.push((prev + b) / 2.0);
            out.push(b);
            prev = b;
        }
        out.push((prev + 1.0) / 2.0);
        out
    }

    /// Largest value of `sum_g realized(g, i) - (mu_i + 6 eps L)` over intervals under `alphas`;
    /// non-positive means the overflow guarantee holds everywhere.
    pub fn worst_excess(&self, alphas: &[f64]) -> f64 {
        let slack = 6.0 * self.eps * self.bound as f64;
        (0..self.intervals.len())
            .map(|i| {
                let x: i64 = (0..self.group_count()).map(|g| self.realized(g, i, alphas[g])).sum();
                x as f64 - self.mu_total(i) - slack
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn ln_expect(big: bool, lambda: f64, mu: f64) -> f64 {
    if big {
        ((lambda - 1.0) * mu + 1.0).ln()
    } else {
        ((E - 1.0) * mu + 1.0).ln()
    }
}

/// Breakpoint candidates for group `g`; see [`EstimatorState::candidate_alphas`].
pub fn candidate_alphas(
    fractional: &FractionalSchedule,
    partition: &GroupPartition,
    timesteps: &[Time],
    g: usize,
) -> Result<Vec<f64>> {
    let state = EstimatorState::new(fractional, partition, timesteps, 1.0 / 3.0, 1)?;
    if g >= state.group_count() {
        return Err(Error::InvalidArgument(format!("group {g} out of range")));
    }
    Ok(state.candidate_alphas(g))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Derandomization {
    pub alphas: Vec<f64>,
    pub initial_sum: f64,
    /// `(group, chosen alpha, estimator sum after fixing it)` per sweep step.
    pub trace: Vec<(usize, f64, f64)>,
}

/// Fixes groups in order, each to the candidate minimising the estimator sum
/// (ties to the smallest alpha). Requires the initial sum to be at most `1/m`.
pub fn derandomize(
    fractional: &FractionalSchedule,
    partition: &GroupPartition,
    timesteps: &[Time],
    eps: f64,
    bound: Time,
    requests: usize,
) -> Result<Derandomization> {
    let mut state = EstimatorState::new(fractional, partition, timesteps, eps, bound)?;
    let initial_sum = state.total();
    if requests > 0 && initial_sum > (1.0 / requests as f64) * (1.0 + 1e-12) {
        return Err(Error::Regime(format!(
            "initial estimator sum {initial_sum:.3e} exceeds 1/m = {:.3e}",
            1.0 / requests as f64
        )));
    }
    let mut trace = Vec::with_capacity(state.group_count());
    for g in 0..state.group_count() {
        let mut best: Option<(f64, f64)> = None;
        for a in state.candidate_alphas(g) {
            let s = state.total_if(a);
            if best.is_none_or(|(_, bs)| s < bs) {
                best = Some((a, s));
            }
        }
        let (a, s) = best.expect("at least one candidate");
        state.fix(a);
        trace.push((g, a, s));
    }
    Ok(Derandomization {
        alphas: state.fixed,
        initial_sum,
        trace,
    })
}
