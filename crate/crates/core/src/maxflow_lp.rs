//! LP relaxation path for the max-flow objective.

use std::collections::BTreeMap;

use rand::Rng;

use crate::derand::derandomize;
use crate::error::{Error, Result};
use crate::lp::{Cmp, Lp};
use crate::metrics::evaluate_max_flow;
use crate::types::{
    crossings, snap, FractionalSchedule, Instance, PageId, Request, Schedule, TentativeSchedule,
    Time, TOL,
};

/// An instance whose pages were cloned at far-apart requests, with the map back.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitInstance {
    pub instance: Instance,
    /// `origin[p]` is the physical page behind (possibly cloned) page `p`.
    pub origin: Vec<PageId>,
}

impl SplitInstance {
    pub fn to_original(&self, schedule: &Schedule) -> Schedule {
        schedule.map_pages(|p| self.origin[p as usize])
    }
}

/// Clones a page whenever two release-consecutive requests for it are `bound` or more apart.
pub fn split_far_pages(instance: &Instance, bound: Time) -> Result<SplitInstance> {
    let n = instance.num_pages();
    let mut origin: Vec<PageId> = (0..n).collect();
    let mut by_page: BTreeMap<PageId, Vec<usize>> = BTreeMap::new();
    for (i, r) in instance.requests().iter().enumerate() {
        by_page.entry(r.page).or_default().push(i);
    }
    let mut relabel: Vec<PageId> = instance.requests().iter().map(|r| r.page).collect();
    for (page, mut idx) in by_page {
        let reqs = instance.requests();
        idx.sort_by_key(|&i| (reqs[i].release, i));
        let mut current = page;
        for w in 0..idx.len() {
            if w > 0 && reqs[idx[w]].release - reqs[idx[w - 1]].release >= bound {
                current = origin.len() as PageId;
                origin.push(page);
            }
            relabel[idx[w]] = current;
        }
    }
    let requests: Vec<Request> = instance
        .requests()
        .iter()
        .zip(&relabel)
        .map(|(r, &p)| Request { page: p, ..r.clone() })
        .collect();
    Ok(SplitInstance {
        instance: Instance::new(origin.len() as u32, requests)?,
        origin,
    })
}

/// The time steps an LP solution ever needs: peel release prefixes
/// `[r0, t]` at the first `t` with at most `t - r0 + 1` requests, keeping times `r0+1 ..= t+1`.
pub fn restrict_timesteps(instance: &Instance) -> Vec<Time> {
    let mut releases: Vec<Time> = instance.requests().iter().map(|r| r.release).collect();
    releases.sort_unstable();
    let mut out = Vec::new();
    let mut i = 0;
    while i < releases.len() {
        let r0 = releases[i];
        let mut count = 0usize;
        let mut t = r0;
        loop {
            while i + count < releases.len() && releases[i + count] <= t {
                count += 1;
            }
            if count as Time <= t - r0 + 1 {
                break;
            }
            t += 1;
        }
        out.extend(r0 + 1..=t + 1);
        i += count;
    }
    out
}

/// `[min request time + 1, max request time + bound]` per requested page.
pub fn page_windows(instance: &Instance, bound: Time) -> BTreeMap<PageId, (Time, Time)> {
    instance
        .request_times()
        .into_iter()
        .map(|(p, ts)| (p, (ts[0] + 1, ts[ts.len() - 1] + bound)))
        .collect()
}

/// Solves the max-flow LP relaxation at `bound` over the given time steps,
/// minimising total mass.
pub fn solve_lp_maxflow(instance: &Instance, bound: Time, timesteps: &[Time]) -> Result<FractionalSchedule> {
    if bound < 1 {
        return Err(Error::InvalidArgument(format!("flow bound must be positive, got {bound}")));
    }
    let windows = page_windows(instance, bound);
    let mut lp = Lp::minimize();
    let mut vars: BTreeMap<(PageId, Time), microlp::Variable> = BTreeMap::new();
    let mut by_time: BTreeMap<Time, Vec<microlp::Variable>> = BTreeMap::new();
    for (&p, &(lo, hi)) in &windows {
        let from = timesteps.partition_point(|&t| t < lo);
        for &t in timesteps[from..].iter().take_while(|&&t| t <= hi) {
            let v = lp.var(1.0, 0.0, 1.0);
            vars.insert((p, t), v);
            by_time.entry(t).or_default().push(v);
        }
    }
    for (p, ts) in instance.request_times() {
        for r in ts {
            let terms: Vec<_> = vars
                .range((p, r + 1)..=(p, r + bound))
                .map(|(_, &v)| (v, 1.0))
                .collect();
            if terms.is_empty() {
                return Err(Error::Infeasible);
            }
            lp.constraint(&terms, Cmp::Ge, 1.0);
        }
    }
    for vs in by_time.values() {
        if vs.len() > 1 {
            let terms: Vec<_> = vs.iter().map(|&v| (v, 1.0)).collect();
            lp.constraint(&terms, Cmp::Le, 1.0);
        }
    }
    let sol = lp.solve()?;
    let mut x = FractionalSchedule::new(bound);
    for (&(p, t), &v) in &vars {
        x.set(p, t, snap(sol.var_value(v)).clamp(0.0, 1.0));
    }
    Ok(x)
}

/// Pages coloured so that windows within a colour are pairwise disjoint.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupPartition {
    pub group_of: BTreeMap<PageId, usize>,
    pub windows: BTreeMap<PageId, (Time, Time)>,
    pub group_count: usize,
}

impl GroupPartition {
    pub fn members(&self, g: usize) -> Vec<PageId> {
        self.group_of
            .iter()
            .filter(|(_, &h)| h == g)
            .map(|(&p, _)| p)
            .collect()
    }
}

/// Greedy colouring of page windows by start time, reusing the smallest free colour.
pub fn build_groups(instance: &Instance, bound: Time) -> GroupPartition {
    let windows = page_windows(instance, bound);
    let mut order: Vec<(Time, Time, PageId)> = windows.iter().map(|(&p, &(a, b))| (a, b, p)).collect();
    order.sort_unstable();
    let mut ends: Vec<Time> = Vec::new();
    let mut group_of = BTreeMap::new();
    for (a, b, p) in order {
        let g = match ends.iter().position(|&e| e < a) {
            Some(g) => g,
            None => {
                ends.push(Time::MIN);
                ends.len() - 1
            }
        };
        ends[g] = b;
        group_of.insert(p, g);
    }
    GroupPartition {
        group_of,
        windows,
        group_count: ends.len(),
    }
}

/// Per-group fractional mass over time, for crossing computations.
#[derive(Clone, Debug, Default)]
pub(crate) struct GroupProfile {
    /// Times with mass, the cumulative mass through that time, and the pages carrying it.
    pub steps: Vec<(Time, f64, Vec<(PageId, f64)>)>,
}

impl GroupProfile {
    /// Cumulative mass over times `<= t`.
    pub fn cum_at(&self, t: Time) -> f64 {
        let i = self.steps.partition_point(|s| s.0 <= t);
        if i == 0 {
            0.0
        } else {
            self.steps[i - 1].1
        }
    }
}

pub(crate) fn group_profiles(fractional: &FractionalSchedule, partition: &GroupPartition) -> Result<Vec<GroupProfile>> {
    let mut per_group: Vec<BTreeMap<Time, Vec<(PageId, f64)>>> = vec![BTreeMap::new(); partition.group_count];
    for (p, t, v) in fractional.iter() {
        let g = *partition.group_of.get(&p).ok_or_else(|| {
            Error::InvalidArgument(format!("page {p} carries mass but has no group"))
        })?;
        per_group[g].entry(t).or_default().push((p, v));
    }
    Ok(per_group
        .into_iter()
        .map(|m| {
            let mut cum = 0.0;
            GroupProfile {
                steps: m
                    .into_iter()
                    .map(|(t, pv)| {
                        cum = snap(cum + pv.iter().map(|x| x.1).sum::<f64>());
                        (t, cum, pv)
                    })
                    .collect(),
            }
        })
        .collect())
}

/// One transmission per crossing of `k + alpha[g]` by the group's cumulative mass,
/// carried by the group's page with mass at that time.
pub fn group_alpha_round(
    fractional: &FractionalSchedule,
    partition: &GroupPartition,
    alphas: &[f64],
) -> Result<TentativeSchedule> {
    if alphas.len() < partition.group_count {
        return Err(Error::InvalidArgument(format!(
            "{} alpha values for {} groups",
            alphas.len(),
            partition.group_count
        )));
    }
    let mut out = TentativeSchedule::new();
    for (g, profile) in group_profiles(fractional, partition)?.iter().enumerate() {
        let mut prev = 0.0;
        for (t, cum, pages) in &profile.steps {
            let hits = crossings(prev, *cum, alphas[g]);
            prev = *cum;
            if hits == 0 {
                continue;
            }
            let live: Vec<&(PageId, f64)> = pages.iter().filter(|(_, v)| *v > TOL).collect();
            if live.len() > 1 {
                return Err(Error::PartitionViolation {
                    group: g,
                    time: *t,
                    first: live[0].0,
                    second: live[1].0,
                });
            }
            let page = match live.first() {
                Some((p, _)) => *p,
                None => {
                    pages
                        .iter()
                        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
                        .expect("step has pages")
                        .0
                }
            };
            out.add(*t, page);
        }
    }
    Ok(out)
}

/// Whether every request sees its page in `[r+1, r+bound]`.
pub fn completes_within(instance: &Instance, tentative: &TentativeSchedule, bound: Time) -> bool {
    let by_page = tentative.times_by_page();
    instance.requests().iter().all(|r| {
        by_page.get(&r.page).is_some_and(|ts| {
            let i = ts.partition_point(|&t| t <= r.release);
            ts.get(i).is_some_and(|&t| t <= r.release + bound)
        })
    })
}

/// Queue every tentative transmission by its time (ties by page id) and send one per step.
pub fn fifo_flatten(tentative: &TentativeSchedule) -> Schedule {
    let mut out = Schedule::new();
    let mut next: Time = 1;
    for (tau, set) in tentative.iter() {
        for &p in set {
            let t = next.max(tau).max(1);
            out.assign(t, p).expect("strictly increasing times");
            next = t + 1;
        }
    }
    out
}

/// Largest `transmissions in I - |I|` over intervals with endpoints in `timesteps`, floored at 0.
pub fn max_overflow(tentative: &TentativeSchedule, timesteps: &[Time]) -> i64 {
    let mut times: Vec<(Time, i64)> = Vec::new();
    let mut acc = 0i64;
    for (t, set) in tentative.iter() {
        acc += set.len() as i64;
        times.push((t, acc));
    }
    let upto = |t: Time| -> i64 {
        let i = times.partition_point(|x| x.0 <= t);
        if i == 0 {
            0
        } else {
            times[i - 1].1
        }
    };
    let mut ends: Vec<Time> = timesteps.to_vec();
    ends.sort_unstable();
    ends.dedup();
    let mut best = 0i64;
    let mut low = i64::MAX;
    for &t in &ends {
        low = low.min(upto(t - 1) - (t - 1));
        best = best.max(upto(t) - t - low);
    }
    best
}

/// The deterministic front half of the LP path at a fixed bound.
#[derive(Clone, Debug)]
pub struct LpPipeline {
    pub split: SplitInstance,
    pub timesteps: Vec<Time>,
    pub fractional: FractionalSchedule,
    pub groups: GroupPartition,
    pub bound: Time,
}

pub fn prepare_lp(instance: &Instance, bound: Time) -> Result<LpPipeline> {
    let split = split_far_pages(instance, bound)?;
    let timesteps = restrict_timesteps(&split.instance);
    let fractional = solve_lp_maxflow(&split.instance, bound, &timesteps)?;
    let groups = build_groups(&split.instance, bound);
    Ok(LpPipeline {
        split,
        timesteps,
        fractional,
        groups,
        bound,
    })
}

#[derive(Clone, Debug)]
pub struct LpRoundResult {
    /// Schedule on the original pages.
    pub schedule: Schedule,
    pub tentative: TentativeSchedule,
    pub overflow: i64,
    pub alphas: Vec<f64>,
    /// Random draws used (0 when derandomised without any random attempt).
    pub attempts: usize,
    pub derandomized: bool,
}

/// Random draws before handing over to the derandomised choice.
pub const RETRY_BUDGET: usize = 20;

impl LpPipeline {
    /// Rounds with fixed alphas, checks every request is served within the bound,
    /// flattens, and maps back to original pages.
    pub fn round_with(&self, alphas: &[f64]) -> Result<(TentativeSchedule, i64, Schedule)> {
        let tentative = group_alpha_round(&self.fractional, &self.groups, alphas)?;
        if !completes_within(&self.split.instance, &tentative, self.bound) {
            return Err(Error::Internal(format!(
                "tentative schedule misses a request within {}",
                self.bound
            )));
        }
        let overflow = max_overflow(&tentative, &self.timesteps);
        let flat = fifo_flatten(&tentative);
        let schedule = self.split.to_original(&flat);
        Ok((tentative, overflow, schedule))
    }

    /// Overflow allowed at this bound: `floor(6 eps L)`.
    pub fn overflow_budget(&self, eps: f64) -> i64 {
        (6.0 * eps * self.bound as f64 + TOL).floor() as i64
    }
}

/// LP, group alpha-rounding and FIFO flattening at `bound`. Draws fresh alphas
/// until the overflow fits `6 eps L`, then falls back to derandomisation.
pub fn randomized_maxflow_round<R: Rng + ?Sized>(
    instance: &Instance,
    bound: Time,
    eps: f64,
    rng: &mut R,
) -> Result<LpRoundResult> {
    let pipe = prepare_lp(instance, bound)?;
    let budget = pipe.overflow_budget(eps);
    for attempt in 1..=RETRY_BUDGET {
        let alphas: Vec<f64> = (0..pipe.groups.group_count).map(|_| rng.gen::<f64>()).collect();
        let (tentative, overflow, schedule) = pipe.round_with(&alphas)?;
        if overflow <= budget {
            return finish(instance, &pipe, tentative, overflow, schedule, alphas, attempt, false);
        }
    }
    let d = derandomize(&pipe.fractional, &pipe.groups, &pipe.timesteps, eps, bound, instance.len())?;
    let (tentative, overflow, schedule) = pipe.round_with(&d.alphas)?;
    finish(instance, &pipe, tentative, overflow, schedule, d.alphas, RETRY_BUDGET, true)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    instance: &Instance,
    pipe: &LpPipeline,
    tentative: TentativeSchedule,
    overflow: i64,
    schedule: Schedule,
    alphas: Vec<f64>,
    attempts: usize,
    derandomized: bool,
) -> Result<LpRoundResult> {
    let report = evaluate_max_flow(instance, &schedule);
    match report.max_flow {
        Some(f) if f <= pipe.bound + overflow => Ok(LpRoundResult {
            schedule,
            tentative,
            overflow,
            alphas,
            attempts,
            derandomized,
        }),
        other => Err(Error::Internal(format!(
            "flattened max flow {other:?} exceeds bound {} plus overflow {overflow}",
            pipe.bound
        ))),
    }
}
