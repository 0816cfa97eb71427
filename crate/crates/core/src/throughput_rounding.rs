//! Randomised roundings of the configuration LP.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::{Add, Div, Mul, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::metrics::evaluate_throughput;
use crate::params::ThroughputParams;
use crate::throughput_lp::ConfigLpSolution;
use crate::types::{crossings, FractionalSchedule, Instance, PageId, Schedule, TentativeSchedule, Time};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Independent,
    Alpha,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Independent => "independent",
            Scheme::Alpha => "alpha",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockStatus {
    /// No overflowed page in the block.
    Clean,
    /// All overflowed pages found a slot.
    Placed,
    /// The counting condition failed; overflow dropped.
    ConditionFailed,
    /// Left moves out of the first block are impossible; overflow dropped.
    LeftDisabled,
    /// The condition held but greedy placement ran out of slots; overflow dropped.
    GreedyFailed,
}

/// Blocks `[0,h)`, then `[h + (i-1) eps H, h + i eps H)` until past the horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockStructure {
    pub h: Time,
    pub freed: Time,
    /// Half-open `(start, end)`.
    pub blocks: Vec<(Time, Time)>,
}

impl BlockStructure {
    pub fn new(horizon: Time, h: Time, block_len: Time, freed: Time) -> Result<Self> {
        if h < 1 || h > block_len || freed < 0 || freed > block_len {
            return Err(Error::InvalidArgument(format!(
                "block offset {h} must lie in [1, {block_len}] and freed length {freed} in [0, {block_len}]"
            )));
        }
        let mut blocks = vec![(0, h)];
        let mut start = h;
        while start <= horizon {
            blocks.push((start, start + block_len));
            start += block_len;
        }
        Ok(BlockStructure { h, freed, blocks })
    }

    /// First freed time of block `b` (the block's tail is `[freed_start, end)`).
    pub fn freed_start(&self, b: usize) -> Time {
        let (s, e) = self.blocks[b];
        (e - self.freed).max(s)
    }

    pub fn is_freed(&self, t: Time) -> bool {
        let b = self.blocks.partition_point(|&(_, e)| e <= t);
        b < self.blocks.len() && t >= self.freed_start(b)
    }

    pub fn block_of(&self, t: Time) -> Option<usize> {
        let b = self.blocks.partition_point(|&(_, e)| e <= t);
        (b < self.blocks.len() && self.blocks[b].0 <= t).then_some(b)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaDiagnostics {
    pub h: Time,
    pub direction: Direction,
    /// `|A_t|` after alpha-point rounding, before freeing.
    pub set_sizes: BTreeMap<Time, usize>,
    pub first_round: BTreeMap<Time, PageId>,
    pub blocks: Vec<BlockStatus>,
    /// Overflowed pages moved, as `(from, to, page)`.
    pub moves: Vec<(Time, Time, PageId)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundingOutcome {
    pub scheme: Scheme,
    pub schedule: Schedule,
    pub satisfied_at: Vec<Option<Time>>,
    pub profit: f64,
    pub diagnostics: Option<AlphaDiagnostics>,
}

fn outcome(instance: &Instance, scheme: Scheme, schedule: Schedule, diagnostics: Option<AlphaDiagnostics>) -> Result<RoundingOutcome> {
    let report = evaluate_throughput(instance, &schedule)?;
    Ok(RoundingOutcome {
        scheme,
        schedule,
        satisfied_at: report.satisfied_at,
        profit: report.profit,
        diagnostics,
    })
}

/// Draws one column per interval with probability equal to its weight (idle otherwise).
pub fn independent_round<R: Rng + ?Sized>(instance: &Instance, solution: &ConfigLpSolution, rng: &mut R) -> Result<RoundingOutcome> {
    let mut schedule = Schedule::new();
    for i in 0..solution.partition.len() {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for c in solution.columns.iter().filter(|c| c.interval == i) {
            acc += c.weight;
            if u < acc {
                for (k, p) in c.pages.iter().enumerate() {
                    let t = c.start + k as Time;
                    if let (Some(p), true) = (p, t >= 1) {
                        schedule.assign(t, *p)?;
                    }
                }
                break;
            }
        }
    }
    outcome(instance, Scheme::Independent, schedule, None)
}

/// Sends page `p` at each crossing of its cumulative mass over `alpha_p + k`,
/// one uniform `alpha_p` per page (pages in increasing order).
pub fn alpha_point_tentative<R: Rng + ?Sized>(x: &FractionalSchedule, rng: &mut R) -> TentativeSchedule {
    let mut out = TentativeSchedule::new();
    for p in x.pages().collect::<Vec<_>>() {
        let alpha: f64 = rng.gen();
        let mut cum = 0.0;
        for (&t, &v) in x.row(p).expect("listed page") {
            let next = cum + v;
            if crossings(cum, next, alpha) > 0 {
                out.add(t, p);
            }
            cum = next;
        }
    }
    out
}

/// Selection probabilities over a contended set, generic over the number type.
///
/// `in_set[i]` is the mass of the i-th page in the set and `outside` the mass of
/// all other pages at this time. A lone page is kept with probability one.
pub fn contention_probabilities<T>(in_set: &[T], outside: &T) -> Vec<T>
where
    T: Clone + Zero + One + Add<Output = T> + Sub<Output = T> + Mul<Output = T> + Div<Output = T>,
{
    let k = in_set.len();
    if k == 0 {
        return Vec::new();
    }
    if k == 1 {
        return vec![T::one()];
    }
    let count = |n: usize| (0..n).fold(T::zero(), |acc, _| acc + T::one());
    let inside = in_set.iter().cloned().fold(T::zero(), |a, b| a + b);
    let total = inside.clone() + outside.clone();
    let share_out = outside.clone() / count(k);
    in_set
        .iter()
        .map(|x| ((inside.clone() - x.clone()) / count(k - 1) + share_out.clone()) / total.clone())
        .collect()
}

/// Picks one page of `set` using [`contention_probabilities`] with the masses of `column`.
pub fn contention_resolve<R: Rng + ?Sized>(
    set: &BTreeSet<PageId>,
    column: &BTreeMap<PageId, f64>,
    rng: &mut R,
) -> Result<Option<PageId>> {
    if set.is_empty() {
        return Ok(None);
    }
    if set.len() == 1 {
        return Ok(set.iter().next().copied());
    }
    let pages: Vec<PageId> = set.iter().copied().collect();
    let xs: Vec<f64> = pages.iter().map(|p| column.get(p).copied().unwrap_or(0.0)).collect();
    let outside: f64 = column.iter().filter(|(p, _)| !set.contains(p)).map(|(_, v)| v).sum();
    if xs.iter().sum::<f64>() + outside <= 0.0 {
        return Err(Error::Degenerate("contended slot with zero fractional mass".into()));
    }
    let probs = contention_probabilities(&xs, &outside);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (p, q) in pages.iter().zip(&probs) {
        acc += q;
        if u < acc {
            return Ok(Some(*p));
        }
    }
    Ok(pages.last().copied())
}

/// Whether block `b` can absorb its overflow in `direction`, by the counting condition
/// on `|A_t|` over the block's non-freed times.
pub fn relocation_condition(sizes: &BTreeMap<Time, usize>, blocks: &BlockStructure, b: usize, direction: Direction) -> bool {
    let (t1, end) = blocks.blocks[b];
    let t2 = blocks.freed_start(b);
    let size = |t: Time| sizes.get(&t).copied().unwrap_or(0) as i64;
    match direction {
        Direction::Right => {
            let mut suffix = 0;
            for t in (t1..t2).rev() {
                suffix += size(t);
                if suffix > end - t {
                    return false;
                }
            }
            true
        }
        Direction::Left => {
            if b == 0 {
                return (t1..t2).all(|t| size(t) <= 1);
            }
            let lo = (t1 - blocks.freed).max(1);
            let mut prefix = 0;
            for t in t1..t2 {
                prefix += size(t);
                if prefix > t - lo + 1 {
                    return false;
                }
            }
            true
        }
    }
}

/// Moves overflowed pages (each `A_t` minus its first-round page) into empty slots,
/// block by block, all or nothing per block. `tentative` must already be cleared
/// on freed slots.
pub fn relocate(
    tentative: &TentativeSchedule,
    first_round: &BTreeMap<Time, PageId>,
    blocks: &BlockStructure,
    direction: Direction,
) -> Result<(Schedule, Vec<BlockStatus>, Vec<(Time, Time, PageId)>)> {
    let sizes: BTreeMap<Time, usize> = tentative.iter().map(|(t, s)| (t, s.len())).collect();
    let last = blocks.blocks.last().map_or(0, |b| b.1);
    let mut empty: BTreeSet<Time> = (1..last).filter(|t| !sizes.contains_key(t)).collect();
    let mut schedule = Schedule::new();
    for (&t, &p) in first_round {
        if blocks.is_freed(t) {
            continue;
        }
        schedule.assign(t, p)?;
        empty.remove(&t);
    }
    let mut statuses = Vec::with_capacity(blocks.blocks.len());
    let mut moves = Vec::new();
    for b in 0..blocks.blocks.len() {
        let (t1, end) = blocks.blocks[b];
        let t2 = blocks.freed_start(b);
        let overflow: Vec<(Time, Vec<PageId>)> = (t1..t2)
            .filter_map(|t| {
                let set = tentative.at(t)?;
                let keep = first_round.get(&t);
                let rest: Vec<PageId> = set.iter().copied().filter(|p| Some(p) != keep).collect();
                (!rest.is_empty()).then_some((t, rest))
            })
            .collect();
        if overflow.is_empty() {
            statuses.push(BlockStatus::Clean);
            continue;
        }
        if direction == Direction::Left && b == 0 {
            statuses.push(BlockStatus::LeftDisabled);
            continue;
        }
        if !relocation_condition(&sizes, blocks, b, direction) {
            statuses.push(BlockStatus::ConditionFailed);
            continue;
        }
        let mut placed: Vec<(Time, Time, PageId)> = Vec::new();
        let mut ok = true;
        let order: Vec<&(Time, Vec<PageId>)> = match direction {
            Direction::Right => overflow.iter().rev().collect(),
            Direction::Left => overflow.iter().collect(),
        };
        'outer: for (t, pages) in order {
            for &p in pages {
                let slot = match direction {
                    Direction::Right => empty.range(t + 1..end).next_back().copied(),
                    Direction::Left => empty.range((t1 - blocks.freed).max(1)..*t).next().copied(),
                };
                match slot {
                    Some(s) => {
                        empty.remove(&s);
                        placed.push((*t, s, p));
                    }
                    None => {
                        ok = false;
                        break 'outer;
                    }
                }
            }
        }
        if ok {
            for &(from, to, p) in &placed {
                schedule.assign(to, p)?;
                moves.push((from, to, p));
            }
            statuses.push(BlockStatus::Placed);
        } else {
            for &(_, to, _) in &placed {
                empty.insert(to);
            }
            statuses.push(BlockStatus::GreedyFailed);
        }
    }
    Ok((schedule, statuses, moves))
}

/// Alpha-point rounding of the time-indexed LP view, contention resolution per slot,
/// freeing the tail of every block, and relocation in one random direction.
pub fn alpha_scheme<R: Rng + ?Sized>(
    instance: &Instance,
    solution: &ConfigLpSolution,
    params: &ThroughputParams,
    rng: &mut R,
) -> Result<RoundingOutcome> {
    let x = solution.time_indexed();
    let mut tentative = alpha_point_tentative(&x, rng);
    let set_sizes: BTreeMap<Time, usize> = tentative.iter().map(|(t, s)| (t, s.len())).collect();
    let mut first_round = BTreeMap::new();
    let times: Vec<Time> = set_sizes.keys().copied().collect();
    for &t in &times {
        let set = tentative.at(t).expect("listed time").clone();
        if let Some(p) = contention_resolve(&set, &x.column(t), rng)? {
            first_round.insert(t, p);
        }
    }
    let h = rng.gen_range(1..=params.block_len());
    let blocks = BlockStructure::new(instance.throughput_horizon(), h, params.block_len(), params.freed_len())?;
    for &t in &times {
        if blocks.is_freed(t) {
            tentative.clear_at(t);
            first_round.remove(&t);
        }
    }
    let direction = if rng.gen::<bool>() { Direction::Left } else { Direction::Right };
    let (schedule, statuses, moves) = relocate(&tentative, &first_round, &blocks, direction)?;
    let diagnostics = AlphaDiagnostics {
        h,
        direction,
        set_sizes,
        first_round,
        blocks: statuses,
        moves,
    };
    outcome(instance, Scheme::Alpha, schedule, Some(diagnostics))
}

#[derive(Clone, Debug)]
pub struct BetterOfTwo {
    pub best: RoundingOutcome,
    pub mean_independent: f64,
    pub mean_alpha: f64,
    /// Profits per trial, independent then alpha.
    pub profits_independent: Vec<f64>,
    pub profits_alpha: Vec<f64>,
}

/// Runs both schemes `trials` times each (alternating) and keeps the most profitable outcome.
pub fn better_of_two<R: Rng + ?Sized>(
    instance: &Instance,
    solution: &ConfigLpSolution,
    params: &ThroughputParams,
    trials: usize,
    rng: &mut R,
) -> Result<BetterOfTwo> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let mut best: Option<RoundingOutcome> = None;
    let mut pi = Vec::with_capacity(trials);
    let mut pa = Vec::with_capacity(trials);
    for _ in 0..trials {
        for scheme in [Scheme::Independent, Scheme::Alpha] {
            let o = match scheme {
                Scheme::Independent => independent_round(instance, solution, rng)?,
                Scheme::Alpha => alpha_scheme(instance, solution, params, rng)?,
            };
            match scheme {
                Scheme::Independent => pi.push(o.profit),
                Scheme::Alpha => pa.push(o.profit),
            }
            if best.as_ref().is_none_or(|b| o.profit > b.profit) {
                best = Some(o);
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(BetterOfTwo {
        best: best.expect("trials >= 1"),
        mean_independent: mean(&pi),
        mean_alpha: mean(&pa),
        profits_independent: pi,
        profits_alpha: pa,
    })
}

/// Exact value of a float as a rational.
pub fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite")
}

/// Largest product space `exact_satisfaction_probability` will enumerate.
pub const MAX_PRODUCT: u64 = 1_000_000;

/// Exact probability that independent rounding satisfies request `idx`, by enumerating
/// every combination of column choices over the intervals its window touches.
pub fn exact_satisfaction_probability(instance: &Instance, solution: &ConfigLpSolution, idx: usize) -> Result<BigRational> {
    let r = instance
        .requests()
        .get(idx)
        .ok_or_else(|| Error::InvalidArgument(format!("request index {idx} out of range")))?;
    let (lo, hi) = r
        .window()
        .ok_or_else(|| Error::InvalidInstance("request has no window".into()))?;
    let mut choices: Vec<Vec<(BigRational, bool)>> = Vec::new();
    let mut size: u64 = 1;
    for (i, &(a, b)) in solution.partition.intervals.iter().enumerate() {
        if b < lo || a > hi {
            continue;
        }
        let mut opts: Vec<(BigRational, bool)> = Vec::new();
        let mut used = BigRational::zero();
        for c in solution.columns.iter().filter(|c| c.interval == i) {
            let w = exact(c.weight);
            used += w.clone();
            opts.push((w, c.serves(r.page, lo, hi)));
        }
        let rest = BigRational::one() - used;
        if rest < BigRational::zero() {
            return Err(Error::Degenerate(format!("interval {i} carries column weight above 1")));
        }
        if rest > BigRational::zero() {
            opts.push((rest, false));
        }
        size = size.saturating_mul(opts.len() as u64);
        if size > MAX_PRODUCT {
            return Err(Error::TooLarge(format!("product space exceeds {MAX_PRODUCT}")));
        }
        choices.push(opts);
    }
    fn walk(choices: &[Vec<(BigRational, bool)>], k: usize, prob: &BigRational, hit: bool, acc: &mut BigRational) {
        if k == choices.len() {
            if hit {
                *acc += prob.clone();
            }
            return;
        }
        for (w, serves) in &choices[k] {
            walk(choices, k + 1, &(prob * w), hit || *serves, acc);
        }
    }
    let mut acc = BigRational::zero();
    walk(&choices, 0, &BigRational::one(), false, &mut acc);
    Ok(acc)
}

/// `min(total hit mass, 1)` computed exactly.
pub fn exact_coverage(instance: &Instance, solution: &ConfigLpSolution, idx: usize) -> BigRational {
    let sum = solution
        .hit_masses(instance, idx)
        .values()
        .fold(BigRational::zero(), |a, &v| a + exact(v));
    sum.min(BigRational::one())
}

/// A rational strictly above `e`, for exact comparisons against `1 - 1/e`.
pub fn e_upper() -> BigRational {
    BigRational::new(BigInt::from(2_718_281_828_459_045_236u64), BigInt::from(1_000_000_000_000_000_000u64))
}

/// Exact sufficient test for `p >= (1 - 1/e) z`: `e_upper * (z - p) <= z`.
pub fn beats_one_minus_inv_e(p: &BigRational, z: &BigRational) -> bool {
    if p >= z {
        return true;
    }
    e_upper() * (z - p) <= *z
}
