//! Configuration LP for throughput, solved through its dual with a separation oracle.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::lp::{Cmp, Lp};
use crate::params::ThroughputParams;
use crate::types::{FractionalSchedule, Instance, PageId, Time, TOL};

/// Contiguous intervals covering `[0, T]`; all but the first have the regular length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalPartition {
    pub first_length: Time,
    pub interval_len: Time,
    /// Inclusive `(start, end)` pairs.
    pub intervals: Vec<(Time, Time)>,
}

impl IntervalPartition {
    pub fn index_of(&self, t: Time) -> Option<usize> {
        let i = self.intervals.partition_point(|&(_, b)| b < t);
        (i < self.intervals.len() && self.intervals[i].0 <= t).then_some(i)
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}

/// Tiles `[0, horizon]` with a first interval of `first_length` and then `interval_len` each.
pub fn tile_horizon(horizon: Time, interval_len: Time, first_length: Time) -> Result<IntervalPartition> {
    if interval_len < 1 || first_length < 1 || first_length > interval_len {
        return Err(Error::InvalidArgument(format!(
            "first interval length {first_length} outside [1, {interval_len}]"
        )));
    }
    let mut intervals = Vec::new();
    let mut start = 0;
    let mut len = first_length;
    while start <= horizon.max(0) {
        intervals.push((start, (start + len - 1).min(horizon.max(0))));
        start += len;
        len = interval_len;
    }
    Ok(IntervalPartition {
        first_length,
        interval_len,
        intervals,
    })
}

pub fn build_partition(instance: &Instance, params: &ThroughputParams, first_length: Time) -> Result<IntervalPartition> {
    tile_horizon(instance.throughput_horizon(), params.interval_len(), first_length)
}

#[derive(Clone, Debug, PartialEq)]
pub enum RequestClass {
    /// Window shorter than `2H`, inside one interval.
    Small { interval: usize },
    /// Window shorter than `2H` crossing an interval boundary; left out of the LP.
    SmallDiscarded,
    /// Window of at least `2H`, split by the partition into left, middle and right pieces.
    Large {
        first: usize,
        last: usize,
        left: (Time, Time),
        middle: Option<(Time, Time)>,
        right: Option<(Time, Time)>,
    },
    /// A boundary piece is shorter than `2 eps H`; left out of the LP.
    LargeDiscarded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RequestClassification {
    pub classes: Vec<RequestClass>,
    pub discarded_weight: f64,
}

impl RequestClassification {
    pub fn is_large(&self, i: usize) -> bool {
        matches!(self.classes[i], RequestClass::Large { .. })
    }

    pub fn large(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.classes.len()).filter(|&i| self.is_large(i))
    }
}

pub fn classify_requests(
    instance: &Instance,
    partition: &IntervalPartition,
    params: &ThroughputParams,
) -> Result<RequestClassification> {
    instance.require_throughput()?;
    let mut discarded_weight = 0.0;
    let mut classes = Vec::with_capacity(instance.len());
    for r in instance.requests() {
        let (lo, hi) = r.window().expect("throughput");
        let first = partition
            .index_of(lo)
            .ok_or_else(|| Error::Internal(format!("time {lo} outside the partition")))?;
        let last = partition
            .index_of(hi)
            .ok_or_else(|| Error::Internal(format!("time {hi} outside the partition")))?;
        let class = if hi - lo + 1 < params.large_window() {
            if first == last {
                RequestClass::Small { interval: first }
            } else {
                RequestClass::SmallDiscarded
            }
        } else if first == last {
            RequestClass::Large {
                first,
                last,
                left: (lo, hi),
                middle: None,
                right: None,
            }
        } else {
            let left = (lo, partition.intervals[first].1);
            let right = (partition.intervals[last].0, hi);
            let middle = (last > first + 1).then(|| (left.1 + 1, right.0 - 1));
            let short = |(a, b): (Time, Time)| b - a + 1 < params.min_boundary();
            if short(left) || short(right) {
                RequestClass::LargeDiscarded
            } else {
                RequestClass::Large {
                    first,
                    last,
                    left,
                    middle,
                    right: Some(right),
                }
            }
        };
        if matches!(class, RequestClass::SmallDiscarded | RequestClass::LargeDiscarded) {
            discarded_weight += r.weight_or_zero();
        }
        classes.push(class);
    }
    Ok(RequestClassification {
        classes,
        discarded_weight,
    })
}

/// A demand seen by the oracle: value earned if `page` is sent somewhere in `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleItem {
    pub page: PageId,
    pub lo: Time,
    pub hi: Time,
    pub value: f64,
}

/// Value of a configuration starting at `start`; each item counts at most once.
pub fn configuration_value(start: Time, pages: &[Option<PageId>], items: &[OracleItem]) -> f64 {
    items
        .iter()
        .filter(|it| {
            pages.iter().enumerate().any(|(k, p)| {
                let t = start + k as Time;
                *p == Some(it.page) && it.lo <= t && t <= it.hi
            })
        })
        .map(|it| it.value)
        .sum()
}

struct DpState {
    key: Vec<u32>,
    value: f64,
    parent: usize,
    page: Option<PageId>,
}

fn is_subset(a: &[u32], b: &[u32]) -> bool {
    let mut j = 0;
    for &x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j == b.len() || b[j] != x {
            return false;
        }
        j += 1;
    }
    true
}

/// Drops a state when another has at least its value and has used up a subset of its
/// open items (so can still earn everything it can).
fn prune_dominated(states: Vec<DpState>) -> Vec<DpState> {
    if states.len() < 2 {
        return states;
    }
    let mut order: Vec<usize> = (0..states.len()).collect();
    order.sort_by(|&a, &b| {
        states[a].key.len().cmp(&states[b].key.len()).then(states[b].value.total_cmp(&states[a].value))
    });
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let s = &states[i];
        let dominated = kept
            .iter()
            .any(|&k| states[k].value >= s.value && is_subset(&states[k].key, &s.key));
        if !dominated {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    let mut keep = vec![false; states.len()];
    for k in kept {
        keep[k] = true;
    }
    states.into_iter().zip(keep).filter(|(_, k)| *k).map(|(s, _)| s).collect()
}

/// Maximum-value configuration on `[start, end]`: a forward DP whose state is the set of
/// still-open items already satisfied. Sending a page with an open unsatisfied item always
/// beats idling, so idling is tried only when no such page exists.
pub fn best_configuration(start: Time, end: Time, items: &[OracleItem]) -> (f64, Vec<Option<PageId>>) {
    let items: Vec<OracleItem> = items
        .iter()
        .filter(|it| it.value > 0.0)
        .map(|it| OracleItem {
            lo: it.lo.max(start).max(1),
            hi: it.hi.min(end),
            ..*it
        })
        .filter(|it| it.lo <= it.hi)
        .collect();
    let mut layers: Vec<Vec<DpState>> = vec![vec![DpState {
        key: Vec::new(),
        value: 0.0,
        parent: 0,
        page: None,
    }]];
    for t in start..=end {
        let active: Vec<u32> = (0..items.len() as u32)
            .filter(|&i| items[i as usize].lo <= t && t <= items[i as usize].hi)
            .collect();
        let prev = layers.last().expect("non-empty");
        let mut next: Vec<DpState> = Vec::new();
        let mut index: HashMap<Vec<u32>, usize> = HashMap::new();
        for (si, s) in prev.iter().enumerate() {
            let mut options: Vec<Option<PageId>> = active
                .iter()
                .filter(|i| s.key.binary_search(i).is_err())
                .map(|&i| Some(items[i as usize].page))
                .collect();
            options.sort_unstable();
            options.dedup();
            if options.is_empty() {
                options.push(None);
            }
            for opt in options {
                let mut key = s.key.clone();
                let mut value = s.value;
                if let Some(p) = opt {
                    for &i in &active {
                        if items[i as usize].page == p && s.key.binary_search(&i).is_err() {
                            key.push(i);
                            value += items[i as usize].value;
                        }
                    }
                    key.sort_unstable();
                }
                key.retain(|&i| items[i as usize].hi > t);
                match index.get(&key) {
                    Some(&j) => {
                        if value > next[j].value {
                            next[j] = DpState {
                                key,
                                value,
                                parent: si,
                                page: opt,
                            };
                        }
                    }
                    None => {
                        index.insert(key.clone(), next.len());
                        next.push(DpState {
                            key,
                            value,
                            parent: si,
                            page: opt,
                        });
                    }
                }
            }
        }
        layers.push(prune_dominated(next));
    }
    let last = layers.last().expect("non-empty");
    let mut best = 0;
    for (i, s) in last.iter().enumerate() {
        if s.value > last[best].value {
            best = i;
        }
    }
    let value = last[best].value;
    let mut pages = Vec::with_capacity((end - start + 1).max(0) as usize);
    let mut idx = best;
    for layer in layers[1..].iter().rev() {
        pages.push(layer[idx].page);
        idx = layer[idx].parent;
    }
    pages.reverse();
    (value, pages)
}

/// Dual prices for one partition.
#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    pub gamma: Vec<f64>,
    /// Keyed by request index.
    pub delta: BTreeMap<usize, f64>,
    pub xi: BTreeMap<usize, f64>,
    pub objective: f64,
}

/// Demands the oracle sees in interval `i`: small requests inside it at their weight,
/// and retained large requests overlapping it at their dual price.
pub fn oracle_items(
    instance: &Instance,
    partition: &IntervalPartition,
    class: &RequestClassification,
    delta: &BTreeMap<usize, f64>,
    i: usize,
) -> Vec<OracleItem> {
    let (a, b) = partition.intervals[i];
    let mut items = Vec::new();
    for (idx, r) in instance.requests().iter().enumerate() {
        let (lo, hi) = r.window().expect("throughput");
        let value = match &class.classes[idx] {
            RequestClass::Small { interval } if *interval == i => r.weight_or_zero(),
            RequestClass::Large { first, last, .. } if *first <= i && i <= *last => {
                delta.get(&idx).copied().unwrap_or(0.0)
            }
            _ => continue,
        };
        if value > 0.0 {
            items.push(OracleItem {
                page: r.page,
                lo: lo.max(a),
                hi: hi.min(b),
                value,
            });
        }
    }
    items
}

/// The most violated configuration of interval `i`, if its value beats `gamma_i + TOL`.
pub fn separation_oracle(
    instance: &Instance,
    partition: &IntervalPartition,
    class: &RequestClassification,
    dual: &DualSolution,
    i: usize,
) -> Option<(f64, Vec<Option<PageId>>)> {
    let (a, b) = partition.intervals[i];
    let items = oracle_items(instance, partition, class, &dual.delta, i);
    let (value, pages) = best_configuration(a, b, &items);
    (value > dual.gamma[i] + TOL).then_some((value, pages))
}

/// One page (or idle) per slot of an interval, with its LP weight.
#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub interval: usize,
    pub start: Time,
    pub pages: Vec<Option<PageId>>,
    pub weight: f64,
    /// Weight of small in-interval requests it serves.
    pub small_value: f64,
    /// Retained large requests it serves inside this interval.
    pub hits: Vec<usize>,
}

impl Column {
    /// Whether the column sends `page` at some time in `[lo, hi]`.
    pub fn serves(&self, page: PageId, lo: Time, hi: Time) -> bool {
        self.pages.iter().enumerate().any(|(k, p)| {
            let t = self.start + k as Time;
            *p == Some(page) && lo <= t && t <= hi
        })
    }
}

#[derive(Clone, Debug)]
pub struct ConfigLpSolution {
    pub params: ThroughputParams,
    pub partition: IntervalPartition,
    pub classification: RequestClassification,
    pub columns: Vec<Column>,
    /// `z` per retained large request, keyed by request index.
    pub z: BTreeMap<usize, f64>,
    pub objective: f64,
    pub dual_objective: f64,
    /// Dual prices when the cutting plane stopped.
    pub dual: DualSolution,
    /// Dual objective after each cutting-plane round.
    pub dual_trace: Vec<f64>,
}

impl ConfigLpSolution {
    pub fn interval_mass(&self, i: usize) -> f64 {
        self.columns.iter().filter(|c| c.interval == i).map(|c| c.weight).sum()
    }

    /// `x[p][t]`: total weight of columns sending `p` at `t`.
    pub fn time_indexed(&self) -> FractionalSchedule {
        let mut x = FractionalSchedule::new(0);
        for c in &self.columns {
            for (k, p) in c.pages.iter().enumerate() {
                if let Some(p) = p {
                    x.add(*p, c.start + k as Time, c.weight);
                }
            }
        }
        x
    }

    /// Per interval, the weight of columns serving request `idx` inside it.
    pub fn hit_masses(&self, instance: &Instance, idx: usize) -> BTreeMap<usize, f64> {
        let r = &instance.requests()[idx];
        let (lo, hi) = r.window().expect("throughput");
        let mut out = BTreeMap::new();
        for c in &self.columns {
            if c.weight > 0.0 && c.serves(r.page, lo, hi) {
                *out.entry(c.interval).or_insert(0.0) += c.weight;
            }
        }
        out
    }

    /// `min(total hit mass, 1)` for any request.
    pub fn coverage(&self, instance: &Instance, idx: usize) -> f64 {
        self.hit_masses(instance, idx).values().sum::<f64>().min(1.0)
    }
}

fn make_column(
    instance: &Instance,
    partition: &IntervalPartition,
    class: &RequestClassification,
    i: usize,
    pages: Vec<Option<PageId>>,
) -> Column {
    let (a, _) = partition.intervals[i];
    let mut col = Column {
        interval: i,
        start: a,
        pages,
        weight: 0.0,
        small_value: 0.0,
        hits: Vec::new(),
    };
    for (idx, r) in instance.requests().iter().enumerate() {
        let (lo, hi) = r.window().expect("throughput");
        match &class.classes[idx] {
            RequestClass::Small { interval } if *interval == i => {
                if col.serves(r.page, lo, hi) {
                    col.small_value += r.weight_or_zero();
                }
            }
            RequestClass::Large { first, last, .. } if *first <= i && i <= *last
                && col.serves(r.page, lo, hi) => {
                    col.hits.push(idx);
                }
            _ => {}
        }
    }
    col
}

const MAX_ROUNDS: usize = 10_000;

/// Grid for column weights: multiples of `2^-40`, so interval sums are exact in `f64`.
const GRID: f64 = 1099511627776.0;

/// Cutting plane on the dual for one partition, then the primal over the generated columns.
pub fn solve_config_lp_for(
    instance: &Instance,
    params: &ThroughputParams,
    partition: &IntervalPartition,
) -> Result<ConfigLpSolution> {
    let class = classify_requests(instance, partition, params)?;
    let large: Vec<usize> = class.large().collect();
    let weights: Vec<f64> = instance.requests().iter().map(|r| r.weight_or_zero()).collect();
    let mut columns: Vec<Column> = Vec::new();
    let mut seen: HashMap<(usize, Vec<Option<PageId>>), ()> = HashMap::new();
    let mut dual_trace = Vec::new();
    let mut dual;
    let mut rounds = 0;
    loop {
        rounds += 1;
        if rounds > MAX_ROUNDS {
            return Err(Error::Lp(format!("cutting plane did not settle in {MAX_ROUNDS} rounds")));
        }
        dual = solve_dual(partition.len(), &large, &weights, &columns)?;
        dual_trace.push(dual.objective);
        let mut added = false;
        for i in 0..partition.len() {
            if let Some((_, pages)) = separation_oracle(instance, partition, &class, &dual, i) {
                if seen.insert((i, pages.clone()), ()).is_none() {
                    columns.push(make_column(instance, partition, &class, i, pages));
                    added = true;
                }
            }
        }
        if !added {
            break;
        }
    }

    let mut lp = Lp::maximize();
    let yv: Vec<_> = columns.iter().map(|c| lp.var(c.small_value, 0.0, f64::INFINITY)).collect();
    let zv: Vec<_> = large.iter().map(|&r| lp.var(weights[r], 0.0, 1.0)).collect();
    for i in 0..partition.len() {
        let terms: Vec<_> = columns
            .iter()
            .zip(&yv)
            .filter(|(c, _)| c.interval == i)
            .map(|(_, &v)| (v, 1.0))
            .collect();
        if !terms.is_empty() {
            lp.constraint(&terms, Cmp::Le, 1.0);
        }
    }
    for (k, &r) in large.iter().enumerate() {
        let mut terms = vec![(zv[k], 1.0)];
        terms.extend(
            columns
                .iter()
                .zip(&yv)
                .filter(|(c, _)| c.hits.contains(&r))
                .map(|(_, &v)| (v, -1.0)),
        );
        lp.constraint(&terms, Cmp::Le, 0.0);
    }
    let sol = lp.solve()?;
    for (c, &v) in columns.iter_mut().zip(&yv) {
        c.weight = (sol.var_value(v).max(0.0) * GRID).floor() / GRID;
    }
    for i in 0..partition.len() {
        let idx: Vec<usize> = (0..columns.len()).filter(|&k| columns[k].interval == i).collect();
        let mut excess: f64 = idx.iter().map(|&k| columns[k].weight).sum::<f64>() - 1.0;
        for &k in &idx {
            if excess <= 0.0 {
                break;
            }
            let cut = excess.min(columns[k].weight);
            columns[k].weight -= cut;
            excess -= cut;
        }
    }
    columns.retain(|c| c.weight > 0.0);
    let mut z = BTreeMap::new();
    let mut objective: f64 = columns.iter().map(|c| c.weight * c.small_value).sum();
    for &r in &large {
        let mass: f64 = columns.iter().filter(|c| c.hits.contains(&r)).map(|c| c.weight).sum();
        let zr = mass.min(1.0);
        objective += weights[r] * zr;
        z.insert(r, zr);
    }
    Ok(ConfigLpSolution {
        params: *params,
        partition: partition.clone(),
        classification: class,
        columns,
        z,
        objective,
        dual_objective: dual.objective,
        dual,
        dual_trace,
    })
}

fn solve_dual(intervals: usize, large: &[usize], weights: &[f64], columns: &[Column]) -> Result<DualSolution> {
    let mut lp = Lp::minimize();
    let gv: Vec<_> = (0..intervals).map(|_| lp.var(1.0, 0.0, f64::INFINITY)).collect();
    let dv: BTreeMap<usize, _> = large.iter().map(|&r| (r, lp.var(0.0, 0.0, weights[r]))).collect();
    let xv: BTreeMap<usize, _> = large.iter().map(|&r| (r, lp.var(1.0, 0.0, f64::INFINITY))).collect();
    for &r in large {
        lp.constraint(&[(dv[&r], 1.0), (xv[&r], 1.0)], Cmp::Ge, weights[r]);
    }
    for c in columns {
        let mut terms = vec![(gv[c.interval], 1.0)];
        terms.extend(c.hits.iter().map(|r| (dv[r], -1.0)));
        lp.constraint(&terms, Cmp::Ge, c.small_value);
    }
    let sol = lp.solve()?;
    Ok(DualSolution {
        gamma: gv.iter().map(|&v| sol.var_value(v)).collect(),
        delta: dv.iter().map(|(&r, &v)| (r, sol.var_value(v))).collect(),
        xi: xv.iter().map(|(&r, &v)| (r, sol.var_value(v))).collect(),
        objective: sol.objective(),
    })
}

/// Sweeps every first-interval length and keeps the best objective (ties to the shorter first interval).
pub fn solve_config_lp(instance: &Instance, params: &ThroughputParams) -> Result<ConfigLpSolution> {
    instance.require_throughput()?;
    let mut best: Option<ConfigLpSolution> = None;
    let mut tried: HashMap<Vec<(Time, Time)>, ()> = HashMap::new();
    for first in 1..=params.interval_len() {
        let partition = build_partition(instance, params, first)?;
        if tried.insert(partition.intervals.clone(), ()).is_some() {
            continue;
        }
        let sol = solve_config_lp_for(instance, params, &partition)?;
        if best.as_ref().is_none_or(|b| sol.objective > b.objective + TOL) {
            best = Some(sol);
        }
    }
    Ok(best.expect("at least one first length"))
}

/// Boundary/middle split of a large request's coverage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZSplit {
    pub request: usize,
    pub eta_left: f64,
    pub eta_middle: f64,
    pub eta_right: f64,
    pub z_middle: f64,
    pub z_boundary: f64,
}

/// `z_m = min(eta_middle, 1)` and `z_b = min(eta_left + eta_middle + eta_right, 1) - z_m`.
pub fn split_masses(eta_left: f64, eta_middle: f64, eta_right: f64) -> (f64, f64) {
    let zm = eta_middle.min(1.0);
    let zb = (eta_left + eta_middle + eta_right).min(1.0) - zm;
    (zb, zm)
}

pub fn zsplit(instance: &Instance, solution: &ConfigLpSolution) -> Vec<ZSplit> {
    let mut out = Vec::new();
    for r in solution.classification.large() {
        let RequestClass::Large { first, last, .. } = solution.classification.classes[r] else {
            continue;
        };
        let masses = solution.hit_masses(instance, r);
        let at = |i: usize| masses.get(&i).copied().unwrap_or(0.0);
        let eta_left = at(first);
        let eta_right = if last > first { at(last) } else { 0.0 };
        let eta_middle: f64 = (first + 1..last).map(at).sum();
        let (z_boundary, z_middle) = split_masses(eta_left, eta_middle, eta_right);
        out.push(ZSplit {
            request: r,
            eta_left,
            eta_middle,
            eta_right,
            z_middle,
            z_boundary,
        });
    }
    out
}
