//! Test-only corpora and exhaustive reference solvers, written independently of the library's
//! own oracles.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use bsched::generate::{generate_instance, Profile};
use bsched::throughput_lp::{ConfigLpSolution, DualSolution, RequestClass};
use bsched::throughput_rounding::{
    contention_probabilities, relocate, relocation_condition, BlockStatus, BlockStructure, Direction,
};
use bsched::{Instance, PageId, Request, Schedule, TentativeSchedule, Time};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn flow(pairs: &[(Time, PageId)]) -> Instance {
    let n = pairs.iter().map(|p| p.1 + 1).max().unwrap_or(1);
    let reqs = pairs
        .iter()
        .enumerate()
        .map(|(i, &(r, p))| Request::flow(i as u64, r, p))
        .collect();
    Instance::new(n, reqs).unwrap()
}

/// `(release, page, deadline, weight)`.
pub fn windowed(quads: &[(Time, PageId, Time, f64)]) -> Instance {
    let n = quads.iter().map(|q| q.1 + 1).max().unwrap_or(1);
    let reqs = quads
        .iter()
        .enumerate()
        .map(|(i, &(r, p, d, w))| Request::windowed(i as u64, r, p, d, w))
        .collect();
    Instance::new(n, reqs).unwrap()
}

pub fn sched(pairs: &[(Time, PageId)]) -> Schedule {
    Schedule::from_pairs(pairs.iter().copied()).unwrap()
}

/// Max flow straight from the definition: first transmission strictly after release.
pub fn max_flow_of(instance: &Instance, slots: &[Option<PageId>]) -> Option<Time> {
    let mut worst = 0;
    for r in instance.requests() {
        let done = (r.release + 1..=slots.len() as Time).find(|&t| slots[t as usize - 1] == Some(r.page))?;
        worst = worst.max(done - r.release);
    }
    Some(worst)
}

pub fn profit_of(instance: &Instance, slots: &[Option<PageId>]) -> f64 {
    instance
        .requests()
        .iter()
        .filter(|r| {
            let d = r.deadline.unwrap();
            (r.release + 1..=d.min(slots.len() as Time)).any(|t| slots[t as usize - 1] == Some(r.page))
        })
        .map(|r| r.weight.unwrap())
        .sum()
}

/// Calls `visit` on every assignment of a page or idle to each of times `1..=len`.
pub fn for_each_slots(len: usize, pages: u32, mut visit: impl FnMut(&[Option<PageId>])) {
    let mut slots = vec![None; len];
    fn rec(k: usize, pages: u32, slots: &mut Vec<Option<PageId>>, visit: &mut dyn FnMut(&[Option<PageId>])) {
        if k == slots.len() {
            visit(slots);
            return;
        }
        for choice in std::iter::once(None).chain((0..pages).map(Some)) {
            slots[k] = choice;
            rec(k + 1, pages, slots, visit);
        }
    }
    rec(0, pages, &mut slots, &mut visit);
}

/// Minimum max flow over every schedule on `1..=horizon`.
pub fn exhaustive_min_max_flow(instance: &Instance) -> Option<Time> {
    let mut best: Option<Time> = None;
    for_each_slots(instance.horizon() as usize, instance.num_pages(), |s| {
        if let Some(f) = max_flow_of(instance, s) {
            best = Some(best.map_or(f, |b: Time| b.min(f)));
        }
    });
    best
}

/// Maximum profit over every schedule on `1..=throughput horizon`.
pub fn exhaustive_max_profit(instance: &Instance) -> f64 {
    let mut best = 0.0f64;
    for_each_slots(instance.throughput_horizon() as usize, instance.num_pages(), |s| {
        best = best.max(profit_of(instance, s));
    });
    best
}

/// The acceptance flow corpus: `n <= 4`, `m <= 8`, derived horizon `<= 8`.
pub fn tiny_flow_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n: u32 = rng.gen_range(1..=4);
    let m: usize = rng.gen_range(1..=8);
    let max_span = 9 - m.min(n as usize) as Time;
    let span = rng.gen_range(1..=max_span);
    generate_instance(rng.gen(), &Profile::flow(n, m, span)).unwrap()
}

pub fn tiny_flow_corpus(seed: u64, count: usize) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| tiny_flow_instance(&mut rng)).collect()
}

/// Random flow instance of moderate size for structural properties.
pub fn random_flow_instance(rng: &mut ChaCha8Rng, max_pages: u32, max_requests: usize, max_span: Time) -> Instance {
    let n = rng.gen_range(1..=max_pages);
    let m = rng.gen_range(1..=max_requests);
    let span = rng.gen_range(1..=max_span);
    generate_instance(rng.gen(), &Profile::flow(n, m, span)).unwrap()
}

/// A random relocation input: blocks, a tentative schedule cleared on freed slots, its
/// first-round pages, and a direction.
pub struct RelocationCase {
    pub blocks: BlockStructure,
    pub tentative: TentativeSchedule,
    pub first_round: BTreeMap<Time, PageId>,
    pub direction: Direction,
}

pub fn relocation_case(rng: &mut ChaCha8Rng) -> RelocationCase {
    let block_len = rng.gen_range(2..=6);
    let freed = rng.gen_range(1..block_len);
    let h = rng.gen_range(1..=block_len);
    let horizon = rng.gen_range(4..=24);
    let blocks = BlockStructure::new(horizon, h, block_len, freed).unwrap();
    let density = rng.gen_range(0.2..0.9);
    let mut tentative = TentativeSchedule::new();
    for t in 1..=horizon {
        if blocks.is_freed(t) || !rng.gen_bool(density) {
            continue;
        }
        for _ in 0..rng.gen_range(1..=3) {
            tentative.add(t, rng.gen_range(0..6));
        }
    }
    let first_round = tentative
        .iter()
        .map(|(t, s)| {
            let v: Vec<PageId> = s.iter().copied().collect();
            (t, v[rng.gen_range(0..v.len())])
        })
        .collect();
    let direction = if rng.gen() { Direction::Left } else { Direction::Right };
    RelocationCase { blocks, tentative, first_round, direction }
}

/// Overflowed `(time, page)` pairs of block `b`.
pub fn block_overflow(case: &RelocationCase, b: usize) -> Vec<(Time, PageId)> {
    let (t1, _) = case.blocks.blocks[b];
    let t2 = case.blocks.freed_start(b);
    (t1..t2)
        .flat_map(|t| {
            let keep = case.first_round.get(&t).copied();
            case.tentative
                .at(t)
                .into_iter()
                .flatten()
                .copied()
                .filter(move |&p| Some(p) != keep)
                .map(move |p| (t, p))
        })
        .collect()
}

/// Whether block `b`'s overflow can be matched to distinct empty slots in its direction,
/// by augmenting paths.
pub fn overflow_matchable(case: &RelocationCase, b: usize) -> bool {
    let (t1, end) = case.blocks.blocks[b];
    let last = case.blocks.blocks.last().unwrap().1;
    let empty: BTreeSet<Time> = (1..last).filter(|&t| case.tentative.size_at(t) == 0).collect();
    let items = block_overflow(case, b);
    let allowed: Vec<Vec<Time>> = items
        .iter()
        .map(|&(t, _)| match case.direction {
            Direction::Right => empty.range(t + 1..end).copied().collect(),
            Direction::Left => empty.range((t1 - case.blocks.freed).max(1)..t).copied().collect(),
        })
        .collect();
    let mut owner: BTreeMap<Time, usize> = BTreeMap::new();
    fn augment(i: usize, allowed: &[Vec<Time>], owner: &mut BTreeMap<Time, usize>, seen: &mut BTreeSet<Time>) -> bool {
        for &s in &allowed[i] {
            if seen.insert(s) {
                let prev = owner.get(&s).copied();
                if prev.is_none_or(|j| augment(j, allowed, owner, seen)) {
                    owner.insert(s, i);
                    return true;
                }
            }
        }
        false
    }
    (0..items.len()).all(|i| augment(i, &allowed, &mut owner, &mut BTreeSet::new()))
}

/// Exact Pr[page i wins], each page joining the set independently with its mass.
pub fn contention_marginals(xs: &[BigRational]) -> Vec<BigRational> {
    let n = xs.len();
    let one = BigRational::one();
    let mut out = vec![BigRational::zero(); n];
    for mask in 1u32..(1 << n) {
        let mut weight = one.clone();
        let mut inside = Vec::new();
        let mut members = Vec::new();
        let mut outside = BigRational::zero();
        for (i, x) in xs.iter().enumerate() {
            if mask & (1 << i) != 0 {
                weight *= x;
                inside.push(x.clone());
                members.push(i);
            } else {
                weight *= &one - x;
                outside += x;
            }
        }
        if inside.iter().all(|x| x.is_zero()) {
            continue;
        }
        let probs = contention_probabilities(&inside, &outside);
        for (i, p) in members.into_iter().zip(probs) {
            out[i] += &weight * p;
        }
    }
    out
}

/// Throughput instances fitting one regular interval: releases in `0..span`, windows of
/// length `1..=max_len`, up to `n` pages.
pub fn tiny_throughput(rng: &mut ChaCha8Rng, n: u32, m: usize, span: Time, max_len: Time) -> Instance {
    let n = rng.gen_range(1..=n);
    let reqs = (0..rng.gen_range(1..=m))
        .map(|i| {
            let r = rng.gen_range(0..span);
            Request::windowed(i as u64, r, rng.gen_range(0..n), r + rng.gen_range(1..=max_len), rng.gen_range(1..=9) as f64)
        })
        .collect();
    Instance::new(n, reqs).unwrap()
}

/// Value of `pages` on interval `i` against `dual`, computed from the request list.
pub fn direct_value(inst: &Instance, sol: &ConfigLpSolution, dual: &DualSolution, i: usize, pages: &[Option<PageId>]) -> f64 {
    let (a, b) = sol.partition.intervals[i];
    let sent = |p: PageId, lo: Time, hi: Time| {
        (lo.max(a).max(1)..=hi.min(b)).any(|t| pages[(t - a) as usize] == Some(p))
    };
    let mut v = 0.0;
    for (idx, r) in inst.requests().iter().enumerate() {
        let (lo, hi) = r.window().unwrap();
        match &sol.classification.classes[idx] {
            RequestClass::Small { interval } if *interval == i && sent(r.page, lo, hi) => v += r.weight.unwrap(),
            RequestClass::Large { first, last, .. } if *first <= i && i <= *last && sent(r.page, lo, hi) => {
                v += dual.delta.get(&idx).copied().unwrap_or(0.0)
            }
            _ => {}
        }
    }
    v
}

pub fn exhaustive_best(inst: &Instance, sol: &ConfigLpSolution, dual: &DualSolution, i: usize) -> f64 {
    let (a, b) = sol.partition.intervals[i];
    let mut best = 0.0f64;
    for_each_slots((b - a + 1) as usize, inst.num_pages(), |s| {
        best = best.max(direct_value(inst, sol, dual, i, s));
    });
    best
}

/// Relocation invariants on one case, including agreement with a bipartite matching.
pub fn check_case(case: &RelocationCase) {
    let (s, statuses, moves) = relocate(&case.tentative, &case.first_round, &case.blocks, case.direction).unwrap();
    for (&t, &p) in &case.first_round {
        assert_eq!(s.get(t), Some(p));
    }
    for (from, to, p) in &moves {
        assert_eq!(s.get(*to), Some(*p));
        assert_eq!(case.tentative.size_at(*to), 0);
        let b = case.blocks.block_of(*from).unwrap();
        let (t1, end) = case.blocks.blocks[b];
        match case.direction {
            Direction::Right => assert!(*from < *to && *to < end),
            Direction::Left => assert!((t1 - case.blocks.freed).max(1) <= *to && *to < *from),
        }
    }
    let sizes = case.tentative.iter().map(|(k, s)| (k, s.len())).collect();
    for (b, status) in statuses.iter().enumerate() {
        let overflow = block_overflow(case, b);
        let moved = moves.iter().filter(|m| case.blocks.block_of(m.0) == Some(b)).count();
        match status {
            BlockStatus::Clean => assert!(overflow.is_empty()),
            BlockStatus::Placed => assert_eq!(moved, overflow.len()),
            _ => assert_eq!(moved, 0),
        }
        if *status == BlockStatus::LeftDisabled || overflow.is_empty() {
            continue;
        }
        let cond = relocation_condition(&sizes, &case.blocks, b, case.direction);
        let matchable = overflow_matchable(case, b);
        assert_eq!(cond, matchable, "block {b}");
        assert_eq!(*status == BlockStatus::Placed, cond, "block {b}");
    }
    assert_eq!(s.len(), case.first_round.len() + moves.len());
}
