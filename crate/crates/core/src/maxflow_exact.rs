//! Exact dynamic programs for the max-flow objective.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::params::eps_reciprocal;
use crate::types::{Instance, PageId, Request, Schedule, TentativeSchedule, Time};

/// Layers larger than this abort the DP instead of exhausting memory.
const MAX_LAYER: usize = 4_000_000;

/// One DP layer: canonical configurations with a link to their predecessor.
struct Layer<C> {
    configs: Vec<(C, usize)>,
}

impl<C: Clone + Eq + Hash> Layer<C> {
    fn build(entries: impl Iterator<Item = (C, usize)>) -> Result<Self> {
        let mut seen: HashMap<C, ()> = HashMap::new();
        let mut configs = Vec::new();
        for (c, prev) in entries {
            if seen.insert(c.clone(), ()).is_none() {
                configs.push((c, prev));
                if configs.len() > MAX_LAYER {
                    return Err(Error::TooLarge(format!(
                        "more than {MAX_LAYER} configurations in one DP layer"
                    )));
                }
            }
        }
        Ok(Layer { configs })
    }
}

/// Walks predecessor links back from the first configuration of the last layer.
fn backtrack<C: Clone>(layers: &[Layer<C>]) -> Vec<C> {
    let mut out = Vec::with_capacity(layers.len());
    let mut idx = 0;
    for layer in layers.iter().rev() {
        let (c, prev) = &layer.configs[idx];
        out.push(c.clone());
        idx = *prev;
    }
    out.reverse();
    out
}

/// Distinct pages released at each time `0..=max`, relative to `base`.
fn releases_by_time(requests: &[Request], base: Time, scale: impl Fn(Time) -> Time) -> Vec<Vec<PageId>> {
    let max = requests.iter().map(|r| scale(r.release) - base).max().unwrap_or(-1);
    let mut out: Vec<BTreeSet<PageId>> = vec![BTreeSet::new(); (max + 1) as usize];
    for r in requests {
        out[(scale(r.release) - base) as usize].insert(r.page);
    }
    out.into_iter().map(|s| s.into_iter().collect()).collect()
}

/// Pages released in `[from, to]`, sorted.
fn pages_released(released: &[Vec<PageId>], from: Time, to: Time) -> Vec<PageId> {
    let mut set = BTreeSet::new();
    for t in from.max(0)..=to {
        if let Some(ps) = released.get(t as usize) {
            set.extend(ps.iter().copied());
        }
    }
    set.into_iter().collect()
}

type Window = Vec<Option<PageId>>;

/// Exact search for a schedule with max flow at most `bound`.
///
/// A configuration is the content of the last `bound` slots. Refuses when
/// `bound * log2(n)` exceeds 40 bits unless `force` is set.
pub fn dp_constant(instance: &Instance, bound: Time, force: bool) -> Result<Schedule> {
    if bound < 1 {
        return Err(Error::InvalidArgument(format!("flow bound must be positive, got {bound}")));
    }
    if instance.is_empty() {
        return Ok(Schedule::new());
    }
    let bits = bound as f64 * (instance.num_pages().max(1) as f64).log2();
    if bits > 40.0 && !force {
        return Err(Error::TooLarge(format!(
            "{bound} slots of {} pages need {bits:.1} bits of state (limit 40; use force)",
            instance.num_pages()
        )));
    }
    let base = instance.min_release().expect("non-empty");
    let released = releases_by_time(instance.requests(), base, |r| r);
    let last = released.len() as Time - 1 + bound;
    let candidates = |t: Time| -> Window {
        let mut c = vec![None];
        c.extend(pages_released(&released, t - bound, t - 1).into_iter().map(Some));
        c
    };

    let mut initial: Vec<Window> = vec![Vec::new()];
    for t in 0..bound {
        let cand = candidates(t);
        initial = initial
            .into_iter()
            .flat_map(|w| {
                cand.iter().map(move |&c| {
                    let mut w = w.clone();
                    w.push(c);
                    w
                })
            })
            .collect();
        if initial.len() > MAX_LAYER {
            return Err(Error::TooLarge("initial configuration set too large".into()));
        }
    }
    let mut layers = vec![Layer::build(initial.into_iter().map(|w| (w, 0)))?];

    for t in bound..=last {
        let need: &[PageId] = released.get((t - bound) as usize).map_or(&[], |v| v.as_slice());
        let cand = candidates(t);
        let prev = layers.last().expect("non-empty");
        let next = Layer::build(prev.configs.iter().enumerate().flat_map(|(i, (w, _))| {
            cand.iter().filter_map(move |&c| {
                let mut nw = Vec::with_capacity(w.len());
                nw.extend_from_slice(&w[1..]);
                nw.push(c);
                need.iter()
                    .all(|p| nw.contains(&Some(*p)))
                    .then_some((nw, i))
            })
        }))?;
        if next.configs.is_empty() {
            return Err(Error::Infeasible);
        }
        layers.push(next);
    }

    let windows = backtrack(&layers);
    let mut slots: Vec<Option<PageId>> = windows[0].clone();
    slots.extend(windows[1..].iter().map(|w| *w.last().expect("non-empty window")));
    let mut schedule = Schedule::new();
    for (offset, p) in slots.into_iter().enumerate() {
        let t = base + offset as Time;
        if let Some(p) = p {
            if t >= 1 {
                schedule.assign(t, p)?;
            }
        }
    }
    Ok(schedule)
}

/// Releases rounded up to multiples of `capacity` and divided by it.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplifiedInstance {
    pub base: Instance,
    /// Transmissions per shrunk step, `eps * L`.
    pub slot_capacity: Time,
    /// Target flow bound in shrunk steps, `2 + 1/eps`.
    pub ell: Time,
}

pub fn simplify_instance(instance: &Instance, bound: Time, eps: f64) -> Result<SimplifiedInstance> {
    let k = eps_reciprocal(eps)?;
    if bound < 1 || bound % k != 0 {
        return Err(Error::InvalidArgument(format!(
            "eps * L must be a positive integer (L = {bound}, 1/eps = {k})"
        )));
    }
    let c = bound / k;
    let requests = instance
        .requests()
        .iter()
        .map(|r| Request {
            release: shrink(r.release, c),
            ..r.clone()
        })
        .collect();
    Ok(SimplifiedInstance {
        base: Instance::new(instance.num_pages(), requests)?,
        slot_capacity: c,
        ell: 2 + k,
    })
}

/// `ceil(r / c)`.
pub fn shrink(r: Time, c: Time) -> Time {
    (r + c - 1).div_euclid(c)
}

type Slots = Vec<Vec<PageId>>;

/// All subsets of `pool` with at most `cap` elements, each sorted.
fn bounded_subsets(pool: &[PageId], cap: usize) -> Vec<Vec<PageId>> {
    fn rec(pool: &[PageId], cap: usize, start: usize, cur: &mut Vec<PageId>, out: &mut Vec<Vec<PageId>>) {
        out.push(cur.clone());
        if cur.len() == cap {
            return;
        }
        for i in start..pool.len() {
            cur.push(pool[i]);
            rec(pool, cap, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(pool, cap, 0, &mut Vec::new(), &mut out);
    out
}

fn multiplicity_ok(slots: &[Vec<PageId>]) -> bool {
    let mut count: BTreeMap<PageId, u8> = BTreeMap::new();
    for s in slots {
        for &p in s {
            let c = count.entry(p).or_insert(0);
            *c += 1;
            if *c > 2 {
                return false;
            }
        }
    }
    true
}

/// Exact search on the simplified instance: each shrunk step carries up to
/// `slot_capacity` pages, no page appears more than twice in any `ell`
/// consecutive steps, and every request is served within `ell` steps.
/// Keys of the result are shrunk steps.
pub fn dp_simplified(simplified: &SimplifiedInstance) -> Result<TentativeSchedule> {
    let inst = &simplified.base;
    let ell = simplified.ell;
    let cap = simplified.slot_capacity as usize;
    if ell < 2 || cap < 1 {
        return Err(Error::InvalidArgument("simplified instance needs ell >= 2 and capacity >= 1".into()));
    }
    if inst.is_empty() {
        return Ok(TentativeSchedule::new());
    }
    let released = releases_by_time(inst.requests(), 0, |r| r);
    let last = released.len() as Time - 1 + ell;

    // Initial pool: pages requested at steps 0..=ell-2, shared by every initial slot.
    let pool = pages_released(&released, 0, ell - 2);
    let subsets = bounded_subsets(&pool, cap);
    let mut initial: Vec<Slots> = vec![Vec::new()];
    for _ in 0..ell {
        let mut grown = Vec::new();
        for w in &initial {
            for s in &subsets {
                let mut nw = w.clone();
                nw.push(s.clone());
                if multiplicity_ok(&nw) {
                    grown.push(nw);
                }
            }
            if grown.len() > MAX_LAYER {
                return Err(Error::TooLarge("initial configuration set too large".into()));
            }
        }
        initial = grown;
    }
    let mut layers = vec![Layer::build(initial.into_iter().map(|w| (w, 0)))?];

    for t in ell..=last {
        let need: &[PageId] = released.get((t - ell) as usize).map_or(&[], |v| v.as_slice());
        let subsets = bounded_subsets(&pages_released(&released, t - ell, t - 1), cap);
        let prev = layers.last().expect("non-empty");
        let next = Layer::build(prev.configs.iter().enumerate().flat_map(|(i, (w, _))| {
            subsets.iter().filter_map(move |s| {
                let mut nw: Slots = Vec::with_capacity(w.len());
                nw.extend_from_slice(&w[1..]);
                nw.push(s.clone());
                let covered = need.iter().all(|p| nw.iter().any(|slot| slot.contains(p)));
                (covered && multiplicity_ok(&nw)).then_some((nw, i))
            })
        }))?;
        if next.configs.is_empty() {
            return Err(Error::Infeasible);
        }
        layers.push(next);
    }

    let windows = backtrack(&layers);
    let mut steps: Slots = windows[0].clone();
    steps.extend(windows[1..].iter().map(|w| w.last().expect("non-empty").clone()));
    let mut out = TentativeSchedule::new();
    for (k, set) in steps.into_iter().enumerate() {
        for p in set {
            out.add(k as Time, p);
        }
    }
    Ok(out)
}

/// Spreads shrunk step `k` over original times `c*k .. c*k + c - 1` in page order,
/// with `c = eps * L`. Step 0 serves no request and is dropped.
pub fn convert_schedule(simplified: &TentativeSchedule, eps: f64, bound: Time) -> Result<Schedule> {
    let k = eps_reciprocal(eps)?;
    if bound < 1 || bound % k != 0 {
        return Err(Error::InvalidArgument(format!(
            "eps * L must be a positive integer (L = {bound}, 1/eps = {k})"
        )));
    }
    let c = bound / k;
    let mut out = Schedule::new();
    for (step, set) in simplified.iter() {
        if set.len() as Time > c {
            return Err(Error::InvalidArgument(format!(
                "step {step} carries {} pages, capacity {c}",
                set.len()
            )));
        }
        if step < 1 {
            continue;
        }
        for (i, &p) in set.iter().enumerate() {
            out.assign(c * step + i as Time, p)?;
        }
    }
    Ok(out)
}

/// Splits at request-free gaps of at least `bound` steps between consecutive releases.
pub fn decompose_silent(instance: &Instance, bound: Time) -> Result<Vec<Instance>> {
    let mut times: Vec<Time> = instance.requests().iter().map(|r| r.release).collect();
    times.sort_unstable();
    times.dedup();
    let mut cuts = Vec::new();
    for w in times.windows(2) {
        if w[1] - w[0] > bound {
            cuts.push(w[1]);
        }
    }
    let mut pieces: Vec<Vec<Request>> = vec![Vec::new(); cuts.len() + 1];
    for r in instance.requests() {
        let idx = cuts.partition_point(|&c| c <= r.release);
        pieces[idx].push(r.clone());
    }
    pieces
        .into_iter()
        .filter(|p| !p.is_empty() || instance.is_empty())
        .map(|p| Instance::new(instance.num_pages(), p))
        .collect()
}

/// `dp_constant` on each silent-gap piece, merged.
pub fn dp_constant_pieces(instance: &Instance, bound: Time, force: bool) -> Result<Schedule> {
    let mut out = Schedule::new();
    for piece in decompose_silent(instance, bound)? {
        for (t, p) in dp_constant(&piece, bound, force)?.iter() {
            out.assign(t, p)?;
        }
    }
    Ok(out)
}
