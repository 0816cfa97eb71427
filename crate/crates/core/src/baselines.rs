use std::collections::{BTreeMap, BTreeSet};

use crate::error::Result;
use crate::types::{FractionalSchedule, Instance, PageId, Schedule, Time, TOL};

/// Serve the earliest-released outstanding request each step; ties by page id.
pub fn fifo_schedule(instance: &Instance) -> Schedule {
    let mut order: Vec<usize> = (0..instance.len()).collect();
    let reqs = instance.requests();
    order.sort_by_key(|&i| (reqs[i].release, reqs[i].page, i));

    let mut schedule = Schedule::new();
    let mut outstanding: BTreeSet<(Time, PageId, usize)> = BTreeSet::new();
    let mut by_page: BTreeMap<PageId, Vec<(Time, usize)>> = BTreeMap::new();
    let mut next = 0;
    let mut t: Time = 1;
    while next < order.len() || !outstanding.is_empty() {
        if outstanding.is_empty() {
            t = t.max(reqs[order[next]].release + 1);
        }
        while next < order.len() && reqs[order[next]].release < t {
            let i = order[next];
            outstanding.insert((reqs[i].release, reqs[i].page, i));
            by_page.entry(reqs[i].page).or_default().push((reqs[i].release, i));
            next += 1;
        }
        let &(_, page, _) = outstanding.iter().next().expect("non-empty");
        schedule.assign(t, page).expect("fresh slot");
        for (r, i) in by_page.remove(&page).unwrap_or_default() {
            outstanding.remove(&(r, page, i));
        }
        t += 1;
    }
    schedule
}

/// Each step transmit the page with the most live unsatisfied weight; ties by page id.
pub fn greedy_throughput(instance: &Instance) -> Result<Schedule> {
    instance.require_throughput()?;
    let reqs = instance.requests();
    let end = instance.throughput_horizon();
    let mut done = vec![false; reqs.len()];
    let mut schedule = Schedule::new();
    for t in 1..=end {
        let mut gain: BTreeMap<PageId, f64> = BTreeMap::new();
        for (i, r) in reqs.iter().enumerate() {
            let (lo, hi) = r.window().expect("throughput");
            if !done[i] && lo <= t && t <= hi {
                *gain.entry(r.page).or_insert(0.0) += r.weight_or_zero();
            }
        }
        let mut best: Option<(PageId, f64)> = None;
        for (&p, &g) in &gain {
            if best.is_none_or(|(_, bg)| g > bg) {
                best = Some((p, g));
            }
        }
        if let Some((p, _)) = best {
            schedule.assign(t, p).expect("fresh slot");
            for (i, r) in reqs.iter().enumerate() {
                let (lo, hi) = r.window().expect("throughput");
                if r.page == p && lo <= t && t <= hi {
                    done[i] = true;
                }
            }
        }
    }
    Ok(schedule)
}

/// Transmit the page with the most fractional mass since its last transmission.
/// Ties go to the page with the earliest outstanding request, then the smallest id.
pub fn lp_guided_fifo(instance: &Instance, fractional: &FractionalSchedule) -> Schedule {
    let reqs = instance.requests();
    let mut satisfied = vec![false; reqs.len()];
    let mut last: BTreeMap<PageId, Time> = BTreeMap::new();
    let mut schedule = Schedule::new();
    let rmax = instance.max_release().unwrap_or(0);
    let mass_end = fractional.iter().map(|(_, t, _)| t).max().unwrap_or(0);
    let limit = rmax.max(mass_end) + reqs.len() as Time + 1;
    let mut t: Time = 1;
    while t <= limit && satisfied.iter().any(|s| !s) {
        let mut earliest: BTreeMap<PageId, Time> = BTreeMap::new();
        for (i, r) in reqs.iter().enumerate() {
            if !satisfied[i] && r.release < t {
                let e = earliest.entry(r.page).or_insert(r.release);
                *e = (*e).min(r.release);
            }
        }
        let mut candidates: BTreeSet<PageId> = earliest.keys().copied().collect();
        candidates.extend(fractional.pages());
        let mut best: Option<(PageId, f64, Time)> = None;
        for &p in &candidates {
            let from = last.get(&p).copied().unwrap_or(0);
            let y: f64 = fractional
                .row(p)
                .map(|row| row.range(from + 1..=t).map(|(_, v)| v).sum())
                .unwrap_or(0.0);
            let e = earliest.get(&p).copied().unwrap_or(Time::MAX);
            if y <= TOL && e == Time::MAX {
                continue;
            }
            let better = match best {
                None => true,
                Some((_, by, be)) => y > by + TOL || ((y - by).abs() <= TOL && e < be),
            };
            if better {
                best = Some((p, y, e));
            }
        }
        if let Some((p, _, _)) = best {
            schedule.assign(t, p).expect("fresh slot");
            last.insert(p, t);
            for (i, r) in reqs.iter().enumerate() {
                if r.page == p && r.release < t {
                    satisfied[i] = true;
                }
            }
        }
        t += 1;
    }
    schedule
}

/// The tight family for [`lp_guided_fifo`]: for even `n`, pages `2t-1` and `2t` are
/// requested at each `t` in `[1, n/2]` and again at `t + n/2`; every page gets half a
/// transmission at `ceil(p/2) + 1`, `ceil(p/2) + n/2 + 1` and `ceil(p/2) + n + 1`.
/// Pages are numbered from 1 (page 0 is never requested).
pub fn lp_fifo_family(n: u32) -> Result<(Instance, FractionalSchedule)> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(crate::Error::InvalidArgument(format!("n must be even and at least 2, got {n}")));
    }
    let half = (n / 2) as Time;
    let mut requests = Vec::new();
    for round in 0..2 {
        for t in 1..=half {
            for p in [2 * t - 1, 2 * t] {
                let id = requests.len() as u64;
                requests.push(crate::Request::flow(id, t + round * half, p as PageId));
            }
        }
    }
    let instance = Instance::new(n + 1, requests)?;
    let mut x = FractionalSchedule::new(half + 1);
    for p in 1..=n as Time {
        let c = (p + 1) / 2;
        for t in [c + 1, c + half + 1, c + 2 * half + 1] {
            x.set(p as PageId, t, 0.5);
        }
    }
    Ok((instance, x))
}
