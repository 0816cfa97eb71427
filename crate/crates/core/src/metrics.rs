use crate::error::Result;
use crate::types::{FractionalSchedule, Instance, Schedule, Time, TOL};

/// Per-request flow times; `None` marks a request the schedule never satisfies.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowReport {
    pub flows: Vec<Option<Time>>,
    pub max_flow: Option<Time>,
}

impl FlowReport {
    pub fn is_finite(&self) -> bool {
        self.max_flow.is_some()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProfitReport {
    pub satisfied_at: Vec<Option<Time>>,
    pub profit: f64,
}

impl ProfitReport {
    pub fn satisfied_count(&self) -> usize {
        self.satisfied_at.iter().filter(|s| s.is_some()).count()
    }
}

/// First time strictly after `after` in a sorted list.
fn first_after(times: &[Time], after: Time) -> Option<Time> {
    let i = times.partition_point(|&t| t <= after);
    times.get(i).copied()
}

pub fn evaluate_max_flow(instance: &Instance, schedule: &Schedule) -> FlowReport {
    let by_page = schedule.times_by_page();
    let flows: Vec<Option<Time>> = instance
        .requests()
        .iter()
        .map(|r| {
            by_page
                .get(&r.page)
                .and_then(|ts| first_after(ts, r.release))
                .map(|c| c - r.release)
        })
        .collect();
    let max_flow = flows
        .iter()
        .try_fold(0, |acc, f| f.map(|f| acc.max(f)));
    FlowReport { flows, max_flow }
}

pub fn evaluate_throughput(instance: &Instance, schedule: &Schedule) -> Result<ProfitReport> {
    instance.require_throughput()?;
    let by_page = schedule.times_by_page();
    let mut profit = 0.0;
    let satisfied_at = instance
        .requests()
        .iter()
        .map(|r| {
            let (lo, hi) = r.window().expect("checked above");
            let hit = by_page
                .get(&r.page)
                .and_then(|ts| first_after(ts, lo - 1))
                .filter(|&t| t <= hi);
            if hit.is_some() {
                profit += r.weight_or_zero();
            }
            hit
        })
        .collect();
    Ok(ProfitReport {
        satisfied_at,
        profit,
    })
}

/// Max over requests of the first `t - r` at which the page's mass in `(r, t]` reaches one.
/// `None` if some request never accumulates a full unit.
pub fn fractional_max_flow(instance: &Instance, x: &FractionalSchedule) -> Option<Time> {
    instance.requests().iter().try_fold(0, |acc, r| {
        let row = x.row(r.page)?;
        let mut cum = 0.0;
        for (&t, &v) in row.range(r.release + 1..) {
            cum += v;
            if cum >= 1.0 - TOL {
                return Some(acc.max(t - r.release));
            }
        }
        None
    })
}
