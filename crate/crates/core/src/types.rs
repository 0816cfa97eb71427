use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

pub type Time = i64;
pub type PageId = u32;

/// Tolerance for every comparison against LP output.
pub const TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Request {
    pub id: u64,
    pub release: Time,
    pub page: PageId,
    pub deadline: Option<Time>,
    pub weight: Option<f64>,
}

impl Request {
    pub fn flow(id: u64, release: Time, page: PageId) -> Self {
        Request {
            id,
            release,
            page,
            deadline: None,
            weight: None,
        }
    }

    pub fn windowed(id: u64, release: Time, page: PageId, deadline: Time, weight: f64) -> Self {
        Request {
            id,
            release,
            page,
            deadline: Some(deadline),
            weight: Some(weight),
        }
    }

    /// Times at which a transmission satisfies the request, `[release+1, deadline]`.
    pub fn window(&self) -> Option<(Time, Time)> {
        self.deadline.map(|d| (self.release + 1, d))
    }

    pub fn window_len(&self) -> Option<Time> {
        self.deadline.map(|d| d - self.release)
    }

    pub fn weight_or_zero(&self) -> f64 {
        self.weight.unwrap_or(0.0)
    }
}

/// Pages are `0..num_pages`.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    num_pages: u32,
    requests: Vec<Request>,
    horizon: Time,
}

impl Instance {
    /// Validates the requests and derives the horizon `max release + min(m, n)`.
    pub fn new(num_pages: u32, requests: Vec<Request>) -> Result<Self> {
        validate(num_pages, &requests)?;
        let horizon = derived_horizon(num_pages, &requests);
        Ok(Instance {
            num_pages,
            requests,
            horizon,
        })
    }

    pub fn with_horizon(num_pages: u32, requests: Vec<Request>, horizon: Time) -> Result<Self> {
        validate(num_pages, &requests)?;
        if let Some(rmax) = requests.iter().map(|r| r.release).max() {
            if horizon < rmax + 1 {
                return Err(Error::InvalidInstance(format!(
                    "horizon {horizon} is below max release + 1 = {}",
                    rmax + 1
                )));
            }
        } else if horizon < 0 {
            return Err(Error::InvalidInstance("negative horizon".into()));
        }
        Ok(Instance {
            num_pages,
            requests,
            horizon,
        })
    }

    pub fn empty(num_pages: u32) -> Self {
        Instance {
            num_pages,
            requests: Vec::new(),
            horizon: 0,
        }
    }

    pub fn num_pages(&self) -> u32 {
        self.num_pages
    }

    pub fn pages(&self) -> std::ops::Range<PageId> {
        0..self.num_pages
    }

    pub fn requests(&self) -> &[Request] {
        &self.requests
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    pub fn horizon(&self) -> Time {
        self.horizon
    }

    pub fn max_release(&self) -> Option<Time> {
        self.requests.iter().map(|r| r.release).max()
    }

    pub fn min_release(&self) -> Option<Time> {
        self.requests.iter().map(|r| r.release).min()
    }

    /// Every request carries a deadline and a weight.
    pub fn is_throughput(&self) -> bool {
        self.requests.iter().all(|r| r.deadline.is_some())
    }

    pub fn require_throughput(&self) -> Result<()> {
        if self.is_throughput() {
            Ok(())
        } else {
            Err(Error::InvalidInstance(
                "throughput objective needs a deadline and weight on every request".into(),
            ))
        }
    }

    /// Last time any transmission can matter: the horizon, or the latest deadline if later.
    pub fn throughput_horizon(&self) -> Time {
        let dmax = self.requests.iter().filter_map(|r| r.deadline).max();
        dmax.map_or(self.horizon, |d| d.max(self.horizon))
    }

    pub fn total_weight(&self) -> f64 {
        self.requests.iter().map(Request::weight_or_zero).sum()
    }

    /// Distinct release times per page (the page's request times), sorted.
    pub fn request_times(&self) -> BTreeMap<PageId, Vec<Time>> {
        let mut out: BTreeMap<PageId, BTreeSet<Time>> = BTreeMap::new();
        for r in &self.requests {
            out.entry(r.page).or_default().insert(r.release);
        }
        out.into_iter()
            .map(|(p, s)| (p, s.into_iter().collect()))
            .collect()
    }
}

fn validate(num_pages: u32, requests: &[Request]) -> Result<()> {
    let mut ids = BTreeSet::new();
    for r in requests {
        if !ids.insert(r.id) {
            return Err(Error::InvalidInstance(format!("duplicate request id {}", r.id)));
        }
        if r.release < 0 {
            return Err(Error::InvalidInstance(format!("request {} has negative release", r.id)));
        }
        if r.page >= num_pages {
            return Err(Error::InvalidInstance(format!(
                "request {} asks for page {} outside 0..{}",
                r.id, r.page, num_pages
            )));
        }
        match (r.deadline, r.weight) {
            (Some(d), Some(w)) => {
                if d < r.release + 1 {
                    return Err(Error::InvalidInstance(format!(
                        "request {} has deadline {} < release + 1",
                        r.id, d
                    )));
                }
                if !(w >= 0.0) || !w.is_finite() {
                    return Err(Error::InvalidInstance(format!(
                        "request {} has invalid weight {}",
                        r.id, w
                    )));
                }
            }
            (None, None) => {}
            _ => {
                return Err(Error::InvalidInstance(format!(
                    "request {} must carry both deadline and weight or neither",
                    r.id
                )))
            }
        }
    }
    Ok(())
}

fn derived_horizon(num_pages: u32, requests: &[Request]) -> Time {
    match requests.iter().map(|r| r.release).max() {
        None => 0,
        Some(rmax) => rmax + requests.len().min(num_pages as usize) as Time,
    }
}

/// Horizon reset to `max release + min(m, n)`; requests unchanged.
pub fn reduce_horizon(instance: &Instance) -> Instance {
    Instance {
        num_pages: instance.num_pages,
        requests: instance.requests.clone(),
        horizon: derived_horizon(instance.num_pages, &instance.requests),
    }
}

/// Feasible schedule: at most one page per positive time.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Schedule {
    slots: BTreeMap<Time, PageId>,
}

impl Schedule {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Time, PageId)>) -> Result<Self> {
        let mut s = Schedule::new();
        for (t, p) in pairs {
            s.assign(t, p)?;
        }
        Ok(s)
    }

    pub fn assign(&mut self, t: Time, p: PageId) -> Result<()> {
        if t < 1 {
            return Err(Error::InvalidArgument(format!("transmission at non-positive time {t}")));
        }
        if let Some(q) = self.slots.get(&t) {
            return Err(Error::InvalidArgument(format!(
                "time {t} already carries page {q}"
            )));
        }
        self.slots.insert(t, p);
        Ok(())
    }

    pub fn get(&self, t: Time) -> Option<PageId> {
        self.slots.get(&t).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Time, PageId)> + '_ {
        self.slots.iter().map(|(&t, &p)| (t, p))
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn last_time(&self) -> Option<Time> {
        self.slots.keys().next_back().copied()
    }

    /// Same times, pages relabelled.
    pub fn map_pages(&self, f: impl Fn(PageId) -> PageId) -> Schedule {
        Schedule {
            slots: self.slots.iter().map(|(&t, &p)| (t, f(p))).collect(),
        }
    }

    /// Transmission times per page, sorted.
    pub fn times_by_page(&self) -> BTreeMap<PageId, Vec<Time>> {
        let mut out: BTreeMap<PageId, Vec<Time>> = BTreeMap::new();
        for (&t, &p) in &self.slots {
            out.entry(p).or_default().push(t);
        }
        out
    }
}

/// Possibly infeasible schedule: a set of pages per time.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TentativeSchedule {
    slots: BTreeMap<Time, BTreeSet<PageId>>,
}

impl TentativeSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false if `p` was already present at `t`.
    pub fn add(&mut self, t: Time, p: PageId) -> bool {
        self.slots.entry(t).or_default().insert(p)
    }

    pub fn at(&self, t: Time) -> Option<&BTreeSet<PageId>> {
        self.slots.get(&t)
    }

    pub fn size_at(&self, t: Time) -> usize {
        self.slots.get(&t).map_or(0, BTreeSet::len)
    }

    pub fn clear_at(&mut self, t: Time) {
        self.slots.remove(&t);
    }

    pub fn iter(&self) -> impl Iterator<Item = (Time, &BTreeSet<PageId>)> + '_ {
        self.slots.iter().filter(|(_, s)| !s.is_empty()).map(|(&t, s)| (t, s))
    }

    pub fn total(&self) -> usize {
        self.slots.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    pub fn from_schedule(s: &Schedule) -> Self {
        let mut t = TentativeSchedule::new();
        for (time, p) in s.iter() {
            t.add(time, p);
        }
        t
    }

    /// Transmission times per page, sorted.
    pub fn times_by_page(&self) -> BTreeMap<PageId, Vec<Time>> {
        let mut out: BTreeMap<PageId, Vec<Time>> = BTreeMap::new();
        for (&t, set) in &self.slots {
            for &p in set {
                out.entry(p).or_default().push(t);
            }
        }
        out
    }
}

/// Sparse fractional transmissions `x[p][t]`, with the flow bound the LP was solved at.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FractionalSchedule {
    values: BTreeMap<PageId, BTreeMap<Time, f64>>,
    pub bound: Time,
}

impl FractionalSchedule {
    pub fn new(bound: Time) -> Self {
        FractionalSchedule {
            values: BTreeMap::new(),
            bound,
        }
    }

    /// Adds `v` to `x[p][t]`; values at or below `TOL` are ignored.
    pub fn add(&mut self, p: PageId, t: Time, v: f64) {
        if v > TOL {
            *self.values.entry(p).or_default().entry(t).or_insert(0.0) += v;
        }
    }

    pub fn set(&mut self, p: PageId, t: Time, v: f64) {
        if v > TOL {
            self.values.entry(p).or_default().insert(t, v);
        } else if let Some(row) = self.values.get_mut(&p) {
            row.remove(&t);
        }
    }

    pub fn get(&self, p: PageId, t: Time) -> f64 {
        self.values
            .get(&p)
            .and_then(|row| row.get(&t))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn row(&self, p: PageId) -> Option<&BTreeMap<Time, f64>> {
        self.values.get(&p)
    }

    pub fn pages(&self) -> impl Iterator<Item = PageId> + '_ {
        self.values.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (PageId, Time, f64)> + '_ {
        self.values
            .iter()
            .flat_map(|(&p, row)| row.iter().map(move |(&t, &v)| (p, t, v)))
    }

    /// `Σ_p x[p][t]` for every time with mass.
    pub fn column_sums(&self) -> BTreeMap<Time, f64> {
        let mut out = BTreeMap::new();
        for (_, t, v) in self.iter() {
            *out.entry(t).or_insert(0.0) += v;
        }
        out
    }

    /// Pages with mass at time `t`.
    pub fn column(&self, t: Time) -> BTreeMap<PageId, f64> {
        self.values
            .iter()
            .filter_map(|(&p, row)| row.get(&t).map(|&v| (p, v)))
            .collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.iter().map(|(_, _, v)| v).sum()
    }

    pub fn is_integral(&self) -> bool {
        self.iter().all(|(_, _, v)| (v - v.round()).abs() <= TOL)
    }
}

/// Rounds values within `TOL` of an integer to that integer.
pub(crate) fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() <= TOL {
        r
    } else {
        v
    }
}

/// Number of integers `k ≥ 0` with `k + alpha ≤ y`.
pub(crate) fn points_below(y: f64, alpha: f64) -> i64 {
    let y = snap(y);
    if y < alpha {
        0
    } else {
        (y - alpha).floor() as i64 + 1
    }
}

/// Number of `k ≥ 0` with `prev < k + alpha ≤ cur`.
pub(crate) fn crossings(prev: f64, cur: f64, alpha: f64) -> i64 {
    points_below(cur, alpha) - points_below(prev, alpha)
}
