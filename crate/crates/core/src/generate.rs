use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{Instance, PageId, Request, Time};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Arrival {
    Uniform,
    /// Releases cluster around `bursts` random centres, each spread over `spread` steps.
    Bursty { bursts: u32, spread: Time },
}

/// Generator settings. The text form is a comma-separated `key=value` list, e.g.
/// `n=4,m=8,span=8` or `n=3,m=6,span=10,arrival=bursty,bursts=2,win=2-6,weight=1-10`.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    pub pages: u32,
    pub requests: usize,
    /// Releases fall in `[0, span)`.
    pub span: Time,
    pub arrival: Arrival,
    /// Window length range (inclusive); present for throughput instances.
    pub window: Option<(Time, Time)>,
    /// Integer weight range (inclusive).
    pub weight: (u32, u32),
}

impl Profile {
    pub fn flow(pages: u32, requests: usize, span: Time) -> Self {
        Profile {
            pages,
            requests,
            span,
            arrival: Arrival::Uniform,
            window: None,
            weight: (1, 1),
        }
    }

    pub fn throughput(pages: u32, requests: usize, span: Time, window: (Time, Time), weight: (u32, u32)) -> Self {
        Profile {
            window: Some(window),
            weight,
            ..Profile::flow(pages, requests, span)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("profile: {m}")));
        if self.requests > 0 && self.pages == 0 {
            return bad("requests need at least one page");
        }
        if self.requests > 0 && self.span < 1 {
            return bad("span must be at least 1");
        }
        if let Arrival::Bursty { bursts, spread } = self.arrival {
            if bursts == 0 || spread < 1 {
                return bad("bursty arrivals need bursts >= 1 and spread >= 1");
            }
        }
        if let Some((lo, hi)) = self.window {
            if lo < 1 || hi < lo {
                return bad("window range must satisfy 1 <= min <= max");
            }
        }
        if self.weight.1 < self.weight.0 {
            return bad("weight range is empty");
        }
        Ok(())
    }
}

fn parse_range<T: FromStr>(v: &str) -> Option<(T, T)> {
    match v.split_once('-') {
        Some((a, b)) => Some((a.trim().parse().ok()?, b.trim().parse().ok()?)),
        None => {
            let x: T = v.trim().parse().ok()?;
            let y: T = v.trim().parse().ok()?;
            Some((x, y))
        }
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut p = Profile::flow(4, 8, 8);
        let mut bursts = 2;
        let mut spread = 2;
        let mut bursty = false;
        for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("profile item `{item}` lacks `=`")))?;
            let bad = || Error::InvalidArgument(format!("profile: bad value for `{k}`: `{v}`"));
            match k.trim() {
                "n" => p.pages = v.parse().map_err(|_| bad())?,
                "m" => p.requests = v.parse().map_err(|_| bad())?,
                "span" => p.span = v.parse().map_err(|_| bad())?,
                "arrival" => match v {
                    "uniform" => bursty = false,
                    "bursty" => bursty = true,
                    _ => return Err(bad()),
                },
                "bursts" => bursts = v.parse().map_err(|_| bad())?,
                "spread" => spread = v.parse().map_err(|_| bad())?,
                "win" => p.window = Some(parse_range(v).ok_or_else(bad)?),
                "weight" => p.weight = parse_range(v).ok_or_else(bad)?,
                _ => return Err(Error::InvalidArgument(format!("profile: unknown key `{k}`"))),
            }
        }
        if bursty {
            p.arrival = Arrival::Bursty { bursts, spread };
        }
        p.validate()?;
        Ok(p)
    }
}

/// Deterministic in `seed`. Requests are numbered in release order.
pub fn generate_instance(seed: u64, profile: &Profile) -> Result<Instance> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<Time> = match profile.arrival {
        Arrival::Bursty { bursts, .. } => (0..bursts).map(|_| rng.gen_range(0..profile.span)).collect(),
        Arrival::Uniform => Vec::new(),
    };
    let mut drafts: Vec<(Time, PageId, Option<(Time, f64)>)> = (0..profile.requests)
        .map(|_| {
            let release = match profile.arrival {
                Arrival::Uniform => rng.gen_range(0..profile.span),
                Arrival::Bursty { spread, .. } => {
                    let c = centres[rng.gen_range(0..centres.len())];
                    (c + rng.gen_range(0..spread)).min(profile.span - 1)
                }
            };
            let page = rng.gen_range(0..profile.pages);
            let extra = profile.window.map(|(lo, hi)| {
                let len = rng.gen_range(lo..=hi);
                let w = rng.gen_range(profile.weight.0..=profile.weight.1) as f64;
                (release + len, w)
            });
            (release, page, extra)
        })
        .collect();
    drafts.sort_by_key(|d| d.0);
    let requests = drafts
        .into_iter()
        .enumerate()
        .map(|(i, (r, p, extra))| match extra {
            Some((d, w)) => Request::windowed(i as u64, r, p, d, w),
            None => Request::flow(i as u64, r, p),
        })
        .collect();
    Instance::new(profile.pages, requests)
}
