use std::fmt::Write as _;
use std::path::Path;

use crate::error::{parse_err, Result};
use crate::throughput_lp::ConfigLpSolution;
use crate::types::{FractionalSchedule, Instance, PageId, Request, Time};

fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("").trim()
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("bad {what} `{tok}`")))
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let mut pages: Option<u32> = None;
    let mut horizon: Option<Time> = None;
    let mut requests = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = strip_comment(raw);
        if body.is_empty() {
            continue;
        }
        let mut toks = body.split_whitespace();
        let head = toks.next().expect("non-empty");
        match (head, pages) {
            ("pages", None) => pages = Some(field(toks.next(), line, "page count")?),
            ("pages", Some(_)) => return Err(parse_err(line, "duplicate `pages` line")),
            (_, None) => return Err(parse_err(line, "first line must be `pages <n>`")),
            ("horizon", Some(_)) => {
                if horizon.is_some() || !requests.is_empty() {
                    return Err(parse_err(line, "`horizon` must follow `pages` directly"));
                }
                horizon = Some(field(toks.next(), line, "horizon")?);
            }
            ("req", Some(n)) => {
                let rest: Vec<&str> = toks.collect();
                if rest.len() != 3 && rest.len() != 5 {
                    return Err(parse_err(
                        line,
                        "expected `req <id> <release> <page> [<deadline> <weight>]`",
                    ));
                }
                let id: u64 = field(Some(rest[0]), line, "id")?;
                let release: Time = field(Some(rest[1]), line, "release")?;
                let page: PageId = field(Some(rest[2]), line, "page")?;
                if release < 0 {
                    return Err(parse_err(line, "negative release"));
                }
                if page >= n {
                    return Err(parse_err(line, format!("page {page} outside 0..{n}")));
                }
                let req = if rest.len() == 5 {
                    let d: Time = field(Some(rest[3]), line, "deadline")?;
                    let w: f64 = field(Some(rest[4]), line, "weight")?;
                    if d < release + 1 {
                        return Err(parse_err(line, "deadline must be at least release + 1"));
                    }
                    if !(w >= 0.0) || !w.is_finite() {
                        return Err(parse_err(line, "weight must be a finite non-negative number"));
                    }
                    Request::windowed(id, release, page, d, w)
                } else {
                    Request::flow(id, release, page)
                };
                requests.push(req);
            }
            (other, Some(_)) => return Err(parse_err(line, format!("unknown directive `{other}`"))),
        }
    }
    let n = pages.ok_or_else(|| parse_err(1, "missing `pages <n>` header"))?;
    match horizon {
        Some(h) => Instance::with_horizon(n, requests, h),
        None => Instance::new(n, requests),
    }
}

pub fn format_instance(instance: &Instance) -> String {
    let mut out = String::new();
    writeln!(out, "pages {}", instance.num_pages()).unwrap();
    writeln!(out, "horizon {}", instance.horizon()).unwrap();
    for r in instance.requests() {
        match (r.deadline, r.weight) {
            (Some(d), Some(w)) => {
                writeln!(out, "req {} {} {} {} {:?}", r.id, r.release, r.page, d, w).unwrap()
            }
            _ => writeln!(out, "req {} {} {}", r.id, r.release, r.page).unwrap(),
        }
    }
    out
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance> {
    parse_instance(&std::fs::read_to_string(path)?)
}

pub fn write_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_instance(instance))?;
    Ok(())
}

/// `frac <page> <time> <value>` lines, plus a leading `bound <L>` line.
pub fn format_fractional(x: &FractionalSchedule) -> String {
    let mut out = format!("bound {}\n", x.bound);
    for (p, t, v) in x.iter() {
        writeln!(out, "frac {p} {t} {v:?}").unwrap();
    }
    out
}

pub fn parse_fractional(text: &str) -> Result<FractionalSchedule> {
    let mut x = FractionalSchedule::new(0);
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = strip_comment(raw);
        if body.is_empty() {
            continue;
        }
        let mut toks = body.split_whitespace();
        match toks.next() {
            Some("bound") => x.bound = field(toks.next(), line, "bound")?,
            Some("frac") => {
                let p: PageId = field(toks.next(), line, "page")?;
                let t: Time = field(toks.next(), line, "time")?;
                let v: f64 = field(toks.next(), line, "value")?;
                if !(0.0..=1.0 + crate::TOL).contains(&v) {
                    return Err(parse_err(line, format!("value {v} outside [0,1]")));
                }
                x.set(p, t, v);
            }
            Some(other) => return Err(parse_err(line, format!("unknown directive `{other}`"))),
            None => unreachable!(),
        }
    }
    Ok(x)
}

pub fn trial_line(scheme: &str, seed: u64, profit: f64) -> String {
    format!("trial {scheme} {seed} {profit:?}")
}

pub fn derand_line(group: usize, alpha: f64, sum: f64) -> String {
    format!("derand {group} {alpha:?} {sum:?}")
}

/// `col <interval> <weight> <p_1> ... <p_len>` per column (`-` for idle) and `z <request id> <value>`.
pub fn format_config_solution(instance: &Instance, solution: &ConfigLpSolution) -> String {
    let mut out = String::new();
    for c in &solution.columns {
        write!(out, "col {} {:?}", c.interval, c.weight).unwrap();
        for p in &c.pages {
            match p {
                Some(p) => write!(out, " {p}").unwrap(),
                None => out.push_str(" -"),
            }
        }
        out.push('\n');
    }
    for (&idx, &z) in &solution.z {
        writeln!(out, "z {} {z:?}", instance.requests()[idx].id).unwrap();
    }
    out
}
