//! Acceptance suite: one PASS/FAIL line per criterion, exits non-zero if any fails.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use bsched::baselines::{fifo_schedule, lp_fifo_family, lp_guided_fifo};
use bsched::derand::{derandomize, EstimatorState};
use bsched::maxflow_exact::{convert_schedule, dp_constant, dp_simplified, simplify_instance};
use bsched::maxflow_lp::{
    build_groups, completes_within, group_alpha_round, max_overflow, prepare_lp, split_far_pages,
};
use bsched::metrics::{evaluate_max_flow, fractional_max_flow};
use bsched::oracles::{brute_maxflow, brute_throughput};
use bsched::params::ThroughputParams;
use bsched::throughput_lp::{
    build_partition, classify_requests, separation_oracle, solve_config_lp, solve_config_lp_for, DualSolution,
    IntervalPartition,
};
use bsched::throughput_rounding::{
    beats_one_minus_inv_e, better_of_two, contention_probabilities, exact, exact_coverage,
    exact_satisfaction_probability,
};
use bsched::generate::{generate_instance, Profile};
use bsched::{Error, Instance, Time};
use common::*;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn opt_flow(inst: &Instance) -> Time {
    brute_maxflow(inst).unwrap().optimum as Time
}

fn dp_exactness() -> Result<String, String> {
    let corpus = tiny_flow_corpus(1001, 200);
    for (k, inst) in corpus.iter().enumerate() {
        let opt = opt_flow(inst);
        let min_l = (1..)
            .find(|&l| match dp_constant(inst, l, false) {
                Ok(_) => true,
                Err(Error::Infeasible) => false,
                Err(e) => panic!("{e}"),
            })
            .unwrap();
        ensure!(min_l == opt, "instance {k}: dp {min_l} vs oracle {opt}");
    }
    Ok(format!("{} instances", corpus.len()))
}

fn fifo_bound() -> Result<String, String> {
    let corpus = tiny_flow_corpus(1001, 200);
    let mut worst = 0.0f64;
    for (k, inst) in corpus.iter().enumerate() {
        let opt = opt_flow(inst);
        let f = evaluate_max_flow(inst, &fifo_schedule(inst)).max_flow.unwrap();
        ensure!(f <= 2 * opt, "instance {k}: fifo {f} vs opt {opt}");
        worst = worst.max(f as f64 / opt as f64);
    }
    Ok(format!("worst ratio {worst:.3}"))
}

fn small_bound_pipeline() -> Result<String, String> {
    let eps = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    let mut done = 0;
    let mut worst = 0.0f64;
    while done < 100 {
        let inst = random_flow_instance(&mut rng, 4, 8, 10);
        let opt = opt_flow(&inst);
        if opt % 2 != 0 {
            continue;
        }
        let s = simplify_instance(&inst, opt, eps).map_err(|e| e.to_string())?;
        let t = dp_simplified(&s).map_err(|e| format!("dp at the optimum: {e}"))?;
        let out = convert_schedule(&t, eps, opt).map_err(|e| e.to_string())?;
        let f = evaluate_max_flow(&inst, &out).max_flow.ok_or("unserved request")?;
        ensure!(f as f64 <= (1.0 + 6.0 * eps) * opt as f64, "flow {f} vs opt {opt}");
        worst = worst.max(f as f64 / opt as f64);
        done += 1;
    }
    Ok(format!("{done} instances, worst ratio {worst:.3}"))
}

fn group_structure() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    let mut most = 0.0f64;
    for k in 0..500 {
        let inst = random_flow_instance(&mut rng, 6, 12, 16);
        let l = opt_flow(&inst) + rng.gen_range(0..4);
        let split = split_far_pages(&inst, l).map_err(|e| e.to_string())?;
        let g = build_groups(&split.instance, l);
        ensure!(g.group_count as Time <= 2 * l, "instance {k}: {} groups at L={l}", g.group_count);
        for (&p, &gp) in &g.group_of {
            for (&q, &gq) in g.group_of.range(p + 1..) {
                let ((a, b), (c, d)) = (g.windows[&p], g.windows[&q]);
                ensure!(gp != gq || b < c || d < a, "instance {k}: pages {p} and {q} overlap in group {gp}");
            }
        }
        most = most.max(g.group_count as f64 / (2 * l) as f64);
    }
    Ok(format!("500 instances, max groups/2L {most:.3}"))
}

fn tentative_completeness() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1005);
    let mut vectors = 0;
    for k in 0..50 {
        let inst = random_flow_instance(&mut rng, 5, 10, 12);
        let l = opt_flow(&inst);
        let pipe = prepare_lp(&inst, l).map_err(|e| e.to_string())?;
        for _ in 0..200 {
            let alphas: Vec<f64> = (0..pipe.groups.group_count).map(|_| rng.gen()).collect();
            let tent = group_alpha_round(&pipe.fractional, &pipe.groups, &alphas).map_err(|e| e.to_string())?;
            ensure!(completes_within(&pipe.split.instance, &tent, l), "instance {k}: alphas {alphas:?}");
            vectors += 1;
        }
    }
    Ok(format!("{vectors} alpha vectors, 0 violations"))
}

/// Smallest bound at or above the optimum where the initial estimator sum is at most 1/m.
fn in_regime(inst: &Instance, eps: f64) -> Time {
    (opt_flow(inst)..)
        .find(|&l| {
            let pipe = prepare_lp(inst, l).unwrap();
            let s = EstimatorState::new(&pipe.fractional, &pipe.groups, &pipe.timesteps, eps, l).unwrap().total();
            s <= 1.0 / inst.len() as f64
        })
        .unwrap()
}

fn derandomization() -> Result<String, String> {
    let eps = 1.0 / 3.0;
    let corpus = tiny_flow_corpus(1006, 50);
    let mut steps = 0;
    for (k, inst) in corpus.iter().enumerate() {
        let l = in_regime(inst, eps);
        let pipe = prepare_lp(inst, l).map_err(|e| e.to_string())?;
        let d = derandomize(&pipe.fractional, &pipe.groups, &pipe.timesteps, eps, l, inst.len())
            .map_err(|e| format!("instance {k}: {e}"))?;
        let mut prev = d.initial_sum;
        for &(_, _, s) in &d.trace {
            ensure!(s <= prev * (1.0 + 1e-12), "instance {k}: estimator rose {prev} -> {s}");
            prev = s;
            steps += 1;
        }
        let tent = group_alpha_round(&pipe.fractional, &pipe.groups, &d.alphas).map_err(|e| e.to_string())?;
        let budget = (6.0 * eps * l as f64).ceil() as i64;
        let of = max_overflow(&tent, &pipe.timesteps);
        ensure!(of <= budget, "instance {k}: overflow {of} > {budget}");
        let state = EstimatorState::new(&pipe.fractional, &pipe.groups, &pipe.timesteps, eps, l).unwrap();
        ensure!(state.worst_excess(&d.alphas) <= 1e-9, "instance {k}: an interval exceeds its budget");
    }
    Ok(format!("{} instances, {steps} sweep steps", corpus.len()))
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn contention() -> Result<String, String> {
    // Every multiset of masses from the grid over up to five pages whose total stays within one.
    let grid: Vec<BigRational> = [(1, 12), (1, 8), (1, 6), (1, 5), (1, 4), (1, 3), (1, 2), (2, 3), (1, 1)]
        .iter()
        .map(|&(n, d)| rat(n, d))
        .collect();
    let mut cases = 0;
    fn walk(grid: &[BigRational], from: usize, xs: &mut Vec<BigRational>, cases: &mut usize) -> Result<(), String> {
        if !xs.is_empty() {
            for split in 0..=xs.len() {
                // The first `split` pages form the set, the rest sit outside it.
                let (inside, outside) = xs.split_at(split);
                if inside.is_empty() {
                    continue;
                }
                let out = outside.iter().fold(BigRational::zero(), |a, b| a + b);
                let probs = contention_probabilities(inside, &out);
                let sum = probs.iter().fold(BigRational::zero(), |a, b| a + b);
                ensure!(sum == BigRational::one(), "sum {sum} on {inside:?} / {out}");
            }
            let marginal = contention_marginals(xs);
            for (x, m) in xs.iter().zip(&marginal) {
                ensure!(beats_one_minus_inv_e(m, x), "page mass {x}: win probability {m} on {xs:?}");
            }
            *cases += 1;
        }
        if xs.len() == 5 {
            return Ok(());
        }
        let total = xs.iter().fold(BigRational::zero(), |a, b| a + b);
        for i in from..grid.len() {
            if &total + &grid[i] <= BigRational::one() {
                xs.push(grid[i].clone());
                walk(grid, i, xs, cases)?;
                xs.pop();
            }
        }
        Ok(())
    }
    walk(&grid, 0, &mut Vec::new(), &mut cases)?;
    Ok(format!("{cases} mass vectors"))
}

fn throughput_params() -> ThroughputParams {
    ThroughputParams::new(0.5, 4).unwrap()
}

fn independent_bound() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1008);
    let (mut checked, mut large) = (0, 0);
    for k in 0..100 {
        let inst = tiny_throughput(&mut rng, 3, 6, 10, 12);
        let sol = solve_config_lp(&inst, &throughput_params()).map_err(|e| e.to_string())?;
        for idx in 0..inst.len() {
            // Large requests carry an LP coverage variable; small ones are covered by their own columns.
            let z = sol.z.get(&idx).map_or_else(|| exact_coverage(&inst, &sol, idx), |&z| exact(z));
            let p = exact_satisfaction_probability(&inst, &sol, idx).map_err(|e| e.to_string())?;
            ensure!(beats_one_minus_inv_e(&p, &z), "instance {k} request {idx}: {p} vs z {z}");
            checked += 1;
            large += sol.z.contains_key(&idx) as usize;
        }
    }
    Ok(format!("{checked} requests, {large} large"))
}

fn random_dual(rng: &mut ChaCha8Rng, inst: &Instance, part: &IntervalPartition) -> DualSolution {
    let class = classify_requests(inst, part, &ThroughputParams::new(1.0, 2).unwrap()).unwrap();
    DualSolution {
        gamma: (0..part.len()).map(|_| rng.gen_range(0..12) as f64 / 2.0).collect(),
        delta: class.large().map(|i| (i, rng.gen_range(0..8) as f64 / 2.0)).collect(),
        xi: Default::default(),
        objective: 0.0,
    }
}

fn config_lp() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1009);
    let mut gap = f64::INFINITY;
    for k in 0..100 {
        let inst = tiny_throughput(&mut rng, 3, 5, 10, 5);
        let sol = solve_config_lp(&inst, &throughput_params()).map_err(|e| e.to_string())?;
        let opt = brute_throughput(&inst).map_err(|e| e.to_string())?.optimum;
        ensure!(sol.objective >= opt - 1e-6, "instance {k}: lp {} below optimum {opt}", sol.objective);
        gap = gap.min(sol.objective - opt);
    }
    // Intervals of at most four slots: the oracle against enumeration, under random duals and at termination.
    let p = ThroughputParams::new(1.0, 2).unwrap();
    let mut intervals = 0;
    for k in 0..60 {
        let inst = tiny_throughput(&mut rng, 3, 6, 10, 6);
        for first in 1..=4 {
            let part = build_partition(&inst, &p, first).map_err(|e| e.to_string())?;
            let sol = solve_config_lp_for(&inst, &p, &part).map_err(|e| e.to_string())?;
            let random = random_dual(&mut rng, &inst, &part);
            for dual in [&sol.dual, &random] {
                for i in 0..part.len() {
                    let best = exhaustive_best(&inst, &sol, dual, i);
                    match separation_oracle(&inst, &part, &sol.classification, dual, i) {
                        Some((v, pages)) => {
                            ensure!((v - best).abs() <= 1e-9, "instance {k} interval {i}: oracle {v} vs {best}");
                            ensure!((direct_value(&inst, &sol, dual, i, &pages) - v).abs() <= 1e-9, "instance {k}: column value");
                        }
                        None => ensure!(best <= dual.gamma[i] + 1e-9, "instance {k} interval {i}: missed {best}"),
                    }
                    intervals += 1;
                }
            }
        }
    }
    Ok(format!("100 LPs, min lp-opt gap {gap:.3}; {intervals} interval checks"))
}

fn relocation() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    for _ in 0..10_000 {
        check_case(&relocation_case(&mut rng));
    }
    Ok("10000 trials".into())
}

fn lp_fifo_demo() -> Result<String, String> {
    let mut ratios = Vec::new();
    for n in [12u32, 16, 20, 24] {
        let (inst, x) = lp_fifo_family(n).map_err(|e| e.to_string())?;
        let flow = evaluate_max_flow(&inst, &lp_guided_fifo(&inst, &x)).max_flow.ok_or("unserved")?;
        let bound = fractional_max_flow(&inst, &x).ok_or("fractional unserved")?;
        if n == 12 {
            ensure!((flow, bound) == (12, 7), "n=12: flow {flow}, bound {bound}");
        }
        let ratio = flow as f64 / bound as f64;
        ensure!(ratio >= 1.7, "n={n}: ratio {ratio}");
        ratios.push(format!("{n}:{ratio:.3}"));
    }
    Ok(format!("ratios {}", ratios.join(" ")))
}

fn throughput_ratio() -> Result<String, String> {
    let p = ThroughputParams::new(0.25, 16).unwrap();
    let profile = Profile::throughput(3, 60, 150, (2, 48), (1, 9));
    let mut rng = ChaCha8Rng::seed_from_u64(1012);
    let (mut got, mut lp, mut worst, mut fractional) = (0.0, 0.0, f64::INFINITY, 0);
    for seed in 0..50 {
        let inst = generate_instance(seed, &profile).map_err(|e| e.to_string())?;
        let sol = solve_config_lp(&inst, &p).map_err(|e| e.to_string())?;
        fractional += sol.columns.iter().any(|c| c.weight > 1e-9 && c.weight < 1.0 - 1e-9) as usize;
        let r = better_of_two(&inst, &sol, &p, 200, &mut rng).map_err(|e| e.to_string())?;
        let mean = r.mean_independent.max(r.mean_alpha);
        got += mean;
        lp += sol.objective;
        if sol.objective > 0.0 {
            worst = worst.min(mean / sol.objective);
        }
    }
    let ratio = got / lp;
    let note = if ratio >= 0.75 { "meets 0.75" } else { "below 0.75" };
    ensure!(ratio >= 0.70, "ratio {ratio:.4} below 0.70");
    Ok(format!("ratio {ratio:.4} ({note}), worst instance {worst:.4}, {fractional} fractional LPs"))
}

fn main() -> ExitCode {
    let checks: [(&str, Check); 12] = [
        ("dp-exactness", dp_exactness),
        ("fifo-bound", fifo_bound),
        ("small-bound-pipeline", small_bound_pipeline),
        ("group-structure", group_structure),
        ("tentative-completeness", tentative_completeness),
        ("derandomization", derandomization),
        ("contention-resolution", contention),
        ("independent-rounding", independent_bound),
        ("configuration-lp", config_lp),
        ("relocation", relocation),
        ("lp-guided-fifo", lp_fifo_demo),
        ("throughput-ratio", throughput_ratio),
    ];
    let limits = [60, 5, 120, 10, 60, 300, 10, 60, 300, 60, 1, 600];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (k, ((name, check), limit)) in checks.iter().zip(limits).enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panic: {}", msg.unwrap_or_default()))
        });
        let took = start.elapsed();
        let slow = took > Duration::from_secs(limit);
        let status = if result.is_ok() { "PASS" } else { "FAIL" };
        let detail = result.unwrap_or_else(|e| e);
        let timing = if slow { format!("{took:.2?}, over {limit}s") } else { format!("{took:.2?}") };
        println!("{status} {:>2} {name}: {detail} [{timing}]", k + 1);
        if status == "FAIL" {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
