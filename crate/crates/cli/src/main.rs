use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bsched::baselines::{lp_fifo_family, lp_guided_fifo};
use bsched::dispatch::{solve_maxflow, SolveOptions};
use bsched::generate::{generate_instance, Profile};
use bsched::io::{format_config_solution, format_instance, read_instance, trial_line};
use bsched::maxflow_lp::randomized_maxflow_round;
use bsched::metrics::{evaluate_max_flow, fractional_max_flow};
use bsched::oracles::{brute_maxflow_limited, brute_throughput_limited};
use bsched::params::ThroughputParams;
use bsched::throughput_lp::solve_config_lp;
use bsched::throughput_rounding::better_of_two;
use bsched::{Error, Instance, Schedule, Time};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// States the CLI lets an oracle explore before reporting "-".
const CLI_ORACLE_LIMIT: u64 = 2_000_000;

#[derive(Parser, Debug)]
#[command(name = "bsched", version, about = "Broadcast scheduling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a generated instance.
    Generate {
        #[arg(long = "gen", value_name = "PROFILE")]
        profile: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimise the maximum flow time.
    SolveMaxflow {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 1.0 / 3.0)]
        eps: f64,
        /// Run the LP rounding at exactly this bound instead of searching.
        #[arg(long = "L")]
        bound: Option<Time>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Skip the dynamic program's memory guard.
        #[arg(long)]
        force: bool,
        /// Write the schedule as `time page` lines.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Maximise weighted throughput with the configuration LP and both roundings.
    SolveThroughput {
        #[command(flatten)]
        source: Source,
        /// Must be 1/k.
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[command(flatten)]
        throughput: ThroughputArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the LP columns and per-trial profits.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact optimum by exhaustive search.
    Oracle {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum, default_value_t = Objective::Maxflow)]
        objective: Objective,
    },
    /// Sweep a generated corpus and tabulate ratios.
    Bench {
        #[arg(long, value_enum, default_value_t = Objective::Maxflow)]
        objective: Objective,
        #[arg(long = "gen", value_name = "PROFILE")]
        profile: Option<String>,
        #[arg(long, default_value_t = 20)]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to 1/3 for max flow and 1/2 for throughput.
        #[arg(long)]
        eps: Option<f64>,
        #[command(flatten)]
        throughput: ThroughputArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// LP-guided FIFO on the family where it is twice the fractional bound.
    DemoLpFifo {
        #[arg(long, default_value_t = 12)]
        n: u32,
    },
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct Source {
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long = "gen", value_name = "PROFILE")]
    profile: Option<String>,
}

#[derive(Args, Debug)]
struct ThroughputArgs {
    /// Large-window threshold; defaults to 1/eps^3.
    #[arg(long = "H")]
    h: Option<i64>,
    #[arg(long, default_value_t = 50)]
    trials: usize,
}

impl ThroughputArgs {
    fn params(&self, eps: f64) -> bsched::Result<ThroughputParams> {
        match self.h {
            Some(h) => ThroughputParams::new(eps, h),
            None => ThroughputParams::default_h(eps),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Objective {
    Maxflow,
    Throughput,
}

fn load(source: &Source, seed: u64) -> bsched::Result<(String, Instance)> {
    match (&source.instance, &source.profile) {
        (Some(path), _) => {
            let name = path.file_stem().map_or("instance".into(), |s| s.to_string_lossy().into_owned());
            Ok((name, read_instance(path)?))
        }
        (None, Some(profile)) => Ok((format!("gen-{seed}"), generate_instance(seed, &profile.parse()?)?)),
        (None, None) => Err(Error::InvalidArgument("need --instance or --gen".into())),
    }
}

fn emit(out: Option<&Path>, text: &str) -> bsched::Result<()> {
    match out {
        Some(path) => Ok(fs::write(path, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn schedule_text(schedule: &Schedule) -> String {
    schedule.iter().map(|(t, p)| format!("{t} {p}\n")).collect()
}

fn opt_cell(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{v}"))
}

fn ratio_cell(num: f64, den: Option<f64>) -> String {
    match den {
        Some(d) if d > 0.0 => format!("{:.4}", num / d),
        _ => "-".into(),
    }
}

/// Exhaustive optimum, or `None` when the instance is past the oracle's limit.
fn oracle_value(instance: &Instance, objective: Objective) -> bsched::Result<Option<f64>> {
    let result = match objective {
        Objective::Maxflow => brute_maxflow_limited(instance, CLI_ORACLE_LIMIT),
        Objective::Throughput => brute_throughput_limited(instance, CLI_ORACLE_LIMIT),
    };
    match result {
        Ok(r) => Ok(Some(r.optimum)),
        Err(Error::TooLarge(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

const MAXFLOW_HEADER: &str = "instance\trequests\tpath\tbound\tmax_flow\toracle\tratio\n";

fn maxflow_row(
    name: &str,
    instance: &Instance,
    eps: f64,
    bound: Option<Time>,
    seed: u64,
    force: bool,
) -> bsched::Result<(String, Schedule)> {
    let (path, found, schedule) = match bound {
        Some(l) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = randomized_maxflow_round(instance, l, eps, &mut rng)?;
            let path = if r.derandomized { "lp-derand" } else { "lp-random" };
            (path.to_string(), l, r.schedule)
        }
        None => {
            let opts = SolveOptions {
                force,
                seed,
                ..SolveOptions::new(eps)
            };
            let s = solve_maxflow(instance, &opts)?;
            (s.path.to_string(), s.bound, s.schedule)
        }
    };
    let flow = evaluate_max_flow(instance, &schedule).max_flow.unwrap_or(0);
    let oracle = oracle_value(instance, Objective::Maxflow)?;
    let row = format!(
        "{name}\t{}\t{path}\t{found}\t{flow}\t{}\t{}\n",
        instance.len(),
        opt_cell(oracle),
        ratio_cell(flow as f64, oracle)
    );
    Ok((row, schedule))
}

const THROUGHPUT_HEADER: &str =
    "instance\trequests\tlp_bound\tbest_profit\tbest_scheme\tmean_independent\tmean_alpha\tratio\n";

fn throughput_row(
    name: &str,
    instance: &Instance,
    params: &ThroughputParams,
    trials: usize,
    seed: u64,
) -> bsched::Result<(String, String)> {
    let sol = solve_config_lp(instance, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = better_of_two(instance, &sol, params, trials, &mut rng)?;
    let row = format!(
        "{name}\t{}\t{:.6}\t{}\t{}\t{:.6}\t{:.6}\t{}\n",
        instance.len(),
        sol.objective,
        r.best.profit,
        r.best.scheme.to_string(),
        r.mean_independent,
        r.mean_alpha,
        ratio_cell(r.mean_independent.max(r.mean_alpha), Some(sol.objective))
    );
    let mut dump = format_config_solution(instance, &sol);
    for (i, p) in r.profits_independent.iter().enumerate() {
        writeln!(dump, "{}", trial_line("independent", i as u64, *p)).unwrap();
    }
    for (i, p) in r.profits_alpha.iter().enumerate() {
        writeln!(dump, "{}", trial_line("alpha", i as u64, *p)).unwrap();
    }
    Ok((row, dump))
}

fn run(cli: Cli) -> bsched::Result<()> {
    match cli.command {
        Command::Generate { profile, seed, out } => {
            let instance = generate_instance(seed, &profile.parse()?)?;
            emit(out.as_deref(), &format_instance(&instance))
        }
        Command::SolveMaxflow {
            source,
            eps,
            bound,
            seed,
            force,
            out,
        } => {
            let (name, instance) = load(&source, seed)?;
            let (row, schedule) = maxflow_row(&name, &instance, eps, bound, seed, force)?;
            print!("{MAXFLOW_HEADER}{row}");
            match out {
                Some(path) => Ok(fs::write(path, schedule_text(&schedule))?),
                None => Ok(()),
            }
        }
        Command::SolveThroughput {
            source,
            eps,
            throughput,
            seed,
            out,
        } => {
            let (name, instance) = load(&source, seed)?;
            let params = throughput.params(eps)?;
            let (row, dump) = throughput_row(&name, &instance, &params, throughput.trials, seed)?;
            print!("{THROUGHPUT_HEADER}{row}");
            match out {
                Some(path) => Ok(fs::write(path, dump)?),
                None => Ok(()),
            }
        }
        Command::Oracle { source, objective } => {
            let (name, instance) = load(&source, 0)?;
            let r = match objective {
                Objective::Maxflow => brute_maxflow_limited(&instance, CLI_ORACLE_LIMIT)?,
                Objective::Throughput => brute_throughput_limited(&instance, CLI_ORACLE_LIMIT)?,
            };
            println!("instance\tobjective\toptimum\texplored");
            println!("{name}\t{}\t{}\t{}", format!("{objective:?}").to_lowercase(), r.optimum, r.explored);
            Ok(())
        }
        Command::Bench {
            objective,
            profile,
            count,
            seed,
            eps,
            throughput,
            out,
        } => {
            let profile: Profile = match (profile, objective) {
                (Some(p), _) => p.parse()?,
                (None, Objective::Maxflow) => Profile::flow(4, 8, 6),
                (None, Objective::Throughput) => Profile::throughput(3, 8, 12, (1, 8), (1, 9)),
            };
            let mut report = String::from(match objective {
                Objective::Maxflow => MAXFLOW_HEADER,
                Objective::Throughput => THROUGHPUT_HEADER,
            });
            let (eps, params) = match objective {
                Objective::Maxflow => (eps.unwrap_or(1.0 / 3.0), None),
                Objective::Throughput => {
                    let eps = eps.unwrap_or(0.5);
                    (eps, Some(throughput.params(eps)?))
                }
            };
            for i in 0..count {
                let s = seed.wrapping_add(i);
                let instance = generate_instance(s, &profile)?;
                let name = format!("gen-{s}");
                let row = match &params {
                    None => maxflow_row(&name, &instance, eps, None, s, false)?.0,
                    Some(p) => throughput_row(&name, &instance, p, throughput.trials, s)?.0,
                };
                report.push_str(&row);
            }
            emit(out.as_deref(), &report)
        }
        Command::DemoLpFifo { n } => {
            let (instance, x) = lp_fifo_family(n)?;
            let flow = evaluate_max_flow(&instance, &lp_guided_fifo(&instance, &x))
                .max_flow
                .ok_or_else(|| Error::Internal("LP-guided FIFO left a request unserved".into()))?;
            let bound = fractional_max_flow(&instance, &x)
                .ok_or_else(|| Error::Internal("fractional schedule leaves a request uncovered".into()))?;
            println!("n\tlp_fifo_max_flow\tfractional_max_flow\tratio");
            println!("{n}\t{flow}\t{bound}\t{:.4}", flow as f64 / bound as f64);
            Ok(())
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidInstance(_) | Error::InvalidArgument(_) | Error::Parse { .. } | Error::Io(_) => 1,
        Error::Infeasible | Error::Regime(_) | Error::TooLarge(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
