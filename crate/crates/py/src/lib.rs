//! Python bindings: instances, the max-flow solver, the throughput LP with both roundings, and the oracles.

use bsched::baselines::{fifo_schedule as fifo, lp_fifo_family, lp_guided_fifo};
use bsched::dispatch::{solve_maxflow as dispatch_maxflow, SolveOptions};
use bsched::generate::generate_instance;
use bsched::io::{format_instance, parse_instance};
use bsched::metrics;
use bsched::oracles;
use bsched::params::ThroughputParams;
use bsched::throughput_lp::solve_config_lp;
use bsched::throughput_rounding::better_of_two;
use bsched::{Error, Request, Schedule, Time};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

create_exception!(bsched_py, BschedError, PyException);
create_exception!(bsched_py, InfeasibleError, BschedError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidInstance(_) | Error::InvalidArgument(_) | Error::Parse { .. } => PyValueError::new_err(e.to_string()),
        Error::Infeasible | Error::Regime(_) => InfeasibleError::new_err(e.to_string()),
        _ => BschedError::new_err(e.to_string()),
    }
}

fn pairs(s: &Schedule) -> Vec<(Time, u32)> {
    s.iter().collect()
}

fn schedule_from(pairs: Vec<(Time, u32)>) -> PyResult<Schedule> {
    Schedule::from_pairs(pairs).map_err(to_py)
}

/// A broadcast instance. Requests are `(release, page)` for max flow or
/// `(release, page, deadline, weight)` for throughput.
#[pyclass(name = "Instance", module = "bsched_py", frozen)]
struct PyInstance {
    inner: bsched::Instance,
}

#[pymethods]
impl PyInstance {
    #[new]
    fn new(num_pages: u32, requests: Vec<Bound<'_, PyAny>>) -> PyResult<Self> {
        let mut reqs = Vec::with_capacity(requests.len());
        for (i, item) in requests.iter().enumerate() {
            let id = i as u64;
            let r = if let Ok((r, p)) = item.extract::<(Time, u32)>() {
                Request::flow(id, r, p)
            } else {
                let (r, p, d, w) = item.extract::<(Time, u32, Time, f64)>()?;
                Request::windowed(id, r, p, d, w)
            };
            reqs.push(r);
        }
        let inner = bsched::Instance::new(num_pages, reqs).map_err(to_py)?;
        Ok(PyInstance { inner })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PyInstance { inner: parse_instance(text).map_err(to_py)? })
    }

    /// Seeded instance from a profile string such as `n=4,m=8,span=8`.
    #[staticmethod]
    fn generate(profile: &str, seed: u64) -> PyResult<Self> {
        let profile = profile.parse().map_err(to_py)?;
        Ok(PyInstance { inner: generate_instance(seed, &profile).map_err(to_py)? })
    }

    fn to_text(&self) -> String {
        format_instance(&self.inner)
    }

    #[getter]
    fn num_pages(&self) -> u32 {
        self.inner.num_pages()
    }

    #[getter]
    fn horizon(&self) -> Time {
        self.inner.horizon()
    }

    #[getter]
    fn is_throughput(&self) -> bool {
        self.inner.is_throughput()
    }

    fn requests(&self) -> Vec<(Time, u32, Option<Time>, Option<f64>)> {
        self.inner.requests().iter().map(|r| (r.release, r.page, r.deadline, r.weight)).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Instance(pages={}, requests={}, horizon={})", self.inner.num_pages(), self.inner.len(), self.inner.horizon())
    }
}

/// Maximum flow time of a schedule given as `(time, page)` pairs, or None if a request is never served.
#[pyfunction]
fn max_flow(instance: &PyInstance, schedule: Vec<(Time, u32)>) -> PyResult<Option<Time>> {
    Ok(metrics::evaluate_max_flow(&instance.inner, &schedule_from(schedule)?).max_flow)
}

#[pyfunction]
fn profit(instance: &PyInstance, schedule: Vec<(Time, u32)>) -> PyResult<f64> {
    Ok(metrics::evaluate_throughput(&instance.inner, &schedule_from(schedule)?).map_err(to_py)?.profit)
}

#[pyfunction]
fn fifo_schedule(instance: &PyInstance) -> Vec<(Time, u32)> {
    pairs(&fifo(&instance.inner))
}

#[pyfunction]
#[pyo3(signature = (instance, eps = 1.0 / 3.0, seed = 0, force = false))]
fn solve_maxflow<'py>(py: Python<'py>, instance: &PyInstance, eps: f64, seed: u64, force: bool) -> PyResult<Bound<'py, PyDict>> {
    let opts = SolveOptions { force, seed, ..SolveOptions::new(eps) };
    let s = py.detach(|| dispatch_maxflow(&instance.inner, &opts)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("schedule", pairs(&s.schedule))?;
    d.set_item("bound", s.bound)?;
    d.set_item("max_flow", s.max_flow)?;
    d.set_item("path", s.path.to_string())?;
    Ok(d)
}

/// Configuration LP plus `trials` runs of each rounding; `h` defaults to `1/eps^3`.
#[pyfunction]
#[pyo3(signature = (instance, eps = 0.5, h = None, trials = 50, seed = 0))]
fn solve_throughput<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    eps: f64,
    h: Option<i64>,
    trials: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let params = match h {
        Some(h) => ThroughputParams::new(eps, h),
        None => ThroughputParams::default_h(eps),
    }
    .map_err(to_py)?;
    let inst = &instance.inner;
    let (sol, r) = py
        .detach(|| {
            let sol = solve_config_lp(inst, &params)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = better_of_two(inst, &sol, &params, trials, &mut rng)?;
            Ok::<_, Error>((sol, r))
        })
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("lp_objective", sol.objective)?;
    d.set_item("columns", sol.columns.len())?;
    d.set_item("schedule", pairs(&r.best.schedule))?;
    d.set_item("profit", r.best.profit)?;
    d.set_item("scheme", r.best.scheme.to_string())?;
    d.set_item("mean_independent", r.mean_independent)?;
    d.set_item("mean_alpha", r.mean_alpha)?;
    Ok(d)
}

/// Exhaustive optimum and a witness schedule.
#[pyfunction]
fn brute_maxflow(py: Python<'_>, instance: &PyInstance) -> PyResult<(Time, Vec<(Time, u32)>)> {
    let r = py.detach(|| oracles::brute_maxflow(&instance.inner)).map_err(to_py)?;
    Ok((r.optimum as Time, pairs(&r.witness)))
}

#[pyfunction]
fn brute_throughput(py: Python<'_>, instance: &PyInstance) -> PyResult<(f64, Vec<(Time, u32)>)> {
    let r = py.detach(|| oracles::brute_throughput(&instance.inner)).map_err(to_py)?;
    Ok((r.optimum, pairs(&r.witness)))
}

/// LP-guided FIFO max flow and the fractional bound on the `n`-request family.
#[pyfunction]
fn demo_lp_fifo(n: u32) -> PyResult<(Time, Time)> {
    let (inst, x) = lp_fifo_family(n).map_err(to_py)?;
    let flow = metrics::evaluate_max_flow(&inst, &lp_guided_fifo(&inst, &x)).max_flow;
    let bound = metrics::fractional_max_flow(&inst, &x);
    match (flow, bound) {
        (Some(f), Some(b)) => Ok((f, b)),
        _ => Err(BschedError::new_err("family left a request unserved")),
    }
}

#[pymodule]
fn bsched_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_function(wrap_pyfunction!(max_flow, m)?)?;
    m.add_function(wrap_pyfunction!(profit, m)?)?;
    m.add_function(wrap_pyfunction!(fifo_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(solve_maxflow, m)?)?;
    m.add_function(wrap_pyfunction!(solve_throughput, m)?)?;
    m.add_function(wrap_pyfunction!(brute_maxflow, m)?)?;
    m.add_function(wrap_pyfunction!(brute_throughput, m)?)?;
    m.add_function(wrap_pyfunction!(demo_lp_fifo, m)?)?;
    m.add("BschedError", m.py().get_type::<BschedError>())?;
    m.add("InfeasibleError", m.py().get_type::<InfeasibleError>())?;
    Ok(())
}
