//! Python bindings for the supply planning library.

// pyo3 0.22 macros trip this lint on every `PyResult` return.
#![allow(clippy::useless_conversion)]

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use supplyplan::formulations::{self, Strategy};
use supplyplan::framework::{self, parse_columns, CompareConfig};
use supplyplan::generate::{generate as gen_instance, GenConfig};
use supplyplan::solver::SolverConfig;
use supplyplan::supply;
use supplyplan::uncertainty::{self, estimate_box, EllipseParams, ScenarioSet};

fn err(e: supplyplan::Error) -> PyErr {
    match e {
        supplyplan::Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(frozen)]
#[derive(Clone)]
struct Instance(supply::Instance);

#[pymethods]
impl Instance {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        supply::Instance::from_json_str(text).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        supply::Instance::load(path).map(Self).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json_string().map_err(err)
    }

    #[getter]
    fn num_arcs(&self) -> usize {
        self.0.num_arcs()
    }

    #[getter]
    fn destination_ids(&self) -> Vec<String> {
        self.0.destination_ids()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.0.warnings().to_vec()
    }

    /// `f1(x) + f2(x, y, z; b)`.
    fn total_cost(&self, x: Vec<f64>, y: Vec<f64>, z: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
        supply::total_cost(&self.0, &x, &y, &z, &b).map_err(err)
    }
}

#[pyclass(frozen)]
#[derive(Clone)]
struct Scenarios(ScenarioSet);

#[pymethods]
impl Scenarios {
    /// Equiprobable scenarios from row-major demand and cost matrices.
    #[new]
    fn new(demands: Vec<Vec<f64>>, costs: Vec<Vec<f64>>) -> PyResult<Self> {
        ScenarioSet::equiprobable(demands, costs).map(Self).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (instance, demand_csv, cost_csv=None, sigma=0.0, seed=1))]
    fn load(instance: &Instance, demand_csv: &str, cost_csv: Option<&str>, sigma: f64, seed: u64) -> PyResult<Self> {
        uncertainty::load_scenarios(&instance.0, demand_csv, cost_csv.map(std::path::Path::new), sigma, seed)
            .map(Self)
            .map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn demands(&self) -> Vec<Vec<f64>> {
        self.0.demands.clone()
    }

    #[getter]
    fn costs(&self) -> Vec<Vec<f64>> {
        self.0.costs.clone()
    }

    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.0.probs.clone()
    }
}

#[pyclass(frozen, get_all)]
struct Solution {
    status: String,
    objective: f64,
    x: Vec<f64>,
    w: Option<f64>,
    /// Variable values keyed by structured name, e.g. `x[p1,k1,d1]`.
    values: BTreeMap<String, f64>,
}

#[pymethods]
impl Solution {
    fn __repr__(&self) -> String {
        format!("Solution(status={}, objective={})", self.status, self.objective)
    }
}

impl Solution {
    fn from(inst: &supply::Instance, s: formulations::Solved) -> Self {
        Self {
            status: s.status.to_string(),
            objective: s.objective,
            values: s.named_values(inst),
            x: s.x,
            w: s.w,
        }
    }
}

fn strategy(name: &str) -> PyResult<Strategy> {
    match name {
        "auto" => Ok(Strategy::Auto),
        "monolithic" => Ok(Strategy::Monolithic),
        "decomposed" => Ok(Strategy::Decomposed),
        other => Err(PyValueError::new_err(format!("unknown strategy `{other}`"))),
    }
}

fn prefix(scens: &ScenarioSet, tau: Option<usize>) -> PyResult<(usize, ScenarioSet)> {
    let tau = tau.unwrap_or(scens.len());
    Ok((tau, scens.prefix(tau).map_err(err)?))
}

#[pyfunction]
#[pyo3(signature = (instance, scenarios, relax=true, strategy="auto"))]
fn solve_sp(
    py: Python<'_>,
    instance: &Instance,
    scenarios: &Scenarios,
    relax: bool,
    strategy: &str,
) -> PyResult<Solution> {
    let st = self::strategy(strategy)?;
    let s = py
        .allow_threads(|| formulations::solve_sp(&instance.0, &scenarios.0, relax, st, &SolverConfig::default()))
        .map_err(err)?;
    Ok(Solution::from(&instance.0, s))
}

#[pyfunction]
#[pyo3(signature = (instance, scenarios, tau=None, relax=true))]
fn solve_ro_box(instance: &Instance, scenarios: &Scenarios, tau: Option<usize>, relax: bool) -> PyResult<Solution> {
    let (tau, _) = prefix(&scenarios.0, tau)?;
    let bp = estimate_box(&scenarios.0, tau).map_err(err)?;
    let s = formulations::solve_ro_box(&instance.0, &bp, relax, &SolverConfig::default()).map_err(err)?;
    Ok(Solution::from(&instance.0, s))
}

#[pyfunction]
#[pyo3(signature = (instance, scenarios, omega, tau=None))]
fn solve_ro_ell(instance: &Instance, scenarios: &Scenarios, omega: f64, tau: Option<usize>) -> PyResult<Solution> {
    let (tau, _) = prefix(&scenarios.0, tau)?;
    let bp = estimate_box(&scenarios.0, tau).map_err(err)?;
    let ell = EllipseParams {
        omega,
        b_dev: bp.b_dev.clone(),
    };
    let s = formulations::solve_ro_ell(&instance.0, &bp, &ell, &SolverConfig::default()).map_err(err)?;
    Ok(Solution::from(&instance.0, s))
}

#[pyfunction]
#[pyo3(signature = (instance, scenarios, omega, tau=None, strategy="auto"))]
fn solve_trsocp(
    py: Python<'_>,
    instance: &Instance,
    scenarios: &Scenarios,
    omega: f64,
    tau: Option<usize>,
    strategy: &str,
) -> PyResult<Solution> {
    let st = self::strategy(strategy)?;
    let (tau, pre) = prefix(&scenarios.0, tau)?;
    let bp = estimate_box(&scenarios.0, tau).map_err(err)?;
    let s = py
        .allow_threads(|| formulations::solve_trsocp(&instance.0, &pre, &bp, omega, st, &SolverConfig::default()))
        .map_err(err)?;
    Ok(Solution::from(&instance.0, s))
}

#[pyfunction]
#[pyo3(signature = (instance, demand, cost, relax=true))]
fn solve_ws(instance: &Instance, demand: Vec<f64>, cost: Vec<f64>, relax: bool) -> PyResult<Solution> {
    let s = formulations::solve_ws(&instance.0, &demand, &cost, relax, &SolverConfig::default()).map_err(err)?;
    Ok(Solution::from(&instance.0, s))
}

/// Returns `(sp, expected_ws, evpi)`.
#[pyfunction]
#[pyo3(signature = (instance, scenarios, relax=true))]
fn evpi(py: Python<'_>, instance: &Instance, scenarios: &Scenarios, relax: bool) -> PyResult<(f64, f64, f64)> {
    let e = py
        .allow_threads(|| {
            framework::evpi_for(
                &instance.0,
                &scenarios.0,
                relax,
                Strategy::Auto,
                &SolverConfig::default(),
            )
        })
        .map_err(err)?;
    Ok((e.sp, e.expected_ws, e.evpi))
}

#[pyfunction]
fn compute_evpi(sp: f64, ws: Vec<f64>, probs: Vec<f64>) -> PyResult<f64> {
    framework::compute_evpi(sp, &ws, &probs).map_err(err)
}

#[pyfunction]
fn omega_for_epsilon(epsilon: f64) -> PyResult<f64> {
    uncertainty::omega_for_epsilon(epsilon).map_err(err)
}

/// Rolling comparison; returns the report CSV text.
#[pyfunction]
#[pyo3(signature = (instance, scenarios, sbar, methods="m1,m2,m3,m4,m5,ws", omega=2.75, relax=true))]
fn compare(
    py: Python<'_>,
    instance: &Instance,
    scenarios: &Scenarios,
    sbar: usize,
    methods: &str,
    omega: f64,
    relax: bool,
) -> PyResult<String> {
    let cfg = CompareConfig {
        columns: parse_columns(methods).map_err(err)?,
        omega,
        relax,
        ..CompareConfig::default()
    };
    py.allow_threads(|| framework::run_comparison(&instance.0, &scenarios.0, sbar, &cfg)?.to_csv_string())
        .map_err(err)
}

/// Seeded synthetic instance with its scenarios.
#[pyfunction]
#[pyo3(signature = (suppliers=24, destinations=15, scenarios=48, sigma=0.2, seed=1))]
fn generate(
    suppliers: usize,
    destinations: usize,
    scenarios: usize,
    sigma: f64,
    seed: u64,
) -> PyResult<(Instance, Scenarios)> {
    let g = gen_instance(&GenConfig {
        suppliers,
        destinations,
        scenarios,
        sigma,
        seed,
        ..GenConfig::default()
    })
    .map_err(err)?;
    let scens = ScenarioSet::equiprobable(g.demands, g.costs).map_err(err)?;
    Ok((Instance(g.instance), Scenarios(scens)))
}

#[pymodule]
fn supplyplan_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Instance>()?;
    m.add_class::<Scenarios>()?;
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(solve_sp, m)?)?;
    m.add_function(wrap_pyfunction!(solve_ro_box, m)?)?;
    m.add_function(wrap_pyfunction!(solve_ro_ell, m)?)?;
    m.add_function(wrap_pyfunction!(solve_trsocp, m)?)?;
    m.add_function(wrap_pyfunction!(solve_ws, m)?)?;
    m.add_function(wrap_pyfunction!(evpi, m)?)?;
    m.add_function(wrap_pyfunction!(compute_evpi, m)?)?;
    m.add_function(wrap_pyfunction!(omega_for_epsilon, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    Ok(())
}
