use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::formulations::{solve_sp, solve_ws, Strategy};
use crate::rng::{tag, Stream};
use crate::solver::{SolverConfig, Status};
use crate::supply::Instance;
use crate::uncertainty::{sample_box, sample_costs, sample_costs_tagged, sample_demands_mc, ScenarioSet};

use super::report::format_cost;
use super::{evaluate_method, evaluate_ws, Cell, Column, CompareConfig, Plans};

/// `SP − Σ_s P^s WS_s`.
pub fn compute_evpi(sp_value: f64, ws_values: &[f64], probs: &[f64]) -> Result<f64> {
    if ws_values.len() != probs.len() {
        return Err(Error::Parameter(format!(
            "{} wait-and-see values for {} probabilities",
            ws_values.len(),
            probs.len()
        )));
    }
    let total: f64 = probs.iter().sum();
    if probs.iter().any(|p| *p < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::Parameter(format!(
            "probabilities must be nonnegative and sum to 1, got {total}"
        )));
    }
    Ok(sp_value - ws_values.iter().zip(probs).map(|(w, p)| w * p).sum::<f64>())
}

#[derive(Debug, Clone, Serialize)]
pub struct Evpi {
    pub sp: f64,
    pub ws: Vec<f64>,
    pub expected_ws: f64,
    pub evpi: f64,
}

/// Solves the stochastic program and every wait-and-see problem with the same
/// integrality setting.
pub fn evpi_for(
    inst: &Instance,
    scens: &ScenarioSet,
    relax: bool,
    strategy: Strategy,
    cfg: &SolverConfig,
) -> Result<Evpi> {
    let sp = solve_sp(inst, scens, relax, strategy, cfg)?;
    if sp.status != Status::Optimal {
        return Err(Error::Parameter(format!(
            "stochastic program ended with status {}",
            sp.status
        )));
    }
    let ws: Vec<f64> = (0..scens.len())
        .into_par_iter()
        .map(|s| {
            let r = solve_ws(inst, &scens.demands[s], &scens.costs[s], relax, cfg)?;
            Ok(if r.status == Status::Optimal {
                r.objective
            } else {
                f64::INFINITY
            })
        })
        .collect::<Result<_>>()?;
    let expected_ws = ws.iter().zip(&scens.probs).map(|(w, p)| w * p).sum();
    let evpi = compute_evpi(sp.objective, &ws, &scens.probs)?;
    Ok(Evpi {
        sp: sp.objective,
        ws,
        expected_ws,
        evpi,
    })
}

/// Per-destination demand range for synthetic scenarios.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemandRange {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DemandRange {
    /// Smallest and largest historical value per destination.
    pub fn from_scenarios(scens: &ScenarioSet) -> Self {
        let d = scens.num_destinations();
        let col = |j: usize| scens.demands.iter().map(move |r| r[j]);
        Self {
            lo: (0..d).map(|j| col(j).fold(f64::INFINITY, f64::min)).collect(),
            hi: (0..d).map(|j| col(j).fold(f64::NEG_INFINITY, f64::max)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityPoint {
    pub s: usize,
    pub value: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityCurve {
    pub points: Vec<StabilityPoint>,
}

impl StabilityCurve {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "s,sp,seed")?;
        for p in &self.points {
            writeln!(w, "{},{},{}", p.s, format_cost(p.value), p.seed)?;
        }
        Ok(())
    }
}

/// SP optimum for growing numbers of sampled scenarios. Each size uses the
/// leading rows of one sample, so larger sets extend smaller ones.
#[allow(clippy::too_many_arguments)]
pub fn in_sample_stability(
    inst: &Instance,
    range: &DemandRange,
    sigma: f64,
    s_list: &[usize],
    seed: u64,
    relax: bool,
    strategy: Strategy,
    cfg: &SolverConfig,
) -> Result<StabilityCurve> {
    inst.check_dest("demand range", &range.lo)?;
    inst.check_dest("demand range", &range.hi)?;
    if s_list.is_empty() || s_list[0] == 0 || s_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parameter(
            "scenario counts must be positive and strictly increasing".into(),
        ));
    }
    let max = *s_list.last().expect("nonempty");
    let demands = sample_box(&range.lo, &range.hi, max, &mut Stream::tagged(seed, tag::STABILITY));
    let costs = sample_costs(&inst.b_bar(), sigma, max, seed)?;
    let points = s_list
        .par_iter()
        .map(|&s| {
            let scens = ScenarioSet::equiprobable(demands[..s].to_vec(), costs[..s].to_vec())?;
            let sol = solve_sp(inst, &scens, relax, strategy, cfg)?;
            let value = if sol.status == Status::Optimal {
                sol.objective
            } else {
                f64::INFINITY
            };
            Ok(StabilityPoint { s, value, seed })
        })
        .collect::<Result<_>>()?;
    Ok(StabilityCurve { points })
}

#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloReport {
    pub columns: Vec<Column>,
    pub draws: Vec<BTreeMap<Column, f64>>,
}

impl MonteCarloReport {
    pub fn total(&self, c: Column) -> Option<f64> {
        self.columns
            .contains(&c)
            .then(|| self.draws.iter().map(|d| d[&c]).sum())
    }

    pub fn mean(&self, c: Column) -> Option<f64> {
        if self.draws.is_empty() {
            return None;
        }
        self.total(c).map(|t| t / self.draws.len() as f64)
    }

    /// Draws whose cost is infinite.
    pub fn infinite_count(&self, c: Column) -> usize {
        self.draws
            .iter()
            .filter(|d| d.get(&c).is_some_and(|v| v.is_infinite()))
            .count()
    }

    /// One row per draw, then `aggregate` and `mean` rows; header only when
    /// there are no draws.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "draw,m1,m2,m3,m4,m5,ws")?;
        let line = |label: String, f: &dyn Fn(Column) -> Option<f64>| {
            let mut fields = vec![label];
            fields.extend(Column::ALL.iter().map(|&c| f(c).map(format_cost).unwrap_or_default()));
            fields.join(",")
        };
        for (i, d) in self.draws.iter().enumerate() {
            writeln!(w, "{}", line((i + 1).to_string(), &|c| d.get(&c).copied()))?;
        }
        if !self.draws.is_empty() {
            writeln!(w, "{}", line("aggregate".into(), &|c| self.total(c)))?;
            writeln!(w, "{}", line("mean".into(), &|c| self.mean(c)))?;
        }
        Ok(())
    }
}

fn evaluate_columns(
    inst: &Instance,
    plans: &Plans,
    d: &[f64],
    b: &[f64],
    cfg: &CompareConfig,
) -> Result<BTreeMap<Column, Cell>> {
    cfg.columns
        .iter()
        .map(|&c| {
            let cell = match c {
                Column::Method(m) => evaluate_method(inst, plans, m, d, b, cfg)?,
                Column::Ws => evaluate_ws(inst, d, b, cfg)?,
            };
            Ok((c, cell))
        })
        .collect()
}

/// Realized costs of fixed plans over `n` random draws: demand uniform on
/// `d̄(1 ± γ)`, cost uniform on `b̄(1 ± σ)`.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_validation(
    inst: &Instance,
    plans: &Plans,
    d_bar: &[f64],
    gamma: &[f64],
    b_bar: &[f64],
    sigma: f64,
    n: usize,
    seed: u64,
    cfg: &CompareConfig,
) -> Result<MonteCarloReport> {
    inst.check_dest("nominal demand", d_bar)?;
    inst.check_dest("nominal cost", b_bar)?;
    let demands = sample_demands_mc(d_bar, gamma, n, seed)?;
    let costs = sample_costs_tagged(b_bar, sigma, n, seed, tag::MONTE_CARLO_COST)?;
    let draws = demands
        .par_iter()
        .zip(costs.par_iter())
        .map(|(d, b)| {
            Ok(evaluate_columns(inst, plans, d, b, cfg)?
                .into_iter()
                .map(|(c, cell)| (c, cell.cost))
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(MonteCarloReport {
        columns: cfg.columns.clone(),
        draws,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StressReport {
    pub demand: Vec<f64>,
    pub cost: Vec<f64>,
    pub cells: BTreeMap<Column, Cell>,
}

impl StressReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "method,cost")?;
        for (c, cell) in &self.cells {
            writeln!(w, "{},{}", c, format_cost(cell.cost))?;
        }
        Ok(())
    }
}

/// Plans evaluated at the single extreme realization: demand `d̄(1 + γ)` and
/// cost `b̄(1 + σ)`.
pub fn stress_worst_case(
    inst: &Instance,
    plans: &Plans,
    d_bar: &[f64],
    gamma: &[f64],
    b_bar: &[f64],
    sigma: f64,
    cfg: &CompareConfig,
) -> Result<StressReport> {
    inst.check_dest("nominal demand", d_bar)?;
    inst.check_dest("spread", gamma)?;
    inst.check_dest("nominal cost", b_bar)?;
    let demand: Vec<f64> = d_bar.iter().zip(gamma).map(|(d, g)| d * (1.0 + g)).collect();
    let cost: Vec<f64> = b_bar.iter().map(|b| b * (1.0 + sigma)).collect();
    let cells = evaluate_columns(inst, plans, &demand, &cost, cfg)?;
    Ok(StressReport { demand, cost, cells })
}
