//! Rolling comparison of the planning methods.
//!
//! At step `τ` every method plans from the first `τ` scenarios only, then its
//! bookings face realization `τ + 1`. The wait-and-see column solves that
//! realization with full knowledge and floors every other column.

mod analysis;
mod report;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::formulations::{
    decompose::expected_recourse_cost, recover_adjustable_m5, solve_recourse, solve_ro_box, solve_ro_ell, solve_sp,
    solve_trsocp, solve_ws, BlockValues, MethodId, Solved, Strategy,
};
use crate::solver::{SolverConfig, Status};
use crate::supply::{total_cost, Instance};
use crate::uncertainty::{estimate_box, BoxParams, EllipseParams, ScenarioSet};

pub use analysis::{
    compute_evpi, evpi_for, in_sample_stability, monte_carlo_validation, stress_worst_case, DemandRange, Evpi,
    MonteCarloReport, StabilityCurve, StabilityPoint, StressReport,
};
pub use report::{format_cost, ComparisonReport, ComparisonRow};

/// A report column: one of the methods or the wait-and-see benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Column {
    Method(MethodId),
    Ws,
}

impl Column {
    pub const ALL: [Column; 6] = [
        Column::Method(MethodId::M1Sp),
        Column::Method(MethodId::M2RoBox),
        Column::Method(MethodId::M3RoEll),
        Column::Method(MethodId::M4TrSocp),
        Column::Method(MethodId::M5Arc),
        Column::Ws,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Column::Method(m) => m.column(),
            Column::Ws => "ws",
        }
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Column {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("ws") {
            Ok(Column::Ws)
        } else {
            s.parse().map(Column::Method)
        }
    }
}

/// Comma-separated column list such as `m1,m2,ws`.
pub fn parse_columns(list: &str) -> Result<Vec<Column>> {
    let mut cols: Vec<Column> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    cols.sort();
    cols.dedup();
    if cols.is_empty() {
        return Err(Error::Parameter("no methods selected".into()));
    }
    Ok(cols)
}

/// Where M2/M3 take their cost box from.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum CostBand {
    /// Mean and largest deviation of the scenario costs seen so far.
    #[default]
    Prefix,
    /// `b̄ ± σ b̄` from the instance.
    Sigma(f64),
}

#[derive(Debug, Clone)]
pub struct CompareConfig {
    pub columns: Vec<Column>,
    pub omega: f64,
    /// Continuous bookings for M1/M2 when true.
    pub relax: bool,
    pub cost_band: CostBand,
    pub strategy: Strategy,
    pub solver: SolverConfig,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            columns: Column::ALL.to_vec(),
            omega: 2.75,
            relax: true,
            cost_band: CostBand::Prefix,
            strategy: Strategy::Auto,
            solver: SolverConfig::default(),
        }
    }
}

impl CompareConfig {
    fn wants(&self, m: MethodId) -> bool {
        self.columns.contains(&Column::Method(m))
    }
}

/// How a cell ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outcome {
    Optimal,
    /// Finite cost from a plan whose solve stopped at a limit.
    Limited(Status),
    /// The bookings admit no recourse for the realization.
    Infeasible,
    /// The realization lies outside the scenario hull (adjustable rule only).
    OutsideHull,
    /// Planning failed; no bookings to evaluate.
    Failed(Status),
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Optimal => f.write_str("optimal"),
            Outcome::Limited(s) => write!(f, "limited:{s}"),
            Outcome::Infeasible => f.write_str("infeasible"),
            Outcome::OutsideHull => f.write_str("outside-hull"),
            Outcome::Failed(s) => write!(f, "failed:{s}"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Cell {
    pub cost: f64,
    pub outcome: Outcome,
    pub seconds: f64,
    /// Hull residual of the realization (adjustable rule only).
    pub phi: Option<f64>,
}

impl Cell {
    fn infinite(outcome: Outcome, seconds: f64) -> Self {
        Self {
            cost: f64::INFINITY,
            outcome,
            seconds,
            phi: None,
        }
    }
}

/// Bookings of one method at one step.
#[derive(Debug, Clone, Serialize)]
pub struct Plan {
    pub status: Status,
    pub x: Option<Vec<f64>>,
    pub seconds: f64,
}

impl Plan {
    fn from_solved(s: &Solved, seconds: f64) -> Self {
        let usable = matches!(
            s.status,
            Status::Optimal | Status::NodeLimit | Status::IterLimit | Status::CutLimit
        );
        Self {
            status: s.status,
            x: (usable && !s.x.is_empty()).then(|| s.x.clone()),
            seconds,
        }
    }
}

/// Scenario blocks of the hull robust solution, for the adjustable rule.
#[derive(Debug, Clone, Serialize)]
pub struct HullRule {
    pub hull: Vec<Vec<f64>>,
    pub blocks: Vec<BlockValues>,
    pub w: f64,
}

/// Everything the methods decide from the first `tau` scenarios.
#[derive(Debug, Clone, Serialize)]
pub struct Plans {
    pub tau: usize,
    pub plans: Vec<(MethodId, Plan)>,
    pub rule: Option<HullRule>,
    pub box_params: BoxParams,
}

impl Plans {
    pub fn get(&self, m: MethodId) -> Option<&Plan> {
        self.plans.iter().find(|(id, _)| *id == m).map(|(_, p)| p)
    }

    /// Bookings used when evaluating `m`; the adjustable rule books like M4.
    pub fn bookings(&self, m: MethodId) -> Option<&[f64]> {
        self.get(m).and_then(|p| p.x.as_deref())
    }
}

/// Demand box from the first `tau` scenarios with the chosen cost band.
pub fn box_for(inst: &Instance, scens: &ScenarioSet, tau: usize, band: CostBand) -> Result<BoxParams> {
    let bp = estimate_box(scens, tau)?;
    Ok(match band {
        CostBand::Prefix => bp,
        CostBand::Sigma(sigma) => bp.with_sigma_band(&inst.b_bar(), sigma),
    })
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed().as_secs_f64()))
}

/// Solves every requested method on the first `tau` scenarios.
pub fn plan_methods(inst: &Instance, scens: &ScenarioSet, tau: usize, cfg: &CompareConfig) -> Result<Plans> {
    let prefix = scens.prefix(tau)?;
    let bp = box_for(inst, scens, tau, cfg.cost_band)?;
    let needs_hull = cfg.wants(MethodId::M4TrSocp) || cfg.wants(MethodId::M5Arc);
    let jobs: Vec<MethodId> = [MethodId::M1Sp, MethodId::M2RoBox, MethodId::M3RoEll, MethodId::M4TrSocp]
        .into_iter()
        .filter(|&m| {
            if m == MethodId::M4TrSocp {
                needs_hull
            } else {
                cfg.wants(m)
            }
        })
        .collect();
    let solved: Vec<(MethodId, Solved, f64)> = jobs
        .par_iter()
        .map(|&m| {
            let (s, secs) = timed(|| match m {
                MethodId::M1Sp => solve_sp(inst, &prefix, cfg.relax, cfg.strategy, &cfg.solver),
                MethodId::M2RoBox => solve_ro_box(inst, &bp, cfg.relax, &cfg.solver),
                MethodId::M3RoEll => {
                    let ell = EllipseParams {
                        omega: cfg.omega,
                        b_dev: bp.b_dev.clone(),
                    };
                    solve_ro_ell(inst, &bp, &ell, &cfg.solver)
                }
                _ => solve_trsocp(inst, &prefix, &bp, cfg.omega, cfg.strategy, &cfg.solver),
            })?;
            Ok((m, s, secs))
        })
        .collect::<Result<_>>()?;

    let mut plans = Vec::new();
    let mut rule = None;
    for (m, s, secs) in &solved {
        if *m == MethodId::M4TrSocp {
            if cfg.wants(MethodId::M4TrSocp) {
                plans.push((MethodId::M4TrSocp, Plan::from_solved(s, *secs)));
            }
            if cfg.wants(MethodId::M5Arc) {
                plans.push((MethodId::M5Arc, Plan::from_solved(s, *secs)));
            }
            if s.has_point() && s.blocks.len() == tau {
                rule = Some(HullRule {
                    hull: prefix.demands.clone(),
                    blocks: s.blocks.clone(),
                    w: s.w.unwrap_or(s.objective),
                });
            }
        } else {
            plans.push((*m, Plan::from_solved(s, *secs)));
        }
    }
    plans.sort_by_key(|(m, _)| *m);
    Ok(Plans {
        tau,
        plans,
        rule,
        box_params: bp,
    })
}

fn recourse_relax(m: MethodId, relax: bool) -> bool {
    relax || !matches!(m, MethodId::M1Sp | MethodId::M2RoBox)
}

/// Realized cost of method `m`'s plan at `(d, b)`.
pub fn evaluate_method(
    inst: &Instance,
    plans: &Plans,
    m: MethodId,
    d: &[f64],
    b: &[f64],
    cfg: &CompareConfig,
) -> Result<Cell> {
    let start = Instant::now();
    let Some(plan) = plans.get(m) else {
        return Err(Error::Parameter(format!("method {m} was not planned")));
    };
    let Some(x) = plan.x.as_deref() else {
        return Ok(Cell::infinite(Outcome::Failed(plan.status), plan.seconds));
    };
    let finish = |cost: f64, phi: Option<f64>| {
        let outcome = if plan.status == Status::Optimal {
            Outcome::Optimal
        } else {
            Outcome::Limited(plan.status)
        };
        Cell {
            cost,
            outcome,
            seconds: plan.seconds + start.elapsed().as_secs_f64(),
            phi,
        }
    };
    if m == MethodId::M5Arc {
        let Some(rule) = &plans.rule else {
            return Ok(Cell::infinite(Outcome::Failed(plan.status), plan.seconds));
        };
        return match recover_adjustable_m5(inst, &rule.hull, &rule.blocks, d) {
            Ok((block, proj)) => {
                let z: Vec<f64> = block.z.iter().zip(x).map(|(z, x)| z.min(*x)).collect();
                Ok(finish(total_cost(inst, x, &block.y, &z, b)?, Some(proj.phi)))
            }
            Err(Error::PhiPositive { phi, .. }) => Ok(Cell {
                phi: Some(phi),
                ..Cell::infinite(Outcome::OutsideHull, plan.seconds + start.elapsed().as_secs_f64())
            }),
            Err(e) => Err(e),
        };
    }
    let r = solve_recourse(inst, x, d, b, recourse_relax(m, cfg.relax), &cfg.solver)?;
    match r.status {
        Status::Optimal => Ok(finish(r.objective, None)),
        Status::Infeasible => Ok(Cell::infinite(
            Outcome::Infeasible,
            plan.seconds + start.elapsed().as_secs_f64(),
        )),
        s => Ok(Cell::infinite(
            Outcome::Failed(s),
            plan.seconds + start.elapsed().as_secs_f64(),
        )),
    }
}

/// Wait-and-see cell; solved continuous so it floors every column.
pub fn evaluate_ws(inst: &Instance, d: &[f64], b: &[f64], cfg: &CompareConfig) -> Result<Cell> {
    let (s, secs) = timed(|| solve_ws(inst, d, b, true, &cfg.solver))?;
    Ok(match s.status {
        Status::Optimal => Cell {
            cost: s.objective,
            outcome: Outcome::Optimal,
            seconds: secs,
            phi: None,
        },
        Status::Infeasible => Cell::infinite(Outcome::Infeasible, secs),
        other => Cell::infinite(Outcome::Failed(other), secs),
    })
}

/// Rolling comparison over `τ = sbar, …, S − 1`.
pub fn run_comparison(
    inst: &Instance,
    scens: &ScenarioSet,
    sbar: usize,
    cfg: &CompareConfig,
) -> Result<ComparisonReport> {
    scens.check_against(inst)?;
    if sbar == 0 || sbar >= scens.len() {
        return Err(Error::Parameter(format!(
            "sbar = {sbar} must satisfy 1 <= sbar < {}",
            scens.len()
        )));
    }
    if cfg.columns.is_empty() {
        return Err(Error::Parameter("no methods selected".into()));
    }
    let rows: Vec<ComparisonRow> = (sbar..scens.len())
        .into_par_iter()
        .map(|tau| {
            let d = &scens.demands[tau];
            let b = &scens.costs[tau];
            let plans = plan_methods(inst, scens, tau, cfg)?;
            let cells = cfg
                .columns
                .par_iter()
                .map(|&c| {
                    let cell = match c {
                        Column::Method(m) => evaluate_method(inst, &plans, m, d, b, cfg)?,
                        Column::Ws => evaluate_ws(inst, d, b, cfg)?,
                    };
                    Ok((c, cell))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ComparisonRow {
                tau,
                cells: cells.into_iter().collect(),
                plans,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ComparisonReport {
        columns: cfg.columns.clone(),
        rows,
    })
}

/// `f1(x) + Σ_s P^s f2(x, y^s, z^s; b^s)` with optimal recourse per scenario.
pub fn prefix_expected_cost(inst: &Instance, x: &[f64], prefix: &ScenarioSet, solver: &SolverConfig) -> Result<f64> {
    expected_recourse_cost(inst, x, prefix, solver)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulations::tests::t1_with_cost;

    #[test]
    fn t1_single_row() {
        let inst = t1_with_cost(8.0);
        let scens = ScenarioSet::equiprobable(vec![vec![30.0], vec![50.0], vec![40.0]], vec![vec![8.0]; 3]).unwrap();
        let report = run_comparison(&inst, &scens, 2, &CompareConfig::default()).unwrap();
        assert_eq!(report.rows.len(), 1);
        let row = &report.rows[0];
        assert_eq!(row.tau, 2);
        let m1 = &row.cells[&Column::Method(MethodId::M1Sp)];
        assert!((m1.cost - 90.0).abs() < 1e-9, "{}", m1.cost);
        let m5 = &row.cells[&Column::Method(MethodId::M5Arc)];
        assert!(m5.cost.is_finite());
        let ws = row.cells[&Column::Ws].cost;
        for cell in row.cells.values() {
            assert!(cell.cost >= ws - 1e-9);
        }
    }

    #[test]
    fn column_parsing() {
        let cols = parse_columns("ws,m2,m1").unwrap();
        assert_eq!(
            cols,
            vec![
                Column::Method(MethodId::M1Sp),
                Column::Method(MethodId::M2RoBox),
                Column::Ws
            ]
        );
        assert!(parse_columns("m7").is_err());
    }
}
