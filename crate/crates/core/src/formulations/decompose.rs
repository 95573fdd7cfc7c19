//! Scenario decomposition for the continuous scenario-indexed methods.
//!
//! Given bookings `x̂`, scenario `s` has the recourse value
//! `Q_s(x̂) = min f(x̂, y, z; b) (+ Ω‖q·b_dev ⊙ y‖)` over its own block, and the
//! duals of the `z ≤ x̂` rows give a subgradient of `Q_s`. The stochastic
//! program minimizes `Σ_s P^s Q_s(x)` (one cut variable per scenario); the
//! scenario-hull robust program minimizes `max_s Q_s(x)` (one epigraph `w`).
//! Both masters carry the capacity rows and the rows `q Σ_{arcs of k} x ≥ r_k`
//! that keep every subproblem feasible.

use rayon::prelude::*;

use crate::error::Result;
use crate::solver::{
    ConeRow, ConeSession, CutPool, LinExpr, LinearProblem, Relation, SolverConfig, Status, VarId, WarmLp,
};
use crate::supply::{add_block, add_first_stage, cost_expr, Instance, XSource};
use crate::uncertainty::{BoxParams, ScenarioSet};

use super::{BlockValues, Solved};

const MAX_ROUNDS: usize = 2_000;
const GAP_REL: f64 = 1e-10;
/// Subproblem values carry the outer-approximation error, so the min-max
/// loop cannot certify a tighter gap than the cone tolerance.
const GAP_REL_CONE: f64 = 1e-6;

/// Recourse value of one scenario at fixed bookings.
#[derive(Debug, Clone)]
pub struct ScenarioEval {
    pub status: Status,
    pub value: f64,
    /// Subgradient of the value with respect to `x`, per arc.
    pub grad: Vec<f64>,
    pub block: BlockValues,
}

/// Cost-uncertainty term `Ω‖q·b_dev ⊙ y‖` added to a recourse objective.
#[derive(Debug, Clone, Copy)]
pub struct CostCone<'a> {
    pub b_dev: &'a [f64],
    pub omega: f64,
}

impl CostCone<'_> {
    fn active(&self) -> bool {
        self.omega > 0.0 && self.b_dev.iter().any(|&v| v != 0.0)
    }
}

/// Subproblem state of one scenario kept between calls with different
/// bookings: the LP basis and, with a cost cone, its cuts.
#[derive(Clone, Default)]
pub struct RecourseCache {
    session: Option<(ConeSession, Vec<usize>)>,
}

impl RecourseCache {
    pub fn new() -> Self {
        Self::default()
    }
}

/// `Q(x̂)` for one scenario. `cache` must only be reused for the same
/// instance, demand, costs and cone.
pub fn evaluate_scenario(
    inst: &Instance,
    x_hat: &[f64],
    d: &[f64],
    b: &[f64],
    cone: Option<CostCone<'_>>,
    cache: &mut RecourseCache,
    cfg: &SolverConfig,
) -> Result<ScenarioEval> {
    inst.check_arcs("bookings", x_hat)?;
    let offset: f64 = inst
        .arcs
        .iter()
        .zip(x_hat)
        .map(|(arc, xa)| (1.0 - inst.alpha()) * inst.q() * arc.t * xa)
        .sum();
    let mut p = LinearProblem::new();
    let block = add_block(&mut p, inst, XSource::Fixed(x_hat), d, None, true)?;
    p.add_objective_expr(&cost_expr(inst, XSource::Fixed(x_hat), &block, b), 1.0);
    let (session, link_rows) = match cache.session.as_mut() {
        Some(s) => s,
        None => {
            let cones = match cone.filter(CostCone::active) {
                Some(c) => {
                    let u = p.add_var("u", 0.0, None)?;
                    p.set_objective(u, 1.0);
                    vec![ConeRow {
                        epigraph: u,
                        affine: LinExpr::new(),
                        terms: block
                            .y
                            .iter()
                            .zip(c.b_dev)
                            .map(|(&yj, &dev)| LinExpr::term(yj, inst.q() * dev))
                            .collect(),
                        scale: c.omega,
                    }]
                }
                None => Vec::new(),
            };
            let pools = vec![CutPool::new(); cones.len()];
            cache
                .session
                .insert((ConeSession::new(&p, cones, pools)?, block.link_rows.clone()))
        }
    };
    for (&row, &xa) in link_rows.iter().zip(x_hat) {
        session.set_rhs(row, xa);
    }
    session.set_offset(offset);
    let sol = session.solve(cfg)?;
    if sol.status != Status::Optimal {
        cache.session = None;
        return Ok(ScenarioEval {
            status: sol.status,
            value: f64::INFINITY,
            grad: Vec::new(),
            block: BlockValues {
                z: Vec::new(),
                y: Vec::new(),
            },
        });
    }
    let q = inst.q();
    let alpha = inst.alpha();
    let grad = inst
        .arcs
        .iter()
        .zip(link_rows.iter())
        .map(|(arc, &row)| (1.0 - alpha) * q * arc.t + sol.row_duals[row])
        .collect();
    Ok(ScenarioEval {
        status: Status::Optimal,
        value: sol.objective,
        grad,
        block: BlockValues {
            z: block
                .z
                .iter()
                .zip(x_hat)
                .map(|(&v, &xa)| sol.value(v).clamp(0.0, xa))
                .collect(),
            y: block.y.iter().map(|&v| sol.value(v).max(0.0)).collect(),
        },
    })
}

/// `Σ_s P^s Q_s(x)` over `scens`; infinite when some scenario has no
/// feasible recourse.
pub fn expected_recourse_cost(inst: &Instance, x: &[f64], scens: &ScenarioSet, cfg: &SolverConfig) -> Result<f64> {
    let evals: Vec<ScenarioEval> = (0..scens.len())
        .into_par_iter()
        .map(|s| {
            evaluate_scenario(
                inst,
                x,
                &scens.demands[s],
                &scens.costs[s],
                None,
                &mut RecourseCache::new(),
                cfg,
            )
        })
        .collect::<Result<_>>()?;
    Ok(evals
        .iter()
        .zip(&scens.probs)
        .map(|(e, p)| {
            if e.status == Status::Optimal {
                p * e.value
            } else {
                f64::INFINITY
            }
        })
        .sum())
}

enum Aggregate<'a> {
    Expected(&'a [f64]),
    Worst,
}

struct Master {
    problem: LinearProblem,
    x: Vec<VarId>,
    theta: Vec<VarId>,
}

fn build_master(inst: &Instance, agg: &Aggregate<'_>) -> Result<Master> {
    let mut p = LinearProblem::new();
    let x = add_first_stage(&mut p, inst, true)?;
    for (k, s) in inst.suppliers.iter().enumerate() {
        if s.r <= 0.0 {
            continue;
        }
        let mut e = LinExpr::new();
        for (a, &v) in x.iter().enumerate() {
            if inst.arc_supplier(a) == k {
                e.add(v, inst.q());
            }
        }
        p.add_row(format!("reach[{}]", s.id), &e, Relation::Ge, s.r);
    }
    let theta = match agg {
        Aggregate::Expected(probs) => probs
            .iter()
            .enumerate()
            .map(|(s, &pr)| {
                let v = p.add_var(format!("theta[{}]", s + 1), 0.0, None)?;
                p.set_objective(v, pr);
                Ok(v)
            })
            .collect::<Result<Vec<_>>>()?,
        Aggregate::Worst => {
            let w = p.add_var("w", 0.0, None)?;
            p.set_objective(w, 1.0);
            vec![w]
        }
    };
    Ok(Master { problem: p, x, theta })
}

/// Master cuts slack for this many consecutive rounds are dropped ...
const MAX_AGE: usize = 10;
/// ... once there are more than this many per first-stage variable and
/// scenario.
const PRUNE_CUTS_AT: usize = 2;
/// Cutting-plane loop over the scenario subproblems. Master cuts that stay
/// slack for a while are dropped to keep the basis small.
fn run<F>(inst: &Instance, n_scen: usize, agg: Aggregate<'_>, cfg: &SolverConfig, eval: F) -> Result<Solved>
where
    F: Fn(usize, &[f64], &mut RecourseCache) -> Result<ScenarioEval> + Sync,
{
    let gap_rel = match agg {
        Aggregate::Expected(_) => GAP_REL,
        Aggregate::Worst => GAP_REL_CONE.max(cfg.cone_tol),
    };
    let mut master = build_master(inst, &agg)?;
    let mut pools = vec![RecourseCache::new(); n_scen];
    let mut best: Option<(f64, Vec<f64>, Vec<BlockValues>)> = None;
    let mut iterations = 0;
    let mut lower = f64::NEG_INFINITY;
    let mut lp = WarmLp::new();
    let first_cut = master.problem.num_rows();
    let mut ages: Vec<usize> = Vec::new();

    for round in 0..MAX_ROUNDS {
        let sol = lp.solve(&master.problem, cfg)?;
        iterations += sol.iterations;
        if sol.status != Status::Optimal {
            return Ok(Solved::failed(sol.status, iterations));
        }
        lower = lower.max(sol.objective);
        let slack = lp.slack_rows();
        if slack.len() == master.problem.num_rows() {
            for (age, &sl) in ages.iter_mut().zip(&slack[first_cut..]) {
                *age = if sl { *age + 1 } else { 0 };
            }
            if ages.len() > PRUNE_CUTS_AT * (n_scen + master.x.len()) {
                let drop: Vec<bool> = (0..slack.len())
                    .map(|i| i >= first_cut && ages[i - first_cut] >= MAX_AGE)
                    .collect();
                lp.drop_rows(&drop);
                master.problem.retain_rows(&drop.iter().map(|d| !d).collect::<Vec<_>>());
                ages.retain(|&a| a < MAX_AGE);
            }
        }
        let x_hat: Vec<f64> = master.x.iter().map(|&v| sol.value(v).max(0.0)).collect();

        let evals: Vec<ScenarioEval> = pools
            .par_iter_mut()
            .enumerate()
            .map(|(s, pool)| eval(s, &x_hat, pool))
            .collect::<Result<_>>()?;
        if let Some(e) = evals.iter().find(|e| e.status != Status::Optimal) {
            log::warn!("scenario subproblem ended with {} in round {round}", e.status);
            let status = if e.status == Status::Infeasible {
                Status::Numerical
            } else {
                e.status
            };
            return Ok(Solved::failed(status, iterations));
        }

        let upper = match agg {
            Aggregate::Expected(probs) => evals.iter().zip(probs).map(|(e, p)| p * e.value).sum(),
            Aggregate::Worst => evals.iter().map(|e| e.value).fold(f64::NEG_INFINITY, f64::max),
        };
        if best.as_ref().is_none_or(|b| upper < b.0) {
            best = Some((upper, x_hat.clone(), evals.iter().map(|e| e.block.clone()).collect()));
        }
        let best_upper = best.as_ref().map_or(f64::INFINITY, |b| b.0);
        let tol = gap_rel * best_upper.abs().max(1.0);
        if best_upper - lower <= tol {
            break;
        }

        let mut added = false;
        for (s, e) in evals.iter().enumerate() {
            let (theta, current) = match agg {
                Aggregate::Expected(_) => (master.theta[s], sol.value(master.theta[s])),
                Aggregate::Worst => (master.theta[0], sol.value(master.theta[0])),
            };
            if e.value <= current + gap_rel * e.value.abs().max(1.0) {
                continue;
            }
            let mut cut = LinExpr::term(theta, 1.0);
            let mut rhs = e.value;
            for ((&xv, &g), &xh) in master.x.iter().zip(&e.grad).zip(&x_hat) {
                if g != 0.0 {
                    cut.add(xv, -g);
                    rhs -= g * xh;
                }
            }
            master
                .problem
                .add_row(format!("cut[{},{}]", round, s + 1), &cut, Relation::Ge, rhs);
            ages.push(0);
            added = true;
        }

        if !added {
            break;
        }
        if round + 1 == MAX_ROUNDS {
            let (obj, x, blocks) = best.unwrap_or_default();
            return Ok(Solved {
                status: Status::IterLimit,
                objective: obj,
                x,
                blocks,
                w: None,
                labelled: true,
                gap: obj - lower,
                cone_residual: 0.0,
                iterations,
            });
        }
    }

    let Some((objective, x, blocks)) = best else {
        return Ok(Solved::failed(Status::Numerical, iterations));
    };
    Ok(Solved {
        status: Status::Optimal,
        objective,
        x,
        blocks,
        w: None,
        labelled: true,
        gap: (objective - lower).max(0.0),
        cone_residual: 0.0,
        iterations,
    })
}

/// Continuous stochastic program by multi-cut decomposition.
pub fn solve_sp_decomposed(inst: &Instance, scens: &ScenarioSet, cfg: &SolverConfig) -> Result<Solved> {
    scens.check_against(inst)?;
    run(
        inst,
        scens.len(),
        Aggregate::Expected(&scens.probs),
        cfg,
        |s, x, pool| evaluate_scenario(inst, x, &scens.demands[s], &scens.costs[s], None, pool, cfg),
    )
}

/// Scenario-hull robust program by min-max cutting planes; subproblems keep
/// their cone cuts across rounds.
pub fn solve_trsocp_decomposed(
    inst: &Instance,
    scens: &ScenarioSet,
    bp: &BoxParams,
    omega: f64,
    cfg: &SolverConfig,
) -> Result<Solved> {
    scens.check_against(inst)?;
    let cone = CostCone {
        b_dev: &bp.b_dev,
        omega,
    };
    let mut solved = run(inst, scens.len(), Aggregate::Worst, cfg, |s, x, pool| {
        evaluate_scenario(inst, x, &scens.demands[s], &bp.b_nominal, Some(cone), pool, cfg)
    })?;
    if solved.has_point() {
        solved.w = Some(solved.objective);
    }
    Ok(solved)
}

impl Solved {
    pub(crate) fn has_point(&self) -> bool {
        !self.x.is_empty() || !self.blocks.is_empty()
    }
}
