//! Problem builders for the planning methods, the wait-and-see benchmark and
//! the recourse evaluation, plus the adjustable-rule recovery.
//!
//! Every builder produces a [`Model`]: a [`LinearProblem`] (with cone rows for
//! the ellipsoidal methods) and a [`Layout`] locating `x`, the `(z, y)` blocks
//! and the epigraph `w`. Variable names follow `x[plant,supplier,dest]`,
//! `z[s,plant,supplier,dest]`, `y[s,dest]` (scenario number `s` omitted for
//! single-copy problems) and `w`.
//!
//! Large scenario counts make the monolithic problems too big for the dense
//! simplex, so [`solve_sp`] and [`solve_trsocp`] can instead decompose by
//! scenario (see [`decompose`]).

mod adjustable;
pub mod decompose;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::solver::{
    solve_cones, solve_mip, ConeRow, LinExpr, LinearProblem, Relation, Solution, SolverConfig, Status, VarId,
};
use crate::supply::{add_block, add_first_stage, cost_expr, total_cost, Block, Instance, XSource};
use crate::uncertainty::{BoxParams, EllipseParams, ScenarioSet};

pub use adjustable::{phi_zero_tol, recover_adjustable_m5, repair_demand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum MethodId {
    /// Two-stage stochastic program over the scenario prefix.
    M1Sp,
    /// Robust counterpart with box demand and box cost uncertainty.
    M2RoBox,
    /// Robust counterpart with box demand and ellipsoidal cost uncertainty.
    M3RoEll,
    /// Scenario-hull robust program with per-scenario recourse blocks.
    M4TrSocp,
    /// Adjustable rule recovered from the M4 blocks by hull projection.
    M5Arc,
}

impl MethodId {
    pub const ALL: [MethodId; 5] = [
        MethodId::M1Sp,
        MethodId::M2RoBox,
        MethodId::M3RoEll,
        MethodId::M4TrSocp,
        MethodId::M5Arc,
    ];

    pub fn column(self) -> &'static str {
        match self {
            MethodId::M1Sp => "m1",
            MethodId::M2RoBox => "m2",
            MethodId::M3RoEll => "m3",
            MethodId::M4TrSocp => "m4",
            MethodId::M5Arc => "m5",
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "m1" | "sp" => Ok(MethodId::M1Sp),
            "m2" | "ro-box" => Ok(MethodId::M2RoBox),
            "m3" | "ro-ell" => Ok(MethodId::M3RoEll),
            "m4" | "trsocp" => Ok(MethodId::M4TrSocp),
            "m5" | "arc" => Ok(MethodId::M5Arc),
            other => Err(Error::Parameter(format!("unknown method `{other}`"))),
        }
    }
}

/// Where the structured variables of a [`Model`] live.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub x: Vec<VarId>,
    pub blocks: Vec<Block>,
    pub w: Option<VarId>,
    /// Whether block variable names carry a scenario number.
    pub labelled: bool,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub problem: LinearProblem,
    pub cones: Vec<ConeRow>,
    pub layout: Layout,
}

impl Model {
    /// Branch and bound when integer marks are present, outer approximation
    /// when cone rows are present, plain simplex otherwise.
    pub fn solve(&self, cfg: &SolverConfig) -> Result<Solution> {
        if self.cones.is_empty() {
            solve_mip(&self.problem, cfg)
        } else {
            solve_cones(&self.problem, &self.cones, cfg)
        }
    }
}

/// Values of one `(z, y)` block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockValues {
    pub z: Vec<f64>,
    pub y: Vec<f64>,
}

/// Method-level result in structured form, independent of how it was solved.
#[derive(Debug, Clone, Serialize)]
pub struct Solved {
    pub status: Status,
    pub objective: f64,
    pub x: Vec<f64>,
    pub blocks: Vec<BlockValues>,
    pub w: Option<f64>,
    pub labelled: bool,
    pub gap: f64,
    pub cone_residual: f64,
    pub iterations: usize,
}

impl Solved {
    pub(crate) fn failed(status: Status, iterations: usize) -> Self {
        Self {
            status,
            objective: f64::INFINITY,
            x: Vec::new(),
            blocks: Vec::new(),
            w: None,
            labelled: false,
            gap: 0.0,
            cone_residual: 0.0,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    /// Variable values keyed by structured name.
    pub fn named_values(&self, inst: &Instance) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for (a, v) in self.x.iter().enumerate() {
            out.insert(format!("x[{}]", inst.arc_key(a)), *v);
        }
        for (s, b) in self.blocks.iter().enumerate() {
            let tag = |body: String| {
                if self.labelled {
                    format!("{},{body}", s + 1)
                } else {
                    body
                }
            };
            for (a, v) in b.z.iter().enumerate() {
                out.insert(format!("z[{}]", tag(inst.arc_key(a).to_string())), *v);
            }
            for (j, v) in b.y.iter().enumerate() {
                out.insert(format!("y[{}]", tag(inst.destinations[j].id.clone())), *v);
            }
        }
        if let Some(w) = self.w {
            out.insert("w".into(), w);
        }
        out
    }

    fn from_solution(model: &Model, sol: Solution, fixed_x: Option<&[f64]>) -> Self {
        if !sol.has_point() {
            return Self::failed(sol.status, sol.iterations);
        }
        let x = match fixed_x {
            Some(x) => x.to_vec(),
            None => model.layout.x.iter().map(|&v| sol.value(v)).collect(),
        };
        let blocks = model
            .layout
            .blocks
            .iter()
            .map(|b| BlockValues {
                z: b.z.iter().map(|&v| sol.value(v)).collect(),
                y: b.y.iter().map(|&v| sol.value(v)).collect(),
            })
            .collect();
        Self {
            status: sol.status,
            objective: sol.objective,
            x,
            blocks,
            w: model.layout.w.map(|v| sol.value(v)),
            labelled: model.layout.labelled,
            gap: sol.gap,
            cone_residual: sol.cone_residual,
            iterations: sol.iterations,
        }
    }
}

/// How scenario-indexed methods are solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    /// One problem holding every scenario block.
    Monolithic,
    /// Master problem over `x` with per-scenario subproblems.
    Decomposed,
    /// Monolithic for small problems, decomposed otherwise (integer problems
    /// are always monolithic).
    #[default]
    Auto,
}

/// Row count above which [`Strategy::Auto`] decomposes.
const AUTO_ROW_LIMIT: usize = 400;

fn block_rows(inst: &Instance) -> usize {
    2 * inst.suppliers.len() + inst.num_destinations() + inst.num_arcs()
}

fn add_epigraph(p: &mut LinearProblem) -> Result<VarId> {
    let w = p.add_var("w", 0.0, None)?;
    p.set_objective(w, 1.0);
    Ok(w)
}

/// `min f1(x) + Σ_s P^s f2(x, y^s, z^s; b^s)` with one block per scenario.
pub fn build_sp(inst: &Instance, scens: &ScenarioSet, relax: bool) -> Result<Model> {
    scens.check_against(inst)?;
    let mut p = LinearProblem::new();
    let x = add_first_stage(&mut p, inst, relax)?;
    let mut blocks = Vec::with_capacity(scens.len());
    for s in 0..scens.len() {
        let block = add_block(&mut p, inst, XSource::Vars(&x), &scens.demands[s], Some(s + 1), relax)?;
        p.add_objective_expr(
            &cost_expr(inst, XSource::Vars(&x), &block, &scens.costs[s]),
            scens.probs[s],
        );
        blocks.push(block);
    }
    Ok(Model {
        problem: p,
        cones: Vec::new(),
        layout: Layout {
            x,
            blocks,
            w: None,
            labelled: true,
        },
    })
}

fn single_copy(inst: &Instance, d: &[f64], relax: bool) -> Result<(LinearProblem, Vec<VarId>, Block)> {
    let mut p = LinearProblem::new();
    let x = add_first_stage(&mut p, inst, relax)?;
    let block = add_block(&mut p, inst, XSource::Vars(&x), d, None, relax)?;
    Ok((p, x, block))
}

/// `min w` s.t. `w − f(x, y, z; b̄) ≥ Σ q·b_dev_j·y_j` and demand rows at the
/// box corner `d̄ + d_dev`.
pub fn build_ro_box(inst: &Instance, bp: &BoxParams, relax: bool) -> Result<Model> {
    inst.check_dest("box", &bp.d_nominal)?;
    let (mut p, x, block) = single_copy(inst, &bp.demand_corner(), relax)?;
    let w = add_epigraph(&mut p)?;
    let mut e = LinExpr::term(w, 1.0);
    e.add_expr(&cost_expr(inst, XSource::Vars(&x), &block, &bp.b_nominal), -1.0);
    for (j, &yj) in block.y.iter().enumerate() {
        e.add(yj, -inst.q() * bp.b_dev[j]);
    }
    p.add_row("robust", &e, Relation::Ge, 0.0);
    Ok(Model {
        problem: p,
        cones: Vec::new(),
        layout: Layout {
            x,
            blocks: vec![block],
            w: Some(w),
            labelled: false,
        },
    })
}

fn cost_cone(inst: &Instance, w: VarId, affine: LinExpr, y: &[VarId], b_dev: &[f64], omega: f64) -> ConeRow {
    ConeRow {
        epigraph: w,
        affine,
        terms: y
            .iter()
            .zip(b_dev)
            .map(|(&yj, &dev)| LinExpr::term(yj, inst.q() * dev))
            .collect(),
        scale: omega,
    }
}

fn check_omega(omega: f64) -> Result<()> {
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(Error::Parameter(format!(
            "omega must be finite and nonnegative, got {omega}"
        )));
    }
    Ok(())
}

/// `min w` s.t. `w − f(x, y, z; b̄) ≥ Ω‖q·b_dev ⊙ y‖` and demand rows at the
/// box corner. Continuous only.
pub fn build_ro_ell(inst: &Instance, bp: &BoxParams, ell: &EllipseParams, relax: bool) -> Result<Model> {
    if !relax {
        return Err(Error::Parameter(
            "the ellipsoidal model is solved as a continuous problem; integrality is not supported".into(),
        ));
    }
    check_omega(ell.omega)?;
    inst.check_dest("box", &bp.d_nominal)?;
    inst.check_dest("cost deviation", &ell.b_dev)?;
    let (mut p, x, block) = single_copy(inst, &bp.demand_corner(), true)?;
    let w = add_epigraph(&mut p)?;
    let affine = cost_expr(inst, XSource::Vars(&x), &block, &bp.b_nominal);
    let cone = cost_cone(inst, w, affine, &block.y, &ell.b_dev, ell.omega);
    Ok(Model {
        problem: p,
        cones: vec![cone],
        layout: Layout {
            x,
            blocks: vec![block],
            w: Some(w),
            labelled: false,
        },
    })
}

/// `min w` s.t. for every scenario `s`:
/// `w − f(x, y^s, z^s; b̄) ≥ Ω‖q·b_dev ⊙ y^s‖` with demand rows at `d̂^s`.
pub fn build_trsocp(inst: &Instance, scens: &ScenarioSet, bp: &BoxParams, omega: f64) -> Result<Model> {
    scens.check_against(inst)?;
    check_omega(omega)?;
    let mut p = LinearProblem::new();
    let x = add_first_stage(&mut p, inst, true)?;
    let mut blocks = Vec::with_capacity(scens.len());
    for s in 0..scens.len() {
        blocks.push(add_block(
            &mut p,
            inst,
            XSource::Vars(&x),
            &scens.demands[s],
            Some(s + 1),
            true,
        )?);
    }
    let w = add_epigraph(&mut p)?;
    let cones = blocks
        .iter()
        .map(|b| {
            let affine = cost_expr(inst, XSource::Vars(&x), b, &bp.b_nominal);
            cost_cone(inst, w, affine, &b.y, &bp.b_dev, omega)
        })
        .collect();
    Ok(Model {
        problem: p,
        cones,
        layout: Layout {
            x,
            blocks,
            w: Some(w),
            labelled: true,
        },
    })
}

/// Deterministic problem for one known realization `(d, b)`.
pub fn build_ws(inst: &Instance, d: &[f64], b: &[f64], relax: bool) -> Result<Model> {
    inst.check_dest("cost", b)?;
    let (mut p, x, block) = single_copy(inst, d, relax)?;
    p.add_objective_expr(&cost_expr(inst, XSource::Vars(&x), &block, b), 1.0);
    Ok(Model {
        problem: p,
        cones: Vec::new(),
        layout: Layout {
            x,
            blocks: vec![block],
            w: None,
            labelled: false,
        },
    })
}

/// `min f(x*, y, z; b)` over the adjustable variables with `x*` fixed.
pub fn build_recourse(inst: &Instance, x_star: &[f64], d: &[f64], b: &[f64], relax: bool) -> Result<Model> {
    inst.check_dest("cost", b)?;
    if x_star.len() != inst.num_arcs() {
        return Err(Error::Instance(format!(
            "first stage has {} entries for {} arcs",
            x_star.len(),
            inst.num_arcs()
        )));
    }
    if let Some(v) = x_star.iter().find(|v| !(v.is_finite() && **v >= -1e-9)) {
        return Err(Error::Instance(format!(
            "first-stage value {v} is not a nonnegative number"
        )));
    }
    let mut p = LinearProblem::new();
    let block = add_block(&mut p, inst, XSource::Fixed(x_star), d, None, relax)?;
    p.add_objective_expr(&cost_expr(inst, XSource::Fixed(x_star), &block, b), 1.0);
    Ok(Model {
        problem: p,
        cones: Vec::new(),
        layout: Layout {
            x: Vec::new(),
            blocks: vec![block],
            w: None,
            labelled: false,
        },
    })
}

pub fn solve_model(model: &Model, cfg: &SolverConfig) -> Result<Solved> {
    Ok(Solved::from_solution(model, model.solve(cfg)?, None))
}

fn use_decomposition(inst: &Instance, scenarios: usize, relax: bool, strategy: Strategy) -> bool {
    match strategy {
        Strategy::Monolithic => false,
        Strategy::Decomposed => relax,
        Strategy::Auto => relax && scenarios * block_rows(inst) > AUTO_ROW_LIMIT,
    }
}

pub fn solve_sp(
    inst: &Instance,
    scens: &ScenarioSet,
    relax: bool,
    strategy: Strategy,
    cfg: &SolverConfig,
) -> Result<Solved> {
    if use_decomposition(inst, scens.len(), relax, strategy) {
        decompose::solve_sp_decomposed(inst, scens, cfg)
    } else {
        solve_model(&build_sp(inst, scens, relax)?, cfg)
    }
}

pub fn solve_ro_box(inst: &Instance, bp: &BoxParams, relax: bool, cfg: &SolverConfig) -> Result<Solved> {
    solve_model(&build_ro_box(inst, bp, relax)?, cfg)
}

pub fn solve_ro_ell(inst: &Instance, bp: &BoxParams, ell: &EllipseParams, cfg: &SolverConfig) -> Result<Solved> {
    let mut s = solve_model(&build_ro_ell(inst, bp, ell, true)?, cfg)?;
    tighten_epigraph(inst, &mut s, &bp.b_nominal, &ell.b_dev, ell.omega)?;
    Ok(s)
}

pub fn solve_trsocp(
    inst: &Instance,
    scens: &ScenarioSet,
    bp: &BoxParams,
    omega: f64,
    strategy: Strategy,
    cfg: &SolverConfig,
) -> Result<Solved> {
    let mut s = if use_decomposition(inst, scens.len(), true, strategy) {
        decompose::solve_trsocp_decomposed(inst, scens, bp, omega, cfg)?
    } else {
        solve_model(&build_trsocp(inst, scens, bp, omega)?, cfg)?
    };
    tighten_epigraph(inst, &mut s, &bp.b_nominal, &bp.b_dev, omega)?;
    Ok(s)
}

/// `f(x, y, z; b̄) + Ω‖q·b_dev ⊙ y‖` for one block.
pub fn robust_cost(
    inst: &Instance,
    x: &[f64],
    block: &BlockValues,
    b_nominal: &[f64],
    b_dev: &[f64],
    omega: f64,
) -> Result<f64> {
    inst.check_dest("cost deviation", b_dev)?;
    let q = inst.q();
    let norm = block
        .y
        .iter()
        .zip(b_dev)
        .map(|(y, dev)| (q * dev * y).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(total_cost(inst, x, &block.y, &block.z, b_nominal)? + omega * norm)
}

/// Outer approximation leaves `w` up to the cone tolerance below the exact
/// worst block cost; raise it so the returned point satisfies every cone row.
fn tighten_epigraph(inst: &Instance, s: &mut Solved, b_nominal: &[f64], b_dev: &[f64], omega: f64) -> Result<()> {
    let Some(w) = s.w else { return Ok(()) };
    if !s.has_point() {
        return Ok(());
    }
    let mut worst = w;
    for b in &s.blocks {
        worst = worst.max(robust_cost(inst, &s.x, b, b_nominal, b_dev, omega)?);
    }
    if worst > w {
        s.w = Some(worst);
        s.objective = worst;
    }
    Ok(())
}

pub fn solve_ws(inst: &Instance, d: &[f64], b: &[f64], relax: bool, cfg: &SolverConfig) -> Result<Solved> {
    solve_model(&build_ws(inst, d, b, relax)?, cfg)
}

/// Optimal recourse for a fixed first stage; an infeasible recourse comes
/// back as a `Solved` with status `Infeasible` and infinite objective.
pub fn solve_recourse(
    inst: &Instance,
    x_star: &[f64],
    d: &[f64],
    b: &[f64],
    relax: bool,
    cfg: &SolverConfig,
) -> Result<Solved> {
    let model = build_recourse(inst, x_star, d, b, relax)?;
    let sol = model.solve(cfg)?;
    Ok(Solved::from_solution(&model, sol, Some(x_star)))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::supply::{Arc, Destination, Meta, Supplier};

    pub(crate) fn t1_with_cost(b: f64) -> Instance {
        Instance::new(
            Meta { q: 10.0, alpha: 0.5 },
            vec![Supplier {
                id: "k1".into(),
                r: 0.0,
                v: 1e6,
                plants: vec!["p1".into()],
            }],
            vec![Destination {
                id: "d1".into(),
                b_bar: b,
                g: 100.0,
                l0: 0.0,
            }],
            vec![Arc {
                plant: "p1".into(),
                supplier: "k1".into(),
                destination: "d1".into(),
                t: 2.0,
            }],
        )
        .unwrap()
    }

    pub(crate) fn t1_scenarios(demands: &[f64]) -> ScenarioSet {
        ScenarioSet::equiprobable(
            demands.iter().map(|d| vec![*d]).collect(),
            demands.iter().map(|_| vec![8.0]).collect(),
        )
        .unwrap()
    }

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn t1_sp_integer_and_relaxed() {
        let inst = t1_with_cost(8.0);
        let sc = t1_scenarios(&[30.0, 50.0]);
        let s = solve_sp(&inst, &sc, false, Strategy::Auto, &cfg()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert_eq!(s.objective, 90.0);
        assert_eq!(s.x, vec![5.0]);
        let names = s.named_values(&inst);
        assert!(names.contains_key("z[2,p1,k1,d1]"));
        assert!(names.contains_key("y[1,d1]"));
        for strategy in [Strategy::Monolithic, Strategy::Decomposed] {
            let r = solve_sp(&inst, &sc, true, strategy, &cfg()).unwrap();
            assert!((r.objective - 90.0).abs() < 1e-9, "{strategy:?}: {}", r.objective);
        }
    }

    #[test]
    fn t1_wait_and_see_and_recourse() {
        let inst = t1_with_cost(8.0);
        assert!((solve_ws(&inst, &[30.0], &[8.0], false, &cfg()).unwrap().objective - 60.0).abs() < 1e-9);
        assert!((solve_ws(&inst, &[50.0], &[8.0], false, &cfg()).unwrap().objective - 100.0).abs() < 1e-9);
        let zero = solve_ws(&inst, &[0.0], &[8.0], true, &cfg()).unwrap();
        assert_eq!(zero.objective, 0.0);
        let r = solve_recourse(&inst, &[5.0], &[30.0], &[8.0], false, &cfg()).unwrap();
        assert!((r.objective - 80.0).abs() < 1e-9);
        assert_eq!(r.blocks[0].z, vec![3.0]);
        let r = solve_recourse(&inst, &[3.0], &[50.0], &[8.0], false, &cfg()).unwrap();
        assert!((r.objective - 220.0).abs() < 1e-9);
        let r = solve_recourse(&inst, &[0.0], &[0.0], &[8.0], true, &cfg()).unwrap();
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn t1_robust_models() {
        let inst = t1_with_cost(8.0);
        let bp = BoxParams {
            d_nominal: vec![40.0],
            d_dev: vec![10.0],
            b_nominal: vec![8.0],
            b_dev: vec![1.0],
        };
        let s = solve_ro_box(&inst, &bp, false, &cfg()).unwrap();
        assert!((s.objective - 100.0).abs() < 1e-9);
        assert_eq!(s.x, vec![5.0]);
        assert_eq!(s.blocks[0].y, vec![0.0]);
        assert!(build_ro_ell(
            &inst,
            &bp,
            &EllipseParams {
                omega: 1.0,
                b_dev: vec![1.0]
            },
            false
        )
        .is_err());
        let sc = t1_scenarios(&[30.0, 50.0]);
        for strategy in [Strategy::Monolithic, Strategy::Decomposed] {
            let t = solve_trsocp(&inst, &sc, &bp, 0.0, strategy, &cfg()).unwrap();
            assert!((t.objective - 100.0).abs() < 1e-9, "{strategy:?}");
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in MethodId::ALL {
            assert_eq!(m.column().parse::<MethodId>().unwrap(), m);
        }
        assert_eq!("ro-ell".parse::<MethodId>().unwrap(), MethodId::M3RoEll);
        assert!("m9".parse::<MethodId>().is_err());
    }
}
