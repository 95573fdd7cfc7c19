//! Kelley-style outer approximation of second-order cone rows.
//!
//! Each cone row `w − a(x) ≥ Ω‖t(x)‖` starts as the linear row `w − a(x) ≥ 0`
//! plus axis cuts `w − a(x) ≥ ±Ω t_k(x)`. After every LP solve, violated cones
//! receive the tangent cut `w − a(x) ≥ Ω g·t(x)` with `g = t/‖t‖` taken at the
//! LP point. Since `g·t ≤ ‖t‖` for any unit `g`, no cut removes a cone-feasible
//! point.

use crate::error::{Error, Result};

use super::simplex::WarmLp;
use super::{ConeRow, LinExpr, LinearProblem, Solution, SolverConfig, Status};

/// Tangent cuts a [`ConeSession`] keeps before discarding slack ones.
const PRUNE_AT: usize = 20;

/// Cut directions gathered for one cone row; reusable across solves of
/// problems that share the cone's structure.
#[derive(Debug, Clone, Default)]
pub struct CutPool {
    directions: Vec<Vec<f64>>,
}

impl CutPool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Unit vectors `g` of every cut `w − affine ≥ Ω g·terms` emitted so far.
    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

pub fn solve_cone(p: &LinearProblem, cone: &ConeRow, cfg: &SolverConfig) -> Result<Solution> {
    solve_cones(p, std::slice::from_ref(cone), cfg)
}

pub fn solve_cones(p: &LinearProblem, cones: &[ConeRow], cfg: &SolverConfig) -> Result<Solution> {
    let mut pools = vec![CutPool::new(); cones.len()];
    solve_cones_pooled(p, cones, &mut pools, cfg)
}

/// Outer approximation seeded with (and extending) one cut pool per cone.
pub fn solve_cones_pooled(
    p: &LinearProblem,
    cones: &[ConeRow],
    pools: &mut [CutPool],
    cfg: &SolverConfig,
) -> Result<Solution> {
    if pools.len() != cones.len() {
        return Err(Error::InvalidProblem(format!(
            "{} cut pools supplied for {} cone rows",
            pools.len(),
            cones.len()
        )));
    }
    let mut session = ConeSession::new(p, cones.to_vec(), pools.to_vec())?;
    let sol = session.solve(cfg)?;
    pools.clone_from_slice(&session.pools);
    Ok(sol)
}

/// Outer approximation kept alive between solves. Only right-hand sides of
/// the original rows and the objective offset may change between calls; the
/// LP is then re-solved from the previous basis.
#[derive(Clone)]
pub struct ConeSession {
    work: LinearProblem,
    base_rows: usize,
    cones: Vec<ConeRow>,
    /// Seed cuts per cone (never pruned).
    seeds: Vec<usize>,
    pools: Vec<CutPool>,
    /// Cone and direction of each tangent cut row, indexed from `first_cut`.
    tangents: Vec<(usize, Vec<f64>)>,
    first_cut: usize,
    lp: WarmLp,
}

impl ConeSession {
    /// `pools` must hold one (possibly empty) pool per cone.
    pub fn new(p: &LinearProblem, cones: Vec<ConeRow>, mut pools: Vec<CutPool>) -> Result<Self> {
        if let Some(v) = p.vars().iter().find(|v| v.integer) {
            return Err(Error::IntegerCone(v.name.clone()));
        }
        if pools.len() != cones.len() {
            return Err(Error::InvalidProblem(format!(
                "{} cut pools supplied for {} cone rows",
                pools.len(),
                cones.len()
            )));
        }
        for c in &cones {
            if !(c.scale >= 0.0 && c.scale.is_finite()) {
                return Err(Error::InvalidProblem(format!(
                    "cone scale must be finite and nonnegative, got {}",
                    c.scale
                )));
            }
            if c.epigraph.0 >= p.num_vars() {
                return Err(Error::InvalidProblem(
                    "cone epigraph references an undeclared variable".into(),
                ));
            }
        }

        let base_rows = p.num_rows();
        let mut work = p.clone();
        for (k, (cone, pool)) in cones.iter().zip(pools.iter_mut()).enumerate() {
            let mut base = LinExpr::term(cone.epigraph, 1.0);
            base.add_expr(&cone.affine, -1.0);
            work.add_row(format!("cone{k}"), &base, super::Relation::Ge, 0.0);
            if cone.scale == 0.0 || cone.terms.is_empty() {
                continue;
            }
            if pool.is_empty() {
                for axis in 0..cone.terms.len() {
                    for sign in [1.0, -1.0] {
                        let mut g = vec![0.0; cone.terms.len()];
                        g[axis] = sign;
                        pool.directions.push(g);
                    }
                }
            }
            for g in &pool.directions {
                add_cut(&mut work, cone, g, k);
            }
        }
        let seeds = pools.iter().map(CutPool::len).collect();
        let first_cut = work.num_rows();
        Ok(Self {
            work,
            base_rows,
            cones,
            seeds,
            pools,
            tangents: Vec::new(),
            first_cut,
            lp: WarmLp::new(),
        })
    }

    /// Changes the right-hand side of row `row` of the original problem.
    pub fn set_rhs(&mut self, row: usize, rhs: f64) {
        assert!(row < self.base_rows, "row {row} is not an original row");
        self.work.set_rhs(row, rhs);
    }

    pub fn set_offset(&mut self, offset: f64) {
        self.work.set_offset(offset);
    }

    pub fn pools(&self) -> &[CutPool] {
        &self.pools
    }

    /// Drops tangent cuts left slack by the last solve once there are more
    /// than `PRUNE_AT` of them.
    fn prune(&mut self) {
        if self.tangents.len() <= PRUNE_AT {
            return;
        }
        let slack = self.lp.slack_rows();
        if slack.len() != self.work.num_rows() {
            return;
        }
        let drop: Vec<bool> = (0..slack.len()).map(|i| i >= self.first_cut && slack[i]).collect();
        self.lp.drop_rows(&drop);
        let keep: Vec<bool> = drop.iter().map(|d| !d).collect();
        self.work.retain_rows(&keep);
        let mut i = self.first_cut;
        self.tangents.retain(|_| {
            i += 1;
            keep[i - 1]
        });
        for (pool, &n) in self.pools.iter_mut().zip(&self.seeds) {
            pool.directions.truncate(n);
        }
        for (k, g) in &self.tangents {
            self.pools[*k].directions.push(g.clone());
        }
    }

    pub fn solve(&mut self, cfg: &SolverConfig) -> Result<Solution> {
        self.prune();
        let mut rounds = 0;
        let mut lp_iterations = 0;
        loop {
            let mut sol = self.lp.solve(&self.work, cfg)?;
            lp_iterations += sol.iterations;
            sol.iterations = lp_iterations;
            sol.row_duals.truncate(self.base_rows);
            if sol.status != Status::Optimal {
                return Ok(sol);
            }

            let mut worst = 0.0f64;
            let mut cuts = Vec::new();
            for (k, cone) in self.cones.iter().enumerate() {
                if cone.scale == 0.0 || cone.terms.is_empty() {
                    continue;
                }
                let t = cone.term_values(&sol.values);
                let n = t.iter().map(|v| v * v).sum::<f64>().sqrt();
                let viol = (cone.scale * n - cone.slack(&sol.values)).max(0.0) / n.max(1.0);
                worst = worst.max(viol);
                if viol > cfg.cone_tol && n > 0.0 {
                    cuts.push((k, t.iter().map(|v| v / n).collect::<Vec<f64>>()));
                }
            }
            sol.cone_residual = worst;
            if cuts.is_empty() {
                return Ok(sol);
            }
            rounds += 1;
            if rounds >= cfg.max_cut_rounds {
                sol.status = Status::CutLimit;
                return Ok(sol);
            }
            for (k, g) in cuts {
                add_cut(&mut self.work, &self.cones[k], &g, k);
                self.pools[k].directions.push(g.clone());
                self.tangents.push((k, g));
            }
        }
    }
}

fn add_cut(work: &mut LinearProblem, cone: &ConeRow, g: &[f64], k: usize) {
    let mut e = LinExpr::term(cone.epigraph, 1.0);
    e.add_expr(&cone.affine, -1.0);
    for (term, &gk) in cone.terms.iter().zip(g) {
        if gk != 0.0 {
            e.add_expr(term, -cone.scale * gk);
        }
    }
    work.add_row(format!("cut{k}"), &e, super::Relation::Ge, 0.0);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve_lp, Relation};
    use approx::assert_abs_diff_eq;

    fn tiny(omega: f64) -> (LinearProblem, ConeRow) {
        let mut p = LinearProblem::new();
        let w = p.add_var("w", 0.0, None).unwrap();
        let y = p.add_var("y", 3.0, None).unwrap();
        p.set_objective(w, 1.0);
        let cone = ConeRow {
            epigraph: w,
            affine: LinExpr::term(y, 1.0),
            terms: vec![LinExpr::term(y, 2.0)],
            scale: omega,
        };
        (p, cone)
    }

    #[test]
    fn closed_form_single_term() {
        let (p, cone) = tiny(1.0);
        let s = solve_cone(&p, &cone, &SolverConfig::default()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert_abs_diff_eq!(s.objective, 9.0, epsilon = 1e-6);
        assert_abs_diff_eq!(s.values[1], 3.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_scale_is_plain_lp() {
        let (p, cone) = tiny(0.0);
        let s = solve_cone(&p, &cone, &SolverConfig::default()).unwrap();
        let mut q = p.clone();
        let mut e = LinExpr::term(cone.epigraph, 1.0);
        e.add_expr(&cone.affine, -1.0);
        q.add_row("base", &e, Relation::Ge, 0.0);
        let lp = solve_lp(&q, &SolverConfig::default()).unwrap();
        assert_eq!(s.objective, lp.objective);
    }

    #[test]
    fn rejects_integers() {
        let (mut p, cone) = tiny(1.0);
        p.set_integer(cone.epigraph, true);
        assert!(matches!(
            solve_cone(&p, &cone, &SolverConfig::default()),
            Err(Error::IntegerCone(_))
        ));
    }

    #[test]
    fn disc_tangent() {
        // min w s.t. w ≥ ‖(u − 3, v − 4)‖ with u, v free in [0, 10]: optimum 0.
        // With x + y = 1 forced away from the center the optimum is a distance.
        let mut p = LinearProblem::new();
        let w = p.add_var("w", 0.0, None).unwrap();
        let u = p.add_var("u", 0.0, Some(10.0)).unwrap();
        let v = p.add_var("v", 0.0, Some(10.0)).unwrap();
        p.set_objective(w, 1.0);
        let mut e = LinExpr::new();
        e.add(u, 1.0).add(v, 1.0);
        p.add_row("line", &e, Relation::Eq, 1.0);
        let mut tu = LinExpr::term(u, 1.0);
        tu.add_constant(-3.0);
        let mut tv = LinExpr::term(v, 1.0);
        tv.add_constant(-4.0);
        let cone = ConeRow {
            epigraph: w,
            affine: LinExpr::new(),
            terms: vec![tu, tv],
            scale: 1.0,
        };
        let s = solve_cone(&p, &cone, &SolverConfig::default()).unwrap();
        // Distance from (3, 4) to the line u + v = 1 is 6/√2.
        let exact = 6.0 / 2f64.sqrt();
        assert!(s.cone_residual <= 1e-6);
        assert!((s.objective - exact).abs() <= 1e-5 * exact);
    }

    #[test]
    fn pooled_cuts_are_reused() {
        let (p, cone) = tiny(1.5);
        let mut pools = vec![CutPool::new()];
        let cfg = SolverConfig::default();
        let first = solve_cones_pooled(&p, std::slice::from_ref(&cone), &mut pools, &cfg).unwrap();
        let size = pools[0].len();
        let second = solve_cones_pooled(&p, std::slice::from_ref(&cone), &mut pools, &cfg).unwrap();
        assert_eq!(pools[0].len(), size);
        assert_abs_diff_eq!(first.objective, second.objective, epsilon = 1e-9);
    }
}
