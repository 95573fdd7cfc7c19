//! Best-bound branch and bound over LP relaxations.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::Result;

use super::simplex::{solve_bounded, solve_lp};
use super::{LinearProblem, Solution, SolverConfig, Status};

struct Node {
    bound: f64,
    id: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

// Min-heap on (bound, id): lowest bound first, older nodes first on ties.
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

/// Branches on the most fractional integer variable (lowest index on ties)
/// and always expands the open node with the smallest relaxation bound.
pub fn solve_mip(p: &LinearProblem, cfg: &SolverConfig) -> Result<Solution> {
    if !p.has_integers() {
        return solve_lp(p, cfg);
    }
    p.validate()?;
    cfg.validate()?;

    let integer: Vec<usize> = p
        .vars()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.integer)
        .map(|(j, _)| j)
        .collect();
    let mut lower: Vec<f64> = p.vars().iter().map(|v| v.lower).collect();
    let mut upper: Vec<f64> = p.vars().iter().map(|v| v.upper.unwrap_or(f64::INFINITY)).collect();
    for &j in &integer {
        lower[j] = (lower[j] - cfg.int_tol).ceil();
        upper[j] = (upper[j] + cfg.int_tol).floor();
    }

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        id: 0,
        lower,
        upper,
    });
    let mut next_id = 1;
    let mut incumbent: Option<Solution> = None;
    let mut nodes = 0;
    let mut lp_iterations = 0;

    while let Some(node) = heap.pop() {
        let best = incumbent.as_ref().map_or(f64::INFINITY, |s| s.objective);
        if node.bound >= best - cfg.mip_gap {
            continue;
        }
        if nodes >= cfg.max_bb_nodes {
            heap.push(node);
            break;
        }
        nodes += 1;

        let relax = solve_bounded(p, &node.lower, &node.upper, cfg);
        lp_iterations += relax.iterations;
        match relax.status {
            Status::Optimal => {}
            Status::Infeasible => continue,
            Status::Unbounded if nodes == 1 => {
                return Ok(Solution::without_point(Status::Unbounded, lp_iterations));
            }
            other => {
                if nodes == 1 {
                    return Ok(Solution::without_point(other, lp_iterations));
                }
                log::warn!("branch-and-bound node relaxation ended with {other}; node dropped");
                continue;
            }
        }
        if relax.objective >= best - cfg.mip_gap {
            continue;
        }

        let mut branch: Option<(usize, f64)> = None;
        let mut best_dist = cfg.int_tol;
        for &j in &integer {
            let v = relax.values[j];
            let dist = (v - v.floor()).min(v.ceil() - v);
            if dist > best_dist {
                best_dist = dist;
                branch = Some((j, v));
            }
        }

        match branch {
            None => {
                let mut values = relax.values;
                for &j in &integer {
                    values[j] = values[j].round();
                }
                incumbent = Some(Solution {
                    status: Status::Optimal,
                    objective: p.evaluate_objective(&values),
                    values,
                    row_duals: Vec::new(),
                    gap: 0.0,
                    cone_residual: 0.0,
                    iterations: 0,
                });
            }
            Some((j, v)) => {
                let mut down = Node {
                    bound: relax.objective,
                    id: next_id,
                    lower: node.lower.clone(),
                    upper: node.upper.clone(),
                };
                down.upper[j] = v.floor();
                let mut up = Node {
                    bound: relax.objective,
                    id: next_id + 1,
                    lower: node.lower,
                    upper: node.upper,
                };
                up.lower[j] = v.ceil();
                next_id += 2;
                heap.push(down);
                heap.push(up);
            }
        }
    }

    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let hit_limit = nodes >= cfg.max_bb_nodes && !heap.is_empty();
    match incumbent {
        Some(mut s) => {
            s.iterations = lp_iterations;
            if hit_limit {
                s.status = Status::NodeLimit;
                s.gap = (s.objective - open_bound).max(0.0);
            }
            Ok(s)
        }
        None if hit_limit => Ok(Solution::without_point(Status::NodeLimit, lp_iterations)),
        None => Ok(Solution::without_point(Status::Infeasible, lp_iterations)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{LinExpr, Relation};
    use approx::assert_abs_diff_eq;

    #[test]
    fn rounds_up_to_ceiling() {
        let mut p = LinearProblem::new();
        let x = p.add_var("x", 0.0, None).unwrap();
        p.set_integer(x, true);
        p.set_objective(x, 1.0);
        p.add_row("r", &LinExpr::term(x, 1.0), Relation::Ge, 2.3);
        let s = solve_mip(&p, &SolverConfig::default()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert_eq!(s.value(x), 3.0);
    }

    #[test]
    fn cheaper_item_wins() {
        let mut p = LinearProblem::new();
        let x = p.add_var("x", 0.0, None).unwrap();
        let y = p.add_var("y", 0.0, None).unwrap();
        p.set_integer(x, true);
        p.set_integer(y, true);
        p.set_objective(x, 20.0);
        p.set_objective(y, 40.0);
        let mut e = LinExpr::new();
        e.add(x, 10.0).add(y, 10.0);
        p.add_row("cover", &e, Relation::Ge, 47.0);
        let s = solve_mip(&p, &SolverConfig::default()).unwrap();
        assert_abs_diff_eq!(s.objective, 100.0, epsilon = 1e-9);
        assert_eq!((s.value(x), s.value(y)), (5.0, 0.0));
    }

    #[test]
    fn integral_relaxation_matches_lp() {
        let mut p = LinearProblem::new();
        let x = p.add_var("x", 0.0, Some(4.0)).unwrap();
        p.set_objective(x, -1.0);
        let lp = solve_lp(&p, &SolverConfig::default()).unwrap();
        p.set_integer(x, true);
        let mip = solve_mip(&p, &SolverConfig::default()).unwrap();
        assert_eq!(lp.objective, mip.objective);
        assert_eq!(lp.values, mip.values);
    }

    #[test]
    fn infeasible_integer_window() {
        let mut p = LinearProblem::new();
        let x = p.add_var("x", 0.0, None).unwrap();
        p.set_integer(x, true);
        p.add_row("lo", &LinExpr::term(x, 1.0), Relation::Ge, 1.2);
        p.add_row("hi", &LinExpr::term(x, 1.0), Relation::Le, 1.8);
        let s = solve_mip(&p, &SolverConfig::default()).unwrap();
        assert_eq!(s.status, Status::Infeasible);
    }

    #[test]
    fn node_limit_keeps_incumbent() {
        let mut p = LinearProblem::new();
        let mut e = LinExpr::new();
        let vars: Vec<_> = (0..6)
            .map(|i| {
                let v = p.add_var(format!("x{i}"), 0.0, Some(5.0)).unwrap();
                p.set_integer(v, true);
                p.set_objective(v, -(3.0 + i as f64));
                e.add(v, 2.0 + 1.3 * i as f64);
                v
            })
            .collect();
        p.add_row("knap", &e, Relation::Le, 17.7);
        let cfg = SolverConfig {
            max_bb_nodes: 3,
            ..SolverConfig::default()
        };
        let s = solve_mip(&p, &cfg).unwrap();
        assert!(matches!(s.status, Status::NodeLimit | Status::Optimal));
        if s.status == Status::NodeLimit && s.has_point() {
            assert!(s.gap >= 0.0);
            assert!(vars.iter().all(|&v| s.value(v).fract() == 0.0));
        }
    }
}
