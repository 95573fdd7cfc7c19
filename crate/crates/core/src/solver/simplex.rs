//! Bounded-variable revised simplex with an explicit dense basis inverse.
//!
//! Every row `a·x (rel) b` becomes `a·x + s = b` with a logical variable `s`
//! whose bounds encode the relation. Phase 1 adds one artificial per row whose
//! logical cannot absorb the initial residual and minimizes their sum; phase 2
//! pins the artificials to zero and minimizes the real objective.
//!
//! [`WarmLp`] keeps the final basis so that a problem which only gained rows
//! is re-solved by dual simplex pivots from the old optimum.

// Row and column loops index several parallel arrays at once.
#![allow(clippy::needless_range_loop)]

use crate::error::Result;

use super::{LinearProblem, Relation, Solution, SolverConfig, Status};

const PIVOT_TOL: f64 = 1e-9;
const SINGULAR_TOL: f64 = 1e-11;
const REFACTOR_EVERY: usize = 100;
const DEGENERATE_LIMIT: usize = 50;
const DEGENERATE_STEP: f64 = 1e-12;
/// Dual pivots allowed per warm start (plus `20 m`) before solving cold.
const PERTURBATION: f64 = 1e-6;
/// Relative slack above which a basic logical marks a row as inactive.
const SLACK_TOL: f64 = 1e-6;
const DUAL_BUDGET_BASE: usize = 1_000;

fn bounds_of(p: &LinearProblem) -> (Vec<f64>, Vec<f64>) {
    let lower = p.vars().iter().map(|v| v.lower).collect();
    let upper = p.vars().iter().map(|v| v.upper.unwrap_or(f64::INFINITY)).collect();
    (lower, upper)
}

/// Solves the continuous relaxation of `p` (integrality marks are ignored).
pub fn solve_lp(p: &LinearProblem, cfg: &SolverConfig) -> Result<Solution> {
    p.validate()?;
    cfg.validate()?;
    let (lower, upper) = bounds_of(p);
    Ok(solve_bounded(p, &lower, &upper, cfg))
}

/// Solves `p` with the variable bounds replaced by `lower`/`upper`
/// (`upper = +∞` for none). Callers guarantee `p` is valid.
pub(crate) fn solve_bounded(p: &LinearProblem, lower: &[f64], upper: &[f64], cfg: &SolverConfig) -> Solution {
    if lower.iter().zip(upper).any(|(l, u)| u < l) {
        return Solution::without_point(Status::Infeasible, 0);
    }
    Tableau::new(p, lower, upper, *cfg).run(p)
}

/// LP solver for a problem that only gains rows or changes right-hand sides
/// between calls (cutting-plane loops). Coefficients of rows already seen
/// must stay unchanged.
#[derive(Default, Clone)]
pub(crate) struct WarmLp {
    tab: Option<Tableau>,
}

impl WarmLp {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    pub(crate) fn solve(&mut self, p: &LinearProblem, cfg: &SolverConfig) -> Result<Solution> {
        p.validate()?;
        cfg.validate()?;
        if let Some(t) = self.tab.as_mut() {
            let (lower, upper) = bounds_of(p);
            if t.n_struct == p.num_vars()
                && t.m <= p.num_rows()
                && t.objective == p.objective()
                && t.lower[..t.n_struct] == lower[..]
                && t.upper[..t.n_struct] == upper[..]
            {
                if let Some(sol) = t.resolve(p) {
                    return Ok(sol);
                }
            }
        }
        self.tab = None;
        let (lower, upper) = bounds_of(p);
        if lower.iter().zip(&upper).any(|(l, u)| u < l) {
            return Ok(Solution::without_point(Status::Infeasible, 0));
        }
        let mut t = Tableau::new(p, &lower, &upper, *cfg);
        let sol = t.run(p);
        if sol.status == Status::Optimal {
            self.tab = Some(t);
        }
        Ok(sol)
    }
}

impl WarmLp {
    /// Rows of the last optimal basis whose logical is basic and strictly
    /// away from its bounds; empty without a stored basis.
    pub(crate) fn slack_rows(&self) -> Vec<bool> {
        let Some(t) = self.tab.as_ref() else {
            return Vec::new();
        };
        (0..t.m)
            .map(|i| {
                let j = t.logical[i];
                let gap = (t.x[j] - t.lower[j]).min(t.upper[j] - t.x[j]);
                matches!(t.place[j], Place::Basic(_))
                    && gap > SLACK_TOL * (1.0 + t.rhs[i].abs())
                    && !t
                        .artificials
                        .iter()
                        .any(|&a| t.cols[a][0].0 == i && matches!(t.place[a], Place::Basic(_)))
            })
            .collect()
    }

    /// Forgets the rows marked in `drop`, which must all be flagged by
    /// [`WarmLp::slack_rows`]. The caller removes the same rows from its
    /// problem.
    pub(crate) fn drop_rows(&mut self, drop: &[bool]) {
        if let Some(t) = self.tab.as_mut() {
            t.drop_rows(drop);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Place {
    Basic(usize),
    Lower,
    Upper,
}

enum Step {
    Optimal,
    Unbounded,
    Pivoted,
}

#[derive(Clone)]
struct Tableau {
    cfg: SolverConfig,
    m: usize,
    n_struct: usize,
    objective: Vec<f64>,
    /// Sparse columns: structurals, then logicals and artificials.
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    artificials: Vec<usize>,
    /// Logical column of each row.
    logical: Vec<usize>,
    basis: Vec<usize>,
    place: Vec<Place>,
    x: Vec<f64>,
    binv: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
    degenerate_run: usize,
}

fn logical_bounds(rel: Relation) -> (f64, f64) {
    match rel {
        Relation::Le => (0.0, f64::INFINITY),
        Relation::Ge => (f64::NEG_INFINITY, 0.0),
        Relation::Eq => (0.0, 0.0),
    }
}

impl Tableau {
    fn new(p: &LinearProblem, lower: &[f64], upper: &[f64], cfg: SolverConfig) -> Self {
        let m = p.num_rows();
        let n_struct = p.num_vars();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_struct];
        for (i, row) in p.rows().iter().enumerate() {
            for &(v, c) in &row.coeffs {
                cols[v.0].push((i, c));
            }
        }
        let mut lo = lower.to_vec();
        let mut up = upper.to_vec();
        let mut x: Vec<f64> = lower.to_vec();
        let mut place = vec![Place::Lower; n_struct];

        let rhs: Vec<f64> = p.rows().iter().map(|r| r.rhs).collect();
        let mut residual = rhs.clone();
        for (j, col) in cols.iter().enumerate() {
            for &(i, a) in col {
                residual[i] -= a * x[j];
            }
        }

        let mut basis = vec![0; m];
        let mut logical = Vec::with_capacity(m);
        let mut pending: Vec<(usize, f64, f64)> = Vec::new();
        for (i, row) in p.rows().iter().enumerate() {
            let (sl, su) = logical_bounds(row.relation);
            let j = cols.len();
            cols.push(vec![(i, 1.0)]);
            logical.push(j);
            lo.push(sl);
            up.push(su);
            let r = residual[i];
            if r >= sl && r <= su {
                x.push(r);
                place.push(Place::Basic(i));
                basis[i] = j;
            } else {
                let pl = if row.relation == Relation::Ge {
                    Place::Upper
                } else {
                    Place::Lower
                };
                x.push(0.0);
                place.push(pl);
                let sign = if r >= 0.0 { 1.0 } else { -1.0 };
                pending.push((i, sign, r.abs()));
            }
        }
        let mut artificials = Vec::with_capacity(pending.len());
        for &(i, sign, val) in &pending {
            let j = cols.len();
            cols.push(vec![(i, sign)]);
            lo.push(0.0);
            up.push(f64::INFINITY);
            x.push(val);
            place.push(Place::Basic(i));
            basis[i] = j;
            artificials.push(j);
        }

        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            let (_, a) = cols[basis[i]][0];
            binv[i * m + i] = 1.0 / a;
        }
        let n_total = cols.len();
        Self {
            cfg,
            m,
            n_struct,
            objective: p.objective().to_vec(),
            cols,
            lower: lo,
            upper: up,
            cost: vec![0.0; n_total],
            rhs,
            artificials,
            logical,
            basis,
            place,
            x,
            binv,
            iterations: 0,
            since_refactor: 0,
            degenerate_run: 0,
        }
    }

    fn run(&mut self, p: &LinearProblem) -> Solution {
        if !self.artificials.is_empty() {
            self.cost.iter_mut().for_each(|c| *c = 0.0);
            for &j in &self.artificials {
                self.cost[j] = 1.0;
            }
            match self.iterate() {
                Ok(true) => {}
                // Phase 1 is bounded below by zero, so this is numerical trouble.
                Ok(false) => return Solution::without_point(Status::Numerical, self.iterations),
                Err(status) => return Solution::without_point(status, self.iterations),
            }
            if !self.refactor() {
                return Solution::without_point(Status::Numerical, self.iterations);
            }
            for &j in &self.artificials {
                let (row, _) = self.cols[j][0];
                if self.x[j] / (1.0 + self.rhs[row].abs()) > self.cfg.feas_tol {
                    return Solution::without_point(Status::Infeasible, self.iterations);
                }
            }
            for &j in &self.artificials {
                self.upper[j] = 0.0;
                self.cost[j] = 0.0;
                if !matches!(self.place[j], Place::Basic(_)) {
                    self.x[j] = 0.0;
                    self.place[j] = Place::Lower;
                }
            }
        }

        for j in 0..self.cols.len() {
            self.cost[j] = if j < self.n_struct { self.objective[j] } else { 0.0 };
        }
        self.degenerate_run = 0;
        match self.iterate() {
            Ok(true) => {}
            Ok(false) => return Solution::without_point(Status::Unbounded, self.iterations),
            Err(status) => return Solution::without_point(status, self.iterations),
        }
        if !self.refactor() {
            return Solution::without_point(Status::Numerical, self.iterations);
        }
        self.finish(p)
    }

    /// Takes over changed right-hand sides, appends the rows of `p` beyond
    /// the current ones and restores
    /// feasibility by dual simplex. `None` when the warm start cannot vouch
    /// for an optimal answer.
    fn resolve(&mut self, p: &LinearProblem) -> Option<Solution> {
        self.iterations = 0;
        let mut moved = false;
        for (i, row) in p.rows().iter().take(self.m).enumerate() {
            if row.rhs != self.rhs[i] {
                self.rhs[i] = row.rhs;
                moved = true;
            }
        }
        if moved && !self.refactor() {
            return None;
        }
        self.append_rows(p);
        self.degenerate_run = 0;
        self.perturb_costs();
        let dr = self.dual_iterate();
        self.restore_costs();
        if !matches!(dr, Ok(true)) {
            return None;
        }
        let pr = self.iterate();
        if !matches!(pr, Ok(true)) || !self.refactor() {
            return None;
        }
        let sol = self.finish(p);
        (sol.status == Status::Optimal).then_some(sol)
    }

    /// Nudges every nonbasic reduced cost further into its feasible sign so
    /// that dual ratio tests rarely tie.
    fn perturb_costs(&mut self) {
        let scale = self.objective.iter().fold(1.0f64, |a, c| a.max(c.abs()));
        let mut h: u64 = 0x9e37_79b9_7f4a_7c15;
        for j in 0..self.cols.len() {
            h ^= h << 13;
            h ^= h >> 7;
            h ^= h << 17;
            let dir = match self.place[j] {
                Place::Basic(_) => continue,
                _ if self.upper[j] <= self.lower[j] => continue,
                Place::Lower => 1.0,
                Place::Upper => -1.0,
            };
            let u = 0.5 + 0.5 * (h >> 11) as f64 / (1u64 << 53) as f64;
            self.cost[j] += dir * PERTURBATION * scale * u;
        }
    }

    fn restore_costs(&mut self) {
        for j in 0..self.cols.len() {
            self.cost[j] = if j < self.n_struct { self.objective[j] } else { 0.0 };
        }
    }

    /// New rows enter with their logical basic, so `B⁻¹` grows by
    /// `[[B⁻¹, 0], [−a_B B⁻¹, I]]`.
    fn append_rows(&mut self, p: &LinearProblem) {
        let old = self.m;
        let m = p.num_rows();
        if m == old {
            return;
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..old {
            binv[i * m..i * m + old].copy_from_slice(&self.binv[i * old..(i + 1) * old]);
        }
        for (i, row) in p.rows().iter().enumerate().skip(old) {
            let mut activity = 0.0;
            for &(v, a) in &row.coeffs {
                self.cols[v.0].push((i, a));
                activity += a * self.x[v.0];
                if let Place::Basic(c) = self.place[v.0] {
                    for k in 0..old {
                        binv[i * m + k] -= a * self.binv[c * old + k];
                    }
                }
            }
            binv[i * m + i] = 1.0;
            let (sl, su) = logical_bounds(row.relation);
            let j = self.cols.len();
            self.cols.push(vec![(i, 1.0)]);
            self.logical.push(j);
            self.lower.push(sl);
            self.upper.push(su);
            self.cost.push(0.0);
            self.x.push(row.rhs - activity);
            self.place.push(Place::Basic(i));
            self.basis.push(j);
            self.rhs.push(row.rhs);
        }
        self.binv = binv;
        self.m = m;
    }

    /// Removes rows whose logical is basic. Column `i` of `B⁻¹` is then the
    /// unit vector of the logical's position, so deleting that row of `B⁻¹`
    /// together with column `i` leaves the inverse of the smaller basis.
    fn drop_rows(&mut self, drop: &[bool]) {
        let m = self.m;
        if !drop.iter().any(|&d| d) {
            return;
        }
        let mut row_map = vec![usize::MAX; m];
        let mut kept_rows = 0;
        for i in 0..m {
            if !drop[i] {
                row_map[i] = kept_rows;
                kept_rows += 1;
            }
        }
        let mut col_keep = vec![true; self.cols.len()];
        let mut pos_keep = vec![true; m];
        for i in (0..m).filter(|&i| drop[i]) {
            let j = self.logical[i];
            let Place::Basic(c) = self.place[j] else {
                panic!("dropped row {i} has a nonbasic logical");
            };
            col_keep[j] = false;
            pos_keep[c] = false;
        }
        for &a in &self.artificials {
            if drop[self.cols[a][0].0] {
                col_keep[a] = false;
            }
        }
        let mut col_map = vec![usize::MAX; self.cols.len()];
        let mut n = 0;
        for j in 0..self.cols.len() {
            if col_keep[j] {
                col_map[j] = n;
                n += 1;
            }
        }
        let mut pos_map = vec![usize::MAX; m];
        let mut kept_pos = 0;
        for c in 0..m {
            if pos_keep[c] {
                pos_map[c] = kept_pos;
                kept_pos += 1;
            }
        }

        let mut binv = Vec::with_capacity(kept_rows * kept_rows);
        for c in (0..m).filter(|&c| pos_keep[c]) {
            let row = &self.binv[c * m..(c + 1) * m];
            binv.extend((0..m).filter(|&i| !drop[i]).map(|i| row[i]));
        }
        self.binv = binv;

        let take = |v: &mut Vec<f64>| {
            let mut k = 0;
            v.retain(|_| {
                k += 1;
                col_keep[k - 1]
            });
        };
        take(&mut self.lower);
        take(&mut self.upper);
        take(&mut self.cost);
        take(&mut self.x);
        let mut k = 0;
        self.cols.retain(|_| {
            k += 1;
            col_keep[k - 1]
        });
        for col in &mut self.cols {
            col.retain(|&(i, _)| !drop[i]);
            for e in col.iter_mut() {
                e.0 = row_map[e.0];
            }
        }
        let mut k = 0;
        self.place.retain(|_| {
            k += 1;
            col_keep[k - 1]
        });
        for pl in &mut self.place {
            if let Place::Basic(c) = pl {
                *c = pos_map[*c];
            }
        }
        self.basis = (0..m)
            .filter(|&c| pos_keep[c])
            .map(|c| col_map[self.basis[c]])
            .collect();
        self.artificials = self
            .artificials
            .iter()
            .filter(|&&a| col_keep[a])
            .map(|&a| col_map[a])
            .collect();
        self.logical = (0..m).filter(|&i| !drop[i]).map(|i| col_map[self.logical[i]]).collect();
        let mut k = 0;
        self.rhs.retain(|_| {
            k += 1;
            !drop[k - 1]
        });
        self.m = kept_rows;
    }

    fn finish(&self, p: &LinearProblem) -> Solution {
        let values: Vec<f64> = self.x[..self.n_struct]
            .iter()
            .enumerate()
            .map(|(j, &v)| v.max(self.lower[j]).min(self.upper[j]))
            .collect();
        let violation = p.max_violation(&values);
        let status = if violation > 1e3 * self.cfg.feas_tol {
            Status::Numerical
        } else {
            Status::Optimal
        };
        Solution {
            status,
            objective: p.evaluate_objective(&values),
            values,
            row_duals: self.duals(),
            gap: 0.0,
            cone_residual: 0.0,
            iterations: self.iterations,
        }
    }

    /// Runs simplex iterations on the current cost vector. `Ok(true)` on
    /// optimality, `Ok(false)` on an unbounded ray.
    fn iterate(&mut self) -> std::result::Result<bool, Status> {
        loop {
            if self.iterations >= self.cfg.max_simplex_iters {
                return Err(Status::IterLimit);
            }
            if self.since_refactor >= REFACTOR_EVERY && !self.refactor() {
                return Err(Status::Numerical);
            }
            match self.step() {
                Step::Optimal => return Ok(true),
                Step::Unbounded => return Ok(false),
                Step::Pivoted => self.iterations += 1,
            }
        }
    }

    /// Dual simplex from a dual feasible basis. `Ok(true)` once the basic
    /// values are within bounds, `Ok(false)` when a row proves infeasibility.
    fn dual_iterate(&mut self) -> std::result::Result<bool, Status> {
        let tol = self.cfg.feas_tol;
        let budget = self.cfg.max_simplex_iters.min(DUAL_BUDGET_BASE + 20 * self.m);
        loop {
            if self.iterations >= budget {
                return Err(Status::IterLimit);
            }
            if self.since_refactor >= REFACTOR_EVERY && !self.refactor() {
                return Err(Status::Numerical);
            }
            let bland = self.degenerate_run >= DEGENERATE_LIMIT;
            let mut leave: Option<(usize, f64)> = None;
            let mut worst = 0.0;
            let mut first = usize::MAX;
            for i in 0..self.m {
                let b = self.basis[i];
                let (v, lo, up) = (self.x[b], self.lower[b], self.upper[b]);
                let (excess, target) = if v < lo - tol * (1.0 + lo.abs()) {
                    (lo - v, lo)
                } else if v > up + tol * (1.0 + up.abs()) {
                    (v - up, up)
                } else {
                    continue;
                };
                let better = if bland { b < first } else { excess > worst };
                if better {
                    worst = excess;
                    first = b;
                    leave = Some((i, target));
                }
            }
            let Some((r, target)) = leave else {
                return Ok(true);
            };
            let m = self.m;
            let rho = self.binv[r * m..(r + 1) * m].to_vec();
            let y = self.duals();
            let rising = target > self.x[self.basis[r]];
            let alphas: Vec<f64> = (0..self.cols.len())
                .map(|j| match self.place[j] {
                    Place::Basic(_) => 0.0,
                    _ => self.cols[j].iter().map(|&(i, a)| rho[i] * a).sum(),
                })
                .collect();
            let piv_tol = PIVOT_TOL * alphas.iter().fold(1.0f64, |a, v| a.max(v.abs()));

            let mut candidates: Vec<(usize, f64, f64)> = Vec::new();
            let mut theta_max = f64::INFINITY;
            let mut theta_min = f64::INFINITY;
            for j in 0..self.cols.len() {
                let dir = match self.place[j] {
                    Place::Basic(_) => continue,
                    _ if self.upper[j] <= self.lower[j] => continue,
                    Place::Lower => 1.0,
                    Place::Upper => -1.0,
                };
                let s = -alphas[j] * dir * if rising { 1.0 } else { -1.0 };
                if s <= piv_tol {
                    continue;
                }
                let mut slack = dir * self.reduced_cost(j, &y);
                if slack < 0.0 {
                    // shift away the infeasibility left by earlier Harris steps
                    self.cost[j] -= dir * slack;
                    slack = 0.0;
                }
                let ratio = slack / s;
                theta_max = theta_max.min((slack + self.cfg.opt_tol) / s);
                theta_min = theta_min.min(ratio);
                candidates.push((j, ratio, s));
            }
            let mut enter: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for &(j, ratio, s) in &candidates {
                if bland {
                    if ratio <= theta_min && enter.is_none() {
                        enter = Some((j, ratio));
                    }
                } else if ratio <= theta_max && s > best {
                    best = s;
                    enter = Some((j, ratio));
                }
            }
            let Some((q, ratio)) = enter else {
                return Ok(false);
            };
            if ratio <= DEGENERATE_STEP {
                self.degenerate_run += 1;
            } else {
                self.degenerate_run = 0;
            }

            let alpha = self.column(q);
            let leaving = self.basis[r];
            let delta_q = -(target - self.x[leaving]) / alpha[r];
            for i in 0..m {
                let b = self.basis[i];
                self.x[b] -= alpha[i] * delta_q;
            }
            self.x[q] += delta_q;
            self.x[leaving] = target;
            self.place[leaving] = if target == self.lower[leaving] {
                Place::Lower
            } else {
                Place::Upper
            };
            self.pivot(r, q, &alpha);
            self.iterations += 1;
        }
    }

    /// Row prices `c_B B⁻¹`.
    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for i in 0..m {
            let c = self.cost[self.basis[i]];
            if c != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yj, b) in y.iter_mut().zip(row) {
                    *yj += c * b;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        self.cost[j] - self.cols[j].iter().map(|&(i, a)| y[i] * a).sum::<f64>()
    }

    fn price(&self, y: &[f64], bland: bool) -> Option<(usize, f64)> {
        let tol = self.cfg.opt_tol;
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.cols.len() {
            let dir = match self.place[j] {
                Place::Basic(_) => continue,
                _ if self.upper[j] <= self.lower[j] => continue,
                Place::Lower => 1.0,
                Place::Upper => -1.0,
            };
            let d = self.reduced_cost(j, y);
            let score = -dir * d;
            if score > tol {
                if bland {
                    return Some((j, dir));
                }
                if score > best_score {
                    best_score = score;
                    best = Some((j, dir));
                }
            }
        }
        best
    }

    fn column(&self, q: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for &(k, a) in &self.cols[q] {
            for i in 0..m {
                alpha[i] += self.binv[i * m + k] * a;
            }
        }
        alpha
    }

    fn step(&mut self) -> Step {
        let bland = self.degenerate_run >= DEGENERATE_LIMIT;
        let y = self.duals();
        let Some((q, dir)) = self.price(&y, bland) else {
            return Step::Optimal;
        };
        let alpha = self.column(q);
        let tol = self.cfg.feas_tol;

        let piv_tol = PIVOT_TOL * alpha.iter().fold(1.0f64, |a, v| a.max(v.abs()));

        // Harris pass 1: largest step keeping every basic within relaxed bounds.
        let mut theta_max = f64::INFINITY;
        for i in 0..self.m {
            let b = self.basis[i];
            let delta = -dir * alpha[i];
            if delta < -piv_tol && self.lower[b].is_finite() {
                theta_max = theta_max.min((self.x[b] - self.lower[b] + tol) / -delta);
            } else if delta > piv_tol && self.upper[b].is_finite() {
                theta_max = theta_max.min((self.upper[b] - self.x[b] + tol) / delta);
            }
        }
        // Pass 2: among rows blocking within that step, prefer the largest
        // pivot; under Bland, the lowest index among pivots of similar size.
        let mut blocking: Vec<(usize, f64, f64)> = Vec::new();
        if theta_max.is_finite() {
            for i in 0..self.m {
                let b = self.basis[i];
                let delta = -dir * alpha[i];
                let ratio = if delta < -piv_tol && self.lower[b].is_finite() {
                    (self.x[b] - self.lower[b]) / -delta
                } else if delta > piv_tol && self.upper[b].is_finite() {
                    (self.upper[b] - self.x[b]) / delta
                } else {
                    continue;
                };
                if ratio <= theta_max {
                    blocking.push((i, ratio.max(0.0), delta.abs()));
                }
            }
        }
        let largest = blocking.iter().fold(0.0f64, |a, c| a.max(c.2));
        let leave = if bland {
            // exact ratio ties only, so that the lowest-index rule terminates
            let least = blocking.iter().fold(f64::INFINITY, |a, c| a.min(c.1));
            blocking
                .iter()
                .filter(|c| c.1 <= least + DEGENERATE_STEP)
                .min_by_key(|c| self.basis[c.0])
        } else {
            blocking.iter().find(|c| c.2 == largest)
        }
        .map(|&(i, ratio, _)| (i, ratio));

        let flip = self.upper[q] - self.lower[q];
        let (theta, row) = match leave {
            Some((i, theta)) if theta < flip => (theta, Some(i)),
            _ if flip.is_finite() => (flip, None),
            Some((i, theta)) => (theta, Some(i)),
            None => return Step::Unbounded,
        };

        if theta <= DEGENERATE_STEP {
            self.degenerate_run += 1;
        } else {
            self.degenerate_run = 0;
        }

        for i in 0..self.m {
            let b = self.basis[i];
            self.x[b] -= dir * alpha[i] * theta;
        }
        self.x[q] += dir * theta;

        let Some(r) = row else {
            if dir > 0.0 {
                self.place[q] = Place::Upper;
                self.x[q] = self.upper[q];
            } else {
                self.place[q] = Place::Lower;
                self.x[q] = self.lower[q];
            }
            return Step::Pivoted;
        };

        let leaving = self.basis[r];
        if -dir * alpha[r] < 0.0 {
            self.place[leaving] = Place::Lower;
            self.x[leaving] = self.lower[leaving];
        } else {
            self.place[leaving] = Place::Upper;
            self.x[leaving] = self.upper[leaving];
        }
        self.pivot(r, q, &alpha);
        Step::Pivoted
    }

    /// Makes `q` basic in position `r`; `alpha = B⁻¹ a_q`.
    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64]) {
        self.basis[r] = q;
        self.place[q] = Place::Basic(r);
        let m = self.m;
        let pivot = alpha[r];
        for k in 0..m {
            self.binv[r * m + k] /= pivot;
        }
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (prow, after) = rest.split_at_mut(m);
        for (i, row) in before
            .chunks_mut(m)
            .enumerate()
            .chain(after.chunks_mut(m).enumerate().map(|(i, c)| (i + r + 1, c)))
        {
            let f = alpha[i];
            if f == 0.0 {
                continue;
            }
            for (v, p) in row.iter_mut().zip(prow.iter()) {
                *v -= f * p;
            }
        }
        self.since_refactor += 1;
    }

    /// Recomputes `B⁻¹` and the basic values from the nonbasic ones. Basic
    /// columns with a single entry in an otherwise unclaimed row are inverted
    /// directly; only the remaining block is eliminated densely. Returns false
    /// when the basis is singular.
    fn refactor(&mut self) -> bool {
        let m = self.m;
        self.since_refactor = 0;
        if m == 0 {
            return true;
        }
        let mut owner = vec![usize::MAX; m];
        for (c, &j) in self.basis.iter().enumerate() {
            if let [(i, a)] = self.cols[j][..] {
                if owner[i] == usize::MAX && a.abs() > SINGULAR_TOL {
                    owner[i] = c;
                }
            }
        }
        let mut singleton = vec![false; m];
        for &c in owner.iter().filter(|&&c| c != usize::MAX) {
            singleton[c] = true;
        }
        let dense_pos: Vec<usize> = (0..m).filter(|&c| !singleton[c]).collect();
        let dense_rows: Vec<usize> = (0..m).filter(|&i| owner[i] == usize::MAX).collect();
        let k = dense_pos.len();
        let mut row_slot = vec![usize::MAX; m];
        for (t, &i) in dense_rows.iter().enumerate() {
            row_slot[i] = t;
        }

        let mut block = vec![0.0; k * k];
        // entries of dense columns in singleton rows: (row, dense index, value)
        let mut spill: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for (kc, &c) in dense_pos.iter().enumerate() {
            for &(i, a) in &self.cols[self.basis[c]] {
                if row_slot[i] != usize::MAX {
                    block[row_slot[i] * k + kc] = a;
                } else {
                    spill[i].push((kc, a));
                }
            }
        }
        let Some(inv) = invert_dense(block, k) else {
            return false;
        };

        let mut binv = vec![0.0; m * m];
        for (kc, &c) in dense_pos.iter().enumerate() {
            for (t, &i) in dense_rows.iter().enumerate() {
                binv[c * m + i] = inv[kc * k + t];
            }
        }
        for (s, &c) in owner.iter().enumerate() {
            if c == usize::MAX {
                continue;
            }
            let a_s = self.cols[self.basis[c]][0].1;
            binv[c * m + s] = 1.0 / a_s;
            for &(kc, a) in &spill[s] {
                let f = a / a_s;
                for (t, &i) in dense_rows.iter().enumerate() {
                    binv[c * m + i] -= f * inv[kc * k + t];
                }
            }
        }
        self.binv = binv;

        let mut r = self.rhs.clone();
        for j in 0..self.cols.len() {
            if matches!(self.place[j], Place::Basic(_)) {
                continue;
            }
            let xj = self.x[j];
            if xj != 0.0 {
                for &(i, a) in &self.cols[j] {
                    r[i] -= a * xj;
                }
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            self.x[self.basis[i]] = row.iter().zip(&r).map(|(b, v)| b * v).sum();
        }
        true
    }
}

/// Gauss-Jordan inverse with partial pivoting; `None` when singular.
fn invert_dense(mut a: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for c in 0..n {
        let mut piv = c;
        let mut best = a[c * n + c].abs();
        for i in c + 1..n {
            let v = a[i * n + c].abs();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best < SINGULAR_TOL {
            return None;
        }
        if piv != c {
            for k in 0..n {
                a.swap(c * n + k, piv * n + k);
                inv.swap(c * n + k, piv * n + k);
            }
        }
        let d = a[c * n + c];
        for k in 0..n {
            a[c * n + k] /= d;
            inv[c * n + k] /= d;
        }
        for i in 0..n {
            if i == c {
                continue;
            }
            let f = a[i * n + c];
            if f == 0.0 {
                continue;
            }
            for k in 0..n {
                a[i * n + k] -= f * a[c * n + k];
                inv[i * n + k] -= f * inv[c * n + k];
            }
        }
    }
    Some(inv)
}
