//! Self-contained optimization engine: bounded revised simplex, best-bound
//! branch and bound, outer approximation for second-order cone rows and
//! least-squares projection onto the unit simplex.
//!
//! Problems are always minimizations. Variables carry a finite lower bound
//! (zero unless set otherwise) and an optional upper bound. Rows are sparse
//! linear expressions compared against a right-hand side.

mod cone;
mod hull;
mod mip;
mod simplex;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

pub use cone::{solve_cone, solve_cones, solve_cones_pooled, ConeSession, CutPool};
pub use hull::{project_simplex_lsq, Projection};
pub use mip::solve_mip;
pub use simplex::solve_lp;
pub(crate) use simplex::WarmLp;

/// Handle to a variable of a [`LinearProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

impl VarId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

/// Sparse affine expression `Σ coeff·var + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn term(var: VarId, coeff: f64) -> Self {
        Self {
            terms: vec![(var, coeff)],
            constant: 0.0,
        }
    }

    pub fn add(&mut self, var: VarId, coeff: f64) -> &mut Self {
        self.terms.push((var, coeff));
        self
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    pub fn add_expr(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        self.terms.extend(other.terms.iter().map(|&(v, c)| (v, c * scale)));
        self.constant += other.constant * scale;
        self
    }

    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * values[v.0]).sum::<f64>()
    }

    /// Merge duplicate variables and drop exact zeros; the result is sorted
    /// by variable index.
    pub fn compact(&self) -> LinExpr {
        let mut acc: BTreeMap<VarId, f64> = BTreeMap::new();
        for &(v, c) in &self.terms {
            *acc.entry(v).or_insert(0.0) += c;
        }
        LinExpr {
            terms: acc.into_iter().filter(|&(_, c)| c != 0.0).collect(),
            constant: self.constant,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: Option<f64>,
    pub integer: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    /// Sorted by variable index, no duplicates.
    pub coeffs: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Amount by which `values` violate the row (zero when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let a = self.activity(values);
        match self.relation {
            Relation::Le => (a - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - a).max(0.0),
            Relation::Eq => (a - self.rhs).abs(),
        }
    }
}

/// A linear (optionally mixed-integer) minimization problem.
#[derive(Debug, Clone, Default)]
pub struct LinearProblem {
    vars: Vec<Variable>,
    by_name: HashMap<String, VarId>,
    objective: Vec<f64>,
    offset: f64,
    rows: Vec<Row>,
}

impl LinearProblem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a continuous variable with bounds `[lower, upper]`.
    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: Option<f64>) -> Result<VarId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::DuplicateVariable(name));
        }
        let id = VarId(self.vars.len());
        self.by_name.insert(name.clone(), id);
        self.vars.push(Variable {
            name,
            lower,
            upper,
            integer: false,
        });
        self.objective.push(0.0);
        Ok(id)
    }

    pub fn set_integer(&mut self, v: VarId, integer: bool) {
        self.vars[v.0].integer = integer;
    }

    pub fn set_bounds(&mut self, v: VarId, lower: f64, upper: Option<f64>) {
        self.vars[v.0].lower = lower;
        self.vars[v.0].upper = upper;
    }

    pub fn set_objective(&mut self, v: VarId, coeff: f64) {
        self.objective[v.0] = coeff;
    }

    pub fn add_objective(&mut self, v: VarId, coeff: f64) {
        self.objective[v.0] += coeff;
    }

    /// Adds `expr` to the objective, constant part included.
    pub fn add_objective_expr(&mut self, expr: &LinExpr, scale: f64) {
        for &(v, c) in &expr.terms {
            self.objective[v.0] += c * scale;
        }
        self.offset += expr.constant * scale;
    }

    pub fn set_offset(&mut self, offset: f64) {
        self.offset = offset;
    }

    /// Adds the row `expr (rel) rhs`. A constant inside `expr` is moved to
    /// the right-hand side. Returns the row index.
    pub fn add_row(&mut self, name: impl Into<String>, expr: &LinExpr, relation: Relation, rhs: f64) -> usize {
        let compact = expr.compact();
        self.rows.push(Row {
            name: name.into(),
            coeffs: compact.terms,
            relation,
            rhs: rhs - compact.constant,
        });
        self.rows.len() - 1
    }

    pub fn set_rhs(&mut self, row: usize, rhs: f64) {
        self.rows[row].rhs = rhs;
    }

    /// Keeps row `i` exactly when `keep[i]`; later rows shift down.
    pub fn retain_rows(&mut self, keep: &[bool]) {
        assert_eq!(keep.len(), self.rows.len(), "one flag per row");
        let mut i = 0;
        self.rows.retain(|_| {
            i += 1;
            keep[i - 1]
        });
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn var(&self, v: VarId) -> &Variable {
        &self.vars[v.0]
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.by_name.get(name).copied()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn has_integers(&self) -> bool {
        self.vars.iter().any(|v| v.integer)
    }

    pub fn evaluate_objective(&self, values: &[f64]) -> f64 {
        self.offset + self.objective.iter().zip(values).map(|(c, x)| c * x).sum::<f64>()
    }

    /// Largest row violation scaled by `1 + |rhs|`, and largest bound violation.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let rows = self
            .rows
            .iter()
            .map(|r| r.violation(values) / (1.0 + r.rhs.abs()))
            .fold(0.0, f64::max);
        let bounds = self
            .vars
            .iter()
            .zip(values)
            .map(|(v, &x)| {
                let lo = (v.lower - x).max(0.0);
                let up = v.upper.map_or(0.0, |u| (x - u).max(0.0));
                lo.max(up)
            })
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    pub fn validate(&self) -> Result<()> {
        for v in &self.vars {
            if !v.lower.is_finite() {
                return Err(Error::InvalidProblem(format!(
                    "variable `{}` needs a finite lower bound",
                    v.name
                )));
            }
            if let Some(u) = v.upper {
                if u.is_nan() || u < v.lower {
                    return Err(Error::InvalidProblem(format!(
                        "variable `{}` has upper bound {} below lower bound {}",
                        v.name, u, v.lower
                    )));
                }
            }
        }
        if let Some(i) = self.objective.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "objective coefficient of `{}` is not finite",
                self.vars[i].name
            )));
        }
        if !self.offset.is_finite() {
            return Err(Error::InvalidProblem("objective offset is not finite".into()));
        }
        for r in &self.rows {
            if !r.rhs.is_finite() {
                return Err(Error::InvalidProblem(format!(
                    "row `{}` has a non-finite right-hand side",
                    r.name
                )));
            }
            for &(v, c) in &r.coeffs {
                if v.0 >= self.vars.len() {
                    return Err(Error::InvalidProblem(format!(
                        "row `{}` references an undeclared variable",
                        r.name
                    )));
                }
                if !c.is_finite() {
                    return Err(Error::InvalidProblem(format!(
                        "row `{}` has a non-finite coefficient",
                        r.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Second-order cone row `epigraph − affine ≥ scale · ‖terms‖₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeRow {
    pub epigraph: VarId,
    pub affine: LinExpr,
    pub terms: Vec<LinExpr>,
    pub scale: f64,
}

impl ConeRow {
    /// `epigraph − affine` at `values`.
    pub fn slack(&self, values: &[f64]) -> f64 {
        values[self.epigraph.0] - self.affine.evaluate(values)
    }

    pub fn term_values(&self, values: &[f64]) -> Vec<f64> {
        self.terms.iter().map(|t| t.evaluate(values)).collect()
    }

    pub fn norm(&self, values: &[f64]) -> f64 {
        self.term_values(values).iter().map(|t| t * t).sum::<f64>().sqrt()
    }

    /// Violation scaled by `max(1, ‖terms‖)`; zero when the row holds.
    pub fn residual(&self, values: &[f64]) -> f64 {
        let n = self.norm(values);
        (self.scale * n - self.slack(values)).max(0.0) / n.max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
    NodeLimit,
    CutLimit,
    /// The basis became numerically singular and could not be recovered.
    Numerical,
}

impl Status {
    pub fn is_optimal(self) -> bool {
        self == Status::Optimal
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: Status,
    /// Objective value including the offset; `+∞` when no point is available.
    pub objective: f64,
    /// Value per variable, indexed by [`VarId`]. Empty when no point is available.
    pub values: Vec<f64>,
    /// Row shadow prices `∂objective/∂rhs` of the final LP (empty for MIP).
    pub row_duals: Vec<f64>,
    /// Absolute gap between incumbent and best bound (branch and bound only).
    pub gap: f64,
    /// Largest scaled cone violation (cone problems only).
    pub cone_residual: f64,
    pub iterations: usize,
}

impl Solution {
    pub(crate) fn without_point(status: Status, iterations: usize) -> Self {
        Self {
            status,
            objective: f64::INFINITY,
            values: Vec::new(),
            row_duals: Vec::new(),
            gap: 0.0,
            cone_residual: 0.0,
            iterations,
        }
    }

    pub fn has_point(&self) -> bool {
        !self.values.is_empty()
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }

    /// Variable values keyed by variable name.
    pub fn named_values(&self, p: &LinearProblem) -> BTreeMap<String, f64> {
        p.vars()
            .iter()
            .zip(&self.values)
            .map(|(var, &x)| (var.name.clone(), x))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub feas_tol: f64,
    /// Reduced-cost threshold for pricing.
    pub opt_tol: f64,
    pub int_tol: f64,
    /// Absolute branch-and-bound gap.
    pub mip_gap: f64,
    /// Relative cone violation accepted by outer approximation.
    pub cone_tol: f64,
    pub max_simplex_iters: usize,
    pub max_bb_nodes: usize,
    pub max_cut_rounds: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            feas_tol: 1e-7,
            opt_tol: 1e-7,
            int_tol: 1e-6,
            mip_gap: 1e-6,
            cone_tol: 1e-6,
            max_simplex_iters: 200_000,
            max_bb_nodes: 100_000,
            max_cut_rounds: 2_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let tols = [
            ("feas_tol", self.feas_tol),
            ("opt_tol", self.opt_tol),
            ("int_tol", self.int_tol),
            ("mip_gap", self.mip_gap),
            ("cone_tol", self.cone_tol),
        ];
        for (name, t) in tols {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Parameter(format!("{name} must be positive, got {t}")));
            }
        }
        Ok(())
    }
}
