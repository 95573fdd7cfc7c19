//! Brute-force oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use supplyplan::rng::Stream;
use supplyplan::solver::{LinExpr, LinearProblem, Relation};
use supplyplan::supply::{Arc, Destination, Instance, Meta, Supplier};
use supplyplan::uncertainty::ScenarioSet;

/// One supplier, one plant, one destination: `q = 10`, `α = 0.5`, `t = 2`,
/// `g = 100`, no minimum volume.
pub fn t1(b: f64) -> Instance {
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

pub fn t1_scenarios(demands: &[f64], b: f64) -> ScenarioSet {
    ScenarioSet::equiprobable(
        demands.iter().map(|d| vec![*d]).collect(),
        demands.iter().map(|_| vec![b]).collect(),
    )
    .unwrap()
}

const T1_Q: f64 = 10.0;
const T1_ALPHA: f64 = 0.5;
const T1_T: f64 = 2.0;
const Y_STEP: f64 = 0.01;
const Y_MAX: f64 = 10.0;

/// Direct cost formula for the T1 network.
fn t1_cost(x: f64, z: f64, y: f64, b: f64) -> f64 {
    T1_Q * T1_T * x - T1_ALPHA * T1_Q * T1_T * (x - z) + T1_Q * b * y
}

/// Cheapest recourse by enumerating `z ∈ 0..=x` and `y` on a 0.01 grid.
pub fn t1_recourse_oracle(x: u32, d: f64, b: f64) -> f64 {
    let mut best = f64::INFINITY;
    for z in 0..=x {
        let steps = (Y_MAX / Y_STEP).round() as u32;
        for k in 0..=steps {
            let y = f64::from(k) * Y_STEP;
            if T1_Q * (f64::from(z) + y) + 1e-9 >= d {
                best = best.min(t1_cost(f64::from(x), f64::from(z), y, b));
                break;
            }
        }
    }
    best
}

/// Expected-cost minimum over `x ∈ 0..=10`.
pub fn t1_sp_oracle(demands: &[f64], b: f64) -> f64 {
    (0..=10)
        .map(|x| demands.iter().map(|d| t1_recourse_oracle(x, *d, b)).sum::<f64>() / demands.len() as f64)
        .fold(f64::INFINITY, f64::min)
}

pub fn t1_ws_oracle(d: f64, b: f64) -> f64 {
    (0..=10)
        .map(|x| t1_recourse_oracle(x, d, b))
        .fold(f64::INFINITY, f64::min)
}

/// Small bounded problem `min c·x` over rows `a·x (rel) b`, `0 ≤ x ≤ u`.
#[derive(Debug, Clone)]
pub struct SmallLp {
    pub costs: Vec<f64>,
    pub uppers: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Relation, f64)>,
}

impl SmallLp {
    /// Integer data: costs and coefficients in `-5..=5`, rhs in `-10..=20`,
    /// 1 to 4 rows.
    pub fn random(rng: &mut Stream, max_vars: usize, max_upper: u64) -> Self {
        let int = |rng: &mut Stream, lo: i64, hi: i64| (lo + rng.int_range(0, (hi - lo) as u64) as i64) as f64;
        let n = rng.int_range(1, max_vars as u64) as usize;
        let costs = (0..n).map(|_| int(rng, -5, 5)).collect();
        let uppers = (0..n).map(|_| rng.int_range(1, max_upper) as f64).collect();
        let m = rng.int_range(1, 4) as usize;
        let rows = (0..m)
            .map(|_| {
                let a = (0..n).map(|_| int(rng, -5, 5)).collect();
                let rel = match rng.int_range(0, 2) {
                    0 => Relation::Le,
                    1 => Relation::Ge,
                    _ => Relation::Eq,
                };
                (a, rel, int(rng, -10, 20))
            })
            .collect();
        Self { costs, uppers, rows }
    }

    pub fn build(&self, integer: bool) -> LinearProblem {
        let mut p = LinearProblem::new();
        let vars: Vec<_> = self
            .costs
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                let v = p.add_var(format!("x{j}"), 0.0, Some(self.uppers[j])).unwrap();
                p.set_objective(v, c);
                p.set_integer(v, integer);
                v
            })
            .collect();
        for (i, (a, rel, b)) in self.rows.iter().enumerate() {
            let mut e = LinExpr::new();
            for (j, &c) in a.iter().enumerate() {
                e.add(vars[j], c);
            }
            p.add_row(format!("r{i}"), &e, *rel, *b);
        }
        p
    }

    pub fn feasible(&self, x: &[f64], tol: f64) -> bool {
        x.iter().zip(&self.uppers).all(|(&v, &u)| v >= -tol && v <= u + tol)
            && self.rows.iter().all(|(a, rel, b)| {
                let act: f64 = a.iter().zip(x).map(|(c, v)| c * v).sum();
                match rel {
                    Relation::Le => act <= b + tol,
                    Relation::Ge => act >= b - tol,
                    Relation::Eq => (act - b).abs() <= tol,
                }
            })
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.costs.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Minimum over all basic points; the feasible region is a polytope.
    pub fn vertex_oracle(&self) -> Option<f64> {
        let n = self.costs.len();
        let mut planes: Vec<(Vec<f64>, f64)> = self.rows.iter().map(|(a, _, b)| (a.clone(), *b)).collect();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            planes.push((e.clone(), 0.0));
            planes.push((e, self.uppers[j]));
        }
        let mut best: Option<f64> = None;
        let k = planes.len();
        let mut idx: Vec<usize> = (0..n).collect();
        loop {
            let a: Vec<Vec<f64>> = idx.iter().map(|&i| planes[i].0.clone()).collect();
            let b: Vec<f64> = idx.iter().map(|&i| planes[i].1).collect();
            if let Some(x) = solve_dense(a, b) {
                if self.feasible(&x, 1e-9) {
                    let obj = self.value(&x);
                    best = Some(best.map_or(obj, |b: f64| b.min(obj)));
                }
            }
            // next n-combination of 0..k
            let mut i = n;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if idx[i] < k - n + i {
                    idx[i] += 1;
                    for t in i + 1..n {
                        idx[t] = idx[t - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    /// Minimum over every integer point of the bounding box.
    pub fn enumeration_oracle(&self) -> Option<f64> {
        let n = self.costs.len();
        let mut best: Option<f64> = None;
        let mut x = vec![0.0; n];
        loop {
            if self.feasible(&x, 1e-9) {
                let obj = self.value(&x);
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
            let mut j = 0;
            loop {
                if j == n {
                    return best;
                }
                if x[j] < self.uppers[j] {
                    x[j] += 1.0;
                    break;
                }
                x[j] = 0.0;
                j += 1;
            }
        }
    }
}

/// Gaussian elimination with partial pivoting; `None` if singular.
#[allow(clippy::needless_range_loop)]
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() < 1e-10 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for i in c + 1..n {
            let f = a[i][c] / a[c][c];
            for k in c..n {
                a[i][k] -= f * a[c][k];
            }
            b[i] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Demand coverage `l0_j + q(Σ z + y_j) − d_j` per destination.
pub fn coverage(inst: &Instance, z: &[f64], y: &[f64], d: &[f64]) -> Vec<f64> {
    let q = inst.q();
    let mut cov: Vec<f64> = inst.destinations.iter().zip(y).map(|(dst, y)| dst.l0 + q * y).collect();
    for (a, z) in z.iter().enumerate() {
        cov[inst.arc_destination(a)] += q * z;
    }
    cov.iter().zip(d).map(|(c, d)| c - d).collect()
}

/// Largest violation of the supplier volume window `r ≤ q Σ z ≤ v`.
pub fn volume_violation(inst: &Instance, z: &[f64]) -> f64 {
    let q = inst.q();
    let mut used = vec![0.0; inst.suppliers.len()];
    for (a, z) in z.iter().enumerate() {
        used[inst.arc_supplier(a)] += q * z;
    }
    inst.suppliers
        .iter()
        .zip(&used)
        .map(|(s, u)| (s.r - u).max(u - s.v).max(0.0))
        .fold(0.0, f64::max)
}
