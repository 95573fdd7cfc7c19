//! Least-squares projection onto the convex hull of a point set:
//! `min ‖d − Σ λ_s m_s‖²` over the unit simplex, by away-step Frank-Wolfe.
//!
//! Plain away steps crawl on thin hulls, so every iteration also tries a
//! corrective move toward the least-squares point of the affine hull of the
//! current support (the minor cycle of Wolfe's minimum-norm-point method).

use crate::error::{Error, Result};

const MAX_ITERS: usize = 10_000;
const ARMIJO_C: f64 = 1e-4;
const RESYNC_EVERY: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub lambda: Vec<f64>,
    /// Squared residual `‖d − Σ λ_s m_s‖²`, recomputed at the returned λ.
    pub phi: f64,
    pub iterations: usize,
    /// `‖λ − P(λ − ∇φ)‖` at the returned λ.
    pub pg_norm: f64,
}

pub fn project_simplex_lsq(target: &[f64], columns: &[Vec<f64>], tol: f64) -> Result<Projection> {
    if columns.is_empty() {
        return Err(Error::Parameter("hull projection needs at least one column".into()));
    }
    if let Some(c) = columns.iter().find(|c| c.len() != target.len()) {
        return Err(Error::Parameter(format!(
            "column of length {} does not match target length {}",
            c.len(),
            target.len()
        )));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Parameter(format!("tolerance must be positive, got {tol}")));
    }
    let s_count = columns.len();
    let residual_of = |lambda: &[f64]| -> Vec<f64> {
        let mut r = target.to_vec();
        for (l, c) in lambda.iter().zip(columns) {
            if *l != 0.0 {
                for (ri, ci) in r.iter_mut().zip(c) {
                    *ri -= l * ci;
                }
            }
        }
        r
    };

    let start = (0..s_count)
        .min_by(|&a, &b| {
            sq_dist(target, &columns[a])
                .total_cmp(&sq_dist(target, &columns[b]))
                .then(a.cmp(&b))
        })
        .unwrap_or(0);
    let mut lambda = vec![0.0; s_count];
    lambda[start] = 1.0;
    let mut r = residual_of(&lambda);
    let mut grad = vec![0.0; s_count];
    let mut iterations = 0;

    loop {
        for (g, c) in grad.iter_mut().zip(columns) {
            *g = -2.0 * dot(c, &r);
        }
        let phi = dot(&r, &r);
        if phi == 0.0 || iterations >= MAX_ITERS || pg_norm(&lambda, &grad) <= tol {
            break;
        }

        let fw = argmin(&grad);
        let away = (0..s_count)
            .filter(|&i| lambda[i] > 0.0)
            .max_by(|&a, &b| grad[a].total_cmp(&grad[b]).then(b.cmp(&a)))
            .unwrap_or(fw);
        let g_lambda = dot(&grad, &lambda);
        let fw_gain = g_lambda - grad[fw];
        let away_gain = grad[away] - g_lambda;

        // Direction in data space: Mλ = d − r.
        let (step_dir, gamma_max, use_fw) = if fw_gain >= away_gain || lambda[away] >= 1.0 {
            let md: Vec<f64> = columns[fw]
                .iter()
                .zip(target)
                .zip(&r)
                .map(|((c, d), ri)| c - (d - ri))
                .collect();
            (md, 1.0, true)
        } else {
            let md: Vec<f64> = columns[away]
                .iter()
                .zip(target)
                .zip(&r)
                .map(|((c, d), ri)| (d - ri) - c)
                .collect();
            (md, lambda[away] / (1.0 - lambda[away]), false)
        };
        let gain = if use_fw { fw_gain } else { away_gain };
        if gain <= 0.0 {
            break;
        }
        let denom = dot(&step_dir, &step_dir);
        if denom == 0.0 {
            break;
        }
        let mut gamma = (dot(&r, &step_dir) / denom).min(gamma_max);
        if gamma <= 0.0 {
            break;
        }
        // Armijo backtracking; the exact minimizer passes on the first trial.
        let mut accepted = false;
        for _ in 0..60 {
            let trial: f64 = r
                .iter()
                .zip(&step_dir)
                .map(|(ri, mi)| {
                    let v = ri - gamma * mi;
                    v * v
                })
                .sum();
            if trial <= phi - ARMIJO_C * gamma * gain {
                accepted = true;
                break;
            }
            gamma *= 0.5;
        }
        if !accepted {
            break;
        }

        if use_fw {
            for l in lambda.iter_mut() {
                *l *= 1.0 - gamma;
            }
            lambda[fw] += gamma;
        } else {
            for l in lambda.iter_mut() {
                *l *= 1.0 + gamma;
            }
            if gamma >= gamma_max {
                lambda[away] = 0.0;
            } else {
                lambda[away] -= gamma;
                lambda[away] = lambda[away].max(0.0);
            }
        }
        for (ri, mi) in r.iter_mut().zip(&step_dir) {
            *ri -= gamma * mi;
        }
        iterations += 1;
        if iterations % RESYNC_EVERY == 0 {
            normalize(&mut lambda);
            r = residual_of(&lambda);
        }
        if let Some(better) = corrective(&lambda, columns, target, dot(&r, &r)) {
            lambda = better;
            r = residual_of(&lambda);
        }
    }

    normalize(&mut lambda);
    let r = residual_of(&lambda);
    for (g, c) in grad.iter_mut().zip(columns) {
        *g = -2.0 * dot(c, &r);
    }
    Ok(Projection {
        phi: dot(&r, &r),
        pg_norm: pg_norm(&lambda, &grad),
        lambda,
        iterations,
    })
}

/// Moves from `lambda` toward the minimizer of φ over the affine hull of its
/// support, stopping at the simplex boundary. Returns the new point only if φ
/// decreases.
fn corrective(lambda: &[f64], columns: &[Vec<f64>], target: &[f64], phi: f64) -> Option<Vec<f64>> {
    let support: Vec<usize> = (0..lambda.len()).filter(|&i| lambda[i] > 0.0).collect();
    let k = support.len();
    if k < 2 {
        return None;
    }
    // KKT system of min ‖d − Mμ‖² s.t. Σμ = 1 on the support.
    let n = k + 1;
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    for (p, &i) in support.iter().enumerate() {
        for (q, &j) in support.iter().enumerate().skip(p) {
            let g = dot(&columns[i], &columns[j]);
            a[p * n + q] = g;
            a[q * n + p] = g;
        }
        a[p * n + k] = 1.0;
        a[k * n + p] = 1.0;
        b[p] = dot(&columns[i], target);
    }
    b[k] = 1.0;
    let ridge = 1e-13 * (0..k).map(|p| a[p * n + p]).fold(0.0, f64::max);
    for p in 0..k {
        a[p * n + p] += ridge;
    }
    let mu = solve_dense(a, b, n)?;
    let mut theta = 1.0f64;
    let mut drop = None;
    for (p, &i) in support.iter().enumerate() {
        if mu[p] < 0.0 {
            let t = lambda[i] / (lambda[i] - mu[p]);
            if t < theta {
                theta = t;
                drop = Some(p);
            }
        }
    }
    let mut next = lambda.to_vec();
    for (p, &i) in support.iter().enumerate() {
        next[i] = lambda[i] + theta * (mu[p] - lambda[i]);
        if drop == Some(p) || next[i] < 0.0 {
            next[i] = 0.0;
        }
    }
    normalize(&mut next);
    let mut r = target.to_vec();
    for (l, c) in next.iter().zip(columns) {
        if *l != 0.0 {
            for (ri, ci) in r.iter_mut().zip(c) {
                *ri -= l * ci;
            }
        }
    }
    (dot(&r, &r) < phi).then_some(next)
}

/// Dense Gaussian elimination with partial pivoting on an `n × n` system.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs()))?;
        if a[piv * n + c].abs() <= 1e-14 * scale {
            return None;
        }
        if piv != c {
            for k in 0..n {
                a.swap(c * n + k, piv * n + k);
            }
            b.swap(c, piv);
        }
        for i in c + 1..n {
            let f = a[i * n + c] / a[c * n + c];
            if f != 0.0 {
                for k in c..n {
                    a[i * n + k] -= f * a[c * n + k];
                }
                b[i] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i * n + k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i * n + i];
    }
    Some(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

fn normalize(lambda: &mut [f64]) {
    for l in lambda.iter_mut() {
        if *l < 0.0 {
            *l = 0.0;
        }
    }
    let sum: f64 = lambda.iter().sum();
    for l in lambda.iter_mut() {
        *l /= sum;
    }
}

/// Euclidean projection onto the unit simplex (sort-based).
pub(crate) fn simplex_projection(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

fn pg_norm(lambda: &[f64], grad: &[f64]) -> f64 {
    let shifted: Vec<f64> = lambda.iter().zip(grad).map(|(l, g)| l - g).collect();
    let p = simplex_projection(&shifted);
    sq_dist(lambda, &p).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn vertex_target() {
        let cols = vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 3.0]];
        let p = project_simplex_lsq(&[0.0, 2.0], &cols, 1e-10).unwrap();
        assert_eq!(p.lambda, vec![0.0, 1.0, 0.0]);
        assert_eq!(p.phi, 0.0);
    }

    #[test]
    fn midpoint_and_outside() {
        let cols = vec![vec![30.0], vec![50.0]];
        let mid = project_simplex_lsq(&[40.0], &cols, 1e-10).unwrap();
        assert_abs_diff_eq!(mid.lambda[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(mid.phi, 0.0, epsilon = 1e-12);
        let out = project_simplex_lsq(&[60.0], &cols, 1e-10).unwrap();
        assert_eq!(out.lambda, vec![0.0, 1.0]);
        assert_abs_diff_eq!(out.phi, 100.0, epsilon = 1e-12);
    }

    #[test]
    fn single_column() {
        let p = project_simplex_lsq(&[1.0, 1.0], &[vec![0.0, 0.0]], 1e-10).unwrap();
        assert_eq!(p.lambda, vec![1.0]);
        assert_abs_diff_eq!(p.phi, 2.0);
    }

    #[test]
    fn simplex_projection_basics() {
        assert_eq!(simplex_projection(&[0.2, 0.8]), vec![0.2, 0.8]);
        let p = simplex_projection(&[3.0, 0.0, -1.0]);
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
        let p = simplex_projection(&[0.5, 0.5, 0.5]);
        for x in p {
            assert_abs_diff_eq!(x, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(project_simplex_lsq(&[1.0], &[], 1e-9).is_err());
        assert!(project_simplex_lsq(&[1.0], &[vec![1.0, 2.0]], 1e-9).is_err());
    }
}
