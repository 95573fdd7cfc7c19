//! Adjustable recourse for a demand inside the scenario hull.
//!
//! The new demand is written as a convex combination `d = Σ λ_s d̂^s` of the
//! scenario demands, and the rule takes `y = Σ λ_s y^s`, `z = Σ λ_s z^s` from
//! the scenario-hull robust solution.

use crate::error::{Error, Result};
use crate::solver::{project_simplex_lsq, Projection};
use crate::supply::Instance;

use super::BlockValues;

/// Largest squared residual `‖Σλ d̂ − d‖²` still treated as "inside the hull".
pub fn phi_zero_tol(d: &[f64]) -> f64 {
    1e-6 * (d.iter().map(|v| v * v).sum::<f64>() + 1.0)
}

/// Weights and blocks of the rule at demand `d`. `hull` holds the scenario
/// demands that generated `blocks`. Fails with [`Error::PhiPositive`] when
/// `d` lies outside their convex hull.
pub fn recover_adjustable_m5(
    inst: &Instance,
    hull: &[Vec<f64>],
    blocks: &[BlockValues],
    d: &[f64],
) -> Result<(BlockValues, Projection)> {
    inst.check_dest("demand", d)?;
    if hull.len() != blocks.len() || hull.is_empty() {
        return Err(Error::Parameter(format!(
            "{} hull points for {} recourse blocks",
            hull.len(),
            blocks.len()
        )));
    }
    let tol = phi_zero_tol(d);
    let proj = project_simplex_lsq(d, hull, 1e-6 * tol)?;
    if proj.phi > tol {
        return Err(Error::PhiPositive { phi: proj.phi, tol });
    }
    let mut out = BlockValues {
        z: vec![0.0; inst.num_arcs()],
        y: vec![0.0; inst.num_destinations()],
    };
    for (lam, b) in proj.lambda.iter().zip(blocks) {
        if *lam == 0.0 {
            continue;
        }
        for (o, v) in out.z.iter_mut().zip(&b.z) {
            *o += lam * v;
        }
        for (o, v) in out.y.iter_mut().zip(&b.y) {
            *o += lam * v;
        }
    }
    repair_demand(inst, &mut out, d);
    Ok((out, proj))
}

/// Covers any demand shortfall `d_j − l0_j − q(Σ z + y_j)` left by the
/// combination with extra spot purchases; returns the largest shortfall.
pub fn repair_demand(inst: &Instance, block: &mut BlockValues, d: &[f64]) -> f64 {
    let q = inst.q();
    let mut covered: Vec<f64> = block.y.iter().map(|y| q * y).collect();
    for (a, z) in block.z.iter().enumerate() {
        covered[inst.arc_destination(a)] += q * z;
    }
    let mut worst: f64 = 0.0;
    for (j, dst) in inst.destinations.iter().enumerate() {
        let deficit = d[j] - dst.l0 - covered[j];
        if deficit > 0.0 {
            block.y[j] += deficit / q;
            worst = worst.max(deficit);
        }
    }
    worst
}
