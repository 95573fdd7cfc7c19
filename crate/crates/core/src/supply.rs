//! Supply-network data and the cost/constraint constructors shared by every
//! formulation.
//!
//! Decision variables per arc `(plant, supplier, destination)`: booked
//! vehicles `x` (first stage) and used vehicles `z ≤ x`; per destination the
//! external purchase `y`, in vehicle loads. Costs:
//!
//! - booking `f1(x) = q Σ t·x`
//! - recourse `f2 = q Σ b·y − α q Σ t·(x − z)` (unused bookings are refunded
//!   at rate `α`, so an idle vehicle nets `(1 − α) q t`)

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{LinExpr, LinearProblem, Relation, VarId};

/// Slack allowed on `z ≤ x` when evaluating costs of given plans.
pub const LINK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    /// Vehicle capacity in tons.
    pub q: f64,
    /// Refund rate on cancelled bookings.
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Supplier {
    pub id: String,
    /// Contractual minimum volume (tons).
    pub r: f64,
    /// Production capacity (tons).
    pub v: f64,
    pub plants: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Destination {
    pub id: String,
    /// Nominal external buying cost per ton.
    pub b_bar: f64,
    /// Receiving capacity (tons).
    pub g: f64,
    /// Initial inventory (tons).
    pub l0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub plant: String,
    pub supplier: String,
    pub destination: String,
    /// Transport cost per ton.
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArcKey {
    pub plant: String,
    pub supplier: String,
    pub destination: String,
}

impl fmt::Display for ArcKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.plant, self.supplier, self.destination)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct InstanceFile {
    meta: Meta,
    suppliers: Vec<Supplier>,
    destinations: Vec<Destination>,
    arcs: Vec<Arc>,
}

/// Validated, indexed supply network. Immutable once built.
#[derive(Debug, Clone)]
pub struct Instance {
    pub meta: Meta,
    pub suppliers: Vec<Supplier>,
    pub destinations: Vec<Destination>,
    pub arcs: Vec<Arc>,
    arc_supplier: Vec<usize>,
    arc_dest: Vec<usize>,
    arc_index: HashMap<ArcKey, usize>,
    dest_index: HashMap<String, usize>,
    warnings: Vec<String>,
}

impl Instance {
    pub fn new(meta: Meta, suppliers: Vec<Supplier>, destinations: Vec<Destination>, arcs: Vec<Arc>) -> Result<Self> {
        let bad = |msg: String| Err(Error::Instance(msg));
        if !(meta.q > 0.0 && meta.q.is_finite()) {
            return bad(format!("q must be positive, got {}", meta.q));
        }
        if !(0.0..=1.0).contains(&meta.alpha) {
            return bad(format!("alpha must lie in [0, 1], got {}", meta.alpha));
        }

        let mut supplier_index = HashMap::new();
        for (k, s) in suppliers.iter().enumerate() {
            if supplier_index.insert(s.id.clone(), k).is_some() {
                return bad(format!("duplicate supplier `{}`", s.id));
            }
            if !(s.r >= 0.0 && s.r.is_finite() && s.v.is_finite()) {
                return bad(format!("supplier `{}` needs finite r ≥ 0 and v", s.id));
            }
            if s.r > s.v {
                return bad(format!("supplier `{}` has r = {} above v = {}", s.id, s.r, s.v));
            }
            let mut seen = HashSet::new();
            for p in &s.plants {
                if !seen.insert(p) {
                    return bad(format!("plant `{p}` listed twice under supplier `{}`", s.id));
                }
            }
        }

        let mut dest_index = HashMap::new();
        for (j, d) in destinations.iter().enumerate() {
            if dest_index.insert(d.id.clone(), j).is_some() {
                return bad(format!("duplicate destination `{}`", d.id));
            }
            if !(d.g >= 0.0 && d.g.is_finite()) {
                return bad(format!("destination `{}` needs finite g ≥ 0", d.id));
            }
            if !(d.l0 >= 0.0 && d.l0.is_finite()) {
                return bad(format!("destination `{}` needs finite l0 ≥ 0", d.id));
            }
            if !(d.b_bar > 0.0 && d.b_bar.is_finite()) {
                return bad(format!("destination `{}` needs a positive buying cost", d.id));
            }
        }

        let mut arc_supplier = Vec::with_capacity(arcs.len());
        let mut arc_dest = Vec::with_capacity(arcs.len());
        let mut arc_index = HashMap::new();
        for (a, arc) in arcs.iter().enumerate() {
            let Some(&k) = supplier_index.get(&arc.supplier) else {
                return bad(format!("arc references unknown supplier `{}`", arc.supplier));
            };
            if !suppliers[k].plants.contains(&arc.plant) {
                return bad(format!(
                    "arc references plant `{}` not listed under supplier `{}`",
                    arc.plant, arc.supplier
                ));
            }
            let Some(&j) = dest_index.get(&arc.destination) else {
                return bad(format!("arc references unknown destination `{}`", arc.destination));
            };
            if !(arc.t >= 0.0 && arc.t.is_finite()) {
                return bad(format!("arc {} has invalid cost {}", key_of(arc), arc.t));
            }
            if arc_index.insert(key_of(arc), a).is_some() {
                return bad(format!("duplicate arc {}", key_of(arc)));
            }
            arc_supplier.push(k);
            arc_dest.push(j);
        }

        let mut inst = Self {
            meta,
            suppliers,
            destinations,
            arcs,
            arc_supplier,
            arc_dest,
            arc_index,
            dest_index,
            warnings: Vec::new(),
        };
        inst.warnings = inst.collect_warnings();
        Ok(inst)
    }

    fn collect_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut g: Vec<f64> = self.destinations.iter().map(|d| d.g).collect();
        g.sort_by(f64::total_cmp);
        if !g.is_empty() {
            let median = g[g.len() / 2];
            for d in &self.destinations {
                if median > 0.0 && d.g > 100.0 * median {
                    out.push(format!(
                        "destination `{}` capacity g = {} exceeds 100× the median {}",
                        d.id, d.g, median
                    ));
                }
            }
        }
        for (j, d) in self.destinations.iter().enumerate() {
            if !self.arc_dest.contains(&j) {
                out.push(format!("destination `{}` has no arcs", d.id));
            }
        }
        for (k, s) in self.suppliers.iter().enumerate() {
            if s.r > 0.0 && !self.arc_supplier.contains(&k) {
                out.push(format!("supplier `{}` has a minimum volume but no arcs", s.id));
            }
        }
        out
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let f: InstanceFile = serde_json::from_str(text)?;
        Self::new(f.meta, f.suppliers, f.destinations, f.arcs)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let f = InstanceFile {
            meta: self.meta,
            suppliers: self.suppliers.clone(),
            destinations: self.destinations.clone(),
            arcs: self.arcs.clone(),
        };
        Ok(serde_json::to_string_pretty(&f)?)
    }

    /// Validation notes that do not prevent use (e.g. capacity outliers).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn q(&self) -> f64 {
        self.meta.q
    }

    pub fn alpha(&self) -> f64 {
        self.meta.alpha
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn num_destinations(&self) -> usize {
        self.destinations.len()
    }

    pub fn arc_key(&self, a: usize) -> ArcKey {
        key_of(&self.arcs[a])
    }

    pub fn arc_destination(&self, a: usize) -> usize {
        self.arc_dest[a]
    }

    pub fn arc_supplier(&self, a: usize) -> usize {
        self.arc_supplier[a]
    }

    pub fn destination_index(&self, id: &str) -> Option<usize> {
        self.dest_index.get(id).copied()
    }

    pub fn destination_ids(&self) -> Vec<String> {
        self.destinations.iter().map(|d| d.id.clone()).collect()
    }

    pub fn b_bar(&self) -> Vec<f64> {
        self.destinations.iter().map(|d| d.b_bar).collect()
    }

    /// Arc-ordered vector from a keyed map; keys not in the instance are an
    /// error, missing keys read as zero.
    pub fn arc_vector(&self, keyed: &BTreeMap<ArcKey, f64>) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.arcs.len()];
        for (k, &v) in keyed {
            let Some(&a) = self.arc_index.get(k) else {
                return Err(Error::Instance(format!("unknown arc {k}")));
            };
            out[a] = v;
        }
        Ok(out)
    }

    pub fn keyed(&self, per_arc: &[f64]) -> BTreeMap<ArcKey, f64> {
        (0..self.arcs.len()).map(|a| (self.arc_key(a), per_arc[a])).collect()
    }

    pub(crate) fn check_arcs(&self, what: &str, v: &[f64]) -> Result<()> {
        if v.len() != self.arcs.len() {
            return Err(Error::Instance(format!(
                "{what} has {} entries for {} arcs",
                v.len(),
                self.arcs.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_dest(&self, what: &str, v: &[f64]) -> Result<()> {
        if v.len() != self.destinations.len() {
            return Err(Error::Instance(format!(
                "{what} has {} entries for {} destinations",
                v.len(),
                self.destinations.len()
            )));
        }
        Ok(())
    }
}

fn key_of(arc: &Arc) -> ArcKey {
    ArcKey {
        plant: arc.plant.clone(),
        supplier: arc.supplier.clone(),
        destination: arc.destination.clone(),
    }
}

/// `f1(x) = q Σ t·x`.
pub fn booking_cost(inst: &Instance, x: &[f64]) -> Result<f64> {
    inst.check_arcs("x", x)?;
    Ok(inst.q() * inst.arcs.iter().zip(x).map(|(a, v)| a.t * v).sum::<f64>())
}

/// `f2(x, y, z; b) = q Σ b·y − α q Σ t·(x − z)`.
pub fn recourse_cost(inst: &Instance, x: &[f64], y: &[f64], z: &[f64], b: &[f64]) -> Result<f64> {
    inst.check_arcs("x", x)?;
    inst.check_arcs("z", z)?;
    inst.check_dest("y", y)?;
    inst.check_dest("b", b)?;
    for (a, (xa, za)) in x.iter().zip(z).enumerate() {
        if *za > xa + LINK_TOL {
            return Err(Error::Instance(format!(
                "z = {za} exceeds x = {xa} on arc {}",
                inst.arc_key(a)
            )));
        }
    }
    let q = inst.q();
    let buy: f64 = b.iter().zip(y).map(|(b, y)| b * y).sum();
    let refund: f64 = inst
        .arcs
        .iter()
        .zip(x.iter().zip(z))
        .map(|(a, (xa, za))| a.t * (xa - za))
        .sum();
    Ok(q * buy - inst.alpha() * q * refund)
}

/// `f = f1 + f2`.
pub fn total_cost(inst: &Instance, x: &[f64], y: &[f64], z: &[f64], b: &[f64]) -> Result<f64> {
    Ok(booking_cost(inst, x)? + recourse_cost(inst, x, y, z, b)?)
}

/// First-stage variables of a problem: bookings given as variables or as
/// fixed values.
#[derive(Debug, Clone, Copy)]
pub enum XSource<'a> {
    Vars(&'a [VarId]),
    Fixed(&'a [f64]),
}

/// Adjustable variables of one realization block.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub z: Vec<VarId>,
    pub y: Vec<VarId>,
    /// Row indices of `z ≤ x` per arc, in arc order.
    pub link_rows: Vec<usize>,
}

/// Adds `x` per arc (integer unless `relax`) and the capacity rows
/// `q Σ_arcs into j x ≤ g_j`.
pub fn add_first_stage(p: &mut LinearProblem, inst: &Instance, relax: bool) -> Result<Vec<VarId>> {
    let x: Vec<VarId> = (0..inst.num_arcs())
        .map(|a| {
            let v = p.add_var(format!("x[{}]", inst.arc_key(a)), 0.0, None)?;
            p.set_integer(v, !relax);
            Ok(v)
        })
        .collect::<Result<_>>()?;
    for (j, d) in inst.destinations.iter().enumerate() {
        let mut e = LinExpr::new();
        for (a, &v) in x.iter().enumerate() {
            if inst.arc_destination(a) == j {
                e.add(v, inst.q());
            }
        }
        p.add_row(format!("C1[{}]", d.id), &e, Relation::Le, d.g);
    }
    Ok(x)
}

/// Adds one `(z, y)` block with the supplier volume rows, the demand rows at
/// `d` and `z ≤ x`. `label` is the scenario number used in variable names.
pub fn add_block(
    p: &mut LinearProblem,
    inst: &Instance,
    x: XSource<'_>,
    d: &[f64],
    label: Option<usize>,
    relax: bool,
) -> Result<Block> {
    inst.check_dest("demand", d)?;
    match x {
        XSource::Vars(v) if v.len() != inst.num_arcs() => {
            return Err(Error::Instance(
                "first-stage variable count differs from arc count".into(),
            ))
        }
        XSource::Fixed(v) => inst.check_arcs("x", v)?,
        _ => {}
    }
    let tag = |body: String| match label {
        Some(s) => format!("{s},{body}"),
        None => body,
    };
    let q = inst.q();
    let z: Vec<VarId> = (0..inst.num_arcs())
        .map(|a| {
            let v = p.add_var(format!("z[{}]", tag(inst.arc_key(a).to_string())), 0.0, None)?;
            p.set_integer(v, !relax);
            Ok(v)
        })
        .collect::<Result<_>>()?;
    let y: Vec<VarId> = inst
        .destinations
        .iter()
        .map(|dst| p.add_var(format!("y[{}]", tag(dst.id.clone())), 0.0, None))
        .collect::<Result<_>>()?;

    for (k, s) in inst.suppliers.iter().enumerate() {
        let mut e = LinExpr::new();
        for (a, &v) in z.iter().enumerate() {
            if inst.arc_supplier(a) == k {
                e.add(v, q);
            }
        }
        if e.terms.is_empty() && s.r <= 0.0 {
            continue;
        }
        if s.r > 0.0 {
            p.add_row(format!("C2lo[{}]", tag(s.id.clone())), &e, Relation::Ge, s.r);
        }
        p.add_row(format!("C2up[{}]", tag(s.id.clone())), &e, Relation::Le, s.v);
    }
    for (j, dst) in inst.destinations.iter().enumerate() {
        let mut e = LinExpr::new();
        for (a, &v) in z.iter().enumerate() {
            if inst.arc_destination(a) == j {
                e.add(v, q);
            }
        }
        e.add(y[j], q);
        p.add_row(format!("C3[{}]", tag(dst.id.clone())), &e, Relation::Ge, d[j] - dst.l0);
    }
    let mut link_rows = Vec::with_capacity(z.len());
    for (a, &za) in z.iter().enumerate() {
        let name = format!("link[{}]", tag(inst.arc_key(a).to_string()));
        let row = match x {
            XSource::Vars(xv) => {
                let mut e = LinExpr::term(za, 1.0);
                e.add(xv[a], -1.0);
                p.add_row(name, &e, Relation::Le, 0.0)
            }
            XSource::Fixed(xv) => p.add_row(name, &LinExpr::term(za, 1.0), Relation::Le, xv[a]),
        };
        link_rows.push(row);
    }
    Ok(Block { z, y, link_rows })
}

/// `f(x, y, z; b)` as an affine expression in the block (and `x` when it is a
/// variable).
pub fn cost_expr(inst: &Instance, x: XSource<'_>, block: &Block, b: &[f64]) -> LinExpr {
    let q = inst.q();
    let alpha = inst.alpha();
    let mut e = LinExpr::new();
    for (a, arc) in inst.arcs.iter().enumerate() {
        let cx = (1.0 - alpha) * q * arc.t;
        match x {
            XSource::Vars(v) => {
                e.add(v[a], cx);
            }
            XSource::Fixed(v) => {
                e.add_constant(cx * v[a]);
            }
        }
        e.add(block.z[a], alpha * q * arc.t);
    }
    for (j, &yj) in block.y.iter().enumerate() {
        e.add(yj, q * b[j]);
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve_lp, SolverConfig, Status};

    pub(crate) fn t1() -> Instance {
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
                b_bar: 8.0,
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

    #[test]
    fn booking_examples() {
        let inst = t1();
        assert_eq!(booking_cost(&inst, &[0.0]).unwrap(), 0.0);
        assert_eq!(booking_cost(&inst, &[3.0]).unwrap(), 60.0);
        assert_eq!(booking_cost(&inst, &[6.0]).unwrap(), 120.0);
        assert!(booking_cost(&inst, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn recourse_examples() {
        let inst = t1();
        assert_eq!(recourse_cost(&inst, &[4.0], &[0.0], &[4.0], &[8.0]).unwrap(), 0.0);
        assert_eq!(recourse_cost(&inst, &[2.0], &[1.0], &[2.0], &[8.0]).unwrap(), 80.0);
        assert_eq!(recourse_cost(&inst, &[5.0], &[0.0], &[3.0], &[8.0]).unwrap(), -20.0);
        assert!(recourse_cost(&inst, &[1.0], &[0.0], &[2.0], &[8.0]).is_err());
    }

    #[test]
    fn keyed_vectors() {
        let inst = t1();
        let mut m = BTreeMap::new();
        m.insert(inst.arc_key(0), 3.0);
        assert_eq!(inst.arc_vector(&m).unwrap(), vec![3.0]);
        m.insert(
            ArcKey {
                plant: "p9".into(),
                supplier: "k1".into(),
                destination: "d1".into(),
            },
            1.0,
        );
        assert!(inst.arc_vector(&m).is_err());
    }

    #[test]
    fn capacity_row_shape() {
        let inst = t1();
        let mut p = LinearProblem::new();
        let x = add_first_stage(&mut p, &inst, true).unwrap();
        let row = &p.rows()[0];
        assert_eq!(row.name, "C1[d1]");
        assert_eq!(row.coeffs, vec![(x[0], 10.0)]);
        assert_eq!(row.relation, Relation::Le);
        assert_eq!(row.rhs, 100.0);
    }

    #[test]
    fn zero_demand_block_is_satisfied_at_zero() {
        let inst = t1();
        let mut p = LinearProblem::new();
        let x = add_first_stage(&mut p, &inst, true).unwrap();
        let block = add_block(&mut p, &inst, XSource::Vars(&x), &[0.0], None, true).unwrap();
        assert!(p.rows().iter().all(|r| !r.name.starts_with("C2lo")));
        let zero = vec![0.0; p.num_vars()];
        assert_eq!(p.max_violation(&zero), 0.0);
        assert_eq!(p.var(block.z[0]).name, "z[p1,k1,d1]");
        assert_eq!(p.var(block.y[0]).name, "y[d1]");
    }

    #[test]
    fn deterministic_t1_values() {
        let inst = t1();
        for (d, want) in [(30.0, 60.0), (50.0, 100.0)] {
            let mut p = LinearProblem::new();
            let x = add_first_stage(&mut p, &inst, true).unwrap();
            let block = add_block(&mut p, &inst, XSource::Vars(&x), &[d], None, true).unwrap();
            p.add_objective_expr(&cost_expr(&inst, XSource::Vars(&x), &block, &[8.0]), 1.0);
            let s = solve_lp(&p, &SolverConfig::default()).unwrap();
            assert_eq!(s.status, Status::Optimal);
            assert!((s.objective - want).abs() < 1e-9);
            let direct = total_cost(
                &inst,
                &[s.value(x[0])],
                &[s.value(block.y[0])],
                &[s.value(block.z[0])],
                &[8.0],
            )
            .unwrap();
            assert!((direct - s.objective).abs() <= 1e-9 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn validation_rejects_and_warns() {
        let base = t1();
        let mut s = base.suppliers.clone();
        s[0].r = 2e6;
        assert!(Instance::new(base.meta, s, base.destinations.clone(), base.arcs.clone()).is_err());
        let mut a = base.arcs.clone();
        a[0].plant = "nowhere".into();
        assert!(Instance::new(base.meta, base.suppliers.clone(), base.destinations.clone(), a).is_err());
        assert!(Instance::new(
            Meta { q: 10.0, alpha: 1.5 },
            base.suppliers.clone(),
            base.destinations.clone(),
            base.arcs.clone()
        )
        .is_err());

        let mut dests = base.destinations.clone();
        for i in 2..5 {
            dests.push(Destination {
                id: format!("d{i}"),
                b_bar: 8.0,
                g: 100.0,
                l0: 0.0,
            });
        }
        dests[3].g = 232_411.75;
        let arcs: Vec<Arc> = dests
            .iter()
            .map(|d| Arc {
                plant: "p1".into(),
                supplier: "k1".into(),
                destination: d.id.clone(),
                t: 2.0,
            })
            .collect();
        let inst = Instance::new(base.meta, base.suppliers.clone(), dests, arcs).unwrap();
        assert_eq!(inst.warnings().len(), 1);
        assert!(inst.warnings()[0].contains("d4"));
    }

    #[test]
    fn shared_plant_names_across_suppliers() {
        let inst = Instance::new(
            Meta { q: 31.0, alpha: 0.7 },
            vec![
                Supplier {
                    id: "s3".into(),
                    r: 0.0,
                    v: 100.0,
                    plants: vec!["plant8".into()],
                },
                Supplier {
                    id: "s15".into(),
                    r: 0.0,
                    v: 100.0,
                    plants: vec!["plant8".into()],
                },
            ],
            vec![Destination {
                id: "d".into(),
                b_bar: 70.0,
                g: 500.0,
                l0: 0.0,
            }],
            vec![
                Arc {
                    plant: "plant8".into(),
                    supplier: "s3".into(),
                    destination: "d".into(),
                    t: 20.0,
                },
                Arc {
                    plant: "plant8".into(),
                    supplier: "s15".into(),
                    destination: "d".into(),
                    t: 25.0,
                },
            ],
        )
        .unwrap();
        assert_ne!(inst.arc_key(0), inst.arc_key(1));
        let json = inst.to_json_string().unwrap();
        let back = Instance::from_json_str(&json).unwrap();
        assert_eq!(back.arcs, inst.arcs);
    }
}
