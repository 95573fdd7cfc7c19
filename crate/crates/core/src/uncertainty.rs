//! Scenario data, box/ellipsoid parameter estimation and seeded sampling.

use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{tag, Stream};
use crate::supply::Instance;

/// Ordered realizations of demand and buying cost, one row per scenario and
/// one column per destination.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSet {
    pub demands: Vec<Vec<f64>>,
    pub costs: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
}

impl ScenarioSet {
    pub fn new(demands: Vec<Vec<f64>>, costs: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        let s = demands.len();
        if s == 0 {
            return Err(Error::Scenario("scenario set is empty".into()));
        }
        if costs.len() != s || probs.len() != s {
            return Err(Error::Scenario(format!(
                "{} demand rows, {} cost rows and {} probabilities",
                s,
                costs.len(),
                probs.len()
            )));
        }
        let d = demands[0].len();
        for (i, (dr, cr)) in demands.iter().zip(&costs).enumerate() {
            if dr.len() != d || cr.len() != d {
                return Err(Error::Scenario(format!("scenario {} has ragged rows", i + 1)));
            }
            if dr.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Scenario(format!("scenario {} has a negative demand", i + 1)));
            }
            if cr.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::Scenario(format!("scenario {} has a nonpositive cost", i + 1)));
            }
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Scenario("probabilities must be nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Scenario(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { demands, costs, probs })
    }

    pub fn equiprobable(demands: Vec<Vec<f64>>, costs: Vec<Vec<f64>>) -> Result<Self> {
        let s = demands.len();
        Self::new(demands, costs, vec![1.0 / s.max(1) as f64; s])
    }

    pub fn len(&self) -> usize {
        self.demands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demands.is_empty()
    }

    pub fn num_destinations(&self) -> usize {
        self.demands[0].len()
    }

    /// The first `tau` scenarios with renormalized probabilities.
    pub fn prefix(&self, tau: usize) -> Result<ScenarioSet> {
        if tau == 0 || tau > self.len() {
            return Err(Error::Parameter(format!(
                "prefix length {tau} outside 1..={}",
                self.len()
            )));
        }
        let mass: f64 = self.probs[..tau].iter().sum();
        let probs = if mass > 0.0 {
            self.probs[..tau].iter().map(|p| p / mass).collect()
        } else {
            vec![1.0 / tau as f64; tau]
        };
        Ok(ScenarioSet {
            demands: self.demands[..tau].to_vec(),
            costs: self.costs[..tau].to_vec(),
            probs,
        })
    }

    /// The single scenario `s` (0-based) with probability one.
    pub fn single(&self, s: usize) -> ScenarioSet {
        ScenarioSet {
            demands: vec![self.demands[s].clone()],
            costs: vec![self.costs[s].clone()],
            probs: vec![1.0],
        }
    }

    pub fn check_against(&self, inst: &Instance) -> Result<()> {
        if self.num_destinations() != inst.num_destinations() {
            return Err(Error::Scenario(format!(
                "scenarios have {} columns, instance has {} destinations",
                self.num_destinations(),
                inst.num_destinations()
            )));
        }
        Ok(())
    }
}

/// Reads a scenario matrix whose header names destinations; columns are
/// returned in `ids` order.
pub fn read_matrix<R: Read>(reader: R, ids: &[String]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let mut column_of = vec![usize::MAX; ids.len()];
    for (c, h) in header.iter().enumerate() {
        let Some(j) = ids.iter().position(|id| id == h) else {
            return Err(Error::Scenario(format!("unknown destination `{h}` in header")));
        };
        if column_of[j] != usize::MAX {
            return Err(Error::Scenario(format!("destination `{h}` appears twice in header")));
        }
        column_of[j] = c;
    }
    if let Some(j) = column_of.iter().position(|&c| c == usize::MAX) {
        return Err(Error::Scenario(format!("destination `{}` missing from header", ids[j])));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Scenario(format!("row {}: {e}", line + 1)))?;
        if rec.len() != header.len() {
            return Err(Error::Scenario(format!("row {} has {} cells", line + 1, rec.len())));
        }
        let row = column_of
            .iter()
            .map(|&c| {
                rec[c]
                    .parse::<f64>()
                    .map_err(|_| Error::Scenario(format!("row {}: `{}` is not a number", line + 1, &rec[c])))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn load_matrix(path: impl AsRef<Path>, ids: &[String]) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
    read_matrix(f, ids)
}

pub fn write_matrix<W: Write>(writer: W, ids: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ids)?;
    for r in rows {
        w.write_record(r.iter().map(|v| format!("{v:.6}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Loads equiprobable scenarios. Without a cost file, costs are drawn by
/// [`sample_costs`] around the instance's nominal costs.
pub fn load_scenarios(
    inst: &Instance,
    demand_csv: impl AsRef<Path>,
    cost_csv: Option<&Path>,
    sigma: f64,
    seed: u64,
) -> Result<ScenarioSet> {
    let ids = inst.destination_ids();
    let demands = load_matrix(demand_csv, &ids)?;
    let costs = match cost_csv {
        Some(p) => {
            let c = load_matrix(p, &ids)?;
            if c.len() != demands.len() {
                return Err(Error::Scenario(format!(
                    "cost file has {} rows, demand file has {}",
                    c.len(),
                    demands.len()
                )));
            }
            c
        }
        None => sample_costs(&inst.b_bar(), sigma, demands.len(), seed)?,
    };
    ScenarioSet::equiprobable(demands, costs)
}

/// Row-major uniform samples of the box `[lo_j, hi_j]`; a longer run from the
/// same stream extends a shorter one.
pub fn sample_box(lo: &[f64], hi: &[f64], n: usize, stream: &mut Stream) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| lo.iter().zip(hi).map(|(&l, &h)| stream.uniform(l, h)).collect())
        .collect()
}

fn cost_band(b_bar: &[f64], sigma: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(0.0..1.0).contains(&sigma) {
        return Err(Error::Parameter(format!("sigma must lie in [0, 1), got {sigma}")));
    }
    Ok((
        b_bar.iter().map(|b| b - sigma * b).collect(),
        b_bar.iter().map(|b| b + sigma * b).collect(),
    ))
}

/// `S × D` costs uniform on `[b̄_j(1 − σ), b̄_j(1 + σ)]`.
pub fn sample_costs(b_bar: &[f64], sigma: f64, s: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    sample_costs_tagged(b_bar, sigma, s, seed, tag::COSTS)
}

pub(crate) fn sample_costs_tagged(
    b_bar: &[f64],
    sigma: f64,
    s: usize,
    seed: u64,
    stream_tag: u64,
) -> Result<Vec<Vec<f64>>> {
    let (lo, hi) = cost_band(b_bar, sigma)?;
    Ok(sample_box(&lo, &hi, s, &mut Stream::tagged(seed, stream_tag)))
}

/// Nominal values and half-widths of the demand and cost boxes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxParams {
    pub d_nominal: Vec<f64>,
    pub d_dev: Vec<f64>,
    pub b_nominal: Vec<f64>,
    pub b_dev: Vec<f64>,
}

impl BoxParams {
    /// Worst-case demand `d̄ + dev`.
    pub fn demand_corner(&self) -> Vec<f64> {
        self.d_nominal.iter().zip(&self.d_dev).map(|(d, e)| d + e).collect()
    }

    pub fn with_nominal_costs(&self) -> BoxParams {
        BoxParams {
            b_dev: vec![0.0; self.b_dev.len()],
            ..self.clone()
        }
    }

    /// Replaces the cost box by the band `b̄ ± σ b̄`.
    pub fn with_sigma_band(&self, b_bar: &[f64], sigma: f64) -> BoxParams {
        BoxParams {
            b_nominal: b_bar.to_vec(),
            b_dev: b_bar.iter().map(|b| sigma * b).collect(),
            ..self.clone()
        }
    }

    pub fn contains_demand(&self, d: &[f64], tol: f64) -> bool {
        d.iter()
            .zip(self.d_nominal.iter().zip(&self.d_dev))
            .all(|(v, (m, e))| (v - m).abs() <= e + tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipseParams {
    pub omega: f64,
    pub b_dev: Vec<f64>,
}

fn mean_and_dev(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = rows[0].len();
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let dev = (0..d)
        .map(|j| rows.iter().map(|r| (r[j] - mean[j]).abs()).fold(0.0, f64::max))
        .collect();
    (mean, dev)
}

/// Mean and largest absolute deviation over the first `tau` scenarios.
pub fn estimate_box(scens: &ScenarioSet, tau: usize) -> Result<BoxParams> {
    if tau == 0 || tau > scens.len() {
        return Err(Error::Parameter(format!("tau = {tau} outside 1..={}", scens.len())));
    }
    let (d_nominal, d_dev) = mean_and_dev(&scens.demands[..tau]);
    let (b_nominal, b_dev) = mean_and_dev(&scens.costs[..tau]);
    Ok(BoxParams {
        d_nominal,
        d_dev,
        b_nominal,
        b_dev,
    })
}

/// `Ω = sqrt(−2 ln ε)`, so that `exp(−Ω²/2) = ε`.
pub fn omega_for_epsilon(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Parameter(format!("epsilon must lie in (0, 1), got {eps}")));
    }
    Ok((-2.0 * eps.ln()).sqrt())
}

/// Violation probability bound `exp(−Ω²/2)`.
pub fn epsilon_for_omega(omega: f64) -> f64 {
    (-omega * omega / 2.0).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GammaMode {
    /// `γ_j = (max_s d̂_j − d̄_j) / d̄_j`.
    #[default]
    Relative,
    /// `γ_j = max_s d̂_j − d̄_j`, used as a multiplier as written.
    Absolute,
}

/// Spread factors for Monte Carlo demand draws from the first `tau` scenarios.
pub fn estimate_gamma(scens: &ScenarioSet, tau: usize, mode: GammaMode) -> Result<(Vec<f64>, Vec<f64>)> {
    let bp = estimate_box(scens, tau)?;
    let gamma = (0..bp.d_nominal.len())
        .map(|j| {
            let max = scens.demands[..tau]
                .iter()
                .map(|r| r[j])
                .fold(f64::NEG_INFINITY, f64::max);
            let up = max - bp.d_nominal[j];
            match mode {
                GammaMode::Absolute => up,
                GammaMode::Relative if bp.d_nominal[j] > 0.0 => up / bp.d_nominal[j],
                GammaMode::Relative => 0.0,
            }
        })
        .collect();
    Ok((bp.d_nominal, gamma))
}

/// `n × D` demands uniform on `[d̄_j(1 − γ_j), d̄_j(1 + γ_j)]`, lower ends
/// clipped at zero.
pub fn sample_demands_mc(d_bar: &[f64], gamma: &[f64], n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if d_bar.len() != gamma.len() {
        return Err(Error::Parameter("gamma and d_bar lengths differ".into()));
    }
    if let Some(g) = gamma.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
        return Err(Error::Parameter(format!("gamma must be nonnegative, got {g}")));
    }
    let mut lo = Vec::with_capacity(d_bar.len());
    for (j, (d, g)) in d_bar.iter().zip(gamma).enumerate() {
        if *g > 1.0 {
            log::warn!("gamma[{j}] = {g} exceeds 1; clipping the demand interval at zero");
        }
        lo.push((d - g * d).max(0.0));
    }
    let hi: Vec<f64> = d_bar.iter().zip(gamma).map(|(d, g)| d + g * d).collect();
    Ok(sample_box(
        &lo,
        &hi,
        n,
        &mut Stream::tagged(seed, tag::MONTE_CARLO_DEMAND),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("d{i}")).collect()
    }

    #[test]
    fn reads_small_file() {
        let m = read_matrix("d1\n30\n50\n".as_bytes(), &ids(1)).unwrap();
        assert_eq!(m, vec![vec![30.0], vec![50.0]]);
        let s = ScenarioSet::equiprobable(m.clone(), m).unwrap();
        assert_eq!(s.probs, vec![0.5, 0.5]);
    }

    #[test]
    fn reorders_columns_and_rejects_bad_files() {
        let m = read_matrix("d2,d1\n1,2\n".as_bytes(), &ids(2)).unwrap();
        assert_eq!(m, vec![vec![2.0, 1.0]]);
        assert!(read_matrix("dx\n1\n".as_bytes(), &ids(1)).is_err());
        assert!(read_matrix("d1\n1\n".as_bytes(), &ids(2)).is_err());
        assert!(read_matrix("d1,d2\n1\n".as_bytes(), &ids(2)).is_err());
        assert!(read_matrix("d1\nabc\n".as_bytes(), &ids(1)).is_err());
    }

    #[test]
    fn cost_sampling() {
        let zero = sample_costs(&[72.61, 50.0], 0.0, 4, 1).unwrap();
        assert!(zero.iter().all(|r| r == &vec![72.61, 50.0]));
        let s = sample_costs(&[72.61], 0.2, 500, 9).unwrap();
        assert!(s.iter().all(|r| r[0] >= 58.088 - 1e-12 && r[0] <= 87.132 + 1e-12));
        assert_eq!(s, sample_costs(&[72.61], 0.2, 500, 9).unwrap());
        assert!(sample_costs(&[1.0], 1.0, 1, 0).is_err());
    }

    #[test]
    fn box_estimation() {
        let demands = vec![vec![10.0], vec![14.0], vec![12.0]];
        let s = ScenarioSet::equiprobable(demands.clone(), demands).unwrap();
        let b = estimate_box(&s, 3).unwrap();
        assert_eq!(b.d_nominal, vec![12.0]);
        assert_eq!(b.d_dev, vec![2.0]);
        let b1 = estimate_box(&s, 1).unwrap();
        assert_eq!((b1.d_nominal[0], b1.d_dev[0]), (10.0, 0.0));
        assert!(estimate_box(&s, 0).is_err());
        assert!(estimate_box(&s, 4).is_err());
    }

    #[test]
    fn omega_relation() {
        assert!((omega_for_epsilon((-0.5f64).exp()).unwrap() - 1.0).abs() < 1e-15);
        assert!((omega_for_epsilon(0.1).unwrap() - 100f64.ln().sqrt()).abs() < 1e-15);
        assert!((omega_for_epsilon(0.1).unwrap() - 2.14597).abs() < 1e-5);
        assert!(epsilon_for_omega(3.873) <= 5.6e-4);
        assert!(omega_for_epsilon(0.0).is_err());
        assert!(omega_for_epsilon(1.0).is_err());
    }

    #[test]
    fn monte_carlo_demands() {
        let flat = sample_demands_mc(&[5.0, 7.0], &[0.0, 0.0], 3, 1).unwrap();
        assert!(flat.iter().all(|r| r == &vec![5.0, 7.0]));
        let a = sample_demands_mc(&[100.0], &[1.5], 200, 4).unwrap();
        assert!(a.iter().all(|r| r[0] >= 0.0 && r[0] <= 250.0));
        assert_eq!(a, sample_demands_mc(&[100.0], &[1.5], 200, 4).unwrap());
        assert_eq!(sample_demands_mc(&[100.0], &[0.3], 2000, 1).unwrap().len(), 2000);
    }

    #[test]
    fn prefix_renormalizes() {
        let d = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]];
        let s = ScenarioSet::new(d.clone(), d, vec![0.1, 0.3, 0.2, 0.4]).unwrap();
        let p = s.prefix(2).unwrap();
        assert!((p.probs[0] - 0.25).abs() < 1e-15);
        assert!((p.probs[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn sampling_is_prefix_stable() {
        let short = sample_box(&[0.0, 1.0], &[1.0, 2.0], 5, &mut Stream::new(3));
        let long = sample_box(&[0.0, 1.0], &[1.0, 2.0], 9, &mut Stream::new(3));
        assert_eq!(short[..], long[..5]);
    }

    #[test]
    fn gamma_modes() {
        let d = vec![vec![80.0], vec![120.0]];
        let s = ScenarioSet::equiprobable(d.clone(), d).unwrap();
        let (mean, rel) = estimate_gamma(&s, 2, GammaMode::Relative).unwrap();
        assert_eq!(mean, vec![100.0]);
        assert!((rel[0] - 0.2).abs() < 1e-15);
        let (_, abs) = estimate_gamma(&s, 2, GammaMode::Absolute).unwrap();
        assert_eq!(abs, vec![20.0]);
    }
}
