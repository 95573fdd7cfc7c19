//! Seeded synthetic instances with the shape of a gypsum supply network.
//!
//! Ranges (uniform unless noted):
//! - `q = 31` tons per vehicle, `α = 0.7`;
//! - each supplier has one plant with probability 0.8, otherwise 2 or 3;
//! - supplier 1 is the large contract supplier: `v ∈ [1000, 1500]`, `r` the
//!   smaller of `0.7 v` and half the receiving capacity it can reach; every
//!   other supplier has `r = 0`, `v ∈ [50, 400]`;
//! - destinations: `b̄ ∈ [48, 74]` per ton, `g ∈ [300, 2100]` tons, `l0 = 0`;
//! - each destination is served by 2 to 5 plants, every supplier serves at
//!   least one destination; `t ∈ [15, 35]` per ton;
//! - scenario demand `d̂_j = μ_j (1 + δ_j u)`, `u ∈ [−1, 1]`, with mean
//!   `μ_j ∈ [0.4, 0.9] g_j` and spread `δ_j ∈ [0.3, 0.6]`;
//! - scenario costs from [`sample_costs`] with the given `σ`.
//!
//! Values are rounded to two decimals so written files reload exactly.

use crate::error::{Error, Result};
use crate::rng::{tag, Stream};
use crate::supply::{Arc, Destination, Instance, Meta, Supplier};
use crate::uncertainty::sample_costs;

/// Receiving capacity of the flagged outlier destination.
pub const OUTLIER_CAPACITY: f64 = 232_411.75;

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub suppliers: usize,
    pub destinations: usize,
    pub scenarios: usize,
    pub sigma: f64,
    pub seed: u64,
    pub q: f64,
    pub alpha: f64,
    /// Give the last destination a capacity far above the others.
    pub outlier_capacity: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            suppliers: 24,
            destinations: 15,
            scenarios: 48,
            sigma: 0.2,
            seed: 1,
            q: 31.0,
            alpha: 0.7,
            outlier_capacity: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub instance: Instance,
    pub demands: Vec<Vec<f64>>,
    pub costs: Vec<Vec<f64>>,
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

pub fn generate(cfg: &GenConfig) -> Result<Generated> {
    if cfg.suppliers == 0 || cfg.destinations == 0 {
        return Err(Error::Parameter(
            "need at least one supplier and one destination".into(),
        ));
    }
    let mut rng = Stream::tagged(cfg.seed, tag::GENERATOR);

    let mut pairs: Vec<(String, usize)> = Vec::new();
    let mut suppliers = Vec::with_capacity(cfg.suppliers);
    for k in 0..cfg.suppliers {
        let n_plants = if rng.unit() < 0.8 {
            1
        } else {
            rng.int_range(2, 3) as usize
        };
        let plants: Vec<String> = (1..=n_plants).map(|p| format!("plant{}_{p}", k + 1)).collect();
        for p in &plants {
            pairs.push((p.clone(), k));
        }
        let v = if k == 0 {
            rng.uniform(1000.0, 1500.0)
        } else {
            rng.uniform(50.0, 400.0)
        };
        suppliers.push(Supplier {
            id: format!("suppl{}", k + 1),
            r: 0.0,
            v: round2(v),
            plants,
        });
    }

    let mut destinations = Vec::with_capacity(cfg.destinations);
    let mut mu = Vec::with_capacity(cfg.destinations);
    let mut spread = Vec::with_capacity(cfg.destinations);
    for j in 0..cfg.destinations {
        let b_bar = round2(rng.uniform(48.0, 74.0));
        let g = round2(rng.uniform(300.0, 2100.0));
        mu.push(g * rng.uniform(0.4, 0.9));
        spread.push(rng.uniform(0.3, 0.6));
        destinations.push(Destination {
            id: format!("dest{}", j + 1),
            b_bar,
            g,
            l0: 0.0,
        });
    }
    if cfg.outlier_capacity {
        destinations.last_mut().expect("nonempty").g = OUTLIER_CAPACITY;
    }

    // served[j] holds indices into `pairs`
    let mut served: Vec<Vec<usize>> = vec![Vec::new(); cfg.destinations];
    for k in 0..cfg.suppliers {
        let own: Vec<usize> = (0..pairs.len()).filter(|&i| pairs[i].1 == k).collect();
        let pick = own[rng.int_range(0, own.len() as u64 - 1) as usize];
        served[k % cfg.destinations].push(pick);
    }
    for list in served.iter_mut() {
        let want = (rng.int_range(2, 5) as usize).min(pairs.len());
        while list.len() < want {
            let i = rng.int_range(0, pairs.len() as u64 - 1) as usize;
            if !list.contains(&i) {
                list.push(i);
            }
        }
        list.sort_unstable();
    }
    let mut arcs = Vec::new();
    for (j, list) in served.iter().enumerate() {
        for &i in list {
            arcs.push(Arc {
                plant: pairs[i].0.clone(),
                supplier: suppliers[pairs[i].1].id.clone(),
                destination: destinations[j].id.clone(),
                t: round2(rng.uniform(15.0, 35.0)),
            });
        }
    }

    let reach: f64 = served
        .iter()
        .enumerate()
        .filter(|(_, list)| list.iter().any(|&i| pairs[i].1 == 0))
        .map(|(j, _)| destinations[j].g)
        .sum();
    suppliers[0].r = round2((0.7 * suppliers[0].v).min(0.5 * reach));

    let demands: Vec<Vec<f64>> = (0..cfg.scenarios)
        .map(|_| {
            mu.iter()
                .zip(&spread)
                .map(|(m, d)| round2((m * (1.0 + d * rng.uniform(-1.0, 1.0))).max(0.0)))
                .collect()
        })
        .collect();
    let b_bar: Vec<f64> = destinations.iter().map(|d| d.b_bar).collect();
    let costs = sample_costs(&b_bar, cfg.sigma, cfg.scenarios, cfg.seed)?
        .into_iter()
        .map(|row| row.into_iter().map(round2).collect())
        .collect();

    let instance = Instance::new(
        Meta {
            q: cfg.q,
            alpha: cfg.alpha,
        },
        suppliers,
        destinations,
        arcs,
    )?;
    Ok(Generated {
        instance,
        demands,
        costs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_shape_and_determinism() {
        let cfg = GenConfig::default();
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(
            a.instance.to_json_string().unwrap(),
            b.instance.to_json_string().unwrap()
        );
        assert_eq!(a.demands, b.demands);
        assert_eq!(a.instance.suppliers.len(), 24);
        assert_eq!(a.instance.destinations.len(), 15);
        assert_eq!(a.demands.len(), 48);
        assert_eq!(a.instance.q(), 31.0);
        assert_eq!(a.instance.alpha(), 0.7);
        assert!(a.instance.warnings().is_empty(), "{:?}", a.instance.warnings());
        for k in 0..24 {
            assert!((0..a.instance.num_arcs()).any(|i| a.instance.arc_supplier(i) == k));
        }
    }

    #[test]
    fn outlier_flag_warns() {
        let g = generate(&GenConfig {
            outlier_capacity: true,
            ..GenConfig::default()
        })
        .unwrap();
        assert!(!g.instance.warnings().is_empty());
    }
}
