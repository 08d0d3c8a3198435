use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::measures::{DiscreteMeasure, Problem};
use crate::mmot::{CouplingEntry, TIE_TOL};

use super::{solve_plans, TransportPlan};

/// A map between finitely many atoms, read off from a transport plan.
#[derive(Debug, Clone)]
pub struct MongeMap {
    /// Atom indices of the domain measure.
    pub domain_index: Vec<usize>,
    pub domain: Vec<Vector>,
    pub domain_weights: Vec<f64>,
    /// Atom indices of the image measure.
    pub image_index: Vec<usize>,
    pub image: Vec<Vector>,
    /// Share of each domain atom's mass sent to its dominant image.
    pub share: Vec<f64>,
    pub valid: bool,
    /// Domain positions whose dominant share is below `1 - τ_tie`.
    pub impure: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapPair {
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    pub share: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MongeMapJson {
    pub pairs: Vec<MapPair>,
    pub valid: bool,
    pub impure: Vec<usize>,
}

impl MongeMap {
    pub fn len(&self) -> usize {
        self.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domain.is_empty()
    }

    pub fn pairs(&self) -> Vec<MapPair> {
        self.domain
            .iter()
            .zip(&self.image)
            .zip(&self.share)
            .map(|((a, b), &share)| MapPair {
                from: a.iter().copied().collect(),
                to: b.iter().copied().collect(),
                share,
            })
            .collect()
    }

    pub fn to_json(&self) -> MongeMapJson {
        MongeMapJson {
            pairs: self.pairs(),
            valid: self.valid,
            impure: self.impure.clone(),
        }
    }
}

/// Reads `F_i` off each plan: every ν atom goes to the agent atom receiving
/// most of its mass.
pub fn maps_from_plans(nu: &DiscreteMeasure, plans: &[TransportPlan], problem: &Problem) -> Result<Vec<MongeMap>> {
    plans
        .iter()
        .zip(problem.marginals())
        .map(|(plan, mu)| {
            if plan.nu_len != nu.len() || plan.mu_len != mu.len() {
                return Err(Error::MarginalMismatch("plan does not match the measures".into()));
            }
            let mut best = vec![(usize::MAX, 0.0_f64); nu.len()];
            let mut total = vec![0.0; nu.len()];
            for e in &plan.entries {
                total[e.z] += e.mass;
                // Ties go to the lower agent index so the result is order-independent.
                let b = &mut best[e.z];
                if e.mass > b.1 || (e.mass == b.1 && e.x < b.0) {
                    *b = (e.x, e.mass);
                }
            }
            let share: Vec<f64> = best.iter().zip(&total).map(|(b, t)| b.1 / t).collect();
            let impure: Vec<usize> = (0..nu.len()).filter(|&k| share[k] < 1.0 - TIE_TOL).collect();
            let image_index: Vec<usize> = best.iter().map(|b| b.0).collect();
            Ok(MongeMap {
                domain_index: (0..nu.len()).collect(),
                domain: nu.points().to_vec(),
                domain_weights: nu.weights().to_vec(),
                image: image_index.iter().map(|&x| mu.points()[x].clone()).collect(),
                image_index,
                share,
                valid: impure.is_empty(),
                impure,
            })
        })
        .collect()
}

/// Solves the plans against the canonically ordered ν and extracts `F_1,…,F_m`.
pub fn extract_monge_maps(nu: &DiscreteMeasure, problem: &Problem) -> Result<Vec<MongeMap>> {
    let (nu, _) = nu.canonical();
    let plans = solve_plans(&nu, problem)?;
    maps_from_plans(&nu, &plans, problem)
}

/// `G_i = F_i ∘ F_1⁻¹` for `i = 2,…,m`, defined on the image of `F_1`.
pub fn compose_g(maps: &[MongeMap]) -> Result<Vec<MongeMap>> {
    let f1 = maps
        .first()
        .ok_or_else(|| Error::invalid("compose_g needs at least one map"))?;
    let mut order: Vec<usize> = (0..f1.len()).collect();
    order.sort_by_key(|&k| f1.image_index[k]);
    for w in order.windows(2) {
        if f1.image_index[w[0]] == f1.image_index[w[1]] {
            let (first, second) = (w[0].min(w[1]), w[0].max(w[1]));
            return Err(Error::NonInvertibleMap {
                first,
                second,
                image: f1.image_index[w[0]],
            });
        }
    }
    Ok(maps[1..]
        .iter()
        .map(|fi| {
            let share: Vec<f64> = order.iter().map(|&k| fi.share[k].min(f1.share[k])).collect();
            let impure: Vec<usize> = (0..order.len()).filter(|&p| share[p] < 1.0 - TIE_TOL).collect();
            MongeMap {
                domain_index: order.iter().map(|&k| f1.image_index[k]).collect(),
                domain: order.iter().map(|&k| f1.image[k].clone()).collect(),
                domain_weights: order.iter().map(|&k| f1.domain_weights[k]).collect(),
                image_index: order.iter().map(|&k| fi.image_index[k]).collect(),
                image: order.iter().map(|&k| fi.image[k].clone()).collect(),
                share,
                valid: impure.is_empty(),
                impure,
            }
        })
        .collect())
}

/// `(F_1,…,F_m)#ν` as coupling entries over agent atom indices.
pub fn reconstruct(maps: &[MongeMap]) -> Vec<CouplingEntry> {
    let n = maps.first().map_or(0, |f| f.len());
    (0..n)
        .map(|k| CouplingEntry {
            idx: maps.iter().map(|f| f.image_index[k]).collect(),
            mass: maps[0].domain_weights[k],
        })
        .collect()
}
