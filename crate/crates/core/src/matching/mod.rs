//! Multi-agent matching: each agent type `i` is transported to a common
//! contract space, and the matching value is the sum of the m two-marginal
//! optimal transport values.

mod equivalence;
mod fixed_point;
mod mam;
mod monge;

pub use equivalence::{verify_equivalence, EquivalenceReport, EQUIVALENCE_TOL, RECONSTRUCTION_TOL};
pub use fixed_point::{solve_mam_fixed_point, FixedPointRun, FIXED_POINT_TOL};
pub use mam::{glue_plans, solve_mam_via_mk, MamSolution};
pub use monge::{compose_g, extract_monge_maps, maps_from_plans, reconstruct, MapPair, MongeMap};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, Problem};
use crate::mmot::{solve_product_lp, SolverSettings, TupleIndexer};
use crate::surplus::PreferenceFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanEntry {
    /// Index into the contract measure ν.
    pub z: usize,
    /// Index into the agent measure μ.
    pub x: usize,
    pub mass: f64,
}

/// An optimal plan between the contract measure ν and one agent marginal μ.
#[derive(Debug, Clone, Serialize)]
pub struct TransportPlan {
    pub entries: Vec<PlanEntry>,
    /// `Σ mass · f(x, z)`.
    pub objective: f64,
    pub nu_len: usize,
    pub mu_len: usize,
}

impl TransportPlan {
    /// Mass on each ν atom.
    pub fn nu_marginal(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.nu_len];
        for e in &self.entries {
            w[e.z] += e.mass;
        }
        w
    }

    pub fn mu_marginal(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.mu_len];
        for e in &self.entries {
            w[e.x] += e.mass;
        }
        w
    }
}

/// Exact optimal transport `sup Σ f(x,z) dπ` over plans with marginals ν and μ.
pub fn solve_ot2(
    f: &PreferenceFunction,
    nu: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    settings: &SolverSettings,
) -> Result<TransportPlan> {
    if nu.dim() != mu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            got: nu.dim(),
        });
    }
    let ix = TupleIndexer::new(&[nu.len(), mu.len()])?;
    let values: Vec<f64> = (0..ix.total())
        .map(|t| {
            let k = ix.unflat(t);
            f.value(&mu.points()[k[1]], &nu.points()[k[0]])
        })
        .collect();
    let (support, _) = solve_product_lp(&ix, &[nu.weights(), mu.weights()], &values, settings)?;
    let entries: Vec<PlanEntry> = support
        .into_iter()
        .map(|(t, mass)| {
            let k = ix.unflat(t);
            PlanEntry {
                z: k[0],
                x: k[1],
                mass,
            }
        })
        .collect();
    let objective = entries
        .iter()
        .map(|e| e.mass * values[ix.flat(&[e.z, e.x])])
        .sum();
    Ok(TransportPlan {
        entries,
        objective,
        nu_len: nu.len(),
        mu_len: mu.len(),
    })
}

/// Optimal plans between ν and every agent marginal, solved independently.
pub fn solve_plans(nu: &DiscreteMeasure, problem: &Problem) -> Result<Vec<TransportPlan>> {
    let prefs = problem.oracle().prefs();
    problem
        .marginals()
        .par_iter()
        .zip(prefs.par_iter())
        .map(|(mu, f)| solve_ot2(f, nu, mu, problem.settings()))
        .collect()
}

/// `Σ_i T_{f_i}(ν, μ_i)`.
pub fn mam_objective(nu: &DiscreteMeasure, problem: &Problem) -> Result<f64> {
    Ok(solve_plans(nu, problem)?.iter().map(|p| p.objective).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vector;
    use crate::surplus::SurplusOracle;

    fn uniform01() -> DiscreteMeasure {
        DiscreteMeasure::from_scalars(&[0.0, 1.0], &[0.5, 0.5]).unwrap()
    }

    #[test]
    fn dirac_nu_pairs_with_every_atom() {
        let nu = DiscreteMeasure::dirac(Vector::from_vec(vec![0.3]));
        let mu = DiscreteMeasure::from_scalars(&[0.0, 1.0, 2.0], &[0.2, 0.3, 0.5]).unwrap();
        let f = PreferenceFunction::Quadratic;
        let plan = solve_ot2(&f, &nu, &mu, &SolverSettings::default()).unwrap();
        assert_eq!(plan.entries.len(), 3);
        let expected: f64 = [(0.0, 0.2), (1.0, 0.3), (2.0, 0.5)]
            .iter()
            .map(|(x, w): &(f64, f64)| -w * (x - 0.3).powi(2))
            .sum();
        assert!((plan.objective - expected).abs() < 1e-12);
    }

    #[test]
    fn linear_preference_is_monotone() {
        let plan = solve_ot2(&PreferenceFunction::Linear, &uniform01(), &uniform01(), &SolverSettings::default())
            .unwrap();
        let pairs: Vec<_> = plan.entries.iter().map(|e| (e.z, e.x)).collect();
        assert_eq!(pairs, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn quadratic_same_measure_is_diagonal() {
        let mu = DiscreteMeasure::from_scalars(&[0.0, 0.4, 1.0], &[0.3, 0.3, 0.4]).unwrap();
        let plan = solve_ot2(&PreferenceFunction::Quadratic, &mu, &mu, &SolverSettings::default()).unwrap();
        assert!(plan.entries.iter().all(|e| e.z == e.x));
        assert!(plan.objective.abs() < 1e-15);
    }

    #[test]
    fn mam_zero_when_everything_coincides() {
        let mu = uniform01();
        let p = Problem::new(
            vec![mu.clone(), mu.clone(), mu.clone()],
            SurplusOracle::quadratic(3, 1).unwrap(),
            SolverSettings::default(),
        )
        .unwrap();
        assert!(mam_objective(&mu, &p).unwrap().abs() < 1e-15);
    }

    #[test]
    fn cap_applies_to_two_marginal_plans() {
        let settings = SolverSettings {
            variable_cap: 3,
            ..SolverSettings::default()
        };
        let r = solve_ot2(&PreferenceFunction::Linear, &uniform01(), &uniform01(), &settings);
        assert!(matches!(r, Err(Error::CapExceeded { vars: 4, cap: 3 })));
    }
}
