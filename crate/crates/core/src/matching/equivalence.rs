use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::Result;
use crate::measures::Problem;
use crate::mmot::{graph_check, CouplingEntry};

use super::{compose_g, glue_plans, maps_from_plans, reconstruct, solve_mam_via_mk, solve_plans};

/// Relative tolerance on value gaps, scaled by `1 + |MK|`.
pub const EQUIVALENCE_TOL: f64 = 1e-7;
/// Entrywise tolerance on reconstructed couplings.
pub const RECONSTRUCTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub mk_value: f64,
    pub mam_value: f64,
    pub gap: f64,
    pub glued_value: f64,
    pub glued_gap: f64,
    pub tolerance: f64,
    pub nu_support: usize,
    pub gamma_support: usize,
    pub t_values: Vec<f64>,
    /// Every contract atom is served by a single type of each agent.
    pub ce_pure: bool,
    /// The optimal coupling is a graph over the first marginal.
    pub cmn_pure: bool,
    pub f1_invertible: bool,
    /// Entrywise distance between γ and `(F₁,…,F_m)#ν`, when all maps are valid.
    pub reconstruction_distance: Option<f64>,
    /// Entrywise distance between γ and `(Id,G₂,…,G_m)#μ₁`, when defined.
    pub g_reconstruction_distance: Option<f64>,
    pub passed: bool,
}

impl EquivalenceReport {
    pub fn reconstruction_ok(&self) -> bool {
        [self.reconstruction_distance, self.g_reconstruction_distance]
            .iter()
            .flatten()
            .all(|d| *d <= RECONSTRUCTION_TOL)
    }
}

/// Solves both formulations on one instance and compares them.
pub fn verify_equivalence(problem: &Problem) -> Result<EquivalenceReport> {
    let sol = solve_mam_via_mk(problem)?;
    let mk = sol.gamma.objective();
    let plans = solve_plans(&sol.nu, problem)?;
    let t_values: Vec<f64> = plans.iter().map(|p| p.objective).collect();
    let mam: f64 = t_values.iter().sum();
    let glued = glue_plans(&sol.nu, &plans, problem)?;
    let maps = maps_from_plans(&sol.nu, &plans, problem)?;
    let ce_pure = maps.iter().all(|f| f.valid);
    let cmn_pure = graph_check(&sol.gamma).is_graph;

    let reconstruction_distance = ce_pure.then(|| entry_distance(&reconstruct(&maps), sol.gamma.entries()));
    let g_maps = compose_g(&maps);
    let f1_invertible = g_maps.is_ok();
    let g_reconstruction_distance = match (&g_maps, ce_pure) {
        (Ok(gs), true) => {
            let mu1 = &problem.marginals()[0];
            let entries: Vec<CouplingEntry> = (0..gs.first().map_or(mu1.len(), |g| g.len()))
                .map(|p| {
                    let j = gs.first().map_or(p, |g| g.domain_index[p]);
                    let mut idx = vec![j];
                    idx.extend(gs.iter().map(|g| g.image_index[p]));
                    CouplingEntry {
                        idx,
                        mass: mu1.weights()[j],
                    }
                })
                .collect();
            Some(entry_distance(&entries, sol.gamma.entries()))
        }
        _ => None,
    };

    let scale = 1.0 + mk.abs();
    let gap = (mk - mam).abs();
    let glued_gap = (mk - glued.objective()).abs();
    let tolerance = EQUIVALENCE_TOL * scale;
    Ok(EquivalenceReport {
        mk_value: mk,
        mam_value: mam,
        gap,
        glued_value: glued.objective(),
        glued_gap,
        tolerance,
        nu_support: sol.nu.len(),
        gamma_support: sol.gamma.len(),
        t_values,
        ce_pure,
        cmn_pure,
        f1_invertible,
        reconstruction_distance,
        g_reconstruction_distance,
        passed: gap <= tolerance && glued_gap <= tolerance,
    })
}

/// `max |a - b|` over the union of index tuples.
pub(crate) fn entry_distance(a: &[CouplingEntry], b: &[CouplingEntry]) -> f64 {
    let mut diff: BTreeMap<&[usize], f64> = BTreeMap::new();
    for e in a {
        *diff.entry(&e.idx).or_insert(0.0) += e.mass;
    }
    for e in b {
        *diff.entry(&e.idx).or_insert(0.0) -= e.mass;
    }
    diff.values().map(|v| v.abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vector;
    use crate::measures::DiscreteMeasure;
    use crate::mmot::SolverSettings;
    use crate::surplus::SurplusOracle;

    #[test]
    fn diracs_agree_everywhere() {
        let d = |x: f64, y: f64| DiscreteMeasure::dirac(Vector::from_vec(vec![x, y]));
        let p = Problem::new(
            vec![d(0.0, 1.0), d(1.0, 0.0), d(2.0, 2.0)],
            SurplusOracle::brenier(3, 2).unwrap(),
            SolverSettings::default(),
        )
        .unwrap();
        let b = p.oracle().eval_b(&p.tuple_points(&[0, 0, 0])).unwrap();
        let r = verify_equivalence(&p).unwrap();
        assert!(r.passed);
        for v in [r.mk_value, r.mam_value, r.glued_value] {
            assert!((v - b).abs() < 1e-10);
        }
        assert_eq!(r.reconstruction_distance, Some(0.0));
        assert_eq!(r.g_reconstruction_distance, Some(0.0));
    }

    #[test]
    fn generic_quadratic_instance() {
        let a = DiscreteMeasure::from_scalars(&[0.0, 0.7, 1.3, 2.9], &[0.1, 0.2, 0.3, 0.4]).unwrap();
        let b = DiscreteMeasure::from_scalars(&[-1.0, 0.2, 0.9, 4.1], &[0.4, 0.3, 0.2, 0.1]).unwrap();
        let c = DiscreteMeasure::from_scalars(&[0.4, 1.7, 2.2], &[0.3, 0.3, 0.4]).unwrap();
        let p = Problem::new(
            vec![a, b, c],
            SurplusOracle::quadratic(3, 1).unwrap(),
            SolverSettings::default(),
        )
        .unwrap();
        let r = verify_equivalence(&p).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.reconstruction_ok());
    }
}
