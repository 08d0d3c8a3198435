use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::measures::{pushforward_points, DiscreteMeasure, Problem};
use crate::mmot::{solve_mk_exact_with_table, Coupling, CouplingEntry, SolverMeta, SurplusTable};

use super::TransportPlan;

#[derive(Debug, Clone)]
pub struct MamSolution {
    /// Optimal contract distribution `z̄#γ`.
    pub nu: DiscreteMeasure,
    pub gamma: Coupling,
    pub table: SurplusTable,
}

/// Solves the multi-marginal problem exactly and pushes the optimal coupling
/// forward under the contract map `z̄`.
pub fn solve_mam_via_mk(problem: &Problem) -> Result<MamSolution> {
    let table = SurplusTable::compute(problem)?;
    let gamma = solve_mk_exact_with_table(problem, &table)?;
    let zs: Vec<Vector> = gamma.entries().iter().map(|e| table.zbar(&e.idx).clone()).collect();
    let ws: Vec<f64> = gamma.entries().iter().map(|e| e.mass).collect();
    let nu = pushforward_points(&zs, &ws, |_, z| Ok(z.clone()))?;
    Ok(MamSolution { nu, gamma, table })
}

/// Glues m plans sharing the contract measure ν into a coupling of the agent
/// marginals: at each contract atom the conditionals are combined independently.
pub fn glue_plans(nu: &DiscreteMeasure, plans: &[TransportPlan], problem: &Problem) -> Result<Coupling> {
    if plans.len() != problem.m() {
        return Err(Error::invalid(format!(
            "expected {} plans, got {}",
            problem.m(),
            plans.len()
        )));
    }
    let tol = problem.settings().feasibility_tol;
    for (i, plan) in plans.iter().enumerate() {
        if plan.nu_len != nu.len() {
            return Err(Error::MarginalMismatch(format!(
                "plan {i} is indexed over {} contract atoms, expected {}",
                plan.nu_len,
                nu.len()
            )));
        }
        let dev = plan
            .nu_marginal()
            .iter()
            .zip(nu.weights())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if dev > tol {
            return Err(Error::MarginalMismatch(format!(
                "plan {i} deviates from the contract measure by {dev:e}"
            )));
        }
    }

    // Conditional distributions x ↦ π_i(z_k, x) / ν_k per contract atom.
    let mut conditionals: Vec<Vec<Vec<(usize, f64)>>> = vec![vec![Vec::new(); plans.len()]; nu.len()];
    for (i, plan) in plans.iter().enumerate() {
        for e in &plan.entries {
            conditionals[e.z][i].push((e.x, e.mass / nu.weights()[e.z]));
        }
    }
    let mut entries: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for (k, conds) in conditionals.iter().enumerate() {
        let mut partial: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), nu.weights()[k])];
        for cond in conds {
            partial = partial
                .iter()
                .flat_map(|(idx, w)| {
                    cond.iter().map(move |&(x, p)| {
                        let mut next = idx.clone();
                        next.push(x);
                        (next, w * p)
                    })
                })
                .collect();
        }
        for (idx, w) in partial {
            *entries.entry(idx).or_insert(0.0) += w;
        }
    }
    let entries = entries
        .into_iter()
        .map(|(idx, mass)| CouplingEntry { idx, mass })
        .collect();
    let meta = SolverMeta {
        method: "glued".into(),
        ..SolverMeta::default()
    };
    Coupling::with_surplus(problem, entries, meta)
}
