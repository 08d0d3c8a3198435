use crate::error::{Error, Result};
use crate::lp::{self, EqualityLp, LpOptions};
use crate::measures::Problem;

use super::{check_total_mass, Coupling, CouplingEntry, SolverMeta, SolverSettings, SurplusTable, TupleIndexer};

/// Solves the multi-marginal problem exactly by the simplex method on the
/// product of supports.
pub fn solve_mk_exact(problem: &Problem) -> Result<Coupling> {
    let table = SurplusTable::compute(problem)?;
    solve_mk_exact_with_table(problem, &table)
}

pub fn solve_mk_exact_with_table(problem: &Problem, table: &SurplusTable) -> Result<Coupling> {
    let ix = table.indexer();
    let weights: Vec<&[f64]> = problem.marginals().iter().map(|m| m.weights()).collect();
    let settings = problem.settings();
    let (support, pivots) = solve_product_lp(ix, &weights, table.values(), settings)?;
    let entries: Vec<CouplingEntry> = support
        .into_iter()
        .map(|(flat, mass)| CouplingEntry {
            idx: ix.unflat(flat),
            mass,
        })
        .collect();
    let objective = entries.iter().map(|e| e.mass * table.value(&e.idx)).sum();
    let meta = SolverMeta {
        method: "exact".into(),
        pivots: Some(pivots),
        ..SolverMeta::default()
    };
    let mut coupling = Coupling::new(
        problem.marginals_arc(),
        entries,
        objective,
        meta,
        10.0 * settings.feasibility_tol,
    )?;
    coupling.meta.marginal_violation = Some(coupling.max_marginal_violation());
    check_total_mass(&coupling)?;
    log::debug!(
        "exact solve: {} variables, {pivots} pivots, objective {objective}",
        ix.total()
    );
    Ok(coupling)
}

/// Maximizes `Σ values[t] γ_t` over couplings of the given weight vectors,
/// where `t` runs over the flat product index. Returns the positive entries
/// and the pivot count.
pub(crate) fn solve_product_lp(
    ix: &TupleIndexer,
    weights: &[&[f64]],
    values: &[f64],
    settings: &SolverSettings,
) -> Result<(Vec<(usize, f64)>, usize)> {
    let sizes = ix.sizes();
    let nvars = ix.total();
    if nvars > settings.variable_cap {
        return Err(Error::CapExceeded {
            vars: nvars,
            cap: settings.variable_cap,
        });
    }

    // One row per atom; the last atom of every marginal after the first is
    // implied by total mass and dropped.
    let mut row_of: Vec<Vec<Option<usize>>> = Vec::with_capacity(sizes.len());
    let mut b = Vec::new();
    for (i, &n) in sizes.iter().enumerate() {
        let keep = if i == 0 { n } else { n - 1 };
        let rows = (0..n)
            .map(|k| {
                (k < keep).then(|| {
                    b.push(weights[i][k]);
                    b.len() - 1
                })
            })
            .collect();
        row_of.push(rows);
    }
    let mut a = vec![vec![0.0; nvars]; b.len()];
    for flat in 0..nvars {
        for (i, k) in ix.unflat(flat).into_iter().enumerate() {
            if let Some(r) = row_of[i][k] {
                a[r][flat] = 1.0;
            }
        }
    }
    let lp_problem = EqualityLp {
        a,
        b,
        c: values.to_vec(),
    };
    let opts = LpOptions {
        rule: settings.pivot,
        feasibility_tol: settings.feasibility_tol,
        optimality_tol: settings.optimality_tol,
        ..LpOptions::default()
    };
    let sol = lp::solve(&lp_problem, &opts).map_err(|e| match e {
        Error::Infeasible(r) => Error::Internal(format!("normalized marginals gave an infeasible LP (residual {r:e})")),
        other => other,
    })?;
    let support = sol
        .x
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(flat, &v)| (flat, v))
        .collect();
    Ok((support, sol.pivots))
}
