use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::measures::{pushforward_points, DiscreteMeasure, Problem};
use crate::newton::{self, SmoothObjective};
use crate::surplus::PreferenceFunction;

use super::{solve_plans, TransportPlan};

/// Outer iterations stop once the objective improves by less than this.
pub const FIXED_POINT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct FixedPointRun {
    #[serde(skip)]
    pub nu: DiscreteMeasure,
    pub objective: f64,
    /// Objective after each plan solve, starting from the initial ν.
    pub trace: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
    /// (outer iteration, contract atom) pairs where relocation was skipped.
    pub frozen: Vec<(usize, usize)>,
}

/// Plan-weighted contract objective for one ν atom.
struct Relocation<'a> {
    terms: Vec<(&'a PreferenceFunction, &'a Vector, f64)>,
}

impl SmoothObjective for Relocation<'_> {
    fn value(&self, z: &Vector) -> f64 {
        self.terms.iter().map(|(f, x, w)| w * f.value(x, z)).sum()
    }

    fn gradient(&self, z: &Vector) -> Vector {
        self.terms
            .iter()
            .fold(Vector::zeros(z.len()), |acc, (f, x, w)| acc + f.grad_z(x, z) * *w)
    }

    fn hessian(&self, z: &Vector) -> Matrix {
        self.terms
            .iter()
            .fold(Matrix::zeros(z.len(), z.len()), |acc, (f, x, w)| acc + f.hess_zz(x, z) * *w)
    }
}

/// Alternates optimal plans against the current contract measure with
/// relocation of every contract atom to the maximizer of its plan-weighted
/// objective. A local method: the result is never better than the exact
/// matching value, and may be worse.
pub fn solve_mam_fixed_point(problem: &Problem, init: &DiscreteMeasure, max_outer: usize) -> Result<FixedPointRun> {
    if init.is_empty() {
        return Err(Error::EmptyMarginal);
    }
    if init.dim() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: init.dim(),
        });
    }
    let prefs = problem.oracle().prefs();
    let newton_settings = problem.oracle().newton_settings();
    let mut nu = init.clone();
    let mut plans = solve_plans(&nu, problem)?;
    let mut value = total(&plans);
    let mut trace = vec![value];
    let mut frozen = Vec::new();
    let mut converged = false;
    let mut outer = 0;

    while outer < max_outer {
        outer += 1;
        let mut moved = Vec::with_capacity(nu.len());
        for (k, z) in nu.points().iter().enumerate() {
            let mut terms = Vec::new();
            for (i, plan) in plans.iter().enumerate() {
                for e in plan.entries.iter().filter(|e| e.z == k) {
                    terms.push((&prefs[i], &problem.marginals()[i].points()[e.x], e.mass));
                }
            }
            let obj = Relocation { terms };
            let run = newton::maximize(&obj, z, newton_settings);
            if run.converged && run.value >= obj.value(z) {
                moved.push(run.z);
            } else {
                log::warn!("contract atom {k} not relocated at outer iteration {outer}");
                frozen.push((outer, k));
                moved.push(z.clone());
            }
        }
        nu = pushforward_points(&moved, nu.weights(), |_, z| Ok(z.clone()))?;
        plans = solve_plans(&nu, problem)?;
        let next = total(&plans);
        trace.push(next);
        if next < value - FIXED_POINT_TOL * (1.0 + value.abs()) {
            return Err(Error::Internal(format!(
                "fixed-point objective decreased from {value} to {next}"
            )));
        }
        let improvement = next - value;
        value = value.max(next);
        if improvement < FIXED_POINT_TOL {
            converged = true;
            break;
        }
    }
    Ok(FixedPointRun {
        nu,
        objective: value,
        trace,
        outer_iterations: outer,
        converged,
        frozen,
    })
}

fn total(plans: &[TransportPlan]) -> f64 {
    plans.iter().map(|p| p.objective).sum()
}
