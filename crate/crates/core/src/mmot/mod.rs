//! The multi-marginal Kantorovich problem over discrete marginals.

mod diagnostics;
mod entropic;
mod exact;
mod table;

pub use diagnostics::{
    graph_check, spacelike_diagnostic, swap_monotonicity_check, AtomGraphInfo, MongeReport,
    SpacelikeReport, SwapReport, SwapViolation, LOCALITY_FRACTION, SPACE_TOL, SWAP_TOL,
};
pub use entropic::{solve_mk_entropic, solve_mk_entropic_with_table, LOG_DOMAIN_EPS};
pub use exact::{solve_mk_exact, solve_mk_exact_with_table};
pub(crate) use exact::solve_product_lp;
pub use table::{SurplusTable, TupleIndexer};

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::lp::PivotRule;
use crate::measures::{DiscreteMeasure, Problem, MASS_TOL};

/// Mass share below which a split is treated as LP noise.
pub const TIE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub pivot: PivotRule,
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub entropic_eps: f64,
    pub entropic_max_iters: usize,
    pub entropic_tol: f64,
    /// Largest number of LP variables (product of support sizes).
    pub variable_cap: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            pivot: PivotRule::Bland,
            feasibility_tol: 1e-9,
            optimality_tol: 1e-10,
            entropic_eps: 1e-3,
            entropic_max_iters: 500_000,
            entropic_tol: 1e-8,
            variable_cap: 20_000,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.feasibility_tol,
            self.optimality_tol,
            self.entropic_eps,
            self.entropic_tol,
        ];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("solver tolerances and epsilon must be positive"));
        }
        if self.variable_cap == 0 || self.entropic_max_iters == 0 {
            return Err(Error::invalid("variable cap and iteration limit must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingEntry {
    pub idx: Vec<usize>,
    pub mass: f64,
}

/// Solver metadata carried alongside a coupling.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverMeta {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pivots: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regularized_objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_domain: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub marginal_violation: Option<f64>,
}

/// A sparse plan on the product of the marginals' supports.
#[derive(Debug, Clone)]
pub struct Coupling {
    entries: Vec<CouplingEntry>,
    marginals: Arc<[DiscreteMeasure]>,
    objective: f64,
    meta: SolverMeta,
}

impl Coupling {
    /// Validates indices and masses and checks every marginal within `marginal_tol`.
    /// Duplicate index tuples are merged; entries are sorted by index.
    pub fn new(
        marginals: Arc<[DiscreteMeasure]>,
        entries: Vec<CouplingEntry>,
        objective: f64,
        meta: SolverMeta,
        marginal_tol: f64,
    ) -> Result<Self> {
        let m = marginals.len();
        let mut merged: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for e in entries {
            if e.idx.len() != m {
                return Err(Error::invalid(format!(
                    "coupling entry has {} indices, expected {m}",
                    e.idx.len()
                )));
            }
            for (i, &k) in e.idx.iter().enumerate() {
                if k >= marginals[i].len() {
                    return Err(Error::IndexOutOfRange {
                        index: k,
                        len: marginals[i].len(),
                    });
                }
            }
            if !(e.mass >= 0.0) || !e.mass.is_finite() {
                return Err(Error::invalid(format!("invalid mass {}", e.mass)));
            }
            if e.mass > 0.0 {
                *merged.entry(e.idx).or_insert(0.0) += e.mass;
            }
        }
        if merged.is_empty() {
            return Err(Error::invalid("coupling has no mass"));
        }
        let coupling = Self {
            entries: merged
                .into_iter()
                .map(|(idx, mass)| CouplingEntry { idx, mass })
                .collect(),
            marginals,
            objective,
            meta,
        };
        let viol = coupling.max_marginal_violation();
        if viol > marginal_tol {
            return Err(Error::MarginalMismatch(format!(
                "coupling marginals deviate by {viol:e} (tolerance {marginal_tol:e})"
            )));
        }
        Ok(coupling)
    }

    /// Builds a coupling on `problem`'s marginals and evaluates its objective with the oracle.
    pub fn with_surplus(problem: &Problem, entries: Vec<CouplingEntry>, meta: SolverMeta) -> Result<Self> {
        let mut c = Self::new(
            problem.marginals_arc(),
            entries,
            0.0,
            meta,
            problem.settings().feasibility_tol,
        )?;
        c.objective = c.evaluate(problem)?;
        Ok(c)
    }

    /// `Σ mass · b(tuple)` evaluated with the problem's oracle.
    pub fn evaluate(&self, problem: &Problem) -> Result<f64> {
        let mut total = 0.0;
        for e in &self.entries {
            let b = problem
                .oracle()
                .eval_b(&problem.tuple_points(&e.idx))
                .map_err(|err| Error::SurplusFailure {
                    tuple: e.idx.clone(),
                    msg: err.to_string(),
                })?;
            total += e.mass * b;
        }
        Ok(total)
    }

    pub fn entries(&self) -> &[CouplingEntry] {
        &self.entries
    }

    pub fn marginals(&self) -> &[DiscreteMeasure] {
        &self.marginals
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn meta(&self) -> &SolverMeta {
        &self.meta
    }

    pub fn m(&self) -> usize {
        self.marginals.len()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.mass).sum()
    }

    pub fn tuple_points(&self, idx: &[usize]) -> Vec<Vector> {
        idx.iter()
            .zip(self.marginals.iter())
            .map(|(&k, mu)| mu.points()[k].clone())
            .collect()
    }

    /// Mass of the coupling on each atom of marginal `i`.
    pub fn marginal_weights(&self, i: usize) -> Result<Vec<f64>> {
        if i >= self.m() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.m(),
            });
        }
        let mut w = vec![0.0; self.marginals[i].len()];
        for e in &self.entries {
            w[e.idx[i]] += e.mass;
        }
        Ok(w)
    }

    /// The `i`-th marginal of the plan as a measure (atoms without mass are dropped).
    pub fn marginal(&self, i: usize) -> Result<DiscreteMeasure> {
        let w = self.marginal_weights(i)?;
        let mu = &self.marginals[i];
        let (pts, ws): (Vec<_>, Vec<_>) = mu
            .points()
            .iter()
            .cloned()
            .zip(w)
            .filter(|(_, w)| *w > 0.0)
            .unzip();
        Ok(DiscreteMeasure::from_parts_unchecked(pts, ws, mu.dim()))
    }

    /// Largest per-atom deviation of any marginal from its target.
    pub fn max_marginal_violation(&self) -> f64 {
        (0..self.m())
            .map(|i| {
                let w = self.marginal_weights(i).expect("in range");
                w.iter()
                    .zip(self.marginals[i].weights())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Entrywise `max |self - other|` over the union of supports.
    pub fn distance(&self, other: &Coupling) -> f64 {
        let mut map: BTreeMap<&[usize], f64> = BTreeMap::new();
        for e in &self.entries {
            *map.entry(&e.idx).or_insert(0.0) += e.mass;
        }
        for e in &other.entries {
            *map.entry(&e.idx).or_insert(0.0) -= e.mass;
        }
        map.values().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> CouplingJson {
        CouplingJson {
            entries: self.entries.clone(),
            objective: self.objective,
            total_mass: self.total_mass(),
            solver: self.meta.clone(),
        }
    }
}

/// Serialized coupling: `{ "entries": [ { "idx": [...], "mass": ... } ], "objective": ..., "solver": {...} }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingJson {
    pub entries: Vec<CouplingEntry>,
    pub objective: f64,
    pub total_mass: f64,
    pub solver: SolverMeta,
}

pub(crate) fn check_total_mass(c: &Coupling) -> Result<()> {
    let t = c.total_mass();
    if (t - 1.0).abs() > MASS_TOL.max(c.max_marginal_violation()) {
        return Err(Error::Internal(format!("coupling total mass {t} != 1")));
    }
    Ok(())
}
