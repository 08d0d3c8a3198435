use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::surplus::SurplusOracle;

use super::{Coupling, TIE_TOL};

/// Slack allowed before a two-point swap counts as an improvement.
pub const SWAP_TOL: f64 = 1e-8;
/// Fraction of the first marginal's diameter within which tuples are compared.
pub const LOCALITY_FRACTION: f64 = 0.2;
pub const SPACE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct SwapViolation {
    pub s: Vec<usize>,
    pub t: Vec<usize>,
    /// `b(s') + b(t') - b(s) - b(t)` for the swapped pair.
    pub gain: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SwapReport {
    pub coordinate: usize,
    pub pairs_checked: usize,
    pub violations: Vec<SwapViolation>,
    pub worst_gain: f64,
}

impl SwapReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Exchanges the `i`-th coordinate between every pair of support tuples and
/// reports pairs where the exchange raises total surplus by more than [`SWAP_TOL`].
pub fn swap_monotonicity_check(coupling: &Coupling, oracle: &SurplusOracle, i: usize) -> Result<SwapReport> {
    if i >= coupling.m() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: coupling.m(),
        });
    }
    let mut cache: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut b = |idx: &Vec<usize>| -> Result<f64> {
        if let Some(v) = cache.get(idx) {
            return Ok(*v);
        }
        let v = oracle
            .eval_b(&coupling.tuple_points(idx))
            .map_err(|e| Error::SurplusFailure {
                tuple: idx.clone(),
                msg: e.to_string(),
            })?;
        cache.insert(idx.clone(), v);
        Ok(v)
    };
    let entries = coupling.entries();
    let mut report = SwapReport {
        coordinate: i,
        pairs_checked: 0,
        violations: Vec::new(),
        worst_gain: 0.0,
    };
    for a in 0..entries.len() {
        for c in a + 1..entries.len() {
            let (s, t) = (&entries[a].idx, &entries[c].idx);
            if s[i] == t[i] {
                continue;
            }
            let mut s2 = s.clone();
            let mut t2 = t.clone();
            s2[i] = t[i];
            t2[i] = s[i];
            let gain = b(&s2)? + b(&t2)? - b(s)? - b(t)?;
            report.pairs_checked += 1;
            report.worst_gain = report.worst_gain.max(gain);
            if gain > SWAP_TOL {
                report.violations.push(SwapViolation {
                    s: s.clone(),
                    t: t.clone(),
                    gain,
                });
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpacelikeReport {
    pub delta_loc: f64,
    pub tol_space: f64,
    pub pairs: usize,
    pub nonnegative_fraction: f64,
    pub worst_q: Option<f64>,
    pub worst_pair: Option<(Vec<usize>, Vec<usize>)>,
    pub note: &'static str,
}

/// Evaluates `q(s; t-s) = Σ_{i≥2} v₁ᵀ D²_{x₁x_i} b(s) v_i` on nearby pairs of
/// support tuples. Short chords stand in for tangent vectors, so this is
/// evidence rather than a test.
pub fn spacelike_diagnostic(coupling: &Coupling, oracle: &SurplusOracle) -> Result<SpacelikeReport> {
    let diameter = coupling.marginals()[0].bounding_box().diameter();
    let delta = LOCALITY_FRACTION * diameter;
    let entries = coupling.entries();
    let mut hessians: HashMap<usize, Vec<crate::linalg::Matrix>> = HashMap::new();
    let mut pairs = 0;
    let mut nonneg = 0;
    let mut worst: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    for a in 0..entries.len() {
        let s = &entries[a].idx;
        let xs = coupling.tuple_points(s);
        for (c, entry) in entries.iter().enumerate() {
            if c == a {
                continue;
            }
            let ys = coupling.tuple_points(&entry.idx);
            let v: Vec<Vector> = ys.iter().zip(&xs).map(|(y, x)| y - x).collect();
            if v[0].amax() > delta {
                continue;
            }
            if let Entry::Vacant(slot) = hessians.entry(a) {
                let hs = (1..coupling.m())
                    .map(|i| oracle.hess_b_cross(&xs, 0, i))
                    .collect::<Result<Vec<_>>>()?;
                slot.insert(hs);
            }
            let q: f64 = hessians[&a]
                .iter()
                .zip(&v[1..])
                .map(|(h, vi)| v[0].dot(&(h * vi)))
                .sum();
            pairs += 1;
            if q >= -SPACE_TOL {
                nonneg += 1;
            }
            if worst.as_ref().is_none_or(|(w, _, _)| q < *w) {
                worst = Some((q, s.clone(), entry.idx.clone()));
            }
        }
    }
    Ok(SpacelikeReport {
        delta_loc: delta,
        tol_space: SPACE_TOL,
        pairs,
        nonnegative_fraction: if pairs == 0 { 1.0 } else { nonneg as f64 / pairs as f64 },
        worst_q: worst.as_ref().map(|w| w.0),
        worst_pair: worst.map(|(_, s, t)| (s, t)),
        note: "heuristic: chords between nearby support tuples approximate tangent vectors",
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AtomGraphInfo {
    pub atom: usize,
    pub tuples: usize,
    pub heaviest_share: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MongeReport {
    pub atoms: Vec<AtomGraphInfo>,
    /// Every first-marginal atom carries exactly one tuple.
    pub is_graph: bool,
    /// Every first-marginal atom sends all but [`TIE_TOL`] of its mass to one tuple.
    pub near_graph: bool,
}

/// Is the coupling concentrated on the graph of a function of the first variable?
pub fn graph_check(coupling: &Coupling) -> MongeReport {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for e in coupling.entries() {
        groups.entry(e.idx[0]).or_default().push(e.mass);
    }
    let atoms: Vec<AtomGraphInfo> = groups
        .into_iter()
        .map(|(atom, masses)| {
            let total: f64 = masses.iter().sum();
            let heaviest = masses.iter().cloned().fold(0.0, f64::max);
            AtomGraphInfo {
                atom,
                tuples: masses.len(),
                heaviest_share: heaviest / total,
            }
        })
        .collect();
    MongeReport {
        is_graph: atoms.iter().all(|a| a.tuples == 1),
        near_graph: atoms.iter().all(|a| a.heaviest_share >= 1.0 - TIE_TOL),
        atoms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{DiscreteMeasure, Problem};
    use crate::mmot::{CouplingEntry, SolverMeta, SolverSettings};

    fn problem(n_atoms: usize) -> Problem {
        let xs: Vec<f64> = (0..n_atoms).map(|k| k as f64 / (n_atoms - 1) as f64).collect();
        let w = vec![1.0 / n_atoms as f64; n_atoms];
        let mu = DiscreteMeasure::from_scalars(&xs, &w).unwrap();
        Problem::new(
            vec![mu.clone(), mu],
            SurplusOracle::quadratic(2, 1).unwrap(),
            SolverSettings::default(),
        )
        .unwrap()
    }

    fn permutation(p: &Problem, perm: impl Fn(usize) -> usize) -> Coupling {
        let n = p.marginals()[0].len();
        let entries = (0..n)
            .map(|k| CouplingEntry {
                idx: vec![k, perm(k)],
                mass: 1.0 / n as f64,
            })
            .collect();
        Coupling::with_surplus(p, entries, SolverMeta::default()).unwrap()
    }

    #[test]
    fn anti_monotone_pair_has_one_swap_violation() {
        let p = problem(2);
        let c = permutation(&p, |k| 1 - k);
        let r = swap_monotonicity_check(&c, p.oracle(), 1).unwrap();
        assert_eq!(r.violations.len(), 1);
        // b(0,0)+b(1,1) - b(0,1) - b(1,0) = 0 + 0 + 1/2 + 1/2
        assert!((r.worst_gain - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_entry_is_vacuous() {
        let mu = DiscreteMeasure::dirac(Vector::from_vec(vec![0.5]));
        let p = Problem::new(
            vec![mu.clone(), mu],
            SurplusOracle::quadratic(2, 1).unwrap(),
            SolverSettings::default(),
        )
        .unwrap();
        let c = permutation(&p, |k| k);
        assert!(swap_monotonicity_check(&c, p.oracle(), 0).unwrap().is_clean());
        let s = spacelike_diagnostic(&c, p.oracle()).unwrap();
        assert_eq!(s.pairs, 0);
        assert!(s.worst_q.is_none());
    }

    #[test]
    fn spacelike_signs() {
        let p = problem(11);
        let mono = spacelike_diagnostic(&permutation(&p, |k| k), p.oracle()).unwrap();
        assert!(mono.pairs > 0);
        assert_eq!(mono.nonnegative_fraction, 1.0);
        let anti = spacelike_diagnostic(&permutation(&p, |k| 10 - k), p.oracle()).unwrap();
        assert!(anti.worst_q.unwrap() < 0.0);
    }

    #[test]
    fn graph_flags() {
        let p = problem(2);
        assert!(graph_check(&permutation(&p, |k| 1 - k)).is_graph);
        let product = (0..4)
            .map(|t| CouplingEntry {
                idx: vec![t / 2, t % 2],
                mass: 0.25,
            })
            .collect();
        let c = Coupling::with_surplus(&p, product, SolverMeta::default()).unwrap();
        let r = graph_check(&c);
        assert!(!r.is_graph && !r.near_graph);
        assert!(r.atoms.iter().all(|a| a.tuples == 2));
    }
}
