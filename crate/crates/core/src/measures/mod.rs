//! Finite atomic measures, problem data and pushforwards.

mod instance;
mod io;

pub use instance::{generate_instance, InstanceSpec, WeightScheme};
pub use io::{load_measure, parse_csv, save_measure, AtomJson, LoadedMeasure, MeasureFormat, MeasureJson};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::mmot::SolverSettings;
use crate::surplus::SurplusOracle;

/// Images closer than this are merged by [`pushforward`].
pub const MERGE_TOL: f64 = 1e-9;
/// Weights must sum to one within this.
pub const MASS_TOL: f64 = 1e-12;

/// A finitely supported probability measure on ℝⁿ.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: Vec<Vector>,
    weights: Vec<f64>,
    dim: usize,
}

impl DiscreteMeasure {
    /// Builds a probability measure. Zero-weight atoms are dropped; the
    /// weights must already sum to one.
    pub fn new(points: Vec<Vector>, weights: Vec<f64>) -> Result<Self> {
        let (points, weights, dim) = Self::validate(points, weights)?;
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::invalid(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            points,
            weights,
            dim,
        })
    }

    /// Like [`DiscreteMeasure::new`] but rescales the weights to unit mass.
    /// Returns the measure and the factor that was applied.
    pub fn normalized(points: Vec<Vector>, weights: Vec<f64>) -> Result<(Self, f64)> {
        let (points, weights, dim) = Self::validate(points, weights)?;
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("nonpositive total mass"));
        }
        let factor = 1.0 / total;
        let weights = weights.into_iter().map(|w| w * factor).collect();
        Ok((
            Self {
                points,
                weights,
                dim,
            },
            factor,
        ))
    }

    pub fn dirac(point: Vector) -> Self {
        let dim = point.len();
        Self {
            points: vec![point],
            weights: vec![1.0],
            dim,
        }
    }

    /// Equal weights on the given points.
    pub fn uniform(points: Vec<Vector>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyMarginal);
        }
        let w = 1.0 / points.len() as f64;
        let n = points.len();
        Self::normalized(points, vec![w; n]).map(|(m, _)| m)
    }

    /// Convenience constructor for one-dimensional measures.
    pub fn from_scalars(xs: &[f64], weights: &[f64]) -> Result<Self> {
        let pts = xs.iter().map(|&x| Vector::from_vec(vec![x])).collect();
        Self::normalized(pts, weights.to_vec()).map(|(m, _)| m)
    }

    fn validate(points: Vec<Vector>, weights: Vec<f64>) -> Result<(Vec<Vector>, Vec<f64>, usize)> {
        if points.len() != weights.len() {
            return Err(Error::invalid(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if points.is_empty() {
            return Err(Error::EmptyMarginal);
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::invalid("points must have dimension >= 1"));
        }
        let mut kept_p = Vec::with_capacity(points.len());
        let mut kept_w = Vec::with_capacity(points.len());
        for (k, (p, w)) in points.into_iter().zip(weights).enumerate() {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) || !w.is_finite() {
                return Err(Error::invalid(format!("non-finite entry at atom {k}")));
            }
            if w < 0.0 {
                return Err(Error::invalid(format!("negative weight at atom {k}")));
            }
            if w > 0.0 {
                kept_p.push(p);
                kept_w.push(w);
            }
        }
        if kept_p.is_empty() {
            return Err(Error::EmptyMarginal);
        }
        Ok((kept_p, kept_w, dim))
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn bounding_box(&self) -> BoxDomain {
        let mut lo = self.points[0].clone();
        let mut hi = self.points[0].clone();
        for p in &self.points[1..] {
            for d in 0..self.dim {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        BoxDomain { lo, hi }
    }

    /// Atoms sorted lexicographically by coordinates, with the permutation
    /// applied (`perm[new] = old`).
    pub fn canonical(&self) -> (Self, Vec<usize>) {
        let mut perm: Vec<usize> = (0..self.len()).collect();
        perm.sort_by(|&a, &b| lex_cmp(&self.points[a], &self.points[b]));
        let sorted = Self {
            points: perm.iter().map(|&k| self.points[k].clone()).collect(),
            weights: perm.iter().map(|&k| self.weights[k]).collect(),
            dim: self.dim,
        };
        (sorted, perm)
    }

    pub(crate) fn from_parts_unchecked(points: Vec<Vector>, weights: Vec<f64>, dim: usize) -> Self {
        Self {
            points,
            weights,
            dim,
        }
    }
}

pub(crate) fn lex_cmp(a: &Vector, b: &Vector) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            ord => return ord,
        }
    }
    std::cmp::Ordering::Equal
}

/// Axis-aligned box in ℝⁿ.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    pub lo: Vector,
    pub hi: Vector,
}

impl BoxDomain {
    pub fn new(lo: Vector, hi: Vector) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::invalid("box corners must have equal, nonzero length"));
        }
        if lo.iter().zip(hi.iter()).any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::invalid("box must satisfy lo <= hi with finite corners"));
        }
        Ok(Self { lo, hi })
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(Vector::from_element(dim, lo), Vector::from_element(dim, hi))
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Vector {
        (&self.lo + &self.hi) * 0.5
    }

    pub fn diameter(&self) -> f64 {
        (&self.hi - &self.lo).norm()
    }

    pub fn union(&self, other: &BoxDomain) -> BoxDomain {
        BoxDomain {
            lo: self.lo.zip_map(&other.lo, f64::min),
            hi: self.hi.zip_map(&other.hi, f64::max),
        }
    }

    /// Scales the box about its center; degenerate sides get half-width `min_half`.
    pub fn scaled(&self, factor: f64, min_half: f64) -> BoxDomain {
        let c = self.center();
        let half = ((&self.hi - &self.lo) * 0.5).map(|h| h.max(min_half) * factor);
        BoxDomain {
            lo: &c - &half,
            hi: &c + &half,
        }
    }

    /// True when `z` lies within `tol` of the boundary or outside.
    pub fn on_or_outside_boundary(&self, z: &Vector, tol: f64) -> bool {
        (0..self.dim()).any(|d| z[d] <= self.lo[d] + tol || z[d] >= self.hi[d] - tol)
    }

    /// The `3ⁿ` grid of corners, edge midpoints and center.
    pub fn grid3(&self) -> Vec<Vector> {
        let n = self.dim();
        let total = 3usize.pow(n as u32);
        (0..total)
            .map(|mut code| {
                let mut p = Vector::zeros(n);
                for d in 0..n {
                    let t = (code % 3) as f64 * 0.5;
                    code /= 3;
                    p[d] = self.lo[d] + t * (self.hi[d] - self.lo[d]);
                }
                p
            })
            .collect()
    }
}

/// Data of a multi-marginal problem: marginals, surplus oracle, settings.
#[derive(Debug, Clone)]
pub struct Problem {
    marginals: Arc<[DiscreteMeasure]>,
    oracle: SurplusOracle,
    settings: SolverSettings,
}

impl Problem {
    /// Validates the data. When the oracle carries no search box one is
    /// derived from the marginals (their joint bounding box scaled by 3).
    pub fn new(
        marginals: Vec<DiscreteMeasure>,
        mut oracle: SurplusOracle,
        settings: SolverSettings,
    ) -> Result<Self> {
        if marginals.len() < 2 {
            return Err(Error::invalid("a problem needs at least two marginals"));
        }
        let n = marginals[0].dim();
        for mu in &marginals {
            if mu.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: mu.dim(),
                });
            }
        }
        if oracle.arity() != marginals.len() {
            return Err(Error::invalid(format!(
                "oracle has {} preference functions but problem has {} marginals",
                oracle.arity(),
                marginals.len()
            )));
        }
        if oracle.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: oracle.dim(),
            });
        }
        settings.validate()?;
        if oracle.z_box().is_none() {
            let bbox = marginals
                .iter()
                .map(|m| m.bounding_box())
                .reduce(|a, b| a.union(&b))
                .expect("at least two marginals");
            oracle.set_z_box(bbox.scaled(3.0, 0.5));
        }
        Ok(Self {
            marginals: marginals.into(),
            oracle,
            settings,
        })
    }

    pub fn marginals(&self) -> &[DiscreteMeasure] {
        &self.marginals
    }

    pub(crate) fn marginals_arc(&self) -> Arc<[DiscreteMeasure]> {
        Arc::clone(&self.marginals)
    }

    pub fn oracle(&self) -> &SurplusOracle {
        &self.oracle
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    pub fn with_settings(&self, settings: SolverSettings) -> Result<Self> {
        settings.validate()?;
        Ok(Self {
            marginals: Arc::clone(&self.marginals),
            oracle: self.oracle.clone(),
            settings,
        })
    }

    pub fn m(&self) -> usize {
        self.marginals.len()
    }

    pub fn dim(&self) -> usize {
        self.marginals[0].dim()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.marginals.iter().map(|m| m.len()).collect()
    }

    /// Points of the tuple with the given atom indices.
    pub fn tuple_points(&self, idx: &[usize]) -> Vec<Vector> {
        idx.iter()
            .zip(self.marginals.iter())
            .map(|(&k, mu)| mu.points()[k].clone())
            .collect()
    }
}

/// Image of a weighted point set under `map`, with coincident images merged.
///
/// The result is sorted lexicographically. Merged atoms sit at the
/// mass-weighted average of their images.
pub fn pushforward_points<F>(points: &[Vector], weights: &[f64], mut map: F) -> Result<DiscreteMeasure>
where
    F: FnMut(usize, &Vector) -> Result<Vector>,
{
    if points.is_empty() {
        return Err(Error::EmptyMarginal);
    }
    let mut images = Vec::with_capacity(points.len());
    for (k, p) in points.iter().enumerate() {
        let img = map(k, p).map_err(|e| Error::MapFailure {
            index: k,
            msg: e.to_string(),
        })?;
        if img.iter().any(|v| !v.is_finite()) {
            return Err(Error::MapFailure {
                index: k,
                msg: "non-finite image".into(),
            });
        }
        images.push(img);
    }
    let dim = images[0].len();
    if images.iter().any(|v| v.len() != dim) {
        return Err(Error::invalid("map images have inconsistent dimension"));
    }

    let mut order: Vec<usize> = (0..images.len()).collect();
    order.sort_by(|&a, &b| lex_cmp(&images[a], &images[b]));

    // (mass-weighted sum of locations, mass, representative)
    let mut clusters: Vec<(Vector, f64, Vector)> = Vec::new();
    for k in order {
        let w = weights[k];
        let img = &images[k];
        match clusters
            .iter_mut()
            .find(|(_, _, rep)| (rep - img).amax() <= MERGE_TOL)
        {
            Some((sum, mass, _)) => {
                *sum += img * w;
                *mass += w;
            }
            None => clusters.push((img * w, w, img.clone())),
        }
    }
    let mut atoms: Vec<(Vector, f64)> = clusters
        .into_iter()
        .map(|(sum, mass, rep)| {
            if mass > 0.0 {
                (sum / mass, mass)
            } else {
                (rep, mass)
            }
        })
        .filter(|(_, m)| *m > 0.0)
        .collect();
    atoms.sort_by(|a, b| lex_cmp(&a.0, &b.0));
    let (pts, ws): (Vec<_>, Vec<_>) = atoms.into_iter().unzip();
    Ok(DiscreteMeasure::from_parts_unchecked(pts, ws, dim))
}

/// Pushforward of a measure under a point map.
pub fn pushforward<F>(measure: &DiscreteMeasure, map: F) -> Result<DiscreteMeasure>
where
    F: FnMut(usize, &Vector) -> Result<Vector>,
{
    pushforward_points(measure.points(), measure.weights(), map)
}
