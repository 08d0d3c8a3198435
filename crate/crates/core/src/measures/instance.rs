//! Seeded random problem instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DiscreteMeasure, Problem, MERGE_TOL};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::mmot::SolverSettings;
use crate::surplus::OracleSpec;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightScheme {
    #[default]
    Uniform,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub m: usize,
    pub n: usize,
    pub atoms: usize,
    #[serde(default = "default_lo")]
    pub lo: f64,
    #[serde(default = "default_hi")]
    pub hi: f64,
    #[serde(default)]
    pub weights: WeightScheme,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to quadratic preferences for every marginal.
    #[serde(default)]
    pub oracle: Option<OracleSpec>,
}

fn default_lo() -> f64 {
    0.0
}

fn default_hi() -> f64 {
    1.0
}

impl InstanceSpec {
    pub fn new(m: usize, n: usize, atoms: usize, seed: u64) -> Self {
        Self {
            m,
            n,
            atoms,
            lo: default_lo(),
            hi: default_hi(),
            weights: WeightScheme::Uniform,
            seed,
            oracle: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.atoms == 0 {
            return Err(Error::EmptyMarginal);
        }
        if self.m < 2 {
            return Err(Error::invalid("m must be at least 2"));
        }
        if self.n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::invalid("instance box must be nonempty and finite"));
        }
        Ok(())
    }
}

/// Draws a deterministic instance: atoms uniform in the box, then a jitter of
/// size `1e-7 · diameter` so that no two atoms of a marginal coincide.
pub fn generate_instance(spec: &InstanceSpec) -> Result<Problem> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let diameter = (spec.hi - spec.lo) * (spec.n as f64).sqrt();
    let jitter = 1e-7 * diameter;

    let mut marginals = Vec::with_capacity(spec.m);
    for _ in 0..spec.m {
        let mut points: Vec<Vector> = (0..spec.atoms)
            .map(|_| Vector::from_fn(spec.n, |_, _| rng.random_range(spec.lo..spec.hi)))
            .collect();
        loop {
            for p in points.iter_mut() {
                for v in p.iter_mut() {
                    *v += jitter * rng.random_range(-1.0..1.0);
                }
            }
            let clash = (0..points.len()).any(|a| {
                (a + 1..points.len()).any(|b| (&points[a] - &points[b]).amax() <= MERGE_TOL)
            });
            if !clash {
                break;
            }
        }
        let weights: Vec<f64> = match spec.weights {
            WeightScheme::Uniform => vec![1.0; spec.atoms],
            WeightScheme::Random => (0..spec.atoms).map(|_| rng.random_range(0.1..1.0)).collect(),
        };
        let (mu, _) = DiscreteMeasure::normalized(points, weights)?;
        marginals.push(mu);
    }

    let oracle = spec
        .oracle
        .clone()
        .unwrap_or_else(|| OracleSpec::quadratic(spec.m))
        .build(spec.n)?;
    Problem::new(marginals, oracle, SolverSettings::default())
}
