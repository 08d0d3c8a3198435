//! JSON run manifests: where the problem comes from and what to do with it.
//!
//! ```json
//! {
//!   "seed": 7,
//!   "problem": {
//!     "marginals": [ { "dim": 1, "atoms": [ { "x": [0.0], "w": 1.0 } ] }, { "path": "mu2.csv" } ],
//!     "oracle": { "prefs": [ { "kind": "quadratic" }, { "kind": "quadratic" } ] }
//!   },
//!   "settings": { "pivot": "dantzig" }
//! }
//! ```
//!
//! A manifest names either an explicit `problem` or a seeded `instance`.
//! Relative file paths resolve against the manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::measures::{generate_instance, load_measure, DiscreteMeasure, InstanceSpec, MeasureFormat, MeasureJson, Problem};
use crate::mmot::SolverSettings;
use crate::surplus::{BoxSpec, OracleSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasureSource {
    Inline(MeasureJson),
    File {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        format: Option<MeasureFormat>,
    },
}

impl MeasureSource {
    pub fn load(&self, base: &Path) -> Result<DiscreteMeasure> {
        match self {
            MeasureSource::Inline(j) => Ok(j.clone().into_measure()?.measure),
            MeasureSource::File { path, format } => {
                let full = if path.is_absolute() { path.clone() } else { base.join(path) };
                if !full.exists() {
                    return Err(Error::invalid(format!("measure file {} does not exist", full.display())));
                }
                let format = format
                    .or_else(|| MeasureFormat::from_path(&full))
                    .ok_or_else(|| Error::invalid(format!("cannot tell the format of {}", full.display())))?;
                Ok(load_measure(&full, format)?.measure)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub marginals: Vec<MeasureSource>,
    pub oracle: OracleSpec,
}

/// One contract-condition probe: `x = (x₁,x₂,x₃)` and optionally `(x̃₁, x̃₃)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleProbe {
    pub x: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilde: Option<[Vec<f64>; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSpec {
    /// Oracle to test; defaults to the problem's oracle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSpec>,
    /// Point dimension when there is no problem to take it from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Sampling box for the agent variables; defaults to the marginals' bounding box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_box: Option<BoxSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_box: Option<BoxSpec>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub tuples: Vec<TupleProbe>,
    /// Matrix `A` of a bilinear three-marginal surplus, checked alongside.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bilinear_a: Option<Vec<Vec<f64>>>,
}

fn default_samples() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSpec {
    #[serde(default = "default_max_outer")]
    pub max_outer: usize,
    /// Starting contract measure; defaults to the first marginal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<MeasureSource>,
}

impl Default for FixedPointSpec {
    fn default() -> Self {
        Self {
            max_outer: default_max_outer(),
            init: None,
        }
    }
}

fn default_max_outer() -> usize {
    100
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceSpec>,
    #[serde(default)]
    pub settings: SolverSettings,
    /// Also run the entropic solver at this ε.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropic_eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_point: Option<FixedPointSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl RunManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read manifest {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text).map_err(|e| Error::invalid(format!("invalid manifest: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.problem.is_some() && self.instance.is_some() {
            return Err(Error::invalid("manifest has both a problem and an instance"));
        }
        if let Some(inst) = &self.instance {
            inst.validate()?;
        }
        if let Some(eps) = self.entropic_eps {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(Error::invalid("entropic_eps must be positive"));
            }
        }
        self.settings.validate()
    }

    pub fn has_problem(&self) -> bool {
        self.problem.is_some() || self.instance.is_some()
    }

    /// Builds the problem, reading marginal files relative to `base`.
    pub fn build_problem(&self, base: &Path) -> Result<Problem> {
        let problem = match (&self.problem, &self.instance) {
            (Some(spec), None) => {
                if spec.marginals.is_empty() {
                    return Err(Error::invalid("problem has no marginals"));
                }
                let marginals = spec
                    .marginals
                    .iter()
                    .map(|s| s.load(base))
                    .collect::<Result<Vec<_>>>()?;
                let oracle = spec.oracle.build(marginals[0].dim())?;
                Problem::new(marginals, oracle, self.settings.clone())?
            }
            (None, Some(inst)) => generate_instance(inst)?.with_settings(self.settings.clone())?,
            (None, None) => return Err(Error::invalid("manifest has neither a problem nor an instance")),
            (Some(_), Some(_)) => return Err(Error::invalid("manifest has both a problem and an instance")),
        };
        Ok(problem)
    }

    /// A copy with the problem written out inline, so it no longer depends
    /// on other files or on instance generation.
    pub fn resolved(&self, problem: &Problem) -> Self {
        let oracle = match (&self.problem, &self.instance) {
            (Some(p), _) => p.oracle.clone(),
            (None, Some(inst)) => inst
                .oracle
                .clone()
                .unwrap_or_else(|| OracleSpec::quadratic(problem.m())),
            (None, None) => OracleSpec::from(problem.oracle()),
        };
        let mut out = self.clone();
        out.instance = None;
        out.problem = Some(ProblemSpec {
            marginals: problem
                .marginals()
                .iter()
                .map(|m| MeasureSource::Inline(MeasureJson::from(m)))
                .collect(),
            oracle,
        });
        out.settings = problem.settings().clone();
        if let (Some(fp), Some(p)) = (&mut out.fixed_point, &self.fixed_point) {
            fp.init = p.init.clone();
        }
        out
    }
}

impl CheckSpec {
    pub fn tuple_points(probe: &TupleProbe) -> Result<(Vec<Vector>, Option<[Vector; 2]>)> {
        let xs = probe.x.iter().map(|x| Vector::from_vec(x.clone())).collect();
        let tilde = probe
            .tilde
            .as_ref()
            .map(|[a, b]| [Vector::from_vec(a.clone()), Vector::from_vec(b.clone())]);
        Ok((xs, tilde))
    }

    pub fn bilinear_matrix(&self) -> Result<Option<Matrix>> {
        self.bilinear_a.as_ref().map(|rows| linalg::from_rows(rows)).transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_and_file_sources() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("b.csv"), "0,1\n2,3\n").unwrap();
        let m = RunManifest::parse(
            r#"{ "problem": {
                "marginals": [ {"dim":1,"atoms":[{"x":[0],"w":1}]}, {"path":"b.csv"} ],
                "oracle": {"prefs":[{"kind":"quadratic"},{"kind":"quadratic"}]} } }"#,
        )
        .unwrap();
        let p = m.build_problem(dir.path()).unwrap();
        assert_eq!(p.sizes(), vec![1, 2]);
        assert_eq!(p.marginals()[1].weights(), &[0.25, 0.75]);

        let resolved = m.resolved(&p);
        let again = resolved.build_problem(Path::new("/nonexistent")).unwrap();
        assert_eq!(again.marginals()[1].points(), p.marginals()[1].points());
    }

    #[test]
    fn missing_file_is_validation_error() {
        let m = RunManifest::parse(
            r#"{ "problem": { "marginals": [ {"path":"nope.csv"}, {"path":"nope.csv"} ],
                "oracle": {"prefs":[{"kind":"linear"},{"kind":"linear"}]} } }"#,
        )
        .unwrap();
        let err = m.build_problem(Path::new(".")).unwrap_err();
        assert_eq!(err.kind(), crate::ErrorKind::Validation);
    }

    #[test]
    fn instance_manifest_and_settings_overrides() {
        let m = RunManifest::parse(
            r#"{ "instance": {"m":3,"n":1,"atoms":3,"seed":5}, "settings": {"pivot":"dantzig"} }"#,
        )
        .unwrap();
        assert_eq!(m.settings.pivot, crate::lp::PivotRule::Dantzig);
        assert_eq!(m.settings.variable_cap, 20_000);
        let p = m.build_problem(Path::new(".")).unwrap();
        assert_eq!(p.sizes(), vec![3, 3, 3]);
        assert_eq!(p.settings().pivot, crate::lp::PivotRule::Dantzig);
    }

    #[test]
    fn rejects_bad_manifests() {
        assert!(RunManifest::parse("{").is_err());
        assert!(RunManifest::parse(r#"{"settings":{"feasibility_tol":-1}}"#).is_err());
        assert!(RunManifest::parse(r#"{"entropic_eps":0}"#).is_err());
        let m = RunManifest::parse("{}").unwrap();
        assert!(m.build_problem(Path::new(".")).is_err());
    }
}
