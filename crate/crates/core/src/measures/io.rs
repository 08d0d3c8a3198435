//! CSV and JSON measure files.
//!
//! CSV: one atom per row, `n` coordinates followed by the weight, no header.
//! JSON: `{ "dim": n, "atoms": [ { "x": [...], "w": ... } ] }`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DiscreteMeasure;
use crate::error::{Error, Result};
use crate::linalg::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureFormat {
    Csv,
    Json,
}

impl MeasureFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Self::Csv),
            "json" => Some(Self::Json),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomJson {
    pub x: Vec<f64>,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureJson {
    pub dim: usize,
    pub atoms: Vec<AtomJson>,
}

impl From<&DiscreteMeasure> for MeasureJson {
    fn from(m: &DiscreteMeasure) -> Self {
        Self {
            dim: m.dim(),
            atoms: m
                .points()
                .iter()
                .zip(m.weights())
                .map(|(p, &w)| AtomJson {
                    x: p.iter().copied().collect(),
                    w,
                })
                .collect(),
        }
    }
}

impl MeasureJson {
    /// Converts to a normalized measure; rows are numbered from 1 in errors.
    pub fn into_measure(self) -> Result<LoadedMeasure> {
        let rows = self
            .atoms
            .into_iter()
            .map(|a| {
                let mut r = a.x;
                r.push(a.w);
                r
            })
            .collect::<Vec<_>>();
        build(rows, Some(self.dim))
    }
}

/// A measure read from disk together with the weight rescale that was applied.
#[derive(Debug, Clone)]
pub struct LoadedMeasure {
    pub measure: DiscreteMeasure,
    pub rescale: f64,
}

pub fn load_measure(path: impl AsRef<Path>, format: MeasureFormat) -> Result<LoadedMeasure> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let loaded = match format {
        MeasureFormat::Csv => parse_csv(&text)?,
        MeasureFormat::Json => serde_json::from_str::<MeasureJson>(&text)?.into_measure()?,
    };
    if loaded.rescale != 1.0 {
        log::info!(
            "{}: weights rescaled by {} to unit mass",
            path.display(),
            loaded.rescale
        );
    }
    Ok(loaded)
}

pub fn parse_csv(text: &str) -> Result<LoadedMeasure> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let row = k + 1;
        let rec = rec?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let vals = rec
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    row,
                    msg: format!("malformed field {f:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(vals);
    }
    build(rows, None)
}

fn build(rows: Vec<Vec<f64>>, dim: Option<usize>) -> Result<LoadedMeasure> {
    if rows.is_empty() {
        return Err(Error::EmptyMarginal);
    }
    let width = match dim {
        Some(d) => d + 1,
        None => rows[0].len(),
    };
    if width < 2 {
        return Err(Error::Parse {
            row: 1,
            msg: "row needs at least one coordinate and a weight".into(),
        });
    }
    let mut points = Vec::with_capacity(rows.len());
    let mut weights = Vec::with_capacity(rows.len());
    for (k, r) in rows.into_iter().enumerate() {
        let row = k + 1;
        if r.len() != width {
            return Err(Error::Parse {
                row,
                msg: format!(
                    "inconsistent dimension: expected {} coordinates, got {}",
                    width - 1,
                    r.len().saturating_sub(1)
                ),
            });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse {
                row,
                msg: "NaN or infinite entry".into(),
            });
        }
        let w = r[width - 1];
        if w < 0.0 {
            return Err(Error::Parse {
                row,
                msg: "nonpositive weight".into(),
            });
        }
        points.push(Vector::from_row_slice(&r[..width - 1]));
        weights.push(w);
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("nonpositive total mass"));
    }
    let (measure, rescale) = DiscreteMeasure::normalized(points, weights)?;
    Ok(LoadedMeasure { measure, rescale })
}

pub fn save_measure(
    measure: &DiscreteMeasure,
    path: impl AsRef<Path>,
    format: MeasureFormat,
) -> Result<()> {
    let text = match format {
        MeasureFormat::Csv => {
            let mut out = String::new();
            for (p, w) in measure.points().iter().zip(measure.weights()) {
                let mut fields: Vec<String> = p.iter().map(|v| v.to_string()).collect();
                fields.push(w.to_string());
                out.push_str(&fields.join(","));
                out.push('\n');
            }
            out
        }
        MeasureFormat::Json => serde_json::to_string_pretty(&MeasureJson::from(measure))?,
    };
    fs::write(path, text)?;
    Ok(())
}
