//! CSV series for external plotting. Every file has a header row.

use std::path::Path;

use crate::error::{Error, Result};
use crate::matching::MongeMap;
use crate::measures::DiscreteMeasure;
use crate::mmot::Coupling;

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

fn coords(prefix: &str, dim: usize) -> Vec<String> {
    (0..dim).map(|a| format!("{prefix}_{a}")).collect()
}

/// One row per support tuple: the coordinates of every `x_i`, then the mass.
pub fn write_coupling(coupling: &Coupling, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = Vec::new();
    for (i, mu) in coupling.marginals().iter().enumerate() {
        header.extend(coords(&format!("x{}", i + 1), mu.dim()));
    }
    header.push("mass".into());
    w.write_record(&header)?;
    for e in coupling.entries() {
        let mut row: Vec<String> = coupling
            .tuple_points(&e.idx)
            .iter()
            .flat_map(|p| p.iter().map(|v| v.to_string()).collect::<Vec<_>>())
            .collect();
        row.push(e.mass.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Contract atoms and their weights.
pub fn write_measure(nu: &DiscreteMeasure, path: &Path) -> Result<()> {
    if nu.is_empty() {
        return Err(Error::EmptyMarginal);
    }
    let mut w = writer(path)?;
    let mut header = coords("z", nu.dim());
    header.push("weight".into());
    w.write_record(&header)?;
    for (p, wt) in nu.points().iter().zip(nu.weights()) {
        let mut row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        row.push(wt.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Arrows `from → to` for a list of named maps.
pub fn write_map_arrows(maps: &[(String, &MongeMap)], path: &Path) -> Result<()> {
    let (from_dim, to_dim) = maps
        .iter()
        .find(|(_, m)| !m.is_empty())
        .map(|(_, m)| (m.domain[0].len(), m.image[0].len()))
        .ok_or_else(|| Error::invalid("no map arrows to write"))?;
    let mut w = writer(path)?;
    let mut header = vec!["map".to_string()];
    header.extend(coords("from", from_dim));
    header.extend(coords("to", to_dim));
    header.push("share".into());
    w.write_record(&header)?;
    for (name, m) in maps {
        for pair in m.pairs() {
            let mut row = vec![name.clone()];
            row.extend(pair.from.iter().map(|v| v.to_string()));
            row.extend(pair.to.iter().map(|v| v.to_string()));
            row.push(pair.share.to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(trace: &[f64], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["iteration", "objective"])?;
    for (k, v) in trace.iter().enumerate() {
        w.write_record([k.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
