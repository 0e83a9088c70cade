//! Per-feature CSV tables with flag and decision columns.

use std::path::{Path, PathBuf};

use crate::ensemble::{DetectorCategory, EnsembleReport, PointReport};
use crate::error::{Error, Result};
use crate::ingest::FeatureKind;

/// Feature series recorded in the report, in feature order.
pub fn report_series(points: &[PointReport]) -> Vec<(String, Vec<f64>)> {
    FeatureKind::ALL
        .iter()
        .map(|f| f.name())
        .filter(|name| points.first().is_some_and(|p| p.values.contains_key(*name)))
        .map(|name| {
            let v = points.iter().map(|p| p.values.get(name).copied().unwrap_or(0.0)).collect();
            (name.to_string(), v)
        })
        .collect()
}

/// Writes `<dir>/<feature>.csv` with columns `timestamp, value`, one 0/1
/// column per detector, one per category decision, and `alarm`.
pub fn emit_plot_data(report: &EnsembleReport, series: &[(String, Vec<f64>)], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut header = vec!["timestamp".to_string(), "value".to_string()];
    header.extend(report.detectors.iter().cloned());
    header.extend(DetectorCategory::ALL.iter().map(|c| c.name().to_string()));
    header.push("alarm".into());
    let bit = |b: bool| if b { "1" } else { "0" }.to_string();

    let mut written = Vec::new();
    for (name, values) in series {
        if values.len() != report.points.len() {
            return Err(Error::invalid(format!(
                "series `{name}` has {} values for {} report points",
                values.len(),
                report.points.len()
            )));
        }
        let path = dir.join(format!("{name}.csv"));
        let csv_err = |e: csv::Error| Error::Schema(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(&header).map_err(csv_err)?;
        for (p, v) in report.points.iter().zip(values) {
            let mut row = vec![p.ts.to_string(), v.to_string()];
            row.extend(report.detectors.iter().map(|d| bit(p.detectors.contains(d))));
            row.extend(
                DetectorCategory::ALL
                    .iter()
                    .map(|&c| bit(p.categories.get(c).is_some_and(|v| v.decision))),
            );
            row.push(bit(p.alarm));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
