//! Report files.
//!
//! A benchmark directory holds:
//! - `report.json`: the full [`RunReport`] (config echo, per-split records,
//!   aggregates), tagged with `format_version`;
//! - `metric_<name>.csv`: `split,normalized,denormalized` per metric;
//! - `predictions.csv`: `split,index,y,lower,upper,value` in original units.
//!
//! A sweep directory holds `sweep.json` and `series.csv` with columns
//! `series,metric,x,y`, one series per method (and per beta for
//! hyper-parameter grids).

use std::fs;
use std::path::{Path, PathBuf};

use super::run::{RunReport, SplitPredictions, SweepKind, SweepReport, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::metrics::MetricsRecord;

pub const REPORT_FILE: &str = "report.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const SWEEP_FILE: &str = "sweep.json";
pub const SERIES_FILE: &str = "series.csv";

type Column = fn(&MetricsRecord) -> f64;

const METRICS: [(&str, Column); 4] = [
    ("picp", |r| r.picp),
    ("mpiw", |r| r.mpiw),
    ("rmse", |r| r.rmse),
    ("mae", |r| r.mae),
];

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn check_version(path: &Path, version: u32) -> Result<()> {
    if version != FORMAT_VERSION {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("format version {version}, expected {FORMAT_VERSION}"),
        });
    }
    Ok(())
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the report files into `dir`, creating it if needed, and returns
/// the paths written.
pub fn emit_report(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let path = dir.join(REPORT_FILE);
    write_json(&path, report)?;
    written.push(path);

    for (name, get) in METRICS {
        let path = dir.join(format!("metric_{name}.csv"));
        let rows = report.splits.iter().map(|s| {
            vec![
                s.split.to_string(),
                get(&s.normalized).to_string(),
                get(&s.denormalized).to_string(),
            ]
        });
        write_rows(&path, &["split", "normalized", "denormalized"], rows)?;
        written.push(path);
    }

    if report.config.report.persist_predictions {
        let path = dir.join(PREDICTIONS_FILE);
        let rows = report.predictions.iter().flat_map(|p| {
            (0..p.y.len()).map(move |i| {
                vec![
                    p.split.to_string(),
                    i.to_string(),
                    p.y[i].to_string(),
                    p.lower[i].to_string(),
                    p.upper[i].to_string(),
                    p.value[i].to_string(),
                ]
            })
        });
        write_rows(
            &path,
            &["split", "index", "y", "lower", "upper", "value"],
            rows,
        )?;
        written.push(path);
    }
    Ok(written)
}

/// Reads the per-sample predictions table.
pub fn load_predictions(path: &Path) -> Result<Vec<SplitPredictions>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out: Vec<SplitPredictions> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let field = |c: usize| -> Result<f64> {
            rec.get(c)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Cell {
                    path: path.to_path_buf(),
                    row: line + 2,
                    column: c + 1,
                    message: "expected a number".into(),
                })
        };
        let split = field(0)? as usize;
        if out.last().is_none_or(|p| p.split != split) {
            out.push(SplitPredictions {
                split,
                y: Vec::new(),
                lower: Vec::new(),
                upper: Vec::new(),
                value: Vec::new(),
            });
        }
        let p = out.last_mut().expect("pushed above");
        p.y.push(field(2)?);
        p.lower.push(field(3)?);
        p.upper.push(field(4)?);
        p.value.push(field(5)?);
    }
    Ok(out)
}

/// Reads a report from a directory written by [`emit_report`] or from a
/// `report.json` path. Predictions are restored when the table is present.
pub fn load_report(path: &Path) -> Result<RunReport> {
    let (dir, file) = if path.is_dir() {
        (path.to_path_buf(), path.join(REPORT_FILE))
    } else {
        (
            path.parent().map(Path::to_path_buf).unwrap_or_default(),
            path.to_path_buf(),
        )
    };
    let mut report: RunReport = read_json(&file)?;
    check_version(&file, report.format_version)?;
    let preds = dir.join(PREDICTIONS_FILE);
    if preds.exists() {
        report.predictions = load_predictions(&preds)?;
    }
    Ok(report)
}

/// Writes `sweep.json` and the plot-ready `series.csv` into `dir`.
pub fn emit_sweep(sweep: &SweepReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join(SWEEP_FILE);
    write_json(&json, sweep)?;

    let mut rows = Vec::new();
    for r in &sweep.rows {
        let (series, x) = match sweep.kind {
            SweepKind::Alpha => (r.method.clone(), r.alpha),
            SweepKind::Hyperparam => (format!("{} beta={}", r.method, r.beta), r.lambda),
        };
        for (metric, y) in [
            ("picp", r.picp),
            ("mpiw", r.mpiw),
            ("rmse", r.rmse),
            ("mae", r.mae),
        ] {
            rows.push(vec![
                series.clone(),
                metric.into(),
                x.to_string(),
                y.to_string(),
            ]);
        }
    }
    for imp in &sweep.improvements {
        rows.push(vec![
            "improvement".into(),
            "mpiw_percent".into(),
            imp.alpha.to_string(),
            imp.mpiw_percent.to_string(),
        ]);
    }
    let series = dir.join(SERIES_FILE);
    write_rows(&series, &["series", "metric", "x", "y"], rows.into_iter())?;
    Ok(vec![json, series])
}

pub fn load_sweep(path: &Path) -> Result<SweepReport> {
    let file = if path.is_dir() {
        path.join(SWEEP_FILE)
    } else {
        path.to_path_buf()
    };
    let sweep: SweepReport = read_json(&file)?;
    check_version(&file, sweep.format_version)?;
    Ok(sweep)
}

/// Human-readable summary table of a report.
pub fn render_summary(report: &RunReport) -> String {
    let mut out = format!(
        "dataset {} | variant {} | {} splits ({} failed) | {:.1}s\n",
        report.config.dataset.name,
        report.config.loss.variant,
        report.splits.len(),
        report.failures.len(),
        report.wall_clock_secs
    );
    match (report.aggregate_normalized, report.aggregate_denormalized) {
        (Some(n), Some(d)) => {
            out.push_str("metric  normalized          original units\n");
            for (name, a, b) in [
                ("PICP", n.picp, d.picp),
                ("MPIW", n.mpiw, d.mpiw),
                ("RMSE", n.rmse, d.rmse),
                ("MAE", n.mae, d.mae),
            ] {
                out.push_str(&format!("{name:<7} {:<19} {}\n", a.to_string(), b));
            }
            out.push_str("(± is the standard error over splits)\n");
        }
        _ => out.push_str("no successful splits\n"),
    }
    for f in &report.failures {
        out.push_str(&format!("split {} failed: {}\n", f.split, f.message));
    }
    if report.partial {
        out.push_str("report is PARTIAL\n");
    }
    out
}

/// Human-readable table of a sweep.
pub fn render_sweep(sweep: &SweepReport) -> String {
    let mut out =
        String::from("method        alpha   beta    lambda  PICP    MPIW    RMSE    MAE\n");
    for r in &sweep.rows {
        out.push_str(&format!(
            "{:<13} {:<7.3} {:<7.3} {:<7.2} {:<7.4} {:<7.4} {:<7.4} {:.4}\n",
            r.method, r.alpha, r.beta, r.lambda, r.picp, r.mpiw, r.rmse, r.mae
        ));
    }
    for imp in &sweep.improvements {
        out.push_str(&format!(
            "alpha {:.2}: MPIW improvement over qd {:+.1}%\n",
            imp.alpha, imp.mpiw_percent
        ));
    }
    out
}
