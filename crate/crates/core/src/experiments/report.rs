//! Report files: `report.json`, `trace.csv` and `plotdata_*.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{stats, GapReport, VsNReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
}

/// One point of a plotted series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub series: String,
    pub x: f64,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Serialize)]
struct TraceRow<'a> {
    algorithm: &'a str,
    n_train: usize,
    trial: usize,
    data_seed: u64,
    train_seed: u64,
    iteration: usize,
    train_acc: f64,
    test_acc: f64,
    train_risk: f64,
    test_risk: f64,
    gap: f64,
    risk_gap: f64,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Serialization(format!("{}: {other:?}", path.display())),
    }
}

/// Serialize any value as pretty JSON at `path`.
pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_report_json(path: &Path) -> Result<Vec<GapReport>> {
    read_json(path)
}

fn write_rows<T: Serialize>(rows: impl IntoIterator<Item = T>, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `plotdata_<name>.csv` with columns `series, x, mean, stderr`.
pub fn write_plot_data(name: &str, rows: &[PlotRow], dir: &Path) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let path = dir.join(format!("plotdata_{name}.csv"));
    write_rows(rows, &path)?;
    Ok(path)
}

/// Learning curves: mean accuracy gap per checkpoint, one series per report.
pub fn learning_curve_rows(reports: &[GapReport]) -> Vec<PlotRow> {
    let mut rows = Vec::new();
    for r in reports {
        let series = format!("{}_n{}", r.algorithm.name(), r.n_train());
        for (k, s) in r.summary.iter().enumerate() {
            let gaps: Vec<f64> = r.trials.iter().map(|t| t.checkpoints[k].gap()).collect();
            rows.push(PlotRow {
                series: series.clone(),
                x: s.iteration as f64,
                mean: s.gap_mean,
                stderr: stats::std_error(&gaps),
            });
        }
    }
    rows
}

/// Final mean gap against `n`, one series per sweep.
pub fn gap_vs_n_rows(sweeps: &[VsNReport]) -> Vec<PlotRow> {
    sweeps
        .iter()
        .flat_map(|s| {
            s.reports.iter().map(move |r| PlotRow {
                series: s.algorithm.name().to_string(),
                x: r.n_train() as f64,
                mean: r.final_gap_mean,
                stderr: stats::std_error(&r.final_gaps()),
            })
        })
        .collect()
}

/// Write `report.json` (json) or `trace.csv` plus the learning-curve plot
/// data (csv) into `dir`. Returns the written paths.
pub fn emit_report(reports: &[GapReport], format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    if reports.is_empty() {
        return Err(Error::InvalidInput("no reports to emit".into()));
    }
    ensure_dir(dir)?;
    match format {
        ReportFormat::Json => {
            let path = dir.join("report.json");
            write_json(reports, &path)?;
            Ok(vec![path])
        }
        ReportFormat::Csv => {
            let path = dir.join("trace.csv");
            let rows = reports.iter().flat_map(|r| {
                r.trials.iter().flat_map(move |t| {
                    t.checkpoints.iter().map(move |c| TraceRow {
                        algorithm: r.algorithm.name(),
                        n_train: r.n_train(),
                        trial: t.trial,
                        data_seed: t.data_seed,
                        train_seed: t.train_seed,
                        iteration: c.iteration,
                        train_acc: c.train_acc,
                        test_acc: c.test_acc,
                        train_risk: c.train_risk,
                        test_risk: c.test_risk,
                        gap: c.gap(),
                        risk_gap: c.risk_gap(),
                    })
                })
            });
            write_rows(rows, &path)?;
            let plot = write_plot_data("learning_curve", &learning_curve_rows(reports), dir)?;
            Ok(vec![path, plot])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::small;
    use super::super::*;
    use super::*;

    #[test]
    fn empty_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            emit_report(&[], ReportFormat::Json, dir.path()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn json_round_trip_and_csv_rows() {
        let mut cfg = small(Algorithm::Vanilla, 0.3);
        cfg.trials = 2;
        cfg.train.schedule = crate::trainers::StepSchedule::c_over_t(0.3);
        let r = run_gap_experiment(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_report(&[r.clone()], ReportFormat::Json, dir.path()).unwrap();
        let back = read_report_json(&paths[0]).unwrap();
        assert_eq!(back, vec![r.clone()]);
        let paths = emit_report(&[r.clone()], ReportFormat::Csv, dir.path()).unwrap();
        let mut rd = csv::Reader::from_path(&paths[0]).unwrap();
        assert_eq!(rd.records().count(), r.summary.len() * 2);
        let mut rd = csv::Reader::from_path(&paths[1]).unwrap();
        assert_eq!(rd.headers().unwrap(), vec!["series", "x", "mean", "stderr"]);
        assert_eq!(rd.records().count(), r.summary.len());
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let target = blocker.join("sub");
        let r = run_gap_experiment(&small(Algorithm::Fast, 0.2)).unwrap();
        let err = emit_report(&[r], ReportFormat::Json, &target).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("file"));
    }
}
