//! CSV artifacts.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a file back yields bit-identical values. An empty `value` cell stands for
//! the axis-less point of a single run.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{HarnessError, Result};
use crate::sweep::{SweepResults, TrialRow};

pub const TRIALS_HEADER: [&str; 7] = [
    "axis",
    "value",
    "trial",
    "seed",
    "total_sq_err",
    "normalized_mse",
    "bound_mse",
];

pub const SUMMARY_HEADER: [&str; 20] = [
    "axis",
    "value",
    "status",
    "note",
    "d",
    "k",
    "n",
    "t",
    "eps",
    "delta",
    "calibration",
    "gamma",
    "trials",
    "mean_mse",
    "stderr_mse",
    "median_mse",
    "bound_mse",
    "fit_exponent",
    "fit_prefactor",
    "fit_r2",
];

pub const PLOT_HEADER: [&str; 4] = ["x", "mean", "stderr", "fitted"];

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| HarnessError::csv(path, e))
}

pub fn write_trials_csv(path: &Path, rows: &[TrialRow]) -> Result<()> {
    let mut w = writer(path)?;
    let err = |e| HarnessError::csv(path, e);
    w.write_record(TRIALS_HEADER).map_err(err)?;
    for r in rows {
        w.write_record([
            r.axis.clone(),
            fmt_value(r.value),
            r.trial.to_string(),
            r.seed.to_string(),
            r.total_sq_err.to_string(),
            r.normalized_mse.to_string(),
            r.bound_mse.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, name: &str, cell: &str) -> Result<T> {
    cell.parse().map_err(|_| HarnessError::Cell {
        path: path.to_path_buf(),
        row: line,
        column: TRIALS_HEADER.iter().position(|h| *h == name).unwrap_or(0) + 1,
        message: format!("invalid {name} {cell:?}"),
    })
}

pub fn read_trials_csv(path: &Path) -> Result<Vec<TrialRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
    let header = reader.headers().map_err(|e| HarnessError::csv(path, e))?;
    if header.iter().ne(TRIALS_HEADER) {
        return Err(HarnessError::Usage(format!(
            "{}: unexpected header {:?}",
            path.display(),
            header
        )));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| HarnessError::csv(path, e))?;
        let line = i + 2;
        let value = match &record[1] {
            "" => f64::NAN,
            cell => field(path, line, "value", cell)?,
        };
        rows.push(TrialRow {
            axis: record[0].to_string(),
            value,
            trial: field(path, line, "trial", &record[2])?,
            seed: field(path, line, "seed", &record[3])?,
            total_sq_err: field(path, line, "total_sq_err", &record[4])?,
            normalized_mse: field(path, line, "normalized_mse", &record[5])?,
            bound_mse: field(path, line, "bound_mse", &record[6])?,
        });
    }
    Ok(rows)
}

pub fn write_summary_csv(path: &Path, results: &SweepResults) -> Result<()> {
    let mut w = writer(path)?;
    let err = |e| HarnessError::csv(path, e);
    w.write_record(SUMMARY_HEADER).map_err(err)?;
    let axis = results.axis_name();
    let fit = results.fit;
    for p in &results.points {
        let s = &p.point.setting;
        let (status, note, k, calibration, gamma, bound) = match &p.point.plan {
            Ok(plan) => (
                "ok",
                String::new(),
                plan.params.k.to_string(),
                format!("{:?}", plan.calibration),
                plan.params.gamma.to_string(),
                fmt_opt(plan.bound_mse),
            ),
            Err(reason) => (
                "skipped",
                reason.to_string(),
                s.k.to_string(),
                String::new(),
                String::new(),
                String::new(),
            ),
        };
        let stats = p.stats;
        w.write_record([
            axis.clone(),
            fmt_value(p.point.value),
            status.to_string(),
            note,
            s.d.to_string(),
            k,
            s.n.to_string(),
            s.t.to_string(),
            s.eps.to_string(),
            s.delta.to_string(),
            calibration,
            gamma,
            stats.map(|s| s.trials.to_string()).unwrap_or_default(),
            fmt_opt(stats.map(|s| s.mean)),
            fmt_opt(stats.map(|s| s.stderr)),
            fmt_opt(stats.map(|s| s.median)),
            bound,
            fmt_opt(fit.map(|f| f.exponent)),
            fmt_opt(fit.map(|f| f.prefactor)),
            fmt_opt(fit.map(|f| f.r_squared)),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// `x, mean, stderr, fitted` per feasible point; `fitted` is empty without
/// a fit.
pub fn write_plot_csv(path: &Path, results: &SweepResults) -> Result<()> {
    let mut w = writer(path)?;
    let err = |e| HarnessError::csv(path, e);
    w.write_record(PLOT_HEADER).map_err(err)?;
    for (point, _, stats) in results.feasible() {
        w.write_record([
            fmt_value(point.value),
            stats.mean.to_string(),
            stats.stderr.to_string(),
            fmt_opt(results.fit.map(|f| f.predict(point.value))),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub trials: PathBuf,
    pub summary: PathBuf,
    pub plot: Option<PathBuf>,
}

/// Writes `trials.csv`, `summary.csv` and, for sweeps, `plot_<axis>.csv`
/// into `dir`, creating it if needed.
pub fn emit_outputs(results: &SweepResults, dir: &Path) -> Result<Artifacts> {
    if results.rows.is_empty() {
        return Err(HarnessError::Usage("no results to write".into()));
    }
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let trials = dir.join("trials.csv");
    let summary = dir.join("summary.csv");
    write_trials_csv(&trials, &results.rows)?;
    write_summary_csv(&summary, results)?;
    let plot = match results.axis {
        Some(axis) => {
            let path = dir.join(format!("plot_{axis}.csv"));
            write_plot_csv(&path, results)?;
            Some(path)
        }
        None => None,
    };
    Ok(Artifacts {
        trials,
        summary,
        plot,
    })
}

/// Summary statistics as written to `summary.csv`, for feasible points.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRecord {
    pub axis: String,
    pub value: f64,
    pub trials: u64,
    pub mean: f64,
    pub stderr: f64,
    pub median: f64,
    pub fit_exponent: Option<f64>,
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
    let header = reader
        .headers()
        .map_err(|e| HarnessError::csv(path, e))?
        .clone();
    let column = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| {
            HarnessError::Usage(format!("{}: missing column {name}", path.display()))
        })
    };
    let axis = column("axis")?;
    let value = column("value")?;
    let status = column("status")?;
    let trials = column("trials")?;
    let mean = column("mean_mse")?;
    let stderr = column("stderr_mse")?;
    let median = column("median_mse")?;
    let exponent = column("fit_exponent")?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| HarnessError::csv(path, e))?;
        if &record[status] != "ok" {
            continue;
        }
        let line = i + 2;
        let num = |col: usize, name: &str| -> Result<f64> {
            record[col].parse().map_err(|_| HarnessError::Cell {
                path: path.to_path_buf(),
                row: line,
                column: col + 1,
                message: format!("invalid {name} {:?}", &record[col]),
            })
        };
        out.push(SummaryRecord {
            axis: record[axis].to_string(),
            value: if record[value].is_empty() {
                f64::NAN
            } else {
                num(value, "value")?
            },
            trials: num(trials, "trials")? as u64,
            mean: num(mean, "mean_mse")?,
            stderr: num(stderr, "stderr_mse")?,
            median: num(median, "median_mse")?,
            fit_exponent: if record[exponent].is_empty() {
                None
            } else {
                Some(num(exponent, "fit_exponent")?)
            },
        });
    }
    Ok(out)
}
