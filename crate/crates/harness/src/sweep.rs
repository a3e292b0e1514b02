//! Seeded sweep execution.
//!
//! Point `i`, trial `j` runs on seed `derive_seed(master, [i, j])`. Trials of
//! a point run in parallel and are collected in trial order, so results do
//! not depend on scheduling.

use log::{info, warn};
use rayon::prelude::*;
use vecshuffle_core::accuracy::{
    bound_mse_general, bound_mse_t1, empirical_mse, fit_power_law, sampled_truth, PowerLawFit,
    TrialResult,
};
use vecshuffle_core::analyzer::{analyze, shuffle};
use vecshuffle_core::randomizer::{randomize_vector, Message};
use vecshuffle_core::rng::{derive_seed, RngSeed};
use vecshuffle_core::{Calibration, InputVector, PrivacyBudget, ProtocolParams};

use crate::config::{Axis, ExperimentConfig, KChoice, PointSetting};
use crate::dataset::{synthetic_ecg_table, IngestOptions, Provenance, Table};
use crate::error::{HarnessError, Result};

/// One full protocol run: randomize every user, shuffle, analyze, score.
pub fn run_trial(
    params: &ProtocolParams,
    data: &[InputVector],
    seed: RngSeed,
) -> Result<TrialResult> {
    if data.len() != params.n {
        return Err(vecshuffle_core::Error::DimensionMismatch {
            expected: params.n,
            actual: data.len(),
        }
        .into());
    }
    let messages = data
        .iter()
        .enumerate()
        .map(|(i, x)| randomize_vector(x, params, &mut seed.user_rng(i)))
        .collect::<vecshuffle_core::Result<Vec<Message>>>()?;
    let truth = sampled_truth(data, &messages, params.d)?;
    let batch = shuffle(messages, &mut seed.shuffler_rng())?;
    let estimate = analyze(&batch, params)?;
    Ok(empirical_mse(&estimate, &truth, params)?)
}

/// A calibrated, runnable point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plan {
    pub params: ProtocolParams,
    pub budget: PrivacyBudget,
    pub calibration: Calibration,
    /// Matching theoretical bound on the normalized MSE, when it exists.
    pub bound_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedPoint {
    pub index: usize,
    /// Axis value; NaN for a single-point run.
    pub value: f64,
    pub setting: PointSetting,
    /// The plan, or why the point is skipped.
    pub plan: std::result::Result<Plan, vecshuffle_core::Error>,
}

fn calibrate(config: &ExperimentConfig, setting: &PointSetting) -> vecshuffle_core::Result<Plan> {
    let budget = PrivacyBudget::new(setting.eps, setting.delta)?;
    let calibration = config.calibration.resolve(setting.t);
    let k = match setting.k {
        KChoice::Fixed(k) => k,
        KChoice::Auto => calibration.choose_k(&budget, setting.d, setting.n, setting.t),
    };
    let params = calibration.params(&budget, setting.d, k, setting.n, setting.t)?;
    let single = match calibration {
        Calibration::SingleCoordinate => true,
        Calibration::Manual(_) => setting.t == 1,
        Calibration::Theorem1 => false,
    };
    let bound = if single {
        bound_mse_t1(&params, &budget)
    } else {
        bound_mse_general(&params, &budget)
    };
    Ok(Plan {
        params,
        budget,
        calibration,
        bound_mse: bound.ok().map(|b| b.mse_bound),
    })
}

pub fn plan_point(config: &ExperimentConfig, index: usize, value: f64) -> Result<PlannedPoint> {
    let setting = config.setting(value)?;
    let plan = calibrate(config, &setting);
    Ok(PlannedPoint {
        index,
        value,
        setting,
        plan,
    })
}

pub fn plan_points(config: &ExperimentConfig) -> Result<Vec<PlannedPoint>> {
    config.validate()?;
    config
        .points()
        .into_iter()
        .enumerate()
        .map(|(i, v)| plan_point(config, i, v))
        .collect()
}

/// Long-form result row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    /// Axis name, or `none` for a single-point run.
    pub axis: String,
    pub value: f64,
    pub trial: u64,
    pub seed: u64,
    pub total_sq_err: f64,
    pub normalized_mse: f64,
    pub bound_mse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointStats {
    pub trials: u64,
    pub mean: f64,
    /// Standard error of the mean.
    pub stderr: f64,
    pub median: f64,
}

impl PointStats {
    pub fn of(samples: &[f64]) -> PointStats {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        PointStats {
            trials: n as u64,
            mean,
            stderr,
            median,
        }
    }
}

fn same_value(a: f64, b: f64) -> bool {
    a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())
}

/// Per-point statistics of `normalized_mse`, in order of first appearance.
pub fn summarize_rows(rows: &[TrialRow]) -> Vec<(String, f64, PointStats)> {
    let mut groups: Vec<(String, f64, Vec<f64>)> = Vec::new();
    for row in rows {
        match groups
            .iter_mut()
            .find(|(axis, value, _)| *axis == row.axis && same_value(*value, row.value))
        {
            Some(group) => group.2.push(row.normalized_mse),
            None => groups.push((row.axis.clone(), row.value, vec![row.normalized_mse])),
        }
    }
    groups
        .into_iter()
        .map(|(axis, value, samples)| (axis, value, PointStats::of(&samples)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub point: PlannedPoint,
    /// `None` for skipped points.
    pub stats: Option<PointStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResults {
    pub axis: Option<Axis>,
    pub rows: Vec<TrialRow>,
    pub points: Vec<PointSummary>,
    /// Power-law fit of mean MSE against the axis value for d, n and eps.
    pub fit: Option<PowerLawFit>,
    pub provenance: Provenance,
}

impl SweepResults {
    pub fn axis_name(&self) -> String {
        axis_name(self.axis)
    }

    pub fn feasible(&self) -> impl Iterator<Item = (&PlannedPoint, &Plan, &PointStats)> {
        self.points
            .iter()
            .filter_map(|p| match (&p.point.plan, &p.stats) {
                (Ok(plan), Some(stats)) => Some((&p.point, plan, stats)),
                _ => None,
            })
    }
}

pub fn axis_name(axis: Option<Axis>) -> String {
    axis.map_or_else(|| "none".to_string(), |a| a.to_string())
}

/// Rows used when no dataset file is configured.
fn synthetic_rows(config: &ExperimentConfig) -> Result<usize> {
    Ok(config.extent()?.0)
}

/// The configured dataset, or synthetic heartbeat records seeded from the
/// master seed.
pub fn load_table(config: &ExperimentConfig) -> Result<Table> {
    match &config.dataset {
        Some(path) => Table::read_csv(
            path,
            IngestOptions {
                drop_label: config.drop_label,
                normalize: config.normalize,
            },
        ),
        None => Ok(synthetic_ecg_table(
            synthetic_rows(config)?,
            derive_seed(config.seed, &[u64::MAX]),
        )),
    }
}

pub fn trial_seed(config: &ExperimentConfig, index: usize, trial: u64) -> u64 {
    derive_seed(config.seed, &[index as u64, trial])
}

fn run_point(
    config: &ExperimentConfig,
    table: &Table,
    point: &PlannedPoint,
    plan: &Plan,
) -> Result<Vec<TrialRow>> {
    let data = table.shape(plan.params.n, plan.params.d)?;
    let axis = axis_name(config.axis);
    let bound = plan.bound_mse.unwrap_or(f64::NAN);
    (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = trial_seed(config, point.index, trial);
            let result = run_trial(&plan.params, &data.rows, RngSeed(seed))?;
            Ok(TrialRow {
                axis: axis.clone(),
                value: point.value,
                trial,
                seed,
                total_sq_err: result.total_squared_error,
                normalized_mse: result.normalized_mse,
                bound_mse: bound,
            })
        })
        .collect()
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResults> {
    let table = load_table(config)?;
    run_sweep_on(config, &table)
}

/// [`run_sweep`] on an already loaded table.
pub fn run_sweep_on(config: &ExperimentConfig, table: &Table) -> Result<SweepResults> {
    if let Some(advice) = config.delta_advice() {
        warn!("{advice}");
    }
    let planned = plan_points(config)?;
    let mut rows = Vec::new();
    let mut points = Vec::with_capacity(planned.len());
    for point in planned {
        let stats = match &point.plan {
            Err(reason) => {
                warn!(
                    "skipping {}={}: {reason}",
                    axis_name(config.axis),
                    point.value
                );
                None
            }
            Ok(plan) => {
                info!(
                    "point {}={}: d={} k={} n={} t={} gamma={}",
                    axis_name(config.axis),
                    point.value,
                    plan.params.d,
                    plan.params.k,
                    plan.params.n,
                    plan.params.t,
                    plan.params.gamma
                );
                let point_rows = run_point(config, table, &point, plan)?;
                let samples: Vec<f64> = point_rows.iter().map(|r| r.normalized_mse).collect();
                rows.extend(point_rows);
                Some(PointStats::of(&samples))
            }
        };
        points.push(PointSummary { point, stats });
    }
    let results = SweepResults {
        axis: config.axis,
        fit: None,
        rows,
        points,
        provenance: table.provenance().clone(),
    };
    if results.feasible().next().is_none() {
        if let [only] = &results.points[..] {
            only.point.plan.clone()?;
        }
        let reasons: Vec<String> = results
            .points
            .iter()
            .filter_map(|p| p.point.plan.as_ref().err().map(ToString::to_string))
            .collect();
        return Err(HarnessError::NoFeasiblePoints(reasons.join("; ")));
    }
    let fit = fit_results(&results);
    Ok(SweepResults { fit, ..results })
}

fn fit_results(results: &SweepResults) -> Option<PowerLawFit> {
    if !results.axis.is_some_and(Axis::is_fitted) {
        return None;
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = results
        .feasible()
        .map(|(point, _, stats)| (point.value, stats.mean))
        .unzip();
    match fit_power_law(&xs, &ys) {
        Ok(fit) => Some(fit),
        Err(e) => {
            warn!("no power-law fit: {e}");
            None
        }
    }
}

/// Recomputes one long-form row from the configuration and its stored seed.
pub fn replay(config: &ExperimentConfig, table: &Table, row: &TrialRow) -> Result<TrialResult> {
    let index = config
        .points()
        .iter()
        .position(|&v| same_value(v, row.value))
        .ok_or_else(|| {
            HarnessError::Usage(format!("value {} is not a point of this sweep", row.value))
        })?;
    let point = plan_point(config, index, row.value)?;
    let plan = point.plan?;
    let data = table.shape(plan.params.n, plan.params.d)?;
    run_trial(&plan.params, &data.rows, RngSeed(row.seed))
}
