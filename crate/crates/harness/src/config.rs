//! Experiment configuration.
//!
//! A config file is flat `key = value` text using the long flag names as
//! keys; `#` starts a comment. Command-line flags override file values.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use vecshuffle_core::Calibration;

use crate::dataset::Normalize;
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    T,
    K,
    D,
    N,
    Eps,
}

impl Axis {
    /// Axes whose error curve is fitted with a power law.
    pub fn is_fitted(self) -> bool {
        matches!(self, Axis::D | Axis::N | Axis::Eps)
    }

    /// Axes whose values must be positive integers.
    fn is_integral(self) -> bool {
        !matches!(self, Axis::Eps)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::T => "t",
            Axis::K => "k",
            Axis::D => "d",
            Axis::N => "n",
            Axis::Eps => "eps",
        })
    }
}

impl FromStr for Axis {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t" => Ok(Axis::T),
            "k" => Ok(Axis::K),
            "d" => Ok(Axis::D),
            "n" => Ok(Axis::N),
            "eps" | "epsilon" => Ok(Axis::Eps),
            other => Err(HarnessError::Usage(format!(
                "unknown sweep axis {other:?}; expected t, k, d, n or eps"
            ))),
        }
    }
}

/// Quantization level: fixed, or re-chosen analytically at every point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KChoice {
    Fixed(u32),
    Auto,
}

impl fmt::Display for KChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KChoice::Fixed(k) => write!(f, "{k}"),
            KChoice::Auto => f.write_str("auto"),
        }
    }
}

impl FromStr for KChoice {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(KChoice::Auto);
        }
        match s.parse::<u32>() {
            Ok(k) if k >= 1 => Ok(KChoice::Fixed(k)),
            _ => Err(HarnessError::Usage(format!(
                "k must be a positive integer or \"auto\", got {s:?}"
            ))),
        }
    }
}

/// How `gamma` is set at each point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CalibrationMode {
    /// Single-coordinate analysis when `t = 1`, general analysis otherwise.
    Default,
    Theorem1,
    T1,
    Manual(f64),
}

impl CalibrationMode {
    pub fn resolve(self, t: usize) -> Calibration {
        match self {
            CalibrationMode::Default => Calibration::default_for(t),
            CalibrationMode::Theorem1 => Calibration::Theorem1,
            CalibrationMode::T1 => Calibration::SingleCoordinate,
            CalibrationMode::Manual(gamma) => Calibration::Manual(gamma),
        }
    }

    fn parse(name: &str, gamma: Option<f64>) -> Result<Self> {
        match (name, gamma) {
            ("default", _) => Ok(CalibrationMode::Default),
            ("theorem1", _) => Ok(CalibrationMode::Theorem1),
            ("t1", _) | ("t1-tight", _) => Ok(CalibrationMode::T1),
            ("manual", Some(g)) => Ok(CalibrationMode::Manual(g)),
            ("manual", None) => Err(HarnessError::Usage(
                "manual calibration needs --gamma".into(),
            )),
            (other, _) => Err(HarnessError::Usage(format!(
                "unknown calibration {other:?}; expected theorem1, t1 or manual"
            ))),
        }
    }
}

impl fmt::Display for CalibrationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CalibrationMode::Default => f.write_str("default"),
            CalibrationMode::Theorem1 => f.write_str("theorem1"),
            CalibrationMode::T1 => f.write_str("t1"),
            CalibrationMode::Manual(g) => write!(f, "manual({g})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub d: usize,
    pub k: KChoice,
    pub n: usize,
    pub t: usize,
    pub eps: f64,
    pub delta: f64,
    /// `None` for a single-point run.
    pub axis: Option<Axis>,
    pub values: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    /// CSV to ingest; synthetic heartbeat records when absent.
    pub dataset: Option<PathBuf>,
    pub drop_label: bool,
    pub normalize: Normalize,
    pub calibration: CalibrationMode,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            d: 100,
            k: KChoice::Fixed(3),
            n: 50_000,
            t: 1,
            eps: 0.95,
            delta: 0.5,
            axis: None,
            values: Vec::new(),
            trials: 30,
            seed: 0,
            dataset: None,
            drop_label: false,
            normalize: Normalize::None,
            calibration: CalibrationMode::Default,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Parameters of one sweep point, before `gamma` is calibrated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSetting {
    pub d: usize,
    pub k: KChoice,
    pub n: usize,
    pub t: usize,
    pub eps: f64,
    pub delta: f64,
}

fn integral(axis: Axis, value: f64) -> Result<usize> {
    if value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
        Ok(value as usize)
    } else {
        Err(HarnessError::Usage(format!(
            "axis {axis} needs positive integers, got {value}"
        )))
    }
}

impl ExperimentConfig {
    /// Checks the structural invariants: one axis with values, or none.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(HarnessError::Usage("trials must be positive".into()));
        }
        match (self.axis, self.values.is_empty()) {
            (Some(axis), true) => Err(HarnessError::Usage(format!(
                "sweep axis {axis} needs --values"
            ))),
            (None, false) => Err(HarnessError::Usage("--values needs --axis".into())),
            (Some(axis), false) => {
                if axis.is_integral() {
                    for &v in &self.values {
                        integral(axis, v)?;
                    }
                }
                Ok(())
            }
            (None, true) => Ok(()),
        }
    }

    /// Sweep values, or the single axis-less point.
    pub fn points(&self) -> Vec<f64> {
        if self.axis.is_some() {
            self.values.clone()
        } else {
            vec![f64::NAN]
        }
    }

    /// Setting at axis value `value`; every other parameter is the
    /// configured one.
    pub fn setting(&self, value: f64) -> Result<PointSetting> {
        let mut s = PointSetting {
            d: self.d,
            k: self.k,
            n: self.n,
            t: self.t,
            eps: self.eps,
            delta: self.delta,
        };
        match self.axis {
            None => {}
            Some(Axis::T) => s.t = integral(Axis::T, value)?,
            Some(Axis::K) => s.k = KChoice::Fixed(integral(Axis::K, value)? as u32),
            Some(Axis::D) => s.d = integral(Axis::D, value)?,
            Some(Axis::N) => s.n = integral(Axis::N, value)?,
            Some(Axis::Eps) => s.eps = value,
        }
        Ok(s)
    }

    /// Largest `n` and `d` over all points.
    pub fn extent(&self) -> Result<(usize, usize)> {
        let mut n = 0;
        let mut d = 0;
        for v in self.points() {
            let s = self.setting(v)?;
            n = n.max(s.n);
            d = d.max(s.d);
        }
        Ok((n, d))
    }

    /// Advisory text when `delta` is large relative to `1/n`.
    pub fn delta_advice(&self) -> Option<String> {
        let (n, _) = self.extent().ok()?;
        (self.delta >= 1.0 / n as f64).then(|| {
            format!(
                "delta = {} is at least 1/n = {}; such a delta permits releasing a user's data outright",
                self.delta,
                1.0 / n as f64
            )
        })
    }

    pub fn apply(&mut self, overrides: &Overrides) -> Result<()> {
        if let Some(v) = overrides.d {
            self.d = v;
        }
        if let Some(v) = overrides.k {
            self.k = v;
        }
        if let Some(v) = overrides.n {
            self.n = v;
        }
        if let Some(v) = overrides.t {
            self.t = v;
        }
        if let Some(v) = overrides.eps {
            self.eps = v;
        }
        if let Some(v) = overrides.delta {
            self.delta = v;
        }
        if let Some(v) = overrides.axis {
            self.axis = Some(v);
        }
        if let Some(v) = &overrides.values {
            self.values = v.clone();
        }
        if let Some(v) = overrides.trials {
            self.trials = v;
        }
        if let Some(v) = overrides.seed {
            self.seed = v;
        }
        if let Some(v) = &overrides.dataset {
            self.dataset = Some(v.clone());
        }
        if let Some(v) = overrides.drop_label {
            self.drop_label = v;
        }
        if let Some(v) = overrides.normalize {
            self.normalize = v;
        }
        if let Some(v) = &overrides.out_dir {
            self.out_dir = v.clone();
        }
        match (&overrides.calibration, overrides.gamma) {
            (Some(name), gamma) => self.calibration = CalibrationMode::parse(name, gamma)?,
            (None, Some(gamma)) => {
                if let CalibrationMode::Manual(_) = self.calibration {
                    self.calibration = CalibrationMode::Manual(gamma);
                } else {
                    return Err(HarnessError::Usage(
                        "--gamma is only meaningful with --calibration manual".into(),
                    ));
                }
            }
            (None, None) => {}
        }
        Ok(())
    }
}

/// Partial configuration from a file or from flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub d: Option<usize>,
    pub k: Option<KChoice>,
    pub n: Option<usize>,
    pub t: Option<usize>,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub axis: Option<Axis>,
    pub values: Option<Vec<f64>>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub dataset: Option<PathBuf>,
    pub drop_label: Option<bool>,
    pub normalize: Option<Normalize>,
    pub calibration: Option<String>,
    pub gamma: Option<f64>,
    pub out_dir: Option<PathBuf>,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| HarnessError::Usage(format!("invalid value {value:?} for {key}")))
}

/// Comma-separated list of reals.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value::<f64>("values", s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(HarnessError::Usage(format!(
            "invalid value {value:?} for {key}"
        ))),
    }
}

impl Overrides {
    /// Parses config-file text. Unknown keys are errors.
    pub fn parse_file_text(text: &str) -> Result<Overrides> {
        let mut o = Overrides::default();
        for (number, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HarnessError::Usage(format!(
                    "config line {}: expected key = value, got {raw:?}",
                    number + 1
                ))
            })?;
            let key = key.trim().trim_start_matches("--");
            let value = value.trim();
            match key {
                "d" => o.d = Some(parse_value(key, value)?),
                "k" => o.k = Some(value.parse()?),
                "n" => o.n = Some(parse_value(key, value)?),
                "t" => o.t = Some(parse_value(key, value)?),
                "eps" => o.eps = Some(parse_value(key, value)?),
                "delta" => o.delta = Some(parse_value(key, value)?),
                "axis" => o.axis = Some(value.parse()?),
                "values" => o.values = Some(parse_values(value)?),
                "trials" => o.trials = Some(parse_value(key, value)?),
                "seed" => o.seed = Some(parse_value(key, value)?),
                "dataset" => o.dataset = Some(PathBuf::from(value)),
                "drop-label" => o.drop_label = Some(parse_bool(key, value)?),
                "normalize" => o.normalize = Some(value.parse()?),
                "calibration" => o.calibration = Some(value.to_string()),
                "gamma" => o.gamma = Some(parse_value(key, value)?),
                "out-dir" => o.out_dir = Some(PathBuf::from(value)),
                other => {
                    return Err(HarnessError::Usage(format!(
                        "config line {}: unknown key {other:?}",
                        number + 1
                    )))
                }
            }
        }
        Ok(o)
    }

    pub fn read_file(path: &Path) -> Result<Overrides> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Overrides::parse_file_text(&text)
    }

    /// `self` with every field set in `other` replaced.
    pub fn merged(mut self, other: Overrides) -> Overrides {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if other.$field.is_some() { self.$field = other.$field; })*
            };
        }
        take!(
            d,
            k,
            n,
            t,
            eps,
            delta,
            axis,
            values,
            trials,
            seed,
            dataset,
            drop_label,
            normalize,
            calibration,
            gamma,
            out_dir
        );
        self
    }
}
