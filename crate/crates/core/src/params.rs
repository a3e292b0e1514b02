//! Privacy budgets and protocol parameter calibration.
//!
//! The blanket probability `gamma` is calibrated either through the
//! composition-based analysis that covers any `t` ([`calibrate_gamma_general`])
//! or through the tighter single-coordinate analysis that only applies when
//! `t = 1` ([`calibrate_gamma_t1`]). Both split on the privacy regime: the
//! constants for `epsilon < 1` differ from those for `1 <= epsilon < 6`, and
//! `epsilon = 1` belongs to the upper regime. All logarithms are natural.

use crate::{Error, Result};

/// Exclusive upper limit on `epsilon` covered by the analysis.
pub const EPSILON_LIMIT: f64 = 6.0;

/// Which set of constants applies to a given `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `0 < epsilon < 1`.
    Small,
    /// `1 <= epsilon < 6`.
    Moderate,
}

impl Regime {
    pub fn of(epsilon: f64) -> Regime {
        if epsilon < 1.0 {
            Regime::Small
        } else {
            Regime::Moderate
        }
    }

    /// Constant in the general-`t` formula for `gamma`.
    fn gamma_constant(self) -> f64 {
        match self {
            Regime::Small => 56.0,
            Regime::Moderate => 2016.0,
        }
    }

    /// Half of [`Self::gamma_constant`]; the coefficient of `k` in the
    /// error objective `1/(4k^2) + C k`.
    pub fn objective_constant(self) -> f64 {
        self.gamma_constant() / 2.0
    }

    /// Divisor applied to `epsilon` when splitting it across folds.
    fn split_factor(self) -> f64 {
        match self {
            Regime::Small => 2.0,
            Regime::Moderate => 12.0,
        }
    }
}

/// Target `(epsilon, delta)` for the whole mechanism.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
}

impl PrivacyBudget {
    /// Requires `0 < epsilon < 6` and `0 < delta <= 1`.
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidBudget(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if epsilon >= EPSILON_LIMIT {
            return Err(Error::InvalidBudget(format!(
                "epsilon must be below {EPSILON_LIMIT}, got {epsilon}"
            )));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidBudget(format!(
                "delta must lie in (0, 1], got {delta}"
            )));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn regime(&self) -> Regime {
        Regime::of(self.epsilon)
    }
}

/// Fully calibrated configuration of the mechanism.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    /// Vector dimension.
    pub d: usize,
    /// Quantization level; encoded values live in `{0, ..., k}`.
    pub k: u32,
    /// Number of users.
    pub n: usize,
    /// Coordinates sampled per user.
    pub t: usize,
    /// Blanket probability.
    pub gamma: f64,
}

impl ProtocolParams {
    pub fn new(d: usize, k: u32, n: usize, t: usize, gamma: f64) -> Result<Self> {
        let params = Self { d, k, n, t, gamma };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidParams("d must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidParams("k must be at least 1".into()));
        }
        if self.n < 2 {
            return Err(Error::InvalidParams(format!(
                "n must be at least 2, got {}",
                self.n
            )));
        }
        if self.t == 0 || self.t > self.d {
            return Err(Error::InvalidParams(format!(
                "t must lie in [1, d = {}], got {}",
                self.d, self.t
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidParams(format!(
                "gamma must lie in [0, 1], got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Number of symbols the randomized response runs over.
    pub fn domain_size(&self) -> u32 {
        self.k + 1
    }
}

/// Per-fold budget that composes to a target budget over `folds` folds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComposedBudget {
    pub epsilon_prime: f64,
    pub delta_prime: f64,
    pub folds: usize,
}

/// Splits `budget` into a per-fold budget for `r`-fold advanced composition.
///
/// `epsilon' = epsilon / (2 sqrt(2 r ln(1/delta)))` below `epsilon = 1`, and
/// six times smaller (`/ 12`) in the moderate regime; `delta' = delta / r`.
pub fn compose_epsilon_prime(budget: &PrivacyBudget, r: usize) -> Result<ComposedBudget> {
    if r == 0 {
        return Err(Error::InvalidParams("composition needs r >= 1".into()));
    }
    let log_inv_delta = (1.0 / budget.delta).ln();
    if log_inv_delta <= 0.0 {
        return Err(Error::Infeasible(
            "delta = 1 leaves no slack for composition".into(),
        ));
    }
    let denom = budget.regime().split_factor() * (2.0 * r as f64 * log_inv_delta).sqrt();
    Ok(ComposedBudget {
        epsilon_prime: budget.epsilon / denom,
        delta_prime: budget.delta / r as f64,
        folds: r,
    })
}

/// Total `epsilon` after `r`-fold adaptive composition of
/// `(epsilon', delta')`-DP mechanisms, at additional failure probability
/// `delta`.
pub fn advanced_composition(epsilon_prime: f64, r: usize, delta: f64) -> Result<f64> {
    if !(epsilon_prime >= 0.0 && epsilon_prime.is_finite()) {
        return Err(Error::Domain(format!(
            "epsilon' must be non-negative, got {epsilon_prime}"
        )));
    }
    if r == 0 {
        return Err(Error::InvalidParams("composition needs r >= 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let r = r as f64;
    Ok((2.0 * r * (1.0 / delta).ln()).sqrt() * epsilon_prime
        + r * epsilon_prime * epsilon_prime.exp_m1())
}

fn check_dims(d: usize, k: u32, n: usize, t: usize) -> Result<()> {
    // gamma is not known yet; any valid probability passes the check.
    ProtocolParams::new(d, k, n, t, 0.0).map(|_| ())
}

fn feasible(gamma: f64, what: &str) -> Result<f64> {
    if gamma.is_nan() || gamma > 1.0 {
        return Err(Error::Infeasible(format!(
            "{what} calibration gives gamma = {gamma:.6} > 1"
        )));
    }
    Ok(gamma)
}

/// Blanket probability for any `t` via per-coordinate analysis plus advanced
/// composition over the `t` sampled coordinates.
pub fn calibrate_gamma_general(
    budget: &PrivacyBudget,
    d: usize,
    k: u32,
    n: usize,
    t: usize,
) -> Result<f64> {
    check_dims(d, k, n, t)?;
    let eps = budget.epsilon;
    let delta = budget.delta;
    let gamma = budget.regime().gamma_constant()
        * d as f64
        * k as f64
        * (1.0 / delta).ln()
        * (2.0 * t as f64 / delta).ln()
        / ((n - 1) as f64 * eps * eps);
    feasible(gamma, "general")
}

/// Blanket probability for `t = 1`, where no composition step is needed.
pub fn calibrate_gamma_t1(budget: &PrivacyBudget, d: usize, k: u32, n: usize) -> Result<f64> {
    check_dims(d, k, n, 1)?;
    let eps = budget.epsilon;
    let dk = d as f64 * k as f64;
    let m = (n - 1) as f64;
    let log_term = (2.0 / budget.delta).ln();
    let (chernoff, linear) = match budget.regime() {
        Regime::Small => (
            14.0 * dk * log_term / (m * eps * eps),
            27.0 * dk / (m * eps),
        ),
        Regime::Moderate => (
            80.0 * dk * log_term / (m * eps * eps),
            36.0 * dk / (11.0 * m * eps),
        ),
    };
    feasible(chernoff.max(linear), "t = 1")
}

/// The coefficient `C` of the error objective `1/(4k^2) + C k` that the
/// general-`t` analysis minimizes over `k`.
pub fn error_objective_slope(budget: &PrivacyBudget, d: usize, n: usize, t: usize) -> f64 {
    let eps = budget.epsilon;
    budget.regime().objective_constant()
        * d as f64
        * (1.0 / budget.delta).ln()
        * (2.0 * t as f64 / budget.delta).ln()
        / ((n.max(2) - 1) as f64 * eps * eps)
}

/// Quantization level minimizing `1/(4k^2) + C k` for the general analysis.
///
/// The real minimizer is `(1 / (2C))^(1/3)`. Of its floor and ceiling, the one
/// with the smaller objective is returned, so the result is the integer
/// minimizer of the convex objective. Never below 1.
pub fn choose_k_general(budget: &PrivacyBudget, d: usize, n: usize, t: usize) -> u32 {
    let slope = error_objective_slope(budget, d, n, t);
    let objective = |k: f64| 0.25 / (k * k) + slope * k;
    let real = (1.0 / (2.0 * slope)).cbrt();
    if !real.is_finite() || real >= u32::MAX as f64 {
        return u32::MAX;
    }
    let lo = real.floor().max(1.0);
    let hi = real.ceil().max(1.0);
    let best = if objective(hi) < objective(lo) {
        hi
    } else {
        lo
    };
    best as u32
}

/// Closed-form quantization level for `t = 1`, rounded to the nearest
/// integer and clamped to at least 1.
pub fn choose_k_t1(budget: &PrivacyBudget, d: usize, n: usize) -> u32 {
    let eps = budget.epsilon;
    let d = d as f64;
    let n = n as f64;
    let log_term = (2.0 / budget.delta).ln();
    let real = match budget.regime() {
        Regime::Small => (n * eps * eps / (28.0 * d * log_term))
            .cbrt()
            .min((n * eps / (54.0 * d)).cbrt()),
        Regime::Moderate => (n * eps * eps / (160.0 * d * log_term))
            .cbrt()
            .min((11.0 * n * eps / (72.0 * d)).cbrt()),
    };
    if !real.is_finite() || real >= u32::MAX as f64 {
        return u32::MAX;
    }
    real.round().max(1.0) as u32
}

/// How `gamma` is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Calibration {
    /// General analysis, any `t`.
    Theorem1,
    /// Tight single-coordinate analysis, `t = 1` only.
    SingleCoordinate,
    /// Caller-supplied `gamma`; no privacy claim is made.
    Manual(f64),
}

impl Calibration {
    /// Tightest analysis that applies to `t`.
    pub fn default_for(t: usize) -> Calibration {
        if t == 1 {
            Calibration::SingleCoordinate
        } else {
            Calibration::Theorem1
        }
    }

    pub fn gamma(
        &self,
        budget: &PrivacyBudget,
        d: usize,
        k: u32,
        n: usize,
        t: usize,
    ) -> Result<f64> {
        match *self {
            Calibration::Theorem1 => calibrate_gamma_general(budget, d, k, n, t),
            Calibration::SingleCoordinate => {
                if t != 1 {
                    return Err(Error::InvalidParams(format!(
                        "single-coordinate calibration requires t = 1, got {t}"
                    )));
                }
                calibrate_gamma_t1(budget, d, k, n)
            }
            Calibration::Manual(gamma) => {
                check_dims(d, k, n, t)?;
                if !(0.0..=1.0).contains(&gamma) {
                    return Err(Error::Infeasible(format!(
                        "manual gamma {gamma} is not a probability"
                    )));
                }
                Ok(gamma)
            }
        }
    }

    /// Analytic choice of `k` matching this calibration.
    pub fn choose_k(&self, budget: &PrivacyBudget, d: usize, n: usize, t: usize) -> u32 {
        match self {
            Calibration::SingleCoordinate => choose_k_t1(budget, d, n),
            Calibration::Manual(_) if t == 1 => choose_k_t1(budget, d, n),
            _ => choose_k_general(budget, d, n, t),
        }
    }

    pub fn params(
        &self,
        budget: &PrivacyBudget,
        d: usize,
        k: u32,
        n: usize,
        t: usize,
    ) -> Result<ProtocolParams> {
        let gamma = self.gamma(budget, d, k, n, t)?;
        ProtocolParams::new(d, k, n, t, gamma)
    }
}
