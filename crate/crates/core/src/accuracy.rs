//! Error measurement and closed-form error bounds.
//!
//! The error target is the sum of the values that were actually sampled: for
//! coordinate `l`, `s_l` is the sum of `x_i^(l)` over users who reported `l`.
//! Squared error is normalized by `(d/n)^2`, turning the error of sums into the
//! error of an average vector (each coordinate is reported about `n/d` times).

use crate::analyzer::EstimateVector;
use crate::params::{PrivacyBudget, ProtocolParams, Regime};
use crate::randomizer::{InputVector, Message};
use crate::{Error, Result};

/// Score of one run of the protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    /// `sum_l (z_l - s_l)^2`.
    pub total_squared_error: f64,
    /// `total_squared_error * (d/n)^2`.
    pub normalized_mse: f64,
    /// Signed `z_l - s_l` per coordinate.
    pub per_coordinate_errors: Vec<f64>,
}

/// Normalizing factor `(d/n)^2`.
pub fn normalization(params: &ProtocolParams) -> f64 {
    let r = params.d as f64 / params.n as f64;
    r * r
}

/// Per-coordinate true sums over the coordinates each user sampled.
///
/// `messages[i]` must be user `i`'s message, before shuffling.
pub fn sampled_truth(inputs: &[InputVector], messages: &[Message], d: usize) -> Result<Vec<f64>> {
    if inputs.len() != messages.len() {
        return Err(Error::DimensionMismatch {
            expected: inputs.len(),
            actual: messages.len(),
        });
    }
    let mut truth = vec![0.0; d];
    for (x, m) in inputs.iter().zip(messages) {
        if x.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: x.dim(),
            });
        }
        for e in m.entries() {
            if e.coordinate >= d {
                return Err(Error::MalformedMessage(format!(
                    "coordinate {} outside [0, {d})",
                    e.coordinate
                )));
            }
            truth[e.coordinate] += x.values()[e.coordinate];
        }
    }
    Ok(truth)
}

pub fn empirical_mse(
    estimates: &EstimateVector,
    truth: &[f64],
    params: &ProtocolParams,
) -> Result<TrialResult> {
    if estimates.dim() != params.d {
        return Err(Error::DimensionMismatch {
            expected: params.d,
            actual: estimates.dim(),
        });
    }
    if truth.len() != params.d {
        return Err(Error::DimensionMismatch {
            expected: params.d,
            actual: truth.len(),
        });
    }
    let per_coordinate_errors: Vec<f64> = estimates
        .values
        .iter()
        .zip(truth)
        .map(|(z, s)| z - s)
        .collect();
    let total_squared_error = per_coordinate_errors.iter().map(|e| e * e).sum::<f64>();
    Ok(TrialResult {
        total_squared_error,
        normalized_mse: total_squared_error * normalization(params),
        per_coordinate_errors,
    })
}

/// Which analysis a bound comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Analysis {
    /// Composition-based analysis, any `t`.
    General,
    /// Tightened analysis for `t = 1`.
    SingleCoordinate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    /// Upper bound on the normalized MSE.
    pub mse_bound: f64,
    /// Matching bound on the standard deviation of the average estimate.
    pub sigma_bound: f64,
    pub regime: Regime,
    pub analysis: Analysis,
}

struct BoundInputs {
    d: f64,
    n: f64,
    t: f64,
    eps: f64,
    delta: f64,
    one_minus_gamma: f64,
}

fn bound_inputs(params: &ProtocolParams, budget: &PrivacyBudget) -> Result<BoundInputs> {
    params.validate()?;
    if params.gamma >= 1.0 {
        return Err(Error::Infeasible(
            "error bounds are undefined for gamma = 1".into(),
        ));
    }
    Ok(BoundInputs {
        d: params.d as f64,
        n: params.n as f64,
        t: params.t as f64,
        eps: budget.epsilon(),
        delta: budget.delta(),
        one_minus_gamma: 1.0 - params.gamma,
    })
}

fn mse_general(b: &BoundInputs, regime: Regime) -> f64 {
    let logs = (1.0 / b.delta).ln() * (2.0 * b.t / b.delta).ln();
    let (lead, inner) = match regime {
        Regime::Small => (2.0, 14.0),
        Regime::Moderate => (8.0, 63.0),
    };
    lead * b.t * b.d.powf(8.0 / 3.0) * (inner * logs).powf(2.0 / 3.0)
        / (b.one_minus_gamma.powi(2) * b.n.powf(5.0 / 3.0) * b.eps.powf(4.0 / 3.0))
}

fn sigma_general(b: &BoundInputs, regime: Regime) -> f64 {
    let logs = (1.0 / b.delta).ln() * (2.0 * b.t / b.delta).ln();
    let (lead, inner) = match regime {
        Regime::Small => (2.0, 14.0),
        Regime::Moderate => (8.0, 63.0),
    };
    (lead * b.t).sqrt() * b.d.powf(4.0 / 3.0) * (inner * logs).cbrt()
        / (b.one_minus_gamma * b.n.powf(5.0 / 6.0) * b.eps.powf(2.0 / 3.0))
}

fn mse_single(b: &BoundInputs, regime: Regime) -> f64 {
    let scale = b.d.powf(8.0 / 3.0) / (b.one_minus_gamma.powi(2) * b.n.powf(5.0 / 3.0));
    let log_term = (2.0 / b.delta).ln();
    let (chernoff, linear) = match regime {
        Regime::Small => (
            98f64.cbrt() * log_term.powf(2.0 / 3.0) / b.eps.powf(4.0 / 3.0),
            18.0 / (4.0 * b.eps).powf(2.0 / 3.0),
        ),
        Regime::Moderate => (
            2.0 * (20.0 * log_term).powf(2.0 / 3.0) / b.eps.powf(4.0 / 3.0),
            2.0 * 9f64.powf(2.0 / 3.0) / (11.0 * b.eps).powf(2.0 / 3.0),
        ),
    };
    scale * chernoff.max(linear)
}

fn sigma_single(b: &BoundInputs, regime: Regime) -> f64 {
    let scale = b.d.powf(4.0 / 3.0) / (b.one_minus_gamma * b.n.powf(5.0 / 6.0));
    let log_term = (2.0 / b.delta).ln();
    let (chernoff, linear) = match regime {
        Regime::Small => (
            98f64.powf(1.0 / 6.0) * log_term.cbrt() / b.eps.powf(2.0 / 3.0),
            18f64.sqrt() / (4.0 * b.eps).cbrt(),
        ),
        Regime::Moderate => (
            2f64.sqrt() * (20.0 * log_term).cbrt() / b.eps.powf(2.0 / 3.0),
            2f64.sqrt() * 9f64.cbrt() / (11.0 * b.eps).cbrt(),
        ),
    };
    scale * chernoff.max(linear)
}

/// Normalized-MSE bound of the general analysis at the given calibration.
pub fn bound_mse_general(params: &ProtocolParams, budget: &PrivacyBudget) -> Result<BoundReport> {
    bound(params, budget, Analysis::General)
}

/// Tightened normalized-MSE bound; `t` must be 1.
pub fn bound_mse_t1(params: &ProtocolParams, budget: &PrivacyBudget) -> Result<BoundReport> {
    bound(params, budget, Analysis::SingleCoordinate)
}

/// Standard-deviation bound for the chosen analysis. Its square equals the
/// matching MSE bound.
pub fn bound_sigma(
    params: &ProtocolParams,
    budget: &PrivacyBudget,
    analysis: Analysis,
) -> Result<BoundReport> {
    bound(params, budget, analysis)
}

fn bound(
    params: &ProtocolParams,
    budget: &PrivacyBudget,
    analysis: Analysis,
) -> Result<BoundReport> {
    let inputs = bound_inputs(params, budget)?;
    let regime = budget.regime();
    let (mse_bound, sigma_bound) = match analysis {
        Analysis::General => (mse_general(&inputs, regime), sigma_general(&inputs, regime)),
        Analysis::SingleCoordinate => {
            if params.t != 1 {
                return Err(Error::InvalidParams(format!(
                    "the single-coordinate bound needs t = 1, got {}",
                    params.t
                )));
            }
            (mse_single(&inputs, regime), sigma_single(&inputs, regime))
        }
    };
    Ok(BoundReport {
        mse_bound,
        sigma_bound,
        regime,
        analysis,
    })
}

/// Least-squares fit of `y = a * x^b` in log-log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
}

impl PowerLawFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.prefactor * x.powf(self.exponent)
    }
}

pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            actual: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(Error::Degenerate(format!(
            "need at least 3 points, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Domain(
            "power-law fit needs positive finite data".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx <= f64::EPSILON * m {
        return Err(Error::Degenerate("x values are constant".into()));
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - exponent * x).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(PowerLawFit {
        exponent,
        prefactor: intercept.exp(),
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults(gamma: f64) -> (ProtocolParams, PrivacyBudget) {
        (
            ProtocolParams::new(100, 3, 50000, 1, gamma).unwrap(),
            PrivacyBudget::new(0.95, 0.5).unwrap(),
        )
    }

    #[test]
    fn perfect_estimator_scores_zero() {
        let (p, _) = defaults(0.1);
        let est = EstimateVector {
            values: vec![2.0; 100],
            counts: vec![4; 100],
        };
        let r = empirical_mse(&est, &[2.0; 100], &p).unwrap();
        assert_eq!(r.total_squared_error, 0.0);
        assert_eq!(r.normalized_mse, 0.0);
    }

    #[test]
    fn single_coordinate_arithmetic() {
        let p = ProtocolParams::new(2, 1, 2, 1, 0.0).unwrap();
        let est = EstimateVector {
            values: vec![1.5, 0.0],
            counts: vec![1, 0],
        };
        let r = empirical_mse(&est, &[1.0, 0.0], &p).unwrap();
        assert_eq!(r.normalized_mse, 0.25);
        assert_eq!(r.per_coordinate_errors, vec![0.5, 0.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let (p, _) = defaults(0.1);
        let est = EstimateVector {
            values: vec![0.0; 3],
            counts: vec![0; 3],
        };
        assert!(empirical_mse(&est, &[0.0; 3], &p).is_err());
    }

    // Both transcriptions below are independent of the implementation above
    // and were cross-checked with 40-digit arithmetic.
    #[test]
    fn bounds_at_defaults() {
        let gamma = 0.170_529_726_384_001_36;
        let (p, b) = defaults(gamma);
        let g = bound_mse_general(&p, &b).unwrap();
        let s = bound_mse_t1(&p, &b).unwrap();
        let transcribed_general =
            2.0 * 100f64.powf(8.0 / 3.0) * (14.0 * 2f64.ln() * 4f64.ln()).powf(2.0 / 3.0)
                / ((1.0 - gamma).powi(2) * 50000f64.powf(5.0 / 3.0) * 0.95f64.powf(4.0 / 3.0));
        assert!((g.mse_bound / transcribed_general - 1.0).abs() < 1e-12);
        assert!((g.mse_bound / 0.055_896_699_362_423_88 - 1.0).abs() < 1e-10);
        assert!((s.mse_bound / 0.034_108_695_803_467_17 - 1.0).abs() < 1e-10);
        assert!((s.sigma_bound / 0.184_685_396_833_282_9 - 1.0).abs() < 1e-10);
        assert!(s.mse_bound <= g.mse_bound);
        assert_eq!(g.analysis, Analysis::General);
        assert_eq!(s.regime, Regime::Small);
    }

    #[test]
    fn moderate_regime_values() {
        let p = ProtocolParams::new(50, 3, 100_000, 2, 0.3).unwrap();
        let b = PrivacyBudget::new(2.0, 0.1).unwrap();
        let g = bound_mse_general(&p, &b).unwrap();
        assert_eq!(g.regime, Regime::Moderate);
        assert!((g.mse_bound / 0.134_515_104_826_527_92 - 1.0).abs() < 1e-10);
        let p1 = ProtocolParams::new(50, 3, 100_000, 1, 0.3).unwrap();
        let s = bound_mse_t1(&p1, &b).unwrap();
        assert!((s.mse_bound / 0.003_906_033_186_906_614 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn homogeneity() {
        let (p, b) = defaults(0.2);
        let base = bound_mse_general(&p, &b).unwrap().mse_bound;
        let base1 = bound_mse_t1(&p, &b).unwrap().mse_bound;
        let dd = ProtocolParams { d: 200, ..p };
        let nn = ProtocolParams { n: 100_000, ..p };
        let r = bound_mse_general(&dd, &b).unwrap().mse_bound / base;
        assert!((r - 2f64.powf(8.0 / 3.0)).abs() < 1e-9);
        let r = bound_mse_t1(&dd, &b).unwrap().mse_bound / base1;
        assert!((r - 6.349_604_207_872_798).abs() < 1e-9);
        let r = bound_mse_general(&nn, &b).unwrap().mse_bound / base;
        assert!((r - 0.314_980_262_473_718_3).abs() < 1e-9);
    }

    #[test]
    fn t1_bound_guard_and_infeasible_gamma() {
        let p = ProtocolParams::new(10, 3, 1000, 2, 0.2).unwrap();
        let b = PrivacyBudget::new(0.5, 0.1).unwrap();
        assert!(bound_mse_t1(&p, &b).is_err());
        let p = ProtocolParams::new(10, 3, 1000, 1, 1.0).unwrap();
        assert!(matches!(
            bound_mse_general(&p, &b),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn power_law_exact_fits() {
        let xs = [1.0, 2.0, 3.0, 5.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        let f = fit_power_law(&xs, &ys).unwrap();
        assert!((f.exponent - 2.0).abs() < 1e-12);
        assert!((f.prefactor - 3.0).abs() < 1e-10);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let ys: Vec<f64> = xs.iter().map(|x| 5.0 / x).collect();
        assert!((fit_power_law(&xs, &ys).unwrap().exponent + 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_law_errors() {
        assert!(fit_power_law(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(fit_power_law(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(fit_power_law(&[1.0, 2.0, -3.0], &[1.0, 2.0, 3.0]).is_err());
    }
}
