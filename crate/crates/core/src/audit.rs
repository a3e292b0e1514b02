//! Executable checks of the privacy argument.
//!
//! Two kinds of check live here. The exact ones evaluate the binomial tail
//! events that the per-coordinate privacy argument bounds with Chernoff
//! inequalities. The Monte-Carlo one runs the whole mechanism on a tiny pair of
//! neighbouring datasets and estimates how far apart the two output
//! distributions are.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::params::{PrivacyBudget, ProtocolParams};
use crate::randomizer::{randomize_vector, InputVector};
use crate::rng::RngSeed;
use crate::{Error, Result};

/// Two datasets that differ only in the last user's input.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborPair {
    dataset: Vec<InputVector>,
    alt_last: InputVector,
}

impl NeighborPair {
    pub fn new(dataset: Vec<InputVector>, alt_last: InputVector) -> Result<Self> {
        if dataset.len() < 2 {
            return Err(Error::InvalidParams("a neighbour pair needs n >= 2".into()));
        }
        let d = dataset[0].dim();
        if let Some(bad) = dataset
            .iter()
            .chain(std::iter::once(&alt_last))
            .find(|x| x.dim() != d)
        {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: bad.dim(),
            });
        }
        Ok(Self { dataset, alt_last })
    }

    /// All-zero dataset against one whose last user holds the all-ones vector.
    pub fn extreme(n: usize, d: usize) -> Result<Self> {
        let ones = InputVector::new(vec![1.0; d])?;
        Self::new(vec![InputVector::zeros(d); n], ones)
    }

    pub fn n(&self) -> usize {
        self.dataset.len()
    }

    pub fn dim(&self) -> usize {
        self.alt_last.dim()
    }

    fn input(&self, user: usize, neighbour: bool) -> &InputVector {
        if neighbour && user + 1 == self.dataset.len() {
            &self.alt_last
        } else {
            &self.dataset[user]
        }
    }
}

/// Inputs to the per-coordinate tail events.
///
/// `s` values are reported for the audited coordinate by other users; the
/// blanket count of any one value is `Binomial(s, gamma/k)` with mean
/// `c = gamma * s / k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailParams {
    pub s: u64,
    pub gamma: f64,
    pub k: u32,
    pub eps_prime: f64,
    pub t: usize,
    pub delta: f64,
}

impl TailParams {
    pub fn c(&self) -> f64 {
        self.gamma * self.s as f64 / self.k as f64
    }

    /// `ln(2t/delta)`, the log factor every threshold carries.
    fn log_term(&self) -> f64 {
        (2.0 * self.t as f64 / self.delta).ln()
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.t == 0 {
            return Err(Error::InvalidParams("k and t must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidParams(format!(
                "gamma {} is not a probability",
                self.gamma
            )));
        }
        if !(self.eps_prime > 0.0 && self.eps_prime.is_finite()) {
            return Err(Error::Domain(format!(
                "epsilon' must be positive, got {}",
                self.eps_prime
            )));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::Domain(format!(
                "delta {} outside (0, 1]",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Exact value of the union of the two tail events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailProbability {
    /// `Pr[N_theta >= c e^(eps'/2)]` with `N_theta = Bin(s, gamma/k) + 1`.
    pub theta_tail: f64,
    /// `Pr[N_phi <= c e^(-eps'/2)]` with `N_phi = Bin(s, gamma/k)`.
    pub phi_tail: f64,
    /// `min(1, theta_tail + phi_tail)`.
    pub probability: f64,
    /// Set when `c = 0`: there is no blanket and the event is certain.
    pub degenerate: bool,
}

/// Log-space binomial pmf for all outcomes `0..=s`.
fn binomial_log_pmf(s: u64, p: f64) -> Vec<f64> {
    let n = s as usize;
    if p <= 0.0 {
        let mut v = vec![f64::NEG_INFINITY; n + 1];
        v[0] = 0.0;
        return v;
    }
    if p >= 1.0 {
        let mut v = vec![f64::NEG_INFINITY; n + 1];
        v[n] = 0.0;
        return v;
    }
    let log_odds = p.ln() - (-p).ln_1p();
    let mut out = Vec::with_capacity(n + 1);
    let mut cur = s as f64 * (-p).ln_1p();
    out.push(cur);
    for j in 1..=n {
        cur += ((n - j + 1) as f64 / j as f64).ln() + log_odds;
        out.push(cur);
    }
    out
}

fn sum_exp(logs: &[f64]) -> f64 {
    logs.iter().map(|l| l.exp()).sum::<f64>().min(1.0)
}

/// `Pr[Bin(s, p) >= x]` and `Pr[Bin(s, p) <= y]` for real thresholds.
fn binomial_tails(s: u64, p: f64, at_least: f64, at_most: f64) -> (f64, f64) {
    let pmf = binomial_log_pmf(s, p);
    let upper = if at_least <= 0.0 {
        1.0
    } else {
        let start = at_least.ceil();
        if start > s as f64 {
            0.0
        } else {
            sum_exp(&pmf[start as usize..])
        }
    };
    let lower = if at_most < 0.0 {
        0.0
    } else {
        let end = at_most.floor().min(s as f64) as usize;
        sum_exp(&pmf[..=end])
    };
    (upper, lower)
}

/// Exact probability of `N_theta >= c e^(eps'/2)` or `N_phi <= c e^(-eps'/2)`,
/// the union the Chernoff step upper-bounds. The two marginals are treated
/// separately, as in the union bound.
pub fn lemma2_tail_probability(tp: &TailParams) -> Result<TailProbability> {
    tp.validate()?;
    let c = tp.c();
    let p = tp.gamma / tp.k as f64;
    let half = tp.eps_prime / 2.0;
    // N_theta = B + 1, so N_theta >= x  <=>  B >= x - 1.
    let (theta_tail, phi_tail) = binomial_tails(tp.s, p, c * half.exp() - 1.0, c * (-half).exp());
    Ok(TailProbability {
        theta_tail,
        phi_tail,
        probability: (theta_tail + phi_tail).min(1.0),
        degenerate: c == 0.0,
    })
}

/// Minimum `c` under which [`chernoff_upper_bound`] applies for `tp`'s
/// `epsilon'`: `14 ln(2t/delta) / eps'^2` below 1, `80 ln(2t/delta) / eps'^2`
/// up to 6.
pub fn chernoff_threshold(tp: &TailParams) -> Result<f64> {
    tp.validate()?;
    let e2 = tp.eps_prime * tp.eps_prime;
    if tp.eps_prime < 1.0 {
        Ok(14.0 * tp.log_term() / e2)
    } else if tp.eps_prime < 6.0 {
        Ok(80.0 * tp.log_term() / e2)
    } else {
        Err(Error::Domain(format!(
            "no Chernoff bound for epsilon' = {} >= 6",
            tp.eps_prime
        )))
    }
}

/// Closed-form Chernoff bound on the union of the tail events:
/// `exp(-(c/3)(eps'/2)^2) + exp(-(c/2) w^2)` with `w = eps'/sqrt(7)` below 1
/// and `w = eps'/(2 sqrt(10))` up to 6.
pub fn chernoff_upper_bound(tp: &TailParams) -> Result<f64> {
    let threshold = chernoff_threshold(tp)?;
    let c = tp.c();
    // Tolerate rounding when c was computed to sit exactly on the threshold.
    if c < threshold * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!(
            "c = {c:.6} is below the Chernoff threshold {threshold:.6}"
        )));
    }
    let e = tp.eps_prime;
    let width = if e < 1.0 {
        e / 7f64.sqrt()
    } else {
        e / (2.0 * 10f64.sqrt())
    };
    Ok((-(c / 3.0) * (e / 2.0).powi(2)).exp() + (-(c / 2.0) * width * width).exp())
}

/// Chernoff bound `exp(-(n-1) t / (3d))` on the probability that a coordinate
/// is sampled at least twice its expected `(n-1) t / d` times.
pub fn sample_count_tail(n: usize, t: usize, d: usize) -> Result<f64> {
    if n < 2 || d == 0 || t == 0 || t > d {
        return Err(Error::InvalidParams(format!(
            "need n >= 2 and 1 <= t <= d, got n={n} t={t} d={d}"
        )));
    }
    Ok((-((n - 1) as f64) * t as f64 / (3.0 * d as f64)).exp())
}

/// Expected number of other users reporting a given coordinate, rounded to
/// the nearest integer.
pub fn expected_sample_count(n: usize, t: usize, d: usize) -> u64 {
    ((n - 1) as f64 * t as f64 / d as f64).round() as u64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditOptions {
    pub trials: u64,
    pub seed: RngSeed,
    /// Normal quantile for the per-cell Wilson intervals.
    pub z: f64,
    /// `delta` used by the estimator; defaults to the budget's.
    pub delta: Option<f64>,
    /// Cells observed fewer times than this in either run are pooled.
    pub min_cell_count: u64,
}

impl AuditOptions {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed: RngSeed(seed),
            z: 1.96,
            delta: None,
            min_cell_count: 64,
        }
    }
}

/// Largest relative Wilson half-width accepted for any cell.
pub const MAX_RELATIVE_CI: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct AuditVerdict {
    /// Point estimate of the smallest `epsilon` consistent with the observed
    /// histograms at the audit `delta`.
    pub empirical_epsilon: f64,
    /// The same estimate after shrinking each cell to its Wilson bounds; a
    /// statistically conservative lower bound.
    pub lower_epsilon: f64,
    pub theoretical_epsilon: f64,
    /// `empirical_epsilon - lower_epsilon`.
    pub slack: f64,
    pub delta: f64,
    pub trials: u64,
    /// Cells left after pooling sparse outcomes.
    pub cells: usize,
    /// An outcome seen with probability above `delta` under one dataset never
    /// occurred under the other.
    pub hard_failure: bool,
    pub pass: bool,
}

type Histogram = HashMap<u64, u64>;

const CHUNKS: u64 = 64;

/// Outcome key: the multiset of messages as a histogram over
/// `(coordinate, value)` cells, packed in base `n + 1`.
struct OutcomeEncoder {
    powers: Vec<u64>,
    k: u32,
}

impl OutcomeEncoder {
    fn new(params: &ProtocolParams) -> Result<Self> {
        let cells = params.d * params.domain_size() as usize;
        let base = params.n as u128 + 1;
        let mut powers = Vec::with_capacity(cells);
        let mut p: u128 = 1;
        for _ in 0..cells {
            powers.push(p as u64);
            p *= base;
            if p > u64::MAX as u128 {
                return Err(Error::InvalidParams(format!(
                    "instance too large to audit: {} users over {cells} cells",
                    params.n
                )));
            }
        }
        Ok(Self {
            powers,
            k: params.k,
        })
    }

    fn cell(&self, coordinate: usize, value: u32) -> u64 {
        self.powers[coordinate * (self.k as usize + 1) + value as usize]
    }
}

fn sample_histogram(
    pair: &NeighborPair,
    neighbour: bool,
    params: &ProtocolParams,
    encoder: &OutcomeEncoder,
    trials: u64,
    seed: RngSeed,
) -> Result<Histogram> {
    let per_chunk = trials.div_ceil(CHUNKS);
    let partials = (0..CHUNKS)
        .into_par_iter()
        .map(|chunk| -> Result<Histogram> {
            let start = chunk * per_chunk;
            let end = (start + per_chunk).min(trials);
            let mut rng = seed.derive(&[neighbour as u64, chunk]).rng();
            let mut hist = Histogram::new();
            for _ in start..end {
                let mut key = 0u64;
                for user in 0..pair.n() {
                    let m = randomize_vector(pair.input(user, neighbour), params, &mut rng)?;
                    for e in m.entries() {
                        key += encoder.cell(e.coordinate, e.value);
                    }
                }
                *hist.entry(key).or_insert(0) += 1;
            }
            Ok(hist)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = Histogram::new();
    for part in partials {
        for (key, count) in part {
            *total.entry(key).or_insert(0) += count;
        }
    }
    Ok(total)
}

/// Wilson score interval for `count` successes out of `trials`.
fn wilson(count: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = count as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Smallest `eps >= 0` with `sum_E max(0, P(E) - e^eps Q(E)) <= delta`.
fn hockey_stick_epsilon(cells: &[(f64, f64)], delta: f64) -> f64 {
    let excess = |eps: f64| -> f64 {
        let scale = eps.exp();
        cells.iter().map(|&(p, q)| (p - scale * q).max(0.0)).sum()
    };
    if cells
        .iter()
        .filter(|c| c.1 == 0.0)
        .map(|c| c.0)
        .sum::<f64>()
        > delta
    {
        return f64::INFINITY;
    }
    if excess(0.0) <= delta {
        return 0.0;
    }
    let mut hi = cells
        .iter()
        .filter(|c| c.1 > 0.0 && c.0 > 0.0)
        .map(|c| (c.0 / c.1).ln())
        .fold(0.0, f64::max);
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) <= delta {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    hi
}

/// Pools cells seen fewer than `min_count` times in either run into one
/// tail cell. Coarsening the outcome space is post-processing, so the
/// estimate stays a valid lower bound.
fn pool_cells(p: &Histogram, q: &Histogram, min_count: u64) -> Vec<(u64, u64)> {
    let mut keys: Vec<u64> = p.keys().chain(q.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    let mut cells = Vec::new();
    let mut tail = (0u64, 0u64);
    for key in keys {
        let cp = p.get(&key).copied().unwrap_or(0);
        let cq = q.get(&key).copied().unwrap_or(0);
        if cp.min(cq) < min_count {
            tail.0 += cp;
            tail.1 += cq;
        } else {
            cells.push((cp, cq));
        }
    }
    if tail.0 + tail.1 > 0 {
        if tail.0.min(tail.1) >= min_count || cells.is_empty() {
            cells.push(tail);
        } else {
            let sparsest = cells
                .iter()
                .enumerate()
                .min_by_key(|(_, c)| c.0.min(c.1))
                .map(|(i, _)| i)
                .expect("nonempty");
            cells[sparsest].0 += tail.0;
            cells[sparsest].1 += tail.1;
        }
    }
    cells
}

fn hard_failure(p: &Histogram, q: &Histogram, trials: u64, delta: f64) -> bool {
    let witness = |a: &Histogram, b: &Histogram| {
        a.iter()
            .any(|(key, &count)| !b.contains_key(key) && count as f64 / trials as f64 > delta)
    };
    witness(p, q) || witness(q, p)
}

/// Monte-Carlo estimate of the privacy loss between the two datasets of
/// `pair`, compared against `budget.epsilon()`.
///
/// The analyzer sees the shuffled multiset of messages, which is exactly the
/// histogram of `(coordinate, value)` pairs, so histograms are the outcomes.
/// Each run draws `options.trials` histograms; the hockey-stick estimate is
/// taken in both directions. The verdict passes when the Wilson-adjusted
/// lower estimate does not exceed the budget.
pub fn monte_carlo_audit(
    pair: &NeighborPair,
    params: &ProtocolParams,
    budget: &PrivacyBudget,
    options: &AuditOptions,
) -> Result<AuditVerdict> {
    params.validate()?;
    if pair.n() != params.n || pair.dim() != params.d {
        return Err(Error::InvalidParams(format!(
            "pair has n={} d={}, params have n={} d={}",
            pair.n(),
            pair.dim(),
            params.n,
            params.d
        )));
    }
    if options.trials == 0 {
        return Err(Error::InsufficientTrials("no trials requested".into()));
    }
    let delta = options.delta.unwrap_or(budget.delta());
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::Domain(format!("audit delta {delta} outside [0, 1]")));
    }
    let encoder = OutcomeEncoder::new(params)?;
    let seed = options.seed;
    let p = sample_histogram(pair, false, params, &encoder, options.trials, seed)?;
    let q = sample_histogram(pair, true, params, &encoder, options.trials, seed)?;

    let trials = options.trials;
    if hard_failure(&p, &q, trials, delta) {
        return Ok(AuditVerdict {
            empirical_epsilon: f64::INFINITY,
            lower_epsilon: f64::INFINITY,
            theoretical_epsilon: budget.epsilon(),
            slack: 0.0,
            delta,
            trials,
            cells: p.len().max(q.len()),
            hard_failure: true,
            pass: false,
        });
    }

    let pooled = pool_cells(&p, &q, options.min_cell_count);
    if pooled.len() < 2 {
        return Err(Error::InsufficientTrials(format!(
            "only {} cell(s) with at least {} observations",
            pooled.len(),
            options.min_cell_count
        )));
    }
    let mut point = Vec::with_capacity(pooled.len());
    let mut p_lo_q_hi = Vec::with_capacity(pooled.len());
    let mut q_lo_p_hi = Vec::with_capacity(pooled.len());
    for &(cp, cq) in &pooled {
        let (plo, phi) = wilson(cp, trials, options.z);
        let (qlo, qhi) = wilson(cq, trials, options.z);
        for (count, lo, hi) in [(cp, plo, phi), (cq, qlo, qhi)] {
            let est = count as f64 / trials as f64;
            let rel = if est > 0.0 {
                0.5 * (hi - lo) / est
            } else {
                f64::INFINITY
            };
            if rel > MAX_RELATIVE_CI {
                return Err(Error::InsufficientTrials(format!(
                    "cell with {count} observations has relative CI {rel:.3}"
                )));
            }
        }
        point.push((cp as f64 / trials as f64, cq as f64 / trials as f64));
        p_lo_q_hi.push((plo, qhi));
        q_lo_p_hi.push((qlo, phi));
    }
    let swapped: Vec<(f64, f64)> = point.iter().map(|&(a, b)| (b, a)).collect();
    let empirical_epsilon =
        hockey_stick_epsilon(&point, delta).max(hockey_stick_epsilon(&swapped, delta));
    let lower_epsilon = hockey_stick_epsilon(&p_lo_q_hi, delta)
        .max(hockey_stick_epsilon(&q_lo_p_hi, delta))
        .min(empirical_epsilon);
    let theoretical_epsilon = budget.epsilon();
    Ok(AuditVerdict {
        empirical_epsilon,
        lower_epsilon,
        theoretical_epsilon,
        slack: empirical_epsilon - lower_epsilon,
        delta,
        trials,
        cells: pooled.len(),
        hard_failure: false,
        pass: lower_epsilon <= theoretical_epsilon,
    })
}
