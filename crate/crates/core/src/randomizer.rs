//! Local randomizer run by each user before submission.

use rand::seq::index;
use rand::Rng;

use crate::params::ProtocolParams;
use crate::{Error, Result};

/// A user's input, a point of `[0,1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputVector {
    values: Vec<f64>,
}

impl InputVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("input vector is empty".into()));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::Domain(format!(
                "coordinate {i} = {v} lies outside [0, 1]"
            )));
        }
        Ok(Self { values })
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            values: vec![0.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// One reported coordinate. `coordinate` is zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Entry {
    pub coordinate: usize,
    pub value: u32,
}

/// What a single user hands to the shuffler: `t` labelled values.
///
/// Coordinate indices travel in the clear. The shuffler only hides which user
/// sent which message.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Message {
    entries: Vec<Entry>,
}

impl Message {
    pub fn new(entries: Vec<Entry>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Checks the message against `params`: exactly `t` entries, distinct
    /// in-range coordinates, values in `{0, ..., k}`.
    pub fn validate(&self, params: &ProtocolParams) -> Result<()> {
        if self.entries.len() != params.t {
            return Err(Error::MalformedMessage(format!(
                "expected {} entries, got {}",
                params.t,
                self.entries.len()
            )));
        }
        for (i, e) in self.entries.iter().enumerate() {
            if e.coordinate >= params.d {
                return Err(Error::MalformedMessage(format!(
                    "coordinate {} outside [0, {})",
                    e.coordinate, params.d
                )));
            }
            if e.value > params.k {
                return Err(Error::MalformedMessage(format!(
                    "value {} exceeds k = {}",
                    e.value, params.k
                )));
            }
            if self.entries[..i]
                .iter()
                .any(|o| o.coordinate == e.coordinate)
            {
                return Err(Error::MalformedMessage(format!(
                    "coordinate {} reported twice",
                    e.coordinate
                )));
            }
        }
        Ok(())
    }
}

/// Stochastic rounding of `x` onto the grid `{0, 1/k, ..., 1}`, returned as
/// the grid index: `floor(xk) + Bernoulli(xk - floor(xk))`. Unbiased, so
/// `E[result / k] = x`.
pub fn encode_fixed_point<R: Rng + ?Sized>(x: f64, k: u32, rng: &mut R) -> Result<u32> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("cannot encode {x}: outside [0, 1]")));
    }
    if k == 0 {
        return Err(Error::Domain("precision k must be at least 1".into()));
    }
    let scaled = x * k as f64;
    let floor = scaled.floor();
    let frac = scaled - floor;
    let up = frac > 0.0 && rng.gen_bool(frac);
    Ok((floor as u32 + up as u32).min(k))
}

/// Generalized randomized response over `{0, ..., domain_size - 1}`: keeps `v`
/// with probability `1 - gamma`, otherwise replaces it by a uniform draw from
/// the whole domain (which may be `v` again).
pub fn randomized_response<R: Rng + ?Sized>(
    v: u32,
    domain_size: u32,
    gamma: f64,
    rng: &mut R,
) -> Result<u32> {
    if v >= domain_size {
        return Err(Error::Domain(format!(
            "value {v} outside domain of size {domain_size}"
        )));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Domain(format!("gamma {gamma} is not a probability")));
    }
    if rng.gen_bool(gamma) {
        Ok(rng.gen_range(0..domain_size))
    } else {
        Ok(v)
    }
}

/// Full local randomizer: sample `t` distinct coordinates uniformly, encode
/// each at precision `k`, then apply randomized response over `k + 1`
/// symbols.
pub fn randomize_vector<R: Rng + ?Sized>(
    x: &InputVector,
    params: &ProtocolParams,
    rng: &mut R,
) -> Result<Message> {
    if x.dim() != params.d {
        return Err(Error::DimensionMismatch {
            expected: params.d,
            actual: x.dim(),
        });
    }
    let mut entries = Vec::with_capacity(params.t);
    let mut report = |coordinate: usize, rng: &mut R| -> Result<()> {
        let encoded = encode_fixed_point(x.values[coordinate], params.k, rng)?;
        let value = randomized_response(encoded, params.domain_size(), params.gamma, rng)?;
        entries.push(Entry { coordinate, value });
        Ok(())
    };
    if params.t == 1 {
        let coordinate = rng.gen_range(0..params.d);
        report(coordinate, rng)?;
    } else {
        for coordinate in index::sample(rng, params.d, params.t).into_vec() {
            report(coordinate, rng)?;
        }
    }
    Ok(Message { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;

    fn rng(seed: u64) -> crate::rng::ProtocolRng {
        RngSeed(seed).rng()
    }

    #[test]
    fn input_vector_domain() {
        assert!(InputVector::new(vec![0.0, 1.0, 0.5]).is_ok());
        assert!(InputVector::new(vec![0.2, 1.01]).is_err());
        assert!(InputVector::new(vec![-0.1]).is_err());
        assert!(InputVector::new(vec![f64::NAN]).is_err());
        assert!(InputVector::new(vec![]).is_err());
    }

    #[test]
    fn encode_grid_points_are_deterministic() {
        let mut r = rng(1);
        for _ in 0..1000 {
            assert_eq!(encode_fixed_point(0.5, 2, &mut r).unwrap(), 1);
            assert_eq!(encode_fixed_point(1.0, 3, &mut r).unwrap(), 3);
            assert_eq!(encode_fixed_point(0.0, 7, &mut r).unwrap(), 0);
        }
    }

    #[test]
    fn encode_rejects_out_of_range() {
        let mut r = rng(1);
        assert!(encode_fixed_point(1.5, 3, &mut r).is_err());
        assert!(encode_fixed_point(-0.01, 3, &mut r).is_err());
        assert!(encode_fixed_point(0.5, 0, &mut r).is_err());
    }

    #[test]
    fn encode_bernoulli_mean() {
        let mut r = rng(2);
        let draws = 1_000_000;
        let ones: u64 = (0..draws)
            .map(|_| encode_fixed_point(0.3, 1, &mut r).unwrap() as u64)
            .sum();
        let mean = ones as f64 / draws as f64;
        assert!((mean - 0.3).abs() < 0.002, "mean {mean}");
    }

    #[test]
    fn encode_unbiased_and_variance_capped_on_grid() {
        // E[y/k] = x within 3 standard errors, Var[y/k] <= 1/(4k^2).
        let mut r = rng(3);
        let draws = 200_000;
        for &k in &[1u32, 3, 10] {
            for i in 0..=10 {
                let x = i as f64 / 10.0;
                let samples: Vec<f64> = (0..draws)
                    .map(|_| encode_fixed_point(x, k, &mut r).unwrap() as f64 / k as f64)
                    .collect();
                let mean = samples.iter().sum::<f64>() / draws as f64;
                let var =
                    samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
                let cap = 0.25 / (k as f64 * k as f64);
                let se = (cap / draws as f64).sqrt();
                assert!(
                    (mean - x).abs() <= 3.0 * se + 1e-12,
                    "k={k} x={x} mean={mean}"
                );
                assert!(var <= cap * 1.02 + 1e-12, "k={k} x={x} var={var}");
            }
        }
    }

    #[test]
    fn response_identity_without_blanket() {
        let mut r = rng(4);
        for v in 0..5 {
            for _ in 0..100 {
                assert_eq!(randomized_response(v, 5, 0.0, &mut r).unwrap(), v);
            }
        }
    }

    #[test]
    fn response_domain_errors() {
        let mut r = rng(4);
        assert!(randomized_response(3, 3, 0.5, &mut r).is_err());
        assert!(randomized_response(0, 3, 1.5, &mut r).is_err());
    }

    #[test]
    fn response_full_blanket_is_uniform() {
        let mut r = rng(5);
        let draws = 1_000_000;
        let mut counts = [0u64; 4];
        for _ in 0..draws {
            counts[randomized_response(2, 4, 1.0, &mut r).unwrap() as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 / draws as f64 - 0.25).abs() < 0.005);
        }
    }

    #[test]
    fn response_keep_probability() {
        let mut r = rng(6);
        let draws = 1_000_000;
        let kept = (0..draws)
            .filter(|_| randomized_response(1, 3, 0.2, &mut r).unwrap() == 1)
            .count();
        let expected = 0.8 + 0.2 / 3.0;
        let se = (expected * (1.0 - expected) / draws as f64).sqrt();
        let freq = kept as f64 / draws as f64;
        assert!((freq - expected).abs() < 4.0 * se, "freq {freq}");
    }

    #[test]
    fn lossless_limit_recovers_inputs() {
        let k = 1_000_000;
        let x = InputVector::new(vec![0.123456789, 0.5, 0.999999, 0.0]).unwrap();
        let params = ProtocolParams::new(4, k, 2, 4, 0.0).unwrap();
        let msg = randomize_vector(&x, &params, &mut rng(7)).unwrap();
        msg.validate(&params).unwrap();
        for e in msg.entries() {
            let got = e.value as f64 / k as f64;
            assert!((got - x.values()[e.coordinate]).abs() <= 1.0 / k as f64);
        }
    }

    #[test]
    fn single_coordinate_sampling_is_uniform() {
        let x = InputVector::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let params = ProtocolParams::new(4, 3, 2, 1, 0.2).unwrap();
        let mut r = rng(8);
        let mut counts = [0u32; 4];
        let draws = 100_000;
        for _ in 0..draws {
            let m = randomize_vector(&x, &params, &mut r).unwrap();
            counts[m.entries()[0].coordinate] += 1;
        }
        for c in counts {
            assert!((c as f64 / draws as f64 - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn pure_blanket_values_are_uniform() {
        let x = InputVector::new(vec![1.0, 0.0]).unwrap();
        let params = ProtocolParams::new(2, 3, 2, 2, 1.0).unwrap();
        let mut r = rng(9);
        let mut counts = [[0u32; 4]; 2];
        let draws = 100_000;
        for _ in 0..draws {
            for e in randomize_vector(&x, &params, &mut r).unwrap().entries() {
                counts[e.coordinate][e.value as usize] += 1;
            }
        }
        for per_coord in counts {
            for c in per_coord {
                assert!((c as f64 / draws as f64 - 0.25).abs() < 0.01);
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let x = InputVector::new(vec![0.1, 0.2]).unwrap();
        let params = ProtocolParams::new(3, 3, 2, 1, 0.2).unwrap();
        assert!(matches!(
            randomize_vector(&x, &params, &mut rng(1)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn validate_catches_malformed() {
        let params = ProtocolParams::new(3, 2, 2, 2, 0.0).unwrap();
        let ok = Message::new(vec![
            Entry {
                coordinate: 0,
                value: 2,
            },
            Entry {
                coordinate: 2,
                value: 0,
            },
        ]);
        assert!(ok.validate(&params).is_ok());
        let dup = Message::new(vec![
            Entry {
                coordinate: 1,
                value: 0,
            },
            Entry {
                coordinate: 1,
                value: 1,
            },
        ]);
        assert!(dup.validate(&params).is_err());
        let big = Message::new(vec![
            Entry {
                coordinate: 0,
                value: 3,
            },
            Entry {
                coordinate: 1,
                value: 1,
            },
        ]);
        assert!(big.validate(&params).is_err());
        let short = Message::new(vec![Entry {
            coordinate: 0,
            value: 0,
        }]);
        assert!(short.validate(&params).is_err());
    }
}
