//! Trusted shuffler and the untrusted analyzer.
//!
//! The analyzer relabels every received value by its coordinate, sums the
//! values per coordinate (scaled by `1/k`), and removes the expected blanket
//! contribution. Uniform noise on `{0, ..., k}` has mean exactly `k/2`, so
//! each received value carries `gamma/2` of expected noise after scaling.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::params::ProtocolParams;
use crate::randomizer::Message;
use crate::{Error, Result};

/// Messages after a uniform random permutation. No user attribution remains.
#[derive(Debug, Clone, PartialEq)]
pub struct ShuffledBatch {
    messages: Vec<Message>,
}

impl ShuffledBatch {
    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn into_messages(self) -> Vec<Message> {
        self.messages
    }
}

/// Applies a uniformly random permutation (Fisher-Yates) to the batch.
pub fn shuffle<R: Rng + ?Sized>(mut messages: Vec<Message>, rng: &mut R) -> Result<ShuffledBatch> {
    if messages.is_empty() {
        return Err(Error::Degenerate("cannot shuffle an empty batch".into()));
    }
    messages.shuffle(rng);
    Ok(ShuffledBatch { messages })
}

/// Received mass for one coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateAggregate {
    pub coordinate: usize,
    /// Sum of received values divided by `k`.
    pub sum: f64,
    /// Number of values received for this coordinate.
    pub count: u64,
}

/// Per-coordinate aggregation of a batch. Order of messages is irrelevant.
pub fn aggregate(
    batch: &ShuffledBatch,
    params: &ProtocolParams,
) -> Result<Vec<CoordinateAggregate>> {
    aggregate_messages(batch.messages(), params)
}

/// [`aggregate`] on an arbitrary slice of messages.
pub fn aggregate_messages(
    messages: &[Message],
    params: &ProtocolParams,
) -> Result<Vec<CoordinateAggregate>> {
    let mut raw = vec![0u64; params.d];
    let mut counts = vec![0u64; params.d];
    for message in messages {
        message.validate(params)?;
        for entry in message.entries() {
            raw[entry.coordinate] += entry.value as u64;
            counts[entry.coordinate] += 1;
        }
    }
    let k = params.k as f64;
    Ok(raw
        .into_iter()
        .zip(counts)
        .enumerate()
        .map(|(coordinate, (raw, count))| CoordinateAggregate {
            coordinate,
            sum: raw as f64 / k,
            count,
        })
        .collect())
}

/// `(sum - gamma/2 * count) / (1 - gamma)`.
pub fn debias(aggregate: &CoordinateAggregate, gamma: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Infeasible(format!(
            "cannot debias with gamma = {gamma}; need 0 <= gamma < 1"
        )));
    }
    Ok((aggregate.sum - 0.5 * gamma * aggregate.count as f64) / (1.0 - gamma))
}

/// Debiased per-coordinate sum estimates together with the per-coordinate
/// receive counts.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateVector {
    pub values: Vec<f64>,
    pub counts: Vec<u64>,
}

impl EstimateVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Sum of all coordinate estimates.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

pub fn analyze(batch: &ShuffledBatch, params: &ProtocolParams) -> Result<EstimateVector> {
    analyze_messages(batch.messages(), params)
}

/// [`analyze`] on an arbitrary slice of messages.
pub fn analyze_messages(messages: &[Message], params: &ProtocolParams) -> Result<EstimateVector> {
    let aggregates = aggregate_messages(messages, params)?;
    let values = aggregates
        .iter()
        .map(|a| debias(a, params.gamma))
        .collect::<Result<Vec<_>>>()?;
    let counts = aggregates.iter().map(|a| a.count).collect();
    Ok(EstimateVector { values, counts })
}

/// Per-coordinate mean estimate `z_l / count_l`; `None` where nothing was
/// received for the coordinate.
pub fn estimate_average(est: &EstimateVector) -> Vec<Option<f64>> {
    est.values
        .iter()
        .zip(&est.counts)
        .map(|(&z, &c)| (c > 0).then(|| z / c as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomizer::Entry;
    use crate::rng::RngSeed;

    fn msg(pairs: &[(usize, u32)]) -> Message {
        Message::new(
            pairs
                .iter()
                .map(|&(coordinate, value)| Entry { coordinate, value })
                .collect(),
        )
    }

    #[test]
    fn shuffle_single_and_empty() {
        let mut rng = RngSeed(1).rng();
        let one = vec![msg(&[(0, 1)])];
        assert_eq!(shuffle(one.clone(), &mut rng).unwrap().messages(), &one[..]);
        assert!(shuffle(vec![], &mut rng).is_err());
    }

    #[test]
    fn shuffle_orders_are_uniform() {
        let mut rng = RngSeed(2).rng();
        let batch = vec![msg(&[(0, 0)]), msg(&[(0, 1)]), msg(&[(0, 2)])];
        let mut seen = std::collections::HashMap::new();
        let rounds = 100_000;
        for _ in 0..rounds {
            let order: Vec<u32> = shuffle(batch.clone(), &mut rng)
                .unwrap()
                .messages()
                .iter()
                .map(|m| m.entries()[0].value)
                .collect();
            *seen.entry(order).or_insert(0u32) += 1;
        }
        assert_eq!(seen.len(), 6);
        for c in seen.values() {
            assert!((*c as f64 / rounds as f64 - 1.0 / 6.0).abs() < 0.01);
        }
    }

    #[test]
    fn aggregate_arithmetic() {
        let params = ProtocolParams::new(4, 3, 2, 1, 0.0).unwrap();
        let agg = aggregate_messages(&[msg(&[(2, 3)]), msg(&[(2, 3)])], &params).unwrap();
        assert_eq!(agg[2].sum, 2.0);
        assert_eq!(agg[2].count, 2);
        assert_eq!((agg[0].sum, agg[0].count), (0.0, 0));
    }

    #[test]
    fn aggregate_rejects_out_of_range() {
        let params = ProtocolParams::new(4, 3, 2, 1, 0.0).unwrap();
        assert!(matches!(
            aggregate_messages(&[msg(&[(1, 4)])], &params),
            Err(Error::MalformedMessage(_))
        ));
        assert!(aggregate_messages(&[msg(&[(4, 0)])], &params).is_err());
    }

    #[test]
    fn debias_examples() {
        let a = CoordinateAggregate {
            coordinate: 0,
            sum: 10.0,
            count: 20,
        };
        assert_eq!(debias(&a, 0.0).unwrap(), 10.0);
        assert_eq!(debias(&a, 0.5).unwrap(), 10.0);
        assert!(debias(&a, 1.0).is_err());
    }

    #[test]
    fn estimate_average_flags_missing() {
        let est = EstimateVector {
            values: vec![3.0, 0.0],
            counts: vec![6, 0],
        };
        assert_eq!(estimate_average(&est), vec![Some(0.5), None]);
    }
}
