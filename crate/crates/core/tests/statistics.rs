use proptest::prelude::*;
use rand::Rng;
use vecshuffle_core::accuracy::{empirical_mse, fit_power_law, sampled_truth};
use vecshuffle_core::analyzer::{analyze, analyze_messages, estimate_average, shuffle};
use vecshuffle_core::audit::{
    chernoff_threshold, chernoff_upper_bound, expected_sample_count, lemma2_tail_probability,
    sample_count_tail, TailParams,
};
use vecshuffle_core::randomizer::{randomize_vector, Entry, Message};
use vecshuffle_core::rng::RngSeed;
use vecshuffle_core::{Calibration, InputVector, PrivacyBudget, ProtocolParams};

fn dataset(n: usize, d: usize, seed: u64) -> Vec<InputVector> {
    let mut rng = RngSeed(seed).rng();
    (0..n)
        .map(|_| InputVector::new((0..d).map(|_| rng.gen::<f64>()).collect()).unwrap())
        .collect()
}

fn run(data: &[InputVector], params: &ProtocolParams, seed: RngSeed) -> (Vec<f64>, Vec<f64>) {
    let messages: Vec<Message> = data
        .iter()
        .enumerate()
        .map(|(i, x)| randomize_vector(x, params, &mut seed.user_rng(i)).unwrap())
        .collect();
    let truth = sampled_truth(data, &messages, params.d).unwrap();
    let batch = shuffle(messages, &mut seed.shuffler_rng()).unwrap();
    (analyze(&batch, params).unwrap().values, truth)
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

#[test]
fn estimator_is_unbiased_end_to_end() {
    let (n, d) = (400, 6);
    let data = dataset(n, d, 11);
    for (t, gamma) in [(1, 0.3), (3, 0.6), (6, 0.0)] {
        let params = ProtocolParams::new(d, 3, n, t, gamma).unwrap();
        let diffs: Vec<f64> = (0..400)
            .map(|trial| {
                let (z, s) = run(&data, &params, RngSeed(1000).derive(&[t as u64, trial]));
                z.iter().sum::<f64>() - s.iter().sum::<f64>()
            })
            .collect();
        let (m, sd) = mean_sd(&diffs);
        let se = sd / (diffs.len() as f64).sqrt();
        assert!(
            m.abs() <= 3.0 * se + 1e-9,
            "t={t} gamma={gamma}: mean {m} se {se}"
        );
    }
}

#[test]
fn uniform_submissions_read_as_one_half() {
    let (n, d) = (300, 4);
    let params = ProtocolParams::new(d, 4, n, 1, 0.5).unwrap();
    // Uniform submissions are indistinguishable from inputs equal to 1/2.
    let estimates: Vec<f64> = (0..400u64)
        .map(|trial| {
            let mut rng = RngSeed(77).derive(&[trial]).rng();
            let messages: Vec<Message> = (0..n)
                .map(|_| {
                    Message::new(vec![Entry {
                        coordinate: rng.gen_range(0..d),
                        value: rng.gen_range(0..=params.k),
                    }])
                })
                .collect();
            let est = analyze_messages(&messages, &params).unwrap();
            est.values.iter().sum::<f64>() - 0.5 * n as f64
        })
        .collect();
    let (m, sd) = mean_sd(&estimates);
    assert!(
        m.abs() <= 3.0 * sd / (estimates.len() as f64).sqrt() + 1e-9,
        "mean {m}"
    );
}

#[test]
fn average_is_accurate_at_defaults() {
    let (n, d) = (20_000, 10);
    let budget = PrivacyBudget::new(0.5, 1e-6).unwrap();
    let cal = Calibration::SingleCoordinate;
    let k = cal.choose_k(&budget, d, n, 1);
    let params = cal.params(&budget, d, k, n, 1).unwrap();
    let data: Vec<InputVector> = (0..n)
        .map(|i| InputVector::new((0..d).map(|j| ((i + j) % 5) as f64 / 4.0).collect()).unwrap())
        .collect();
    let seed = RngSeed(5);
    let messages: Vec<Message> = data
        .iter()
        .enumerate()
        .map(|(i, x)| randomize_vector(x, &params, &mut seed.user_rng(i)).unwrap())
        .collect();
    let est = analyze_messages(&messages, &params).unwrap();
    for avg in estimate_average(&est) {
        assert!((avg.unwrap() - 0.5).abs() < 0.1);
    }
    let truth = sampled_truth(&data, &messages, d).unwrap();
    let score = empirical_mse(&est, &truth, &params).unwrap();
    assert!(score.normalized_mse < 0.3);
}

#[test]
fn sample_count_tail_dominates_frequency() {
    let (n, t, d) = (31, 1, 10);
    let bound = sample_count_tail(n, t, d).unwrap();
    let expected = (n - 1) as f64 * t as f64 / d as f64;
    let mut rng = RngSeed(9).rng();
    let rounds = 200_000;
    let hits = (0..rounds)
        .filter(|_| {
            let count = (0..n - 1).filter(|_| rng.gen_range(0..d) == 0).count();
            count as f64 >= 2.0 * expected
        })
        .count();
    assert!((hits as f64 / rounds as f64) <= bound);
}

#[test]
fn lemma2_holds_at_calibrated_gamma() {
    // With gamma from the single-coordinate calibration and s equal to its
    // expected value, the exact tail stays below delta / t.
    for &(n, d, eps, delta) in &[
        (100_000usize, 10usize, 0.5, 1e-6),
        (50_000, 20, 0.9, 1e-4),
        (200_000, 5, 0.3, 1e-8),
        (100_000, 10, 2.0, 1e-6),
    ] {
        let budget = PrivacyBudget::new(eps, delta).unwrap();
        let cal = Calibration::SingleCoordinate;
        let k = cal.choose_k(&budget, d, n, 1);
        let params = cal.params(&budget, d, k, n, 1).unwrap();
        let tp = TailParams {
            s: expected_sample_count(n, 1, d),
            gamma: params.gamma,
            k,
            eps_prime: eps,
            t: 1,
            delta,
        };
        let tail = lemma2_tail_probability(&tp).unwrap();
        assert!(tail.probability <= delta, "{n} {d} {eps} {delta}: {tail:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_tail_below_chernoff(
        eps in 0.1f64..5.5, delta_exp in -8.0f64..-1.0, k in 1u32..6, t in 1usize..4,
        scale in 1.0f64..4.0, gamma in 0.2f64..1.0,
    ) {
        let delta = 10f64.powf(delta_exp);
        let probe = TailParams { s: 1, gamma, k, eps_prime: eps, t, delta };
        let threshold = chernoff_threshold(&probe).unwrap();
        let s = (scale * threshold * k as f64 / gamma).ceil() as u64;
        let tp = TailParams { s, ..probe };
        let exact = lemma2_tail_probability(&tp).unwrap().probability;
        let bound = chernoff_upper_bound(&tp).unwrap();
        prop_assert!(exact <= bound * (1.0 + 1e-9), "exact {} bound {}", exact, bound);
        prop_assert!(bound <= delta / t as f64 * (1.0 + 1e-9));
    }

    #[test]
    fn tail_shrinks_as_blanket_grows(eps in 0.2f64..3.0, k in 1u32..4, s in 200u64..3000) {
        let at = |gamma: f64| {
            lemma2_tail_probability(&TailParams { s, gamma, k, eps_prime: eps, t: 1, delta: 1e-6 })
                .unwrap()
                .probability
        };
        prop_assert!(at(0.9) <= at(0.3) + 1e-12);
    }
}

#[test]
fn noisy_power_law_is_recovered() {
    let mut rng = RngSeed(3).rng();
    let xs: Vec<f64> = (0..8).map(|i| 10f64 * 2f64.powi(i)).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|x| 1e-6 * x.powf(8.0 / 3.0) * (1.0 + 0.1 * (rng.gen::<f64>() - 0.5)))
        .collect();
    let fit = fit_power_law(&xs, &ys).unwrap();
    assert!((2.5..=2.8).contains(&fit.exponent), "{fit:?}");
    assert!(fit.r_squared > 0.99);
}
