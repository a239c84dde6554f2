//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support_arbitration::support::{fuse_posterior, Channel, Observation};

/// Gaussian density evaluated directly, without the log-likelihood-ratio
/// shortcut the library uses.
pub fn normal_pdf(y: f64, mean: f64, sd: f64) -> f64 {
    let u = (y - mean) / sd;
    (-0.5 * u * u).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

/// `P(x = 1 | readings)` by Bayes' rule on the raw likelihoods.
pub fn reference_posterior(readings: &[(f64, f64)], prior: f64) -> f64 {
    let l1: f64 = readings.iter().map(|&(y, s)| normal_pdf(y, 1.0, s)).product();
    let l0: f64 = readings.iter().map(|&(y, s)| normal_pdf(y, 0.0, s)).product();
    prior * l1 / (prior * l1 + (1.0 - prior) * l0)
}

/// Largest absolute gap between library fusion and the reference over
/// `cases` random one-to-three channel problems.
pub fn fusion_max_error(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channels = [Channel::A, Channel::B, Channel::C];
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let k = rng.random_range(1..=3);
        let prior = rng.random_range(0.05..0.95);
        let readings: Vec<(f64, f64)> = (0..k)
            .map(|_| (rng.random_range(-1.5..2.5), rng.random_range(0.3..2.0)))
            .collect();
        let obs: Vec<Observation<f64>> = readings
            .iter()
            .zip(channels)
            .map(|(&(y, s), ch)| Observation::new(ch, y, s))
            .collect();
        let got = fuse_posterior(&obs, prior).unwrap().p1;
        worst = worst.max((got - reference_posterior(&readings, prior)).abs());
    }
    worst
}

/// `q` after `n` constant-reward EMA updates from zero, by the geometric sum.
pub fn ema_closed_form(reward: f64, alpha: f64, n: i32) -> f64 {
    reward * (1.0 - (1.0 - alpha).powi(n))
}
