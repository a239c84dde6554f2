//! Oracle checks against independent Monte Carlo and structural symmetries.

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support_arbitration::env::ConsequenceRegime;
use support_arbitration::memory::{Action, PolicyState};
use support_arbitration::oracle::{optimal_action_full, CompressedOracle, OracleSettings};
use support_arbitration::scalar::{logistic, Real};
use support_arbitration::support::{
    compress, log_likelihood_ratio, AgentModel, Resolution, SupportThresholds, SupportVector,
};
use support_arbitration::{EnvConfig, UtilityConfig};

fn quick_settings() -> OracleSettings {
    OracleSettings {
        min_samples_per_state: 20_000,
        max_samples: 20_000_000,
        control_loss_samples: 200_000,
        ..OracleSettings::default()
    }
}

/// Simulates verification literally: draw x from the posterior, read C,
/// fuse, commit, score.
fn verify_value_mc(
    env: &EnvConfig,
    util: &UtilityConfig,
    z: ConsequenceRegime,
    log_odds: f64,
    n: usize,
    seed: u64,
) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = logistic(log_odds);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n {
        let x = rng.random::<f64>() < p;
        let y_c = x as u8 as f64 + env.sigma_c * f64::standard_normal(&mut rng);
        let decision = log_odds + log_likelihood_ratio(y_c, env.sigma_c) >= 0.0;
        let u = util.cost_verify + util.commit_payoff(z, decision, x);
        sum += u;
        sum_sq += u * u;
    }
    let mean = sum / n as f64;
    let var = sum_sq / n as f64 - mean * mean;
    (mean, (var / n as f64).sqrt())
}

#[test]
fn closed_form_verify_value_matches_simulation() {
    let env = EnvConfig::default();
    let util = UtilityConfig::default();
    for (i, &(y_a, y_b, bad, z)) in [
        (0.7, 0.2, false, ConsequenceRegime::Routine),
        (0.5, 0.6, true, ConsequenceRegime::Threat),
        (1.2, -0.4, true, ConsequenceRegime::Threat),
        (0.1, 0.3, false, ConsequenceRegime::Routine),
    ]
    .iter()
    .enumerate()
    {
        let d = optimal_action_full(&env, &util, z, y_a, y_b, bad).unwrap();
        let lo = log_likelihood_ratio(y_a, env.sigma_a) + log_likelihood_ratio(y_b, env.sigma_b(bad));
        let (mc, se) = verify_value_mc(&env, &util, z, lo, 1_000_000, i as u64);
        assert!(
            (d.values[1] - mc).abs() < 4.0 * se,
            "case {i}: closed form {} vs simulation {mc} (se {se})",
            d.values[1]
        );
        // Act and abstain values are plain table lookups.
        let p = logistic(lo);
        let act = util.expected_commit_payoff(z, p >= 0.5, p);
        assert!((d.values[0] - act).abs() < 1e-12);
        assert_eq!(d.values[2], util.abstain_penalty(z));
    }
}

#[test]
fn relabelling_the_latent_state_mirrors_the_decision() {
    let env = EnvConfig::default();
    let util = UtilityConfig::default();
    let mut mirrored = util.clone();
    mirrored.pen_fp_routine = util.pen_miss_routine;
    mirrored.pen_miss_routine = util.pen_fp_routine;
    mirrored.pen_fp_threat = util.pen_miss_threat;
    mirrored.pen_miss_threat = util.pen_fp_threat;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        let y_a: f64 = rng.random_range(-1.0..2.0);
        let y_b: f64 = rng.random_range(-1.0..2.0);
        let bad = rng.random::<bool>();
        for z in ConsequenceRegime::ALL {
            let d = optimal_action_full(&env, &util, z, y_a, y_b, bad).unwrap();
            let m = optimal_action_full(&env, &mirrored, z, 1.0 - y_a, 1.0 - y_b, bad).unwrap();
            let lo = log_likelihood_ratio(y_a, env.sigma_a) + log_likelihood_ratio(y_b, env.sigma_b(bad));
            if lo.abs() < 1e-9 {
                continue; // the commit tie rule is not mirror-symmetric
            }
            for a in 0..3 {
                assert!((d.values[a] - m.values[a]).abs() < 1e-9, "{y_a} {y_b} {bad} {z:?}");
            }
            assert_eq!(d.action, m.action);
        }
    }
}

#[test]
fn control_loss_is_monotone_in_resolution() {
    let env = EnvConfig::default();
    let util = UtilityConfig::default();
    let oracle = CompressedOracle::estimate(
        &env,
        &util,
        &SupportThresholds::default(),
        &AgentModel::default(),
        &quick_settings(),
    )
    .unwrap();
    let report = oracle.control_loss(200_000);
    let l = report.loss.map(|e| e.value);
    assert!(l[0] >= l[1] && l[1] >= l[2] && l[2] >= 0.0, "{l:?}");
    for g in &report.gaps {
        assert!(g.value >= 0.0);
    }
    // Losses and utilities are two views of the same paired estimate.
    for i in 0..3 {
        let via_utility = report.full_utility.value - report.expected_utility[i].value;
        assert!((via_utility - l[i]).abs() < 1e-9);
    }
}

#[test]
fn near_perfect_channels_make_act_optimal_everywhere() {
    let env = EnvConfig {
        sigma_a: 0.02,
        sigma_b_good: 0.02,
        sigma_b_bad: 0.03,
        sigma_c: 0.01,
        ..EnvConfig::default()
    };
    let util = UtilityConfig::default();
    let oracle = CompressedOracle::estimate(
        &env,
        &util,
        &SupportThresholds::default(),
        &AgentModel::default(),
        &quick_settings(),
    )
    .unwrap();
    for policy in oracle.policies() {
        for s in policy.states.iter().filter(|s| s.samples > 0) {
            assert_eq!(s.best, Some(Action::Act), "{:?}", s.state);
        }
    }
    let report = oracle.control_loss(50_000);
    for l in report.loss {
        assert!(l.value.abs() < 1e-6);
    }
}

#[test]
fn fully_flagged_threat_state_never_acts() {
    let oracle = CompressedOracle::estimate(
        &EnvConfig::default(),
        &UtilityConfig::default(),
        &SupportThresholds::default(),
        &AgentModel::default(),
        &quick_settings(),
    )
    .unwrap();
    let s = PolicyState::new(
        ConsequenceRegime::Threat,
        compress(SupportVector::new(true, true, true), Resolution::High),
    );
    let action = oracle.policy(Resolution::High).action(&s).unwrap();
    assert_ne!(action, Action::Act);
}

#[test]
fn compressed_values_are_mass_weighted_refinements() {
    // A coarse state's value is the mass-weighted mean of the fine states it
    // merges.
    let oracle = CompressedOracle::estimate(
        &EnvConfig::default(),
        &UtilityConfig::default(),
        &SupportThresholds::default(),
        &AgentModel::default(),
        &quick_settings(),
    )
    .unwrap();
    let [low, mid, high] = oracle.policies();
    for z in ConsequenceRegime::ALL {
        for (coarse, fine) in [(&low, &mid), (&mid, &high)] {
            for c in coarse.states.iter().filter(|s| s.state.z == z) {
                let parts: Vec<_> = fine
                    .states
                    .iter()
                    .filter(|f| {
                        // Mid codes read as bit patterns still compress to
                        // the single low-resolution code.
                        let g = SupportVector::from_bits(f.state.code);
                        f.state.z == z && compress(g, coarse.resolution).code == c.state.code
                    })
                    .collect();
                let mass: f64 = parts.iter().map(|f| f.mass).sum();
                assert!((mass - c.mass).abs() < 1e-12);
                for a in 0..3 {
                    let v: f64 = parts.iter().map(|f| f.mass * f.values[a].value).sum::<f64>() / mass;
                    assert!((v - c.values[a].value).abs() < 1e-9);
                }
            }
        }
    }
}
