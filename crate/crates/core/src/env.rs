//! Trial generator: latent state, regime processes, channel observations and
//! the quality cue, plus the on-demand verification channel.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{bernoulli, Real};

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error("channel C already revealed for trial {0}")]
    DoubleVerification(usize),
}

/// Stakes regime `Z_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsequenceRegime {
    Routine,
    Threat,
}

impl ConsequenceRegime {
    pub const ALL: [ConsequenceRegime; 2] = [ConsequenceRegime::Routine, ConsequenceRegime::Threat];

    pub fn index(self) -> usize {
        match self {
            ConsequenceRegime::Routine => 0,
            ConsequenceRegime::Threat => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ConsequenceRegime::Routine => "routine",
            ConsequenceRegime::Threat => "threat",
        }
    }
}

impl fmt::Display for ConsequenceRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Support regime `R_t`: how informative the quality cue about channel B is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportRegime {
    Stable,
    Shifted,
}

impl SupportRegime {
    pub fn name(self) -> &'static str {
        match self {
            SupportRegime::Stable => "stable",
            SupportRegime::Shifted => "shifted",
        }
    }

    fn flipped(self) -> Self {
        match self {
            SupportRegime::Stable => SupportRegime::Shifted,
            SupportRegime::Shifted => SupportRegime::Stable,
        }
    }
}

impl fmt::Display for SupportRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Generative parameters of the task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig<F> {
    pub sigma_a: F,
    pub sigma_b_good: F,
    pub sigma_b_bad: F,
    pub sigma_c: F,
    pub p_b_degraded: F,
    /// Probability that B keeps the previous trial's condition instead of a
    /// fresh draw. Zero gives i.i.d. degradation.
    pub b_persistence: F,
    pub p_routine_to_threat: F,
    pub p_threat_to_routine: F,
    pub p_support_switch: F,
    pub cue_accuracy_stable: F,
    pub cue_accuracy_shifted: F,
    pub prior_x1: F,
}

impl<F: Real> Default for EnvConfig<F> {
    fn default() -> Self {
        Self {
            sigma_a: F::lit(0.8),
            sigma_b_good: F::lit(0.7),
            sigma_b_bad: F::lit(1.8),
            sigma_c: F::lit(0.62),
            p_b_degraded: F::lit(0.3),
            b_persistence: F::zero(),
            p_routine_to_threat: F::lit(0.01),
            p_threat_to_routine: F::lit(0.09),
            p_support_switch: F::lit(0.002),
            cue_accuracy_stable: F::lit(0.9),
            cue_accuracy_shifted: F::lit(0.55),
            prior_x1: F::half(),
        }
    }
}

/// One generated trial before any action is taken.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialContext<F> {
    pub t: usize,
    pub x_true: bool,
    pub z: ConsequenceRegime,
    pub r: SupportRegime,
    pub b_degraded: bool,
    pub y_a: F,
    pub y_b: F,
    pub quality_cue: bool,
    y_c: Option<F>,
}

impl<F: Real> TrialContext<F> {
    /// Channel C reading, if it was revealed this trial.
    pub fn y_c(&self) -> Option<F> {
        self.y_c
    }

    pub fn x_value(&self) -> F {
        if self.x_true {
            F::one()
        } else {
            F::zero()
        }
    }
}

impl<F: Real> EnvConfig<F> {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |msg: &str| Err(EnvError::InvalidConfig(msg.to_string()));
        for (name, sd) in [
            ("sigma_a", self.sigma_a),
            ("sigma_b_good", self.sigma_b_good),
            ("sigma_b_bad", self.sigma_b_bad),
            ("sigma_c", self.sigma_c),
        ] {
            if !(sd.is_finite() && sd > F::zero()) {
                return bad(&format!("{name} must be finite and > 0"));
            }
        }
        if self.sigma_c >= self.sigma_a {
            return bad("sigma_c must be smaller than sigma_a");
        }
        if self.sigma_b_good >= self.sigma_b_bad {
            return bad("sigma_b_good must be smaller than sigma_b_bad");
        }
        for (name, p) in [
            ("p_b_degraded", self.p_b_degraded),
            ("b_persistence", self.b_persistence),
            ("p_routine_to_threat", self.p_routine_to_threat),
            ("p_threat_to_routine", self.p_threat_to_routine),
            ("p_support_switch", self.p_support_switch),
            ("cue_accuracy_stable", self.cue_accuracy_stable),
            ("cue_accuracy_shifted", self.cue_accuracy_shifted),
        ] {
            if !(p >= F::zero() && p <= F::one()) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.prior_x1 > F::zero() && self.prior_x1 < F::one()) {
            return bad("prior_x1 must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn sigma_b(&self, degraded: bool) -> F {
        if degraded {
            self.sigma_b_bad
        } else {
            self.sigma_b_good
        }
    }

    pub fn cue_accuracy(&self, r: SupportRegime) -> F {
        match r {
            SupportRegime::Stable => self.cue_accuracy_stable,
            SupportRegime::Shifted => self.cue_accuracy_shifted,
        }
    }

    /// Long-run fraction of trials spent in the threat regime.
    pub fn stationary_threat_fraction(&self) -> F {
        let up = self.p_routine_to_threat;
        let down = self.p_threat_to_routine;
        if up + down == F::zero() {
            F::zero()
        } else {
            up / (up + down)
        }
    }

    /// Advances both regime chains by one step. Always consumes two uniforms.
    pub fn step_regimes<R: Rng + ?Sized>(
        &self,
        z_prev: ConsequenceRegime,
        r_prev: SupportRegime,
        rng: &mut R,
    ) -> (ConsequenceRegime, SupportRegime) {
        let switch_z = match z_prev {
            ConsequenceRegime::Routine => self.p_routine_to_threat,
            ConsequenceRegime::Threat => self.p_threat_to_routine,
        };
        let z = if bernoulli(rng, switch_z) {
            match z_prev {
                ConsequenceRegime::Routine => ConsequenceRegime::Threat,
                ConsequenceRegime::Threat => ConsequenceRegime::Routine,
            }
        } else {
            z_prev
        };
        let r = if bernoulli(rng, self.p_support_switch) {
            r_prev.flipped()
        } else {
            r_prev
        };
        (z, r)
    }

    /// Draws the latent state, B's condition, both initial channels and the
    /// quality cue. Consumes a fixed number of variates per call.
    pub fn emit_trial<R: Rng + ?Sized>(
        &self,
        t: usize,
        z: ConsequenceRegime,
        r: SupportRegime,
        b_prev: Option<bool>,
        rng: &mut R,
    ) -> TrialContext<F> {
        let x_true = bernoulli(rng, self.prior_x1);
        let fresh_b = bernoulli(rng, self.p_b_degraded);
        let keep_b = bernoulli(rng, self.b_persistence);
        let b_degraded = match b_prev {
            Some(prev) if keep_b => prev,
            _ => fresh_b,
        };
        let x = if x_true { F::one() } else { F::zero() };
        let y_a = x + self.sigma_a * F::standard_normal(rng);
        let y_b = x + self.sigma_b(b_degraded) * F::standard_normal(rng);
        let cue_correct = bernoulli(rng, self.cue_accuracy(r));
        let quality_cue = if cue_correct { b_degraded } else { !b_degraded };
        TrialContext {
            t,
            x_true,
            z,
            r,
            b_degraded,
            y_a,
            y_b,
            quality_cue,
            y_c: None,
        }
    }

    /// Reveals channel C for this trial. A second call is a controller bug.
    pub fn verify_channel<R: Rng + ?Sized>(
        &self,
        ctx: &mut TrialContext<F>,
        rng: &mut R,
    ) -> Result<F, EnvError> {
        if ctx.y_c.is_some() {
            return Err(EnvError::DoubleVerification(ctx.t));
        }
        let y_c = ctx.x_value() + self.sigma_c * F::standard_normal(rng);
        ctx.y_c = Some(y_c);
        Ok(y_c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn default_config_is_valid() {
        EnvConfig::<f64>::default().validate().unwrap();
        EnvConfig::<f32>::default().validate().unwrap();
    }

    #[test]
    fn rejects_zero_sigma_and_bad_orderings() {
        let cfg = EnvConfig::<f64> {
            sigma_a: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = EnvConfig::<f64> {
            sigma_c: 0.9,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = EnvConfig::<f64> {
            sigma_b_bad: 0.5,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = EnvConfig::<f64> {
            p_support_switch: 1.5,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = EnvConfig::<f64> {
            prior_x1: 1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn absorbing_routine_chain() {
        let cfg = EnvConfig::<f64> {
            p_routine_to_threat: 0.0,
            ..Default::default()
        };
        let mut g = rng(1);
        let mut z = ConsequenceRegime::Routine;
        let mut r = SupportRegime::Stable;
        for _ in 0..10_000 {
            (z, r) = cfg.step_regimes(z, r, &mut g);
            assert_eq!(z, ConsequenceRegime::Routine);
        }
    }

    #[test]
    fn perfect_cue_copies_b_condition() {
        let cfg = EnvConfig::<f64> {
            cue_accuracy_stable: 1.0,
            ..Default::default()
        };
        let mut g = rng(2);
        for t in 0..5_000 {
            let ctx = cfg.emit_trial(t, ConsequenceRegime::Routine, SupportRegime::Stable, None, &mut g);
            assert_eq!(ctx.quality_cue, ctx.b_degraded);
        }
    }

    #[test]
    fn near_zero_sigma_reproduces_latent_state() {
        let cfg = EnvConfig::<f64> {
            sigma_a: 1e-6,
            sigma_c: 1e-7,
            ..Default::default()
        };
        cfg.validate().unwrap();
        let mut g = rng(3);
        for t in 0..1_000 {
            let mut ctx =
                cfg.emit_trial(t, ConsequenceRegime::Threat, SupportRegime::Shifted, None, &mut g);
            assert!((ctx.y_a - ctx.x_value()).abs() < 1e-4);
            let y_c = cfg.verify_channel(&mut ctx, &mut g).unwrap();
            assert!((y_c - ctx.x_value()).abs() < 1e-5);
        }
    }

    #[test]
    fn second_verification_is_rejected() {
        let cfg = EnvConfig::<f64>::default();
        let mut g = rng(4);
        let mut ctx = cfg.emit_trial(7, ConsequenceRegime::Routine, SupportRegime::Stable, None, &mut g);
        assert!(ctx.y_c().is_none());
        cfg.verify_channel(&mut ctx, &mut g).unwrap();
        assert_eq!(
            cfg.verify_channel(&mut ctx, &mut g),
            Err(EnvError::DoubleVerification(7))
        );
    }

    #[test]
    fn full_persistence_freezes_b_condition() {
        let cfg = EnvConfig::<f64> {
            b_persistence: 1.0,
            ..Default::default()
        };
        let mut g = rng(5);
        let first = cfg.emit_trial(0, ConsequenceRegime::Routine, SupportRegime::Stable, None, &mut g);
        for t in 1..500 {
            let ctx = cfg.emit_trial(
                t,
                ConsequenceRegime::Routine,
                SupportRegime::Stable,
                Some(first.b_degraded),
                &mut g,
            );
            assert_eq!(ctx.b_degraded, first.b_degraded);
        }
    }

    #[test]
    fn same_seed_same_sequence() {
        let cfg = EnvConfig::<f64>::default();
        let run = |seed| {
            let mut g = rng(seed);
            let (mut z, mut r) = (ConsequenceRegime::Routine, SupportRegime::Stable);
            (0..200)
                .map(|t| {
                    (z, r) = cfg.step_regimes(z, r, &mut g);
                    cfg.emit_trial(t, z, r, None, &mut g)
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11), run(12));
    }
}
