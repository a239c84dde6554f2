//! Per-trial utility: regime-dependent payoff table, verification cost and a
//! linear resolution cost.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{ConsequenceRegime, EnvConfig};
use crate::memory::Action;
use crate::oracle::{self, NonDominanceReport, OracleSettings};
use crate::scalar::Real;
use crate::support::{AgentModel, Resolution, SupportThresholds};

#[derive(Debug, Error, PartialEq)]
pub enum UtilityError {
    #[error("action {0} requires a committed decision")]
    MissingCommitment(Action),
    #[error("abstention cannot carry a committed decision")]
    UnexpectedCommitment,
    #[error("invalid utility config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UtilityConfig<F> {
    pub reward_correct: F,
    pub pen_fp_routine: F,
    pub pen_miss_routine: F,
    pub pen_fp_threat: F,
    pub pen_miss_threat: F,
    pub cost_verify: F,
    pub pen_abstain_routine: F,
    pub pen_abstain_threat: F,
    /// Utility added per resolution level held on a trial (non-positive).
    pub cost_rho: F,
}

impl<F: Real> Default for UtilityConfig<F> {
    fn default() -> Self {
        Self {
            reward_correct: F::lit(1.0),
            pen_fp_routine: F::lit(-1.5),
            pen_miss_routine: F::lit(-1.5),
            pen_fp_threat: F::lit(-6.0),
            pen_miss_threat: F::lit(-10.0),
            cost_verify: F::lit(-0.62),
            pen_abstain_routine: F::lit(-1.0),
            pen_abstain_threat: F::lit(-1.4),
            cost_rho: F::lit(-0.016),
        }
    }
}

/// Additive decomposition of one trial's utility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UtilityBreakdown<F> {
    /// Commitment payoff, or the abstention penalty.
    pub payoff: F,
    pub verification: F,
    pub resolution: F,
    pub total: F,
}

impl<F: Real> UtilityConfig<F> {
    pub fn validate(&self) -> Result<(), UtilityError> {
        let fail = |m: &str| Err(UtilityError::InvalidConfig(m.to_string()));
        let all = [
            self.reward_correct,
            self.pen_fp_routine,
            self.pen_miss_routine,
            self.pen_fp_threat,
            self.pen_miss_threat,
            self.cost_verify,
            self.pen_abstain_routine,
            self.pen_abstain_threat,
            self.cost_rho,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return fail("all entries must be finite");
        }
        if self.reward_correct <= F::zero() {
            return fail("reward_correct must be positive");
        }
        for p in [
            self.pen_fp_routine,
            self.pen_miss_routine,
            self.pen_fp_threat,
            self.pen_miss_threat,
            self.pen_abstain_routine,
            self.pen_abstain_threat,
        ] {
            if p >= F::zero() {
                return fail("penalties must be negative");
            }
        }
        if self.pen_miss_threat.abs() <= self.pen_fp_threat.abs() {
            return fail("threat misses must cost more than threat false positives");
        }
        for z in ConsequenceRegime::ALL {
            let (fp, miss) = self.error_penalties(z);
            if self.abstain_penalty(z).abs() >= fp.abs().min(miss.abs()) {
                return fail("abstention must cost less than any commitment error");
            }
        }
        if self.cost_verify >= F::zero() {
            return fail("cost_verify must be negative");
        }
        if self.cost_rho > F::zero() {
            return fail("cost_rho must be non-positive");
        }
        Ok(())
    }

    /// `(false positive, miss)` penalties in a regime.
    pub fn error_penalties(&self, z: ConsequenceRegime) -> (F, F) {
        match z {
            ConsequenceRegime::Routine => (self.pen_fp_routine, self.pen_miss_routine),
            ConsequenceRegime::Threat => (self.pen_fp_threat, self.pen_miss_threat),
        }
    }

    pub fn abstain_penalty(&self, z: ConsequenceRegime) -> F {
        match z {
            ConsequenceRegime::Routine => self.pen_abstain_routine,
            ConsequenceRegime::Threat => self.pen_abstain_threat,
        }
    }

    /// Payoff of committing to `decision` when the latent state is `x_true`.
    #[inline]
    pub fn commit_payoff(&self, z: ConsequenceRegime, decision: bool, x_true: bool) -> F {
        let (fp, miss) = self.error_penalties(z);
        match (decision, x_true) {
            (d, x) if d == x => self.reward_correct,
            (true, false) => fp,
            _ => miss,
        }
    }

    /// Expected payoff of committing to `decision` when `P(x = 1) = p1`.
    #[inline]
    pub fn expected_commit_payoff(&self, z: ConsequenceRegime, decision: bool, p1: F) -> F {
        p1 * self.commit_payoff(z, decision, true)
            + (F::one() - p1) * self.commit_payoff(z, decision, false)
    }

    pub fn resolution_cost(&self, rho: Resolution) -> F {
        self.cost_rho * F::from_u8(rho.level()).unwrap()
    }

    pub fn trial_utility(
        &self,
        z: ConsequenceRegime,
        rho: Resolution,
        action: Action,
        committed: Option<bool>,
        x_true: bool,
    ) -> Result<UtilityBreakdown<F>, UtilityError> {
        let payoff = match (action, committed) {
            (Action::Abstain, None) => self.abstain_penalty(z),
            (Action::Abstain, Some(_)) => return Err(UtilityError::UnexpectedCommitment),
            (a, None) => return Err(UtilityError::MissingCommitment(a)),
            (_, Some(d)) => self.commit_payoff(z, d, x_true),
        };
        let verification = if action == Action::Verify {
            self.cost_verify
        } else {
            F::zero()
        };
        let resolution = self.resolution_cost(rho);
        Ok(UtilityBreakdown {
            payoff,
            verification,
            resolution,
            total: payoff + verification + resolution,
        })
    }
}

/// Checks that act, verify and abstain each win somewhere in the compressed
/// high-resolution state space.
pub fn check_non_dominance(
    util: &UtilityConfig<f64>,
    env: &EnvConfig<f64>,
    thresholds: &SupportThresholds<f64>,
    agent: &AgentModel<f64>,
    settings: &OracleSettings,
) -> Result<NonDominanceReport, oracle::OracleError> {
    oracle::non_dominance(env, util, thresholds, agent, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn defaults_satisfy_stated_inequalities() {
        UtilityConfig::<f64>::default().validate().unwrap();
    }

    #[test]
    fn correct_routine_act_at_low_resolution() {
        let u = UtilityConfig::<f64>::default();
        let b = u
            .trial_utility(ConsequenceRegime::Routine, Resolution::Low, Action::Act, Some(true), true)
            .unwrap();
        assert_eq!(b.total, 1.0);
    }

    #[test]
    fn abstention_has_no_outcome_term() {
        let u = UtilityConfig::<f64>::default();
        for x in [false, true] {
            let b = u
                .trial_utility(ConsequenceRegime::Threat, Resolution::High, Action::Abstain, None, x)
                .unwrap();
            assert_abs_diff_eq!(b.total, u.pen_abstain_threat + 2.0 * u.cost_rho, epsilon = 1e-12);
        }
    }

    #[test]
    fn verification_composes_additively() {
        let u = UtilityConfig::<f64>::default();
        let b = u
            .trial_utility(ConsequenceRegime::Threat, Resolution::High, Action::Verify, Some(false), false)
            .unwrap();
        assert_abs_diff_eq!(
            b.total,
            u.reward_correct + u.cost_verify + 2.0 * u.cost_rho,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(b.total, b.payoff + b.verification + b.resolution, epsilon = 1e-12);
    }

    #[test]
    fn errors_are_regime_dependent() {
        let u = UtilityConfig::<f64>::default();
        assert_eq!(u.commit_payoff(ConsequenceRegime::Threat, false, true), u.pen_miss_threat);
        assert_eq!(u.commit_payoff(ConsequenceRegime::Threat, true, false), u.pen_fp_threat);
        assert_eq!(u.commit_payoff(ConsequenceRegime::Routine, false, true), u.pen_miss_routine);
        assert_eq!(u.commit_payoff(ConsequenceRegime::Routine, true, true), u.reward_correct);
    }

    #[test]
    fn commitment_contract() {
        let u = UtilityConfig::<f64>::default();
        assert_eq!(
            u.trial_utility(ConsequenceRegime::Routine, Resolution::Low, Action::Verify, None, true),
            Err(UtilityError::MissingCommitment(Action::Verify))
        );
        assert_eq!(
            u.trial_utility(ConsequenceRegime::Routine, Resolution::Low, Action::Abstain, Some(true), true),
            Err(UtilityError::UnexpectedCommitment)
        );
    }

    #[test]
    fn validation_rejects_inverted_threat_penalties() {
        let u = UtilityConfig::<f64> {
            pen_miss_threat: -2.0,
            ..Default::default()
        };
        assert!(u.validate().is_err());
        let u = UtilityConfig::<f64> {
            pen_abstain_routine: -2.5,
            ..Default::default()
        };
        assert!(u.validate().is_err());
    }
}
