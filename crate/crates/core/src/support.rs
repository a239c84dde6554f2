//! Posterior fusion, support extraction and resolution-dependent compression.
//!
//! The raw support vector `g = (m, c, b)` flags low-margin beliefs, channel
//! conflict and a bad-quality cue. Compression keeps nothing at low
//! resolution, a single suspiciousness bit (`m | c | b`) at mid resolution and
//! the full three-bit code at high resolution.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{EnvConfig, TrialContext};
use crate::scalar::{logistic, logit, Real};

#[derive(Debug, Error, PartialEq)]
pub enum SupportError {
    #[error("posterior fusion needs at least one observation")]
    NoObservations,
    #[error("observation on channel {0} has non-positive or non-finite std-dev")]
    InvalidSigma(Channel),
    #[error("prior must lie in (0, 1)")]
    InvalidPrior,
    #[error("resolution must be 0, 1 or 2, got {0}")]
    InvalidResolution(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    A,
    B,
    C,
}

impl Channel {
    fn bit(self) -> u8 {
        match self {
            Channel::A => 1,
            Channel::B => 2,
            Channel::C => 4,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Set of channels that contributed to a belief.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ChannelSet(u8);

impl ChannelSet {
    pub fn insert(&mut self, ch: Channel) {
        self.0 |= ch.bit();
    }

    pub fn contains(self, ch: Channel) -> bool {
        self.0 & ch.bit() != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

/// A single Gaussian channel reading with the std-dev used to interpret it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation<F> {
    pub channel: Channel,
    pub value: F,
    pub sigma: F,
}

impl<F> Observation<F> {
    pub fn new(channel: Channel, value: F, sigma: F) -> Self {
        Self {
            channel,
            value,
            sigma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeliefState<F> {
    /// Posterior probability that the latent state is 1.
    pub p1: F,
    /// Selected content; ties resolve to 1.
    pub content: bool,
    pub confidence: F,
    pub channels_used: ChannelSet,
}

impl<F: Real> BeliefState<F> {
    fn from_p1(p1: F, channels_used: ChannelSet) -> Self {
        let content = p1 >= F::half();
        let confidence = if content { p1 } else { F::one() - p1 };
        Self {
            p1,
            content,
            confidence,
            channels_used,
        }
    }

    /// Posterior log-odds for state 1.
    pub fn log_odds(&self) -> F {
        logit(self.p1)
    }
}

/// Log-likelihood ratio of one reading for means {0, 1}: `(2y - 1) / (2 sigma^2)`.
#[inline]
pub fn log_likelihood_ratio<F: Real>(value: F, sigma: F) -> F {
    (F::two() * value - F::one()) / (F::two() * sigma * sigma)
}

/// Exact Bayesian fusion of independent Gaussian channels with means 0 and 1.
pub fn fuse_posterior<F: Real>(
    observations: &[Observation<F>],
    prior_x1: F,
) -> Result<BeliefState<F>, SupportError> {
    if observations.is_empty() {
        return Err(SupportError::NoObservations);
    }
    if !(prior_x1 > F::zero() && prior_x1 < F::one()) {
        return Err(SupportError::InvalidPrior);
    }
    let mut used = ChannelSet::default();
    let mut log_odds = logit(prior_x1);
    for obs in observations {
        if !(obs.sigma.is_finite() && obs.sigma > F::zero()) {
            return Err(SupportError::InvalidSigma(obs.channel));
        }
        used.insert(obs.channel);
        log_odds = log_odds + log_likelihood_ratio(obs.value, obs.sigma);
    }
    Ok(BeliefState::from_p1(logistic(log_odds), used))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupportThresholds<F> {
    /// `m = 1` when `|p1 - 0.5|` falls below this margin.
    pub margin: F,
}

impl<F: Real> Default for SupportThresholds<F> {
    fn default() -> Self {
        Self {
            margin: F::lit(0.15),
        }
    }
}

/// How the agent interprets channel B when fusing evidence.
///
/// The agent never sees B's true condition; it reads B with a single assumed
/// std-dev (the good-condition value unless overridden). The quality cue
/// reaches arbitration only through the support vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentModel<F> {
    pub assumed_sigma_b: Option<F>,
}

impl<F: Real> AgentModel<F> {
    pub fn sigma_b(&self, env: &EnvConfig<F>) -> F {
        self.assumed_sigma_b.unwrap_or(env.sigma_b_good)
    }

    /// Observations from the initial channels, as the agent reads them.
    pub fn initial_observations(&self, env: &EnvConfig<F>, ctx: &TrialContext<F>) -> [Observation<F>; 2] {
        [
            Observation::new(Channel::A, ctx.y_a, env.sigma_a),
            Observation::new(Channel::B, ctx.y_b, self.sigma_b(env)),
        ]
    }
}

/// Raw support descriptors: low margin, channel conflict, bad-quality cue.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SupportVector {
    pub m: bool,
    pub c: bool,
    pub b: bool,
}

impl SupportVector {
    pub fn new(m: bool, c: bool, b: bool) -> Self {
        Self { m, c, b }
    }

    /// All eight vectors, ordered by their high-resolution code.
    pub fn all() -> impl Iterator<Item = SupportVector> {
        (0u8..8).map(SupportVector::from_bits)
    }

    pub fn from_bits(bits: u8) -> Self {
        Self::new(bits & 4 != 0, bits & 2 != 0, bits & 1 != 0)
    }

    pub fn bits(self) -> u8 {
        (self.m as u8) << 2 | (self.c as u8) << 1 | self.b as u8
    }
}

/// Extracts `g` from the pre-verification belief (channels A and B).
pub fn extract_support<F: Real>(
    ctx: &TrialContext<F>,
    belief: &BeliefState<F>,
    thresholds: &SupportThresholds<F>,
) -> SupportVector {
    support_from_readings(ctx.y_a, ctx.y_b, ctx.quality_cue, belief.p1, thresholds)
}

#[inline]
pub(crate) fn support_from_readings<F: Real>(
    y_a: F,
    y_b: F,
    cue: bool,
    p1: F,
    thresholds: &SupportThresholds<F>,
) -> SupportVector {
    let half = F::half();
    SupportVector {
        m: (p1 - half).abs() < thresholds.margin,
        c: (y_a >= half) != (y_b >= half),
        b: cue,
    }
}

/// Support resolution level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Resolution {
    Low,
    Mid,
    High,
}

impl Resolution {
    pub const ALL: [Resolution; 3] = [Resolution::Low, Resolution::Mid, Resolution::High];

    pub fn new(level: u8) -> Result<Self, SupportError> {
        match level {
            0 => Ok(Resolution::Low),
            1 => Ok(Resolution::Mid),
            2 => Ok(Resolution::High),
            other => Err(SupportError::InvalidResolution(other)),
        }
    }

    pub fn level(self) -> u8 {
        match self {
            Resolution::Low => 0,
            Resolution::Mid => 1,
            Resolution::High => 2,
        }
    }

    /// Number of distinct codes at this resolution.
    pub fn code_count(self) -> usize {
        match self {
            Resolution::Low => 1,
            Resolution::Mid => 2,
            Resolution::High => 8,
        }
    }

    /// One level closer to `target`, or `self` when already there.
    pub fn step_toward(self, target: Resolution) -> Resolution {
        use std::cmp::Ordering::*;
        match self.level().cmp(&target.level()) {
            Less => Resolution::new(self.level() + 1).unwrap(),
            Greater => Resolution::new(self.level() - 1).unwrap(),
            Equal => self,
        }
    }
}

impl TryFrom<u8> for Resolution {
    type Error = SupportError;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Resolution::new(v)
    }
}

impl From<Resolution> for u8 {
    fn from(r: Resolution) -> u8 {
        r.level()
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.level())
    }
}

/// Compressed support `S^rho`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SupportCode {
    pub resolution: Resolution,
    pub code: u8,
}

pub fn compress(g: SupportVector, resolution: Resolution) -> SupportCode {
    let code = match resolution {
        Resolution::Low => 0,
        Resolution::Mid => (g.m || g.c || g.b) as u8,
        Resolution::High => g.bits(),
    };
    SupportCode { resolution, code }
}

/// Compression at a raw level, rejecting levels outside {0, 1, 2}.
pub fn compress_level(g: SupportVector, level: u8) -> Result<SupportCode, SupportError> {
    Ok(compress(g, Resolution::new(level)?))
}
