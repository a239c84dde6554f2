//! Arbitration memory: support-conditioned action values with epsilon-greedy
//! selection and exponential-moving-average updates.
//!
//! Every trial is a contextual bandit round; there is no bootstrapped target.
//! The table is dense over the 22 reachable policy states
//! (2 regimes x (1 + 2 + 8) codes).

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::ConsequenceRegime;
use crate::scalar::Real;
use crate::support::{Resolution, SupportCode};

#[derive(Debug, Error, PartialEq)]
pub enum MemoryError {
    #[error("reward must be finite")]
    NonFiniteReward,
    #[error("learning rate must lie in (0, 1]")]
    InvalidAlpha,
    #[error("support code {code} out of range for resolution {resolution}")]
    CodeOutOfRange { resolution: Resolution, code: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Act,
    Verify,
    Abstain,
}

impl Action {
    /// Tie-break order is the declaration order.
    pub const ALL: [Action; 3] = [Action::Act, Action::Verify, Action::Abstain];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Act => "act",
            Action::Verify => "verify",
            Action::Abstain => "abstain",
        }
    }

    /// Whether the action ends in a commitment.
    pub fn commits(self) -> bool {
        !matches!(self, Action::Abstain)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Key under which action values are stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PolicyState {
    pub z: ConsequenceRegime,
    pub resolution: Resolution,
    pub code: u8,
}

const STATES_PER_REGIME: usize = 11;

impl PolicyState {
    pub const COUNT: usize = 2 * STATES_PER_REGIME;

    pub fn new(z: ConsequenceRegime, code: SupportCode) -> Self {
        Self {
            z,
            resolution: code.resolution,
            code: code.code,
        }
    }

    fn resolution_offset(r: Resolution) -> usize {
        match r {
            Resolution::Low => 0,
            Resolution::Mid => 1,
            Resolution::High => 3,
        }
    }

    pub fn index(&self) -> Result<usize, MemoryError> {
        if self.code as usize >= self.resolution.code_count() {
            return Err(MemoryError::CodeOutOfRange {
                resolution: self.resolution,
                code: self.code,
            });
        }
        Ok(self.z.index() * STATES_PER_REGIME
            + Self::resolution_offset(self.resolution)
            + self.code as usize)
    }

    /// Every valid key, in table order.
    pub fn all() -> impl Iterator<Item = PolicyState> {
        ConsequenceRegime::ALL.into_iter().flat_map(|z| {
            Resolution::ALL.into_iter().flat_map(move |resolution| {
                (0..resolution.code_count() as u8).map(move |code| PolicyState {
                    z,
                    resolution,
                    code,
                })
            })
        })
    }

    /// Every valid key at one resolution.
    pub fn at_resolution(resolution: Resolution) -> impl Iterator<Item = PolicyState> {
        Self::all().filter(move |s| s.resolution == resolution)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArbitrationMemory<F> {
    q: Vec<[F; 3]>,
    visits: Vec<[u64; 3]>,
}

impl<F: Real> Default for ArbitrationMemory<F> {
    fn default() -> Self {
        Self::new()
    }
}

/// One row of a memory dump.
#[derive(Debug, Clone, Serialize)]
pub struct MemoryRow<F> {
    pub z: ConsequenceRegime,
    pub rho: u8,
    pub code: u8,
    pub action: Action,
    pub q: F,
    pub visits: u64,
}

impl<F: Real> ArbitrationMemory<F> {
    /// Zero-initialised table.
    pub fn new() -> Self {
        Self {
            q: vec![[F::zero(); 3]; PolicyState::COUNT],
            visits: vec![[0; 3]; PolicyState::COUNT],
        }
    }

    pub fn value(&self, s: &PolicyState, a: Action) -> F {
        self.q[s.index().expect("valid policy state")][a.index()]
    }

    pub fn values(&self, s: &PolicyState) -> [F; 3] {
        self.q[s.index().expect("valid policy state")]
    }

    pub fn visits(&self, s: &PolicyState, a: Action) -> u64 {
        self.visits[s.index().expect("valid policy state")][a.index()]
    }

    pub fn state_visits(&self, s: &PolicyState) -> u64 {
        self.visits[s.index().expect("valid policy state")].iter().sum()
    }

    pub fn set_value(&mut self, s: &PolicyState, a: Action, v: F) {
        self.q[s.index().expect("valid policy state")][a.index()] = v;
    }

    /// Greedy action; ties go to the earliest action in `Action::ALL`.
    pub fn greedy(&self, s: &PolicyState) -> Action {
        let q = self.values(s);
        let mut best = Action::Act;
        for a in Action::ALL {
            if q[a.index()] > q[best.index()] {
                best = a;
            }
        }
        best
    }

    /// Epsilon-greedy choice. Consumes one uniform, plus one index draw when
    /// exploring.
    pub fn select_action<R: Rng + ?Sized>(&self, s: &PolicyState, epsilon: f64, rng: &mut R) -> Action {
        let u: f64 = rng.random();
        if u < epsilon {
            Action::ALL[rng.random_range(0..Action::ALL.len())]
        } else {
            self.greedy(s)
        }
    }

    /// `q <- (1 - alpha) q + alpha * reward` on a single cell.
    pub fn update(&mut self, s: &PolicyState, a: Action, reward: F, alpha: F) -> Result<(), MemoryError> {
        if !reward.is_finite() {
            return Err(MemoryError::NonFiniteReward);
        }
        if !(alpha > F::zero() && alpha <= F::one()) {
            return Err(MemoryError::InvalidAlpha);
        }
        let i = s.index()?;
        let cell = &mut self.q[i][a.index()];
        *cell = (F::one() - alpha) * *cell + alpha * reward;
        self.visits[i][a.index()] += 1;
        Ok(())
    }

    pub fn rows(&self) -> Vec<MemoryRow<F>> {
        PolicyState::all()
            .flat_map(|s| {
                Action::ALL.into_iter().map(move |a| (s, a))
            })
            .map(|(s, a)| MemoryRow {
                z: s.z,
                rho: s.resolution.level(),
                code: s.code,
                action: a,
                q: self.value(&s, a),
                visits: self.visits(&s, a),
            })
            .collect()
    }
}
