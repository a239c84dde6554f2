//! Resolution-control policies: three fixed levels and two regime-informed
//! adaptive controllers that differ only in how fast they move.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::ConsequenceRegime;
use crate::support::Resolution;

#[derive(Debug, Error, PartialEq)]
pub enum ControllerError {
    #[error("unknown controller `{0}` (expected fixed_low | fixed_mid | fixed_high | adaptive_slow | adaptive_agile)")]
    UnknownName(String),
    #[error("inertia probability must lie in (0, 1], got {0}")]
    InvalidInertia(f64),
}

/// The five controller classes, by CLI name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerName {
    AdaptiveAgile,
    AdaptiveSlow,
    FixedHigh,
    FixedMid,
    FixedLow,
}

impl ControllerName {
    pub const ALL: [ControllerName; 5] = [
        ControllerName::AdaptiveAgile,
        ControllerName::AdaptiveSlow,
        ControllerName::FixedHigh,
        ControllerName::FixedMid,
        ControllerName::FixedLow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ControllerName::AdaptiveAgile => "adaptive_agile",
            ControllerName::AdaptiveSlow => "adaptive_slow",
            ControllerName::FixedHigh => "fixed_high",
            ControllerName::FixedMid => "fixed_mid",
            ControllerName::FixedLow => "fixed_low",
        }
    }
}

impl fmt::Display for ControllerName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControllerName {
    type Err = ControllerError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ControllerName::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| ControllerError::UnknownName(s.to_string()))
    }
}

/// Regime-to-resolution targets for the adaptive controllers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesiredMap {
    pub routine: Resolution,
    pub threat: Resolution,
}

impl Default for DesiredMap {
    fn default() -> Self {
        Self {
            routine: Resolution::Mid,
            threat: Resolution::High,
        }
    }
}

impl DesiredMap {
    pub fn get(&self, z: ConsequenceRegime) -> Resolution {
        match z {
            ConsequenceRegime::Routine => self.routine,
            ConsequenceRegime::Threat => self.threat,
        }
    }
}

/// Shared parameters the named controllers are built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSettings {
    pub desired: DesiredMap,
    /// Per-trial probability the sluggish controller takes one step toward
    /// its target.
    pub inertia_p: f64,
}

impl Default for ControllerSettings {
    fn default() -> Self {
        Self {
            desired: DesiredMap::default(),
            inertia_p: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControllerSpec {
    Fixed(Resolution),
    Adaptive { desired: DesiredMap, inertia_p: f64 },
}

impl ControllerSpec {
    pub fn named(name: ControllerName, settings: &ControllerSettings) -> Result<Self, ControllerError> {
        let p = settings.inertia_p;
        if !(p > 0.0 && p <= 1.0) {
            return Err(ControllerError::InvalidInertia(p));
        }
        Ok(match name {
            ControllerName::FixedLow => ControllerSpec::Fixed(Resolution::Low),
            ControllerName::FixedMid => ControllerSpec::Fixed(Resolution::Mid),
            ControllerName::FixedHigh => ControllerSpec::Fixed(Resolution::High),
            ControllerName::AdaptiveAgile => ControllerSpec::Adaptive {
                desired: settings.desired,
                inertia_p: 1.0,
            },
            ControllerName::AdaptiveSlow => ControllerSpec::Adaptive {
                desired: settings.desired,
                inertia_p: p,
            },
        })
    }

    /// Resolution in force before the first trial.
    pub fn initial(&self, z: ConsequenceRegime) -> Resolution {
        match *self {
            ControllerSpec::Fixed(rho) => rho,
            ControllerSpec::Adaptive { desired, .. } => desired.get(z),
        }
    }

    /// Chooses this trial's resolution. Adaptive controllers consume exactly
    /// one uniform per call; fixed controllers consume none.
    pub fn select_resolution<R: Rng + ?Sized>(
        &self,
        z: ConsequenceRegime,
        rho_prev: Resolution,
        rng: &mut R,
    ) -> Resolution {
        match *self {
            ControllerSpec::Fixed(rho) => rho,
            ControllerSpec::Adaptive { desired, inertia_p } => {
                let u: f64 = rng.random();
                if u < inertia_p {
                    rho_prev.step_toward(desired.get(z))
                } else {
                    rho_prev
                }
            }
        }
    }
}
