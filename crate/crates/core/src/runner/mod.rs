//! Experiment orchestration: the per-trial arbitration loop, seeded runs per
//! controller, cross-seed aggregation and report files.

mod config;
mod report;

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use config::{ExperimentConfig, LearningConfig, MetricsConfig, RunConfig, DEFAULT_CONFIG_TOML};
pub use report::{write_memory_dump, write_reports, write_trace, ReportFiles};

use crate::controllers::{ControllerError, ControllerName, ControllerSpec};
use crate::env::{ConsequenceRegime, EnvError, SupportRegime};
use crate::memory::{Action, ArbitrationMemory, MemoryError, PolicyState};
use crate::metrics::{summarize, MetricsError, RunSummary};
use crate::scalar::Real;
use crate::support::{compress, extract_support, fuse_posterior, Channel, Observation, Resolution, SupportError};
use crate::utility::{UtilityBreakdown, UtilityError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Support(#[from] SupportError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Utility(#[from] UtilityError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{controller} seed {seed}: {source}")]
    Run {
        controller: ControllerName,
        seed: u64,
        #[source]
        source: Box<RunError>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Output { path: PathBuf, message: String },
}

/// Per-trial log entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord<F> {
    pub t: usize,
    pub z: ConsequenceRegime,
    pub r: SupportRegime,
    pub x_true: bool,
    pub b_degraded: bool,
    pub quality_cue: bool,
    pub rho: Resolution,
    pub code: u8,
    pub action: Action,
    pub committed: Option<bool>,
    pub correct: Option<bool>,
    /// Confidence of the committed belief (post-verification when verified).
    pub confidence: Option<F>,
    pub utility: UtilityBreakdown<F>,
}

/// Named random substreams derived from one master seed.
///
/// Environment draws never share a stream with agent-side randomness, so two
/// controllers run under the same seed face the same trial sequence.
#[derive(Debug, Clone)]
struct Streams {
    regimes: ChaCha8Rng,
    observations: ChaCha8Rng,
    verification: ChaCha8Rng,
    exploration: ChaCha8Rng,
    inertia: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let stream = |id: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        Self {
            regimes: stream(1),
            observations: stream(2),
            verification: stream(3),
            exploration: stream(4),
            inertia: stream(5),
        }
    }
}

/// One controller's run under one seed.
pub struct Simulation<'a, F: Real> {
    cfg: &'a RunConfig<F>,
    controller: ControllerSpec,
    memory: ArbitrationMemory<F>,
    streams: Streams,
    z: ConsequenceRegime,
    r: SupportRegime,
    rho: Resolution,
    b_prev: Option<bool>,
    t: usize,
}

impl<'a, F: Real> Simulation<'a, F> {
    pub fn new(cfg: &'a RunConfig<F>, controller: ControllerSpec, seed: u64) -> Self {
        let z = ConsequenceRegime::Routine;
        Self {
            cfg,
            controller,
            memory: ArbitrationMemory::new(),
            streams: Streams::new(seed),
            z,
            r: SupportRegime::Stable,
            rho: controller.initial(z),
            b_prev: None,
            t: 0,
        }
    }

    pub fn memory(&self) -> &ArbitrationMemory<F> {
        &self.memory
    }

    fn epsilon(&self) -> f64 {
        let l = &self.cfg.learning;
        if l.epsilon_decay < 1.0 {
            l.epsilon * l.epsilon_decay.powi(self.t.min(i32::MAX as usize) as i32)
        } else {
            l.epsilon
        }
    }

    /// Executes one arbitration cycle.
    pub fn run_trial(&mut self) -> Result<TrialRecord<F>, RunError> {
        let cfg = self.cfg;
        let env = &cfg.env;
        let epsilon = self.epsilon();
        let s = &mut self.streams;

        let (z, r) = env.step_regimes(self.z, self.r, &mut s.regimes);
        let mut ctx = env.emit_trial(self.t, z, r, self.b_prev, &mut s.observations);
        let initial = cfg.agent.initial_observations(env, &ctx);
        let belief = fuse_posterior(&initial, env.prior_x1)?;
        let g = extract_support(&ctx, &belief, &cfg.support);
        let rho = self.controller.select_resolution(z, self.rho, &mut s.inertia);
        let code = compress(g, rho);
        let state = PolicyState::new(z, code);
        let action = self.memory.select_action(&state, epsilon, &mut s.exploration);
        // Fixed consumption per trial keeps the verification stream aligned
        // across controllers.
        let mut verify_rng = ChaCha8Rng::from_seed(s.verification.random());

        let committed_belief = match action {
            Action::Act => Some(belief),
            Action::Verify => {
                let y_c = env.verify_channel(&mut ctx, &mut verify_rng)?;
                let all = [initial[0], initial[1], Observation::new(Channel::C, y_c, env.sigma_c)];
                Some(fuse_posterior(&all, env.prior_x1)?)
            }
            Action::Abstain => None,
        };
        let committed = committed_belief.map(|b| b.content);
        let utility = cfg
            .utility
            .trial_utility(z, rho, action, committed, ctx.x_true)?;
        let reward = if cfg.learning.reward_includes_resolution_cost {
            utility.total
        } else {
            utility.total - utility.resolution
        };
        self.memory
            .update(&state, action, reward, cfg.learning.alpha)?;

        let record = TrialRecord {
            t: self.t,
            z,
            r,
            x_true: ctx.x_true,
            b_degraded: ctx.b_degraded,
            quality_cue: ctx.quality_cue,
            rho,
            code: code.code,
            action,
            committed,
            correct: committed.map(|d| d == ctx.x_true),
            confidence: committed_belief.map(|b| b.confidence),
            utility,
        };
        self.z = z;
        self.r = r;
        self.rho = rho;
        self.b_prev = Some(ctx.b_degraded);
        self.t += 1;
        Ok(record)
    }
}

/// Everything one (controller, seed) run produces.
#[derive(Debug, Clone)]
pub struct RunOutput<F> {
    pub controller: ControllerName,
    pub seed: u64,
    pub records: Vec<TrialRecord<F>>,
    pub summary: RunSummary<F>,
    pub memory: ArbitrationMemory<F>,
}

pub fn run_single<F: Real>(
    cfg: &RunConfig<F>,
    controller: ControllerName,
    seed: u64,
) -> Result<RunOutput<F>, RunError> {
    let spec = ControllerSpec::named(controller, &cfg.controllers)?;
    let mut sim = Simulation::new(cfg, spec, seed);
    let mut records = Vec::with_capacity(cfg.experiment.trials);
    for _ in 0..cfg.experiment.trials {
        records.push(sim.run_trial()?);
    }
    let scored = &records[cfg.experiment.burnin.min(records.len().saturating_sub(1))..];
    let summary = summarize(scored, &cfg.metrics.summary_params())?;
    Ok(RunOutput {
        controller,
        seed,
        records,
        summary,
        memory: sim.memory,
    })
}

/// Cross-seed mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
    /// Seeds contributing (undefined per-seed values are skipped).
    pub n: usize,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, sd, n })
    }

    pub fn std_err(&self) -> f64 {
        self.sd / (self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllerAggregate {
    pub controller: ControllerName,
    pub cumulative_utility: Option<MeanSd>,
    pub commitment_accuracy: Option<MeanSd>,
    pub ece: Option<MeanSd>,
    pub verif_rate_routine: Option<MeanSd>,
    pub verif_rate_threat: Option<MeanSd>,
    pub abstain_rate_routine: Option<MeanSd>,
    pub abstain_rate_threat: Option<MeanSd>,
    pub mean_rho: Option<MeanSd>,
    pub support_efficiency: Option<MeanSd>,
}

/// Per-seed summary for one controller.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedSummary<F> {
    pub controller: ControllerName,
    pub seed: u64,
    pub summary: RunSummary<F>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult<F> {
    /// Sorted by controller, then seed.
    pub runs: Vec<SeedSummary<F>>,
    pub aggregates: Vec<ControllerAggregate>,
}

impl<F: Real> ExperimentResult<F> {
    pub fn aggregate(&self, c: ControllerName) -> Option<&ControllerAggregate> {
        self.aggregates.iter().find(|a| a.controller == c)
    }

    /// Per-seed summaries for one controller in seed order.
    pub fn seeds_of(&self, c: ControllerName) -> Vec<&SeedSummary<F>> {
        self.runs.iter().filter(|r| r.controller == c).collect()
    }
}

fn aggregate<F: Real>(controller: ControllerName, runs: &[&SeedSummary<F>]) -> ControllerAggregate {
    let col = |f: &dyn Fn(&RunSummary<F>) -> Option<F>| {
        let vals: Vec<f64> = runs.iter().filter_map(|r| f(&r.summary)).map(|v| v.as_f64()).collect();
        MeanSd::of(&vals)
    };
    ControllerAggregate {
        controller,
        cumulative_utility: col(&|s| Some(s.cumulative_utility)),
        commitment_accuracy: col(&|s| s.commitment_accuracy),
        ece: col(&|s| s.ece),
        verif_rate_routine: col(&|s| s.verif_rate_routine),
        verif_rate_threat: col(&|s| s.verif_rate_threat),
        abstain_rate_routine: col(&|s| s.abstain_rate_routine),
        abstain_rate_threat: col(&|s| s.abstain_rate_threat),
        mean_rho: col(&|s| Some(s.mean_rho)),
        support_efficiency: col(&|s| Some(s.support_efficiency)),
    }
}

/// Runs every configured (controller, seed) pair in parallel and folds the
/// results in sorted order.
pub fn run_experiment<F: Real>(cfg: &RunConfig<F>) -> Result<ExperimentResult<F>, RunError> {
    cfg.validate()?;
    let mut controllers = cfg.experiment.controllers.clone();
    controllers.sort();
    controllers.dedup();
    let mut seeds = cfg.experiment.seeds.clone();
    seeds.sort_unstable();
    let pairs: Vec<(ControllerName, u64)> = controllers
        .iter()
        .flat_map(|&c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let runs: Vec<SeedSummary<F>> = pairs
        .par_iter()
        .map(|&(controller, seed)| {
            run_single(cfg, controller, seed)
                .map(|out| SeedSummary {
                    controller,
                    seed,
                    summary: out.summary,
                })
                .map_err(|e| RunError::Run {
                    controller,
                    seed,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_, _>>()?;
    let aggregates = controllers
        .iter()
        .map(|&c| {
            let mine: Vec<&SeedSummary<F>> = runs.iter().filter(|r| r.controller == c).collect();
            aggregate(c, &mine)
        })
        .collect();
    Ok(ExperimentResult { runs, aggregates })
}
