//! Reference policies and sufficiency quantities.
//!
//! * [`optimal_action_full`]: best action given the exact posterior (true B
//!   condition known).
//! * [`CompressedOracle`]: for each policy state at each resolution, the
//!   action maximising conditional expected utility, estimated by Monte Carlo
//!   over the generative model.
//! * [`CompressedOracle::control_loss`]: paired estimate of the per-trial
//!   utility gap between the full-geometry policy and each compressed policy.
//! * [`resolution_objective`]: expected compressed-policy utility minus
//!   resolution and fragmentation costs.
//!
//! Expected utilities are Rao-Blackwellised: for every sampled trial the value
//! of each action is its expectation under the exact posterior, and the
//! post-verification commit probabilities are Gaussian tail masses of channel
//! C around the commit threshold.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::env::{ConsequenceRegime, EnvConfig};
use crate::memory::{Action, PolicyState};
use crate::scalar::{logistic, logit};
use crate::support::{log_likelihood_ratio, support_from_readings, AgentModel, Resolution, SupportThresholds};
use crate::utility::UtilityConfig;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("invalid oracle input: {0}")]
    InvalidInput(String),
}

/// What the full-geometry policy is allowed to know about channel B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FullGeometry {
    /// Exact posterior using B's true condition.
    #[default]
    TrueCondition,
    /// Posterior that marginalises B's condition given only the quality cue.
    CueOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSettings {
    pub seed: u64,
    /// Target draws per high-resolution support code.
    pub min_samples_per_state: u64,
    /// Hard cap on draws used to estimate compressed policies.
    pub max_samples: u64,
    /// Paired draws for the control-loss estimate.
    pub control_loss_samples: u64,
    pub geometry: FullGeometry,
    pub lambda_res: f64,
    pub lambda_frag: f64,
    /// Trial budget used by the fragmentation cost.
    pub trial_budget: u64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            seed: 20_260_101,
            min_samples_per_state: 1_000_000,
            max_samples: 400_000_000,
            control_loss_samples: 1_000_000,
            geometry: FullGeometry::TrueCondition,
            lambda_res: 0.016,
            lambda_frag: 1.0,
            trial_budget: 50_000,
        }
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub value: f64,
    pub std_err: f64,
    pub n: u64,
}

impl OracleEstimate {
    fn from_moments(m: &Moments) -> Self {
        let n = m.n.max(1) as f64;
        let mean = m.sum / n;
        let var = if m.n > 1 {
            ((m.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        Self {
            value: mean,
            std_err: (var / n).sqrt(),
            n: m.n.max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    #[inline]
    fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn merge(&mut self, o: &Moments) {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }
}

/// Action values and the maximiser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FullDecision {
    pub action: Action,
    /// Expected utility of act, verify, abstain (resolution cost excluded).
    pub values: [f64; 3],
}

fn argmax(values: &[f64; 3]) -> Action {
    let mut best = Action::Act;
    for a in Action::ALL {
        if values[a.index()] > values[best.index()] {
            best = a;
        }
    }
    best
}

/// `P(y >= tau)` for `y ~ N(mean, sigma^2)`.
#[inline]
fn upper_tail(tau: f64, mean: f64, sigma: f64) -> f64 {
    0.5 * erfc((tau - mean) / (sigma * std::f64::consts::SQRT_2))
}

/// Action values for a decision-maker whose commits follow `decide_log_odds`
/// while the truth is distributed with `P(x = 1) = p_true`.
#[inline]
fn action_values(
    env: &EnvConfig<f64>,
    util: &UtilityConfig<f64>,
    z: ConsequenceRegime,
    p_true: f64,
    decide_log_odds: f64,
) -> [f64; 3] {
    let act = util.expected_commit_payoff(z, decide_log_odds >= 0.0, p_true);
    // Commit 1 after verification iff decide_log_odds + llr(y_c) >= 0.
    let sc = env.sigma_c;
    let tau = 0.5 - sc * sc * decide_log_odds;
    let hi_1 = upper_tail(tau, 1.0, sc);
    let hi_0 = upper_tail(tau, 0.0, sc);
    let verify = util.cost_verify
        + p_true * (util.commit_payoff(z, true, true) * hi_1 + util.commit_payoff(z, false, true) * (1.0 - hi_1))
        + (1.0 - p_true)
            * (util.commit_payoff(z, true, false) * hi_0 + util.commit_payoff(z, false, false) * (1.0 - hi_0));
    [act, verify, util.abstain_penalty(z)]
}

fn exact_log_odds(env: &EnvConfig<f64>, y_a: f64, y_b: f64, b_degraded: bool) -> f64 {
    logit(env.prior_x1)
        + log_likelihood_ratio(y_a, env.sigma_a)
        + log_likelihood_ratio(y_b, env.sigma_b(b_degraded))
}

/// Average cue accuracy under the stationary (symmetric) support-regime chain.
fn mean_cue_accuracy(env: &EnvConfig<f64>) -> f64 {
    0.5 * (env.cue_accuracy_stable + env.cue_accuracy_shifted)
}

fn cue_only_log_odds(env: &EnvConfig<f64>, y_a: f64, y_b: f64, cue: bool) -> f64 {
    let acc = mean_cue_accuracy(env);
    let pd = env.p_b_degraded;
    // P(b = degraded | cue)
    let w_bad = if cue { acc * pd } else { (1.0 - acc) * pd };
    let w_good = if cue { (1.0 - acc) * (1.0 - pd) } else { acc * (1.0 - pd) };
    let lik = |x: f64, sd: f64| (-(y_b - x) * (y_b - x) / (2.0 * sd * sd)).exp() / sd;
    let mix = |x: f64| w_bad * lik(x, env.sigma_b_bad) + w_good * lik(x, env.sigma_b_good);
    logit(env.prior_x1) + log_likelihood_ratio(y_a, env.sigma_a) + (mix(1.0) / mix(0.0)).ln()
}

fn check_readings(y_a: f64, y_b: f64) -> Result<(), OracleError> {
    if y_a.is_finite() && y_b.is_finite() {
        Ok(())
    } else {
        Err(OracleError::InvalidInput("observations must be finite".into()))
    }
}

/// Best action when the exact posterior (true B condition) is available.
pub fn optimal_action_full(
    env: &EnvConfig<f64>,
    util: &UtilityConfig<f64>,
    z: ConsequenceRegime,
    y_a: f64,
    y_b: f64,
    b_degraded: bool,
) -> Result<FullDecision, OracleError> {
    check_readings(y_a, y_b)?;
    let lo = exact_log_odds(env, y_a, y_b, b_degraded);
    let values = action_values(env, util, z, logistic(lo), lo);
    Ok(FullDecision {
        action: argmax(&values),
        values,
    })
}

/// Best action when only the quality cue about B is available.
pub fn optimal_action_cue_only(
    env: &EnvConfig<f64>,
    util: &UtilityConfig<f64>,
    z: ConsequenceRegime,
    y_a: f64,
    y_b: f64,
    cue: bool,
) -> Result<FullDecision, OracleError> {
    check_readings(y_a, y_b)?;
    let lo = cue_only_log_odds(env, y_a, y_b, cue);
    let values = action_values(env, util, z, logistic(lo), lo);
    Ok(FullDecision {
        action: argmax(&values),
        values,
    })
}

/// One sampled pre-verification situation.
#[derive(Debug, Clone, Copy)]
struct Draw {
    code: u8,
    p_true: f64,
    agent_log_odds: f64,
    geometry_log_odds: f64,
}

struct Sampler<'a> {
    env: &'a EnvConfig<f64>,
    thresholds: &'a SupportThresholds<f64>,
    agent_sigma_b: f64,
    geometry: FullGeometry,
}

impl Sampler<'_> {
    #[inline]
    fn draw<R: Rng>(&self, rng: &mut R) -> Draw {
        let env = self.env;
        let x: bool = rng.random::<f64>() < env.prior_x1;
        let b_degraded = rng.random::<f64>() < env.p_b_degraded;
        let stable = rng.random::<f64>() < 0.5;
        let acc = if stable { env.cue_accuracy_stable } else { env.cue_accuracy_shifted };
        let cue = if rng.random::<f64>() < acc { b_degraded } else { !b_degraded };
        let xv = if x { 1.0 } else { 0.0 };
        let y_a = xv + env.sigma_a * <f64 as crate::scalar::Real>::standard_normal(rng);
        let y_b = xv + env.sigma_b(b_degraded) * <f64 as crate::scalar::Real>::standard_normal(rng);

        let prior = logit(env.prior_x1);
        let agent_log_odds =
            prior + log_likelihood_ratio(y_a, env.sigma_a) + log_likelihood_ratio(y_b, self.agent_sigma_b);
        let g = support_from_readings(y_a, y_b, cue, logistic(agent_log_odds), self.thresholds);
        let exact = exact_log_odds(env, y_a, y_b, b_degraded);
        let geometry_log_odds = match self.geometry {
            FullGeometry::TrueCondition => exact,
            FullGeometry::CueOnly => cue_only_log_odds(env, y_a, y_b, cue),
        };
        Draw {
            code: g.bits(),
            p_true: logistic(exact),
            agent_log_odds,
            geometry_log_odds,
        }
    }
}

fn batch_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const BATCH: u64 = 1 << 16;

/// Per (regime, high-resolution code, action) moments of the agent's
/// expected utility.
#[derive(Debug, Clone)]
struct CodeTable {
    moments: [[[Moments; 3]; 8]; 2],
    counts: [u64; 8],
}

impl Default for CodeTable {
    fn default() -> Self {
        Self {
            moments: [[[Moments::default(); 3]; 8]; 2],
            counts: [0; 8],
        }
    }
}

impl CodeTable {
    fn merge(&mut self, o: &CodeTable) {
        for z in 0..2 {
            for c in 0..8 {
                for a in 0..3 {
                    self.moments[z][c][a].merge(&o.moments[z][c][a]);
                }
            }
        }
        for c in 0..8 {
            self.counts[c] += o.counts[c];
        }
    }
}

/// Conditional action values for one policy state.
#[derive(Debug, Clone, Serialize)]
pub struct StateValues {
    pub state: PolicyState,
    /// Probability mass of the state's support code.
    pub mass: f64,
    pub samples: u64,
    pub values: [OracleEstimate; 3],
    /// `None` when the state was never sampled.
    pub best: Option<Action>,
}

/// Compressed-optimal policy at one resolution.
#[derive(Debug, Clone, Serialize)]
pub struct CompressedPolicy {
    pub resolution: Resolution,
    pub states: Vec<StateValues>,
}

impl CompressedPolicy {
    pub fn action(&self, s: &PolicyState) -> Option<Action> {
        self.states.iter().find(|v| v.state == *s).and_then(|v| v.best)
    }

    pub fn reachable_states(&self) -> usize {
        self.states.iter().filter(|v| v.best.is_some()).count()
    }

    fn lookup(&self) -> [[Action; 8]; 2] {
        let mut out = [[Action::Act; 8]; 2];
        for z in ConsequenceRegime::ALL {
            for bits in 0..8u8 {
                let code = crate::support::compress(
                    crate::support::SupportVector::from_bits(bits),
                    self.resolution,
                );
                let s = PolicyState::new(z, code);
                out[z.index()][bits as usize] = self.action(&s).unwrap_or(Action::Act);
            }
        }
        out
    }
}

/// Control loss and expected utilities per resolution.
#[derive(Debug, Clone, Serialize)]
pub struct ControlLossReport {
    /// `L_ctrl(rho)` for rho = 0, 1, 2.
    pub loss: [OracleEstimate; 3],
    /// Paired differences `L(0) - L(1)` and `L(1) - L(2)`.
    pub gaps: [OracleEstimate; 2],
    /// Expected utility of each compressed-optimal policy.
    pub expected_utility: [OracleEstimate; 3],
    pub full_utility: OracleEstimate,
    pub threat_weight: f64,
}

/// Monte Carlo oracle over the generative model.
pub struct CompressedOracle {
    env: EnvConfig<f64>,
    util: UtilityConfig<f64>,
    thresholds: SupportThresholds<f64>,
    agent: AgentModel<f64>,
    settings: OracleSettings,
    table: CodeTable,
    total_samples: u64,
}

impl CompressedOracle {
    /// Samples until every high-resolution code has
    /// `min_samples_per_state` draws or `max_samples` is reached.
    pub fn estimate(
        env: &EnvConfig<f64>,
        util: &UtilityConfig<f64>,
        thresholds: &SupportThresholds<f64>,
        agent: &AgentModel<f64>,
        settings: &OracleSettings,
    ) -> Result<Self, OracleError> {
        env.validate()
            .map_err(|e| OracleError::InvalidInput(e.to_string()))?;
        let sampler = Sampler {
            env,
            thresholds,
            agent_sigma_b: agent.sigma_b(env),
            geometry: settings.geometry,
        };
        let wave = (rayon::current_num_threads() as u64 * 4).max(8);
        let mut table = CodeTable::default();
        let mut total = 0u64;
        let mut next_batch = 0u64;
        while total < settings.max_samples
            && table.counts.iter().any(|&c| c < settings.min_samples_per_state)
        {
            let remaining = (settings.max_samples - total).div_ceil(BATCH);
            let n_batches = wave.min(remaining);
            let parts: Vec<CodeTable> = (next_batch..next_batch + n_batches)
                .into_par_iter()
                .map(|b| {
                    let mut rng = batch_rng(settings.seed, b);
                    let mut t = CodeTable::default();
                    for _ in 0..BATCH {
                        let d = sampler.draw(&mut rng);
                        let c = d.code as usize;
                        t.counts[c] += 1;
                        for z in ConsequenceRegime::ALL {
                            let v = action_values(env, util, z, d.p_true, d.agent_log_odds);
                            for a in 0..3 {
                                t.moments[z.index()][c][a].push(v[a]);
                            }
                        }
                    }
                    t
                })
                .collect();
            for p in &parts {
                table.merge(p);
            }
            next_batch += n_batches;
            total += n_batches * BATCH;
        }
        Ok(Self {
            env: env.clone(),
            util: util.clone(),
            thresholds: *thresholds,
            agent: *agent,
            settings: settings.clone(),
            table,
            total_samples: total,
        })
    }

    pub fn total_samples(&self) -> u64 {
        self.total_samples
    }

    /// Draw counts per high-resolution code.
    pub fn code_counts(&self) -> [u64; 8] {
        self.table.counts
    }

    pub fn policy(&self, resolution: Resolution) -> CompressedPolicy {
        let total = self.total_samples.max(1) as f64;
        let states = PolicyState::at_resolution(resolution)
            .map(|state| {
                let mut acc = [Moments::default(); 3];
                let mut samples = 0;
                for bits in 0..8u8 {
                    let g = crate::support::SupportVector::from_bits(bits);
                    if crate::support::compress(g, resolution).code != state.code {
                        continue;
                    }
                    samples += self.table.counts[bits as usize];
                    for (a, m) in acc.iter_mut().enumerate() {
                        m.merge(&self.table.moments[state.z.index()][bits as usize][a]);
                    }
                }
                let values = acc.map(|m| OracleEstimate::from_moments(&m));
                let best = (samples > 0).then(|| argmax(&values.map(|e| e.value)));
                StateValues {
                    state,
                    mass: samples as f64 / total,
                    samples,
                    values,
                    best,
                }
            })
            .collect();
        CompressedPolicy { resolution, states }
    }

    pub fn policies(&self) -> [CompressedPolicy; 3] {
        Resolution::ALL.map(|r| self.policy(r))
    }

    /// Paired estimate of `E[U(pi*) - U(pi^rho)]` for every resolution,
    /// averaging the two regimes at their stationary weights. Resolution cost
    /// is excluded.
    pub fn control_loss(&self, n: u64) -> ControlLossReport {
        let env = &self.env;
        let util = &self.util;
        let sampler = Sampler {
            env,
            thresholds: &self.thresholds,
            agent_sigma_b: self.agent.sigma_b(env),
            geometry: self.settings.geometry,
        };
        let lookups = self.policies().map(|p| p.lookup());
        let w_threat = env.stationary_threat_fraction();
        let weights = [1.0 - w_threat, w_threat];
        // Distinct stream range from policy estimation.
        let stream_base = 1u64 << 40;

        #[derive(Default, Clone, Copy)]
        struct Acc {
            loss: [Moments; 3],
            gaps: [Moments; 2],
            eu: [Moments; 3],
            full: Moments,
        }

        let n_batches = n.div_ceil(BATCH);
        let parts: Vec<Acc> = (0..n_batches)
            .into_par_iter()
            .map(|b| {
                let mut rng = batch_rng(self.settings.seed, stream_base + b);
                let mut acc = Acc::default();
                let len = BATCH.min(n - b * BATCH);
                for _ in 0..len {
                    let d = sampler.draw(&mut rng);
                    let mut full = 0.0;
                    let mut eu = [0.0; 3];
                    for z in ConsequenceRegime::ALL {
                        let w = weights[z.index()];
                        let star_choice = match self.settings.geometry {
                            FullGeometry::TrueCondition => {
                                action_values(env, util, z, d.p_true, d.geometry_log_odds)
                            }
                            FullGeometry::CueOnly => action_values(
                                env,
                                util,
                                z,
                                logistic(d.geometry_log_odds),
                                d.geometry_log_odds,
                            ),
                        };
                        let star = action_values(env, util, z, d.p_true, d.geometry_log_odds);
                        full += w * star[argmax(&star_choice).index()];
                        let agent = action_values(env, util, z, d.p_true, d.agent_log_odds);
                        for (r, lk) in lookups.iter().enumerate() {
                            eu[r] += w * agent[lk[z.index()][d.code as usize].index()];
                        }
                    }
                    acc.full.push(full);
                    for r in 0..3 {
                        acc.eu[r].push(eu[r]);
                        acc.loss[r].push(full - eu[r]);
                    }
                    acc.gaps[0].push(eu[1] - eu[0]);
                    acc.gaps[1].push(eu[2] - eu[1]);
                }
                acc
            })
            .collect();
        let mut total = Acc::default();
        for p in &parts {
            for r in 0..3 {
                total.loss[r].merge(&p.loss[r]);
                total.eu[r].merge(&p.eu[r]);
            }
            total.gaps[0].merge(&p.gaps[0]);
            total.gaps[1].merge(&p.gaps[1]);
            total.full.merge(&p.full);
        }
        ControlLossReport {
            loss: total.loss.map(|m| OracleEstimate::from_moments(&m)),
            gaps: total.gaps.map(|m| OracleEstimate::from_moments(&m)),
            expected_utility: total.eu.map(|m| OracleEstimate::from_moments(&m)),
            full_utility: OracleEstimate::from_moments(&total.full),
            threat_weight: w_threat,
        }
    }
}

/// `L_ctrl(rho)` with the oracle's configured settings.
pub fn control_loss(
    env: &EnvConfig<f64>,
    util: &UtilityConfig<f64>,
    thresholds: &SupportThresholds<f64>,
    agent: &AgentModel<f64>,
    rho: Resolution,
    n: u64,
    settings: &OracleSettings,
) -> Result<OracleEstimate, OracleError> {
    let oracle = CompressedOracle::estimate(env, util, thresholds, agent, settings)?;
    Ok(oracle.control_loss(n).loss[rho.level() as usize])
}

/// Fragmentation model: how many trials the learner gets to spread over its
/// reachable policy states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FragModel {
    pub trial_budget: u64,
}

impl FragModel {
    /// States per effective sample: `states / (budget / states)`.
    pub fn cost(&self, reachable_states: usize) -> f64 {
        let s = reachable_states as f64;
        s * s / self.trial_budget.max(1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveTerms {
    pub resolution: Resolution,
    pub expected_utility: f64,
    pub resolution_cost: f64,
    pub fragmentation_cost: f64,
    pub value: f64,
}

/// `E[U(pi^rho)] - lambda_res * rho - lambda_frag * C_frag(rho)`.
pub fn resolution_objective(
    expected_utility: f64,
    rho: Resolution,
    reachable_states: usize,
    lambda_res: f64,
    lambda_frag: f64,
    frag: FragModel,
) -> ObjectiveTerms {
    let resolution_cost = lambda_res * rho.level() as f64;
    let fragmentation_cost = lambda_frag * frag.cost(reachable_states);
    ObjectiveTerms {
        resolution: rho,
        expected_utility,
        resolution_cost,
        fragmentation_cost,
        value: expected_utility - resolution_cost - fragmentation_cost,
    }
}

/// Evaluates the objective at every resolution and returns the terms with the
/// index of the maximiser (ties go to the lower resolution).
pub fn best_resolution(
    report: &ControlLossReport,
    policies: &[CompressedPolicy; 3],
    lambda_res: f64,
    lambda_frag: f64,
    frag: FragModel,
) -> ([ObjectiveTerms; 3], Resolution) {
    let terms = Resolution::ALL.map(|r| {
        let i = r.level() as usize;
        resolution_objective(
            report.expected_utility[i].value,
            r,
            policies[i].reachable_states(),
            lambda_res,
            lambda_frag,
            frag,
        )
    });
    let mut best = 0;
    for i in 1..3 {
        if terms[i].value > terms[best].value {
            best = i;
        }
    }
    (terms, Resolution::ALL[best])
}

/// One witnessing policy state for the non-dominance check.
#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub state: PolicyState,
    pub values: [f64; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct NonDominanceReport {
    /// Clean code (no support flags) where act is optimal.
    pub act: Option<Witness>,
    /// Suspicious code where verify is optimal.
    pub verify: Option<Witness>,
    /// Suspicious code under threat where abstain is optimal.
    pub abstain: Option<Witness>,
    pub states: Vec<StateValues>,
}

impl NonDominanceReport {
    pub fn passed(&self) -> bool {
        self.act.is_some() && self.verify.is_some() && self.abstain.is_some()
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.act.is_none() {
            out.push("no clean support state where act is optimal");
        }
        if self.verify.is_none() {
            out.push("no suspicious support state where verify is optimal");
        }
        if self.abstain.is_none() {
            out.push("no suspicious threat state where abstain is optimal");
        }
        out
    }
}

/// Searches the high-resolution compressed states for act, verify and
/// abstain witnesses. Among several candidates the one with the largest
/// margin over the runner-up action is reported.
pub fn non_dominance(
    env: &EnvConfig<f64>,
    util: &UtilityConfig<f64>,
    thresholds: &SupportThresholds<f64>,
    agent: &AgentModel<f64>,
    settings: &OracleSettings,
) -> Result<NonDominanceReport, OracleError> {
    let oracle = CompressedOracle::estimate(env, util, thresholds, agent, settings)?;
    Ok(non_dominance_from(&oracle.policy(Resolution::High)))
}

pub fn non_dominance_from(policy: &CompressedPolicy) -> NonDominanceReport {
    let margin = |v: &[f64; 3], a: Action| {
        let others = Action::ALL
            .iter()
            .filter(|&&b| b != a)
            .map(|b| v[b.index()])
            .fold(f64::NEG_INFINITY, f64::max);
        v[a.index()] - others
    };
    let pick = |want: Action, filter: &dyn Fn(&PolicyState) -> bool| {
        policy
            .states
            .iter()
            .filter(|s| s.best == Some(want) && filter(&s.state))
            .map(|s| Witness {
                state: s.state,
                values: s.values.map(|e| e.value),
            })
            .max_by(|a, b| {
                margin(&a.values, want)
                    .partial_cmp(&margin(&b.values, want))
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    };
    NonDominanceReport {
        act: pick(Action::Act, &|s| s.code == 0),
        verify: pick(Action::Verify, &|s| s.code != 0),
        abstain: pick(Action::Abstain, &|s| {
            s.code != 0 && s.z == ConsequenceRegime::Threat
        }),
        states: policy.states.clone(),
    }
}

/// Everything the `oracle` subcommand reports.
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub total_samples: u64,
    pub code_counts: [u64; 8],
    pub policies: [CompressedPolicy; 3],
    pub control_loss: ControlLossReport,
    pub objective: [ObjectiveTerms; 3],
    pub best_resolution: Resolution,
    pub non_dominance: NonDominanceReport,
}

/// Builds the full oracle report with the configured settings.
pub fn oracle_report(
    env: &EnvConfig<f64>,
    util: &UtilityConfig<f64>,
    thresholds: &SupportThresholds<f64>,
    agent: &AgentModel<f64>,
    settings: &OracleSettings,
) -> Result<OracleReport, OracleError> {
    let oracle = CompressedOracle::estimate(env, util, thresholds, agent, settings)?;
    let policies = oracle.policies();
    let control_loss = oracle.control_loss(settings.control_loss_samples);
    let (objective, best) = best_resolution(
        &control_loss,
        &policies,
        settings.lambda_res,
        settings.lambda_frag,
        FragModel {
            trial_budget: settings.trial_budget,
        },
    );
    let non_dominance = non_dominance_from(&policies[2]);
    Ok(OracleReport {
        total_samples: oracle.total_samples(),
        code_counts: oracle.code_counts(),
        policies,
        control_loss,
        objective,
        best_resolution: best,
        non_dominance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn defaults() -> (EnvConfig<f64>, UtilityConfig<f64>) {
        (EnvConfig::default(), UtilityConfig::default())
    }

    #[test]
    fn overwhelming_evidence_acts_in_routine() {
        let (env, util) = defaults();
        let d = optimal_action_full(&env, &util, ConsequenceRegime::Routine, 1.4, 1.4, false).unwrap();
        assert_eq!(d.action, Action::Act);
    }

    #[test]
    fn even_odds_under_threat_never_acts() {
        let (env, util) = defaults();
        // y = 0.5 on both channels gives p = 0.5 exactly.
        let d = optimal_action_full(&env, &util, ConsequenceRegime::Threat, 0.5, 0.5, true).unwrap();
        // A tie commits content 1, so the error case is a false positive.
        assert_abs_diff_eq!(d.values[0], 0.5 * 1.0 + 0.5 * util.pen_fp_threat, epsilon = 1e-12);
        assert!(d.values[0] < d.values[1] && d.values[0] < d.values[2]);
        assert_ne!(d.action, Action::Act);
    }

    #[test]
    fn free_perfect_verification_dominates_act() {
        let (mut env, mut util) = defaults();
        env.sigma_c = 1e-6;
        util.cost_verify = -1e-9;
        for &(ya, yb) in &[(0.9, 0.8), (0.2, 0.6), (1.5, -0.2), (0.5, 0.5)] {
            let d = optimal_action_full(&env, &util, ConsequenceRegime::Routine, ya, yb, false).unwrap();
            assert!(d.values[1] >= d.values[0] - 1e-6, "{d:?}");
            assert_abs_diff_eq!(d.values[1], 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn rejects_non_finite_readings() {
        let (env, util) = defaults();
        assert!(optimal_action_full(&env, &util, ConsequenceRegime::Routine, f64::NAN, 0.0, false).is_err());
    }

    #[test]
    fn cue_only_posterior_lies_between_conditions() {
        let (env, _) = defaults();
        let good = exact_log_odds(&env, 0.9, 1.2, false);
        let bad = exact_log_odds(&env, 0.9, 1.2, true);
        for cue in [false, true] {
            let mix = cue_only_log_odds(&env, 0.9, 1.2, cue);
            assert!(mix <= good.max(bad) && mix >= good.min(bad), "{mix} {good} {bad}");
        }
    }

    #[test]
    fn frag_cost_and_objective_terms() {
        let frag = FragModel { trial_budget: 50_000 };
        assert_abs_diff_eq!(frag.cost(16), 256.0 / 50_000.0, epsilon = 1e-15);
        let t = resolution_objective(0.5, Resolution::High, 16, 0.05, 1.0, frag);
        assert_abs_diff_eq!(t.value, 0.5 - 0.1 - 256.0 / 50_000.0, epsilon = 1e-12);
    }
}
