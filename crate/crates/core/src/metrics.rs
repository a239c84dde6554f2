//! Outcome measures computed from trial logs.

use serde::Serialize;
use thiserror::Error;

use crate::env::ConsequenceRegime;
use crate::memory::Action;
use crate::runner::TrialRecord;
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("empty input")]
    Empty,
    #[error("confidences and outcomes differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("bin count must be positive")]
    NoBins,
}

/// Expected calibration error with equal-width bins on `[0.5, 1]`.
///
/// Confidences outside the range are clamped into the edge bins.
pub fn ece<F: Real>(confidences: &[F], correct: &[bool], bins: usize) -> Result<F, MetricsError> {
    if confidences.len() != correct.len() {
        return Err(MetricsError::LengthMismatch(confidences.len(), correct.len()));
    }
    if confidences.is_empty() {
        return Err(MetricsError::Empty);
    }
    if bins == 0 {
        return Err(MetricsError::NoBins);
    }
    let mut conf_sum = vec![F::zero(); bins];
    let mut hits = vec![0usize; bins];
    let mut counts = vec![0usize; bins];
    let width = F::half() / F::from_count(bins);
    for (&c, &ok) in confidences.iter().zip(correct) {
        let raw = ((c - F::half()) / width).floor().to_i64().unwrap_or(0);
        let b = raw.clamp(0, bins as i64 - 1) as usize;
        conf_sum[b] = conf_sum[b] + c;
        hits[b] += ok as usize;
        counts[b] += 1;
    }
    let n = F::from_count(confidences.len());
    let mut total = F::zero();
    for b in 0..bins {
        if counts[b] == 0 {
            continue;
        }
        let nb = F::from_count(counts[b]);
        let acc = F::from_count(hits[b]) / nb;
        let conf = conf_sum[b] / nb;
        total = total + nb / n * (acc - conf).abs();
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftKind {
    Consequence,
    Support,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftParams<F> {
    pub window: usize,
    /// Half-width of the recovery band around the pre-shift mean.
    pub recovery_delta: F,
    /// Length of the trailing moving average used to detect recovery.
    pub moving_average: usize,
}

impl<F: Real> Default for ShiftParams<F> {
    fn default() -> Self {
        Self {
            window: 50,
            recovery_delta: F::lit(0.1),
            moving_average: 20,
        }
    }
}

/// Shift-aligned curves over offsets `-window..=window`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftCurves<F> {
    pub kind: ShiftKind,
    pub n_shifts: usize,
    pub offsets: Vec<i64>,
    pub mean_utility: Vec<F>,
    /// Commitment accuracy per offset; `None` where no trial committed.
    pub mean_accuracy: Vec<Option<F>>,
    pub pre_shift_mean: F,
    /// Pre-shift mean minus the mean over offsets `0..=window`.
    pub dip: F,
    /// Offsets until the trailing moving average re-enters the recovery band;
    /// `None` if it never does inside the window.
    pub recovery_time: Option<usize>,
}

fn is_shift<F>(prev: &TrialRecord<F>, cur: &TrialRecord<F>, kind: ShiftKind) -> bool {
    match kind {
        ShiftKind::Consequence => prev.z != cur.z,
        ShiftKind::Support => prev.r != cur.r,
    }
}

/// Averages utility and accuracy around every shift of `kind` whose full
/// window lies inside the log. Returns `None` when there is no such shift.
pub fn shift_alignment<F: Real>(
    trials: &[TrialRecord<F>],
    kind: ShiftKind,
    params: &ShiftParams<F>,
) -> Option<ShiftCurves<F>> {
    let w = params.window;
    let onsets: Vec<usize> = (1..trials.len())
        .filter(|&i| is_shift(&trials[i - 1], &trials[i], kind))
        .filter(|&i| i >= w && i + w < trials.len())
        .collect();
    if onsets.is_empty() {
        return None;
    }
    let span = 2 * w + 1;
    let mut util_sum = vec![F::zero(); span];
    let mut hits = vec![0usize; span];
    let mut commits = vec![0usize; span];
    for &i in &onsets {
        for k in 0..span {
            let rec = &trials[i + k - w];
            util_sum[k] = util_sum[k] + rec.utility.total;
            if let Some(ok) = rec.correct {
                commits[k] += 1;
                hits[k] += ok as usize;
            }
        }
    }
    let n = F::from_count(onsets.len());
    let mean_utility: Vec<F> = util_sum.iter().map(|&s| s / n).collect();
    let mean_accuracy = hits
        .iter()
        .zip(&commits)
        .map(|(&h, &c)| (c > 0).then(|| F::from_count(h) / F::from_count(c)))
        .collect();

    let mean = |xs: &[F]| {
        if xs.is_empty() {
            None
        } else {
            Some(xs.iter().fold(F::zero(), |a, &b| a + b) / F::from_count(xs.len()))
        }
    };
    let pre_shift_mean = mean(&mean_utility[..w]).unwrap_or(mean_utility[w]);
    let post_mean = mean(&mean_utility[w..]).expect("non-empty post window");
    let ma = params.moving_average.max(1);
    let recovery_time = (w..span).find_map(|k| {
        let lo = (k + 1).saturating_sub(ma);
        let avg = mean(&mean_utility[lo..=k]).expect("non-empty");
        ((avg - pre_shift_mean).abs() <= params.recovery_delta).then_some(k - w)
    });
    Some(ShiftCurves {
        kind,
        n_shifts: onsets.len(),
        offsets: (0..span).map(|k| k as i64 - w as i64).collect(),
        mean_utility,
        mean_accuracy,
        pre_shift_mean,
        dip: pre_shift_mean - post_mean,
        recovery_time,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Adaptation<F> {
    pub consequence: Option<ShiftCurves<F>>,
    pub support: Option<ShiftCurves<F>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary<F> {
    pub trials: usize,
    pub commits: usize,
    pub cumulative_utility: F,
    /// `None` when nothing was committed.
    pub commitment_accuracy: Option<F>,
    pub ece: Option<F>,
    pub verif_rate_routine: Option<F>,
    pub verif_rate_threat: Option<F>,
    pub abstain_rate_routine: Option<F>,
    pub abstain_rate_threat: Option<F>,
    pub mean_rho: F,
    pub resolution_cost: F,
    /// Utility per unit of resolution cost plus one.
    pub support_efficiency: F,
    pub adaptation: Adaptation<F>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryParams<F> {
    pub ece_bins: usize,
    pub shift: ShiftParams<F>,
}

impl<F: Real> Default for SummaryParams<F> {
    fn default() -> Self {
        Self {
            ece_bins: 10,
            shift: ShiftParams::default(),
        }
    }
}

pub fn summarize<F: Real>(
    trials: &[TrialRecord<F>],
    params: &SummaryParams<F>,
) -> Result<RunSummary<F>, MetricsError> {
    if trials.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut cumulative = F::zero();
    let mut resolution_cost = F::zero();
    let mut rho_sum = 0u64;
    let mut confidences = Vec::new();
    let mut outcomes = Vec::new();
    // [routine, threat] x [trials, verifies, abstains]
    let mut by_regime = [[0usize; 3]; 2];
    for rec in trials {
        cumulative = cumulative + rec.utility.total;
        resolution_cost = resolution_cost + rec.utility.resolution.abs();
        rho_sum += rec.rho.level() as u64;
        let row = &mut by_regime[rec.z.index()];
        row[0] += 1;
        match rec.action {
            Action::Verify => row[1] += 1,
            Action::Abstain => row[2] += 1,
            Action::Act => {}
        }
        if let (Some(ok), Some(conf)) = (rec.correct, rec.confidence) {
            outcomes.push(ok);
            confidences.push(conf);
        }
    }
    let rate = |z: ConsequenceRegime, col: usize| {
        let row = by_regime[z.index()];
        (row[0] > 0).then(|| F::from_count(row[col]) / F::from_count(row[0]))
    };
    let commits = outcomes.len();
    let commitment_accuracy = (commits > 0).then(|| {
        F::from_count(outcomes.iter().filter(|&&ok| ok).count()) / F::from_count(commits)
    });
    let ece = if commits > 0 {
        Some(ece(&confidences, &outcomes, params.ece_bins)?)
    } else {
        None
    };
    Ok(RunSummary {
        trials: trials.len(),
        commits,
        cumulative_utility: cumulative,
        commitment_accuracy,
        ece,
        verif_rate_routine: rate(ConsequenceRegime::Routine, 1),
        verif_rate_threat: rate(ConsequenceRegime::Threat, 1),
        abstain_rate_routine: rate(ConsequenceRegime::Routine, 2),
        abstain_rate_threat: rate(ConsequenceRegime::Threat, 2),
        mean_rho: F::from_u64(rho_sum).unwrap() / F::from_count(trials.len()),
        resolution_cost,
        support_efficiency: cumulative / (F::one() + resolution_cost),
        adaptation: Adaptation {
            consequence: shift_alignment(trials, ShiftKind::Consequence, &params.shift),
            support: shift_alignment(trials, ShiftKind::Support, &params.shift),
        },
    })
}
