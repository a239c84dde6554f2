use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::controllers::ControllerName;
use crate::env::ConsequenceRegime;
use crate::memory::ArbitrationMemory;
use crate::metrics::RunSummary;
use crate::scalar::Real;

use super::{ControllerAggregate, ExperimentResult, RunError, TrialRecord};

#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub table1: PathBuf,
    pub fig2: PathBuf,
    pub fig3: PathBuf,
    pub summary: PathBuf,
}

#[derive(Serialize)]
struct Table1Row<F> {
    controller: ControllerName,
    seed: u64,
    cumulative_utility: F,
    commitment_accuracy: Option<F>,
    ece: Option<F>,
    verif_routine: Option<F>,
    verif_threat: Option<F>,
    abstain_routine: Option<F>,
    abstain_threat: Option<F>,
    mean_rho: F,
    support_efficiency: F,
}

#[derive(Serialize)]
struct Fig2Row {
    controller: ControllerName,
    mean: f64,
    sd: f64,
}

#[derive(Serialize)]
struct Fig3Row {
    controller: ControllerName,
    regime: ConsequenceRegime,
    verification_rate: Option<f64>,
}

#[derive(Serialize)]
struct SeedEntry<'a, F> {
    seed: u64,
    summary: &'a RunSummary<F>,
}

#[derive(Serialize)]
struct ControllerEntry<'a, F> {
    controller: ControllerName,
    aggregate: &'a ControllerAggregate,
    seeds: Vec<SeedEntry<'a, F>>,
}

#[derive(Serialize)]
struct SummaryFile<'a, F> {
    controllers: Vec<ControllerEntry<'a, F>>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> RunError + '_ {
    move |e| RunError::Output {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes `table1.csv`, `fig2.csv`, `fig3.csv` and `summary.json` into `dir`.
pub fn write_reports<F: Real>(dir: &Path, result: &ExperimentResult<F>) -> Result<ReportFiles, RunError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let files = ReportFiles {
        table1: dir.join("table1.csv"),
        fig2: dir.join("fig2.csv"),
        fig3: dir.join("fig3.csv"),
        summary: dir.join("summary.json"),
    };

    write_csv(
        &files.table1,
        result.runs.iter().map(|r| {
            let s = &r.summary;
            Table1Row {
                controller: r.controller,
                seed: r.seed,
                cumulative_utility: s.cumulative_utility,
                commitment_accuracy: s.commitment_accuracy,
                ece: s.ece,
                verif_routine: s.verif_rate_routine,
                verif_threat: s.verif_rate_threat,
                abstain_routine: s.abstain_rate_routine,
                abstain_threat: s.abstain_rate_threat,
                mean_rho: s.mean_rho,
                support_efficiency: s.support_efficiency,
            }
        }),
    )?;

    write_csv(
        &files.fig2,
        result.aggregates.iter().filter_map(|a| {
            a.cumulative_utility.map(|m| Fig2Row {
                controller: a.controller,
                mean: m.mean,
                sd: m.sd,
            })
        }),
    )?;

    write_csv(
        &files.fig3,
        result.aggregates.iter().flat_map(|a| {
            ConsequenceRegime::ALL.into_iter().map(move |z| Fig3Row {
                controller: a.controller,
                regime: z,
                verification_rate: match z {
                    ConsequenceRegime::Routine => a.verif_rate_routine,
                    ConsequenceRegime::Threat => a.verif_rate_threat,
                }
                .map(|m| m.mean),
            })
        }),
    )?;

    let summary = SummaryFile {
        controllers: result
            .aggregates
            .iter()
            .map(|agg| ControllerEntry {
                controller: agg.controller,
                aggregate: agg,
                seeds: result
                    .seeds_of(agg.controller)
                    .into_iter()
                    .map(|r| SeedEntry {
                        seed: r.seed,
                        summary: &r.summary,
                    })
                    .collect(),
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| RunError::Output {
        path: files.summary.clone(),
        message: e.to_string(),
    })?;
    fs::write(&files.summary, json + "\n").map_err(io_err(&files.summary))?;
    Ok(files)
}

#[derive(Serialize)]
struct TraceRow<F> {
    t: usize,
    z: ConsequenceRegime,
    r: crate::env::SupportRegime,
    x_true: u8,
    b_degraded: u8,
    quality_cue: u8,
    rho: u8,
    code: u8,
    action: crate::memory::Action,
    committed: Option<u8>,
    correct: Option<u8>,
    confidence: Option<F>,
    utility_payoff: F,
    utility_verification: F,
    utility_resolution: F,
    utility_total: F,
}

/// Per-trial log as CSV.
pub fn write_trace<F: Real>(path: &Path, records: &[TrialRecord<F>]) -> Result<(), RunError> {
    write_csv(
        path,
        records.iter().map(|r| TraceRow {
            t: r.t,
            z: r.z,
            r: r.r,
            x_true: r.x_true as u8,
            b_degraded: r.b_degraded as u8,
            quality_cue: r.quality_cue as u8,
            rho: r.rho.level(),
            code: r.code,
            action: r.action,
            committed: r.committed.map(u8::from),
            correct: r.correct.map(u8::from),
            confidence: r.confidence,
            utility_payoff: r.utility.payoff,
            utility_verification: r.utility.verification,
            utility_resolution: r.utility.resolution,
            utility_total: r.utility.total,
        }),
    )
}

/// Memory table as CSV: `z, rho, code, action, q, visits`.
pub fn write_memory_dump<F: Real>(path: &Path, memory: &ArbitrationMemory<F>) -> Result<(), RunError> {
    write_csv(path, memory.rows())
}
