//! Command-line front end: experiments, oracle reports, the non-dominance
//! sanity check and memory dumps.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use support_arbitration::controllers::ControllerName;
use support_arbitration::oracle::oracle_report;
use support_arbitration::runner::{
    run_experiment, run_single, write_memory_dump, write_reports, write_trace, RunConfig,
};
use support_arbitration::utility::check_non_dominance;

#[derive(Parser)]
#[command(name = "arbitrate", version, about = "Support-resolution arbitration simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file, or `default` for the shipped configuration.
    #[arg(long, default_value = "default")]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run the controller comparison and write table1/fig2/fig3/summary.
    Run {
        #[command(flatten)]
        common: Common,
        /// Restrict to one or more controllers (repeatable).
        #[arg(long)]
        controller: Vec<String>,
        /// Seeds as a comma list (`0,1,2`) or a half-open range (`0..10`).
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        burnin: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write per-trial logs, one CSV per (controller, seed).
        #[arg(long)]
        trace: bool,
        /// Also write the final memory table of every run.
        #[arg(long)]
        dump_memory: bool,
    },
    /// Compressed-optimal policies, control loss per resolution and the
    /// resolution objective, as JSON.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the per-state sample target.
        #[arg(long)]
        samples_per_state: Option<u64>,
        /// Override the control-loss sample count.
        #[arg(long)]
        control_loss_samples: Option<u64>,
    },
    /// Check that act, verify and abstain are each optimal somewhere.
    Sanity {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples_per_state: Option<u64>,
    },
    /// Run one controller under one seed and write its memory table as CSV.
    DumpMemory {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        controller: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value = "memory.csv")]
        out: PathBuf,
    },
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = spec.split_once("..") {
        let a: u64 = a.trim().parse().context("bad seed range start")?;
        let b: u64 = b.trim().parse().context("bad seed range end")?;
        if b <= a {
            bail!("empty seed range {spec}");
        }
        return Ok((a..b).collect());
    }
    spec.split(',')
        .map(|s| s.trim().parse::<u64>().with_context(|| format!("bad seed `{s}`")))
        .collect()
}

fn load(common: &Common) -> Result<RunConfig> {
    RunConfig::load(&common.config).with_context(|| format!("loading {}", common.config.display()))
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            common,
            controller,
            seeds,
            trials,
            burnin,
            out,
            trace,
            dump_memory,
        } => {
            let mut cfg = load(&common)?;
            if !controller.is_empty() {
                cfg.experiment.controllers = controller
                    .iter()
                    .map(|c| c.parse::<ControllerName>())
                    .collect::<Result<_, _>>()?;
            }
            if let Some(s) = seeds {
                cfg.experiment.seeds = parse_seeds(&s)?;
            }
            if let Some(t) = trials {
                cfg.experiment.trials = t;
            }
            if let Some(b) = burnin {
                cfg.experiment.burnin = b;
            }
            cfg.validate()?;
            let start = Instant::now();
            let result = run_experiment(&cfg)?;
            let files = write_reports(&out, &result)?;
            if trace || dump_memory {
                for &c in &cfg.experiment.controllers {
                    for &seed in &cfg.experiment.seeds {
                        let run = run_single(&cfg, c, seed)?;
                        if trace {
                            write_trace(&out.join(format!("trace_{c}_{seed}.csv")), &run.records)?;
                        }
                        if dump_memory {
                            write_memory_dump(&out.join(format!("memory_{c}_{seed}.csv")), &run.memory)?;
                        }
                    }
                }
            }
            println!(
                "{:<16} {:>12} {:>10} {:>8} {:>8} {:>8} {:>8} {:>8} {:>6}",
                "controller", "utility", "sd", "acc", "ece", "v_rout", "v_thr", "ab_thr", "rho"
            );
            let f = |m: Option<support_arbitration::runner::MeanSd>| m.map_or(f64::NAN, |m| m.mean);
            for a in &result.aggregates {
                println!(
                    "{:<16} {:>12.1} {:>10.1} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>6.2}",
                    a.controller.as_str(),
                    f(a.cumulative_utility),
                    a.cumulative_utility.map_or(f64::NAN, |m| m.sd),
                    f(a.commitment_accuracy),
                    f(a.ece),
                    f(a.verif_rate_routine),
                    f(a.verif_rate_threat),
                    f(a.abstain_rate_threat),
                    f(a.mean_rho),
                );
            }
            eprintln!(
                "wrote {}, {}, {}, {} in {:.1}s",
                files.table1.display(),
                files.fig2.display(),
                files.fig3.display(),
                files.summary.display(),
                start.elapsed().as_secs_f64()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle {
            common,
            out,
            samples_per_state,
            control_loss_samples,
        } => {
            let mut cfg = load(&common)?;
            if let Some(n) = samples_per_state {
                cfg.oracle.min_samples_per_state = n;
            }
            if let Some(n) = control_loss_samples {
                cfg.oracle.control_loss_samples = n;
            }
            cfg.validate()?;
            let report = oracle_report(&cfg.env, &cfg.utility, &cfg.support, &cfg.agent, &cfg.oracle)?;
            let json = serde_json::to_string_pretty(&report)?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                let path = dir.join("oracle.json");
                std::fs::write(&path, format!("{json}\n")).with_context(|| format!("writing {}", path.display()))?;
                eprintln!("wrote {}", path.display());
            }
            println!("{json}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Sanity {
            common,
            samples_per_state,
        } => {
            let mut cfg = load(&common)?;
            if let Some(n) = samples_per_state {
                cfg.oracle.min_samples_per_state = n;
            }
            cfg.env.validate()?;
            let report = check_non_dominance(&cfg.utility, &cfg.env, &cfg.support, &cfg.agent, &cfg.oracle)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if report.passed() {
                eprintln!("non-dominance check passed");
                Ok(ExitCode::SUCCESS)
            } else {
                for f in report.failures() {
                    eprintln!("non-dominance check failed: {f}");
                }
                Ok(ExitCode::FAILURE)
            }
        }
        Command::DumpMemory {
            common,
            controller,
            seed,
            trials,
            out,
        } => {
            let mut cfg = load(&common)?;
            if let Some(t) = trials {
                cfg.experiment.trials = t;
            }
            cfg.validate()?;
            let c: ControllerName = controller.parse()?;
            let run = run_single(&cfg, c, seed)?;
            write_memory_dump(&out, &run.memory)?;
            eprintln!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
