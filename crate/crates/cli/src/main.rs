//! `dossim`: run attack/estimation/control scenarios, verify candidate
//! bounds against a sequence, and compute reliability deadlines.
//!
//! Exit codes: 0 success, 1 validation error (bad arguments, unreadable or
//! invalid scenario), 2 runtime failure.

use dossim_cli::{corpus, emit, runner, scenario};

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde::Serialize;

use dossim_core::dos_model::DosSequence;
use dossim_core::estimator::{reliability_deadline, DeadlineInput, ReliabilityDeadline};

use runner::{run_scenario, RunSummary, VariantOutcome};
use scenario::{parse_scenario, OutputKind, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "dossim",
    version,
    about = "DoS bound estimation and security-control simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Emit machine-readable JSON on stdout instead of human-readable text.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario file and write the configured outputs.
    Run {
        file: PathBuf,
        /// Output directory for CSV and summary files.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Check whether candidate duration/frequency bounds hold for the
    /// sequence of a scenario file.
    Verify {
        file: PathBuf,
        /// Candidate duration bound in [0, 1].
        #[arg(long)]
        bd: f64,
        /// Candidate frequency bound (launches per second).
        #[arg(long)]
        bf: f64,
    },
    /// Built-in scenario corpus.
    Corpus {
        #[command(subcommand)]
        action: CorpusAction,
    },
    /// Compute the reliability deadline from declared lower envelopes.
    Deadline {
        file: PathBuf,
        /// Lower duration rate (at most the sharp rate of the sequence).
        #[arg(long)]
        bd: f64,
        /// Offset of the lower duration envelope.
        #[arg(long)]
        kappa: f64,
        /// Lower frequency rate (at most the sharp rate of the sequence).
        #[arg(long)]
        bf: f64,
        /// Offset of the lower frequency envelope.
        #[arg(long)]
        lambda: f64,
    },
}

#[derive(Subcommand)]
enum CorpusAction {
    /// List the built-in scenarios.
    List,
    /// Run a built-in scenario, or every scenario sharing a name prefix.
    Run {
        name: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn validation(e: impl std::fmt::Display) -> Self {
        CliError::Validation(e.to_string())
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { file, out } => {
            let cfg = load_scenario(&file)?;
            let summaries = execute_and_write(&cfg, &out, cli.json)?;
            emit_summaries(&summaries, cli.json);
            Ok(())
        }
        Command::Verify { file, bd, bf } => cmd_verify(&file, bd, bf, cli.json),
        Command::Corpus { action } => match action {
            CorpusAction::List => {
                for (name, _) in corpus::CORPUS {
                    println!("{name}");
                }
                Ok(())
            }
            CorpusAction::Run { name, out } => {
                let hits = corpus::find(&name);
                if hits.is_empty() {
                    return Err(CliError::Validation(format!(
                        "unknown corpus scenario `{name}`; try `corpus list`"
                    )));
                }
                let mut summaries = Vec::new();
                for (entry_name, text) in hits {
                    let cfg = parse_scenario(text)
                        .map_err(|e| CliError::validation(format!("{entry_name}: {e}")))?;
                    summaries.extend(execute_and_write(&cfg, &out, cli.json)?);
                }
                emit_summaries(&summaries, cli.json);
                Ok(())
            }
        },
        Command::Deadline {
            file,
            bd,
            kappa,
            bf,
            lambda,
        } => cmd_deadline(&file, bd, kappa, bf, lambda, cli.json),
    }
}

fn load_scenario(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

fn execute_and_write(
    cfg: &ScenarioConfig,
    out_dir: &Path,
    quiet: bool,
) -> Result<Vec<RunSummary>, CliError> {
    let outcomes = run_scenario(cfg).map_err(CliError::runtime)?;
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", out_dir.display())))?;

    let mut summaries = Vec::new();
    for outcome in &outcomes {
        write_outputs(cfg, outcome, out_dir, quiet)?;
        summaries.push(outcome.summary.clone());
    }
    if cfg.outputs.contains(&OutputKind::Summary) {
        let path = out_dir.join(format!("{}_summary.json", cfg.name));
        let json = serde_json::to_string_pretty(&summaries)
            .map_err(|e| CliError::runtime(format!("summary serialization: {e}")))?;
        fs::write(&path, json + "\n")
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
        note_written(&path, quiet);
    }
    Ok(summaries)
}

fn write_outputs(
    cfg: &ScenarioConfig,
    outcome: &VariantOutcome,
    out_dir: &Path,
    quiet: bool,
) -> Result<(), CliError> {
    let base = if outcome.label.is_empty() {
        cfg.name.clone()
    } else {
        format!("{}_{}", cfg.name, outcome.label)
    };
    let write = |path: &Path, bytes: Vec<u8>| -> Result<(), CliError> {
        fs::write(path, bytes)
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
        note_written(path, quiet);
        Ok(())
    };
    for kind in &cfg.outputs {
        match kind {
            OutputKind::Estimates => {
                let mut buf = Vec::new();
                emit::write_estimates_csv(&outcome.estimator_rows, &mut buf)
                    .map_err(CliError::runtime)?;
                write(&out_dir.join(format!("{base}_estimates.csv")), buf)?;
            }
            OutputKind::Plotdata => {
                let mut buf = Vec::new();
                emit::write_plotdata_csv(&outcome.estimator_rows, &mut buf)
                    .map_err(CliError::runtime)?;
                write(&out_dir.join(format!("{base}_plotdata.csv")), buf)?;
            }
            OutputKind::Trace => {
                let mut buf = Vec::new();
                if let Some(trace) = &outcome.consensus {
                    emit::write_consensus_csv(trace, &mut buf).map_err(CliError::runtime)?;
                } else if let Some(trace) = &outcome.impulsive {
                    emit::write_impulsive_csv(trace, &mut buf).map_err(CliError::runtime)?;
                } else {
                    continue; // rejected at parse time; defensive
                }
                write(&out_dir.join(format!("{base}_trace.csv")), buf)?;
            }
            OutputKind::Summary => {} // one summary file per scenario, written by the caller
        }
    }
    Ok(())
}

fn note_written(path: &Path, quiet: bool) {
    if !quiet {
        println!("wrote {}", path.display());
    }
}

fn emit_summaries(summaries: &[RunSummary], json: bool) {
    if json {
        println!(
            "{}",
            serde_json::to_string(summaries).expect("summaries serialize")
        );
        return;
    }
    for s in summaries {
        let variant = if s.variant.is_empty() {
            String::new()
        } else {
            format!(" [{}]", s.variant)
        };
        let reliability = match s.reliability_time {
            Some(t) => format!("{t}"),
            None => "not reached".to_string(),
        };
        let mut line = format!(
            "{}{variant}: reliability = {reliability}, final estimates = ({}, {})",
            s.scenario, s.final_bd_hat, s.final_bf_hat
        );
        if let Some(t) = s.settling_time {
            line.push_str(&format!(", settling = {t}"));
        }
        if let Some(p) = s.peak_state_norm {
            line.push_str(&format!(", peak = {p}"));
        }
        println!("{line}");
    }
}

#[derive(Serialize)]
struct VerdictOut {
    value: f64,
    holds: bool,
    witnessed_offset: f64,
    worst_time: f64,
    conclusive: bool,
}

fn cmd_verify(file: &Path, bd: f64, bf: f64, json: bool) -> Result<(), CliError> {
    let cfg = load_scenario(file)?;
    let seq: DosSequence = cfg.sequence.build().map_err(CliError::validation)?;
    let duration = seq
        .verify_duration_bound(bd, cfg.horizon)
        .map_err(CliError::validation)?;
    let frequency = seq
        .verify_frequency_bound(bf, cfg.horizon)
        .map_err(CliError::validation)?;
    if json {
        #[derive(Serialize)]
        struct Report {
            scenario: String,
            duration: VerdictOut,
            frequency: VerdictOut,
        }
        let report = Report {
            scenario: cfg.name,
            duration: VerdictOut {
                value: bd,
                holds: duration.holds,
                witnessed_offset: duration.witnessed_offset,
                worst_time: duration.worst_time,
                conclusive: duration.conclusive,
            },
            frequency: VerdictOut {
                value: bf,
                holds: frequency.holds,
                witnessed_offset: frequency.witnessed_offset,
                worst_time: frequency.worst_time,
                conclusive: frequency.conclusive,
            },
        };
        println!(
            "{}",
            serde_json::to_string(&report).expect("report serializes")
        );
    } else {
        let describe = |label: &str, value: f64, v: &dossim_core::dos_model::BoundVerdict| {
            println!(
                "{label} bound {value}: holds = {}{}, witnessed offset = {}, worst defect at t = {}",
                v.holds,
                if v.conclusive { "" } else { " (horizon-limited)" },
                v.witnessed_offset,
                v.worst_time
            );
        };
        describe("duration", bd, &duration);
        describe("frequency", bf, &frequency);
    }
    Ok(())
}

fn cmd_deadline(
    file: &Path,
    bd: f64,
    kappa: f64,
    bf: f64,
    lambda: f64,
    json: bool,
) -> Result<(), CliError> {
    let cfg = load_scenario(file)?;
    let seq = cfg.sequence.build().map_err(CliError::validation)?;
    let (inf_duration, inf_frequency) = match &seq {
        DosSequence::Finite(_) => (0.0, 0.0),
        DosSequence::EventuallyPeriodic(p) => (p.duty(), p.launch_rate()),
        DosSequence::Generator(_) => {
            return Err(CliError::Validation(
                "deadline requires a finite or eventually-periodic sequence".into(),
            ))
        }
    };
    let input = DeadlineInput {
        theta: cfg.estimator.theta,
        b_d: bd,
        kappa,
        b_f: bf,
        lambda,
        inf_duration,
        inf_frequency,
    };
    let result = reliability_deadline(&input, &seq).map_err(CliError::validation)?;
    if json {
        #[derive(Serialize)]
        struct Report {
            scenario: String,
            immediate: bool,
            index: Option<u64>,
            deadline: Option<f64>,
        }
        let report = match result {
            ReliabilityDeadline::Immediate => Report {
                scenario: cfg.name,
                immediate: true,
                index: None,
                deadline: None,
            },
            ReliabilityDeadline::AtEvent { index, deadline } => Report {
                scenario: cfg.name,
                immediate: false,
                index: Some(index),
                deadline: Some(deadline),
            },
        };
        println!(
            "{}",
            serde_json::to_string(&report).expect("report serializes")
        );
    } else {
        match result {
            ReliabilityDeadline::Immediate => println!("reliable immediately (t = 0)"),
            ReliabilityDeadline::AtEvent { index, deadline } => {
                println!(
                    "reliable no later than the completion of attack {index}, at t = {deadline}"
                )
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_well_formed() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
