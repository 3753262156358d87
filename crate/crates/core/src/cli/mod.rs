//! The `rcsim` command line: single runs, seeded sweeps, sequence
//! validation and scenario export.
//!
//! Exit codes: 0 when every checked property holds, 1 when one fails,
//! 2 for usage, parse or I/O errors.

mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

pub use config::{
    execute, random_binary_inputs, read_sequence, write_atomically, AlgorithmChoice, Inputs,
    InputsKind, RunPlan, RunReport, ScenarioConfig, SequenceSource,
};

use crate::adversary::{
    compound_sequence, membership_report, scenario, DottedPhase, ScenarioName, ScenarioParams,
};
use crate::algorithms::{DecisionTiming, DecisionWindow, PruneWitness, RootChange};
use crate::error::{invalid, Error, Result};
use crate::graph::Round;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "rcsim",
    version,
    about = "Consensus under eventually stabilizing message adversaries"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Execute and verify one run.
    Run(RunArgs),
    /// Execute many seeded runs in parallel and summarize them.
    Sweep(SweepArgs),
    /// Report adversary-class membership of a sequence file.
    Validate(ValidateArgs),
    /// Write one of the fixed scenario sequences.
    Scenario(ScenarioArgs),
}

/// Run parameters; each overrides the matching field of `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub algorithm: Option<AlgorithmChoice>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Known upper bound N on the number of processes.
    #[arg(long)]
    pub bound: Option<u32>,
    /// Dynamic diameter D.
    #[arg(long)]
    pub diameter: Option<u32>,
    /// Length of the stable window.
    #[arg(long)]
    pub x: Option<u32>,
    /// Comma-separated initial values, or `random-binary`.
    #[arg(long)]
    pub inputs: Option<String>,
    /// Run on a sequence file instead of generating one.
    #[arg(long)]
    pub sequence: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub horizon: Option<Round>,
    /// Round by which every process must have decided.
    #[arg(long)]
    pub deadline: Option<Round>,
    #[arg(long, value_enum)]
    pub sprime_window: Option<DecisionWindow>,
    #[arg(long, value_enum)]
    pub prune: Option<PruneWitness>,
    /// Evaluate the decision rule only at its exact round, or from then on.
    #[arg(long, value_enum)]
    pub decision_timing: Option<DecisionTiming>,
    /// Whether unknown root estimates count as a root change.
    #[arg(long, value_enum)]
    pub root_change: Option<RootChange>,
    /// Keep only the history the algorithm can reach.
    #[arg(long)]
    pub truncate: bool,
    #[arg(long)]
    pub out_trace: Option<PathBuf>,
    #[arg(long)]
    pub out_verdict: Option<PathBuf>,
    /// Also write the executed graph sequence.
    #[arg(long)]
    pub out_sequence: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub trials: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub diameter: u32,
    #[arg(long)]
    pub x: u32,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    #[arg(value_parser = parse_scenario_name)]
    pub name: ScenarioName,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub diameter: u32,
    #[arg(long)]
    pub tau: Option<Round>,
    #[arg(long)]
    pub horizon: Option<Round>,
    #[arg(long, value_enum, default_value_t = DottedPhase::Present)]
    pub phase: DottedPhase,
    #[arg(long)]
    pub center: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Replace the sequence by its compound sequence.
    #[arg(long)]
    pub compound: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_scenario_name(s: &str) -> std::result::Result<ScenarioName, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl RunArgs {
    /// Merges the config file (if any) with the flags, flags winning.
    pub fn to_config(&self) -> Result<ScenarioConfig> {
        let mut c = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        if let Some(a) = self.algorithm {
            c.algorithm = a;
        }
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {
                $(if self.$field.is_some() { c.$target = self.$field.clone(); })*
            };
        }
        set!(n => n, bound => bound, diameter => diameter, x => x, sequence => sequence_file,
             seed => seed, horizon => horizon, deadline => deadline, sprime_window => sprime_window,
             prune => prune, decision_timing => decision_timing,
             root_change => root_change, out_trace => out_trace, out_verdict => out_verdict,
             out_sequence => out_sequence);
        if self.truncate {
            c.truncate = true;
        }
        if let Some(inputs) = &self.inputs {
            c.inputs = parse_inputs(inputs)?;
        }
        Ok(c)
    }
}

fn parse_inputs(s: &str) -> Result<Inputs> {
    if s == "random-binary" {
        return Ok(Inputs::Named(InputsKind::RandomBinary));
    }
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| invalid(format!("bad input value {v:?}")))
        })
        .collect::<Result<Vec<_>>>()
        .map(Inputs::Explicit)
}

fn emit(json: &impl Serialize, path: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(json)?;
    text.push('\n');
    match path {
        Some(path) => write_atomically(path, text.as_bytes()),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn cmd_run(args: &RunArgs) -> Result<i32> {
    let config = args.to_config()?;
    let plan = RunPlan::resolve(&config)?;
    if plan.out_of_contract {
        eprintln!(
            "warning: x = {} < D + 1 = {}; run is out of contract",
            plan.x,
            plan.diameter + 1
        );
    }
    let report = execute(&plan)?;
    if let Some(path) = &config.out_trace {
        write_atomically(path, report.trace.as_bytes())?;
    }
    if let Some(path) = &config.out_sequence {
        write_atomically(path, report.sequence.to_jsonl().as_bytes())?;
    }
    emit(&report, config.out_verdict.as_deref())?;
    Ok(if report.passed { EXIT_PASS } else { EXIT_FAIL })
}

/// Outcome of one trial of a sweep.
#[derive(Clone, Debug, Serialize)]
pub struct TrialSummary {
    pub seed: u64,
    pub passed: bool,
    pub agreement: bool,
    pub validity: bool,
    pub termination: bool,
    pub invariant_failures: usize,
    pub reference_round: Option<Round>,
    pub decision_offsets: Vec<i64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SweepSummary {
    pub trials: u64,
    pub passed: u64,
    pub agreement_violations: u64,
    pub validity_violations: u64,
    pub termination_failures: u64,
    pub invariant_failures: u64,
    pub crashed: u64,
    /// Decision rounds relative to the reference round, over all processes
    /// and trials: `[min, median, max]`.
    pub decision_offset: Option<[i64; 3]>,
    pub failing_seeds: Vec<u64>,
}

pub fn run_trial(config: &ScenarioConfig, seed: u64, trace_dir: Option<&Path>) -> TrialSummary {
    let mut config = config.clone();
    config.seed = Some(seed);
    let outcome = RunPlan::resolve(&config).and_then(|plan| {
        let report = execute(&plan)?;
        if let Some(dir) = trace_dir {
            write_atomically(
                &dir.join(format!("trial-{seed}.jsonl")),
                report.trace.as_bytes(),
            )?;
        }
        Ok(report)
    });
    match outcome {
        Ok(report) => TrialSummary {
            seed,
            passed: report.passed,
            agreement: report.verdict.agreement_ok(),
            validity: report.verdict.validity_ok(),
            termination: report.verdict.termination.passed,
            invariant_failures: report.verdict.invariant_failures.len(),
            reference_round: report.reference_round,
            decision_offsets: report.decision_offsets(),
            error: None,
        },
        Err(e) => TrialSummary {
            seed,
            passed: false,
            agreement: true,
            validity: true,
            termination: false,
            invariant_failures: 0,
            reference_round: None,
            decision_offsets: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

pub fn summarize(trials: &[TrialSummary]) -> SweepSummary {
    let mut s = SweepSummary {
        trials: trials.len() as u64,
        ..Default::default()
    };
    let mut offsets = Vec::new();
    for t in trials {
        s.passed += t.passed as u64;
        s.agreement_violations += !t.agreement as u64;
        s.validity_violations += !t.validity as u64;
        s.termination_failures += (!t.termination && t.error.is_none()) as u64;
        s.invariant_failures += t.invariant_failures as u64;
        s.crashed += t.error.is_some() as u64;
        if !t.passed {
            s.failing_seeds.push(t.seed);
        }
        offsets.extend_from_slice(&t.decision_offsets);
    }
    offsets.sort_unstable();
    if let (Some(&lo), Some(&hi)) = (offsets.first(), offsets.last()) {
        s.decision_offset = Some([lo, offsets[offsets.len() / 2], hi]);
    }
    s
}

#[derive(Serialize)]
struct SweepOutput<'a> {
    summary: &'a SweepSummary,
    trials: &'a [TrialSummary],
}

fn cmd_sweep(args: &SweepArgs) -> Result<i32> {
    if args.trials == 0 {
        return Err(invalid("--trials must be at least 1"));
    }
    let config = args.run.to_config()?;
    // Fail fast on configuration errors before spawning trials.
    RunPlan::resolve(&config)?;
    let base = config.seed.unwrap_or(0);
    let trace_dir = config.out_trace.clone();
    if let Some(dir) = &trace_dir {
        std::fs::create_dir_all(dir)?;
    }
    let trials: Vec<TrialSummary> = (0..args.trials)
        .into_par_iter()
        .map(|i| run_trial(&config, base.wrapping_add(i), trace_dir.as_deref()))
        .collect();
    let summary = summarize(&trials);
    emit(
        &SweepOutput {
            summary: &summary,
            trials: &trials,
        },
        config.out_verdict.as_deref(),
    )?;
    eprintln!(
        "{}/{} trials passed, {} crashed",
        summary.passed, summary.trials, summary.crashed
    );
    Ok(if summary.passed == summary.trials {
        EXIT_PASS
    } else {
        EXIT_FAIL
    })
}

fn cmd_validate(args: &ValidateArgs) -> Result<i32> {
    let seq = read_sequence(&args.file)?;
    let report = membership_report(&seq, args.diameter, args.x);
    emit(&report, None)?;
    Ok(if report.member { EXIT_PASS } else { EXIT_FAIL })
}

fn cmd_scenario(args: &ScenarioArgs) -> Result<i32> {
    let params = ScenarioParams {
        n: args.n,
        diameter: args.diameter,
        tau: args.tau,
        horizon: args.horizon,
        phase: args.phase,
        center: args.center,
        seed: args.seed,
    };
    let mut seq = scenario(args.name, &params)?;
    if args.compound {
        let compounded = compound_sequence(&seq);
        if compounded.dropped_rounds > 0 {
            eprintln!(
                "warning: dropped {} trailing rounds that do not fill a block",
                compounded.dropped_rounds
            );
        }
        seq = compounded.sequence;
    }
    let text = seq.to_jsonl();
    match &args.out {
        Some(path) => write_atomically(path, text.as_bytes())?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(EXIT_PASS)
}

pub fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Scenario(args) => cmd_scenario(args),
    }
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_PASS
            };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
