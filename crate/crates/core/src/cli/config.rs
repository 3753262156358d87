//! Run configuration and single-run execution shared by the subcommands.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{
    check_star_window, generate, AdversaryKind, AdversarySpec, StabilityStart, StableWindow,
};
use crate::algorithms::{Alg1, Alg2, DecisionTiming, DecisionWindow, PruneWitness, RootChange};
use crate::engine::{run_with, Algorithm, Execution, RunOptions, Value};
use crate::error::{invalid, Result};
use crate::graph::{GraphSequence, Round};
use crate::verification::{stabilization_point, verify_alg1, verify_alg2, Verdict};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmChoice {
    #[default]
    Alg1,
    Alg2,
}

/// Initial values: an explicit list or uniformly random bits.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Inputs {
    Explicit(Vec<Value>),
    Named(InputsKind),
    #[default]
    #[serde(skip)]
    Default,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputsKind {
    #[serde(rename = "random-binary")]
    RandomBinary,
}

/// One JSON document describing a run. Every field is optional; missing
/// values are derived from the others.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub algorithm: AlgorithmChoice,
    pub n: Option<usize>,
    #[serde(rename = "N")]
    pub bound: Option<u32>,
    #[serde(rename = "D")]
    pub diameter: Option<u32>,
    pub x: Option<u32>,
    pub inputs: Inputs,
    pub adversary: Option<AdversarySpec>,
    pub sequence_file: Option<PathBuf>,
    pub horizon: Option<Round>,
    pub seed: Option<u64>,
    pub deadline: Option<Round>,
    pub sprime_window: Option<DecisionWindow>,
    pub prune: Option<PruneWitness>,
    pub decision_timing: Option<DecisionTiming>,
    pub root_change: Option<RootChange>,
    pub truncate: bool,
    pub out_trace: Option<PathBuf>,
    pub out_verdict: Option<PathBuf>,
    pub out_sequence: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }
}

/// Fully resolved parameters of one run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunPlan {
    pub algorithm: AlgorithmChoice,
    pub n: usize,
    #[serde(rename = "N")]
    pub bound: u32,
    #[serde(rename = "D")]
    pub diameter: u32,
    pub x: u32,
    pub seed: u64,
    pub horizon: Round,
    pub inputs: Vec<Value>,
    pub out_of_contract: bool,
    pub deadline: Option<Round>,
    pub sprime_window: DecisionWindow,
    pub prune: PruneWitness,
    pub decision_timing: DecisionTiming,
    pub root_change: RootChange,
    pub truncate: bool,
    #[serde(skip)]
    pub source: SequenceSource,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SequenceSource {
    File(PathBuf),
    Generated(AdversarySpec),
}

/// Random 0/1 inputs from a stream of `seed` separate from the adversary's.
pub fn random_binary_inputs(n: usize, seed: u64) -> Vec<Value> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    (0..n).map(|_| rng.gen_range(0..2)).collect()
}

/// Latest possible start of the designated window in generated runs.
fn default_window_range(n: usize) -> (Round, Round) {
    (1, 3 * n as Round)
}

impl RunPlan {
    pub fn resolve(config: &ScenarioConfig) -> Result<Self> {
        let seed = config.seed.unwrap_or(0);
        let file_seq = match &config.sequence_file {
            Some(path) => Some(read_sequence(path)?),
            None => None,
        };
        let n = config
            .n
            .or(config.adversary.as_ref().map(|a| a.n))
            .or(file_seq.as_ref().map(GraphSequence::n))
            .ok_or_else(|| invalid("the number of processes n is required"))?;
        if n == 0 || n > crate::graph::MAX_PROCESSES {
            return Err(invalid(format!("n = {n} out of range")));
        }
        let bound = config.bound.unwrap_or(n as u32);
        if (bound as usize) < n {
            return Err(invalid(format!("N = {bound} must be at least n = {n}")));
        }
        let max_d = (n as u32 - 1).max(1);
        let diameter = config
            .diameter
            .or(config.adversary.as_ref().map(|a| a.diameter))
            .unwrap_or(max_d);
        if diameter < 1 || diameter > max_d {
            return Err(invalid(format!("D = {diameter} must lie in 1..={max_d}")));
        }
        let block = max_d;
        let x = config.x.unwrap_or(match config.algorithm {
            AlgorithmChoice::Alg1 => diameter + 1,
            AlgorithmChoice::Alg2 => 3 * block,
        });
        let out_of_contract = match config.algorithm {
            AlgorithmChoice::Alg1 => x < diameter + 1,
            AlgorithmChoice::Alg2 => false,
        };
        let delay = bound * (diameter + 2 * bound);
        let (lo, hi) = default_window_range(n);

        let (horizon, source) = match (&file_seq, &config.sequence_file) {
            (Some(seq), Some(path)) => {
                if seq.n() != n {
                    return Err(invalid(format!(
                        "sequence file has n = {}, configuration has n = {n}",
                        seq.n()
                    )));
                }
                (seq.last_round(), SequenceSource::File(path.clone()))
            }
            _ => {
                let mut spec = match &config.adversary {
                    Some(spec) => spec.clone(),
                    None => AdversarySpec {
                        n,
                        diameter,
                        x,
                        kind: match config.algorithm {
                            AlgorithmChoice::Alg1 => AdversaryKind::StableD,
                            AlgorithmChoice::Alg2 => AdversaryKind::NonSplitStarWindow { y: 2 },
                        },
                        stability_start: StabilityStart::RandomInRange { lo, hi },
                        horizon: 0,
                        seed,
                    },
                };
                spec.seed = seed;
                if spec.n != n {
                    return Err(invalid(format!(
                        "adversary n = {} differs from n = {n}",
                        spec.n
                    )));
                }
                if config.diameter.is_some() {
                    spec.diameter = diameter;
                }
                if config.x.is_some() && matches!(spec.kind, AdversaryKind::StableD) {
                    spec.x = x;
                }
                let default_horizon = match spec.kind {
                    AdversaryKind::NonSplitStarWindow { y } => {
                        let raw_end = spec.latest_window_end().max(hi) + (y + 1) * block;
                        raw_end + 4 * block
                    }
                    _ => spec.latest_window_end() + delay + 5,
                };
                let horizon = config
                    .horizon
                    .or((spec.horizon > 0).then_some(spec.horizon))
                    .unwrap_or(default_horizon);
                spec.horizon = horizon;
                if let AdversaryKind::Scripted { params, .. } = &mut spec.kind {
                    params.n = n;
                    if params.diameter == 0 {
                        params.diameter = diameter;
                    }
                    params.horizon = Some(horizon);
                    params.seed = seed;
                }
                spec.validate()?;
                (horizon, SequenceSource::Generated(spec))
            }
        };

        let inputs = match &config.inputs {
            Inputs::Explicit(values) => {
                if values.len() != n {
                    return Err(invalid(format!(
                        "{} inputs given for n = {n}",
                        values.len()
                    )));
                }
                values.clone()
            }
            Inputs::Named(InputsKind::RandomBinary) | Inputs::Default => {
                random_binary_inputs(n, seed)
            }
        };

        Ok(RunPlan {
            algorithm: config.algorithm,
            n,
            bound,
            diameter,
            x,
            seed,
            horizon,
            inputs,
            out_of_contract,
            deadline: config.deadline,
            sprime_window: config.sprime_window.unwrap_or_default(),
            prune: config.prune.unwrap_or_default(),
            decision_timing: config.decision_timing.unwrap_or_default(),
            root_change: config.root_change.unwrap_or_default(),
            truncate: config.truncate,
            source,
        })
    }

    pub fn alg1(&self) -> Alg1 {
        Alg1::new(self.bound, self.diameter)
            .with_window(self.sprime_window)
            .with_prune(self.prune)
            .with_timing(self.decision_timing)
            .with_root_change(self.root_change)
    }

    /// The communication graphs the run executes on.
    pub fn sequence(&self) -> Result<(GraphSequence, Option<StableWindow>)> {
        match &self.source {
            SequenceSource::File(path) => Ok((read_sequence(path)?, None)),
            SequenceSource::Generated(spec) => {
                let gen = generate(spec)?;
                Ok((gen.sequence, gen.stable_window))
            }
        }
    }
}

pub fn read_sequence(path: &Path) -> Result<GraphSequence> {
    GraphSequence::read_jsonl(BufReader::new(File::open(path)?))
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomically(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        w.write_all(contents)?;
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Summary of one executed run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    #[serde(flatten)]
    pub plan: RunPlan,
    /// End of the first stable window long enough for the algorithm: `b`
    /// for the stabilizing algorithm, the second round of the first star
    /// pair for voting.
    pub reference_round: Option<Round>,
    /// Round by which every process had to decide.
    pub effective_deadline: Round,
    pub decisions: Vec<Option<(Round, Value)>>,
    pub verdict: Verdict,
    pub passed: bool,
    #[serde(skip)]
    pub trace: String,
    #[serde(skip)]
    pub sequence: GraphSequence,
}

impl RunReport {
    /// Decision rounds relative to the reference round.
    pub fn decision_offsets(&self) -> Vec<i64> {
        let Some(reference) = self.reference_round else {
            return Vec::new();
        };
        self.decisions
            .iter()
            .flatten()
            .map(|(r, _)| *r as i64 - reference as i64)
            .collect()
    }
}

fn trace_of<A: Algorithm>(alg: &A, exec: &Execution<A::State>) -> String {
    exec.trace_string(alg)
}

/// Generates or loads the sequence, runs the algorithm and verifies it.
pub fn execute(plan: &RunPlan) -> Result<RunReport> {
    let (seq, _) = plan.sequence()?;
    let options = RunOptions {
        truncate: plan.truncate,
    };
    match plan.algorithm {
        AlgorithmChoice::Alg1 => {
            let alg = plan.alg1();
            let exec = run_with(&alg, &plan.inputs, &seq, options)?;
            let verdict = verify_alg1(&alg, &exec, plan.deadline);
            let reference_round = stabilization_point(&exec, plan.diameter).map(|s| s.b);
            let decisions = (0..plan.n).map(|p| exec.decision_of(&alg, p)).collect();
            Ok(RunReport {
                plan: plan.clone(),
                reference_round,
                effective_deadline: verdict.termination.deadline,
                decisions,
                passed: verdict.passed(),
                verdict,
                trace: trace_of(&alg, &exec),
                sequence: seq,
            })
        }
        AlgorithmChoice::Alg2 => {
            let exec = run_with(&Alg2, &plan.inputs, &seq, options)?;
            let reference_round = check_star_window(&seq, 2).first().map(|w| w.start + 1);
            let deadline = plan
                .deadline
                .or(reference_round.map(|r| r + 2))
                .unwrap_or(exec.rounds());
            let verdict = verify_alg2(&Alg2, &exec, deadline);
            let decisions = (0..plan.n).map(|p| exec.decision_of(&Alg2, p)).collect();
            Ok(RunReport {
                plan: plan.clone(),
                reference_round,
                effective_deadline: deadline,
                decisions,
                passed: verdict.passed(),
                verdict,
                trace: trace_of(&Alg2, &exec),
                sequence: seq,
            })
        }
    }
}
