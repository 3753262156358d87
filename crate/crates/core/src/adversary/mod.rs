//! Message adversaries: specifications, membership checks, random
//! generation and the scripted lower-bound scenarios.

mod generate;
mod membership;
mod scenario;

use serde::{Deserialize, Serialize};

pub use generate::{generate, generate_stable, random_rooted_graph, Generated, MAX_RETRIES};
pub use membership::{
    check_diam, check_nonsplit, check_rooted, check_stability, check_star_window, check_uniform,
    membership_report, nonsplit_violation, root_broadcasts, stable_runs, DiamViolation,
    MembershipReport, NonSplitViolation, StableWindow,
};
pub use scenario::{scenario, DottedPhase, ScenarioName, ScenarioParams};

use crate::error::{invalid, Result};
use crate::graph::{GraphSequence, Round};

/// Which family of sequences to produce.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AdversaryKind {
    /// Rooted, dynamic diameter `D`, one designated stable window of `x` rounds.
    StableD,
    /// Rooted graphs whose root changes every round.
    Rooted,
    /// A rooted sequence with a stable window of `(y + 1)(n - 1)` rounds,
    /// compounded in blocks of `n - 1` rounds.
    NonSplitStarWindow { y: u32 },
    /// One of the fixed scenario constructions.
    Scripted {
        name: ScenarioName,
        #[serde(default)]
        params: ScenarioParams,
    },
}

/// Where the designated stable window begins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityStart {
    Round(Round),
    RandomInRange { lo: Round, hi: Round },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySpec {
    pub n: usize,
    #[serde(rename = "D")]
    pub diameter: u32,
    pub x: u32,
    pub kind: AdversaryKind,
    pub stability_start: StabilityStart,
    pub horizon: Round,
    pub seed: u64,
}

impl AdversarySpec {
    /// A stable-window spec with the window start drawn from `1..=3n`.
    pub fn stable(n: usize, diameter: u32, x: u32, horizon: Round, seed: u64) -> Self {
        Self {
            n,
            diameter,
            x,
            kind: AdversaryKind::StableD,
            stability_start: StabilityStart::RandomInRange {
                lo: 1,
                hi: 3 * n as Round,
            },
            horizon,
            seed,
        }
    }

    /// Latest round the designated window can end in.
    pub fn latest_window_end(&self) -> Round {
        let start = match self.stability_start {
            StabilityStart::Round(r) => r,
            StabilityStart::RandomInRange { hi, .. } => hi,
        };
        start + self.x.max(1) - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > crate::graph::MAX_PROCESSES {
            return Err(invalid(format!("n = {} out of range", self.n)));
        }
        let max_d = (self.n as u32 - 1).max(1);
        if self.diameter < 1 || self.diameter > max_d {
            return Err(invalid(format!(
                "D = {} must lie in 1..={max_d} for n = {}",
                self.diameter, self.n
            )));
        }
        if self.x < 1 {
            return Err(invalid("x must be at least 1"));
        }
        match self.stability_start {
            StabilityStart::Round(0) => return Err(invalid("stability start must be >= 1")),
            StabilityStart::RandomInRange { lo, hi } if lo == 0 || lo > hi => {
                return Err(invalid(format!(
                    "invalid stability start range {lo}..={hi}"
                )))
            }
            _ => {}
        }
        if matches!(self.kind, AdversaryKind::StableD) && self.horizon < self.latest_window_end() {
            return Err(invalid(format!(
                "horizon {} ends before the stable window (latest end {})",
                self.horizon,
                self.latest_window_end()
            )));
        }
        if let AdversaryKind::NonSplitStarWindow { y } = self.kind {
            if y < 1 {
                return Err(invalid("star window length y must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Result of compounding a sequence in blocks of `n - 1` rounds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Compounded {
    pub sequence: GraphSequence,
    /// Trailing input rounds that did not fill a block.
    pub dropped_rounds: usize,
}

/// Round `r` of the output is the compound of input rounds
/// `(r-1)(n-1)+1 ..= r(n-1)`. For `n = 1` the input is returned unchanged.
pub fn compound_sequence(seq: &GraphSequence) -> Compounded {
    let block = seq.n().saturating_sub(1).max(1);
    let mut out = GraphSequence::new(seq.n()).expect("n already validated");
    for chunk in seq.graphs().chunks_exact(block) {
        let g = chunk[1..].iter().fold(chunk[0].clone(), |acc, g| {
            acc.compound(g).expect("graphs of one sequence share n")
        });
        out.push(g).expect("same n");
    }
    Compounded {
        sequence: out,
        dropped_rounds: seq.len() % block,
    }
}
