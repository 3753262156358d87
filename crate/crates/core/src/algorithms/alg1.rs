//! Consensus under short-lived eventual stability with dynamic diameter `D`
//! and a known bound `N >= n`.
//!
//! Every process starts locked on its input. A process locks on the
//! largest proposal of a root component it detected `D` rounds ago, queues
//! rounds at which a detection confirmed its current value, backs off to
//! the oldest still-credible queued round when it sees a recent state that
//! disagrees with it, and decides once every state in a long look-back
//! window agrees with its locked value.

use serde::{Deserialize, Serialize};

use crate::detection::{estimate_root, RootEstimate};
use crate::engine::{Algorithm, ProcessView, RoundOutput, Value};
use crate::graph::{ProcessId, Round};

/// Lower end of the decision look-back window over rounds.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "snake_case")]
pub enum DecisionWindow {
    /// `r - (D + 2N)^2`.
    Literal,
    /// `r - N(D + 2N)`, matching the causal-past horizon of the same set.
    #[default]
    Npd,
}

/// Which disagreeing state's round bounds the queue pruning on backoff.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "snake_case")]
pub enum PruneWitness {
    #[default]
    Max,
    Min,
}

/// How failed root estimates count when deciding whether the root changed
/// since the lock round.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "snake_case")]
pub enum RootChange {
    /// An unknown estimate, including one for a round before the first,
    /// counts as a root of its own.
    #[default]
    CountUnknown,
    /// Only successfully detected roots are compared.
    KnownOnly,
}

/// Rounds at which the decision rule is evaluated.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "snake_case")]
pub enum DecisionTiming {
    /// Only at `r = lock_round + N(D + 2N)`.
    Exact,
    /// At every round `r >= lock_round + N(D + 2N)`, so that a process whose
    /// lock round precedes the stable window still decides.
    #[default]
    AtLeast,
}

/// Deliberate defects used to check that the verifiers are not vacuous.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    /// Never adopt the single locked value seen recently.
    SkipAdoption,
    /// Never back off.
    NoBackoff,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alg1State {
    pub proposal: Value,
    pub locked: bool,
    pub lock_round: Round,
    /// Strictly increasing rounds.
    pub queue: Vec<Round>,
    pub decision: Option<Value>,
}

impl Alg1State {
    pub fn new(input: Value) -> Self {
        Self {
            proposal: input,
            locked: true,
            lock_round: 1,
            queue: Vec::new(),
            decision: None,
        }
    }

    pub fn is_locked_on(&self, v: Value) -> bool {
        self.locked && self.proposal == v
    }
}

/// Trace fields of an [`Alg1State`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alg1Record {
    pub proposal: Value,
    pub locked: bool,
    pub lockround: Round,
    pub queue: Vec<Round>,
    pub decided: bool,
    pub decision: Option<Value>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alg1 {
    /// Known upper bound `N` on the number of processes.
    pub bound: u32,
    /// Dynamic diameter `D`.
    pub diameter: u32,
    pub window: DecisionWindow,
    pub prune: PruneWitness,
    pub timing: DecisionTiming,
    pub root_change: RootChange,
    pub mutation: Option<Mutation>,
}

impl Alg1 {
    pub fn new(bound: u32, diameter: u32) -> Self {
        Self {
            bound,
            diameter,
            window: DecisionWindow::default(),
            prune: PruneWitness::default(),
            timing: DecisionTiming::default(),
            root_change: RootChange::default(),
            mutation: None,
        }
    }

    pub fn with_window(self, window: DecisionWindow) -> Self {
        Self { window, ..self }
    }

    pub fn with_prune(self, prune: PruneWitness) -> Self {
        Self { prune, ..self }
    }

    pub fn with_timing(self, timing: DecisionTiming) -> Self {
        Self { timing, ..self }
    }

    pub fn with_root_change(self, root_change: RootChange) -> Self {
        Self {
            root_change,
            ..self
        }
    }

    pub fn with_mutation(self, mutation: Option<Mutation>) -> Self {
        Self { mutation, ..self }
    }

    /// `N(D + 2N)`: distance from the lock round to the decision round.
    pub fn decision_delay(&self) -> Round {
        self.bound * (self.diameter + 2 * self.bound)
    }

    fn lookback(&self) -> Round {
        match self.window {
            DecisionWindow::Literal => (self.diameter + 2 * self.bound).pow(2),
            DecisionWindow::Npd => self.decision_delay(),
        }
    }
}

/// Known states `q^s` with `s >= from_round` of every process heard from
/// since `heard_since`. The owner contributes its states before this round.
fn known_states<'a: 'b, 'b>(
    view: &'b ProcessView<'a, Alg1State>,
    heard_since: Round,
    from_round: Round,
) -> impl Iterator<Item = (ProcessId, Round, &'a Alg1State)> + 'b {
    view.heard_since(heard_since).iter().flat_map(move |q| {
        let last = view.last_heard(q).unwrap_or(0);
        (from_round..=last).filter_map(move |s| view.known_state(q, s).map(|st| (q, s, st)))
    })
}

/// True iff the root estimates for rounds `lo..=hi` take at least two
/// distinct values. Rounds below 1 have no graph and estimate as unknown.
fn several_roots(
    view: &ProcessView<'_, Alg1State>,
    lo: i64,
    hi: Round,
    mode: RootChange,
) -> Result<bool, String> {
    let mut first: Option<RootEstimate> = None;
    let rounds = (lo..=hi as i64).map(|i| {
        if i < 1 {
            Ok(RootEstimate::Unknown)
        } else {
            estimate_root(view, i as Round).map_err(|e| e.to_string())
        }
    });
    for estimate in rounds {
        let estimate = estimate?;
        if mode == RootChange::KnownOnly && !estimate.is_known() {
            continue;
        }
        match &first {
            None => first = Some(estimate),
            Some(f) if *f != estimate => return Ok(true),
            Some(_) => {}
        }
    }
    Ok(false)
}

impl Algorithm for Alg1 {
    type State = Alg1State;
    type Record = Alg1Record;

    fn initial_state(&self, _pid: ProcessId, _n: usize, input: Value) -> Alg1State {
        Alg1State::new(input)
    }

    fn round(&self, view: &ProcessView<'_, Alg1State>) -> Result<RoundOutput<Alg1State>, String> {
        let r = view.round();
        let d = self.diameter;
        let big_n = self.bound;
        let mut st = view.own_state().clone();

        let detected = if r > d {
            estimate_root(view, r - d).map_err(|e| e.to_string())?
        } else {
            RootEstimate::Unknown
        };

        if let RootEstimate::Known(root) = detected {
            let mut candidate: Option<Value> = None;
            for q in root.iter() {
                let qs = view.known_state(q, r - d).ok_or_else(|| {
                    format!("root member {q} detected without its round {} state", r - d)
                })?;
                candidate = candidate.max(Some(qs.proposal));
            }
            let candidate = candidate.expect("root components are non-empty");
            let relock = !st.locked
                || (candidate != st.proposal && {
                    let since = st.queue.last().copied().unwrap_or(0).max(st.lock_round);
                    several_roots(view, since as i64 - d as i64, r - d, self.root_change)?
                });
            if relock {
                st.proposal = candidate;
                st.locked = true;
                st.lock_round = r;
            } else if candidate == st.proposal {
                st.queue.push(r);
            }
        }

        let recent = r.saturating_sub(big_n);
        if self.mutation != Some(Mutation::NoBackoff) && r >= st.lock_round + big_n {
            let witness = known_states(view, recent, recent)
                .filter(|(_, _, qs)| !qs.locked || qs.proposal != st.proposal)
                .map(|(_, s, _)| s);
            let witness = match self.prune {
                PruneWitness::Max => witness.max(),
                PruneWitness::Min => witness.min(),
            };
            if let Some(s) = witness {
                st.queue.retain(|&q| q > s);
                match st.queue.first() {
                    Some(&oldest) => st.lock_round = oldest,
                    None => st.locked = false,
                }
            }
        }

        if self.mutation != Some(Mutation::SkipAdoption) && r >= st.lock_round + 2 * big_n {
            let mut locked_values = known_states(view, recent, recent)
                .filter(|(_, _, qs)| qs.locked)
                .map(|(_, _, qs)| qs.proposal);
            if let Some(x) = locked_values.next() {
                if locked_values.all(|y| y == x) && x != st.proposal {
                    st.proposal = x;
                }
            }
        }

        let due = st.lock_round + self.decision_delay();
        let at_deadline = match self.timing {
            DecisionTiming::Exact => r == due,
            DecisionTiming::AtLeast => r >= due,
        };
        if st.decision.is_none() && at_deadline {
            let unanimous = known_states(
                view,
                r.saturating_sub(self.decision_delay()),
                r.saturating_sub(self.lookback()),
            )
            .all(|(_, _, qs)| qs.is_locked_on(st.proposal));
            if unanimous {
                st.decision = Some(st.proposal);
            }
        }

        Ok(RoundOutput {
            state: st,
            detected_root: detected,
        })
    }

    fn decision(&self, state: &Alg1State) -> Option<Value> {
        state.decision
    }

    fn record(&self, state: &Alg1State) -> Alg1Record {
        Alg1Record {
            proposal: state.proposal,
            locked: state.locked,
            lockround: state.lock_round,
            queue: state.queue.clone(),
            decided: state.decision.is_some(),
            decision: state.decision,
        }
    }

    /// The oldest state ever consulted is `r - lookback`, and the oldest
    /// root estimate needs in-edge reports of the same age at most while
    /// the lock round stays within that distance.
    fn retention(&self) -> Round {
        self.lookback().max(self.decision_delay())
    }
}
