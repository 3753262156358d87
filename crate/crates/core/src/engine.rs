//! Lock-step synchronous execution under full information.
//!
//! Knowledge is tracked as a frontier per process: `last_heard[q]` is the
//! latest round `s` such that `q`'s state at the end of round `s` has
//! reached the owner. Because the causal past shrinks as `s` grows, the
//! owner knows exactly the states `q^0 ..= q^{last_heard[q]}`. The frontier
//! of `p` after round `r` is the elementwise maximum over the round-`r`
//! in-neighbours of `p` (itself included) of their frontiers after round
//! `r - 1`, with `p`'s own entry set to `r`.
//!
//! State contents are looked up in the shared history, gated by the
//! frontier, so a process can never read anything outside its causal past.

use std::fmt::Debug;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};

use serde::Serialize;

use crate::detection::RootEstimate;
use crate::error::{invalid, Error, Result};
use crate::graph::{GraphSequence, ProcessId, ProcessSet, Round};

/// Consensus values.
pub type Value = u64;

/// What a process computed in one round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundOutput<S> {
    pub state: S,
    /// The root estimate the computation relied on, for the trace.
    pub detected_root: RootEstimate,
}

/// A round-based algorithm run under full information.
pub trait Algorithm: Sync {
    type State: Clone + PartialEq + Debug + Send + Sync;
    /// Trace fields; must serialize as a struct or map.
    type Record: Serialize;

    fn initial_state(&self, pid: ProcessId, n: usize, input: Value) -> Self::State;

    /// The round-`view.round()` transition of `view.owner()`.
    fn round(
        &self,
        view: &ProcessView<'_, Self::State>,
    ) -> Result<RoundOutput<Self::State>, String>;

    fn decision(&self, state: &Self::State) -> Option<Value>;

    /// Trace fields of a state.
    fn record(&self, state: &Self::State) -> Self::Record;

    /// How many past rounds of state the algorithm may consult. Used by
    /// the truncated mode, which forgets everything older.
    fn retention(&self) -> Round;
}

/// Options for [`run_with`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Forget states older than the algorithm's retention window.
    pub truncate: bool,
}

/// The knowledge of one process while it computes round `round`.
pub struct ProcessView<'a, S> {
    owner: ProcessId,
    round: Round,
    frontier: &'a [Option<Round>],
    states: &'a [Vec<S>],
    seq: &'a GraphSequence,
    oldest: Round,
}

impl<'a, S> ProcessView<'a, S> {
    pub fn owner(&self) -> ProcessId {
        self.owner
    }

    /// The round being computed.
    pub fn round(&self) -> Round {
        self.round
    }

    pub fn n(&self) -> usize {
        self.frontier.len()
    }

    /// The owner's state before this round's transition.
    pub fn own_state(&self) -> &'a S {
        &self.states[self.round as usize - 1][self.owner]
    }

    /// Last round whose state of `q` the owner knows, `None` if it has
    /// never heard from `q` (not even its initial state).
    pub fn last_heard(&self, q: ProcessId) -> Option<Round> {
        self.frontier.get(q).copied().flatten()
    }

    /// `q`'s state at the end of round `s`, if the owner knows it.
    /// The owner's own state of the current round is not yet available.
    pub fn known_state(&self, q: ProcessId, s: Round) -> Option<&'a S> {
        let heard = self.last_heard(q)?;
        if s > heard || s >= self.round || s < self.oldest {
            return None;
        }
        self.states.get(s as usize).map(|row| &row[q])
    }

    /// The in-neighbourhood `q` reported receiving from in round `s`,
    /// including `q` itself.
    pub fn known_in_edges(&self, q: ProcessId, s: Round) -> Option<ProcessSet> {
        let heard = self.last_heard(q)?;
        if s == 0 || s > heard || s < self.oldest {
            return None;
        }
        self.seq.graph(s).map(|g| g.in_closed(q))
    }

    /// `CP(owner, s, round)`: everyone whose round-`s` state is known.
    pub fn heard_since(&self, s: Round) -> ProcessSet {
        (0..self.n())
            .filter(|&q| self.last_heard(q).is_some_and(|h| h >= s))
            .collect()
    }
}

/// A complete recorded run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Execution<S> {
    pub inputs: Vec<Value>,
    pub sequence: GraphSequence,
    /// `states[r][p]`: state of `p` at the end of round `r`; row 0 holds
    /// the initial states.
    pub states: Vec<Vec<S>>,
    /// `detections[r - 1][p]`: the estimate reported in round `r`.
    pub detections: Vec<Vec<RootEstimate>>,
    /// `frontiers[r][p][q]`: `last_heard` of `q` at `p` after round `r`.
    pub frontiers: Vec<Vec<Vec<Option<Round>>>>,
    /// Oldest retained round per computed round in truncated mode.
    retention: Option<Round>,
}

impl<S> Execution<S> {
    pub fn n(&self) -> usize {
        self.inputs.len()
    }

    /// Number of executed rounds.
    pub fn rounds(&self) -> Round {
        self.states.len() as Round - 1
    }

    pub fn state(&self, p: ProcessId, r: Round) -> &S {
        &self.states[r as usize][p]
    }

    /// `q`'s `last_heard` at `p` after round `r`.
    pub fn last_heard(&self, p: ProcessId, r: Round, q: ProcessId) -> Option<Round> {
        self.frontiers[r as usize][p][q]
    }

    /// The view `p` computed round `r` (`1 <= r <= rounds`) with.
    pub fn view(&self, p: ProcessId, r: Round) -> ProcessView<'_, S> {
        let last = self.frontiers.len() as Round - 1;
        assert!(r >= 1 && r <= last, "round {r} outside 1..={last}");
        ProcessView {
            owner: p,
            round: r,
            frontier: &self.frontiers[r as usize][p],
            states: &self.states,
            seq: &self.sequence,
            oldest: self.oldest(r),
        }
    }

    fn oldest(&self, r: Round) -> Round {
        self.retention.map_or(0, |w| r.saturating_sub(w))
    }

    /// First round at which `p` holds a decision, with the value.
    pub fn decision_of<A>(&self, alg: &A, p: ProcessId) -> Option<(Round, Value)>
    where
        A: Algorithm<State = S>,
    {
        (0..=self.rounds()).find_map(|r| alg.decision(self.state(p, r)).map(|v| (r, v)))
    }

    /// Writes one JSON line per `(round, process)`.
    pub fn write_trace<A, W>(&self, alg: &A, mut w: W) -> Result<()>
    where
        A: Algorithm<State = S>,
        W: Write,
    {
        #[derive(Serialize)]
        struct Line<'a, R> {
            round: Round,
            pid: ProcessId,
            #[serde(flatten)]
            record: R,
            detected_root: &'a RootEstimate,
        }
        for r in 1..=self.rounds() {
            for p in 0..self.n() {
                let line = Line {
                    round: r,
                    pid: p,
                    record: alg.record(self.state(p, r)),
                    detected_root: &self.detections[r as usize - 1][p],
                };
                serde_json::to_writer(&mut w, &line)?;
                writeln!(w)?;
            }
        }
        Ok(())
    }

    pub fn trace_string<A>(&self, alg: &A) -> String
    where
        A: Algorithm<State = S>,
    {
        let mut buf = Vec::new();
        self.write_trace(alg, &mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

/// Runs `alg` on `seq` with full information.
pub fn run<A: Algorithm>(
    alg: &A,
    inputs: &[Value],
    seq: &GraphSequence,
) -> Result<Execution<A::State>> {
    run_with(alg, inputs, seq, RunOptions::default())
}

pub fn run_with<A: Algorithm>(
    alg: &A,
    inputs: &[Value],
    seq: &GraphSequence,
    options: RunOptions,
) -> Result<Execution<A::State>> {
    let n = seq.n();
    if inputs.len() != n {
        return Err(invalid(format!(
            "{} inputs for {n} processes",
            inputs.len()
        )));
    }
    let initial: Vec<A::State> = (0..n).map(|p| alg.initial_state(p, n, inputs[p])).collect();
    let initial_frontier: Vec<Vec<Option<Round>>> = (0..n)
        .map(|p| (0..n).map(|q| (p == q).then_some(0)).collect())
        .collect();
    let mut exec = Execution {
        inputs: inputs.to_vec(),
        sequence: seq.clone(),
        states: vec![initial],
        detections: Vec::with_capacity(seq.len()),
        frontiers: vec![initial_frontier],
        retention: options.truncate.then(|| alg.retention()),
    };

    for (r, g) in seq.rounds() {
        let prev = &exec.frontiers[r as usize - 1];
        let next: Vec<Vec<Option<Round>>> = (0..n)
            .map(|p| {
                let mut f = prev[p].clone();
                for u in g.in_closed(p).iter() {
                    for (mine, theirs) in f.iter_mut().zip(&prev[u]) {
                        *mine = (*mine).max(*theirs);
                    }
                }
                f[p] = Some(r);
                f
            })
            .collect();
        exec.frontiers.push(next);

        let mut row = Vec::with_capacity(n);
        let mut detections = Vec::with_capacity(n);
        for p in 0..n {
            let view = exec.view(p, r);
            let out = catch_unwind(AssertUnwindSafe(|| alg.round(&view)))
                .map_err(|panic| execution_error(r, p, panic_message(panic)))?
                .map_err(|message| execution_error(r, p, message))?;
            let before = alg.decision(view.own_state());
            if before.is_some() && alg.decision(&out.state) != before {
                return Err(execution_error(
                    r,
                    p,
                    format!(
                        "decision changed from {before:?} to {:?}",
                        alg.decision(&out.state)
                    ),
                ));
            }
            row.push(out.state);
            detections.push(out.detected_root);
        }
        exec.states.push(row);
        exec.detections.push(detections);
    }
    Ok(exec)
}

fn execution_error(round: Round, pid: ProcessId, message: String) -> Error {
    Error::Execution {
        round,
        pid,
        message,
    }
}

fn panic_message(panic: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = panic.downcast_ref::<&str>() {
        format!("panic: {s}")
    } else if let Some(s) = panic.downcast_ref::<String>() {
        format!("panic: {s}")
    } else {
        "panic".to_string()
    }
}

/// True iff `p` has the same state and the same knowledge in both
/// executions in every round `1..=r`.
pub fn views_equal_until<S: PartialEq>(
    a: &Execution<S>,
    b: &Execution<S>,
    p: ProcessId,
    r: Round,
) -> bool {
    if a.n() != b.n() || p >= a.n() || r > a.rounds() || r > b.rounds() {
        return false;
    }
    if a.state(p, 0) != b.state(p, 0) {
        return false;
    }
    (1..=r).all(|t| {
        let (va, vb) = (a.view(p, t), b.view(p, t));
        a.state(p, t) == b.state(p, t)
            && (0..a.n()).all(|q| {
                let heard = va.last_heard(q);
                heard == vb.last_heard(q)
                    && (0..=heard.unwrap_or(0)).all(|s| {
                        heard.is_none()
                            || (va.known_state(q, s) == vb.known_state(q, s)
                                && va.known_in_edges(q, s) == vb.known_in_edges(q, s))
                    })
            })
    })
}
