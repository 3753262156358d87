//! Post-hoc checks over recorded executions: the consensus properties,
//! invariants from the correctness argument of the stabilizing algorithm,
//! detection contracts, and indistinguishability of executions.
//!
//! Every failure carries the rounds and processes needed to find it again
//! in the trace.

use serde::{Deserialize, Serialize};

use crate::adversary::stable_runs;
use crate::algorithms::{Alg1, Alg1State, Alg2State};
use crate::detection::{estimate_root, RootEstimate};
use crate::engine::{views_equal_until, Algorithm, Execution, Value};
use crate::error::{invalid, Result};
use crate::graph::{CommGraph, GraphSequence, ProcessId, ProcessSet, Round};

/// Two processes that decided differently.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementWitness {
    pub p: ProcessId,
    pub p_round: Round,
    pub p_value: Value,
    pub q: ProcessId,
    pub q_round: Round,
    pub q_value: Value,
}

/// A decision on a value nobody proposed initially.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityWitness {
    pub p: ProcessId,
    pub round: Round,
    pub value: Value,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Termination {
    pub passed: bool,
    pub deadline: Round,
    pub undecided: Vec<ProcessId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantFailure {
    pub invariant: String,
    pub round: Round,
    pub process: Option<ProcessId>,
    pub detail: String,
}

impl InvariantFailure {
    fn new(invariant: &str, round: Round, process: Option<ProcessId>, detail: String) -> Self {
        Self {
            invariant: invariant.to_string(),
            round,
            process,
            detail,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub agreement: Option<AgreementWitness>,
    pub validity: Option<ValidityWitness>,
    pub termination: Termination,
    pub invariant_failures: Vec<InvariantFailure>,
}

impl Verdict {
    pub fn agreement_ok(&self) -> bool {
        self.agreement.is_none()
    }

    pub fn validity_ok(&self) -> bool {
        self.validity.is_none()
    }

    pub fn safe(&self) -> bool {
        self.agreement_ok() && self.validity_ok()
    }

    pub fn passed(&self) -> bool {
        self.safe() && self.termination.passed && self.invariant_failures.is_empty()
    }
}

/// Agreement, validity, and termination by `deadline`.
pub fn check_consensus<A: Algorithm>(
    alg: &A,
    exec: &Execution<A::State>,
    deadline: Round,
) -> Verdict {
    let decisions: Vec<Option<(Round, Value)>> =
        (0..exec.n()).map(|p| exec.decision_of(alg, p)).collect();

    let decided: Vec<(ProcessId, Round, Value)> = decisions
        .iter()
        .enumerate()
        .filter_map(|(p, d)| d.map(|(r, v)| (p, r, v)))
        .collect();
    let agreement = decided.first().and_then(|&(p, p_round, p_value)| {
        decided
            .iter()
            .find(|&&(_, _, v)| v != p_value)
            .map(|&(q, q_round, q_value)| AgreementWitness {
                p,
                p_round,
                p_value,
                q,
                q_round,
                q_value,
            })
    });
    let validity = decided
        .iter()
        .find(|(_, _, v)| !exec.inputs.contains(v))
        .map(|&(p, round, value)| ValidityWitness { p, round, value });
    let undecided: Vec<ProcessId> = decisions
        .iter()
        .enumerate()
        .filter(|(_, d)| !matches!(d, Some((r, _)) if *r <= deadline))
        .map(|(p, _)| p)
        .collect();
    Verdict {
        agreement,
        validity,
        termination: Termination {
            passed: undecided.is_empty(),
            deadline,
            undecided,
        },
        invariant_failures: Vec::new(),
    }
}

/// A run of rounds whose root component was locked on one value `v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VLockedWindow {
    pub start: Round,
    pub end: Round,
    pub v: Value,
}

impl VLockedWindow {
    pub fn len(&self) -> u32 {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// The value all root members of round `r` are locked on at the end of
/// round `r`, if any.
pub fn locked_root_value(exec: &Execution<Alg1State>, r: Round) -> Option<Value> {
    let root = exec.sequence.graph(r)?.root()?;
    let first = exec.state(root.first()?, r).proposal;
    root.iter()
        .all(|q| exec.state(q, r).is_locked_on(first))
        .then_some(first)
}

/// Maximal runs of rounds with a `v`-locked root component for a fixed `v`.
pub fn track_v_locked_windows(exec: &Execution<Alg1State>) -> Vec<VLockedWindow> {
    let mut windows: Vec<VLockedWindow> = Vec::new();
    for r in 1..=exec.rounds() {
        match (locked_root_value(exec, r), windows.last_mut()) {
            (Some(v), Some(w)) if w.v == v && w.end + 1 == r => w.end = r,
            (Some(v), _) => windows.push(VLockedWindow {
                start: r,
                end: r,
                v,
            }),
            (None, _) => {}
        }
    }
    windows
}

/// After `D + 2N` consecutive rounds with a `v`-locked root, every process
/// proposes `v` from then on.
pub fn assert_lemma_2n(exec: &Execution<Alg1State>, alg: &Alg1) -> Vec<InvariantFailure> {
    let span = alg.diameter + 2 * alg.bound;
    let mut failures = Vec::new();
    for w in track_v_locked_windows(exec) {
        if w.len() < span {
            continue;
        }
        let c = w.start + span - 1;
        let violation = (c..=exec.rounds()).find_map(|r| {
            (0..exec.n())
                .find(|&p| exec.state(p, r).proposal != w.v)
                .map(|p| (r, p))
        });
        if let Some((r, p)) = violation {
            failures.push(InvariantFailure::new(
                "v-locked-window-persists",
                r,
                Some(p),
                format!(
                    "rounds {}..={} have a {}-locked root, but the proposal is {}",
                    w.start,
                    w.end,
                    w.v,
                    exec.state(p, r).proposal
                ),
            ));
        }
    }
    failures
}

/// The earliest stable run of at least `len` rounds: `(start, root)`.
pub fn first_stable_window(seq: &GraphSequence, len: u32) -> Option<(Round, ProcessSet)> {
    stable_runs(seq)
        .into_iter()
        .find(|w| w.len() >= len)
        .map(|w| (w.start, w.root))
}

/// The round `b` ending the first `D + 1`-round stable window, its start
/// `a`, root and the value `v` all processes lock on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilizationPoint {
    pub a: Round,
    pub b: Round,
    pub root: ProcessSet,
    pub v: Value,
}

pub fn stabilization_point(exec: &Execution<Alg1State>, d: u32) -> Option<StabilizationPoint> {
    let (a, root) = first_stable_window(&exec.sequence, d + 1)?;
    let v = root
        .iter()
        .map(|q| exec.state(q, a).proposal)
        .max()
        .expect("roots are non-empty");
    Some(StabilizationPoint {
        a,
        b: a + d,
        root,
        v,
    })
}

/// Default deadline of the stabilizing algorithm: `b + N(D + 2N)`, or the
/// last round if the sequence never stabilizes.
pub fn alg1_deadline(exec: &Execution<Alg1State>, alg: &Alg1) -> Round {
    stabilization_point(exec, alg.diameter).map_or(exec.rounds(), |s| s.b + alg.decision_delay())
}

/// From round `b` on every process is locked on `v`, with lock round at
/// most `b` and either equal to `b` or with `b` queued.
pub fn assert_locked_after_stabilization(
    exec: &Execution<Alg1State>,
    d: u32,
) -> Vec<InvariantFailure> {
    let Some(point) = stabilization_point(exec, d) else {
        return Vec::new();
    };
    let b = point.b;
    for r in b..=exec.rounds() {
        for p in 0..exec.n() {
            let st = exec.state(p, r);
            let ok = st.is_locked_on(point.v)
                && st.lock_round <= b
                && (st.lock_round == b || st.queue.contains(&b));
            if !ok {
                return vec![InvariantFailure::new(
                    "locked-after-stabilization",
                    r,
                    Some(p),
                    format!(
                        "b = {b}, v = {}: proposal {}, locked {}, lock round {}, queue {:?}",
                        point.v, st.proposal, st.locked, st.lock_round, st.queue
                    ),
                )];
            }
        }
    }
    Vec::new()
}

/// Once some process decides `v` in round `r`, every process proposes `v`
/// in every round from `r` on.
pub fn assert_decision_propagation(exec: &Execution<Alg1State>) -> Vec<InvariantFailure> {
    let first = (1..=exec.rounds())
        .find_map(|r| (0..exec.n()).find_map(|p| exec.state(p, r).decision.map(|v| (r, p, v))));
    let Some((r0, decider, v)) = first else {
        return Vec::new();
    };
    for r in r0..=exec.rounds() {
        if let Some(p) = (0..exec.n()).find(|&p| exec.state(p, r).proposal != v) {
            return vec![InvariantFailure::new(
                "decision-propagation",
                r,
                Some(p),
                format!(
                    "process {decider} decided {v} in round {r0}, proposal here is {}",
                    exec.state(p, r).proposal
                ),
            )];
        }
    }
    Vec::new()
}

/// At the end of the first decision round every process proposes the
/// decided value.
pub fn assert_alg2_first_decision(exec: &Execution<Alg2State>) -> Vec<InvariantFailure> {
    let first = (1..=exec.rounds())
        .find_map(|r| (0..exec.n()).find_map(|p| exec.state(p, r).decision.map(|v| (r, p, v))));
    let Some((r, decider, v)) = first else {
        return Vec::new();
    };
    (0..exec.n())
        .filter(|&p| exec.state(p, r).proposal != v)
        .take(1)
        .map(|p| {
            InvariantFailure::new(
                "first-decision-agreement",
                r,
                Some(p),
                format!(
                    "process {decider} decided {v}, proposal here is {}",
                    exec.state(p, r).proposal
                ),
            )
        })
        .collect()
}

/// Soundness of root estimates: every `Known` estimate made in round `r`
/// about a round `s` in `r - D - 1 ..= r` is the true root of `s`, and the
/// estimating process knows every member's round-`s` state.
pub fn check_detection_soundness<S>(exec: &Execution<S>, d: u32) -> Vec<InvariantFailure> {
    let mut failures = Vec::new();
    for r in 1..=exec.rounds() {
        for p in 0..exec.n() {
            let view = exec.view(p, r);
            for s in r.saturating_sub(d + 1).max(1)..=r {
                let RootEstimate::Known(root) = estimate_root(&view, s).expect("s in 1..=r") else {
                    continue;
                };
                let truth = exec.sequence.graph(s).and_then(CommGraph::root);
                if truth != Some(root) {
                    failures.push(InvariantFailure::new(
                        "detection-soundness",
                        r,
                        Some(p),
                        format!("estimated root {root:?} of round {s}, true root {truth:?}"),
                    ));
                    continue;
                }
                let missing = root
                    .iter()
                    .find(|&q| !(q == p && s == r) && view.known_state(q, s).is_none());
                if let Some(q) = missing {
                    failures.push(InvariantFailure::new(
                        "detection-soundness",
                        r,
                        Some(p),
                        format!("root {root:?} of round {s} known without the state of {q}"),
                    ));
                }
            }
        }
    }
    failures
}

/// Completeness of root estimates: whenever rounds `s..=s+D` share root
/// `R`, every process estimates `R` for round `s` in round `s + D`.
pub fn check_detection_completeness<S>(exec: &Execution<S>, d: u32) -> Vec<InvariantFailure> {
    let mut failures = Vec::new();
    for w in stable_runs(&exec.sequence) {
        if w.len() < d + 1 {
            continue;
        }
        for s in w.start..=(w.end - d) {
            for p in 0..exec.n() {
                let est = estimate_root(&exec.view(p, s + d), s).expect("s <= s + d");
                if est != RootEstimate::Known(w.root) {
                    failures.push(InvariantFailure::new(
                        "detection-completeness",
                        s + d,
                        Some(p),
                        format!("round {s} root {:?} estimated as {est:?}", w.root),
                    ));
                }
            }
        }
    }
    failures
}

/// All checks for one run of the stabilizing algorithm.
pub fn verify_alg1(alg: &Alg1, exec: &Execution<Alg1State>, deadline: Option<Round>) -> Verdict {
    let deadline = deadline.unwrap_or_else(|| alg1_deadline(exec, alg));
    let mut verdict = check_consensus(alg, exec, deadline);
    let failures = &mut verdict.invariant_failures;
    failures.extend(check_detection_soundness(exec, alg.diameter));
    failures.extend(check_detection_completeness(exec, alg.diameter));
    failures.extend(assert_lemma_2n(exec, alg));
    failures.extend(assert_locked_after_stabilization(exec, alg.diameter));
    failures.extend(assert_decision_propagation(exec));
    verdict
}

/// All checks for one run of the voting algorithm on a compound sequence.
pub fn verify_alg2(
    alg: &crate::algorithms::Alg2,
    exec: &Execution<Alg2State>,
    deadline: Round,
) -> Verdict {
    let mut verdict = check_consensus(alg, exec, deadline);
    verdict
        .invariant_failures
        .extend(check_detection_soundness(exec, 1));
    verdict
        .invariant_failures
        .extend(assert_alg2_first_decision(exec));
    verdict
}

/// `p` cannot tell the executions apart through round `through`.
pub fn check_indistinguishability<S: PartialEq>(
    a: &Execution<S>,
    b: &Execution<S>,
    p: ProcessId,
    through: Round,
) -> bool {
    views_equal_until(a, b, p, through)
}

/// Brute-force check that information from a root member in `x` reaches
/// every process across `n` rooted graphs taken as consecutive rounds:
/// for every `p` there are `q ∈ x` and a round `r` with `q` in the root of
/// round `r` and `q ∈ CP(p, r, n)`.
pub fn check_lemma1(graphs: &[CommGraph], x: ProcessSet) -> Result<bool> {
    let n = graphs
        .first()
        .map(CommGraph::n)
        .ok_or_else(|| invalid("no graphs"))?;
    if graphs.len() != n {
        return Err(invalid(format!(
            "{} graphs given for {n} processes",
            graphs.len()
        )));
    }
    let seq = GraphSequence::from_graphs(n, graphs.to_vec())?;
    let mut roots = Vec::with_capacity(n);
    for (r, g) in seq.rounds() {
        let root = g
            .root()
            .ok_or_else(|| invalid(format!("graph {r} is not rooted")))?;
        if root.intersection(x).is_empty() {
            return Err(invalid(format!("x misses the root {root:?} of graph {r}")));
        }
        roots.push(root);
    }
    let last = n as Round;
    for p in 0..n {
        let mut found = false;
        for (i, root) in roots.iter().enumerate() {
            let cp = seq.causal_past(p, i as Round + 1, last)?;
            if !cp.intersection(*root).intersection(x).is_empty() {
                found = true;
                break;
            }
        }
        if !found {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::Alg1;
    use crate::engine::run;

    fn star_seq(n: usize, rounds: usize) -> GraphSequence {
        GraphSequence::from_graphs(n, vec![CommGraph::star(0, n).unwrap(); rounds]).unwrap()
    }

    #[test]
    fn consensus_passes_on_constant_star() {
        let alg = Alg1::new(3, 1);
        let seq = star_seq(3, 60);
        let exec = run(&alg, &[5, 1, 5], &seq).unwrap();
        let verdict = verify_alg1(&alg, &exec, None);
        assert!(verdict.passed(), "{verdict:?}");
        assert_eq!(alg1_deadline(&exec, &alg), 2 + alg.decision_delay());
    }

    #[test]
    fn agreement_witness() {
        let alg = Alg1::new(2, 1);
        let seq = GraphSequence::from_graphs(2, vec![CommGraph::new(2).unwrap()]).unwrap();
        let mut exec = run(&alg, &[3, 5], &seq).unwrap();
        exec.states[1][0].decision = Some(3);
        exec.states[1][1].decision = Some(5);
        let v = check_consensus(&alg, &exec, 1);
        let w = v.agreement.as_ref().unwrap();
        assert_eq!((w.p, w.p_value, w.q, w.q_value), (0, 3, 1, 5));
        assert!(v.validity_ok());
        assert!(v.termination.passed);

        exec.states[1][1].decision = Some(9);
        let v = check_consensus(&alg, &exec, 1);
        assert_eq!(v.validity.unwrap().value, 9);
    }

    #[test]
    fn termination_lists_undecided() {
        let alg = Alg1::new(2, 1);
        let seq = star_seq(2, 3);
        let exec = run(&alg, &[0, 1], &seq).unwrap();
        let v = check_consensus(&alg, &exec, 3);
        assert_eq!(v.termination.undecided, vec![0, 1]);
    }

    #[test]
    fn v_locked_window_breaks_on_unlocked_member() {
        let alg = Alg1::new(3, 1);
        let seq = star_seq(3, 10);
        let mut exec = run(&alg, &[2, 2, 2], &seq).unwrap();
        assert_eq!(
            track_v_locked_windows(&exec),
            vec![VLockedWindow {
                start: 1,
                end: 10,
                v: 2
            }]
        );
        exec.states[4][0].locked = false;
        assert_eq!(
            track_v_locked_windows(&exec),
            vec![
                VLockedWindow {
                    start: 1,
                    end: 3,
                    v: 2
                },
                VLockedWindow {
                    start: 5,
                    end: 10,
                    v: 2
                }
            ]
        );
    }

    #[test]
    fn v_locked_checker_reports_a_stray_proposal() {
        let alg = Alg1::new(2, 1);
        let seq = star_seq(2, 12);
        let mut exec = run(&alg, &[4, 4], &seq).unwrap();
        assert!(assert_lemma_2n(&exec, &alg).is_empty());
        // The root stays 4-locked through round 12; span D + 2N = 5.
        exec.states[9][1].proposal = 6;
        exec.states[9][1].locked = false;
        let failures = assert_lemma_2n(&exec, &alg);
        assert_eq!(failures.len(), 1);
        assert_eq!((failures[0].round, failures[0].process), (9, Some(1)));
    }

    #[test]
    fn propagation_check_examples() {
        let graphs = vec![CommGraph::star(0, 3).unwrap(); 3];
        assert!(check_lemma1(&graphs, ProcessSet::singleton(0)).unwrap());
        assert!(check_lemma1(&graphs[..2], ProcessSet::singleton(0)).is_err());
        assert!(check_lemma1(&graphs, ProcessSet::singleton(1)).is_err());
    }

    #[test]
    fn indistinguishable_from_itself() {
        let alg = Alg1::new(3, 1);
        let exec = run(&alg, &[1, 2, 3], &star_seq(3, 5)).unwrap();
        assert!(check_indistinguishability(&exec, &exec, 2, 5));
    }
}
