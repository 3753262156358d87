//! Membership checkers for the adversary classes, evaluated on finite prefixes.

use serde::{Deserialize, Serialize};

use crate::graph::{CommGraph, GraphSequence, ProcessId, ProcessSet, Round};

/// A run of consecutive rounds `start..=end` whose graphs share root `root`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StableWindow {
    pub start: Round,
    pub end: Round,
    pub root: ProcessSet,
}

impl StableWindow {
    pub fn len(&self) -> u32 {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A `D`-window whose root member `source` failed to reach `target`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiamViolation {
    pub window_start: Round,
    pub window_end: Round,
    pub root: ProcessSet,
    pub source: ProcessId,
    pub target: ProcessId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NonSplitViolation {
    pub round: Round,
    pub p: ProcessId,
    pub q: ProcessId,
}

/// Per-round rootedness.
pub fn check_rooted(seq: &GraphSequence) -> Vec<bool> {
    seq.graphs().iter().map(CommGraph::is_rooted).collect()
}

/// Maximal runs of consecutive rooted graphs with an identical root, of any length.
pub fn stable_runs(seq: &GraphSequence) -> Vec<StableWindow> {
    let mut runs: Vec<StableWindow> = Vec::new();
    for (round, root) in (1..).zip(seq.roots()) {
        match (root, runs.last_mut()) {
            (Some(root), Some(last)) if last.root == root && last.end + 1 == round => {
                last.end = round;
            }
            (Some(root), _) => runs.push(StableWindow {
                start: round,
                end: round,
                root,
            }),
            (None, _) => {}
        }
    }
    runs
}

/// Maximal stable-root runs of length at least `x`. The sequence belongs to
/// the eventual-stability class iff the result is non-empty.
pub fn check_stability(seq: &GraphSequence, x: u32) -> Vec<StableWindow> {
    stable_runs(seq)
        .into_iter()
        .filter(|w| w.len() >= x)
        .collect()
}

/// Forward propagation over `graphs`: returns the first `(q, p)` with
/// `q ∈ root` whose state from before the first graph does not reach `p`.
pub(crate) fn root_reaches_all(
    graphs: &[CommGraph],
    root: ProcessSet,
) -> Option<(ProcessId, ProcessId)> {
    let n = graphs.first()?.n();
    let everyone = ProcessSet::full(n);
    for q in root.iter() {
        let mut reached = ProcessSet::singleton(q);
        for g in graphs {
            let mut next = reached;
            for v in everyone.difference(reached).iter() {
                if !g.in_closed(v).intersection(reached).is_empty() {
                    next.insert(v);
                }
            }
            reached = next;
        }
        if let Some(p) = everyone.difference(reached).first() {
            return Some((q, p));
        }
    }
    None
}

/// Dynamic-diameter check: for every window of `d` consecutive graphs with
/// the same root `R`, every member of `R` must be in every process's causal
/// past across the window. Returns the first violation.
pub fn check_diam(seq: &GraphSequence, d: u32) -> Option<DiamViolation> {
    if d == 0 {
        return None;
    }
    for run in stable_runs(seq) {
        if run.len() < d {
            continue;
        }
        for r1 in run.start..=(run.end + 1 - d) {
            let window = &seq.graphs()[(r1 - 1) as usize..(r1 - 1 + d) as usize];
            if let Some((source, target)) = root_reaches_all(window, run.root) {
                return Some(DiamViolation {
                    window_start: r1,
                    window_end: r1 + d - 1,
                    root: run.root,
                    source,
                    target,
                });
            }
        }
    }
    None
}

/// First pair `(p, q)` without a common in-neighbour in `g`, if any.
pub fn nonsplit_violation(g: &CommGraph) -> Option<(ProcessId, ProcessId)> {
    let n = g.n();
    for p in 0..n {
        for q in (p + 1)..n {
            if g.in_closed(p).intersection(g.in_closed(q)).is_empty() {
                return Some((p, q));
            }
        }
    }
    None
}

/// Every pair of processes shares an in-neighbour in every round.
pub fn check_nonsplit(seq: &GraphSequence) -> Option<NonSplitViolation> {
    seq.rounds().find_map(|(round, g)| {
        nonsplit_violation(g).map(|(p, q)| NonSplitViolation { round, p, q })
    })
}

/// True iff every member of `root` has an edge to every other process.
pub fn root_broadcasts(g: &CommGraph, root: ProcessSet) -> bool {
    (0..g.n()).all(|v| root.is_subset(g.in_closed(v)))
}

/// Maximal runs of graphs that share a stable root `R` with every member of
/// `R` a star center, keeping runs of length at least `y`.
///
/// Self-loops of non-center processes are irrelevant here; see
/// [`check_uniform`] for the variant that forbids them.
pub fn check_star_window(seq: &GraphSequence, y: u32) -> Vec<StableWindow> {
    let mut runs: Vec<StableWindow> = Vec::new();
    for (round, g) in seq.rounds() {
        let root = g.root().filter(|&r| root_broadcasts(g, r));
        match (root, runs.last_mut()) {
            (Some(root), Some(last)) if last.root == root && last.end + 1 == round => {
                last.end = round;
            }
            (Some(root), _) => runs.push(StableWindow {
                start: round,
                end: round,
                root,
            }),
            (None, _) => {}
        }
    }
    runs.retain(|w| w.len() >= y);
    runs
}

/// The eventually-uniform round test under the explicit-loop reading: a
/// round qualifies when its stored edges are exactly the union of the
/// loop-free stars of some non-empty set `P`, so processes outside `P` send
/// nothing at all. Returns the first such round and its `P`.
pub fn check_uniform(seq: &GraphSequence) -> Option<(Round, ProcessSet)> {
    seq.rounds().find_map(|(round, g)| {
        let centers: ProcessSet = (0..g.n())
            .filter(|&p| !g.out_neighbors(p).is_empty())
            .collect();
        let exact = !centers.is_empty()
            && centers
                .iter()
                .all(|c| g.out_neighbors(c).len() == g.n() - 1)
            && g.edge_count()
                == (0..g.n())
                    .map(|v| centers.difference(ProcessSet::singleton(v)).len())
                    .sum::<usize>();
        // n = 1 has no edges to inspect; a single process is trivially uniform.
        if g.n() == 1 {
            return Some((round, ProcessSet::singleton(0)));
        }
        exact.then_some((round, centers))
    })
}

/// Full membership report for the eventually-stabilizing class with
/// parameters `d` and `x`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub n: usize,
    pub rounds: usize,
    #[serde(rename = "D")]
    pub diameter: u32,
    pub x: u32,
    pub rooted_ok: bool,
    pub first_unrooted_round: Option<Round>,
    pub diam_ok: bool,
    pub first_diam_violation: Option<DiamViolation>,
    pub stability_ok: bool,
    pub stability_windows: Vec<StableWindow>,
    pub nonsplit_ok: bool,
    pub first_nonsplit_violation: Option<NonSplitViolation>,
    pub star_windows: Vec<StableWindow>,
    pub member: bool,
}

pub fn membership_report(seq: &GraphSequence, d: u32, x: u32) -> MembershipReport {
    let rooted = check_rooted(seq);
    let first_unrooted_round = rooted.iter().position(|ok| !ok).map(|i| i as Round + 1);
    let first_diam_violation = check_diam(seq, d);
    let stability_windows = stable_runs(seq);
    let stability_ok = stability_windows.iter().any(|w| w.len() >= x);
    let first_nonsplit_violation = check_nonsplit(seq);
    let rooted_ok = first_unrooted_round.is_none();
    let diam_ok = first_diam_violation.is_none();
    MembershipReport {
        n: seq.n(),
        rounds: seq.len(),
        diameter: d,
        x,
        rooted_ok,
        first_unrooted_round,
        diam_ok,
        first_diam_violation,
        stability_ok,
        stability_windows,
        nonsplit_ok: first_nonsplit_violation.is_none(),
        first_nonsplit_violation,
        star_windows: check_star_window(seq, 1),
        member: rooted_ok && diam_ok && stability_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq_of(n: usize, graphs: Vec<CommGraph>) -> GraphSequence {
        GraphSequence::from_graphs(n, graphs).unwrap()
    }

    fn star(c: ProcessId, n: usize) -> CommGraph {
        CommGraph::star(c, n).unwrap()
    }

    #[test]
    fn rooted_flags_each_round() {
        let seq = seq_of(3, vec![star(0, 3), CommGraph::new(3).unwrap(), star(1, 3)]);
        assert_eq!(check_rooted(&seq), vec![true, false, true]);
    }

    #[test]
    fn stability_windows() {
        let seq = seq_of(3, vec![star(0, 3); 5]);
        let w = check_stability(&seq, 5);
        assert_eq!(
            w,
            vec![StableWindow {
                start: 1,
                end: 5,
                root: ProcessSet::singleton(0)
            }]
        );

        let alternating = seq_of(3, (0..6).map(|i| star(i % 2, 3)).collect());
        assert!(check_stability(&alternating, 2).is_empty());
        assert_eq!(check_stability(&alternating, 1).len(), 6);
    }

    #[test]
    fn diam_vacuous_without_windows() {
        let alternating = seq_of(4, (0..6).map(|i| star(i % 2, 4)).collect());
        assert_eq!(check_diam(&alternating, 2), None);
    }

    #[test]
    fn diam_detects_slow_chain() {
        // root {0} reaching only 1 in one round
        let chain = CommGraph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let seq = seq_of(3, vec![chain.clone(), star(1, 3), chain]);
        let v = check_diam(&seq, 1).unwrap();
        assert_eq!((v.window_start, v.source, v.target), (1, 0, 2));
        assert_eq!(check_diam(&seq_of(3, vec![star(0, 3)]), 1), None);
    }

    #[test]
    fn nonsplit_examples() {
        assert_eq!(check_nonsplit(&seq_of(3, vec![star(0, 3)])), None);
        let v = check_nonsplit(&seq_of(2, vec![CommGraph::new(2).unwrap()])).unwrap();
        assert_eq!((v.round, v.p, v.q), (1, 0, 1));
    }

    #[test]
    fn star_windows() {
        let seq = seq_of(3, vec![star(0, 3), star(0, 3)]);
        assert_eq!(check_star_window(&seq, 2).len(), 1);

        let two_cycle = CommGraph::from_edges(4, [(0, 1), (1, 0), (1, 2), (2, 3)]).unwrap();
        assert!(check_star_window(&seq_of(4, vec![two_cycle]), 1).is_empty());
    }

    #[test]
    fn uniform_requires_exact_stars() {
        let seq = seq_of(3, vec![star(0, 3)]);
        assert_eq!(check_uniform(&seq), Some((1, ProcessSet::singleton(0))));

        let mut g = star(0, 3);
        g.add_edge(1, 2).unwrap();
        assert_eq!(check_uniform(&seq_of(3, vec![g])), None);
    }
}
