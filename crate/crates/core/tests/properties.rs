mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rooted_consensus::adversary::{
    check_diam, check_nonsplit, check_rooted, check_stability, check_star_window,
    compound_sequence, generate, generate_stable, random_rooted_graph, AdversaryKind,
    AdversarySpec, StabilityStart,
};
use rooted_consensus::algorithms::{Alg1, Alg2, PruneWitness};
use rooted_consensus::detection::{estimate_root, RootEstimate};
use rooted_consensus::engine::{
    run, run_with, views_equal_until, Algorithm, ProcessView, RoundOutput, RunOptions, Value,
};
use rooted_consensus::verification::{check_detection_soundness, verify_alg1, verify_alg2};
use rooted_consensus::{CommGraph, GraphSequence, ProcessId, ProcessSet, Round};

fn graph(max_n: usize) -> impl Strategy<Value = CommGraph> {
    (1..=max_n).prop_flat_map(|n| {
        let pairs = n * (n - 1);
        let mask = if pairs == 0 { 0 } else { (1u64 << pairs) - 1 };
        (Just(n), 0..=mask).prop_map(|(n, bits)| common::graph_from_bits(n, bits))
    })
}

fn sequence(max_n: usize, max_len: usize) -> impl Strategy<Value = GraphSequence> {
    (1..=max_n, 1..=max_len).prop_flat_map(|(n, len)| {
        let pairs = n * (n - 1);
        let mask = if pairs == 0 { 0 } else { (1u64 << pairs) - 1 };
        prop::collection::vec(0..=mask, len).prop_map(move |bits| {
            let graphs = bits
                .into_iter()
                .map(|b| common::graph_from_bits(n, b))
                .collect();
            GraphSequence::from_graphs(n, graphs).unwrap()
        })
    })
}

/// Sequence of rooted graphs drawn by the library's rooted sampler.
fn rooted_sequence(max_n: usize, max_len: usize) -> impl Strategy<Value = GraphSequence> {
    (1..=max_n, 1..=max_len, any::<u64>()).prop_map(|(n, len, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let graphs = (0..len)
            .map(|i| {
                let root = ProcessSet::singleton((seed as usize + i) % n);
                random_rooted_graph(&mut rng, n, root, 0.3)
            })
            .collect();
        GraphSequence::from_graphs(n, graphs).unwrap()
    })
}

/// Every process accumulates one nonce per (process, round) it has heard of.
struct Nonces;

impl Algorithm for Nonces {
    type State = BTreeSet<(ProcessId, Round)>;
    type Record = ();

    fn initial_state(&self, pid: ProcessId, _n: usize, _input: Value) -> Self::State {
        [(pid, 0)].into_iter().collect()
    }

    fn round(
        &self,
        view: &ProcessView<'_, Self::State>,
    ) -> Result<RoundOutput<Self::State>, String> {
        let r = view.round();
        let mut seen = view.own_state().clone();
        for q in view.heard_since(r - 1).iter() {
            seen.extend(view.known_state(q, r - 1).ok_or("missing")?.iter().copied());
        }
        seen.insert((view.owner(), r));
        Ok(RoundOutput {
            state: seen,
            detected_root: RootEstimate::Unknown,
        })
    }

    fn decision(&self, _: &Self::State) -> Option<Value> {
        None
    }

    fn record(&self, _: &Self::State) {}

    fn retention(&self) -> Round {
        1
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn root_components_match_subset_enumeration(g in graph(6)) {
        let lib: BTreeSet<BTreeSet<usize>> = g.root_components().into_iter().map(common::to_btree).collect();
        prop_assert_eq!(&lib, &common::root_components(&g));
        prop_assert!(!lib.is_empty());
        let mut covered = BTreeSet::new();
        for c in &lib {
            prop_assert!(c.iter().all(|v| covered.insert(*v)), "components overlap");
        }
        prop_assert_eq!(g.is_rooted(), lib.len() == 1);
    }

    #[test]
    fn compound_is_the_matrix_product(a in graph(6), bits in any::<u64>()) {
        let n = a.n();
        let b = common::graph_from_bits(n, bits & ((1u64 << (n * (n - 1))) - 1));
        let lib = a.compound(&b).unwrap();
        let oracle = common::from_matrix(&common::mat_mul(&common::matrix(&a), &common::matrix(&b)));
        prop_assert_eq!(lib, oracle);
    }

    #[test]
    fn compound_is_associative(seq in sequence(6, 3)) {
        prop_assume!(seq.len() == 3);
        let [a, b, c] = [&seq.graphs()[0], &seq.graphs()[1], &seq.graphs()[2]];
        let left = a.compound(b).unwrap().compound(c).unwrap();
        let right = a.compound(&b.compound(c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn causal_past_matches_products_and_grows(seq in sequence(5, 8), p in 0usize..5, a in 0u32..8) {
        let p = p % seq.n();
        let len = seq.last_round();
        let a = a.min(len);
        let mut previous = ProcessSet::empty();
        for b in a..=len {
            let cp = seq.causal_past(p, a, b).unwrap();
            prop_assert_eq!(common::to_btree(cp), common::causal_past(&seq, p, a, b));
            prop_assert!(cp.contains(p));
            prop_assert!(previous.is_subset(cp));
            previous = cp;
        }
        prop_assert!(seq.causal_past(p, len, len).unwrap() == ProcessSet::singleton(p));
    }

    #[test]
    fn full_information_knowledge_is_the_causal_past(seq in sequence(5, 20)) {
        let n = seq.n();
        let exec = run(&Nonces, &vec![0; n], &seq).unwrap();
        for r in 1..=exec.rounds() {
            for p in 0..n {
                let view = exec.view(p, r);
                for q in 0..n {
                    let heard: Option<Round> = (0..=r)
                        .filter(|&s| common::causal_past(&seq, p, s, r).contains(&q))
                        .max();
                    prop_assert_eq!(view.last_heard(q), heard, "p {} q {} r {}", p, q, r);
                    for s in 0..=r {
                        let in_cp = common::causal_past(&seq, p, s, r).contains(&q);
                        if s < r {
                            prop_assert_eq!(view.known_state(q, s).is_some(), in_cp);
                        }
                        if s >= 1 {
                            prop_assert_eq!(view.known_in_edges(q, s).is_some(), in_cp);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn nonces_travel_only_along_edges(seq in sequence(5, 12)) {
        let n = seq.n();
        let exec = run(&Nonces, &vec![0; n], &seq).unwrap();
        for r in 1..=exec.rounds() {
            for p in 0..n {
                let expected: BTreeSet<(usize, u32)> = (0..=r)
                    .flat_map(|s| common::causal_past(&seq, p, s, r).into_iter().map(move |q| (q, s)))
                    .collect();
                prop_assert_eq!(exec.state(p, r), &expected);
            }
        }
    }

    #[test]
    fn runs_are_deterministic(seq in sequence(4, 15), seed in any::<u64>()) {
        let n = seq.n();
        let inputs: Vec<Value> = (0..n as u64).map(|i| (seed >> i) & 1).collect();
        let alg = Alg1::new(n as u32, 1);
        let a = run(&alg, &inputs, &seq).unwrap();
        let b = run(&alg, &inputs, &seq).unwrap();
        prop_assert_eq!(a.trace_string(&alg), b.trace_string(&alg));
        prop_assert!(views_equal_until(&a, &b, 0, a.rounds()));
    }

    #[test]
    fn detection_is_sound_and_stable_on_rooted_graphs(seq in rooted_sequence(5, 12)) {
        let n = seq.n();
        let exec = run(&Nonces, &vec![0; n], &seq).unwrap();
        prop_assert!(check_detection_soundness(&exec, n as u32).is_empty());
        for p in 0..n {
            for s in 1..=exec.rounds() {
                let mut known: Option<ProcessSet> = None;
                for r in s..=exec.rounds() {
                    let est = estimate_root(&exec.view(p, r), s).unwrap();
                    if let Some(prev) = known {
                        prop_assert_eq!(est, RootEstimate::Known(prev), "estimate lost or changed");
                    }
                    if let RootEstimate::Known(root) = est {
                        prop_assert_eq!(Some(root), seq.graph(s).unwrap().root());
                        known = Some(root);
                    }
                }
            }
        }
    }

    #[test]
    fn compounding_rooted_blocks_is_non_split(seq in rooted_sequence(6, 12)) {
        let compounded = compound_sequence(&seq);
        prop_assert!(check_nonsplit(&compounded.sequence).is_none());
        let block = (seq.n() - 1).max(1);
        prop_assert_eq!(compounded.sequence.len(), seq.len() / block);
        prop_assert_eq!(compounded.dropped_rounds, seq.len() % block);
    }

    #[test]
    fn jsonl_round_trips(seq in sequence(6, 6)) {
        let text = seq.to_jsonl();
        prop_assert_eq!(GraphSequence::read_jsonl(text.as_bytes()).unwrap(), seq);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn generated_sequences_validate(n in 2usize..=7, d_frac in 0.0f64..1.0, extra in 0u32..4, seed in any::<u64>()) {
        let d = 1 + ((n - 1) as f64 * d_frac) as u32 % (n as u32 - 1);
        let x = d + 1 + extra;
        let spec = AdversarySpec::stable(n, d, x, 3 * n as u32 + x + 10, seed);
        let gen = generate_stable(&spec).unwrap();
        let seq = &gen.sequence;
        prop_assert_eq!(seq.len(), spec.horizon as usize);
        prop_assert!(check_rooted(seq).into_iter().all(|ok| ok));
        prop_assert!(check_diam(seq, d).is_none());
        prop_assert!(common::diam_holds(seq, d));
        prop_assert!(seq.graphs().iter().all(common::is_rooted));
        let w = gen.stable_window.unwrap();
        prop_assert_eq!(w.len(), x);
        prop_assert!(check_stability(seq, x).iter().any(|v| v.start <= w.start && w.end <= v.end));
        for r in w.start..=w.end {
            prop_assert_eq!(seq.graph(r).unwrap().root(), Some(w.root));
        }
    }

    #[test]
    fn alg1_is_safe_and_truncation_invariant(n in 2usize..=4, seed in any::<u64>()) {
        let d = n as u32 - 1;
        let alg = Alg1::new(n as u32, d);
        let spec = AdversarySpec::stable(n, d, d + 1, 3 * n as u32 + d + alg.decision_delay() + 5, seed);
        let seq = generate_stable(&spec).unwrap().sequence;
        let inputs: Vec<Value> = (0..n as u64).map(|i| (seed >> i) & 1).collect();
        let full = run(&alg, &inputs, &seq).unwrap();
        let cut = run_with(&alg, &inputs, &seq, RunOptions { truncate: true }).unwrap();
        prop_assert_eq!(full.trace_string(&alg), cut.trace_string(&alg));
        let verdict = verify_alg1(&alg, &full, None);
        prop_assert!(verdict.passed(), "{:?}", verdict);
        let min = alg.with_prune(PruneWitness::Min);
        prop_assert!(verify_alg1(&min, &run(&min, &inputs, &seq).unwrap(), None).safe());
    }

    #[test]
    fn alg2_is_safe_on_generated_star_window_sequences(n in 3usize..=5, seed in any::<u64>()) {
        let spec = AdversarySpec {
            n,
            diameter: n as u32 - 1,
            x: 3 * (n as u32 - 1),
            kind: AdversaryKind::NonSplitStarWindow { y: 2 },
            stability_start: StabilityStart::RandomInRange { lo: 1, hi: 3 * n as u32 },
            horizon: 9 * n as u32 + 12 * (n as u32 - 1),
            seed,
        };
        let seq = generate(&spec).unwrap().sequence;
        prop_assert!(check_nonsplit(&seq).is_none());
        let star = check_star_window(&seq, 2);
        prop_assert!(!star.is_empty());
        let inputs: Vec<Value> = (0..n as u64).map(|i| (seed >> (2 * i)) & 3).collect();
        let exec = run(&Alg2, &inputs, &seq).unwrap();
        let verdict = verify_alg2(&Alg2, &exec, star[0].start + 3);
        prop_assert!(verdict.passed(), "{:?}", verdict);
    }
}

/// Two processes, alternating single-edge graphs, then a two-round star
/// suffix. Every graph is non-split and the suffix is a star window, yet
/// process 0 decides its own vote in round 3 while process 1 adopts its own
/// proposal from the root it detects for round 2 and decides it in round 4.
/// The stale vote of process 0 survives a round in which the detected root
/// held no vote, which the unanimity rule does not account for.
#[test]
fn alg2_stale_vote_breaks_agreement_on_two_processes() {
    let forward = CommGraph::from_edges(2, [(0, 1)]).unwrap();
    let backward = CommGraph::from_edges(2, [(1, 0)]).unwrap();
    let graphs = vec![
        forward.clone(),
        backward.clone(),
        forward.clone(),
        backward,
        forward.clone(),
        forward,
    ];
    let seq = GraphSequence::from_graphs(2, graphs).unwrap();
    assert!(check_nonsplit(&seq).is_none());
    assert!(!check_star_window(&seq, 2).is_empty());

    let exec = run(&Alg2, &[0, 1], &seq).unwrap();
    assert_eq!(exec.decision_of(&Alg2, 0), Some((3, 0)));
    assert_eq!(exec.decision_of(&Alg2, 1), Some((4, 1)));
    let verdict = rooted_consensus::verification::check_consensus(&Alg2, &exec, exec.rounds());
    assert!(!verdict.agreement_ok());
}
