//! Seeded random generation of admissible sequences.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::membership::{
    check_diam, check_nonsplit, check_star_window, root_reaches_all, stable_runs,
};
use super::{
    compound_sequence, scenario, AdversaryKind, AdversarySpec, StabilityStart, StableWindow,
};
use crate::error::{Error, Result};
use crate::graph::{CommGraph, GraphSequence, ProcessId, ProcessSet, Round};

/// Redraws allowed per window round before giving up.
pub const MAX_RETRIES: usize = 100;

/// A generated sequence together with its designated stable window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generated {
    pub sequence: GraphSequence,
    pub stable_window: Option<StableWindow>,
}

/// Random rooted graph whose unique root component is exactly `root`.
///
/// The root is wired as a random cycle plus extra internal edges, every
/// other process is attached below an already reachable one, and further
/// edges never enter the root from outside. At `density = 1.0` the root is
/// complete and every root member sends to everyone.
pub fn random_rooted_graph<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    root: ProcessSet,
    density: f64,
) -> CommGraph {
    let density = density.clamp(0.0, 1.0);
    let mut g = CommGraph::new(n).expect("n validated by caller");
    let mut members = root.to_vec();
    members.shuffle(rng);
    let add = |g: &mut CommGraph, u: ProcessId, v: ProcessId| {
        g.add_edge(u, v).expect("ids below n");
    };

    if members.len() > 1 {
        for (i, &u) in members.iter().enumerate() {
            add(&mut g, u, members[(i + 1) % members.len()]);
        }
    }
    for &u in &members {
        for &v in &members {
            if u != v && rng.gen_bool(density) {
                add(&mut g, u, v);
            }
        }
    }

    let mut outside = ProcessSet::full(n).difference(root).to_vec();
    outside.shuffle(rng);
    let mut reached = members.clone();
    for &v in &outside {
        let parent = reached[rng.gen_range(0..reached.len())];
        add(&mut g, parent, v);
        reached.push(v);
    }
    for &v in &outside {
        for &u in &members {
            if rng.gen_bool(density) {
                add(&mut g, u, v);
            }
        }
        for &u in &outside {
            if u != v && rng.gen_bool(0.15) {
                add(&mut g, u, v);
            }
        }
    }
    g
}

/// Uniform root size, uniform members, never one of `avoid` (when possible).
fn random_root<R: Rng + ?Sized>(rng: &mut R, n: usize, avoid: &[ProcessSet]) -> ProcessSet {
    loop {
        let size = rng.gen_range(1..=n);
        let root: ProcessSet = index::sample(rng, n, size).into_iter().collect();
        if n == 1 || !avoid.contains(&root) {
            return root;
        }
    }
}

fn window_start<R: Rng + ?Sized>(rng: &mut R, start: StabilityStart) -> Round {
    match start {
        StabilityStart::Round(r) => r,
        StabilityStart::RandomInRange { lo, hi } => rng.gen_range(lo..=hi),
    }
}

fn generation_error(constraint: impl Into<String>, attempts: usize) -> Error {
    Error::Generation {
        constraint: constraint.into(),
        attempts,
    }
}

/// A sequence in ROOTED ∩ DIAM(D) ∩ ◊STABILITY(x) with one designated
/// stable window of exactly `x` rounds.
///
/// Outside the window, same-root runs are kept shorter than both `D` and
/// `x`, so no `D`-window constrains them and the designated window is the
/// first stable run of length `x`. Inside it, each round is redrawn with
/// growing density until the `D`-window ending there reaches everyone.
pub fn generate_stable(spec: &AdversarySpec) -> Result<Generated> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, d, x) = (spec.n, spec.diameter, spec.x);
    let start = window_start(&mut rng, spec.stability_start);
    let end = start + x - 1;
    if spec.horizon < end {
        return Err(crate::error::invalid(format!(
            "horizon {} ends before the stable window {start}..={end}",
            spec.horizon
        )));
    }

    let window_root = random_root(&mut rng, n, &[]);
    let max_run = d.min(x) - 1;
    let mut graphs: Vec<CommGraph> = Vec::with_capacity(spec.horizon as usize);
    let mut prev_root: Option<ProcessSet> = None;
    let mut run_len = 0u32;

    for t in 1..=spec.horizon {
        let root;
        if (start..=end).contains(&t) {
            root = window_root;
            let mut attempt = 0;
            loop {
                let density = if d == 1 {
                    1.0
                } else {
                    attempt as f64 / (MAX_RETRIES - 1) as f64
                };
                graphs.push(random_rooted_graph(&mut rng, n, root, density));
                if t + 1 < start + d {
                    break;
                }
                let window = &graphs[(t - d) as usize..t as usize];
                if root_reaches_all(window, root).is_none() {
                    break;
                }
                graphs.pop();
                attempt += 1;
                if attempt == MAX_RETRIES {
                    return Err(generation_error(
                        format!("DIAM({d}) window ending at round {t}"),
                        attempt,
                    ));
                }
            }
        } else {
            let must_leave = t + 1 == start && prev_root == Some(window_root);
            let extend =
                prev_root.is_some() && run_len < max_run && !must_leave && rng.gen_bool(0.3);
            root = if extend {
                prev_root.expect("checked above")
            } else {
                let mut avoid: Vec<ProcessSet> = prev_root.into_iter().collect();
                if t + 1 == start || t == end + 1 {
                    avoid.push(window_root);
                }
                random_root(&mut rng, n, &avoid)
            };
            let density = if d == 1 { 1.0 } else { rng.gen_range(0.0..0.6) };
            graphs.push(random_rooted_graph(&mut rng, n, root, density));
        }
        run_len = if prev_root == Some(root) {
            run_len + 1
        } else {
            1
        };
        prev_root = Some(root);
    }

    let sequence = GraphSequence::from_graphs(n, graphs)?;
    let window = StableWindow {
        start,
        end,
        root: window_root,
    };
    validate_stable(&sequence, d, x, window, n)?;
    Ok(Generated {
        sequence,
        stable_window: Some(window),
    })
}

fn validate_stable(
    seq: &GraphSequence,
    d: u32,
    x: u32,
    window: StableWindow,
    n: usize,
) -> Result<()> {
    if let Some(r) = seq.graphs().iter().position(|g| !g.is_rooted()) {
        return Err(generation_error(format!("round {} not rooted", r + 1), 1));
    }
    if let Some(v) = check_diam(seq, d) {
        return Err(generation_error(
            format!(
                "DIAM({d}) violated in window {}..={}",
                v.window_start, v.window_end
            ),
            1,
        ));
    }
    let runs = stable_runs(seq);
    let found = if n == 1 {
        runs.iter().any(|w| w.len() >= x)
    } else {
        runs.contains(&window)
    };
    if !found {
        return Err(generation_error(
            format!(
                "designated stable window {}..={} missing",
                window.start, window.end
            ),
            1,
        ));
    }
    Ok(())
}

/// Rooted graphs whose root changes every round (when `n > 1`).
fn generate_rooted(spec: &AdversarySpec) -> Result<Generated> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut graphs = Vec::with_capacity(spec.horizon as usize);
    let mut prev: Option<ProcessSet> = None;
    for _ in 0..spec.horizon {
        let avoid: Vec<ProcessSet> = prev.into_iter().collect();
        let root = random_root(&mut rng, spec.n, &avoid);
        let density = if spec.diameter == 1 {
            1.0
        } else {
            rng.gen_range(0.0..0.6)
        };
        graphs.push(random_rooted_graph(&mut rng, spec.n, root, density));
        prev = Some(root);
    }
    Ok(Generated {
        sequence: GraphSequence::from_graphs(spec.n, graphs)?,
        stable_window: None,
    })
}

/// Generates the sequence described by `spec`, dispatching on its kind.
pub fn generate(spec: &AdversarySpec) -> Result<Generated> {
    spec.validate()?;
    match &spec.kind {
        AdversaryKind::StableD => generate_stable(spec),
        AdversaryKind::Rooted => generate_rooted(spec),
        AdversaryKind::NonSplitStarWindow { y } => {
            let block = (spec.n as u32 - 1).max(1);
            let raw_spec = AdversarySpec {
                x: (y + 1) * block,
                kind: AdversaryKind::StableD,
                ..spec.clone()
            };
            let raw = generate_stable(&raw_spec)?;
            let compounded = compound_sequence(&raw.sequence).sequence;
            if let Some(v) = check_nonsplit(&compounded) {
                return Err(generation_error(
                    format!("compound round {} splits {} and {}", v.round, v.p, v.q),
                    1,
                ));
            }
            let stable_window = check_star_window(&compounded, *y).first().copied();
            if stable_window.is_none() {
                return Err(generation_error(
                    format!("no compound star window of length {y}"),
                    1,
                ));
            }
            Ok(Generated {
                sequence: compounded,
                stable_window,
            })
        }
        AdversaryKind::Scripted { name, params } => Ok(Generated {
            sequence: scenario(*name, params)?,
            stable_window: None,
        }),
    }
}
