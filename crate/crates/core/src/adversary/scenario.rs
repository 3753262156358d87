//! Fixed graph sequences from the lower-bound constructions.
//!
//! Processes are numbered `p_1..p_n` in the constructions and map to ids
//! `0..n-1`. Unless stated otherwise, every "depicted" process of a graph
//! has an edge to every process that is not depicted.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::{CommGraph, GraphSequence, ProcessId, ProcessSet, Round};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioName {
    #[serde(rename = "thm1-sigma1")]
    Thm1Sigma1,
    #[serde(rename = "thm1-sigma2")]
    Thm1Sigma2,
    #[serde(rename = "dimposs-Ga")]
    DimpossGa,
    #[serde(rename = "dimposs-Gb")]
    DimpossGb,
    #[serde(rename = "dimposs-Gc")]
    DimpossGc,
    #[serde(rename = "dimposs-Gd")]
    DimpossGd,
    #[serde(rename = "lossy-link")]
    LossyLink,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 7] = [
        ScenarioName::Thm1Sigma1,
        ScenarioName::Thm1Sigma2,
        ScenarioName::DimpossGa,
        ScenarioName::DimpossGb,
        ScenarioName::DimpossGc,
        ScenarioName::DimpossGd,
        ScenarioName::LossyLink,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::Thm1Sigma1 => "thm1-sigma1",
            ScenarioName::Thm1Sigma2 => "thm1-sigma2",
            ScenarioName::DimpossGa => "dimposs-Ga",
            ScenarioName::DimpossGb => "dimposs-Gb",
            ScenarioName::DimpossGc => "dimposs-Gc",
            ScenarioName::DimpossGd => "dimposs-Gd",
            ScenarioName::LossyLink => "lossy-link",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|name| name.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown scenario {s:?}")))
    }
}

/// Whether an alternating ("dotted") edge is present in the first round of
/// its block. Afterwards it toggles every round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DottedPhase {
    #[default]
    Present,
    Absent,
}

impl DottedPhase {
    fn present(self, block_start: Round, round: Round) -> bool {
        let even = (round - block_start).is_multiple_of(2);
        match self {
            DottedPhase::Present => even,
            DottedPhase::Absent => !even,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub n: usize,
    #[serde(rename = "D")]
    pub diameter: u32,
    /// Last round of the alternating block in the second sequence of the
    /// uniform construction.
    pub tau: Option<Round>,
    pub horizon: Option<Round>,
    pub phase: DottedPhase,
    /// Center of the star continuation in the `dimposs-*` scenarios.
    pub center: Option<ProcessId>,
    pub seed: u64,
}

impl ScenarioParams {
    pub fn new(n: usize, diameter: u32) -> Self {
        Self {
            n,
            diameter,
            ..Self::default()
        }
    }

    fn tau(&self) -> Round {
        self.tau.unwrap_or(2 * self.diameter + 2)
    }
}

/// Builds one graph of a construction: explicit edges over 1-based labels
/// plus the depicted-to-undepicted completion.
struct Figure {
    n: usize,
    edges: Vec<(usize, usize)>,
    depicted: ProcessSet,
}

impl Figure {
    fn new(n: usize) -> Self {
        Self {
            n,
            edges: Vec::new(),
            depicted: ProcessSet::empty(),
        }
    }

    fn edge(&mut self, from: usize, to: usize) -> &mut Self {
        self.depicted.insert(from - 1);
        self.depicted.insert(to - 1);
        self.edges.push((from - 1, to - 1));
        self
    }

    fn chain(&mut self, labels: impl IntoIterator<Item = usize>) -> &mut Self {
        let labels: Vec<usize> = labels.into_iter().collect();
        for pair in labels.windows(2) {
            self.edge(pair[0], pair[1]);
        }
        for &l in &labels {
            self.depicted.insert(l - 1);
        }
        self
    }

    fn build(&self) -> CommGraph {
        let mut g = CommGraph::from_edges(self.n, self.edges.iter().copied())
            .expect("labels checked against n");
        let hidden = ProcessSet::full(self.n).difference(self.depicted);
        for u in self.depicted.iter() {
            for v in hidden.iter() {
                g.add_edge(u, v).expect("ids below n");
            }
        }
        g
    }
}

fn thm1_check(p: &ScenarioParams) -> Result<()> {
    let d = p.diameter as usize;
    if d < 1 {
        return Err(invalid("D must be at least 1"));
    }
    if p.n <= d + 2 {
        return Err(invalid(format!(
            "uniform construction needs n > D + 2, got n = {}, D = {d}",
            p.n
        )));
    }
    if p.tau() + 1 < 2 * p.diameter {
        return Err(invalid(format!(
            "tau = {} must be at least 2D - 1 = {}",
            p.tau(),
            2 * d - 1
        )));
    }
    Ok(())
}

fn sigma1(p: &ScenarioParams, t: Round) -> CommGraph {
    let d = p.diameter as usize;
    let mut f = Figure::new(p.n);
    if t < 2 * p.diameter {
        f.chain(1..=d).edge(d, d + 1).edge(d, d + 2);
    } else {
        f.edge(d + 1, d + 2).edge(d + 2, 1).chain(1..=d);
        if p.phase.present(2 * p.diameter, t) {
            f.edge(d + 2, d + 1);
        }
    }
    f.build()
}

fn sigma2(p: &ScenarioParams, t: Round) -> CommGraph {
    let (d, n) = (p.diameter as usize, p.n);
    let mut f = Figure::new(n);
    if t < 2 * p.diameter {
        f.chain(1..=d)
            .edge(d, d + 1)
            .edge(d, d + 2)
            .chain(d + 2..=n);
        if t >= p.diameter && p.phase.present(p.diameter, t) {
            f.edge(2, 1);
        }
    } else if t <= p.tau() {
        f.edge(d + 1, d + 2)
            .edge(d + 2, 1)
            .chain(1..=d)
            .edge(d, d + 3)
            .chain(d + 3..=n);
        if p.phase.present(2 * p.diameter, t) {
            f.edge(d + 2, d + 1);
        }
    } else {
        f.chain([n]);
    }
    f.build()
}

fn dimposs(p: &ScenarioParams, which: ScenarioName, t: Round) -> CommGraph {
    let d = p.diameter as usize;
    if t > p.diameter {
        let center = p.center.unwrap_or(d);
        return CommGraph::star(center, p.n).expect("center checked");
    }
    let mut f = Figure::new(p.n);
    match which {
        ScenarioName::DimpossGa => {
            f.chain(1..=d + 1);
        }
        ScenarioName::DimpossGb => {
            f.edge(2, 1).chain(1..=d + 1);
        }
        ScenarioName::DimpossGc => {
            f.edge(1, 2)
                .edge(2, 1)
                .chain(std::iter::once(1).chain(3..=d + 1));
        }
        ScenarioName::DimpossGd => {
            f.edge(2, 1).chain(std::iter::once(1).chain(3..=d + 1));
        }
        _ => unreachable!("dimposs called with {which}"),
    }
    f.build()
}

/// Builds the named construction.
///
/// * `thm1-sigma1`: chain `p_1 -> .. -> p_D` feeding `p_{D+1}` and
///   `p_{D+2}` for rounds `1..=2D-1`, then `p_{D+1} -> p_{D+2} -> p_1 -> ..
///   -> p_D` with an alternating edge `p_{D+2} -> p_{D+1}`.
/// * `thm1-sigma2`: the same chain extended by `p_{D+2} -> .. -> p_n`, an
///   alternating `p_2 -> p_1` during rounds `D..=2D-1`, the alternating
///   gadget continued by `p_D -> p_{D+3} -> .. -> p_n` up to `tau`, and the
///   star of `p_n` afterwards.
/// * `dimposs-G*`: `D` copies of the named graph followed by a star.
/// * `lossy-link`: one of `0 -> 1` and `1 -> 0` per round, both sending to
///   everyone else.
pub fn scenario(name: ScenarioName, params: &ScenarioParams) -> Result<GraphSequence> {
    let n = params.n;
    crate::graph::CommGraph::new(n)?;
    let d = params.diameter;
    let graphs: Vec<CommGraph> = match name {
        ScenarioName::Thm1Sigma1 | ScenarioName::Thm1Sigma2 => {
            thm1_check(params)?;
            let horizon = params.horizon.unwrap_or(params.tau() + 2 * d);
            (1..=horizon)
                .map(|t| {
                    if name == ScenarioName::Thm1Sigma1 {
                        sigma1(params, t)
                    } else {
                        sigma2(params, t)
                    }
                })
                .collect()
        }
        ScenarioName::DimpossGa
        | ScenarioName::DimpossGb
        | ScenarioName::DimpossGc
        | ScenarioName::DimpossGd => {
            if d < 1 || n < d as usize + 1 {
                return Err(invalid(format!(
                    "D-window constructions need 1 <= D and n >= D + 1, got n = {n}, D = {d}"
                )));
            }
            if let Some(c) = params.center {
                if c >= n {
                    return Err(invalid(format!("star center {c} out of range")));
                }
            }
            let horizon = params.horizon.unwrap_or(3 * d);
            (1..=horizon).map(|t| dimposs(params, name, t)).collect()
        }
        ScenarioName::LossyLink => {
            if n < 2 {
                return Err(invalid("lossy link needs n >= 2"));
            }
            let horizon = params.horizon.unwrap_or(100);
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            (1..=horizon)
                .map(|_| {
                    let mut g = CommGraph::new(n).expect("n checked");
                    let (u, v) = if rng.gen_bool(0.5) { (0, 1) } else { (1, 0) };
                    g.add_edge(u, v).expect("ids below n");
                    for w in 2..n {
                        g.add_edge(0, w).expect("ids below n");
                        g.add_edge(1, w).expect("ids below n");
                    }
                    g
                })
                .collect()
        }
    };
    GraphSequence::from_graphs(n, graphs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{check_diam, check_rooted, check_stability};

    fn set(ids: &[usize]) -> ProcessSet {
        ids.iter().copied().collect()
    }

    #[test]
    fn names_round_trip() {
        for name in ScenarioName::ALL {
            assert_eq!(name.as_str().parse::<ScenarioName>().unwrap(), name);
            let json = serde_json::to_string(&name).unwrap();
            assert_eq!(json, format!("\"{}\"", name.as_str()));
        }
        assert!("thm2".parse::<ScenarioName>().is_err());
    }

    #[test]
    fn sigma1_blocks() {
        let params = ScenarioParams::new(8, 2);
        let seq = scenario(ScenarioName::Thm1Sigma1, &params).unwrap();
        let chain = seq.graph(1).unwrap();
        assert_eq!(seq.graph(3).unwrap(), chain);
        assert!(chain.has_edge(0, 1) && chain.has_edge(1, 2) && chain.has_edge(1, 3));
        assert!((0..4).all(|u| (4..8).all(|v| chain.has_edge(u, v))));
        assert_eq!(chain.root(), Some(set(&[0])));

        let g4 = seq.graph(4).unwrap();
        assert!(g4.has_edge(2, 3) && g4.has_edge(3, 0) && g4.has_edge(0, 1));
        assert!(g4.has_edge(3, 2));
        assert!(!seq.graph(5).unwrap().has_edge(3, 2));
        assert!(seq.graph(6).unwrap().has_edge(3, 2));
        assert_eq!(g4.root(), Some(set(&[2, 3])));
        assert_eq!(seq.graph(5).unwrap().root(), Some(set(&[2])));
    }

    #[test]
    fn sigma1_is_rooted_with_short_stability() {
        let mut params = ScenarioParams::new(7, 2);
        params.horizon = Some(10);
        let seq = scenario(ScenarioName::Thm1Sigma1, &params).unwrap();
        assert!(check_rooted(&seq).into_iter().all(|ok| ok));
        assert_eq!(check_diam(&seq, 2), None);
        assert_eq!(check_stability(&seq, 3).len(), 1);
    }

    #[test]
    fn sigma2_suffix_is_pn_rooted() {
        let params = ScenarioParams {
            tau: Some(6),
            horizon: Some(12),
            ..ScenarioParams::new(12, 2)
        };
        let seq = scenario(ScenarioName::Thm1Sigma2, &params).unwrap();
        let windows = check_stability(&seq, 3);
        assert!(windows.contains(&crate::adversary::StableWindow {
            start: 7,
            end: 12,
            root: set(&[11]),
        }));
        assert!(check_rooted(&seq).into_iter().all(|ok| ok));
        assert_eq!(check_diam(&seq, 2), None);
    }

    #[test]
    fn thm1_parameter_errors() {
        assert!(scenario(ScenarioName::Thm1Sigma1, &ScenarioParams::new(4, 2)).is_err());
        let bad_tau = ScenarioParams {
            tau: Some(2),
            ..ScenarioParams::new(8, 2)
        };
        assert!(scenario(ScenarioName::Thm1Sigma2, &bad_tau).is_err());
    }

    #[test]
    fn dimposs_graphs() {
        let params = ScenarioParams::new(6, 3);
        let ga = scenario(ScenarioName::DimpossGa, &params).unwrap();
        let g = ga.graph(1).unwrap();
        let mut expected: Vec<(usize, usize)> = vec![(0, 1), (1, 2), (2, 3)];
        for u in 0..4 {
            expected.extend([(u, 4), (u, 5)]);
        }
        expected.sort_unstable();
        assert_eq!(g.edges(), expected);
        assert_eq!(g.root_components(), vec![set(&[0])]);

        let gb = scenario(ScenarioName::DimpossGb, &params).unwrap();
        assert_eq!(gb.graph(1).unwrap().root(), Some(set(&[0, 1])));
        let gc = scenario(ScenarioName::DimpossGc, &params).unwrap();
        let c = gc.graph(1).unwrap();
        assert!(c.has_edge(0, 2) && !c.has_edge(1, 2));
        assert_eq!(c.root(), Some(set(&[0, 1])));
        let gd = scenario(ScenarioName::DimpossGd, &params).unwrap();
        assert_eq!(gd.graph(3).unwrap().root(), Some(set(&[1])));
        assert_eq!(gd.graph(4).unwrap().root(), Some(set(&[3])));
    }

    #[test]
    fn lossy_link_has_one_direction_each_round() {
        let params = ScenarioParams {
            horizon: Some(50),
            seed: 4,
            ..ScenarioParams::new(2, 1)
        };
        let seq = scenario(ScenarioName::LossyLink, &params).unwrap();
        for (_, g) in seq.rounds() {
            assert_eq!(g.edge_count(), 1);
        }
        assert_eq!(seq, scenario(ScenarioName::LossyLink, &params).unwrap());
    }
}
