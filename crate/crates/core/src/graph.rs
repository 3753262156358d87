//! Directed communication graphs and the machinery built on them: root
//! components, compound graphs and causal pasts over graph sequences.
//!
//! Self-loops `(p, p)` are never stored. Every query treats them as present,
//! so `in_neighborhood(p)` always contains `p` and the compound of two graphs
//! is the boolean product of their adjacency matrices with unit diagonals.
//!
//! Rounds are 1-indexed at the public surface: round `r` of a
//! [`GraphSequence`] is `graphs()[r - 1]`. Round 0 denotes the initial
//! configuration and never has a graph.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};

/// Index of a process in `0..n`.
pub type ProcessId = usize;

/// Round number. Round 0 is the initial configuration.
pub type Round = u32;

/// Largest supported system size; process sets are 64-bit masks.
pub const MAX_PROCESSES: usize = 64;

/// A set of process ids backed by a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct ProcessSet(u64);

impl ProcessSet {
    pub const fn empty() -> Self {
        Self(0)
    }

    pub fn singleton(p: ProcessId) -> Self {
        debug_assert!(p < MAX_PROCESSES);
        Self(1 << p)
    }

    /// `{0, ..., n-1}`.
    pub fn full(n: usize) -> Self {
        debug_assert!(n <= MAX_PROCESSES);
        if n == MAX_PROCESSES {
            Self(u64::MAX)
        } else {
            Self((1u64 << n) - 1)
        }
    }

    pub const fn from_bits(bits: u64) -> Self {
        Self(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub fn insert(&mut self, p: ProcessId) {
        debug_assert!(p < MAX_PROCESSES);
        self.0 |= 1 << p;
    }

    pub fn remove(&mut self, p: ProcessId) {
        self.0 &= !(1 << p);
    }

    pub fn contains(self, p: ProcessId) -> bool {
        p < MAX_PROCESSES && self.0 & (1 << p) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(self, other: Self) -> Self {
        Self(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        Self(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        Self(self.0 & !other.0)
    }

    /// Smallest member, if any.
    pub fn first(self) -> Option<ProcessId> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as ProcessId)
    }

    /// Members in increasing order.
    pub fn iter(self) -> impl Iterator<Item = ProcessId> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let p = bits.trailing_zeros() as ProcessId;
                bits &= bits - 1;
                Some(p)
            }
        })
    }

    pub fn to_vec(self) -> Vec<ProcessId> {
        self.iter().collect()
    }
}

impl FromIterator<ProcessId> for ProcessSet {
    fn from_iter<I: IntoIterator<Item = ProcessId>>(iter: I) -> Self {
        let mut set = Self::empty();
        for p in iter {
            set.insert(p);
        }
        set
    }
}

impl fmt::Debug for ProcessSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl Serialize for ProcessSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for ProcessSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let ids = Vec::<ProcessId>::deserialize(deserializer)?;
        if let Some(bad) = ids.iter().find(|&&p| p >= MAX_PROCESSES) {
            return Err(serde::de::Error::custom(format!(
                "process id {bad} exceeds the supported maximum"
            )));
        }
        Ok(ids.into_iter().collect())
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 || n > MAX_PROCESSES {
        return Err(invalid(format!(
            "process count must be in 1..={MAX_PROCESSES}, got {n}"
        )));
    }
    Ok(())
}

/// One round's communication graph.
///
/// `in_sets[v]` holds the senders `u != v` whose round message reaches `v`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CommGraph {
    n: usize,
    in_sets: Vec<ProcessSet>,
}

impl CommGraph {
    /// The graph containing only the implicit self-loops.
    pub fn new(n: usize) -> Result<Self> {
        check_n(n)?;
        Ok(Self {
            n,
            in_sets: vec![ProcessSet::empty(); n],
        })
    }

    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (ProcessId, ProcessId)>,
    {
        let mut g = Self::new(n)?;
        for (u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    /// Star graph: the center has an edge to every other process.
    pub fn star(center: ProcessId, n: usize) -> Result<Self> {
        let mut g = Self::new(n)?;
        g.check_pid(center)?;
        for q in (0..n).filter(|&q| q != center) {
            g.in_sets[q].insert(center);
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn check_pid(&self, p: ProcessId) -> Result<()> {
        if p >= self.n {
            return Err(invalid(format!(
                "process {p} out of range for n = {}",
                self.n
            )));
        }
        Ok(())
    }

    /// Adds `u -> v`. Self-loops are accepted and ignored.
    pub fn add_edge(&mut self, u: ProcessId, v: ProcessId) -> Result<()> {
        self.check_pid(u)?;
        self.check_pid(v)?;
        if u != v {
            self.in_sets[v].insert(u);
        }
        Ok(())
    }

    pub fn remove_edge(&mut self, u: ProcessId, v: ProcessId) {
        if v < self.n {
            self.in_sets[v].remove(u);
        }
    }

    /// Edge test with self-loop semantics.
    pub fn has_edge(&self, u: ProcessId, v: ProcessId) -> bool {
        u < self.n && v < self.n && (u == v || self.in_sets[v].contains(u))
    }

    /// Stored edges (no self-loops), sorted by `(u, v)`.
    pub fn edges(&self) -> Vec<(ProcessId, ProcessId)> {
        let mut edges: Vec<_> = (0..self.n)
            .flat_map(|v| self.in_sets[v].iter().map(move |u| (u, v)))
            .collect();
        edges.sort_unstable();
        edges
    }

    pub fn edge_count(&self) -> usize {
        self.in_sets.iter().map(|s| s.len()).sum()
    }

    /// `IN_p(G)`, including `p` itself.
    pub fn in_neighborhood(&self, p: ProcessId) -> Result<ProcessSet> {
        self.check_pid(p)?;
        Ok(self.in_closed(p))
    }

    /// Unchecked `IN_p(G)` including `p`.
    pub(crate) fn in_closed(&self, p: ProcessId) -> ProcessSet {
        let mut s = self.in_sets[p];
        s.insert(p);
        s
    }

    /// Receivers of `p`'s message other than `p`.
    pub fn out_neighbors(&self, p: ProcessId) -> ProcessSet {
        (0..self.n)
            .filter(|&v| self.in_sets[v].contains(p))
            .collect()
    }

    /// All root components: the source strongly connected components of
    /// the graph. Never empty.
    pub fn root_components(&self) -> Vec<ProcessSet> {
        source_components(&self.in_sets)
    }

    pub fn is_rooted(&self) -> bool {
        self.root_components().len() == 1
    }

    /// The root component of a rooted graph, `None` if the graph has several.
    pub fn root(&self) -> Option<ProcessSet> {
        let roots = self.root_components();
        (roots.len() == 1).then(|| roots[0])
    }

    /// `self ∘ other`: `(p, q)` is an edge iff `p -> p'` in `self` and
    /// `p' -> q` in `other` for some `p'`, self-loops included.
    pub fn compound(&self, other: &CommGraph) -> Result<CommGraph> {
        if self.n != other.n {
            return Err(invalid(format!(
                "cannot compound graphs over {} and {} processes",
                self.n, other.n
            )));
        }
        let in_sets = (0..self.n)
            .map(|q| {
                let mut acc = ProcessSet::empty();
                for mid in other.in_closed(q).iter() {
                    acc = acc.union(self.in_closed(mid));
                }
                acc.remove(q);
                acc
            })
            .collect();
        Ok(CommGraph { n: self.n, in_sets })
    }
}

impl fmt::Debug for CommGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CommGraph(n={}, {:?})", self.n, self.edges())
    }
}

/// Source strongly connected components of the digraph whose in-neighbour
/// sets are `in_sets` (entries may or may not contain the vertex itself).
///
/// A component is a source iff every member's in-neighbours lie inside it.
pub(crate) fn source_components(in_sets: &[ProcessSet]) -> Vec<ProcessSet> {
    let mut roots: Vec<ProcessSet> = strongly_connected_components(in_sets)
        .into_iter()
        .filter(|comp| comp.iter().all(|v| in_sets[v].is_subset(*comp)))
        .collect();
    roots.sort_unstable_by_key(|c| c.bits().trailing_zeros());
    roots
}

/// Tarjan's algorithm over the reversed edge relation (in-neighbour lists);
/// SCCs are the same on the reversed graph.
fn strongly_connected_components(in_sets: &[ProcessSet]) -> Vec<ProcessSet> {
    struct Tarjan<'a> {
        in_sets: &'a [ProcessSet],
        index: Vec<Option<usize>>,
        lowlink: Vec<usize>,
        on_stack: ProcessSet,
        stack: Vec<ProcessId>,
        next: usize,
        out: Vec<ProcessSet>,
    }

    impl Tarjan<'_> {
        fn visit(&mut self, v: ProcessId) {
            self.index[v] = Some(self.next);
            self.lowlink[v] = self.next;
            self.next += 1;
            self.stack.push(v);
            self.on_stack.insert(v);

            for w in self.in_sets[v].iter().filter(|&w| w != v) {
                match self.index[w] {
                    None => {
                        self.visit(w);
                        self.lowlink[v] = self.lowlink[v].min(self.lowlink[w]);
                    }
                    Some(iw) if self.on_stack.contains(w) => {
                        self.lowlink[v] = self.lowlink[v].min(iw);
                    }
                    Some(_) => {}
                }
            }

            if Some(self.lowlink[v]) == self.index[v] {
                let mut comp = ProcessSet::empty();
                while let Some(w) = self.stack.pop() {
                    self.on_stack.remove(w);
                    comp.insert(w);
                    if w == v {
                        break;
                    }
                }
                self.out.push(comp);
            }
        }
    }

    let n = in_sets.len();
    let mut t = Tarjan {
        in_sets,
        index: vec![None; n],
        lowlink: vec![0; n],
        on_stack: ProcessSet::empty(),
        stack: Vec::with_capacity(n),
        next: 0,
        out: Vec::new(),
    };
    for v in 0..n {
        if t.index[v].is_none() {
            t.visit(v);
        }
    }
    t.out
}

/// A finite prefix of a communication graph sequence, rounds `1..=len`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct GraphSequence {
    n: usize,
    graphs: Vec<CommGraph>,
}

impl GraphSequence {
    pub fn new(n: usize) -> Result<Self> {
        check_n(n)?;
        Ok(Self {
            n,
            graphs: Vec::new(),
        })
    }

    pub fn from_graphs(n: usize, graphs: Vec<CommGraph>) -> Result<Self> {
        let mut seq = Self::new(n)?;
        for g in graphs {
            seq.push(g)?;
        }
        Ok(seq)
    }

    pub fn push(&mut self, g: CommGraph) -> Result<()> {
        if g.n != self.n {
            return Err(invalid(format!(
                "graph over {} processes pushed to a sequence over {}",
                g.n, self.n
            )));
        }
        self.graphs.push(g);
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of rounds.
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn last_round(&self) -> Round {
        self.graphs.len() as Round
    }

    /// Graph of round `r` (1-indexed).
    pub fn graph(&self, r: Round) -> Option<&CommGraph> {
        (r >= 1).then(|| self.graphs.get(r as usize - 1)).flatten()
    }

    pub fn graphs(&self) -> &[CommGraph] {
        &self.graphs
    }

    /// `(round, graph)` pairs in order.
    pub fn rounds(&self) -> impl Iterator<Item = (Round, &CommGraph)> {
        self.graphs
            .iter()
            .enumerate()
            .map(|(i, g)| (i as Round + 1, g))
    }

    pub fn truncate(&mut self, rounds: usize) {
        self.graphs.truncate(rounds);
    }

    /// Root component per round, `None` where the graph is not rooted.
    pub fn roots(&self) -> Vec<Option<ProcessSet>> {
        self.graphs.iter().map(CommGraph::root).collect()
    }

    /// `CP(p, a, b)`: the processes whose state at the end of round `a`
    /// reached `p` by the end of round `b`.
    pub fn causal_past(&self, p: ProcessId, a: Round, b: Round) -> Result<ProcessSet> {
        if p >= self.n {
            return Err(invalid(format!(
                "process {p} out of range for n = {}",
                self.n
            )));
        }
        if a > b {
            return Err(invalid(format!(
                "causal past needs a <= b, got a = {a}, b = {b}"
            )));
        }
        if b as usize > self.graphs.len() {
            return Err(invalid(format!(
                "round {b} beyond sequence length {}",
                self.graphs.len()
            )));
        }
        let mut reached = ProcessSet::singleton(p);
        for r in ((a + 1)..=b).rev() {
            let g = &self.graphs[r as usize - 1];
            let mut next = reached;
            for x in reached.iter() {
                next = next.union(g.in_sets[x]);
            }
            reached = next;
        }
        Ok(reached)
    }

    /// Writes the JSON-lines form: a `{"n", "rounds"}` header followed by
    /// one `{"round", "edges"}` object per round.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let header = SequenceHeader {
            n: self.n,
            rounds: self.graphs.len(),
        };
        serde_json::to_writer(&mut w, &header)?;
        writeln!(w)?;
        for (round, g) in self.rounds() {
            let line = RoundLine {
                round,
                edges: g.edges().into_iter().map(|(u, v)| [u, v]).collect(),
            };
            serde_json::to_writer(&mut w, &line)?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    /// Parses the JSON-lines form. Errors carry the 1-based line number.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()));

        let parse_err = |line: usize, message: String| Error::Parse { line, message };

        let (line_no, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing header line".into()))?;
        let header: SequenceHeader =
            serde_json::from_str(&header?).map_err(|e| parse_err(line_no, e.to_string()))?;
        let mut seq =
            GraphSequence::new(header.n).map_err(|e| parse_err(line_no, e.to_string()))?;

        for (line_no, line) in lines {
            let line: RoundLine =
                serde_json::from_str(&line?).map_err(|e| parse_err(line_no, e.to_string()))?;
            let expected = seq.last_round() + 1;
            if line.round != expected {
                return Err(parse_err(
                    line_no,
                    format!("expected round {expected}, found {}", line.round),
                ));
            }
            let g = CommGraph::from_edges(header.n, line.edges.iter().map(|e| (e[0], e[1])))
                .map_err(|e| parse_err(line_no, e.to_string()))?;
            seq.graphs.push(g);
        }
        if seq.len() != header.rounds {
            return Err(parse_err(
                line_no,
                format!(
                    "header announces {} rounds but {} were read",
                    header.rounds,
                    seq.len()
                ),
            ));
        }
        Ok(seq)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SequenceHeader {
    n: usize,
    rounds: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoundLine {
    round: Round,
    edges: Vec<[ProcessId; 2]>,
}
