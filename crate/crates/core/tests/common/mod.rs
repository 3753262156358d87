//! Brute-force oracles that share no code with the library.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rooted_consensus::{CommGraph, GraphSequence, ProcessSet};

pub type Matrix = Vec<Vec<bool>>;

/// Adjacency matrix with self-loops: `m[u][v]` iff `u -> v`.
pub fn matrix(g: &CommGraph) -> Matrix {
    let n = g.n();
    (0..n)
        .map(|u| (0..n).map(|v| u == v || g.has_edge(u, v)).collect())
        .collect()
}

pub fn identity(n: usize) -> Matrix {
    (0..n).map(|u| (0..n).map(|v| u == v).collect()).collect()
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    (0..n)
        .map(|u| (0..n).map(|w| (0..n).any(|v| a[u][v] && b[v][w])).collect())
        .collect()
}

pub fn from_matrix(m: &Matrix) -> CommGraph {
    let n = m.len();
    let edges = (0..n)
        .flat_map(|u| (0..n).map(move |v| (u, v)))
        .filter(|&(u, v)| u != v && m[u][v]);
    CommGraph::from_edges(n, edges).unwrap()
}

/// `IN_p(G^{a+1} ∘ … ∘ G^b)` by explicit matrix products.
pub fn causal_past(seq: &GraphSequence, p: usize, a: u32, b: u32) -> BTreeSet<usize> {
    let n = seq.n();
    let mut product = identity(n);
    for r in (a + 1)..=b {
        product = mat_mul(&product, &matrix(seq.graph(r).unwrap()));
    }
    (0..n).filter(|&q| product[q][p]).collect()
}

/// Transitive closure (reflexive).
pub fn reachability(g: &CommGraph) -> Matrix {
    let mut m = matrix(g);
    let n = m.len();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if m[i][k] && m[k][j] {
                    m[i][j] = true;
                }
            }
        }
    }
    m
}

/// All nonempty vertex sets that are strongly connected and have no
/// in-edge from outside, by subset enumeration.
pub fn root_components(g: &CommGraph) -> BTreeSet<BTreeSet<usize>> {
    let n = g.n();
    let reach = reachability(g);
    let mut out = BTreeSet::new();
    for mask in 1u32..(1 << n) {
        let set: Vec<usize> = (0..n).filter(|&v| mask & (1 << v) != 0).collect();
        let connected = set.iter().all(|&u| set.iter().all(|&v| reach[u][v]));
        let closed = set
            .iter()
            .all(|&v| (0..n).all(|w| mask & (1 << w) != 0 || !g.has_edge(w, v)));
        if connected && closed {
            out.insert(set.into_iter().collect());
        }
    }
    out
}

pub fn to_btree(s: ProcessSet) -> BTreeSet<usize> {
    s.iter().collect()
}

/// Dynamic-diameter condition: every run of `d` consecutive graphs with
/// one common single root `R` has `R ⊆ CP(p, r1 - 1, r1 + d - 1)` for all
/// `p`.
pub fn diam_holds(seq: &GraphSequence, d: u32) -> bool {
    let len = seq.len() as u32;
    for r1 in 1..=len {
        let end = r1 + d - 1;
        if end > len {
            break;
        }
        let roots: Vec<BTreeSet<BTreeSet<usize>>> = (r1..=end)
            .map(|r| root_components(seq.graph(r).unwrap()))
            .collect();
        if roots.iter().any(|rs| rs.len() != 1) || roots.windows(2).any(|w| w[0] != w[1]) {
            continue;
        }
        let root = roots[0].iter().next().unwrap().clone();
        for p in 0..seq.n() {
            if !root.is_subset(&causal_past(seq, p, r1 - 1, end)) {
                return false;
            }
        }
    }
    true
}

/// Graph from an edge bitmask over ordered pairs `u != v`.
pub fn graph_from_bits(n: usize, bits: u64) -> CommGraph {
    let mut edges = Vec::new();
    let mut i = 0;
    for u in 0..n {
        for v in 0..n {
            if u != v {
                if bits & (1 << i) != 0 {
                    edges.push((u, v));
                }
                i += 1;
            }
        }
    }
    CommGraph::from_edges(n, edges).unwrap()
}

pub fn is_rooted(g: &CommGraph) -> bool {
    root_components(g).len() == 1
}
