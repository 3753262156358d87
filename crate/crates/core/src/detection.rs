//! Conservative estimation of past root components from a process's view.

use serde::{Deserialize, Serialize};

use crate::engine::ProcessView;
use crate::error::{invalid, Result};
use crate::graph::{source_components, ProcessSet, Round};

/// A root estimate: either a certain root component or "unsure".
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Option<ProcessSet>", into = "Option<ProcessSet>")]
pub enum RootEstimate {
    #[default]
    Unknown,
    Known(ProcessSet),
}

impl RootEstimate {
    pub fn known(self) -> Option<ProcessSet> {
        match self {
            RootEstimate::Known(r) => Some(r),
            RootEstimate::Unknown => None,
        }
    }

    pub fn is_known(self) -> bool {
        matches!(self, RootEstimate::Known(_))
    }
}

impl From<Option<ProcessSet>> for RootEstimate {
    fn from(r: Option<ProcessSet>) -> Self {
        r.map_or(RootEstimate::Unknown, RootEstimate::Known)
    }
}

impl From<RootEstimate> for Option<ProcessSet> {
    fn from(e: RootEstimate) -> Self {
        e.known()
    }
}

/// The owner's estimate of the root component of round `s`.
///
/// Builds the partial graph of all round-`s` in-neighbourhoods the owner
/// knows and returns `Known(R)` iff exactly one strongly connected set `R`
/// of reported vertices has all its in-edges inside `R`. Such a set is a
/// root component of the true graph, so the result is never wrong; it is
/// `Unknown` when knowledge is missing or ambiguous.
pub fn estimate_root<S>(view: &ProcessView<'_, S>, s: Round) -> Result<RootEstimate> {
    if s == 0 || s > view.round() {
        return Err(invalid(format!(
            "root estimate for round {s} requested in round {}",
            view.round()
        )));
    }
    let n = view.n();
    let mut reported = ProcessSet::empty();
    let in_sets: Vec<ProcessSet> = (0..n)
        .map(|q| match view.known_in_edges(q, s) {
            Some(edges) => {
                reported.insert(q);
                edges
            }
            None => ProcessSet::empty(),
        })
        .collect();
    let mut closed = source_components(&in_sets)
        .into_iter()
        .filter(|c| c.is_subset(reported));
    Ok(match (closed.next(), closed.next()) {
        (Some(root), None) => RootEstimate::Known(root),
        _ => RootEstimate::Unknown,
    })
}

/// The estimate of the previous round's root, `Unknown` in round 1.
pub fn estimate_prev_root<S>(view: &ProcessView<'_, S>) -> RootEstimate {
    match view.round() {
        0 | 1 => RootEstimate::Unknown,
        r => estimate_root(view, r - 1).expect("r - 1 is a valid past round"),
    }
}
