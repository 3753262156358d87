//! Voting on compound graphs: consensus once two consecutive rounds share a
//! root whose members reach everyone directly, assuming every round is
//! non-split.

use serde::{Deserialize, Serialize};

use crate::detection::{estimate_prev_root, RootEstimate};
use crate::engine::{Algorithm, ProcessView, RoundOutput, Value};
use crate::graph::{ProcessId, ProcessSet, Round};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alg2State {
    pub proposal: Value,
    /// Vote carried to the next round, `None` for no vote.
    pub m: Option<Value>,
    pub decision: Option<Value>,
}

impl Alg2State {
    pub fn new(input: Value) -> Self {
        Self {
            proposal: input,
            m: None,
            decision: None,
        }
    }
}

/// A message `(m, Proposal)` received from `sender`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Message {
    pub sender: ProcessId,
    pub m: Option<Value>,
    pub proposal: Value,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alg2Record {
    pub proposal: Value,
    pub m: Option<Value>,
    pub decided: bool,
    pub decision: Option<Value>,
}

/// The value a process adopts from the previous round's root: the vote of
/// the lowest-id root member that voted, else the largest proposal among
/// the root members heard from. `None` if no root member was heard.
pub fn alg2_value_of_root(root: ProcessSet, received: &[Message]) -> Option<Value> {
    let members = received.iter().filter(|msg| root.contains(msg.sender));
    members
        .clone()
        .filter_map(|msg| msg.m)
        .next()
        .or_else(|| members.map(|msg| msg.proposal).max())
}

/// One round of the voting rule. `received` must include the process's
/// own message. A decided process keeps its state.
pub fn alg2_step(state: &Alg2State, received: &[Message], prev_root: RootEstimate) -> Alg2State {
    let mut st = state.clone();
    if st.decision.is_some() {
        return st;
    }
    let mut votes = received.iter().map(|msg| msg.m);
    let first = votes.next().flatten();
    if let Some(v) = first.filter(|_| votes.all(|m| m == first)) {
        st.proposal = v;
        st.m = Some(v);
        st.decision = Some(v);
        return st;
    }
    if let Some(v) = prev_root
        .known()
        .and_then(|root| alg2_value_of_root(root, received))
    {
        st.proposal = v;
        st.m = Some(v);
    } else if let Some(v) = received.iter().find_map(|msg| msg.m) {
        st.proposal = v;
        st.m = None;
    } else {
        st.m = None;
    }
    st
}

/// The voting algorithm, run on a compound sequence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Alg2;

impl Algorithm for Alg2 {
    type State = Alg2State;
    type Record = Alg2Record;

    fn initial_state(&self, _pid: ProcessId, _n: usize, input: Value) -> Alg2State {
        Alg2State::new(input)
    }

    fn round(&self, view: &ProcessView<'_, Alg2State>) -> Result<RoundOutput<Alg2State>, String> {
        let r = view.round();
        let received = view
            .heard_since(r - 1)
            .iter()
            .map(|q| {
                let st = view
                    .known_state(q, r - 1)
                    .ok_or_else(|| format!("missing round {} state of in-neighbour {q}", r - 1))?;
                Ok(Message {
                    sender: q,
                    m: st.m,
                    proposal: st.proposal,
                })
            })
            .collect::<Result<Vec<_>, String>>()?;
        let prev_root = estimate_prev_root(view);
        Ok(RoundOutput {
            state: alg2_step(view.own_state(), &received, prev_root),
            detected_root: prev_root,
        })
    }

    fn decision(&self, state: &Alg2State) -> Option<Value> {
        state.decision
    }

    fn record(&self, state: &Alg2State) -> Alg2Record {
        Alg2Record {
            proposal: state.proposal,
            m: state.m,
            decided: state.decision.is_some(),
            decision: state.decision,
        }
    }

    fn retention(&self) -> Round {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run;
    use crate::graph::{CommGraph, GraphSequence};

    fn msg(sender: ProcessId, m: Option<Value>, proposal: Value) -> Message {
        Message {
            sender,
            m,
            proposal,
        }
    }

    fn set(ids: &[usize]) -> ProcessSet {
        ids.iter().copied().collect()
    }

    #[test]
    fn value_of_root() {
        let r01 = set(&[0, 1]);
        assert_eq!(
            alg2_value_of_root(r01, &[msg(0, None, 1), msg(1, Some(5), 2)]),
            Some(5)
        );
        assert_eq!(
            alg2_value_of_root(r01, &[msg(0, None, 3), msg(1, None, 7)]),
            Some(7)
        );
        assert_eq!(
            alg2_value_of_root(set(&[0]), &[msg(0, None, 2), msg(2, None, 9)]),
            Some(2)
        );
        assert_eq!(alg2_value_of_root(set(&[0]), &[msg(2, None, 9)]), None);
    }

    #[test]
    fn unanimous_vote_decides() {
        let st = alg2_step(
            &Alg2State::new(1),
            &[msg(0, Some(4), 4), msg(1, Some(4), 0)],
            RootEstimate::Unknown,
        );
        assert_eq!(
            st,
            Alg2State {
                proposal: 4,
                m: Some(4),
                decision: Some(4)
            }
        );
    }

    #[test]
    fn no_root_no_vote_clears_m() {
        let st = Alg2State {
            proposal: 3,
            m: Some(3),
            decision: None,
        };
        let next = alg2_step(
            &st,
            &[msg(0, None, 3), msg(1, None, 8)],
            RootEstimate::Unknown,
        );
        assert_eq!(
            next,
            Alg2State {
                proposal: 3,
                m: None,
                decision: None
            }
        );
    }

    #[test]
    fn mixed_votes_without_root_adopt_a_vote() {
        let next = alg2_step(
            &Alg2State::new(0),
            &[msg(0, None, 0), msg(1, Some(6), 6)],
            RootEstimate::Unknown,
        );
        assert_eq!(
            next,
            Alg2State {
                proposal: 6,
                m: None,
                decision: None
            }
        );
    }

    #[test]
    fn two_star_rounds_decide() {
        let star = CommGraph::star(1, 3).unwrap();
        let seq = GraphSequence::from_graphs(3, vec![star; 4]).unwrap();
        let exec = run(&Alg2, &[0, 5, 2], &seq).unwrap();
        for p in 0..3 {
            assert_eq!(exec.state(p, 2).proposal, 5);
            assert_eq!(exec.decision_of(&Alg2, p), Some((3, 5)));
        }
    }
}
