//! The two consensus algorithms.

mod alg1;
mod alg2;

pub use alg1::{
    Alg1, Alg1Record, Alg1State, DecisionTiming, DecisionWindow, Mutation, PruneWitness, RootChange,
};
pub use alg2::{alg2_step, alg2_value_of_root, Alg2, Alg2Record, Alg2State, Message};
