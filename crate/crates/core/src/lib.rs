//! Query-driven learning of probabilistic capability models for black-box
//! sequential decision-making agents.

pub mod ppddl;
pub mod task;
pub mod sdma;
pub mod fond;
pub mod query;
pub mod learner;
pub mod bench;
pub mod eval;
