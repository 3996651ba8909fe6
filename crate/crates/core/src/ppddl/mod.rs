//! PPDDL subset: typing, strips, probabilistic effects, `oneof`, `when`,
//! disjunctive and negative preconditions.

pub mod ground;
pub mod parse;
pub mod sexpr;
pub mod types;
pub mod write;

pub use ground::*;
pub use parse::{parse_domain, parse_problem, ParseError, PROB_TOL};
pub use types::*;
pub use write::{capability_text, domain_text, formula_text, problem_text};
