//! JAGS model text for a population tree, and a parser for the emitted subset.
//!
//! Naming follows a fixed scheme: the children of a parent `X` form a
//! sibling tuple whose name is the concatenation of their labels (`ABC`),
//! member `k` is `ABC[k]`, the branch probabilities are `pX` with Dirichlet
//! or Beta parameters `pX.params`.

mod generate;
mod parse;

pub use generate::{generate_model, sibling_tuple_name, JagsError, JagsModelText, Prior};
pub use parse::{parse_generated_model, LoopSummary, ParseError, ParseSummary, Residual};
