//! Learning Horn rules that explain when a tactic applies to a proof state,
//! and using them to reorder k-NN tactic predictions.
//!
//! The pipeline: [`state`] corpora are encoded as logic facts ([`encoding`]),
//! training tasks are built per tactic ([`selection`]), rules are induced
//! ([`ilp`]), pruned and applied ([`ruleset`]), and measured ([`eval`]).

pub mod encoding;
pub mod eval;
pub mod features;
pub mod ilp;
pub mod kmeans;
pub mod knn;
pub mod ruleset;
pub mod selection;
pub mod state;
pub mod synth;
pub mod term;

pub use encoding::{encode, Encoding, FactBase};
pub use ilp::clause::{Arg, Clause, Literal};
pub use ruleset::RuleSet;
pub use state::{Corpus, ProofState, Split, StateId};
pub use term::{HypPosition, NodeLabel, Position, Term};
