//! Mode-directed rule induction over encoded proof states.

pub mod clause;
pub mod cover;
pub mod learn;
pub mod modes;
pub mod saturate;
pub mod search;
pub mod subsume;
