//! Predicate variants and the mode-consistency check for clauses.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::Encoding;
use crate::features::{Predicate, SlotMode, Sort};
use crate::ilp::clause::{Arg, Clause, HEAD_PREDICATE};

/// Encoding (anonymous / original) crossed with the background knowledge
/// (feature predicates / representation predicates only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    AF,
    AR,
    OF,
    OR,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::AF, Variant::AR, Variant::OF, Variant::OR];

    pub fn encoding(self) -> Encoding {
        match self {
            Variant::AF | Variant::AR => Encoding::Anonymous,
            Variant::OF | Variant::OR => Encoding::Original,
        }
    }

    pub fn uses_features(self) -> bool {
        matches!(self, Variant::AF | Variant::OF)
    }

    /// Predicates allowed in rule bodies.
    pub fn predicates(self) -> Vec<Predicate> {
        Predicate::ALL.into_iter().filter(|p| p.is_representation() || self.uses_features()).collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::AF => "AF",
            Variant::AR => "AR",
            Variant::OF => "OF",
            Variant::OR => "OR",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown variant `{0}` (expected AF, AR, OF or OR)")]
pub struct UnknownVariant(pub String);

impl FromStr for Variant {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL.into_iter().find(|v| v.name().eq_ignore_ascii_case(s)).ok_or_else(|| UnknownVariant(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModeError {
    #[error("head must be `{HEAD_PREDICATE}(Var, \"tactic\")`")]
    BadHead,
    #[error("literal {index}: predicate `{name}` is not available in variant {variant}")]
    Predicate { index: usize, name: String, variant: Variant },
    #[error("literal {index}: `{name}` expects {expected} arguments, got {got}")]
    Arity { index: usize, name: String, expected: usize, got: usize },
    #[error("literal {index}: argument {slot} must be a constant")]
    ExpectedConstant { index: usize, slot: usize },
    #[error("literal {index}: argument {slot} must be a variable")]
    ExpectedVariable { index: usize, slot: usize },
    #[error("literal {index}: input variable {var} is not bound by an earlier literal")]
    Unbound { index: usize, var: String },
    #[error("variable {var} is used with two sorts ({first:?} and {second:?})")]
    SortClash { var: String, first: Sort, second: Sort },
}

fn compatible(a: Sort, b: Sort) -> Option<Sort> {
    match (a, b) {
        _ if a == b => Some(a),
        (Sort::AnyPos, s @ (Sort::GoalPos | Sort::HypPos)) | (s @ (Sort::GoalPos | Sort::HypPos), Sort::AnyPos) => {
            Some(s)
        }
        _ => None,
    }
}

/// Checks directed variable flow: constant slots hold constants, every
/// input variable is the head state variable or an output of an earlier
/// body literal, and each variable has a single sort.
pub fn check_mode_consistency(clause: &Clause, variant: Variant) -> Result<(), ModeError> {
    let name = crate::ilp::clause::var_name;
    let state = match (clause.head.predicate.as_str(), clause.head.args.as_slice()) {
        (HEAD_PREDICATE, [Arg::Var(v), Arg::Const(_)]) => *v,
        _ => return Err(ModeError::BadHead),
    };
    let allowed = variant.predicates();
    let mut sorts: HashMap<u32, Sort> = HashMap::from([(state, Sort::State)]);
    for (index, lit) in clause.body.iter().enumerate() {
        let pred = Predicate::from_name(&lit.predicate)
            .filter(|p| allowed.contains(p))
            .ok_or_else(|| ModeError::Predicate { index, name: lit.predicate.clone(), variant })?;
        let slots = pred.slots(variant.encoding());
        if slots.len() != lit.args.len() {
            return Err(ModeError::Arity {
                index,
                name: lit.predicate.clone(),
                expected: slots.len(),
                got: lit.args.len(),
            });
        }
        let mut outputs = Vec::new();
        for (slot, (s, a)) in slots.iter().zip(&lit.args).enumerate() {
            match (s.mode, a) {
                (SlotMode::Constant, Arg::Const(_)) => {}
                (SlotMode::Constant, Arg::Var(_)) => return Err(ModeError::ExpectedConstant { index, slot }),
                (_, Arg::Const(_)) => return Err(ModeError::ExpectedVariable { index, slot }),
                (SlotMode::Input, Arg::Var(v)) => match sorts.get(v) {
                    None => return Err(ModeError::Unbound { index, var: name(*v) }),
                    Some(&known) => {
                        let merged = compatible(known, s.sort).ok_or(ModeError::SortClash {
                            var: name(*v),
                            first: known,
                            second: s.sort,
                        })?;
                        sorts.insert(*v, merged);
                    }
                },
                (SlotMode::Output, Arg::Var(v)) => outputs.push((*v, s.sort)),
            }
        }
        for (v, sort) in outputs {
            let merged = match sorts.get(&v) {
                None => sort,
                Some(&known) => {
                    compatible(known, sort).ok_or(ModeError::SortClash { var: name(v), first: known, second: sort })?
                }
            };
            sorts.insert(v, merged);
        }
    }
    Ok(())
}
