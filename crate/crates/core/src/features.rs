//! Positional and equational feature predicates, evaluated intensionally.
//!
//! Nothing here is pre-grounded. The boolean operations work directly on
//! positions and subterms; [`enumerate_solutions`] (and the coverage engine
//! built on the same solver) walks the node table of a [`FactBase`].
//!
//! Enumeration order is deterministic: free position slots range over goal
//! nodes in path order, then hypothesis nodes ordered by
//! `(hyp_name, path)`; with several free slots the leftmost slot varies
//! slowest.

use std::fmt;

use thiserror::Error;

use crate::encoding::{Encoding, FactBase, Owner, Sym};
use crate::state::StateId;
use crate::term::{HypPosition, Position, Term};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeatureError {
    #[error("invalid position {0}")]
    InvalidPosition(String),
    #[error("mode violation: {0}")]
    Mode(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("`{name}` expects {expected} arguments, got {got}")]
    Arity { name: &'static str, expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Predicate {
    GoalNode,
    HypNode,
    GoalAbove,
    GoalLeft,
    HypAbove,
    HypLeft,
    Dif,
    EqGoalTerm,
    EqGoalHypTerm,
    EqHypTerm,
    IsGoalRoot,
    IsHypRoot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotMode {
    /// `#`: filled with a constant at learning time.
    Constant,
    /// `+`: must be bound.
    Input,
    /// `-`: produced by the call.
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sort {
    State,
    GoalPos,
    HypPos,
    /// Either position sort (only `dif`).
    AnyPos,
    HypName,
    Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Slot {
    pub mode: SlotMode,
    pub sort: Sort,
}

const fn slot(mode: SlotMode, sort: Sort) -> Slot {
    Slot { mode, sort }
}

use SlotMode::{Constant as C, Input as I, Output as O};

const GOAL_NODE_ANON: [Slot; 4] =
    [slot(C, Sort::Label), slot(I, Sort::State), slot(O, Sort::GoalPos), slot(O, Sort::Label)];
const GOAL_NODE_ORIG: [Slot; 3] = [slot(C, Sort::Label), slot(I, Sort::State), slot(O, Sort::GoalPos)];
const HYP_NODE_ANON: [Slot; 5] =
    [slot(C, Sort::Label), slot(I, Sort::State), slot(O, Sort::HypName), slot(O, Sort::HypPos), slot(O, Sort::Label)];
const HYP_NODE_ORIG: [Slot; 4] =
    [slot(C, Sort::Label), slot(I, Sort::State), slot(O, Sort::HypName), slot(O, Sort::HypPos)];
const STATE_GG: [Slot; 3] = [slot(I, Sort::State), slot(I, Sort::GoalPos), slot(I, Sort::GoalPos)];
const STATE_HH: [Slot; 3] = [slot(I, Sort::State), slot(I, Sort::HypPos), slot(I, Sort::HypPos)];
const STATE_GH: [Slot; 3] = [slot(I, Sort::State), slot(I, Sort::GoalPos), slot(I, Sort::HypPos)];
const GG: [Slot; 2] = [slot(I, Sort::GoalPos), slot(I, Sort::GoalPos)];
const HH: [Slot; 2] = [slot(I, Sort::HypPos), slot(I, Sort::HypPos)];
const ANY2: [Slot; 2] = [slot(I, Sort::AnyPos), slot(I, Sort::AnyPos)];
const STATE_G: [Slot; 2] = [slot(I, Sort::State), slot(I, Sort::GoalPos)];
const STATE_H: [Slot; 2] = [slot(I, Sort::State), slot(I, Sort::HypPos)];

impl Predicate {
    pub const ALL: [Predicate; 12] = [
        Predicate::GoalNode,
        Predicate::HypNode,
        Predicate::GoalAbove,
        Predicate::GoalLeft,
        Predicate::HypAbove,
        Predicate::HypLeft,
        Predicate::Dif,
        Predicate::EqGoalTerm,
        Predicate::EqGoalHypTerm,
        Predicate::EqHypTerm,
        Predicate::IsGoalRoot,
        Predicate::IsHypRoot,
    ];

    pub const FEATURES: [Predicate; 10] = [
        Predicate::GoalAbove,
        Predicate::GoalLeft,
        Predicate::HypAbove,
        Predicate::HypLeft,
        Predicate::Dif,
        Predicate::EqGoalTerm,
        Predicate::EqGoalHypTerm,
        Predicate::EqHypTerm,
        Predicate::IsGoalRoot,
        Predicate::IsHypRoot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Predicate::GoalNode => "goal_node",
            Predicate::HypNode => "hyp_node",
            Predicate::GoalAbove => "goal_above",
            Predicate::GoalLeft => "goal_left",
            Predicate::HypAbove => "hyp_above",
            Predicate::HypLeft => "hyp_left",
            Predicate::Dif => "dif",
            Predicate::EqGoalTerm => "eq_goal_term",
            Predicate::EqGoalHypTerm => "eq_goal_hyp_term",
            Predicate::EqHypTerm => "eq_hyp_term",
            Predicate::IsGoalRoot => "is_goal_root",
            Predicate::IsHypRoot => "is_hyp_root",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Predicate::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn is_representation(self) -> bool {
        matches!(self, Predicate::GoalNode | Predicate::HypNode)
    }

    /// The mode/signature table.
    pub fn slots(self, encoding: Encoding) -> &'static [Slot] {
        match (self, encoding) {
            (Predicate::GoalNode, Encoding::Anonymous) => &GOAL_NODE_ANON,
            (Predicate::GoalNode, Encoding::Original) => &GOAL_NODE_ORIG,
            (Predicate::HypNode, Encoding::Anonymous) => &HYP_NODE_ANON,
            (Predicate::HypNode, Encoding::Original) => &HYP_NODE_ORIG,
            (Predicate::GoalAbove | Predicate::EqGoalTerm, _) => &STATE_GG,
            (Predicate::HypAbove | Predicate::EqHypTerm, _) => &STATE_HH,
            (Predicate::EqGoalHypTerm, _) => &STATE_GH,
            (Predicate::GoalLeft, _) => &GG,
            (Predicate::HypLeft, _) => &HH,
            (Predicate::Dif, _) => &ANY2,
            (Predicate::IsGoalRoot, _) => &STATE_G,
            (Predicate::IsHypRoot, _) => &STATE_H,
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

// ---------------------------------------------------------------------------
// Boolean operations over positions.

fn goal_subterm<'a>(fb: &'a FactBase, p: &Position) -> Result<&'a Term, FeatureError> {
    fb.state().goal.subterm_at(p).map_err(|_| FeatureError::InvalidPosition(p.to_string()))
}

fn hyp_subterm<'a>(fb: &'a FactBase, p: &HypPosition) -> Result<&'a Term, FeatureError> {
    fb.state()
        .hypothesis(&p.hyp_name)
        .and_then(|h| h.body.subterm_at(&p.path).ok())
        .ok_or_else(|| FeatureError::InvalidPosition(p.to_string()))
}

/// `a` is a proper ancestor of `b` in the goal.
pub fn goal_above(fb: &FactBase, a: &Position, b: &Position) -> Result<bool, FeatureError> {
    goal_subterm(fb, a)?;
    goal_subterm(fb, b)?;
    Ok(a.is_strict_prefix_of(b))
}

pub fn goal_left(a: &Position, b: &Position) -> bool {
    a.is_left_of(b)
}

pub fn hyp_above(fb: &FactBase, a: &HypPosition, b: &HypPosition) -> Result<bool, FeatureError> {
    hyp_subterm(fb, a)?;
    hyp_subterm(fb, b)?;
    Ok(a.hyp_name == b.hyp_name && a.path.is_strict_prefix_of(&b.path))
}

pub fn hyp_left(a: &HypPosition, b: &HypPosition) -> bool {
    a.hyp_name == b.hyp_name && a.path.is_left_of(&b.path)
}

/// Structural inequality of positions. Label equality is expressed in rules
/// through shared name variables, not here.
pub fn dif<T: PartialEq>(a: &T, b: &T) -> bool {
    a != b
}

pub fn eq_goal_term(fb: &FactBase, a: &Position, b: &Position) -> Result<bool, FeatureError> {
    Ok(goal_subterm(fb, a)? == goal_subterm(fb, b)?)
}

pub fn eq_goal_hyp_term(fb: &FactBase, g: &Position, h: &HypPosition) -> Result<bool, FeatureError> {
    Ok(goal_subterm(fb, g)? == hyp_subterm(fb, h)?)
}

/// Equal subterms located in two different hypotheses.
pub fn eq_hyp_term(fb: &FactBase, a: &HypPosition, b: &HypPosition) -> Result<bool, FeatureError> {
    let (ta, tb) = (hyp_subterm(fb, a)?, hyp_subterm(fb, b)?);
    Ok(a.hyp_name != b.hyp_name && ta == tb)
}

pub fn is_goal_root(fb: &FactBase, g: &Position) -> Result<bool, FeatureError> {
    goal_subterm(fb, g)?;
    Ok(g.is_root())
}

pub fn is_hyp_root(fb: &FactBase, h: &HypPosition) -> Result<bool, FeatureError> {
    hyp_subterm(fb, h)?;
    Ok(h.path.is_root())
}

// ---------------------------------------------------------------------------
// Enumeration.

/// A ground argument value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    State(StateId),
    Goal(Position),
    Hyp(HypPosition),
    /// Labels, original names and hypothesis names.
    Name(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::State(id) => write!(f, "{id}"),
            Value::Goal(p) => write!(f, "{p}"),
            Value::Hyp(p) => write!(f, "{p}"),
            Value::Name(n) => f.write_str(&crate::ilp::clause::format_constant(n)),
        }
    }
}

/// A predicate call whose `None` arguments are free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateCall {
    pub predicate: Predicate,
    pub args: Vec<Option<Value>>,
}

/// Values for the free slots of a call, as `(slot index, value)` pairs.
pub type Binding = Vec<(usize, Value)>;

/// Yields every ground binding of the free arguments that makes the call
/// true, each exactly once.
///
/// State slots and both `dif` arguments must be bound; every other slot may
/// be left free and is enumerated over the state's finite domain.
pub fn enumerate_solutions(fb: &FactBase, call: &PredicateCall) -> Result<Vec<Binding>, FeatureError> {
    let mut pattern = Vec::with_capacity(call.args.len());
    let mut absent = false;
    for a in &call.args {
        pattern.push(match a {
            None => None,
            Some(v) => match to_ground(fb, v)? {
                Some(g) => Some(g),
                None => {
                    absent = true;
                    None
                }
            },
        });
    }
    let free: Vec<usize> = call.args.iter().enumerate().filter(|(_, a)| a.is_none()).map(|(i, _)| i).collect();
    let mut out = Vec::new();
    check_call(fb.encoding(), call.predicate, &pattern)?;
    if absent {
        return Ok(out);
    }
    for_each_solution(fb, call.predicate, &pattern, &mut |tuple| {
        out.push(free.iter().map(|&i| (i, from_ground(fb, tuple[i]))).collect());
        false
    })?;
    Ok(out)
}

/// `Ok(None)` when a name does not occur in the state (nothing can match it).
fn to_ground(fb: &FactBase, v: &Value) -> Result<Option<Ground>, FeatureError> {
    Ok(Some(match v {
        Value::State(id) => Ground::State(*id),
        Value::Goal(p) => {
            Ground::Node(fb.goal_node_index(p).ok_or_else(|| FeatureError::InvalidPosition(p.to_string()))?)
        }
        Value::Hyp(p) => {
            Ground::Node(fb.hyp_node_index(p).ok_or_else(|| FeatureError::InvalidPosition(p.to_string()))?)
        }
        Value::Name(n) => match fb.lookup_symbol(n) {
            Some(s) => Ground::Sym(s),
            None => return Ok(None),
        },
    }))
}

fn from_ground(fb: &FactBase, g: Ground) -> Value {
    match g {
        Ground::State(id) => Value::State(id),
        Ground::Sym(s) => Value::Name(fb.symbol(s).to_string()),
        Ground::Node(i) if fb.is_goal_node(i) => Value::Goal(fb.nodes[i as usize].path.clone()),
        Ground::Node(i) => Value::Hyp(fb.hyp_position(i)),
    }
}

/// Internal ground value: node indices and interned symbols of one
/// [`FactBase`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum Ground {
    State(StateId),
    Node(u32),
    Sym(Sym),
}

/// Arity and mode check: state slots and `dif` arguments must be bound.
pub(crate) fn check_call(encoding: Encoding, pred: Predicate, pattern: &[Option<Ground>]) -> Result<(), FeatureError> {
    let slots = pred.slots(encoding);
    if slots.len() != pattern.len() {
        return Err(FeatureError::Arity { name: pred.name(), expected: slots.len(), got: pattern.len() });
    }
    for (s, p) in slots.iter().zip(pattern) {
        if p.is_none() && matches!(s.sort, Sort::State | Sort::AnyPos) {
            return Err(FeatureError::Mode(format!("{} needs its {:?} argument bound", pred.name(), s.sort)));
        }
    }
    Ok(())
}

/// Whether a call with these bound slots is allowed by [`check_call`].
pub(crate) fn callable(encoding: Encoding, pred: Predicate, bound: impl Fn(usize) -> bool) -> bool {
    pred.slots(encoding).iter().enumerate().all(|(i, s)| bound(i) || !matches!(s.sort, Sort::State | Sort::AnyPos))
}

fn above(fb: &FactBase, a: u32, b: u32) -> bool {
    a < b && b < a + fb.nodes[a as usize].size
}

fn left(fb: &FactBase, a: u32, b: u32) -> bool {
    let (na, nb) = (&fb.nodes[a as usize], &fb.nodes[b as usize]);
    na.owner == nb.owner && b >= a + na.size
}

fn same_class(fb: &FactBase, a: u32, b: u32) -> bool {
    fb.nodes[a as usize].class == fb.nodes[b as usize].class
}

fn holds(fb: &FactBase, pred: Predicate, args: &[u32]) -> bool {
    let hyp_root = |h: u32| match fb.nodes[h as usize].owner {
        Owner::Hyp(k) => fb.hyps[k as usize].first == h,
        Owner::Goal => false,
    };
    match pred {
        Predicate::GoalAbove | Predicate::HypAbove => above(fb, args[0], args[1]),
        Predicate::GoalLeft | Predicate::HypLeft => left(fb, args[0], args[1]),
        Predicate::Dif => args[0] != args[1],
        Predicate::EqGoalTerm | Predicate::EqGoalHypTerm => same_class(fb, args[0], args[1]),
        Predicate::EqHypTerm => {
            fb.nodes[args[0] as usize].owner != fb.nodes[args[1] as usize].owner && same_class(fb, args[0], args[1])
        }
        Predicate::IsGoalRoot => args[0] == 0,
        Predicate::IsHypRoot => hyp_root(args[0]),
        Predicate::GoalNode | Predicate::HypNode => unreachable!("representation predicates are extensional"),
    }
}

fn matches(pattern: &[Option<Ground>], tuple: &[Ground]) -> bool {
    pattern.iter().zip(tuple).all(|(p, t)| p.is_none_or(|p| p == *t))
}

/// Calls `f` with every full argument tuple satisfying the pattern, in the
/// documented order, until `f` returns `true`. Returns whether `f` stopped
/// the enumeration.
pub(crate) fn for_each_solution(
    fb: &FactBase,
    pred: Predicate,
    pattern: &[Option<Ground>],
    f: &mut dyn FnMut(&[Ground]) -> bool,
) -> Result<bool, FeatureError> {
    let enc = fb.encoding();
    check_call(enc, pred, pattern)?;
    let slots = pred.slots(enc);
    let state = Ground::State(fb.state_id());
    for (s, p) in slots.iter().zip(pattern) {
        if s.sort == Sort::State && *p != Some(state) {
            return Ok(false);
        }
    }
    let goal = 0..fb.goal_len;
    let hyp = fb.goal_len..fb.nodes.len() as u32;
    let anon = enc == Encoding::Anonymous;

    match pred {
        Predicate::GoalNode => {
            let range = match pattern[2] {
                Some(Ground::Node(i)) if goal.contains(&i) => i..i + 1,
                Some(_) => return Ok(false),
                None => goal,
            };
            let mut tuple = vec![Ground::State(0); slots.len()];
            for i in range {
                tuple[0] = Ground::Sym(fb.head_symbol(i));
                tuple[1] = state;
                tuple[2] = Ground::Node(i);
                if anon {
                    tuple[3] = Ground::Sym(fb.nodes[i as usize].orig);
                }
                if matches(pattern, &tuple) && f(&tuple) {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Predicate::HypNode => {
            let range = match pattern[3] {
                Some(Ground::Node(i)) if hyp.contains(&i) => i..i + 1,
                Some(_) => return Ok(false),
                None => hyp,
            };
            let mut tuple = vec![Ground::State(0); slots.len()];
            for i in range {
                let n = &fb.nodes[i as usize];
                let Owner::Hyp(k) = n.owner else { unreachable!() };
                tuple[0] = Ground::Sym(fb.head_symbol(i));
                tuple[1] = state;
                tuple[2] = Ground::Sym(fb.hyps[k as usize].name_sym);
                tuple[3] = Ground::Node(i);
                if anon {
                    tuple[4] = Ground::Sym(n.orig);
                }
                if matches(pattern, &tuple) && f(&tuple) {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        _ => {
            // position slots and their domains
            let mut pos_slots: Vec<(usize, Vec<u32>)> = Vec::with_capacity(2);
            for (i, s) in slots.iter().enumerate() {
                let domain = match s.sort {
                    Sort::GoalPos => goal.clone(),
                    Sort::HypPos => hyp.clone(),
                    Sort::AnyPos => 0..fb.nodes.len() as u32,
                    _ => continue,
                };
                let values = match pattern[i] {
                    Some(Ground::Node(n)) if domain.contains(&n) => vec![n],
                    Some(_) => return Ok(false),
                    None => domain.collect(),
                };
                pos_slots.push((i, values));
            }
            let mut tuple: Vec<Ground> =
                slots.iter().map(|s| if s.sort == Sort::State { state } else { Ground::Node(0) }).collect();
            let mut args = vec![0u32; pos_slots.len()];
            fn rec(
                fb: &FactBase,
                pred: Predicate,
                pos_slots: &[(usize, Vec<u32>)],
                depth: usize,
                args: &mut Vec<u32>,
                tuple: &mut Vec<Ground>,
                f: &mut dyn FnMut(&[Ground]) -> bool,
            ) -> bool {
                if depth == pos_slots.len() {
                    return holds(fb, pred, args) && f(tuple);
                }
                let (slot, values) = &pos_slots[depth];
                for &v in values {
                    args[depth] = v;
                    tuple[*slot] = Ground::Node(v);
                    if rec(fb, pred, pos_slots, depth + 1, args, tuple, f) {
                        return true;
                    }
                }
                false
            }
            Ok(rec(fb, pred, &pos_slots, 0, &mut args, &mut tuple, f))
        }
    }
}
