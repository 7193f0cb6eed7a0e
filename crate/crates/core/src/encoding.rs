//! Logic-fact view of proof states.
//!
//! Every AST node becomes one representation fact:
//!
//! * original: `goal_node(name, state, pos)` and
//!   `hyp_node(name, state, hyp_name, hyp_pos)`
//! * anonymous: `goal_node(anon, state, pos, name)` and
//!   `hyp_node(anon, state, hyp_name, hyp_pos, name)`
//!
//! Feature predicates are not materialized here; they are evaluated on
//! demand by [`crate::features`] against the node table kept in a
//! [`FactBase`].

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ilp::clause::format_constant;
use crate::state::{ProofState, StateId};
use crate::term::{HypPosition, IdentKind, NodeLabel, Position, Term, TermOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Encoding {
    Original,
    Anonymous,
}

/// Identifiers kept verbatim by anonymization, by normalized name.
pub const RETAINED_IDENTIFIERS: [&str; 9] = [
    "coq_Init_Logic_False",
    "coq_Init_Logic_True",
    "coq_Init_Logic_and",
    "coq_Init_Logic_or",
    "coq_Init_Logic_iff",
    "coq_Init_Logic_not",
    "coq_Init_Logic_eq",
    "coq_Init_Datatypes_true",
    "coq_Init_Datatypes_false",
];

/// Term operators kept verbatim by anonymization.
pub const RETAINED_OPS: [TermOp; 4] = [TermOp::Rel, TermOp::Prod, TermOp::Lambda, TermOp::Evar];

/// Token used for every term operator outside [`RETAINED_OPS`].
pub const GENERIC_OP_TOKEN: &str = "term_op";

/// `Coq.Init.Logic.eq` becomes `coq_Init_Logic_eq`.
pub fn normalize_identifier(name: &str) -> String {
    let replaced = name.replace('.', "_");
    let mut chars = replaced.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

pub fn category_token(kind: IdentKind) -> &'static str {
    match kind {
        IdentKind::Inductive => "ind",
        IdentKind::Constant => "const",
        IdentKind::Constructor => "construct",
        IdentKind::Variable => "var",
    }
}

pub fn anonymize(label: &NodeLabel) -> String {
    match label {
        NodeLabel::Ident { kind, name } => {
            let normalized = normalize_identifier(name);
            if RETAINED_IDENTIFIERS.contains(&normalized.as_str()) {
                normalized
            } else {
                category_token(*kind).to_string()
            }
        }
        NodeLabel::Op(op) if RETAINED_OPS.contains(op) => op.name().to_string(),
        NodeLabel::Op(_) => GENERIC_OP_TOKEN.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct GoalNodeFact {
    pub anon_name: Option<String>,
    pub state_id: StateId,
    pub pos: Position,
    pub origin_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct HypNodeFact {
    pub anon_name: Option<String>,
    pub state_id: StateId,
    pub hyp_name: String,
    pub pos: HypPosition,
    pub origin_name: String,
}

pub(crate) type Sym = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Owner {
    Goal,
    /// Index into `FactBase::hyps`.
    Hyp(u32),
}

#[derive(Debug, Clone)]
pub(crate) struct NodeEntry {
    pub owner: Owner,
    pub path: Position,
    pub anon: Sym,
    pub orig: Sym,
    /// Number of nodes in the subtree rooted here.
    pub size: u32,
    /// Structural-equality class over original labels, shared between the
    /// goal and all hypotheses of the state.
    pub class: u32,
}

#[derive(Debug, Clone)]
pub(crate) struct HypBlock {
    pub name: String,
    pub name_sym: Sym,
    pub first: u32,
}

/// The encoded facts of one proof state.
///
/// Nodes are stored in pre-order: goal nodes first, then each hypothesis
/// (sorted by name). Within one tree, pre-order equals lexicographic path
/// order, so node indices double as the deterministic enumeration order.
#[derive(Debug, Clone)]
pub struct FactBase {
    state: Arc<ProofState>,
    encoding: Encoding,
    pub(crate) nodes: Vec<NodeEntry>,
    pub(crate) goal_len: u32,
    pub(crate) hyps: Vec<HypBlock>,
    symbols: Vec<String>,
    sym_index: HashMap<String, Sym>,
    goal_index: HashMap<Position, u32>,
    hyp_index: HashMap<HypPosition, u32>,
}

struct Builder {
    symbols: Vec<String>,
    sym_index: HashMap<String, Sym>,
    classes: HashMap<(NodeLabel, Vec<u32>), u32>,
    nodes: Vec<NodeEntry>,
}

impl Builder {
    fn intern(&mut self, s: &str) -> Sym {
        if let Some(&id) = self.sym_index.get(s) {
            return id;
        }
        let id = self.symbols.len() as Sym;
        self.symbols.push(s.to_string());
        self.sym_index.insert(s.to_string(), id);
        id
    }

    /// Appends the subtree in pre-order and returns its equality class.
    fn add_tree(&mut self, t: &Term, owner: Owner, path: &mut Vec<u32>) -> u32 {
        let idx = self.nodes.len();
        let anon = self.intern(&anonymize(&t.label));
        let orig = self.intern(t.label.name());
        self.nodes.push(NodeEntry { owner, path: Position(path.clone()), anon, orig, size: 1, class: 0 });
        let mut child_classes = Vec::with_capacity(t.children.len());
        for (i, c) in t.children.iter().enumerate() {
            path.push(i as u32);
            child_classes.push(self.add_tree(c, owner, path));
            path.pop();
        }
        let next = self.classes.len() as u32;
        let class = *self.classes.entry((t.label.clone(), child_classes)).or_insert(next);
        let size = (self.nodes.len() - idx) as u32;
        self.nodes[idx].size = size;
        self.nodes[idx].class = class;
        class
    }
}

/// Encodes a proof state. Total on well-formed states.
pub fn encode(state: &ProofState, encoding: Encoding) -> FactBase {
    FactBase::new(Arc::new(state.clone()), encoding)
}

impl FactBase {
    pub fn new(state: Arc<ProofState>, encoding: Encoding) -> Self {
        let mut b = Builder {
            symbols: Vec::new(),
            sym_index: HashMap::new(),
            classes: HashMap::new(),
            nodes: Vec::with_capacity(state.node_count()),
        };
        b.add_tree(&state.goal, Owner::Goal, &mut Vec::new());
        let goal_len = b.nodes.len() as u32;

        let mut order: Vec<usize> = (0..state.hypotheses.len()).collect();
        order.sort_by(|&a, &b| state.hypotheses[a].name.cmp(&state.hypotheses[b].name));
        let mut hyps = Vec::with_capacity(order.len());
        for (slot, &hi) in order.iter().enumerate() {
            let h = &state.hypotheses[hi];
            let first = b.nodes.len() as u32;
            let name_sym = b.intern(&h.name);
            b.add_tree(&h.body, Owner::Hyp(slot as u32), &mut Vec::new());
            hyps.push(HypBlock { name: h.name.clone(), name_sym, first });
        }

        let mut goal_index = HashMap::new();
        let mut hyp_index = HashMap::new();
        for (i, n) in b.nodes.iter().enumerate() {
            match n.owner {
                Owner::Goal => {
                    goal_index.insert(n.path.clone(), i as u32);
                }
                Owner::Hyp(h) => {
                    hyp_index.insert(HypPosition::new(hyps[h as usize].name.clone(), n.path.clone()), i as u32);
                }
            }
        }

        FactBase {
            state,
            encoding,
            nodes: b.nodes,
            goal_len,
            hyps,
            symbols: b.symbols,
            sym_index: b.sym_index,
            goal_index,
            hyp_index,
        }
    }

    pub fn state(&self) -> &ProofState {
        &self.state
    }

    pub fn state_id(&self) -> StateId {
        self.state.id
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub(crate) fn symbol(&self, s: Sym) -> &str {
        &self.symbols[s as usize]
    }

    pub(crate) fn lookup_symbol(&self, s: &str) -> Option<Sym> {
        self.sym_index.get(s).copied()
    }

    pub(crate) fn goal_node_index(&self, pos: &Position) -> Option<u32> {
        self.goal_index.get(pos).copied()
    }

    pub(crate) fn hyp_node_index(&self, pos: &HypPosition) -> Option<u32> {
        self.hyp_index.get(pos).copied()
    }

    pub(crate) fn is_goal_node(&self, idx: u32) -> bool {
        idx < self.goal_len
    }

    pub(crate) fn hyp_position(&self, idx: u32) -> HypPosition {
        let n = &self.nodes[idx as usize];
        match n.owner {
            Owner::Hyp(h) => HypPosition::new(self.hyps[h as usize].name.clone(), n.path.clone()),
            Owner::Goal => panic!("node {idx} is a goal node"),
        }
    }

    /// The value of the constant (`#`) slot of a representation fact.
    pub(crate) fn head_symbol(&self, idx: u32) -> Sym {
        let n = &self.nodes[idx as usize];
        match self.encoding {
            Encoding::Anonymous => n.anon,
            Encoding::Original => n.orig,
        }
    }

    pub fn goal_facts(&self) -> Vec<GoalNodeFact> {
        self.nodes[..self.goal_len as usize]
            .iter()
            .map(|n| GoalNodeFact {
                anon_name: self.anon_of(n),
                state_id: self.state.id,
                pos: n.path.clone(),
                origin_name: self.symbol(n.orig).to_string(),
            })
            .collect()
    }

    pub fn hyp_facts(&self) -> Vec<HypNodeFact> {
        (self.goal_len..self.nodes.len() as u32)
            .map(|i| {
                let n = &self.nodes[i as usize];
                let pos = self.hyp_position(i);
                HypNodeFact {
                    anon_name: self.anon_of(n),
                    state_id: self.state.id,
                    hyp_name: pos.hyp_name.clone(),
                    pos,
                    origin_name: self.symbol(n.orig).to_string(),
                }
            })
            .collect()
    }

    fn anon_of(&self, n: &NodeEntry) -> Option<String> {
        match self.encoding {
            Encoding::Anonymous => Some(self.symbol(n.anon).to_string()),
            Encoding::Original => None,
        }
    }

    /// Prolog-compatible dump, one fact per line.
    pub fn to_prolog(&self) -> String {
        let mut out = String::new();
        let id = self.state.id;
        for f in self.goal_facts() {
            let orig = format_constant(&f.origin_name);
            match f.anon_name {
                Some(a) => writeln!(out, "goal_node({}, {id}, {}, {orig}).", format_constant(&a), f.pos),
                None => writeln!(out, "goal_node({orig}, {id}, {}).", f.pos),
            }
            .expect("writing to a String cannot fail");
        }
        for f in self.hyp_facts() {
            let orig = format_constant(&f.origin_name);
            let hyp = format_constant(&f.hyp_name);
            match f.anon_name {
                Some(a) => writeln!(out, "hyp_node({}, {id}, {hyp}, {}, {orig}).", format_constant(&a), f.pos),
                None => writeln!(out, "hyp_node({orig}, {id}, {hyp}, {}).", f.pos),
            }
            .expect("writing to a String cannot fail");
        }
        out
    }
}

/// Encoded fact bases of many states, keyed by state id.
#[derive(Debug, Clone, Default)]
pub struct FactStore {
    bases: HashMap<StateId, FactBase>,
}

impl FactStore {
    /// Encodes the given states in parallel.
    pub fn build<'a>(states: impl IntoIterator<Item = &'a ProofState>, encoding: Encoding) -> Self {
        let states: Vec<&ProofState> = states.into_iter().collect();
        let bases = states.par_iter().map(|s| (s.id, encode(s, encoding))).collect();
        FactStore { bases }
    }

    pub fn get(&self, id: StateId) -> Option<&FactBase> {
        self.bases.get(&id)
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }
}
