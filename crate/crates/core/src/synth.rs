//! Synthetic corpora with planted tactic patterns.
//!
//! Each planted tactic comes with a structural pattern its states satisfy:
//!
//! * `reflexivity`: the goal is an equation with equal sides;
//! * `assumption`: some hypothesis equals the goal;
//! * `simpl`: a constant sits above two distinct constructors of one name;
//! * `specialize`: a hypothesis `P -> Q` next to a hypothesis `P`.
//!
//! Distractor states (labelled `intros`) satisfy none of them. Half of them
//! are near misses with the shape of a pattern but no planted equality (an
//! equation with unrelated sides, an implication whose premise is not a
//! hypothesis, a constant above one `S` only, and so on); the rest are
//! random terms. Identifier
//! names are drawn without replacement within a state, so two subterms of a
//! state are equal only where a pattern plants them.
//!
//! Generated states are checked against [`patterns_of`], and resampled if
//! they satisfy another pattern than the intended one.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::selection::{Automation, AutomationOracle};
use crate::state::{Corpus, ProofState, Split, StateId};
use crate::term::{IdentKind, NodeLabel, Term, TermOp};

pub const EQ: &str = "Coq.Init.Logic.eq";
pub const SUCC: &str = "Coq.Init.Datatypes.S";
pub const ZERO: &str = "Coq.Init.Datatypes.O";
pub const DISTRACTOR_TACTIC: &str = "intros";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pattern {
    EqualSides,
    GoalInHypothesis,
    RepeatedConstructor,
    HypothesisPremise,
}

impl Pattern {
    pub const ALL: [Pattern; 4] =
        [Pattern::EqualSides, Pattern::GoalInHypothesis, Pattern::RepeatedConstructor, Pattern::HypothesisPremise];

    pub fn tactic(self) -> &'static str {
        match self {
            Pattern::EqualSides => "reflexivity",
            Pattern::GoalInHypothesis => "assumption",
            Pattern::RepeatedConstructor => "simpl",
            Pattern::HypothesisPremise => "specialize",
        }
    }

    /// Automation tactics closing a state with this pattern.
    fn closed_by(self) -> &'static [Automation] {
        use Automation::*;
        match self {
            Pattern::EqualSides => &[Reflexivity, Trivial, Auto],
            Pattern::GoalInHypothesis => &[Assumption, Trivial, Auto],
            _ => &[],
        }
    }
}

fn descendants(t: &Term) -> Vec<&Term> {
    t.walk().into_iter().skip(1).map(|(_, s)| s).collect()
}

fn has_repeated_constructor(t: &Term) -> bool {
    t.walk().into_iter().any(|(_, s)| {
        matches!(s.label, NodeLabel::Ident { kind: IdentKind::Constant, .. }) && {
            let below: Vec<&str> = descendants(s)
                .into_iter()
                .filter_map(|d| match &d.label {
                    NodeLabel::Ident { kind: IdentKind::Constructor, name } => Some(name.as_str()),
                    _ => None,
                })
                .collect();
            let distinct: HashSet<&str> = below.iter().copied().collect();
            distinct.len() < below.len()
        }
    })
}

/// The planted patterns a state satisfies, checked directly on its terms.
pub fn patterns_of(state: &ProofState) -> BTreeSet<Pattern> {
    let mut out = BTreeSet::new();
    let g = &state.goal;
    if matches!(&g.label, NodeLabel::Ident { name, .. } if name == EQ)
        && g.children.len() == 2
        && g.children[0] == g.children[1]
    {
        out.insert(Pattern::EqualSides);
    }
    if state.hypotheses.iter().any(|h| h.body == *g) {
        out.insert(Pattern::GoalInHypothesis);
    }
    if has_repeated_constructor(g) || state.hypotheses.iter().any(|h| has_repeated_constructor(&h.body)) {
        out.insert(Pattern::RepeatedConstructor);
    }
    let premise = state.hypotheses.iter().any(|imp| {
        imp.body.label == NodeLabel::Op(TermOp::Prod)
            && imp.body.children.len() == 2
            && state.hypotheses.iter().any(|h| h.name != imp.name && h.body == imp.body.children[0])
    });
    if premise {
        out.insert(Pattern::HypothesisPremise);
    }
    out
}

/// Sizes of one theory: planted states per tactic and distractors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheorySize {
    pub per_tactic: usize,
    pub distractors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub train: TheorySize,
    pub validation: TheorySize,
    /// One entry per test theory.
    pub test: Vec<TheorySize>,
    /// Share of distractors built as near misses.
    pub near_miss: f64,
    /// Share of equal-sides and goal-in-hypothesis states labelled with a
    /// stronger automation tactic than the one the pattern suggests.
    pub relabel: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            train: TheorySize { per_tactic: 50, distractors: 200 },
            validation: TheorySize { per_tactic: 20, distractors: 80 },
            test: vec![TheorySize { per_tactic: 15, distractors: 60 }; 2],
            near_miss: 0.5,
            relabel: 0.25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub corpus: Corpus,
    pub oracle: AutomationOracle,
    /// Planted pattern of each state; distractors are absent.
    pub planted: BTreeMap<StateId, Pattern>,
}

struct Names<'r> {
    rng: &'r mut ChaCha8Rng,
    used: HashSet<String>,
}

impl Names<'_> {
    fn fresh(&mut self, kind: IdentKind) -> NodeLabel {
        let prefix = match kind {
            IdentKind::Constant => "Syn.f",
            IdentKind::Inductive => "Syn.T",
            IdentKind::Constructor => "Syn.C",
            IdentKind::Variable => "x",
        };
        loop {
            let name = format!("{prefix}{}", self.rng.gen_range(0..500));
            if self.used.insert(name.clone()) {
                return NodeLabel::ident(kind, name);
            }
        }
    }

    fn leaf(&mut self) -> Term {
        let kind = match self.rng.gen_range(0..10) {
            0..=5 => IdentKind::Variable,
            6..=8 => IdentKind::Constant,
            _ => IdentKind::Inductive,
        };
        Term::leaf(self.fresh(kind))
    }

    /// A constant applied to one or two arguments.
    fn app(&mut self, depth: usize) -> Term {
        let label = self.fresh(IdentKind::Constant);
        let arity = self.rng.gen_range(1..=2);
        let children = (0..arity).map(|_| self.term(depth.saturating_sub(1))).collect();
        Term::new(label, children)
    }

    fn term(&mut self, depth: usize) -> Term {
        if depth == 0 || self.rng.gen_bool(0.4) {
            self.leaf()
        } else {
            self.app(depth)
        }
    }
}

fn succ(arg: Term) -> Term {
    Term::new(NodeLabel::ident(IdentKind::Constructor, SUCC), vec![arg])
}

fn prod(a: Term, b: Term) -> Term {
    Term::new(NodeLabel::Op(TermOp::Prod), vec![a, b])
}

fn eq(a: Term, b: Term) -> Term {
    Term::new(NodeLabel::ident(IdentKind::Inductive, EQ), vec![a, b])
}

enum Kind {
    Planted(Pattern),
    NearMiss(Pattern),
    Random,
}

struct Draft {
    goal: Term,
    hyps: Vec<Term>,
}

fn draft(kind: &Kind, n: &mut Names<'_>) -> Draft {
    let extra = n.rng.gen_range(0..=2);
    let mut hyps: Vec<Term> = (0..extra).map(|_| n.term(2)).collect();
    let goal = match kind {
        Kind::Planted(Pattern::EqualSides) => {
            let side = n.app(2);
            eq(side.clone(), side)
        }
        Kind::NearMiss(Pattern::EqualSides) => {
            let (a, b) = (n.app(2), n.app(2));
            eq(a, b)
        }
        Kind::Planted(Pattern::GoalInHypothesis) => {
            let g = n.app(2);
            let at = n.rng.gen_range(0..=hyps.len());
            hyps.insert(at, g.clone());
            g
        }
        Kind::NearMiss(Pattern::GoalInHypothesis) => {
            let g = n.app(2);
            let at = n.rng.gen_range(0..=hyps.len());
            let h = n.app(2);
            hyps.insert(at, h);
            g
        }
        Kind::Planted(Pattern::RepeatedConstructor) => {
            let inner = {
                let head = n.fresh(IdentKind::Constant);
                let (a, b) = (n.term(1), n.term(1));
                Term::new(head, vec![succ(a), succ(b)])
            };
            if n.rng.gen_bool(0.5) {
                let head = n.fresh(IdentKind::Constant);
                let other = n.term(1);
                Term::new(head, vec![inner, other])
            } else {
                inner
            }
        }
        Kind::NearMiss(Pattern::RepeatedConstructor) => {
            let head = n.fresh(IdentKind::Constant);
            let a = n.term(1);
            let other = if n.rng.gen_bool(0.5) {
                Term::leaf(NodeLabel::ident(IdentKind::Constructor, ZERO))
            } else {
                n.term(1)
            };
            Term::new(head, vec![succ(a), other])
        }
        Kind::Planted(Pattern::HypothesisPremise) | Kind::NearMiss(Pattern::HypothesisPremise) => {
            let p = n.app(1);
            let q = n.term(1);
            let held = if matches!(kind, Kind::Planted(_)) { p.clone() } else { n.app(1) };
            let at = n.rng.gen_range(0..=hyps.len());
            hyps.insert(at, held);
            let at = n.rng.gen_range(0..=hyps.len());
            hyps.insert(at, prod(p, q));
            n.app(2)
        }
        Kind::Random => n.app(2),
    };
    Draft { goal, hyps }
}

fn raw_label(kind: &Kind, relabel: f64, rng: &mut ChaCha8Rng) -> String {
    match kind {
        Kind::Planted(Pattern::EqualSides | Pattern::GoalInHypothesis) if rng.gen_bool(relabel) => {
            if rng.gen_bool(0.5) { "trivial" } else { "auto" }.to_string()
        }
        Kind::Planted(p) => p.tactic().to_string(),
        _ => DISTRACTOR_TACTIC.to_string(),
    }
}

/// Generates the corpus, its automation oracle and the planted patterns.
/// Theories are `train`, `validation` and `test1`, `test2`, ...
pub fn generate(config: &SynthConfig) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut theories = vec![("train".to_string(), Split::Train, config.train)];
    theories.push(("validation".to_string(), Split::Validation, config.validation));
    for (i, size) in config.test.iter().enumerate() {
        theories.push((format!("test{}", i + 1), Split::Test, *size));
    }

    let mut states = Vec::new();
    let mut split = BTreeMap::new();
    let mut table = BTreeMap::new();
    let mut planted = BTreeMap::new();
    let mut next_id: StateId = 1;
    for (theory, which, size) in theories {
        split.insert(theory.clone(), which);
        let mut kinds: Vec<Kind> = Vec::new();
        for p in Pattern::ALL {
            kinds.extend((0..size.per_tactic).map(|_| Kind::Planted(p)));
        }
        let near = (size.distractors as f64 * config.near_miss.clamp(0.0, 1.0)).round() as usize;
        for i in 0..size.distractors {
            kinds.push(if i < near { Kind::NearMiss(Pattern::ALL[i % Pattern::ALL.len()]) } else { Kind::Random });
        }
        kinds.shuffle(&mut rng);
        for kind in kinds {
            let id = next_id;
            next_id += 1;
            let want: BTreeSet<Pattern> = match kind {
                Kind::Planted(p) => [p].into(),
                _ => BTreeSet::new(),
            };
            let state = loop {
                let mut names = Names { rng: &mut rng, used: HashSet::new() };
                let d = draft(&kind, &mut names);
                let label = raw_label(&kind, config.relabel, &mut rng);
                let mut s = ProofState::new(id, d.goal, &label, &theory);
                for (i, h) in d.hyps.into_iter().enumerate() {
                    s = s.with_hyp(&format!("H{i}"), h);
                }
                if patterns_of(&s) == want {
                    break s;
                }
            };
            if let Kind::Planted(p) = kind {
                planted.insert(id, p);
                if !p.closed_by().is_empty() {
                    table.insert(id, p.closed_by().iter().copied().collect());
                }
            }
            states.push(state);
        }
    }
    let corpus = Corpus::new(states).with_split(split).expect("every theory has a split");
    let oracle = AutomationOracle::new(table).expect("planted closures are monotone");
    Synthetic { corpus, oracle, planted }
}
