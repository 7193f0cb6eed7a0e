//! Proof states, corpora and the line-delimited corpus format.
//!
//! Each line is one JSON object:
//!
//! ```text
//! {"id":7,"theory":"Arith","tactic":"simpl","goal":{"k":"const","n":"f","c":[...]},"hyps":[{"name":"H","body":{...}}]}
//! ```
//!
//! Node objects carry `k` (`ind`, `const`, `constr`, `var` or `op`), `n` (the
//! name) and `c` (children, omitted when empty).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::term::{NodeLabel, Term, TermError};

pub type StateId = u64;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hypothesis {
    pub name: String,
    pub body: Term,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProofState {
    pub id: StateId,
    pub goal: Term,
    pub hypotheses: Vec<Hypothesis>,
    /// Ground-truth tactic, whitespace-normalized.
    pub tactic: String,
    pub theory: String,
}

impl ProofState {
    pub fn new(id: StateId, goal: Term, tactic: &str, theory: &str) -> Self {
        ProofState { id, goal, hypotheses: Vec::new(), tactic: normalize_tactic(tactic), theory: theory.to_string() }
    }

    pub fn with_hyp(mut self, name: &str, body: Term) -> Self {
        self.hypotheses.push(Hypothesis { name: name.to_string(), body });
        self
    }

    pub fn hypothesis(&self, name: &str) -> Option<&Hypothesis> {
        self.hypotheses.iter().find(|h| h.name == name)
    }

    pub fn node_count(&self) -> usize {
        self.goal.node_count() + self.hypotheses.iter().map(|h| h.body.node_count()).sum::<usize>()
    }

    fn check(&self) -> Result<(), String> {
        let mut seen = HashSet::new();
        for h in &self.hypotheses {
            if !seen.insert(h.name.as_str()) {
                return Err(format!("duplicate hypothesis name `{}` in state {}", h.name, self.id));
            }
        }
        Ok(())
    }
}

/// Collapses runs of whitespace into single spaces and trims the ends.
pub fn normalize_tactic(tactic: &str) -> String {
    tactic.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: duplicate state id {id}")]
    DuplicateId { line: usize, id: StateId },
    #[error("line {line}: {msg}")]
    DuplicateHypothesis { line: usize, msg: String },
    #[error("theory `{0}` has no split assignment")]
    UnassignedTheory(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub states: Vec<ProofState>,
    pub split: BTreeMap<String, Split>,
}

impl Corpus {
    /// Builds a corpus, assigning every theory to the training split.
    pub fn new(states: Vec<ProofState>) -> Self {
        let split = states.iter().map(|s| (s.theory.clone(), Split::Train)).collect();
        Corpus { states, split }
    }

    /// Replaces the split map; every theory in the corpus must be assigned.
    pub fn with_split(mut self, split: BTreeMap<String, Split>) -> Result<Self, CorpusError> {
        for s in &self.states {
            if !split.contains_key(&s.theory) {
                return Err(CorpusError::UnassignedTheory(s.theory.clone()));
            }
        }
        self.split = split;
        Ok(self)
    }

    pub fn split_of(&self, state: &ProofState) -> Option<Split> {
        self.split.get(&state.theory).copied()
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = &ProofState> {
        self.states.iter().filter(move |s| self.split_of(s) == Some(split))
    }

    pub fn get(&self, id: StateId) -> Option<&ProofState> {
        self.states.iter().find(|s| s.id == id)
    }

    pub fn theories(&self, split: Split) -> BTreeSet<String> {
        self.in_split(split).map(|s| s.theory.clone()).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct NodeRecord {
    k: String,
    n: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    c: Vec<NodeRecord>,
}

#[derive(Serialize, Deserialize)]
struct HypRecord {
    name: String,
    body: NodeRecord,
}

#[derive(Serialize, Deserialize)]
struct StateRecord {
    id: StateId,
    theory: String,
    tactic: String,
    goal: NodeRecord,
    hyps: Vec<HypRecord>,
}

fn node_to_term(rec: NodeRecord) -> Result<Term, TermError> {
    let label = NodeLabel::from_parts(&rec.k, &rec.n)?;
    let children = rec.c.into_iter().map(node_to_term).collect::<Result<_, _>>()?;
    Ok(Term { label, children })
}

fn term_to_node(t: &Term) -> NodeRecord {
    NodeRecord {
        k: t.label.kind_key().to_string(),
        n: t.label.name().to_string(),
        c: t.children.iter().map(term_to_node).collect(),
    }
}

/// Parses one record. `line` is only used for error reporting.
pub fn parse_state(text: &str, line: usize) -> Result<ProofState, CorpusError> {
    let malformed = |msg: String| CorpusError::Malformed { line, msg };
    let rec: StateRecord = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    let goal = node_to_term(rec.goal).map_err(|e| malformed(e.to_string()))?;
    let hypotheses = rec
        .hyps
        .into_iter()
        .map(|h| Ok(Hypothesis { name: h.name, body: node_to_term(h.body)? }))
        .collect::<Result<Vec<_>, TermError>>()
        .map_err(|e| malformed(e.to_string()))?;
    let state = ProofState { id: rec.id, goal, hypotheses, tactic: normalize_tactic(&rec.tactic), theory: rec.theory };
    state.check().map_err(|msg| CorpusError::DuplicateHypothesis { line, msg })?;
    Ok(state)
}

pub fn serialize_state(state: &ProofState) -> String {
    let rec = StateRecord {
        id: state.id,
        theory: state.theory.clone(),
        tactic: state.tactic.clone(),
        goal: term_to_node(&state.goal),
        hyps: state
            .hypotheses
            .iter()
            .map(|h| HypRecord { name: h.name.clone(), body: term_to_node(&h.body) })
            .collect(),
    };
    serde_json::to_string(&rec).expect("corpus records always serialize")
}

/// Reads a line-delimited corpus. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn parse_corpus<R: BufRead>(input: R) -> Result<Corpus, CorpusError> {
    let mut states = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let state = parse_state(&line, line_no)?;
        if !ids.insert(state.id) {
            return Err(CorpusError::DuplicateId { line: line_no, id: state.id });
        }
        states.push(state);
    }
    Ok(Corpus::new(states))
}

pub fn serialize_corpus<W: Write>(corpus: &Corpus, mut out: W) -> std::io::Result<()> {
    for s in &corpus.states {
        writeln!(out, "{}", serialize_state(s))?;
    }
    Ok(())
}

pub fn corpus_to_string(corpus: &Corpus) -> String {
    let mut buf = Vec::new();
    serialize_corpus(corpus, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}
