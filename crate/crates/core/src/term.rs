//! Terms, node labels and positions.
//!
//! A [`Term`] is the AST of a goal or hypothesis. Applications are stored
//! head-at-node: the applied symbol labels the node and its arguments are
//! the children, so `S x - S y` becomes `sub(S(x), S(y))` with `sub` an
//! ancestor of both `S` nodes. Binders (`prod`, `lambda`) carry the binder
//! type as child 0 and the body as child 1; bound occurrences are `rel`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Category of an identifier node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IdentKind {
    Inductive,
    Constant,
    Constructor,
    Variable,
}

impl IdentKind {
    pub const ALL: [IdentKind; 4] =
        [IdentKind::Inductive, IdentKind::Constant, IdentKind::Constructor, IdentKind::Variable];

    /// Short key used by the corpus format and the term text syntax.
    pub fn key(self) -> &'static str {
        match self {
            IdentKind::Inductive => "ind",
            IdentKind::Constant => "const",
            IdentKind::Constructor => "constr",
            IdentKind::Variable => "var",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Some(match key {
            "ind" => IdentKind::Inductive,
            "const" => IdentKind::Constant,
            "constr" => IdentKind::Constructor,
            "var" => IdentKind::Variable,
            _ => return None,
        })
    }
}

/// Term constructors of the kernel term datatype.
///
/// The vocabulary is closed: `rel`, `prod`, `lambda`, `evar`, `app`, `case`,
/// `fix`, `cofix`, `let`, `proj`, `sort`, `cast`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TermOp {
    Rel,
    Prod,
    Lambda,
    Evar,
    App,
    Case,
    Fix,
    CoFix,
    Let,
    Proj,
    Sort,
    Cast,
}

impl TermOp {
    pub const ALL: [TermOp; 12] = [
        TermOp::Rel,
        TermOp::Prod,
        TermOp::Lambda,
        TermOp::Evar,
        TermOp::App,
        TermOp::Case,
        TermOp::Fix,
        TermOp::CoFix,
        TermOp::Let,
        TermOp::Proj,
        TermOp::Sort,
        TermOp::Cast,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TermOp::Rel => "rel",
            TermOp::Prod => "prod",
            TermOp::Lambda => "lambda",
            TermOp::Evar => "evar",
            TermOp::App => "app",
            TermOp::Case => "case",
            TermOp::Fix => "fix",
            TermOp::CoFix => "cofix",
            TermOp::Let => "let",
            TermOp::Proj => "proj",
            TermOp::Sort => "sort",
            TermOp::Cast => "cast",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        TermOp::ALL.into_iter().find(|op| op.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeLabel {
    Ident { kind: IdentKind, name: String },
    Op(TermOp),
}

impl NodeLabel {
    pub fn ident(kind: IdentKind, name: impl Into<String>) -> Self {
        NodeLabel::Ident { kind, name: name.into() }
    }

    /// The original name: the identifier name, or the constructor name for
    /// term operators.
    pub fn name(&self) -> &str {
        match self {
            NodeLabel::Ident { name, .. } => name,
            NodeLabel::Op(op) => op.name(),
        }
    }

    /// Corpus-format kind key (`ind`, `const`, `constr`, `var`, `op`).
    pub fn kind_key(&self) -> &'static str {
        match self {
            NodeLabel::Ident { kind, .. } => kind.key(),
            NodeLabel::Op(_) => "op",
        }
    }

    pub fn from_parts(kind: &str, name: &str) -> Result<Self, TermError> {
        if kind == "op" {
            return TermOp::from_name(name).map(NodeLabel::Op).ok_or_else(|| TermError::UnknownOp(name.to_string()));
        }
        let kind = IdentKind::from_key(kind).ok_or_else(|| TermError::UnknownKind(kind.to_string()))?;
        if name.is_empty() {
            return Err(TermError::EmptyName);
        }
        Ok(NodeLabel::Ident { kind, name: name.to_string() })
    }
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind_key(), self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TermError {
    #[error("unknown node kind `{0}`")]
    UnknownKind(String),
    #[error("unknown term operator `{0}`")]
    UnknownOp(String),
    #[error("identifier names must be non-empty")]
    EmptyName,
    #[error("invalid position {0}")]
    InvalidPosition(String),
    #[error("term syntax error at byte {at}: {msg}")]
    Syntax { at: usize, msg: String },
}

/// A rooted ordered tree of labeled nodes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term {
    pub label: NodeLabel,
    pub children: Vec<Term>,
}

impl Term {
    pub fn new(label: NodeLabel, children: Vec<Term>) -> Self {
        Term { label, children }
    }

    pub fn leaf(label: NodeLabel) -> Self {
        Term { label, children: Vec::new() }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(Term::node_count).sum::<usize>()
    }

    pub fn edge_count(&self) -> usize {
        self.node_count() - 1
    }

    pub fn node_at(&self, pos: &Position) -> Result<&NodeLabel, TermError> {
        self.subterm_at(pos).map(|t| &t.label)
    }

    pub fn subterm_at(&self, pos: &Position) -> Result<&Term, TermError> {
        let mut cur = self;
        for &i in pos.indices() {
            cur = cur.children.get(i as usize).ok_or_else(|| TermError::InvalidPosition(pos.to_string()))?;
        }
        Ok(cur)
    }

    pub fn is_valid(&self, pos: &Position) -> bool {
        self.subterm_at(pos).is_ok()
    }

    /// All positions in pre-order (which is also lexicographic path order).
    pub fn positions(&self) -> Vec<Position> {
        let mut out = Vec::with_capacity(self.node_count());
        let mut path = Vec::new();
        fn walk(t: &Term, path: &mut Vec<u32>, out: &mut Vec<Position>) {
            out.push(Position(path.clone()));
            for (i, c) in t.children.iter().enumerate() {
                path.push(i as u32);
                walk(c, path, out);
                path.pop();
            }
        }
        walk(self, &mut path, &mut out);
        out
    }

    /// Pre-order traversal yielding `(position, subterm)` pairs.
    pub fn walk(&self) -> Vec<(Position, &Term)> {
        let mut out = Vec::new();
        fn go<'a>(t: &'a Term, path: &mut Vec<u32>, out: &mut Vec<(Position, &'a Term)>) {
            out.push((Position(path.clone()), t));
            for (i, c) in t.children.iter().enumerate() {
                path.push(i as u32);
                go(c, path, out);
                path.pop();
            }
        }
        go(self, &mut Vec::new(), &mut out);
        out
    }
}

/// Text form: `kind:name(child, child, ...)`, e.g.
/// `const:Coq.Init.Nat.sub(constr:S(var:x), constr:S(var:y))`.
impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label)?;
        if !self.children.is_empty() {
            f.write_str("(")?;
            for (i, c) in self.children.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{c}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl FromStr for Term {
    type Err = TermError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = TermParser { src: s.as_bytes(), at: 0 };
        let t = p.term()?;
        p.skip_ws();
        if p.at != p.src.len() {
            return Err(p.err("trailing input"));
        }
        Ok(t)
    }
}

struct TermParser<'a> {
    src: &'a [u8],
    at: usize,
}

impl TermParser<'_> {
    fn err(&self, msg: &str) -> TermError {
        TermError::Syntax { at: self.at, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.at < self.src.len() && self.src[self.at].is_ascii_whitespace() {
            self.at += 1;
        }
    }

    fn word(&mut self, stop: &[u8]) -> &str {
        let start = self.at;
        while self.at < self.src.len() && !stop.contains(&self.src[self.at]) && !self.src[self.at].is_ascii_whitespace()
        {
            self.at += 1;
        }
        std::str::from_utf8(&self.src[start..self.at]).unwrap_or("")
    }

    fn term(&mut self) -> Result<Term, TermError> {
        self.skip_ws();
        let kind = self.word(b":(),").to_string();
        if self.src.get(self.at) != Some(&b':') {
            return Err(self.err("expected `kind:` prefix"));
        }
        self.at += 1;
        let name = self.word(b"(),").to_string();
        let label = NodeLabel::from_parts(&kind, &name)?;
        self.skip_ws();
        let mut children = Vec::new();
        if self.src.get(self.at) == Some(&b'(') {
            self.at += 1;
            loop {
                children.push(self.term()?);
                self.skip_ws();
                match self.src.get(self.at) {
                    Some(b',') => self.at += 1,
                    Some(b')') => {
                        self.at += 1;
                        break;
                    }
                    _ => return Err(self.err("expected `,` or `)`")),
                }
            }
        }
        Ok(Term { label, children })
    }
}

/// Path of 0-based child indices from the root; empty is the root.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Position(pub Vec<u32>);

impl Position {
    pub fn root() -> Self {
        Position(Vec::new())
    }

    pub fn indices(&self) -> &[u32] {
        &self.0
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, i: u32) -> Self {
        let mut p = self.0.clone();
        p.push(i);
        Position(p)
    }

    /// Proper ancestor test: `self` is a strict prefix of `other`.
    pub fn is_strict_prefix_of(&self, other: &Position) -> bool {
        self.0.len() < other.0.len() && other.0.starts_with(&self.0)
    }

    /// Document order of disjoint subtrees: neither path is a prefix of the
    /// other and `self` has the smaller index where they first differ.
    pub fn is_left_of(&self, other: &Position) -> bool {
        match self.0.iter().zip(&other.0).find(|(a, b)| a != b) {
            Some((a, b)) => a < b,
            None => false,
        }
    }
}

impl From<Vec<u32>> for Position {
    fn from(v: Vec<u32>) -> Self {
        Position(v)
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{x}")?;
        }
        f.write_str("]")
    }
}

/// A position inside a named hypothesis.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HypPosition {
    pub hyp_name: String,
    pub path: Position,
}

impl HypPosition {
    pub fn new(hyp_name: impl Into<String>, path: impl Into<Position>) -> Self {
        HypPosition { hyp_name: hyp_name.into(), path: path.into() }
    }
}

impl fmt::Display for HypPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}", self.hyp_name)?;
        for x in self.path.indices() {
            write!(f, ",{x}")?;
        }
        f.write_str("]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sub_sx_sy() -> Term {
        "const:Coq.Init.Nat.sub(constr:S(var:x), constr:S(var:y))".parse().unwrap()
    }

    #[test]
    fn node_at_examples() {
        let t = sub_sx_sy();
        assert_eq!(t.node_at(&Position::root()).unwrap().name(), "Coq.Init.Nat.sub");
        assert_eq!(t.node_at(&Position(vec![0, 0])).unwrap().name(), "x");
        assert!(matches!(t.node_at(&Position(vec![2])), Err(TermError::InvalidPosition(_))));
    }

    #[test]
    fn subterm_examples() {
        let t = sub_sx_sy();
        assert_eq!(t.subterm_at(&Position(vec![1])).unwrap().to_string(), "constr:S(var:y)");
        assert_eq!(t.subterm_at(&Position::root()).unwrap(), &t);
    }

    #[test]
    fn text_round_trip() {
        let t = sub_sx_sy();
        let again: Term = t.to_string().parse().unwrap();
        assert_eq!(t, again);
        let eq: Term = "ind:Coq.Init.Logic.eq(var:x, var:x)".parse().unwrap();
        assert_eq!(eq.node_count(), 3);
    }

    #[test]
    fn rejects_bad_syntax() {
        assert!("x".parse::<Term>().is_err());
        assert!("op:bogus".parse::<Term>().is_err());
        assert!("const:f(var:x".parse::<Term>().is_err());
        assert!("const:".parse::<Term>().is_err());
    }

    #[test]
    fn positions_are_preorder_and_lexicographic() {
        let t = sub_sx_sy();
        let ps = t.positions();
        assert_eq!(ps.len(), 5);
        let mut sorted = ps.clone();
        sorted.sort();
        assert_eq!(ps, sorted);
    }

    #[test]
    fn left_and_prefix() {
        let a = Position(vec![0, 0]);
        let b = Position(vec![1, 0]);
        assert!(a.is_left_of(&b));
        assert!(!b.is_left_of(&a));
        assert!(!Position(vec![0]).is_left_of(&Position(vec![0, 1])));
        assert!(Position(vec![0]).is_strict_prefix_of(&Position(vec![0, 1])));
        assert!(!Position(vec![0]).is_strict_prefix_of(&Position(vec![0])));
    }
}
