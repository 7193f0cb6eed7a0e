//! Definite clauses and their Prolog-compatible text form.
//!
//! ```text
//! tac(A,"simpl") :- goal_node(const,A,B,C), goal_above(A,B,D).
//! ```
//!
//! Head constants are always double-quoted. Body constants are printed bare
//! when they are plain atoms (`const`, `coq_Init_Logic_eq`) or integers, and
//! double-quoted otherwise. Variables are renamed canonically on parse and
//! printed as `A`..`Z`, `A1`..`Z1`, ...

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Arg {
    Var(u32),
    Const(String),
}

impl Arg {
    pub fn as_var(&self) -> Option<u32> {
        match self {
            Arg::Var(v) => Some(*v),
            Arg::Const(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub predicate: String,
    pub args: Vec<Arg>,
}

impl Literal {
    pub fn new(predicate: impl Into<String>, args: Vec<Arg>) -> Self {
        Literal { predicate: predicate.into(), args }
    }

    pub fn vars(&self) -> impl Iterator<Item = u32> + '_ {
        self.args.iter().filter_map(Arg::as_var)
    }
}

/// Name of the head predicate of tactic rules.
pub const HEAD_PREDICATE: &str = "tac";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Clause {
    pub head: Literal,
    pub body: Vec<Literal>,
}

impl Clause {
    /// Builds a clause and renames its variables canonically.
    pub fn new(head: Literal, body: Vec<Literal>) -> Self {
        Clause { head, body }.canonical()
    }

    /// `tac(A, "<tactic>")` with an empty body.
    pub fn tactic_head(tactic: &str) -> Literal {
        Literal::new(HEAD_PREDICATE, vec![Arg::Var(0), Arg::Const(tactic.to_string())])
    }

    /// Number of literals including the head.
    pub fn literal_count(&self) -> usize {
        1 + self.body.len()
    }

    /// The tactic named in a `tac(State, "name")` head.
    pub fn tactic(&self) -> Option<&str> {
        if self.head.predicate != HEAD_PREDICATE || self.head.args.len() != 2 {
            return None;
        }
        match &self.head.args[1] {
            Arg::Const(c) => Some(c),
            Arg::Var(_) => None,
        }
    }

    pub fn state_var(&self) -> Option<u32> {
        self.head.args.first().and_then(Arg::as_var)
    }

    pub fn literals(&self) -> impl Iterator<Item = &Literal> {
        std::iter::once(&self.head).chain(&self.body)
    }

    pub fn var_count(&self) -> u32 {
        self.literals().flat_map(Literal::vars).map(|v| v + 1).max().unwrap_or(0)
    }

    /// Renames variables to `0, 1, ...` in order of first occurrence, so
    /// that clauses equal up to renaming become structurally equal.
    pub fn canonical(&self) -> Clause {
        let mut map: HashMap<u32, u32> = HashMap::new();
        let mut rename = |lit: &Literal| Literal {
            predicate: lit.predicate.clone(),
            args: lit
                .args
                .iter()
                .map(|a| match a {
                    Arg::Var(v) => {
                        let next = map.len() as u32;
                        Arg::Var(*map.entry(*v).or_insert(next))
                    }
                    c => c.clone(),
                })
                .collect(),
        };
        let head = rename(&self.head);
        let body = self.body.iter().map(&mut rename).collect();
        Clause { head, body }
    }
}

pub fn var_name(v: u32) -> String {
    let letter = (b'A' + (v % 26) as u8) as char;
    match v / 26 {
        0 => letter.to_string(),
        n => format!("{letter}{n}"),
    }
}

fn is_bare_atom(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => chars.all(|c| c.is_ascii_alphanumeric() || c == '_'),
        Some(c) if c.is_ascii_digit() => chars.all(|c| c.is_ascii_digit()),
        _ => false,
    }
}

pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Bare when it is a plain atom or integer, double-quoted otherwise.
pub fn format_constant(s: &str) -> String {
    if is_bare_atom(s) {
        s.to_string()
    } else {
        quote(s)
    }
}

fn write_literal(f: &mut fmt::Formatter<'_>, lit: &Literal, quote_all: bool) -> fmt::Result {
    f.write_str(&lit.predicate)?;
    if lit.args.is_empty() {
        return Ok(());
    }
    f.write_str("(")?;
    for (i, a) in lit.args.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        match a {
            Arg::Var(v) => f.write_str(&var_name(*v))?,
            Arg::Const(c) if quote_all => f.write_str(&quote(c))?,
            Arg::Const(c) => f.write_str(&format_constant(c))?,
        }
    }
    f.write_str(")")
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_literal(f, self, false)
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_literal(f, &self.head, true)?;
        if !self.body.is_empty() {
            f.write_str(" :- ")?;
            for (i, lit) in self.body.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write_literal(f, lit, false)?;
            }
        }
        f.write_str(".")
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

impl FromStr for Clause {
    type Err = ParseError;

    /// Parses a single clause; the final `.` is optional.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = Parser::new(s);
        let c = p.clause(true)?;
        p.skip_ws();
        if !p.at_end() {
            return Err(p.err("trailing input after clause"));
        }
        Ok(c)
    }
}

/// Parses a rule file: clauses terminated by `.`, `%` line comments.
pub fn parse_clauses(text: &str) -> Result<Vec<Clause>, ParseError> {
    let mut p = Parser::new(text);
    let mut out = Vec::new();
    loop {
        p.skip_ws();
        if p.at_end() {
            return Ok(out);
        }
        out.push(p.clause(false)?);
    }
}

struct Parser {
    chars: Vec<char>,
    at: usize,
    line: usize,
    vars: HashMap<String, u32>,
}

impl Parser {
    fn new(src: &str) -> Self {
        Parser { chars: src.chars().collect(), at: 0, line: 1, vars: HashMap::new() }
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError { line: self.line, msg: msg.into() }
    }

    fn at_end(&self) -> bool {
        self.at >= self.chars.len()
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.at).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.at += 1;
        if c == '\n' {
            self.line += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '%' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn clause(&mut self, dot_optional: bool) -> Result<Clause, ParseError> {
        self.vars.clear();
        let head = self.literal()?;
        let mut body = Vec::new();
        self.skip_ws();
        if self.peek() == Some(':') {
            self.bump();
            if self.bump() != Some('-') {
                return Err(self.err("expected `:-`"));
            }
            loop {
                body.push(self.literal()?);
                self.skip_ws();
                if self.peek() == Some(',') {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.skip_ws();
        if self.peek() == Some('.') {
            self.bump();
        } else if !(dot_optional && self.at_end()) {
            return Err(self.err("expected `.` at end of clause"));
        }
        Ok(Clause { head, body }.canonical())
    }

    fn ident(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || c == '_' {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        s
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        self.skip_ws();
        let name = self.ident();
        if name.is_empty() || !name.starts_with(|c: char| c.is_ascii_lowercase()) {
            return Err(self.err("expected a predicate name"));
        }
        let mut args = Vec::new();
        self.skip_ws();
        if self.peek() == Some('(') {
            self.bump();
            loop {
                args.push(self.arg()?);
                self.skip_ws();
                match self.bump() {
                    Some(',') => continue,
                    Some(')') => break,
                    _ => return Err(self.err("expected `,` or `)` in argument list")),
                }
            }
        }
        Ok(Literal { predicate: name, args })
    }

    fn quoted(&mut self, delim: char) -> Result<String, ParseError> {
        let mut s = String::new();
        loop {
            match self.bump() {
                None => return Err(self.err("unterminated quoted constant")),
                Some('\\') => match self.bump() {
                    Some('n') => s.push('\n'),
                    Some(c) => s.push(c),
                    None => return Err(self.err("unterminated escape")),
                },
                Some(c) if c == delim => return Ok(s),
                Some(c) => s.push(c),
            }
        }
    }

    fn arg(&mut self) -> Result<Arg, ParseError> {
        self.skip_ws();
        match self.peek() {
            Some('"') => {
                self.bump();
                Ok(Arg::Const(self.quoted('"')?))
            }
            Some('\'') => {
                self.bump();
                Ok(Arg::Const(self.quoted('\'')?))
            }
            Some(c) if c.is_uppercase() || c == '_' => {
                let name = self.ident();
                let next = self.vars.len() as u32;
                if name == "_" {
                    // every `_` is a fresh variable
                    let fresh = format!("_#{next}");
                    self.vars.insert(fresh, next);
                    return Ok(Arg::Var(next));
                }
                Ok(Arg::Var(*self.vars.entry(name).or_insert(next)))
            }
            Some(c) if c.is_alphanumeric() => Ok(Arg::Const(self.ident())),
            _ => Err(self.err("expected an argument")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIMPL: &str = "tac(A,\"simpl\") :-
  goal_node(const,A,B,C), goal_node(construct,A,D,E),
  goal_above(A,B,D), goal_node(construct,A,F,E),dif(F,D),
  goal_above(A,B,F).     ";

    #[test]
    fn parses_listing_and_prints_canonically() {
        let c: Clause = SIMPL.trim().parse().unwrap();
        assert_eq!(c.tactic(), Some("simpl"));
        assert_eq!(c.body.len(), 6);
        assert_eq!(
            c.to_string(),
            "tac(A,\"simpl\") :- goal_node(const,A,B,C), goal_node(construct,A,D,E), goal_above(A,B,D), \
             goal_node(construct,A,F,E), dif(F,D), goal_above(A,B,F)."
        );
        let again: Clause = c.to_string().parse().unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn empty_body_and_quoted_constants() {
        let c: Clause = "tac(X,\"auto\").".parse().unwrap();
        assert!(c.body.is_empty());
        assert_eq!(c.to_string(), "tac(A,\"auto\").");
        let c: Clause = "tac(X,\"t\") :- goal_node(\"Coq.Init.Nat.add\",X,P), goal_node('x y',X,Q).".parse().unwrap();
        assert_eq!(c.to_string(), "tac(A,\"t\") :- goal_node(\"Coq.Init.Nat.add\",A,B), goal_node(\"x y\",A,C).");
    }

    #[test]
    fn underscore_is_fresh() {
        let c: Clause = "tac(A,\"t\") :- goal_node(x,A,_,_).".parse().unwrap();
        assert_eq!(c.body[0].args[2], Arg::Var(1));
        assert_eq!(c.body[0].args[3], Arg::Var(2));
    }

    #[test]
    fn canonical_renaming() {
        let a =
            Clause { head: Clause::tactic_head("t"), body: vec![Literal::new("p", vec![Arg::Var(0), Arg::Var(7)])] };
        let b =
            Clause { head: Clause::tactic_head("t"), body: vec![Literal::new("p", vec![Arg::Var(0), Arg::Var(3)])] };
        assert_ne!(a, b);
        assert_eq!(a.canonical(), b.canonical());
    }

    #[test]
    fn rule_file_with_comments() {
        let text = "% variant AF\ntac(A,\"a\") :- p(A).\n\n% x\ntac(A,\"b\").\n";
        let cs = parse_clauses(text).unwrap();
        assert_eq!(cs.len(), 2);
        let err = parse_clauses("tac(A,\"a\") :- p(A)\ntac(B,\"b\").").unwrap_err();
        assert_eq!(err.line, 2);
    }

    #[test]
    fn var_names() {
        assert_eq!(var_name(0), "A");
        assert_eq!(var_name(25), "Z");
        assert_eq!(var_name(26), "A1");
    }
}
