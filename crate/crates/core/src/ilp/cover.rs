//! Coverage testing: does a clause hold for an encoded proof state?
//!
//! The head's state variable is bound to the state; the body is solved by
//! depth-first backtracking. At each step the solver takes the first
//! remaining literal whose arguments are all bound (a pure test), otherwise
//! the first one that can be called: a literal with an unbound state or
//! `dif` argument waits until it can. The result does not depend on body
//! order.

use thiserror::Error;

use crate::encoding::FactBase;
use crate::features::{self, FeatureError, Ground, Predicate, Sort};
use crate::ilp::clause::{Arg, Clause};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CoverError {
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("`{name}` expects {expected} arguments, got {got}")]
    Arity { name: String, expected: usize, got: usize },
    #[error("clause head must be `tac(State, Tactic)`")]
    BadHead,
    #[error("constant `{0}` cannot fill a position slot")]
    PositionConstant(String),
    #[error("no callable literal left: {0}")]
    Unsafe(String),
    #[error("body has {len} literals, proof depth bound is {bound}")]
    DepthExceeded { len: usize, bound: usize },
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, Copy)]
enum CArg {
    Var(u32),
    Const(Ground),
}

#[derive(Debug, Clone)]
struct CLit {
    pred: Predicate,
    args: Vec<CArg>,
}

/// Resolves the clause against one fact base. `Ok(None)` means a constant
/// does not occur in the state, so the clause cannot cover it.
fn compile(clause: &Clause, fb: &FactBase) -> Result<Option<Vec<CLit>>, CoverError> {
    let enc = fb.encoding();
    let mut out = Vec::with_capacity(clause.body.len());
    let mut absent = false;
    for lit in &clause.body {
        let pred =
            Predicate::from_name(&lit.predicate).ok_or_else(|| CoverError::UnknownPredicate(lit.predicate.clone()))?;
        let slots = pred.slots(enc);
        if slots.len() != lit.args.len() {
            return Err(CoverError::Arity { name: lit.predicate.clone(), expected: slots.len(), got: lit.args.len() });
        }
        let mut args = Vec::with_capacity(slots.len());
        for (a, s) in lit.args.iter().zip(slots) {
            args.push(match a {
                Arg::Var(v) => CArg::Var(*v),
                Arg::Const(c) => match s.sort {
                    Sort::State => match c.parse() {
                        Ok(id) => CArg::Const(Ground::State(id)),
                        Err(_) => {
                            absent = true;
                            CArg::Const(Ground::State(0))
                        }
                    },
                    Sort::Label | Sort::HypName => match fb.lookup_symbol(c) {
                        Some(sym) => CArg::Const(Ground::Sym(sym)),
                        None => {
                            absent = true;
                            CArg::Const(Ground::State(0))
                        }
                    },
                    _ => return Err(CoverError::PositionConstant(c.clone())),
                },
            });
        }
        out.push(CLit { pred, args });
    }
    Ok(if absent { None } else { Some(out) })
}

struct Solver<'a> {
    fb: &'a FactBase,
    lits: &'a [CLit],
    done: Vec<bool>,
    bindings: Vec<Option<Ground>>,
    error: Option<CoverError>,
}

impl Solver<'_> {
    fn is_bound(&self, a: CArg) -> bool {
        match a {
            CArg::Const(_) => true,
            CArg::Var(v) => self.bindings[v as usize].is_some(),
        }
    }

    fn solve(&mut self, remaining: usize) -> bool {
        if remaining == 0 {
            return true;
        }
        let enc = self.fb.encoding();
        let ground =
            (0..self.lits.len()).find(|&i| !self.done[i] && self.lits[i].args.iter().all(|&a| self.is_bound(a)));
        let next = ground.or_else(|| {
            (0..self.lits.len()).find(|&i| {
                !self.done[i]
                    && features::callable(enc, self.lits[i].pred, |slot| self.is_bound(self.lits[i].args[slot]))
            })
        });
        let Some(i) = next else {
            let stuck = (0..self.lits.len()).find(|&i| !self.done[i]).map(|i| self.lits[i].pred.name()).unwrap_or("");
            self.error = Some(CoverError::Unsafe(format!("`{stuck}` has unbound inputs")));
            return false;
        };
        self.done[i] = true;
        let lits = self.lits;
        let lit = &lits[i];
        let pattern: Vec<Option<Ground>> = lit
            .args
            .iter()
            .map(|a| match *a {
                CArg::Const(g) => Some(g),
                CArg::Var(v) => self.bindings[v as usize],
            })
            .collect();
        let fb = self.fb;
        let mut newly: Vec<u32> = Vec::with_capacity(lit.args.len());
        let result = features::for_each_solution(fb, lit.pred, &pattern, &mut |tuple| {
            newly.clear();
            let mut consistent = true;
            for (a, g) in lit.args.iter().zip(tuple) {
                if let CArg::Var(v) = *a {
                    match self.bindings[v as usize] {
                        Some(b) => {
                            if b != *g {
                                consistent = false;
                                break;
                            }
                        }
                        None => {
                            self.bindings[v as usize] = Some(*g);
                            newly.push(v);
                        }
                    }
                }
            }
            let found = consistent && self.solve(remaining - 1);
            for &v in &newly {
                self.bindings[v as usize] = None;
            }
            found || self.error.is_some()
        });
        self.done[i] = false;
        match result {
            Ok(stopped) => stopped && self.error.is_none(),
            Err(e) => {
                self.error.get_or_insert(CoverError::Feature(e));
                false
            }
        }
    }
}

/// Coverage with errors surfaced.
pub fn try_covers(clause: &Clause, fb: &FactBase, max_proof_depth: usize) -> Result<bool, CoverError> {
    if clause.body.len() > max_proof_depth {
        return Err(CoverError::DepthExceeded { len: clause.body.len(), bound: max_proof_depth });
    }
    let state_var = match (clause.head.args.len(), clause.head.args.first()) {
        (2, Some(Arg::Var(v))) => Some(*v),
        (2, Some(Arg::Const(c))) if c.parse() == Ok(fb.state_id()) => None,
        (2, Some(Arg::Const(_))) => return Ok(false),
        _ => return Err(CoverError::BadHead),
    };
    let Some(lits) = compile(clause, fb)? else {
        return Ok(false);
    };
    let mut bindings = vec![None; clause.var_count() as usize];
    if let Some(v) = state_var {
        bindings[v as usize] = Some(Ground::State(fb.state_id()));
    }
    let n = lits.len();
    let mut solver = Solver { fb, done: vec![false; n], lits: &lits, bindings, error: None };
    let found = solver.solve(n);
    match solver.error {
        Some(e) => Err(e),
        None => Ok(found),
    }
}

/// Whether some substitution makes every body literal true in `fb`.
/// Errors (unknown predicates, an exceeded depth bound, unsafe bodies) are
/// logged and count as non-coverage.
pub fn covers(clause: &Clause, fb: &FactBase, max_proof_depth: usize) -> bool {
    match try_covers(clause, fb, max_proof_depth) {
        Ok(b) => b,
        Err(e) => {
            log::warn!("coverage test of `{clause}` on state {} failed: {e}", fb.state_id());
            false
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{encode, Encoding};
    use crate::state::ProofState;

    const SIMPL: &str = "tac(A,\"simpl\") :- goal_node(const,A,B,C), goal_node(construct,A,D,E), \
        goal_above(A,B,D), goal_node(construct,A,F,E), dif(F,D), goal_above(A,B,F).";

    fn fb(goal: &str) -> FactBase {
        encode(&ProofState::new(4, goal.parse().unwrap(), "t", "T"), Encoding::Anonymous)
    }

    #[test]
    fn simpl_rule_on_subtraction_and_equation() {
        let c: Clause = SIMPL.parse().unwrap();
        let sub = fb("const:Coq.Init.Nat.sub(constr:Coq.Init.Datatypes.S(var:x), constr:Coq.Init.Datatypes.S(var:y))");
        assert!(covers(&c, &sub, 1000));
        let eq = fb("ind:Coq.Init.Logic.eq(var:x, var:x)");
        assert!(!covers(&c, &eq, 1000));
    }

    #[test]
    fn different_constructors_do_not_share_the_name_variable() {
        let c: Clause = SIMPL.parse().unwrap();
        let f = fb("const:f(constr:S(var:x), constr:O)");
        assert!(!covers(&c, &f, 1000));
    }

    #[test]
    fn empty_body_covers_everything() {
        let c: Clause = "tac(A,\"auto\").".parse().unwrap();
        assert!(covers(&c, &fb("var:x"), 1000));
    }

    #[test]
    fn order_independent() {
        let c: Clause = SIMPL.parse().unwrap();
        let mut rev = c.clone();
        rev.body.reverse();
        let sub = fb("const:sub(constr:S(var:x), constr:S(var:y))");
        assert!(covers(&rev, &sub, 1000));
    }

    #[test]
    fn depth_bound_and_errors() {
        let c: Clause = SIMPL.parse().unwrap();
        let sub = fb("const:sub(constr:S(var:x), constr:S(var:y))");
        assert!(matches!(try_covers(&c, &sub, 3), Err(CoverError::DepthExceeded { .. })));
        assert!(!covers(&c, &sub, 3));
        let bad: Clause = "tac(A,\"t\") :- p(A).".parse().unwrap();
        assert!(matches!(try_covers(&bad, &sub, 10), Err(CoverError::UnknownPredicate(_))));
        let unsafe_body: Clause = "tac(A,\"t\") :- dif(B,C).".parse().unwrap();
        assert!(matches!(try_covers(&unsafe_body, &sub, 10), Err(CoverError::Unsafe(_))));
    }

    #[test]
    fn hypothesis_literals() {
        let s = ProofState::new(9, "const:Q(var:x)".parse().unwrap(), "t", "T")
            .with_hyp("H1", "const:Q(var:x)".parse().unwrap())
            .with_hyp("H2", "op:prod(const:P(var:x), const:Q(var:x))".parse().unwrap());
        let f = encode(&s, Encoding::Anonymous);
        let c: Clause =
            "tac(A,\"assumption\") :- goal_node(const,A,B,C), is_goal_root(A,B), hyp_node(const,A,D,E,C), is_hyp_root(A,E), eq_goal_hyp_term(A,B,E)."
                .parse()
                .unwrap();
        assert!(covers(&c, &f, 100));
        let s2 = ProofState::new(9, "const:Q(var:x)".parse().unwrap(), "t", "T")
            .with_hyp("H2", "op:prod(const:P(var:x), const:Q(var:x))".parse().unwrap());
        assert!(!covers(&c, &encode(&s2, Encoding::Anonymous), 100));
    }
}
