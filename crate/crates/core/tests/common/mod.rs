//! Random generators and brute-force oracles shared by the integration tests.
//!
//! The oracles work on the raw terms of a proof state and enumerate
//! candidates exhaustively; they share no code with the solver.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tacrule_core::encoding::{anonymize, Encoding};
use tacrule_core::features::{Predicate, Sort, Value};
use tacrule_core::ilp::clause::{Arg, Clause, Literal};
use tacrule_core::ilp::modes::{check_mode_consistency, Variant};
use tacrule_core::term::{HypPosition, IdentKind, NodeLabel, Position, Term, TermOp};
use tacrule_core::ProofState;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Proof states.

/// A small alphabet, so equal subterms and repeated labels are common.
fn random_label(rng: &mut ChaCha8Rng) -> NodeLabel {
    match rng.gen_range(0..10) {
        0 | 1 => NodeLabel::ident(IdentKind::Constant, *["f", "g", "Coq.Init.Nat.add"].choose(rng).unwrap()),
        2 | 3 => NodeLabel::ident(IdentKind::Variable, *["x", "y"].choose(rng).unwrap()),
        4 => NodeLabel::ident(
            IdentKind::Constructor,
            *["Coq.Init.Datatypes.S", "Coq.Init.Datatypes.O"].choose(rng).unwrap(),
        ),
        5 => NodeLabel::ident(IdentKind::Inductive, *["Coq.Init.Logic.eq", "nat"].choose(rng).unwrap()),
        6 => NodeLabel::Op(*[TermOp::App, TermOp::Prod, TermOp::Rel].choose(rng).unwrap()),
        _ => NodeLabel::ident(IdentKind::Constant, "h"),
    }
}

/// A term of at most `budget` nodes; decrements `budget` by its size.
pub fn random_term(rng: &mut ChaCha8Rng, budget: &mut usize, depth: usize) -> Term {
    *budget -= 1;
    let label = random_label(rng);
    let mut children = Vec::new();
    if depth < 5 {
        let arity = rng.gen_range(0..=3usize);
        for _ in 0..arity {
            if *budget == 0 {
                break;
            }
            children.push(random_term(rng, budget, depth + 1));
        }
    }
    Term::new(label, children)
}

/// A state with a goal and up to three hypotheses, at most `max_nodes`
/// nodes in total.
pub fn random_state(rng: &mut ChaCha8Rng, id: u64, max_nodes: usize) -> ProofState {
    let mut budget = rng.gen_range(1..=max_nodes);
    let goal = random_term(rng, &mut budget, 0);
    let mut state = ProofState::new(id, goal, "t", "T");
    for name in ["H0", "H1", "H2"] {
        if budget == 0 || rng.gen_bool(0.3) {
            break;
        }
        let body = random_term(rng, &mut budget, 0);
        state = state.with_hyp(name, body);
    }
    state
}

// ---------------------------------------------------------------------------
// Positions and subterms, computed directly on the terms.

fn collect(t: &Term, path: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    out.push(path.clone());
    for (i, c) in t.children.iter().enumerate() {
        path.push(i as u32);
        collect(c, path, out);
        path.pop();
    }
}

pub fn paths(t: &Term) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    collect(t, &mut Vec::new(), &mut out);
    out
}

pub fn sub<'a>(t: &'a Term, path: &[u32]) -> Option<&'a Term> {
    match path.split_first() {
        None => Some(t),
        Some((&i, rest)) => t.children.get(i as usize).and_then(|c| sub(c, rest)),
    }
}

pub fn goal_positions(s: &ProofState) -> Vec<Value> {
    paths(&s.goal).into_iter().map(|p| Value::Goal(Position(p))).collect()
}

pub fn hyp_positions(s: &ProofState) -> Vec<Value> {
    s.hypotheses
        .iter()
        .flat_map(|h| paths(&h.body).into_iter().map(|p| Value::Hyp(HypPosition::new(h.name.clone(), p))))
        .collect()
}

fn goal_sub<'a>(s: &'a ProofState, p: &Position) -> Option<&'a Term> {
    sub(&s.goal, &p.0)
}

fn hyp_sub<'a>(s: &'a ProofState, p: &HypPosition) -> Option<&'a Term> {
    s.hypotheses.iter().find(|h| h.name == p.hyp_name).and_then(|h| sub(&h.body, &p.path.0))
}

fn prefix(a: &[u32], b: &[u32]) -> bool {
    a.len() < b.len() && b[..a.len()] == *a
}

fn left(a: &[u32], b: &[u32]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x != y {
            return x < y;
        }
    }
    false
}

/// Truth of a feature predicate on ground arguments.
pub fn feature_truth(s: &ProofState, pred: Predicate, args: &[Value]) -> bool {
    use Value::*;
    let here = |v: &Value| matches!(v, State(id) if *id == s.id);
    match (pred, args) {
        (Predicate::GoalAbove, [st, Goal(a), Goal(b)]) => {
            here(st) && goal_sub(s, a).is_some() && goal_sub(s, b).is_some() && prefix(&a.0, &b.0)
        }
        (Predicate::GoalLeft, [Goal(a), Goal(b)]) => left(&a.0, &b.0),
        (Predicate::HypAbove, [st, Hyp(a), Hyp(b)]) => {
            here(st)
                && hyp_sub(s, a).is_some()
                && hyp_sub(s, b).is_some()
                && a.hyp_name == b.hyp_name
                && prefix(&a.path.0, &b.path.0)
        }
        (Predicate::HypLeft, [Hyp(a), Hyp(b)]) => a.hyp_name == b.hyp_name && left(&a.path.0, &b.path.0),
        (Predicate::Dif, [a, b]) => a != b,
        (Predicate::EqGoalTerm, [st, Goal(a), Goal(b)]) => {
            here(st) && matches!((goal_sub(s, a), goal_sub(s, b)), (Some(x), Some(y)) if x == y)
        }
        (Predicate::EqGoalHypTerm, [st, Goal(a), Hyp(b)]) => {
            here(st) && matches!((goal_sub(s, a), hyp_sub(s, b)), (Some(x), Some(y)) if x == y)
        }
        (Predicate::EqHypTerm, [st, Hyp(a), Hyp(b)]) => {
            here(st)
                && a.hyp_name != b.hyp_name
                && matches!((hyp_sub(s, a), hyp_sub(s, b)), (Some(x), Some(y)) if x == y)
        }
        (Predicate::IsGoalRoot, [st, Goal(a)]) => here(st) && goal_sub(s, a).is_some() && a.0.is_empty(),
        (Predicate::IsHypRoot, [st, Hyp(a)]) => here(st) && hyp_sub(s, a).is_some() && a.path.0.is_empty(),
        _ => false,
    }
}

/// Truth of a representation or feature literal on ground arguments.
pub fn literal_truth(s: &ProofState, encoding: Encoding, pred: Predicate, args: &[Value]) -> bool {
    use Value::*;
    let here = |v: &Value| matches!(v, State(id) if *id == s.id);
    let head = |t: &Term| match encoding {
        Encoding::Anonymous => anonymize(&t.label),
        Encoding::Original => t.label.name().to_string(),
    };
    match (pred, encoding, args) {
        (Predicate::GoalNode, Encoding::Anonymous, [Name(c), st, Goal(p), Name(l)]) => {
            here(st) && goal_sub(s, p).is_some_and(|t| head(t) == *c && t.label.name() == l)
        }
        (Predicate::GoalNode, Encoding::Original, [Name(c), st, Goal(p)]) => {
            here(st) && goal_sub(s, p).is_some_and(|t| head(t) == *c)
        }
        (Predicate::HypNode, Encoding::Anonymous, [Name(c), st, Name(h), Hyp(p), Name(l)]) => {
            here(st) && p.hyp_name == *h && hyp_sub(s, p).is_some_and(|t| head(t) == *c && t.label.name() == l)
        }
        (Predicate::HypNode, Encoding::Original, [Name(c), st, Name(h), Hyp(p)]) => {
            here(st) && p.hyp_name == *h && hyp_sub(s, p).is_some_and(|t| head(t) == *c)
        }
        (Predicate::GoalNode | Predicate::HypNode, _, _) => false,
        _ => feature_truth(s, pred, args),
    }
}

/// Names occurring in `s`: labels, original names and hypothesis names.
pub fn names(s: &ProofState, encoding: Encoding) -> Vec<Value> {
    let mut names = BTreeSet::new();
    let mut terms: Vec<&Term> = vec![&s.goal];
    terms.extend(s.hypotheses.iter().map(|h| &h.body));
    for h in &s.hypotheses {
        names.insert(h.name.clone());
    }
    for t in terms {
        for p in paths(t) {
            let n = sub(t, &p).unwrap();
            names.insert(n.label.name().to_string());
            if encoding == Encoding::Anonymous {
                names.insert(anonymize(&n.label));
            }
        }
    }
    names.into_iter().map(Value::Name).collect()
}

/// Every value of one sort in `s`.
pub fn values_of(s: &ProofState, encoding: Encoding, sort: Sort) -> Vec<Value> {
    match sort {
        Sort::State => vec![Value::State(s.id)],
        Sort::GoalPos => goal_positions(s),
        Sort::HypPos => hyp_positions(s),
        Sort::AnyPos => goal_positions(s).into_iter().chain(hyp_positions(s)).collect(),
        Sort::HypName | Sort::Label => names(s, encoding),
    }
}

/// Coverage by exhaustive enumeration of substitutions for the clause's
/// variables, each ranging over every value of its sort. A literal is
/// tested as soon as all its variables are bound.
pub fn covers_oracle(clause: &Clause, s: &ProofState, encoding: Encoding) -> bool {
    let Arg::Var(state_var) = clause.head.args[0] else { return false };
    let lits: Vec<(Predicate, &Literal)> =
        clause.body.iter().map(|l| (Predicate::from_name(&l.predicate).expect("known predicate"), l)).collect();
    let mut vars: Vec<u32> = vec![state_var];
    let mut doms: Vec<Vec<Value>> = vec![vec![Value::State(s.id)]];
    for (pred, l) in &lits {
        for (a, slot) in l.args.iter().zip(pred.slots(encoding)) {
            if let Arg::Var(v) = a {
                if !vars.contains(v) {
                    vars.push(*v);
                    doms.push(values_of(s, encoding, slot.sort));
                }
            }
        }
    }
    // A literal becomes testable once its last variable (in `vars` order) is bound.
    let mut due: Vec<Vec<usize>> = vec![Vec::new(); vars.len()];
    for (i, (_, l)) in lits.iter().enumerate() {
        let last = l.vars().map(|v| vars.iter().position(|&w| w == v).unwrap()).max().unwrap_or(0);
        due[last].push(i);
    }
    let test = |i: usize, b: &BTreeMap<u32, Value>| {
        let args: Vec<Value> = lits[i]
            .1
            .args
            .iter()
            .map(|a| match a {
                Arg::Var(v) => b[v].clone(),
                Arg::Const(c) => Value::Name(c.clone()),
            })
            .collect();
        literal_truth(s, encoding, lits[i].0, &args)
    };
    fn go(
        k: usize,
        vars: &[u32],
        doms: &[Vec<Value>],
        due: &[Vec<usize>],
        binding: &mut BTreeMap<u32, Value>,
        test: &dyn Fn(usize, &BTreeMap<u32, Value>) -> bool,
    ) -> bool {
        if k == vars.len() {
            return true;
        }
        for v in &doms[k] {
            binding.insert(vars[k], v.clone());
            if due[k].iter().all(|&i| test(i, binding)) && go(k + 1, vars, doms, due, binding, test) {
                return true;
            }
        }
        binding.remove(&vars[k]);
        false
    }
    go(0, &vars, &doms, &due, &mut BTreeMap::new(), &test)
}

// ---------------------------------------------------------------------------
// Clauses.

const ANON_LABELS: [&str; 8] = ["const", "var", "construct", "ind", "coq_Init_Logic_eq", "term_op", "prod", "rel"];
const ORIG_LABELS: [&str; 8] = ["f", "g", "h", "x", "y", "Coq.Init.Datatypes.S", "nat", "app"];

fn sort_matches(have: Sort, want: Sort) -> bool {
    have == want || (want == Sort::AnyPos && matches!(have, Sort::GoalPos | Sort::HypPos))
}

/// A mode-consistent clause for `tactic` with 1 to `max_body` body
/// literals drawn from the predicates of `variant`.
pub fn random_clause(rng: &mut ChaCha8Rng, variant: Variant, tactic: &str, max_body: usize) -> Clause {
    loop {
        let mut sorts: Vec<Sort> = vec![Sort::State];
        let mut body = Vec::new();
        let len = rng.gen_range(1..=max_body);
        let preds = variant.predicates();
        while body.len() < len {
            let pred = *preds.choose(rng).unwrap();
            let slots = pred.slots(variant.encoding());
            let before = sorts.len();
            let mut args = Vec::new();
            let mut ok = true;
            for slot in slots {
                use tacrule_core::features::SlotMode::*;
                let existing: Vec<u32> =
                    (0..sorts.len() as u32).filter(|&v| sort_matches(sorts[v as usize], slot.sort)).collect();
                match slot.mode {
                    Constant => {
                        let pool: &[&str] =
                            if variant.encoding() == Encoding::Anonymous { &ANON_LABELS } else { &ORIG_LABELS };
                        args.push(Arg::Const(pool.choose(rng).unwrap().to_string()));
                    }
                    Input => match existing.choose(rng) {
                        Some(&v) => args.push(Arg::Var(v)),
                        None => {
                            ok = false;
                            break;
                        }
                    },
                    Output => {
                        if !existing.is_empty() && rng.gen_bool(0.35) {
                            args.push(Arg::Var(*existing.choose(rng).unwrap()));
                        } else {
                            sorts.push(slot.sort);
                            args.push(Arg::Var(sorts.len() as u32 - 1));
                        }
                    }
                }
            }
            if ok {
                body.push(Literal::new(pred.name(), args));
            } else {
                sorts.truncate(before);
            }
        }
        let clause = Clause::new(Clause::tactic_head(tactic), body);
        if check_mode_consistency(&clause, variant).is_ok() {
            return clause;
        }
    }
}

/// Flat clauses over `p/2`, `q/1`, `r/3` with at most five variables and
/// the constants `a`, `b`.
pub fn random_flat_clause(rng: &mut ChaCha8Rng, max_body: usize) -> Clause {
    let body = (0..rng.gen_range(0..=max_body)).map(|_| random_flat_literal(rng)).collect();
    let tactic = if rng.gen_bool(0.9) { "t" } else { "u" };
    Clause::new(Literal::new("tac", vec![Arg::Var(0), Arg::Const(tactic.into())]), body)
}

fn random_flat_arg(rng: &mut ChaCha8Rng) -> Arg {
    if rng.gen_bool(0.15) {
        Arg::Const(["a", "b"].choose(rng).unwrap().to_string())
    } else {
        Arg::Var(rng.gen_range(0..5))
    }
}

pub fn random_flat_literal(rng: &mut ChaCha8Rng) -> Literal {
    let (name, arity) = *[("p", 2), ("q", 1), ("r", 3)].choose(rng).unwrap();
    Literal::new(name, (0..arity).map(|_| random_flat_arg(rng)).collect())
}

/// `c` with its variables replaced by `theta` (unlisted variables kept).
pub fn substitute(c: &Clause, theta: &BTreeMap<u32, Arg>) -> Vec<Literal> {
    c.literals()
        .map(|l| {
            Literal::new(
                l.predicate.clone(),
                l.args
                    .iter()
                    .map(|a| match a {
                        Arg::Var(v) => theta.get(v).cloned().unwrap_or(Arg::Var(*v)),
                        k => k.clone(),
                    })
                    .collect(),
            )
        })
        .collect()
}

/// θ-subsumption by enumerating every map from `c1`'s variables to the
/// arguments occurring in `c2`.
pub fn subsumes_oracle(c1: &Clause, c2: &Clause) -> bool {
    let vars: Vec<u32> = {
        let mut vs = BTreeSet::new();
        for l in c1.literals() {
            vs.extend(l.vars());
        }
        vs.into_iter().collect()
    };
    let targets: Vec<Arg> = {
        let mut ts = BTreeSet::new();
        for l in c2.literals() {
            ts.extend(l.args.iter().cloned());
        }
        ts.into_iter().collect()
    };
    let body2: BTreeSet<&Literal> = c2.body.iter().collect();
    let total = targets.len().pow(vars.len() as u32);
    for mut code in 0..total {
        let mut theta = BTreeMap::new();
        for &v in &vars {
            theta.insert(v, targets[code % targets.len()].clone());
            code /= targets.len();
        }
        let lits = substitute(c1, &theta);
        if lits[0] == c2.head && lits[1..].iter().all(|l| body2.contains(l)) {
            return true;
        }
    }
    false
}

// ---------------------------------------------------------------------------
// Rankings.

pub const TACTICS: [&str; 6] = ["t0", "t1", "t2", "t3", "t4", "t5"];

/// A random ordering of a random non-empty subset of [`TACTICS`].
pub fn random_preselection(rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut all: Vec<String> = TACTICS.iter().map(|t| t.to_string()).collect();
    all.shuffle(rng);
    all.truncate(rng.gen_range(1..=TACTICS.len()));
    all
}
