//! Bottom-clause construction from a seed example.
//!
//! Layer 1 holds one representation literal per node of the seed: a fresh
//! position variable per node, a shared variable per hypothesis name and,
//! in the anonymous encoding, a shared variable per original name. Layer 2
//! holds the feature literals that are true of the seed over those
//! position variables. Variable depth 0 yields the bare head, depth 1 stops
//! after layer 1.
//!
//! Feature literals that carry no information are left out: `eq_goal_term`
//! and `dif` of a node with itself, the mirrored orientation of symmetric
//! predicates, `dif` between nodes with different original names (their
//! positions differ anyway), and `dif` across goal and hypotheses.

use std::collections::HashMap;

use crate::encoding::{Encoding, FactBase, Owner};
use crate::features::Predicate;
use crate::ilp::clause::{Arg, Clause, Literal};
use crate::ilp::modes::Variant;

/// A bottom clause plus, for every body literal, the earlier literals that
/// produce its input variables.
#[derive(Debug, Clone)]
pub struct BottomClause {
    pub clause: Clause,
    pub requires: Vec<Vec<usize>>,
    /// Whether the literal cap cut feature literals off.
    pub truncated: bool,
}

impl BottomClause {
    pub fn len(&self) -> usize {
        self.clause.body.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clause.body.is_empty()
    }

    /// The clause whose body is the given bottom literals, in bottom order.
    pub fn subclause(&self, indices: &[usize]) -> Clause {
        let mut idx = indices.to_vec();
        idx.sort_unstable();
        idx.dedup();
        let body = idx.iter().map(|&i| self.clause.body[i].clone()).collect();
        Clause::new(self.clause.head.clone(), body)
    }
}

struct Vars {
    next: u32,
    by_key: HashMap<(u8, u32), u32>,
}

impl Vars {
    fn get(&mut self, kind: u8, key: u32) -> u32 {
        let next = &mut self.next;
        *self.by_key.entry((kind, key)).or_insert_with(|| {
            *next += 1;
            *next - 1
        })
    }
}

const POS: u8 = 0;
const LABEL: u8 = 1;
const HYP: u8 = 2;

/// Builds the bottom clause of `seed` for `tactic`. At most `max_literals`
/// body literals are kept; representation literals always come first.
pub fn saturate(seed: &FactBase, tactic: &str, variant: Variant, depth: usize, max_literals: usize) -> BottomClause {
    assert_eq!(seed.encoding(), variant.encoding(), "seed encoded for another variant");
    let head = Clause::tactic_head(tactic);
    let mut body: Vec<Literal> = Vec::new();
    let mut requires: Vec<Vec<usize>> = Vec::new();
    let mut truncated = false;
    if depth == 0 {
        return BottomClause { clause: Clause::new(head, body), requires, truncated };
    }
    let state = Arg::Var(0);
    let mut vars = Vars { next: 1, by_key: HashMap::new() };
    let anon = seed.encoding() == Encoding::Anonymous;
    let n = seed.nodes.len() as u32;

    for i in 0..n {
        let node = &seed.nodes[i as usize];
        let constant = Arg::Const(seed.symbol(seed.head_symbol(i)).to_string());
        let mut args = vec![constant, state.clone()];
        let pred = match node.owner {
            Owner::Goal => Predicate::GoalNode,
            Owner::Hyp(h) => {
                args.push(Arg::Var(vars.get(HYP, h)));
                Predicate::HypNode
            }
        };
        args.push(Arg::Var(vars.get(POS, i)));
        if anon {
            args.push(Arg::Var(vars.get(LABEL, node.orig)));
        }
        if body.len() >= max_literals {
            truncated = true;
            break;
        }
        body.push(Literal::new(pred.name(), args));
        requires.push(Vec::new());
    }

    if depth >= 2 && variant.uses_features() && !truncated {
        let pos_var = |vars: &Vars, i: u32| Arg::Var(vars.by_key[&(POS, i)]);
        let is_goal = |i: u32| i < seed.goal_len;
        let owner = |i: u32| seed.nodes[i as usize].owner;
        let size = |i: u32| seed.nodes[i as usize].size;
        let class = |i: u32| seed.nodes[i as usize].class;
        let orig = |i: u32| seed.nodes[i as usize].orig;
        let hyp_root = |i: u32| match owner(i) {
            Owner::Hyp(h) => seed.hyps[h as usize].first == i,
            Owner::Goal => false,
        };

        let mut candidates: Vec<(Predicate, Vec<u32>)> = Vec::new();
        for pred in Predicate::FEATURES {
            match pred {
                Predicate::IsGoalRoot => {
                    if seed.goal_len > 0 {
                        candidates.push((pred, vec![0]));
                    }
                }
                Predicate::IsHypRoot => {
                    for i in seed.goal_len..n {
                        if hyp_root(i) {
                            candidates.push((pred, vec![i]));
                        }
                    }
                }
                _ => {
                    for a in 0..n {
                        for b in 0..n {
                            let keep = match pred {
                                Predicate::GoalAbove => is_goal(a) && is_goal(b) && a < b && b < a + size(a),
                                Predicate::HypAbove => !is_goal(a) && !is_goal(b) && a < b && b < a + size(a),
                                Predicate::GoalLeft => is_goal(a) && is_goal(b) && b >= a + size(a),
                                Predicate::HypLeft => !is_goal(a) && owner(a) == owner(b) && b >= a + size(a),
                                Predicate::Dif => a < b && is_goal(a) == is_goal(b) && orig(a) == orig(b),
                                Predicate::EqGoalTerm => is_goal(a) && is_goal(b) && a < b && class(a) == class(b),
                                Predicate::EqGoalHypTerm => is_goal(a) && !is_goal(b) && class(a) == class(b),
                                Predicate::EqHypTerm => {
                                    !is_goal(a) && !is_goal(b) && a < b && owner(a) != owner(b) && class(a) == class(b)
                                }
                                _ => false,
                            };
                            if keep {
                                candidates.push((pred, vec![a, b]));
                            }
                        }
                    }
                }
            }
        }

        for (pred, nodes) in candidates {
            if body.len() >= max_literals {
                truncated = true;
                break;
            }
            let mut args = Vec::with_capacity(3);
            if !matches!(pred, Predicate::GoalLeft | Predicate::HypLeft | Predicate::Dif) {
                args.push(state.clone());
            }
            args.extend(nodes.iter().map(|&i| pos_var(&vars, i)));
            body.push(Literal::new(pred.name(), args));
            // The representation literal of node i sits at body index i.
            let mut req: Vec<usize> = nodes.iter().map(|&i| i as usize).collect();
            req.dedup();
            requires.push(req);
        }
    }

    if truncated {
        log::warn!("bottom clause of state {} for `{tactic}` truncated at {max_literals} literals", seed.state_id());
    }
    // Variables were allocated in first-occurrence order, so the clause is
    // already canonical.
    BottomClause { clause: Clause { head, body }, requires, truncated }
}
