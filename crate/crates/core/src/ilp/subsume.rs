//! θ-subsumption between clauses.
//!
//! `c1` subsumes `c2` when a substitution θ of `c1`'s variables makes the
//! heads equal and maps every body literal of `c1` onto some body literal of
//! `c2`. Variables of `c2` are treated as constants.

use crate::ilp::clause::{Arg, Clause, Literal};

/// Default literal cap for [`theta_subsumes_capped`].
pub const DEFAULT_LITERAL_CAP: usize = 64;

fn match_literal(pattern: &Literal, target: &Literal, theta: &mut [Option<Arg>], trail: &mut Vec<u32>) -> bool {
    if pattern.predicate != target.predicate || pattern.args.len() != target.args.len() {
        return false;
    }
    for (p, t) in pattern.args.iter().zip(&target.args) {
        match p {
            Arg::Const(c) => {
                if !matches!(t, Arg::Const(d) if d == c) {
                    return false;
                }
            }
            Arg::Var(v) => match &theta[*v as usize] {
                Some(bound) => {
                    if bound != t {
                        return false;
                    }
                }
                None => {
                    theta[*v as usize] = Some(t.clone());
                    trail.push(*v);
                }
            },
        }
    }
    true
}

fn undo(theta: &mut [Option<Arg>], trail: &mut Vec<u32>, mark: usize) {
    for v in trail.drain(mark..) {
        theta[v as usize] = None;
    }
}

fn extend(order: &[&Literal], target: &[Literal], theta: &mut [Option<Arg>], trail: &mut Vec<u32>) -> bool {
    let Some((first, rest)) = order.split_first() else {
        return true;
    };
    for t in target {
        let mark = trail.len();
        if match_literal(first, t, theta, trail) && extend(rest, target, theta, trail) {
            return true;
        }
        undo(theta, trail, mark);
    }
    false
}

/// Whether `c1` θ-subsumes `c2`, searched exhaustively.
pub fn theta_subsumes(c1: &Clause, c2: &Clause) -> bool {
    let mut theta = vec![None; c1.var_count() as usize];
    let mut trail = Vec::new();
    if !match_literal(&c1.head, &c2.head, &mut theta, &mut trail) {
        return false;
    }
    // Literals with fewer candidates first: the search fails sooner.
    let mut order: Vec<&Literal> = c1.body.iter().collect();
    order.sort_by_key(|l| c2.body.iter().filter(|t| t.predicate == l.predicate).count());
    extend(&order, &c2.body, &mut theta, &mut trail)
}

/// [`theta_subsumes`], answering `false` when either clause has more than
/// `cap` literals.
pub fn theta_subsumes_capped(c1: &Clause, c2: &Clause, cap: usize) -> bool {
    if c1.literal_count() > cap || c2.literal_count() > cap {
        log::info!("subsumption check skipped: clause longer than {cap} literals");
        return false;
    }
    theta_subsumes(c1, c2)
}
