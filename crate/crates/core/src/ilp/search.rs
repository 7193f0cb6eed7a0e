//! Best-first refinement search over subsets of a bottom clause.
//!
//! A refinement adds one bottom literal together with the literals that
//! produce its input variables, so every explored clause is
//! mode-consistent. Coverage of a refinement is only tested on the examples
//! its parent covers. Clauses covering no negatives are not refined further,
//! and a refinement is queued only if its optimistic bound (every negative
//! removed by one more literal) beats the best clause so far and could
//! still be acceptable.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::encoding::FactBase;
use crate::ilp::clause::Clause;
use crate::ilp::cover::covers;
use crate::ilp::saturate::BottomClause;

/// Search and saturation limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchBudget {
    /// Maximum literals per clause, head included.
    pub max_clause_length: usize,
    /// Maximum body literals a coverage proof may resolve.
    pub max_proof_depth: usize,
    /// Maximum clauses evaluated per search.
    pub max_nodes: usize,
    /// Wall-clock limit per search, in seconds.
    pub timeout_secs: f64,
    /// Layers of the bottom clause (0 = bare head, 1 = node literals,
    /// 2 = node and feature literals).
    pub saturation_depth: usize,
    /// Cap on bottom-clause size.
    pub max_bottom_literals: usize,
    /// Clauses longer than this are never considered subsumed.
    pub max_subsumption_literals: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_clause_length: 8,
            max_proof_depth: 1000,
            max_nodes: 30_000,
            timeout_secs: 60.0,
            saturation_depth: 2,
            max_bottom_literals: 5000,
            max_subsumption_literals: 64,
        }
    }
}

impl SearchBudget {
    /// The limits used for the original experiments: clause length 1000,
    /// proof depth 1000, 30000 nodes, ten minutes.
    pub fn full_scale() -> Self {
        SearchBudget { max_clause_length: 1000, timeout_secs: 600.0, ..SearchBudget::default() }
    }

    pub fn timeout(&self) -> Duration {
        Duration::try_from_secs_f64(self.timeout_secs.max(0.0)).unwrap_or(Duration::MAX)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_clause_length == 0 {
            return Err("max_clause_length must be positive".into());
        }
        if self.max_proof_depth == 0 {
            return Err("max_proof_depth must be positive".into());
        }
        if self.timeout_secs.is_nan() || self.timeout_secs < 0.0 {
            return Err("timeout_secs must be a non-negative number".into());
        }
        Ok(())
    }
}

/// Clause scoring.
///
/// The default cost is compression, `P - N - (L - 1)` with `L` counting the
/// head. Tasks without negatives or with a single positive use
/// `weight * P - N - (L - 1)` and accept any clause covering at least
/// `min_positives` examples; other tasks accept clauses scoring above
/// `min_score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostSpec {
    pub weight: f64,
    pub min_score: f64,
    pub min_positives: usize,
}

impl Default for CostSpec {
    fn default() -> Self {
        CostSpec { weight: 1.0, min_score: 0.0, min_positives: 1 }
    }
}

impl CostSpec {
    pub fn score(&self, custom: bool, p: usize, n: usize, body_len: usize) -> f64 {
        let w = if custom { self.weight } else { 1.0 };
        w * p as f64 - n as f64 - body_len as f64
    }

    fn acceptable(&self, custom: bool, p: usize, score: f64) -> bool {
        if custom {
            p >= self.min_positives.max(1)
        } else {
            score > self.min_score
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Exhausted,
    NodeLimit,
    Timeout,
}

#[derive(Debug, Clone)]
pub struct Found {
    pub clause: Clause,
    /// Indices into the positives passed to [`search`].
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: Option<Found>,
    pub nodes: usize,
    pub stop: StopReason,
}

struct Node {
    score: f64,
    literals: Vec<usize>,
    positives: Vec<usize>,
    negatives: Vec<usize>,
    seq: usize,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    /// Higher score first, then shorter, then earlier.
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.literals.len().cmp(&self.literals.len()))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

fn closure(bottom: &BottomClause, base: &[usize], add: usize) -> Vec<usize> {
    let mut out = base.to_vec();
    let mut stack = vec![add];
    while let Some(j) = stack.pop() {
        if !out.contains(&j) {
            out.push(j);
            stack.extend(&bottom.requires[j]);
        }
    }
    out.sort_unstable();
    out
}

/// Searches for the best clause built from `bottom`'s literals.
///
/// `positives[seed]` is the seed the bottom clause was built from; only
/// clauses covering it are returned. `custom` selects the cost used for
/// degenerate tasks (see [`CostSpec`]).
pub fn search(
    bottom: &BottomClause,
    seed: usize,
    positives: &[&FactBase],
    negatives: &[&FactBase],
    budget: &SearchBudget,
    cost: &CostSpec,
    custom: bool,
) -> SearchOutcome {
    let started = Instant::now();
    let timeout = budget.timeout();
    let max_body = budget.max_clause_length.saturating_sub(1);
    let mut out = SearchOutcome { best: None, nodes: 0, stop: StopReason::Exhausted };
    if budget.max_nodes == 0 {
        out.stop = StopReason::NodeLimit;
        return out;
    }
    let weight = if custom { cost.weight } else { 1.0 };
    let bound = |p: usize, len: usize| weight * p as f64 - (len + 1) as f64;
    // Whether some refinement of a clause could still be acceptable.
    let viable = |p: usize, len: usize| {
        if custom {
            p >= cost.min_positives.max(1)
        } else {
            bound(p, len) > cost.min_score
        }
    };

    let mut heap = BinaryHeap::new();
    let mut visited: HashSet<Vec<usize>> = HashSet::new();
    let mut seq = 0;
    heap.push(Node {
        score: cost.score(custom, positives.len(), negatives.len(), 0),
        literals: Vec::new(),
        positives: (0..positives.len()).collect(),
        negatives: (0..negatives.len()).collect(),
        seq,
    });

    'search: while let Some(node) = heap.pop() {
        if let Some(best) = &out.best {
            if bound(node.positives.len(), node.literals.len()) <= best.score {
                continue;
            }
        }
        for j in 0..bottom.len() {
            if node.literals.contains(&j) {
                continue;
            }
            let literals = closure(bottom, &node.literals, j);
            if literals.len() > max_body || !visited.insert(literals.clone()) {
                continue;
            }
            if out.nodes >= budget.max_nodes {
                out.stop = StopReason::NodeLimit;
                break 'search;
            }
            if started.elapsed() >= timeout {
                out.stop = StopReason::Timeout;
                break 'search;
            }
            out.nodes += 1;
            let clause = bottom.subclause(&literals);
            let depth = budget.max_proof_depth;
            if !covers(&clause, positives[seed], depth) {
                continue;
            }
            let pos: Vec<usize> =
                node.positives.iter().copied().filter(|&i| covers(&clause, positives[i], depth)).collect();
            let neg: Vec<usize> =
                node.negatives.iter().copied().filter(|&i| covers(&clause, negatives[i], depth)).collect();
            let score = cost.score(custom, pos.len(), neg.len(), literals.len());
            let better = match &out.best {
                None => true,
                Some(b) => score > b.score || (score == b.score && clause.body.len() < b.clause.body.len()),
            };
            if better && cost.acceptable(custom, pos.len(), score) {
                out.best = Some(Found { clause, positives: pos.clone(), negatives: neg.clone(), score });
            }
            let promising = viable(pos.len(), literals.len())
                && out.best.as_ref().is_none_or(|b| bound(pos.len(), literals.len()) > b.score);
            if !neg.is_empty() && literals.len() < max_body && promising {
                seq += 1;
                heap.push(Node { score, literals, positives: pos, negatives: neg, seq });
            }
        }
    }
    log::debug!(
        "search for `{}` explored {} clauses in {:?} ({:?})",
        bottom.clause.tactic().unwrap_or("?"),
        out.nodes,
        started.elapsed(),
        out.stop
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{encode, Encoding};
    use crate::ilp::modes::Variant;
    use crate::ilp::saturate::saturate;
    use crate::state::ProofState;

    fn anon(id: u64, goal: &str) -> FactBase {
        encode(&ProofState::new(id, goal.parse().unwrap(), "t", "T"), Encoding::Anonymous)
    }

    #[test]
    fn finds_equal_children_rule() {
        let pos = [
            anon(1, "ind:Coq.Init.Logic.eq(var:x, var:x)"),
            anon(2, "const:h(var:y, const:k, var:y)"),
            anon(3, "const:g(var:z, var:z)"),
            anon(7, "ind:Coq.Init.Logic.eq(var:w, var:w)"),
        ];
        let neg = [
            anon(4, "ind:Coq.Init.Logic.eq(var:x, var:y)"),
            anon(5, "const:g(const:f(var:y), var:z)"),
            anon(6, "ind:Coq.Init.Logic.eq(const:f(var:y), const:f(var:w))"),
        ];
        let pos_refs: Vec<&FactBase> = pos.iter().collect();
        let neg_refs: Vec<&FactBase> = neg.iter().collect();
        let bottom = saturate(&pos[0], "reflexivity", Variant::AF, 2, 5000);
        let out = search(&bottom, 0, &pos_refs, &neg_refs, &SearchBudget::default(), &CostSpec::default(), false);
        let best = out.best.expect("a rule exists");
        assert_eq!(best.positives, vec![0, 1, 2, 3], "{}", best.clause);
        assert!(best.negatives.is_empty(), "{}", best.clause);
        for (i, fb) in pos.iter().enumerate() {
            assert_eq!(covers(&best.clause, fb, 1000), best.positives.contains(&i));
        }
        for fb in &neg {
            assert!(!covers(&best.clause, fb, 1000));
        }
    }

    #[test]
    fn single_positive_uses_custom_cost() {
        let pos = [anon(1, "const:f(var:x)")];
        let refs: Vec<&FactBase> = pos.iter().collect();
        let bottom = saturate(&pos[0], "auto", Variant::AF, 2, 5000);
        let out = search(&bottom, 0, &refs, &[], &SearchBudget::default(), &CostSpec::default(), true);
        let best = out.best.expect("custom cost accepts a covering clause");
        assert_eq!(best.clause.body.len(), 1);
        assert!(covers(&best.clause, &pos[0], 1000));
        // Compression alone rejects it: 1 - 0 - 1 is not above 0.
        let out = search(&bottom, 0, &refs, &[], &SearchBudget::default(), &CostSpec::default(), false);
        assert!(out.best.is_none());
    }

    #[test]
    fn zero_node_budget_finds_nothing() {
        let pos = [anon(1, "const:f(var:x)")];
        let refs: Vec<&FactBase> = pos.iter().collect();
        let bottom = saturate(&pos[0], "auto", Variant::AF, 2, 5000);
        let budget = SearchBudget { max_nodes: 0, ..SearchBudget::default() };
        let out = search(&bottom, 0, &refs, &[], &budget, &CostSpec::default(), true);
        assert!(out.best.is_none());
        assert_eq!(out.stop, StopReason::NodeLimit);
    }
}
