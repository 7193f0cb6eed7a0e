//! Learned rules used as a filter over k-NN preselections.
//!
//! A tactic is accepted for a state when at least one of its rules covers
//! the state; tactics without rules are rejected. Reordering moves accepted
//! tactics to the front and keeps the relative order on both sides.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_rational::Ratio;
use rayon::prelude::*;
use thiserror::Error;

use crate::encoding::FactBase;
use crate::eval::{format_ratio, ConfusionCounts};
use crate::ilp::clause::{parse_clauses, Clause};
use crate::ilp::cover::covers;
use crate::ilp::learn::merge_rules;
use crate::ilp::modes::{check_mode_consistency, Variant};
use crate::ilp::subsume::DEFAULT_LITERAL_CAP;

#[derive(Debug, Error)]
pub enum RuleSetError {
    #[error("rule set is for variant {expected}, state is encoded for {found:?}")]
    VariantMismatch { expected: Variant, found: crate::encoding::Encoding },
    #[error("rule `{0}` has no tactic head")]
    NoTactic(String),
    #[error("rule `{clause}` is not valid for variant {variant}: {msg}")]
    Mode { clause: String, variant: Variant, msg: String },
    #[error("rule file: {0}")]
    Parse(String),
    #[error("stats table line {line}: {msg}")]
    Stats { line: usize, msg: String },
}

/// Counts of expected and unexpected predictions a rule accepted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RuleStats {
    pub tp: u64,
    pub fp: u64,
}

impl RuleStats {
    /// `tp / (tp + fp)`, undefined for a rule that never fired.
    pub fn precision(&self) -> Option<Ratio<u64>> {
        (self.tp + self.fp > 0).then(|| Ratio::new(self.tp, self.tp + self.fp))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub tactic: String,
    pub clause: Clause,
    pub stats: RuleStats,
}

/// One prediction context: a state, its true tactic and its preselection.
#[derive(Debug, Clone, Copy)]
pub struct Labeled<'a> {
    pub state: &'a FactBase,
    pub truth: &'a str,
    pub preselection: &'a [String],
}

/// A tactic of a reordered preselection with the rules accepting it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranked {
    pub tactic: String,
    pub rules: Vec<usize>,
}

impl Ranked {
    pub fn accepted(&self) -> bool {
        !self.rules.is_empty()
    }
}

/// Rules of one variant. Rule ids are positions in [`RuleSet::rules`].
#[derive(Debug, Clone, PartialEq)]
pub struct RuleSet {
    variant: Variant,
    rules: Vec<Rule>,
    by_tactic: BTreeMap<String, Vec<usize>>,
    max_proof_depth: usize,
}

/// Stable partition: accepted tactics first, each side in input order.
pub fn reorder_by<T: Clone>(items: &[T], accepted: impl Fn(&T) -> bool) -> Vec<T> {
    let (mut goods, bads): (Vec<T>, Vec<T>) = items.iter().cloned().partition(|t| accepted(t));
    goods.extend(bads);
    goods
}

impl RuleSet {
    pub fn empty(variant: Variant) -> Self {
        RuleSet { variant, rules: Vec::new(), by_tactic: BTreeMap::new(), max_proof_depth: 1000 }
    }

    /// Builds a rule set, dropping duplicates up to renaming and rules
    /// subsumed by another rule of the same tactic. Rules are grouped by
    /// tactic in name order.
    pub fn new(variant: Variant, clauses: impl IntoIterator<Item = Clause>) -> Result<Self, RuleSetError> {
        let mut grouped: BTreeMap<String, Vec<Clause>> = BTreeMap::new();
        for c in clauses {
            let tactic = c.tactic().ok_or_else(|| RuleSetError::NoTactic(c.to_string()))?.to_string();
            check_mode_consistency(&c, variant).map_err(|e| RuleSetError::Mode {
                clause: c.to_string(),
                variant,
                msg: e.to_string(),
            })?;
            grouped.entry(tactic).or_default().push(c);
        }
        let rules = grouped
            .into_iter()
            .flat_map(|(tactic, cs)| {
                merge_rules(cs, DEFAULT_LITERAL_CAP).into_iter().map(move |clause| Rule {
                    tactic: tactic.clone(),
                    clause,
                    stats: RuleStats::default(),
                })
            })
            .collect();
        Ok(Self::from_rules(variant, rules))
    }

    fn from_rules(variant: Variant, rules: Vec<Rule>) -> Self {
        let mut by_tactic: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in rules.iter().enumerate() {
            by_tactic.entry(r.tactic.clone()).or_default().push(i);
        }
        RuleSet { variant, rules, by_tactic, max_proof_depth: 1000 }
    }

    pub fn with_proof_depth(mut self, depth: usize) -> Self {
        self.max_proof_depth = depth;
        self
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Tactics with at least one rule.
    pub fn tactics(&self) -> impl Iterator<Item = &str> {
        self.by_tactic.keys().map(String::as_str)
    }

    fn check(&self, state: &FactBase) -> Result<(), RuleSetError> {
        if state.encoding() != self.variant.encoding() {
            return Err(RuleSetError::VariantMismatch { expected: self.variant, found: state.encoding() });
        }
        Ok(())
    }

    fn covering(&self, state: &FactBase, tactic: &str) -> Vec<usize> {
        self.by_tactic
            .get(tactic)
            .map(|ids| {
                ids.iter().copied().filter(|&i| covers(&self.rules[i].clause, state, self.max_proof_depth)).collect()
            })
            .unwrap_or_default()
    }

    /// Whether `tactic` is accepted for `state`, with every covering rule.
    pub fn accepts(&self, state: &FactBase, tactic: &str) -> Result<(bool, Vec<usize>), RuleSetError> {
        self.check(state)?;
        let ids = self.covering(state, tactic);
        Ok((!ids.is_empty(), ids))
    }

    /// Reorders a preselection: accepted tactics first, both groups in
    /// preselection order.
    pub fn reorder(&self, state: &FactBase, preselection: &[String]) -> Result<Vec<Ranked>, RuleSetError> {
        self.check(state)?;
        let ranked: Vec<Ranked> =
            preselection.iter().map(|t| Ranked { tactic: t.clone(), rules: self.covering(state, t) }).collect();
        Ok(reorder_by(&ranked, Ranked::accepted))
    }

    /// Recomputes the per-rule stats on `dataset` and returns the global
    /// counts. Every rule accepting a prediction is credited; the global
    /// counters see each prediction once.
    pub fn accumulate_stats(&mut self, dataset: &[Labeled<'_>]) -> Result<ConfusionCounts, RuleSetError> {
        for ex in dataset {
            self.check(ex.state)?;
        }
        let per_state: Vec<(ConfusionCounts, Vec<(usize, bool)>)> = dataset
            .par_iter()
            .map(|ex| {
                let mut counts = ConfusionCounts::default();
                let mut credits = Vec::new();
                for t in ex.preselection {
                    let expected = t == ex.truth;
                    let ids = self.covering(ex.state, t);
                    counts.record(expected, !ids.is_empty());
                    credits.extend(ids.into_iter().map(|i| (i, expected)));
                }
                (counts, credits)
            })
            .collect();
        for r in &mut self.rules {
            r.stats = RuleStats::default();
        }
        let mut total = ConfusionCounts::default();
        for (counts, credits) in per_state {
            total += counts;
            for (i, expected) in credits {
                if expected {
                    self.rules[i].stats.tp += 1;
                } else {
                    self.rules[i].stats.fp += 1;
                }
            }
        }
        Ok(total)
    }

    /// Global counts of the current rules on `dataset`, stats untouched.
    pub fn evaluate(&self, dataset: &[Labeled<'_>]) -> Result<ConfusionCounts, RuleSetError> {
        for ex in dataset {
            self.check(ex.state)?;
        }
        Ok(dataset
            .par_iter()
            .map(|ex| {
                let mut counts = ConfusionCounts::default();
                for t in ex.preselection {
                    counts.record(t == ex.truth, !self.covering(ex.state, t).is_empty());
                }
                counts
            })
            .reduce(ConfusionCounts::default, |a, b| a + b))
    }

    /// Drops rules whose precision is below `qualt`. Rules that never fired
    /// count as precision 0, so they go at any positive threshold.
    pub fn prune(&self, qualt: Ratio<u64>) -> RuleSet {
        let kept = self
            .rules
            .iter()
            .filter(|r| r.stats.precision().unwrap_or_else(|| Ratio::from_integer(0)) >= qualt)
            .cloned()
            .collect();
        Self::from_rules(self.variant, kept).with_proof_depth(self.max_proof_depth)
    }

    /// The rule file: a `% variant` header and one clause per line.
    pub fn to_rule_file(&self) -> String {
        let mut out = format!("% variant {}\n", self.variant);
        for r in &self.rules {
            let _ = writeln!(out, "{}", r.clause);
        }
        out
    }

    pub fn parse_rule_file(text: &str) -> Result<RuleSet, RuleSetError> {
        let variant = text
            .lines()
            .filter_map(|l| l.trim().strip_prefix('%'))
            .find_map(|l| l.trim().strip_prefix("variant"))
            .ok_or_else(|| RuleSetError::Parse("missing `% variant` header".into()))?
            .trim()
            .parse::<Variant>()
            .map_err(|e| RuleSetError::Parse(e.to_string()))?;
        let clauses = parse_clauses(text).map_err(|e| RuleSetError::Parse(e.to_string()))?;
        Self::new(variant, clauses)
    }

    /// `rule_id,tp,fp,precision`, precision `n/a` for unused rules.
    pub fn stats_table(&self) -> String {
        let mut out = String::from("rule_id,tp,fp,precision\n");
        for (i, r) in self.rules.iter().enumerate() {
            let _ = writeln!(out, "{i},{},{},{}", r.stats.tp, r.stats.fp, format_ratio(r.stats.precision()));
        }
        out
    }

    /// Loads stats written by [`RuleSet::stats_table`] for the same rules.
    pub fn apply_stats_table(&mut self, text: &str) -> Result<(), RuleSetError> {
        let mut seen = vec![false; self.rules.len()];
        for (n, line) in text.lines().enumerate().skip(1) {
            let err = |msg: String| RuleSetError::Stats { line: n + 1, msg };
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 4 {
                return Err(err(format!("expected 4 columns, got {}", cols.len())));
            }
            let num = |s: &str| s.parse::<u64>().map_err(|e| err(format!("`{s}`: {e}")));
            let id = num(cols[0])? as usize;
            let stats = RuleStats { tp: num(cols[1])?, fp: num(cols[2])? };
            let slot = seen.get_mut(id).ok_or_else(|| err(format!("no rule {id}")))?;
            *slot = true;
            self.rules[id].stats = stats;
        }
        if let Some(id) = seen.iter().position(|s| !s) {
            return Err(RuleSetError::Stats { line: 0, msg: format!("rule {id} has no stats row") });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{encode, Encoding};
    use crate::state::ProofState;

    const SIMPL: &str = "tac(A,\"simpl\") :- goal_node(const,A,B,C), goal_node(construct,A,D,E), \
        goal_above(A,B,D), goal_node(construct,A,F,E), dif(F,D), goal_above(A,B,F).";

    fn anon(id: u64, goal: &str) -> FactBase {
        encode(&ProofState::new(id, goal.parse().unwrap(), "t", "T"), Encoding::Anonymous)
    }

    fn sub_state() -> FactBase {
        anon(1, "const:Coq.Init.Nat.sub(constr:Coq.Init.Datatypes.S(var:x), constr:Coq.Init.Datatypes.S(var:y))")
    }

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn simpl_rule_accepts_only_simpl() {
        let rs = RuleSet::parse_rule_file(&format!("% variant AF\n{SIMPL}\n")).unwrap();
        assert_eq!(rs.accepts(&sub_state(), "simpl").unwrap(), (true, vec![0]));
        assert_eq!(rs.accepts(&sub_state(), "auto").unwrap(), (false, vec![]));
        let empty = RuleSet::empty(Variant::AF);
        assert!(!empty.accepts(&sub_state(), "simpl").unwrap().0);
    }

    #[test]
    fn variant_mismatch_is_an_error() {
        let rs = RuleSet::empty(Variant::OF);
        assert!(matches!(rs.accepts(&sub_state(), "simpl"), Err(RuleSetError::VariantMismatch { .. })));
    }

    #[test]
    fn reorder_moves_accepted_forward() {
        assert_eq!(reorder_by(&[1, 2, 3], |&x| x == 2), vec![2, 1, 3]);
        assert_eq!(reorder_by(&[1, 2, 3], |_| false), vec![1, 2, 3]);
        let rs = RuleSet::parse_rule_file(&format!("% variant AF\n{SIMPL}\n")).unwrap();
        let out = rs.reorder(&sub_state(), &names(&["auto", "intros", "simpl"])).unwrap();
        let order: Vec<&str> = out.iter().map(|r| r.tactic.as_str()).collect();
        assert_eq!(order, ["simpl", "auto", "intros"]);
        assert_eq!(out[0].rules, vec![0]);
    }

    #[test]
    fn stats_credit_every_accepting_rule() {
        let text = "% variant AF\ntac(A,\"a\") :- goal_node(var,A,B,C).\ntac(A,\"b\") :- goal_node(const,A,B,C).\ntac(A,\"b\") :- goal_node(const,A,B,C), is_goal_root(A,B).\n";
        let mut rs = RuleSet::parse_rule_file(text).unwrap();
        // The second b rule is subsumed by the first and merged away.
        assert_eq!(rs.len(), 2);
        let fb = anon(1, "const:f(var:x)");
        let pre = names(&["a", "b", "c"]);
        let counts = rs.accumulate_stats(&[Labeled { state: &fb, truth: "a", preselection: &pre }]).unwrap();
        assert_eq!((counts.tp, counts.fp, counts.tn, counts.fn_), (1, 1, 1, 0));
        assert_eq!(rs.rules()[0].stats, RuleStats { tp: 1, fp: 0 });
        assert_eq!(rs.rules()[1].stats, RuleStats { tp: 0, fp: 1 });
        let counts = rs.accumulate_stats(&[Labeled { state: &fb, truth: "c", preselection: &pre }]).unwrap();
        assert_eq!((counts.tp, counts.fp, counts.tn, counts.fn_), (0, 2, 0, 1));
    }

    #[test]
    fn prune_threshold_is_inclusive() {
        let text = "% variant AF\ntac(A,\"a\") :- goal_node(var,A,B,C).\ntac(A,\"b\") :- goal_node(const,A,B,C).\ntac(A,\"c\") :- goal_node(construct,A,B,C).\n";
        let mut rs = RuleSet::parse_rule_file(text).unwrap();
        rs.apply_stats_table("rule_id,tp,fp,precision\n0,3,7,0.3\n1,0,10,0\n2,0,0,n/a\n").unwrap();
        assert_eq!(rs.prune(Ratio::new(0, 1)).len(), 3);
        let kept = rs.prune(Ratio::new(18, 100));
        assert_eq!(kept.len(), 1);
        assert_eq!(kept.rules()[0].tactic, "a");
        assert_eq!(rs.prune(Ratio::new(30, 100)).len(), 1);
        assert_eq!(rs.prune(Ratio::new(31, 100)).len(), 0);
    }

    #[test]
    fn rule_file_and_stats_round_trip() {
        let text = "% variant AF\ntac(A,\"a\") :- goal_node(var,A,B,C).\n";
        let mut rs = RuleSet::parse_rule_file(text).unwrap();
        rs.rules[0].stats = RuleStats { tp: 2, fp: 1 };
        let again = RuleSet::parse_rule_file(&rs.to_rule_file()).unwrap();
        assert_eq!(again.to_rule_file(), rs.to_rule_file());
        let mut again = again;
        again.apply_stats_table(&rs.stats_table()).unwrap();
        assert_eq!(again.rules()[0].stats, rs.rules()[0].stats);
        assert_eq!(rs.stats_table(), "rule_id,tp,fp,precision\n0,2,1,0.666667\n");
    }

    #[test]
    fn missing_header_is_rejected() {
        assert!(matches!(
            RuleSet::parse_rule_file("tac(A,\"a\") :- goal_node(var,A,B,C)."),
            Err(RuleSetError::Parse(_))
        ));
    }
}
