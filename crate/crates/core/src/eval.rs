//! Metrics, the `(variant, pos, neg, qualt)` sweep and the test-split
//! evaluation.
//!
//! Ratios are exact. A metric whose denominator is zero is undefined and is
//! printed as `n/a`. Reports carry no timings, so reruns with the same seeds
//! produce identical bytes; timings go to a separate table.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::ops::{Add, AddAssign};
use std::sync::OnceLock;
use std::time::Duration;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::encoding::{Encoding, FactStore};
use crate::ilp::learn::learn_tactic;
use crate::ilp::modes::Variant;
use crate::ilp::search::{CostSpec, SearchBudget};
use crate::knn::NeighborModel;
use crate::ruleset::{reorder_by, Labeled, RuleSet};
use crate::selection::{build_tasks, LearningTask, TaskParams};
use crate::state::{Corpus, ProofState, Split, StateId};

/// Largest `k` reported for top-k accuracy.
pub const MAX_K: usize = 50;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    /// Records one prediction: whether it was the true tactic and whether
    /// the rules accepted it.
    pub fn record(&mut self, expected: bool, accepted: bool) {
        match (expected, accepted) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// `2TP / (2TP + FP + FN)`.
    pub fn f1(&self) -> Option<Ratio<u64>> {
        let den = 2 * self.tp + self.fp + self.fn_;
        (den > 0).then(|| Ratio::new(2 * self.tp, den))
    }

    /// `TP / (TP + FP)`.
    pub fn precision(&self) -> Option<Ratio<u64>> {
        let den = self.tp + self.fp;
        (den > 0).then(|| Ratio::new(self.tp, den))
    }

    /// `TP / (TP + FN)`.
    pub fn recall(&self) -> Option<Ratio<u64>> {
        let den = self.tp + self.fn_;
        (den > 0).then(|| Ratio::new(self.tp, den))
    }
}

impl Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, o: ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts { tp: self.tp + o.tp, fp: self.fp + o.fp, tn: self.tn + o.tn, fn_: self.fn_ + o.fn_ }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: ConfusionCounts) {
        *self = *self + o;
    }
}

/// Six decimals, rounded half up; `n/a` when undefined.
pub fn format_ratio(r: Option<Ratio<u64>>) -> String {
    match r {
        None => "n/a".into(),
        Some(r) => {
            let (n, d) = (*r.numer() as u128, *r.denom() as u128);
            let scaled = (2 * n * 1_000_000 + d) / (2 * d);
            format!("{}.{:06}", scaled / 1_000_000, scaled % 1_000_000)
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("`{0}` is not a non-negative decimal number")]
pub struct BadDecimal(pub String);

/// Parses a decimal such as `0.18` exactly.
pub fn parse_decimal(s: &str) -> Result<Ratio<u64>, BadDecimal> {
    let bad = || BadDecimal(s.to_string());
    let (int, frac) = s.trim().split_once('.').unwrap_or((s.trim(), ""));
    if (int.is_empty() && frac.is_empty())
        || frac.len() > 18
        || !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit())
    {
        return Err(bad());
    }
    let den = 10u64.pow(frac.len() as u32);
    let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
    let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
    let num = int.checked_mul(den).and_then(|x| x.checked_add(frac)).ok_or_else(bad)?;
    Ok(Ratio::new(num, den))
}

/// Share of states whose true tactic is among the first `k` of its ranking.
pub fn topk_accuracy<S: AsRef<str>>(rankings: &[Vec<S>], truths: &[&str], k: usize) -> Option<Ratio<u64>> {
    assert!(k >= 1, "k must be at least 1");
    assert_eq!(rankings.len(), truths.len());
    if rankings.is_empty() {
        return None;
    }
    let hits = rankings.iter().zip(truths).filter(|(r, t)| r.iter().take(k).any(|x| x.as_ref() == **t)).count();
    Some(Ratio::new(hits as u64, rankings.len() as u64))
}

/// Top-k accuracies for `k = 1..=MAX_K`.
pub fn topk_curve<S: AsRef<str>>(rankings: &[Vec<S>], truths: &[&str]) -> Vec<Option<Ratio<u64>>> {
    (1..=MAX_K).map(|k| topk_accuracy(rankings, truths, k)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub pos_values: Vec<usize>,
    pub neg_values: Vec<usize>,
    pub qualt_values: Vec<Ratio<u64>>,
    pub variants: Vec<Variant>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            pos_values: vec![1, 2, 4, 8, 16, 32],
            neg_values: vec![0, 1, 2, 4, 8, 16, 32, 64],
            qualt_values: (0..=5).map(|i| Ratio::new(6 * i, 100)).collect(),
            variants: Variant::ALL.to_vec(),
        }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<(), String> {
        if self.pos_values.is_empty()
            || self.neg_values.is_empty()
            || self.qualt_values.is_empty()
            || self.variants.is_empty()
        {
            return Err("every grid axis needs at least one value".into());
        }
        if let Some(p) = self.pos_values.iter().find(|&&p| !(1..=32).contains(&p)) {
            return Err(format!("pos {p} is outside 1..=32"));
        }
        if let Some(n) = self.neg_values.iter().find(|&&n| n > 64) {
            return Err(format!("neg {n} is outside 0..=64"));
        }
        if let Some(q) = self.qualt_values.iter().find(|&&q| q > Ratio::new(3, 10)) {
            return Err(format!("qualt {} is outside 0..=0.30", format_ratio(Some(*q))));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.variants.len() * self.pos_values.len() * self.neg_values.len()
    }
}

/// Shared inputs of the sweep and the test evaluation.
pub struct Experiment<'a> {
    pub corpus: &'a Corpus,
    /// Fitted on the training split of `corpus`.
    pub model: &'a NeighborModel,
    pub budget: SearchBudget,
    pub cost: CostSpec,
    pub seed: u64,
    anonymous: OnceLock<FactStore>,
    original: OnceLock<FactStore>,
    preselections: OnceLock<HashMap<StateId, Vec<String>>>,
}

impl<'a> Experiment<'a> {
    pub fn new(corpus: &'a Corpus, model: &'a NeighborModel, budget: SearchBudget, cost: CostSpec, seed: u64) -> Self {
        Experiment {
            corpus,
            model,
            budget,
            cost,
            seed,
            anonymous: OnceLock::new(),
            original: OnceLock::new(),
            preselections: OnceLock::new(),
        }
    }

    pub fn store(&self, encoding: Encoding) -> &FactStore {
        let cell = match encoding {
            Encoding::Anonymous => &self.anonymous,
            Encoding::Original => &self.original,
        };
        cell.get_or_init(|| FactStore::build(&self.corpus.states, encoding))
    }

    /// The preselection of a validation or test state.
    pub fn preselection(&self, id: StateId) -> &[String] {
        let all = self.preselections.get_or_init(|| {
            let held_out: Vec<&ProofState> =
                self.corpus.states.iter().filter(|s| self.corpus.split_of(s) != Some(Split::Train)).collect();
            held_out.par_iter().map(|s| (s.id, self.model.preselect(s).tactics())).collect()
        });
        all.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    fn labeled<'s>(&'s self, states: &[&'s ProofState], variant: Variant) -> Vec<Labeled<'s>> {
        let store = self.store(variant.encoding());
        states
            .iter()
            .map(|s| Labeled {
                state: store.get(s.id).expect("every corpus state is encoded"),
                truth: &s.tactic,
                preselection: self.preselection(s.id),
            })
            .collect()
    }

    /// Learns the rules of every tactic for one `(variant, pos, neg)` cell.
    pub fn train(&self, variant: Variant, pos: usize, neg: usize) -> Trained {
        let params = TaskParams { pos, neg, variant, seed: self.seed };
        let mut trained = Trained { rules: RuleSet::empty(variant), failures: Vec::new(), timing: Vec::new() };
        let tasks = match build_tasks(self.corpus, self.model, &params) {
            Ok(t) => t,
            Err(e) => {
                trained.failures.push(format!("example selection: {e}"));
                return trained;
            }
        };
        let mut by_tactic: BTreeMap<&str, Vec<LearningTask>> = BTreeMap::new();
        for t in &tasks {
            by_tactic.entry(&t.tactic).or_default().push(t.clone());
        }
        let store = self.store(variant.encoding());
        let results: Vec<_> = by_tactic
            .par_iter()
            .map(|(tactic, ts)| (tactic.to_string(), ts.len(), learn_tactic(ts, store, &self.budget, &self.cost)))
            .collect();
        let mut clauses = Vec::new();
        for (tactic, n, res) in results {
            match res {
                Ok(r) => {
                    trained.timing.push(TacticTiming {
                        tactic,
                        tasks: n,
                        elapsed: r.elapsed(),
                        timed_out: r.tasks.iter().filter(|t| t.timed_out).count(),
                    });
                    clauses.extend(r.clauses);
                }
                Err(e) => trained.failures.push(format!("{tactic}: {e}")),
            }
        }
        match RuleSet::new(variant, clauses) {
            Ok(rs) => trained.rules = rs.with_proof_depth(self.budget.max_proof_depth),
            Err(e) => trained.failures.push(format!("rule set: {e}")),
        }
        trained
    }

    /// Fills `rules`' stats on the validation split and returns the counts.
    pub fn validate(&self, rules: &mut RuleSet) -> ConfusionCounts {
        let states: Vec<&ProofState> = self.corpus.in_split(Split::Validation).collect();
        let labeled = self.labeled(&states, rules.variant());
        rules.accumulate_stats(&labeled).expect("stores match the rule variant")
    }

    /// Runs the whole grid. Cells run in parallel; rows come out in grid
    /// order (variant, pos, neg, qualt).
    pub fn run_sweep(&self, grid: &SweepGrid) -> SweepReport {
        let cells: Vec<(Variant, usize, usize)> = grid
            .variants
            .iter()
            .flat_map(|&v| grid.pos_values.iter().flat_map(move |&p| grid.neg_values.iter().map(move |&n| (v, p, n))))
            .collect();
        let results: Vec<CellResult> = cells
            .par_iter()
            .map(|&(variant, pos, neg)| {
                let mut trained = self.train(variant, pos, neg);
                self.validate(&mut trained.rules);
                let states: Vec<&ProofState> = self.corpus.in_split(Split::Validation).collect();
                let labeled = self.labeled(&states, variant);
                let rows = grid
                    .qualt_values
                    .iter()
                    .map(|&q| {
                        let pruned = trained.rules.prune(q);
                        let counts = pruned.evaluate(&labeled).expect("stores match the rule variant");
                        SweepRow::new(variant, pos, neg, q, counts, pruned.len())
                    })
                    .collect();
                CellResult { variant, pos, neg, rows, trained }
            })
            .collect();

        let mut report = SweepReport::default();
        let mut best: BTreeMap<Variant, BestCell> = BTreeMap::new();
        for cell in &results {
            for (row, &q) in cell.rows.iter().zip(&grid.qualt_values) {
                let f1 = row.counts.f1();
                let slot = best.entry(cell.variant).or_insert((f1, cell.pos, cell.neg, q, &cell.trained));
                if f1 > slot.0 {
                    *slot = (f1, cell.pos, cell.neg, q, &cell.trained);
                }
            }
            report.rows.extend(cell.rows.iter().cloned());
            report.failures.extend(
                cell.trained
                    .failures
                    .iter()
                    .map(|f| format!("{} pos={} neg={}: {f}", cell.variant, cell.pos, cell.neg)),
            );
            report.timing.extend(cell.trained.timing.iter().map(|t| TimingRow {
                variant: cell.variant,
                pos: cell.pos,
                neg: cell.neg,
                tactic: t.tactic.clone(),
                tasks: t.tasks,
                elapsed: t.elapsed,
                timed_out: t.timed_out,
            }));
        }
        report.best = best
            .into_iter()
            .map(|(variant, (f1, pos, neg, qualt, trained))| Best {
                variant,
                pos,
                neg,
                qualt,
                f1,
                rules: trained.rules.prune(qualt),
            })
            .collect();
        report
    }

    /// Evaluates rules on the test split, per theory and pooled.
    pub fn run_test(&self, best: &[Best]) -> TestReport {
        let test: Vec<&ProofState> = self.corpus.in_split(Split::Test).collect();
        let mut theories: BTreeMap<&str, Vec<&ProofState>> = BTreeMap::new();
        for s in &test {
            theories.entry(&s.theory).or_default().push(s);
        }
        let mut groups: Vec<(&str, Vec<&ProofState>)> = theories.into_iter().collect();
        groups.push((POOLED, test.clone()));

        let mut rows = Vec::new();
        for b in best {
            for (theory, states) in &groups {
                let labeled = self.labeled(states, b.variant);
                let counts = b.rules.evaluate(&labeled).expect("stores match the rule variant");
                let truths: Vec<&str> = states.iter().map(|s| s.tactic.as_str()).collect();
                let plain: Vec<Vec<String>> = labeled.iter().map(|l| l.preselection.to_vec()).collect();
                let reordered: Vec<Vec<String>> = labeled
                    .iter()
                    .map(|l| {
                        let order = b.rules.reorder(l.state, l.preselection).expect("stores match the rule variant");
                        order.into_iter().map(|r| r.tactic).collect()
                    })
                    .collect();
                rows.push(TestRow {
                    variant: b.variant,
                    pos: b.pos,
                    neg: b.neg,
                    qualt: format_ratio(Some(b.qualt)),
                    theory: theory.to_string(),
                    states: states.len(),
                    counts,
                    f1: format_ratio(counts.f1()),
                    topk_knn: topk_curve(&plain, &truths).into_iter().map(format_ratio).collect(),
                    topk_reordered: topk_curve(&reordered, &truths).into_iter().map(format_ratio).collect(),
                    topk_knn_exact: topk_curve(&plain, &truths),
                    topk_reordered_exact: topk_curve(&reordered, &truths),
                });
            }
        }
        TestReport { rows }
    }
}

/// Theory name of pooled rows.
pub const POOLED: &str = "all";

/// Timing of one tactic's learning in one cell, summed over its tasks.
#[derive(Debug, Clone)]
pub struct TacticTiming {
    pub tactic: String,
    pub tasks: usize,
    pub elapsed: Duration,
    pub timed_out: usize,
}

/// Rules learned for one cell, with what went wrong on the way.
#[derive(Debug, Clone)]
pub struct Trained {
    pub rules: RuleSet,
    pub failures: Vec<String>,
    pub timing: Vec<TacticTiming>,
}

/// F-1, pos, neg, qualt and the trained rules of the best cell so far.
type BestCell<'a> = (Option<Ratio<u64>>, usize, usize, Ratio<u64>, &'a Trained);

struct CellResult {
    variant: Variant,
    pos: usize,
    neg: usize,
    rows: Vec<SweepRow>,
    trained: Trained,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub variant: Variant,
    pub pos: usize,
    pub neg: usize,
    pub qualt: String,
    pub split: Split,
    pub theory: String,
    #[serde(flatten)]
    pub counts: ConfusionCounts,
    pub f1: String,
    pub rules: usize,
}

impl SweepRow {
    fn new(variant: Variant, pos: usize, neg: usize, qualt: Ratio<u64>, counts: ConfusionCounts, rules: usize) -> Self {
        SweepRow {
            variant,
            pos,
            neg,
            qualt: format_ratio(Some(qualt)),
            split: Split::Validation,
            theory: POOLED.into(),
            counts,
            f1: format_ratio(counts.f1()),
            rules,
        }
    }
}

/// The selected parameters of one variant and its pruned rules.
#[derive(Debug, Clone, Serialize)]
pub struct Best {
    pub variant: Variant,
    pub pos: usize,
    pub neg: usize,
    #[serde(serialize_with = "ser_ratio")]
    pub qualt: Ratio<u64>,
    #[serde(serialize_with = "ser_opt_ratio")]
    pub f1: Option<Ratio<u64>>,
    #[serde(skip)]
    pub rules: RuleSet,
}

fn ser_ratio<S: serde::Serializer>(r: &Ratio<u64>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_ratio(Some(*r)))
}

fn ser_opt_ratio<S: serde::Serializer>(r: &Option<Ratio<u64>>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_ratio(*r))
}

#[derive(Debug, Clone)]
pub struct TimingRow {
    pub variant: Variant,
    pub pos: usize,
    pub neg: usize,
    pub tactic: String,
    pub tasks: usize,
    pub elapsed: Duration,
    pub timed_out: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub best: Vec<Best>,
    pub failures: Vec<String>,
    #[serde(skip)]
    pub timing: Vec<TimingRow>,
}

impl SweepReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("variant\tpos\tneg\tqualt\tsplit\ttheory\ttp\tfp\ttn\tfn\tf1\trules\n");
        for r in &self.rows {
            let c = r.counts;
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.variant, r.pos, r.neg, r.qualt, r.split, r.theory, c.tp, c.fp, c.tn, c.fn_, r.f1, r.rules
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Training time per variant, cell and tactic; the last column is the
    /// number of searches stopped by the timeout.
    pub fn timing_tsv(&self) -> String {
        let mut out = String::from("variant\tpos\tneg\ttactic\ttasks\twallclock_secs\ttimeouts\n");
        for t in &self.timing {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{:.3}\t{}",
                t.variant,
                t.pos,
                t.neg,
                t.tactic,
                t.tasks,
                t.elapsed.as_secs_f64(),
                t.timed_out
            );
        }
        out
    }

    /// Summed training time per variant over all cells.
    pub fn training_time(&self) -> BTreeMap<Variant, Duration> {
        let mut out = BTreeMap::new();
        for t in &self.timing {
            *out.entry(t.variant).or_insert(Duration::ZERO) += t.elapsed;
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TestRow {
    pub variant: Variant,
    pub pos: usize,
    pub neg: usize,
    pub qualt: String,
    pub theory: String,
    pub states: usize,
    #[serde(flatten)]
    pub counts: ConfusionCounts,
    pub f1: String,
    pub topk_knn: Vec<String>,
    pub topk_reordered: Vec<String>,
    #[serde(skip)]
    pub topk_knn_exact: Vec<Option<Ratio<u64>>>,
    #[serde(skip)]
    pub topk_reordered_exact: Vec<Option<Ratio<u64>>>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TestReport {
    pub rows: Vec<TestRow>,
}

impl TestReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("variant\tpos\tneg\tqualt\tsplit\ttheory\tstates\ttp\tfp\ttn\tfn\tf1");
        for prefix in ["knn_top", "rules_top"] {
            for k in 1..=MAX_K {
                let _ = write!(out, "\t{prefix}{k}");
            }
        }
        out.push('\n');
        for r in &self.rows {
            let c = r.counts;
            let _ = write!(
                out,
                "{}\t{}\t{}\t{}\ttest\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.variant, r.pos, r.neg, r.qualt, r.theory, r.states, c.tp, c.fp, c.tn, c.fn_, r.f1
            );
            for v in r.topk_knn.iter().chain(&r.topk_reordered) {
                let _ = write!(out, "\t{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// A short table: pooled F-1 and top-1/5/10 per variant and theory.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "{:<8}{:<20}{:>7}{:>10}{:>10}{:>10}{:>10}{:>10}\n",
            "variant", "theory", "states", "f1", "knn@1", "rules@1", "knn@10", "rules@10"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<8}{:<20}{:>7}{:>10}{:>10}{:>10}{:>10}{:>10}",
                r.variant.to_string(),
                r.theory,
                r.states,
                r.f1,
                r.topk_knn[0],
                r.topk_reordered[0],
                r.topk_knn[9],
                r.topk_reordered[9]
            );
        }
        out
    }
}

/// Applies rules to a preselection given the accept decisions only.
pub fn reorder_names(preselection: &[String], accepted: &[bool]) -> Vec<String> {
    let tagged: Vec<(String, bool)> = preselection.iter().cloned().zip(accepted.iter().copied()).collect();
    reorder_by(&tagged, |t| t.1).into_iter().map(|(t, _)| t).collect()
}
