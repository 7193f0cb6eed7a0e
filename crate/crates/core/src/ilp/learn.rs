//! The cover loop over one learning task, and merging of the rules learned
//! for one tactic.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::encoding::{FactBase, FactStore};
use crate::ilp::clause::Clause;
use crate::ilp::cover::covers;
use crate::ilp::saturate::saturate;
use crate::ilp::search::{search, CostSpec, SearchBudget, StopReason};
use crate::ilp::subsume::theta_subsumes_capped;
use crate::selection::LearningTask;
use crate::state::StateId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LearnError {
    #[error("state {0} is not in the fact store")]
    MissingState(StateId),
    #[error("fact store is encoded for another variant than {0}")]
    EncodingMismatch(crate::ilp::modes::Variant),
    #[error("tasks mix tactics or variants (`{0}` and `{1}`)")]
    MixedTasks(String, String),
}

/// What happened while learning one task.
#[derive(Debug, Clone, Serialize)]
pub struct TaskReport {
    pub tactic: String,
    pub positives: usize,
    pub negatives: usize,
    pub clauses: Vec<String>,
    pub searches: usize,
    pub failed_seeds: usize,
    pub nodes: usize,
    pub timed_out: bool,
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct TacticRules {
    pub tactic: String,
    pub clauses: Vec<Clause>,
    pub tasks: Vec<TaskReport>,
}

impl TacticRules {
    /// Summed learning time over the tactic's tasks.
    pub fn elapsed(&self) -> Duration {
        self.tasks.iter().map(|t| t.elapsed).sum()
    }
}

fn lookup<'a>(store: &'a FactStore, ids: &[StateId]) -> Result<Vec<&'a FactBase>, LearnError> {
    ids.iter().map(|&id| store.get(id).ok_or(LearnError::MissingState(id))).collect()
}

/// Greedy cover: each still-uncovered positive in task order seeds a
/// saturation and search; a found clause marks the positives it covers.
/// Positives are counted among the uncovered ones only.
pub fn learn_task(
    task: &LearningTask,
    store: &FactStore,
    budget: &SearchBudget,
    cost: &CostSpec,
) -> Result<(Vec<Clause>, TaskReport), LearnError> {
    let started = Instant::now();
    let positives = lookup(store, &task.positives)?;
    let negatives = lookup(store, &task.negatives)?;
    if positives.iter().chain(&negatives).any(|fb| fb.encoding() != task.variant.encoding()) {
        return Err(LearnError::EncodingMismatch(task.variant));
    }
    let custom = negatives.is_empty() || positives.len() == 1;
    let mut covered = vec![false; positives.len()];
    let mut tried = vec![false; positives.len()];
    let mut clauses = Vec::new();
    let mut report = TaskReport {
        tactic: task.tactic.clone(),
        positives: positives.len(),
        negatives: negatives.len(),
        clauses: Vec::new(),
        searches: 0,
        failed_seeds: 0,
        nodes: 0,
        timed_out: false,
        elapsed: Duration::ZERO,
    };

    while let Some(seed) = (0..positives.len()).find(|&i| !covered[i] && !tried[i]) {
        tried[seed] = true;
        let open: Vec<usize> = (0..positives.len()).filter(|&i| !covered[i]).collect();
        let open_refs: Vec<&FactBase> = open.iter().map(|&i| positives[i]).collect();
        let seed_at = open.iter().position(|&i| i == seed).expect("seed is uncovered");
        let bottom =
            saturate(positives[seed], &task.tactic, task.variant, budget.saturation_depth, budget.max_bottom_literals);
        let out = search(&bottom, seed_at, &open_refs, &negatives, budget, cost, custom);
        report.searches += 1;
        report.nodes += out.nodes;
        report.timed_out |= out.stop == StopReason::Timeout;
        match out.best {
            Some(found) => {
                for &k in &found.positives {
                    covered[open[k]] = true;
                }
                report.clauses.push(found.clause.to_string());
                clauses.push(found.clause);
            }
            None => report.failed_seeds += 1,
        }
    }
    report.elapsed = started.elapsed();
    Ok((clauses, report))
}

/// Removes duplicates up to renaming and every clause subsumed by another
/// one. Of two equivalent clauses the one sorting first (shorter, then by
/// text) is kept. The result is sorted the same way.
pub fn merge_rules(clauses: Vec<Clause>, subsumption_cap: usize) -> Vec<Clause> {
    let mut keyed: Vec<(usize, String, Clause)> = clauses
        .into_iter()
        .map(|c| {
            let c = c.canonical();
            (c.body.len(), c.to_string(), c)
        })
        .collect();
    keyed.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    keyed.dedup_by(|a, b| a.1 == b.1);
    let all: Vec<Clause> = keyed.into_iter().map(|(_, _, c)| c).collect();
    let redundant: Vec<bool> = (0..all.len())
        .into_par_iter()
        .map(|i| {
            (0..all.len()).any(|j| {
                j != i
                    && theta_subsumes_capped(&all[j], &all[i], subsumption_cap)
                    && (j < i || !theta_subsumes_capped(&all[i], &all[j], subsumption_cap))
            })
        })
        .collect();
    all.into_iter().zip(redundant).filter(|(_, r)| !r).map(|(c, _)| c).collect()
}

/// Learns every task (in parallel) and merges the resulting clauses. All
/// tasks must share one tactic and one variant.
pub fn learn_tactic(
    tasks: &[LearningTask],
    store: &FactStore,
    budget: &SearchBudget,
    cost: &CostSpec,
) -> Result<TacticRules, LearnError> {
    let tactic = tasks.first().map(|t| t.tactic.clone()).unwrap_or_default();
    for t in tasks {
        if t.tactic != tactic || t.variant != tasks[0].variant {
            return Err(LearnError::MixedTasks(tactic, t.tactic.clone()));
        }
    }
    let results: Vec<_> = tasks.par_iter().map(|t| learn_task(t, store, budget, cost)).collect::<Result<_, _>>()?;
    let mut clauses = Vec::new();
    let mut reports = Vec::new();
    for (c, r) in results {
        clauses.extend(c);
        reports.push(r);
    }
    let clauses = merge_rules(clauses, budget.max_subsumption_literals);
    Ok(TacticRules { tactic, clauses, tasks: reports })
}

/// Ids of the given states covered by `clause`.
pub fn covered_ids(clause: &Clause, store: &FactStore, ids: &[StateId], max_proof_depth: usize) -> Vec<StateId> {
    ids.iter().copied().filter(|&id| store.get(id).is_some_and(|fb| covers(clause, fb, max_proof_depth))).collect()
}
