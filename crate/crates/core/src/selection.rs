//! Training-task construction: relabelling by the automation tactics,
//! clustering of positives, and nearest-neighbour negatives.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::ilp::modes::Variant;
use crate::kmeans::{constrained_kmeans, KMeansError};
use crate::knn::{NeighborModel, Weighted};
use crate::state::{Corpus, Split, StateId};

/// The automation tactics, in the order they are tried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Automation {
    Assumption,
    Reflexivity,
    Trivial,
    Auto,
}

impl Automation {
    pub const ORDER: [Automation; 4] =
        [Automation::Assumption, Automation::Reflexivity, Automation::Trivial, Automation::Auto];

    pub fn name(self) -> &'static str {
        match self {
            Automation::Assumption => "assumption",
            Automation::Reflexivity => "reflexivity",
            Automation::Trivial => "trivial",
            Automation::Auto => "auto",
        }
    }
}

impl fmt::Display for Automation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Automation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Automation::ORDER.into_iter().find(|a| a.name() == s).ok_or_else(|| format!("unknown automation tactic `{s}`"))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("state {id}: {have} closes it but {missing} does not")]
    NotMonotone { id: StateId, have: Automation, missing: Automation },
    #[error("line {line}: state {id} listed twice")]
    Duplicate { line: usize, id: StateId },
}

/// Which automation tactics close which states. States not listed are
/// closed by none.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AutomationOracle {
    table: BTreeMap<StateId, BTreeSet<Automation>>,
}

impl AutomationOracle {
    /// Builds an oracle, rejecting tables where assumption or reflexivity
    /// closes a state that trivial does not, or trivial one that auto does
    /// not.
    pub fn new(table: BTreeMap<StateId, BTreeSet<Automation>>) -> Result<Self, OracleError> {
        use Automation::*;
        for (&id, set) in &table {
            for (have, needs) in [(Assumption, Trivial), (Reflexivity, Trivial), (Trivial, Auto)] {
                if set.contains(&have) && !set.contains(&needs) {
                    return Err(OracleError::NotMonotone { id, have, missing: needs });
                }
            }
        }
        Ok(AutomationOracle { table })
    }

    pub fn closes(&self, id: StateId) -> impl Iterator<Item = Automation> + '_ {
        self.table.get(&id).into_iter().flatten().copied()
    }

    pub fn table(&self) -> &BTreeMap<StateId, BTreeSet<Automation>> {
        &self.table
    }

    /// Parses `id: <int> closes: [<tactic>, ...]` lines. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self, OracleError> {
        let mut table = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let syntax = |msg: &str| OracleError::Syntax { line, msg: msg.to_string() };
            let rest = s.strip_prefix("id:").ok_or_else(|| syntax("expected `id:`"))?;
            let (id_text, rest) = rest.split_once("closes:").ok_or_else(|| syntax("expected `closes:`"))?;
            let id: StateId = id_text.trim().parse().map_err(|_| syntax("state id is not an integer"))?;
            let list = rest
                .trim()
                .strip_prefix('[')
                .and_then(|r| r.strip_suffix(']'))
                .ok_or_else(|| syntax("expected a bracketed list"))?;
            let mut set = BTreeSet::new();
            for name in list.split(',').map(str::trim).filter(|n| !n.is_empty()) {
                set.insert(name.parse::<Automation>().map_err(|m| OracleError::Syntax { line, msg: m })?);
            }
            if table.insert(id, set).is_some() {
                return Err(OracleError::Duplicate { line, id });
            }
        }
        AutomationOracle::new(table)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, set) in &self.table {
            let names: Vec<&str> = set.iter().map(|a| a.name()).collect();
            out.push_str(&format!("id: {id} closes: [{}]\n", names.join(", ")));
        }
        out
    }
}

/// Relabels every state with the first automation tactic closing it, in
/// the fixed order; states closed by none keep their label.
pub fn orthogonalize(corpus: &Corpus, oracle: &AutomationOracle) -> Corpus {
    let mut out = corpus.clone();
    for s in &mut out.states {
        if let Some(a) = Automation::ORDER.into_iter().find(|a| oracle.closes(s.id).any(|c| c == *a)) {
            s.tactic = a.name().to_string();
        }
    }
    out
}

/// One ILP problem: a cluster of positives of one tactic and negatives
/// ranked by distance to the cluster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LearningTask {
    pub tactic: String,
    pub positives: Vec<StateId>,
    pub negatives: Vec<StateId>,
    pub variant: Variant,
}

/// Dense vectors over the union of the given vectors' feature indices.
fn densify(vectors: &[&Weighted]) -> Vec<Vec<f64>> {
    let dims: BTreeSet<u32> = vectors.iter().flat_map(|v| v.weights.iter().map(|&(i, _)| i)).collect();
    let slot: HashMap<u32, usize> = dims.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    vectors
        .iter()
        .map(|v| {
            let mut d = vec![0.0; dims.len()];
            for &(i, w) in &v.weights {
                d[slot[&i]] = w;
            }
            d
        })
        .collect()
}

/// Splits positives into `ceil(|P| / target)` clusters of near-equal size
/// by constrained k-means over their idf-weighted vectors.
pub fn cluster_positives(vectors: &[&Weighted], target: usize, seed: u64) -> Result<Vec<Vec<usize>>, KMeansError> {
    constrained_kmeans(&densify(vectors), target, seed)
}

/// A stable 64-bit FNV-1a hash, for deriving per-tactic seeds.
pub fn stable_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Example-selection knobs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskParams {
    /// Target cluster size.
    pub pos: usize,
    /// Nearest negatives taken per positive.
    pub neg: usize,
    pub variant: Variant,
    pub seed: u64,
}

/// Builds the learning tasks of every tactic with training positives.
///
/// Each cluster's negatives are the union of its members' `neg` nearest
/// training states labelled otherwise, ordered by their smallest distance to
/// any member (ties by id). Tasks are ordered by tactic, then by cluster.
pub fn build_tasks(
    corpus: &Corpus,
    model: &NeighborModel,
    params: &TaskParams,
) -> Result<Vec<LearningTask>, KMeansError> {
    let train: Vec<_> = corpus.in_split(Split::Train).collect();
    let label: HashMap<StateId, &str> = train.iter().map(|s| (s.id, s.tactic.as_str())).collect();
    let mut by_tactic: BTreeMap<&str, Vec<StateId>> = BTreeMap::new();
    let mut vectors: HashMap<StateId, Weighted> = HashMap::new();
    for s in &train {
        by_tactic.entry(&s.tactic).or_default().push(s.id);
        vectors.insert(s.id, model.weigh_state(s));
    }
    let per_tactic: Vec<Vec<LearningTask>> = by_tactic
        .par_iter()
        .map(|(&tactic, ids)| {
            let vs: Vec<&Weighted> = ids.iter().map(|id| &vectors[id]).collect();
            let clusters = cluster_positives(&vs, params.pos, params.seed ^ stable_hash(tactic))?;
            Ok(clusters
                .into_iter()
                .map(|members| {
                    let mut best: HashMap<StateId, f64> = HashMap::new();
                    for &m in &members {
                        let near = model.nearest_where(vs[m], params.neg, |e| {
                            e.tactic != tactic && label.get(&e.id).is_some_and(|&l| l != tactic)
                        });
                        for (id, d) in near {
                            let slot = best.entry(id).or_insert(d);
                            *slot = slot.min(d);
                        }
                    }
                    let mut negatives: Vec<(StateId, f64)> = best.into_iter().collect();
                    negatives.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                    LearningTask {
                        tactic: tactic.to_string(),
                        positives: members.iter().map(|&m| ids[m]).collect(),
                        negatives: negatives.into_iter().map(|(id, _)| id).collect(),
                        variant: params.variant,
                    }
                })
                .collect())
        })
        .collect::<Result<_, KMeansError>>()?;
    Ok(per_tactic.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knn::KnnConfig;
    use crate::state::ProofState;

    fn oracle(rows: &[(StateId, &[Automation])]) -> Result<AutomationOracle, OracleError> {
        AutomationOracle::new(rows.iter().map(|(id, s)| (*id, s.iter().copied().collect())).collect())
    }

    #[test]
    fn relabels_with_first_closing_tactic() {
        use Automation::*;
        let c = Corpus::new(vec![
            ProofState::new(1, "var:x".parse().unwrap(), "auto", "T"),
            ProofState::new(2, "var:x".parse().unwrap(), "rewrite H", "T"),
        ]);
        let o = oracle(&[(1, &[Assumption, Trivial, Auto])]).unwrap();
        let out = orthogonalize(&c, &o);
        assert_eq!(out.states[0].tactic, "assumption");
        assert_eq!(out.states[1].tactic, "rewrite H");
        assert_eq!(orthogonalize(&out, &o), out);
    }

    #[test]
    fn non_monotone_oracle_rejected() {
        use Automation::*;
        assert!(matches!(oracle(&[(1, &[Reflexivity, Auto])]), Err(OracleError::NotMonotone { .. })));
        assert!(AutomationOracle::parse("id: 3 closes: [reflexivity, auto]").is_err());
    }

    #[test]
    fn oracle_text_round_trip() {
        let text = "# comment\nid: 4 closes: [assumption, trivial, auto]\n\nid: 9 closes: []\n";
        let o = AutomationOracle::parse(text).unwrap();
        assert_eq!(o.closes(4).count(), 3);
        assert_eq!(AutomationOracle::parse(&o.to_text()).unwrap(), o);
        assert!(matches!(AutomationOracle::parse("id: x closes: []"), Err(OracleError::Syntax { line: 1, .. })));
        assert!(matches!(
            AutomationOracle::parse("id: 1 closes: []\nid: 1 closes: []"),
            Err(OracleError::Duplicate { line: 2, .. })
        ));
    }

    #[test]
    fn tasks_are_disjoint_and_labelled() {
        let mut states = Vec::new();
        for i in 0..12u64 {
            let (goal, tactic) = if i % 2 == 0 {
                (format!("const:f(var:x{i}, var:x{i})"), "a")
            } else {
                (format!("const:g(var:y{i})"), "b")
            };
            states.push(ProofState::new(i, goal.parse().unwrap(), tactic, "T"));
        }
        let corpus = Corpus::new(states);
        let model = NeighborModel::fit(&corpus.states, KnnConfig::default()).unwrap();
        let params = TaskParams { pos: 4, neg: 3, variant: Variant::AF, seed: 1 };
        let tasks = build_tasks(&corpus, &model, &params).unwrap();
        assert_eq!(tasks.len(), 4);
        for t in &tasks {
            for id in &t.positives {
                assert_eq!(corpus.get(*id).unwrap().tactic, t.tactic);
            }
            for id in &t.negatives {
                assert_ne!(corpus.get(*id).unwrap().tactic, t.tactic);
                assert!(!t.positives.contains(id));
            }
        }
        let single = TaskParams { pos: 1, neg: 0, variant: Variant::AF, seed: 1 };
        let tasks = build_tasks(&corpus, &model, &single).unwrap();
        assert_eq!(tasks.len(), 12);
        assert!(tasks.iter().all(|t| t.positives.len() == 1 && t.negatives.is_empty()));
    }
}
