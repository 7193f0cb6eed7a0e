//! Tree-walk features and k-nearest-neighbour services: tactic
//! preselection and nearest-negative ranking.
//!
//! A state's features are the vertical walks of up to `walk_length` nodes
//! through its goal and hypotheses, written top-down as `a/b/c`; walks in
//! hypotheses carry an `h:` prefix. With the default length 2 these are the
//! node labels plus one `parent/child` token per edge.
//!
//! Vectors are weighted by `count * idf` with `idf = ln(1 + N / df)`;
//! similarity is cosine, distance is `1 - cosine`.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::{ProofState, StateId};
use crate::term::Term;

pub const MODEL_FORMAT: &str = "tacrule-knn";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnConfig {
    /// Neighbours per tactic summed into a preselection score.
    pub k: usize,
    /// Longest vertical walk, in nodes.
    pub walk_length: usize,
    /// Length of a preselection.
    pub max_predictions: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig { k: 17, walk_length: 2, max_predictions: 50 }
    }
}

/// A multiset of feature tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub BTreeMap<String, u32>);

impl FeatureVector {
    pub fn count(&self, token: &str) -> u32 {
        self.0.get(token).copied().unwrap_or(0)
    }

    /// Total number of tokens, with multiplicity.
    pub fn total(&self) -> u64 {
        self.0.values().map(|&c| c as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn walks(t: &Term, prefix: &str, max_len: usize, chain: &mut Vec<String>, out: &mut BTreeMap<String, u32>) {
    chain.push(t.label.name().to_string());
    for len in 1..=max_len.min(chain.len()) {
        let token = format!("{prefix}{}", chain[chain.len() - len..].join("/"));
        *out.entry(token).or_insert(0) += 1;
    }
    for c in &t.children {
        walks(c, prefix, max_len, chain, out);
    }
    chain.pop();
}

pub fn extract_features(state: &ProofState, walk_length: usize) -> FeatureVector {
    let mut out = BTreeMap::new();
    let max_len = walk_length.max(1);
    walks(&state.goal, "", max_len, &mut Vec::new(), &mut out);
    for h in &state.hypotheses {
        walks(&h.body, "h:", max_len, &mut Vec::new(), &mut out);
    }
    FeatureVector(out)
}

#[derive(Debug, Error)]
pub enum KnnError {
    #[error("cannot fit a model on an empty training set")]
    EmptyTrainingSet,
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub id: StateId,
    pub tactic: String,
    pub features: FeatureVector,
}

/// A sparse idf-weighted vector over the model's feature index.
#[derive(Debug, Clone, PartialEq)]
pub struct Weighted {
    /// `(feature index, weight)`, sorted by index.
    pub weights: Vec<(u32, f64)>,
    pub norm: f64,
    features: FeatureVector,
}

impl Weighted {
    pub fn features(&self) -> &FeatureVector {
        &self.features
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    config: KnnConfig,
    entries: Vec<Entry>,
}

/// Training entries plus idf weights.
#[derive(Debug, Clone)]
pub struct NeighborModel {
    config: KnnConfig,
    entries: Vec<Entry>,
    index: HashMap<String, u32>,
    idf: Vec<f64>,
    unknown_idf: f64,
    vectors: Vec<Weighted>,
}

/// Ranked tactics with scores, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct Preselection {
    pub ranked: Vec<(String, f64)>,
}

impl Preselection {
    pub fn tactics(&self) -> Vec<String> {
        self.ranked.iter().map(|(t, _)| t.clone()).collect()
    }
}

impl NeighborModel {
    pub fn fit<'a>(train: impl IntoIterator<Item = &'a ProofState>, config: KnnConfig) -> Result<Self, KnnError> {
        let entries: Vec<Entry> = train
            .into_iter()
            .map(|s| Entry { id: s.id, tactic: s.tactic.clone(), features: extract_features(s, config.walk_length) })
            .collect();
        Self::from_entries(entries, config)
    }

    fn from_entries(entries: Vec<Entry>, config: KnnConfig) -> Result<Self, KnnError> {
        if entries.is_empty() {
            return Err(KnnError::EmptyTrainingSet);
        }
        let mut df: BTreeMap<&str, u32> = BTreeMap::new();
        for e in &entries {
            for token in e.features.0.keys() {
                *df.entry(token).or_insert(0) += 1;
            }
        }
        let n = entries.len() as f64;
        let mut index = HashMap::with_capacity(df.len());
        let mut idf = Vec::with_capacity(df.len());
        for (i, (token, d)) in df.into_iter().enumerate() {
            index.insert(token.to_string(), i as u32);
            idf.push((1.0 + n / d as f64).ln());
        }
        let mut model = NeighborModel { config, entries, index, idf, unknown_idf: (1.0 + n).ln(), vectors: Vec::new() };
        model.vectors = model.entries.iter().map(|e| model.weigh(&e.features)).collect();
        Ok(model)
    }

    pub fn config(&self) -> &KnnConfig {
        &self.config
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of distinct features seen in training.
    pub fn dimension(&self) -> usize {
        self.idf.len()
    }

    /// `ln(1 + N / df)`; tokens unseen in training get `ln(1 + N)`.
    pub fn idf(&self, token: &str) -> f64 {
        self.index.get(token).map_or(self.unknown_idf, |&i| self.idf[i as usize])
    }

    /// Weighted vector of a feature multiset. Unseen tokens only contribute
    /// to the norm.
    pub fn weigh(&self, features: &FeatureVector) -> Weighted {
        let mut weights = Vec::with_capacity(features.0.len());
        let mut sq = 0.0;
        for (token, &count) in &features.0 {
            let w = count as f64 * self.idf(token);
            sq += w * w;
            if let Some(&i) = self.index.get(token) {
                weights.push((i, w));
            }
        }
        weights.sort_by_key(|&(i, _)| i);
        Weighted { weights, norm: sq.sqrt(), features: features.clone() }
    }

    pub fn weigh_state(&self, state: &ProofState) -> Weighted {
        self.weigh(&extract_features(state, self.config.walk_length))
    }

    pub fn vector(&self, entry: usize) -> &Weighted {
        &self.vectors[entry]
    }

    /// Cosine similarity in `[0, 1]`; exactly 1 for equal feature multisets.
    pub fn similarity(a: &Weighted, b: &Weighted) -> f64 {
        if a.features == b.features {
            return if a.features.is_empty() { 0.0 } else { 1.0 };
        }
        if a.norm == 0.0 || b.norm == 0.0 {
            return 0.0;
        }
        let (mut i, mut j, mut dot) = (0, 0, 0.0);
        while i < a.weights.len() && j < b.weights.len() {
            let (fa, wa) = a.weights[i];
            let (fb, wb) = b.weights[j];
            match fa.cmp(&fb) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    dot += wa * wb;
                    i += 1;
                    j += 1;
                }
            }
        }
        (dot / (a.norm * b.norm)).clamp(0.0, 1.0)
    }

    pub fn distance(a: &Weighted, b: &Weighted) -> f64 {
        1.0 - Self::similarity(a, b)
    }

    /// Up to `count` training states not labelled `excluded_tactic`, by
    /// ascending distance, ties by id.
    pub fn nearest_negatives(&self, query: &ProofState, excluded_tactic: &str, count: usize) -> Vec<StateId> {
        self.nearest_negatives_with_distance(&self.weigh_state(query), excluded_tactic, count)
            .into_iter()
            .map(|(id, _)| id)
            .collect()
    }

    pub fn nearest_negatives_with_distance(
        &self,
        query: &Weighted,
        excluded_tactic: &str,
        count: usize,
    ) -> Vec<(StateId, f64)> {
        self.nearest_where(query, count, |e| e.tactic != excluded_tactic)
    }

    /// Up to `count` entries accepted by `keep`, by ascending distance, ties
    /// by id.
    pub fn nearest_where(&self, query: &Weighted, count: usize, keep: impl Fn(&Entry) -> bool) -> Vec<(StateId, f64)> {
        if count == 0 {
            return Vec::new();
        }
        let mut scored: Vec<(StateId, f64)> = self
            .entries
            .iter()
            .zip(&self.vectors)
            .filter(|(e, _)| keep(e))
            .map(|(e, v)| (e.id, Self::distance(query, v)))
            .collect();
        scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        scored.truncate(count);
        scored
    }

    /// Scores each tactic by the summed similarity of its `k` most similar
    /// entries and returns the best `max_predictions`, ties by name.
    pub fn preselect(&self, query: &ProofState) -> Preselection {
        self.preselect_weighted(&self.weigh_state(query))
    }

    pub fn preselect_weighted(&self, query: &Weighted) -> Preselection {
        let mut by_tactic: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for (e, v) in self.entries.iter().zip(&self.vectors) {
            by_tactic.entry(&e.tactic).or_default().push(Self::similarity(query, v));
        }
        let mut ranked: Vec<(String, f64)> = by_tactic
            .into_iter()
            .map(|(t, mut sims)| {
                sims.sort_by(|a, b| b.total_cmp(a));
                // Summing in descending order keeps the result independent of
                // the training order.
                (t.to_string(), sims.iter().take(self.config.k).sum())
            })
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(self.config.max_predictions);
        Preselection { ranked }
    }

    pub fn save<W: Write>(&self, out: W) -> Result<(), KnnError> {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            config: self.config.clone(),
            entries: self.entries.clone(),
        };
        serde_json::to_writer(out, &file).map_err(|e| KnnError::Format(e.to_string()))
    }

    pub fn load<R: Read>(input: R) -> Result<Self, KnnError> {
        let file: ModelFile = serde_json::from_reader(input).map_err(|e| KnnError::Format(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(KnnError::Format(format!("not a k-NN model (format `{}`)", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(KnnError::Format(format!("unsupported version {}", file.version)));
        }
        Self::from_entries(file.entries, file.config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(id: u64, goal: &str, tactic: &str) -> ProofState {
        ProofState::new(id, goal.parse().unwrap(), tactic, "T")
    }

    #[test]
    fn equation_features() {
        let fv = extract_features(&state(1, "ind:eq(var:x, var:x)", "t"), 2);
        let expected: BTreeMap<String, u32> =
            [("eq".to_string(), 1), ("x".to_string(), 2), ("eq/x".to_string(), 2)].into();
        assert_eq!(fv.0, expected);
        assert_eq!(fv.total(), 5);
    }

    #[test]
    fn hypotheses_add_prefixed_tokens() {
        let plain = state(1, "const:f(var:x)", "t");
        let with_hyp = plain.clone().with_hyp("H", "const:f(var:x)".parse().unwrap());
        let a = extract_features(&plain, 2);
        let b = extract_features(&with_hyp, 2);
        for (t, c) in &a.0 {
            assert!(b.count(t) >= *c);
        }
        assert_eq!(b.count("h:f/x"), 1);
    }

    #[test]
    fn idf_single_state() {
        let m = NeighborModel::fit([&state(1, "var:x", "t")], KnnConfig::default()).unwrap();
        assert!((m.idf("x") - 2f64.ln()).abs() < 1e-12);
        assert!(NeighborModel::fit([], KnnConfig::default()).is_err());
    }

    #[test]
    fn self_distance_is_zero_and_ranks_first() {
        let train = [
            state(1, "const:f(var:x, var:y)", "a"),
            state(2, "const:g(var:x)", "b"),
            state(3, "const:f(var:x, var:z)", "b"),
        ];
        let m = NeighborModel::fit(&train, KnnConfig::default()).unwrap();
        let q = m.weigh_state(&train[1]);
        assert_eq!(NeighborModel::distance(&q, m.vector(1)), 0.0);
        assert_eq!(m.nearest_negatives(&train[0], "a", 5), vec![3, 2]);
        assert_eq!(m.nearest_negatives(&train[0], "a", 0), Vec::<StateId>::new());
    }

    #[test]
    fn preselect_single_entry() {
        let m = NeighborModel::fit([&state(1, "var:x", "auto")], KnnConfig::default()).unwrap();
        assert_eq!(m.preselect(&state(9, "var:y", "?")).tactics(), vec!["auto".to_string()]);
    }

    #[test]
    fn save_load_round_trip() {
        let train = [state(1, "const:f(var:x)", "a"), state(2, "const:g(var:y)", "b")];
        let m = NeighborModel::fit(&train, KnnConfig::default()).unwrap();
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        let back = NeighborModel::load(buf.as_slice()).unwrap();
        assert_eq!(back.entries(), m.entries());
        assert_eq!(back.preselect(&train[0]), m.preselect(&train[0]));
        let bad = String::from_utf8(buf).unwrap().replace("\"version\":1", "\"version\":7");
        assert!(NeighborModel::load(bad.as_bytes()).is_err());
    }
}
