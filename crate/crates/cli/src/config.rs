//! Pipeline configuration: one TOML file plus command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tacrule_core::eval::{parse_decimal, SweepGrid};
use tacrule_core::ilp::modes::Variant;
use tacrule_core::ilp::search::{CostSpec, SearchBudget};
use tacrule_core::knn::KnnConfig;
use tacrule_core::state::Split;
use tacrule_core::synth::SynthConfig;

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Line-delimited JSON proof states.
    pub corpus: Option<PathBuf>,
    /// TOML table mapping theory names to `train`, `validation` or `test`.
    pub split: Option<PathBuf>,
    /// Automation oracle table.
    pub oracle: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    /// Per-rule stats table written next to pruned rules.
    pub stats: Option<PathBuf>,
    pub model: Option<PathBuf>,
    /// Directory for reports.
    pub reports: Option<PathBuf>,
    /// Output file or directory of the command.
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub pos: Vec<usize>,
    pub neg: Vec<usize>,
    /// Decimal strings or numbers, e.g. `[0, 0.06, 0.12]`.
    pub qualt: Vec<f64>,
    pub variants: Vec<Variant>,
}

impl Default for Grid {
    fn default() -> Self {
        let g = SweepGrid::default();
        Grid {
            pos: g.pos_values,
            neg: g.neg_values,
            qualt: g.qualt_values.iter().map(|q| *q.numer() as f64 / *q.denom() as f64).collect(),
            variants: g.variants,
        }
    }
}

impl Grid {
    pub fn to_sweep_grid(&self) -> Result<SweepGrid, CliError> {
        let qualt_values = self.qualt.iter().map(|&q| qualt_ratio(q)).collect::<Result<_, _>>()?;
        let grid = SweepGrid {
            pos_values: self.pos.clone(),
            neg_values: self.neg.clone(),
            qualt_values,
            variants: self.variants.clone(),
        };
        grid.validate().map_err(|e| CliError::Usage(format!("grid: {e}")))?;
        Ok(grid)
    }
}

/// Exact ratio of a threshold written as a float, via its shortest decimal.
pub fn qualt_ratio(q: f64) -> Result<num_rational::Ratio<u64>, CliError> {
    if !q.is_finite() || q < 0.0 {
        return Err(CliError::Usage(format!("qualt {q} must be a non-negative number")));
    }
    parse_decimal(&format!("{q}")).map_err(|e| CliError::Usage(e.to_string()))
}

/// Example selection for `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Selection {
    pub pos: usize,
    pub neg: usize,
    /// Precision threshold used by `prune`.
    pub qualt: f64,
}

impl Default for Selection {
    fn default() -> Self {
        Selection { pos: 8, neg: 16, qualt: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Required by the commands that learn or sample.
    pub seed: Option<u64>,
    pub variant: Variant,
    /// Worker threads; 0 uses one per core.
    pub workers: usize,
    pub paths: Paths,
    pub selection: Selection,
    pub grid: Grid,
    pub budget: SearchBudget,
    pub cost: CostSpec,
    pub knn: KnnConfig,
    pub synthetic: SynthConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: None,
            variant: Variant::AF,
            workers: 0,
            paths: Paths::default(),
            selection: Selection::default(),
            grid: Grid::default(),
            budget: SearchBudget::default(),
            cost: CostSpec::default(),
            knn: KnnConfig::default(),
            synthetic: SynthConfig::default(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.budget.validate().map_err(|e| CliError::Usage(format!("budget: {e}")))?;
        if self.knn.k == 0 || self.knn.walk_length == 0 || self.knn.max_predictions == 0 {
            return Err(CliError::Usage("knn: k, walk_length and max_predictions must be positive".into()));
        }
        if self.selection.pos == 0 {
            return Err(CliError::Usage("selection.pos must be at least 1".into()));
        }
        qualt_ratio(self.selection.qualt)?;
        if !(self.cost.weight.is_finite() && self.cost.min_score.is_finite()) {
            return Err(CliError::Usage("cost: weight and min_score must be finite".into()));
        }
        Ok(())
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::Usage("a seed is required (`seed` in the config or --seed)".into()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Split file: a TOML table `theory = "train" | "validation" | "test"`.
pub fn load_split(path: &Path) -> Result<BTreeMap<String, Split>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn split_to_toml(split: &BTreeMap<String, Split>) -> String {
    toml::to_string(split).expect("split serializes")
}
