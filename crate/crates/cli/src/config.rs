use std::path::Path;

use anyhow::Context;
use qosrec_core::catalog::{CatalogConfig, DEFAULT_CACHE_CAPACITY};
use qosrec_core::dataio::ColumnMapping;
use qosrec_core::qoemodel::{FeatureSpec, FitConfig, ModelKind, OutlierMode};
use qosrec_core::rating::Rating;
use qosrec_core::recommender::Recommender;
use qosrec_core::seed::child_seed;
use qosrec_core::simulator::{AbandonModel, ClickModel, RatingModel, SimConfig};
use serde::{Deserialize, Serialize};

/// The JSON run configuration. Every section and field is optional.
///
/// Seeds live in the `seeds` section only; `catalog.seed` and
/// `model.hyper.mlp.seed` are overwritten from it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub catalog: CatalogConfig,
    pub cache: CacheConfig,
    pub recommender: Recommender,
    pub click: ClickModel,
    pub ratings: RatingModel,
    pub abandon: AbandonModel,
    pub model: ModelConfig,
    pub eval: EvalConfig,
    pub io: IoConfig,
    pub seeds: Seeds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheConfig {
    pub capacity: usize,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self { capacity: DEFAULT_CACHE_CAPACITY }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Models to fit; `fit` uses the first.
    pub kinds: Vec<ModelKind>,
    pub features: FeatureSpec,
    /// `null` keeps every sample.
    pub outliers: Option<OutlierMode>,
    pub hyper: FitConfig,
    /// QoR value used for the heatmap cells.
    pub heatmap_qor: Rating,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kinds: ModelKind::ALL.to_vec(),
            features: FeatureSpec::selected(),
            outliers: Some(OutlierMode::QosInt),
            hyper: FitConfig::default(),
            heatmap_qor: Rating::saturating(3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub folds: usize,
    /// Features to sweep; `null` skips the sweep.
    pub sweep: Option<FeatureSpec>,
    pub sweep_model: ModelKind,
    pub nb_folds: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { folds: 5, sweep: Some(FeatureSpec::full_nine()), sweep_model: ModelKind::Ordinal, nb_folds: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    pub n_sessions: usize,
    pub region: String,
    /// Column mapping for rating files that are not session logs.
    pub mapping: Option<ColumnMapping>,
}

impl Default for IoConfig {
    fn default() -> Self {
        Self { n_sessions: 742, region: "synthetic".into(), mapping: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub catalog: u64,
    pub simulate: u64,
    pub cv: u64,
    pub mlp: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { catalog: 0, simulate: 1, cv: 2, mlp: 3 }
    }
}

impl Seeds {
    /// Independent streams derived from one master seed.
    pub fn from_master(seed: u64) -> Self {
        Self {
            catalog: child_seed(seed, 0),
            simulate: child_seed(seed, 1),
            cv: child_seed(seed, 2),
            mlp: child_seed(seed, 3),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Applies a `--seed` override and copies the seeds into the sections
    /// that carry their own.
    pub fn resolve(mut self, seed: Option<u64>) -> anyhow::Result<Self> {
        if let Some(s) = seed {
            self.seeds = Seeds::from_master(s);
        }
        self.catalog.seed = self.seeds.catalog;
        self.model.hyper.mlp.seed = self.seeds.mlp;
        anyhow::ensure!(!self.model.kinds.is_empty(), "model.kinds is empty");
        anyhow::ensure!(self.eval.folds >= 2 && self.eval.nb_folds >= 2, "eval folds must be at least 2");
        anyhow::ensure!(self.io.n_sessions >= 1, "io.n_sessions must be at least 1");
        self.sim_config().validate()?;
        Ok(self)
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            recommender: self.recommender,
            click: self.click,
            ratings: self.ratings,
            abandon: self.abandon,
            region: self.io.region.clone(),
        }
    }

    pub fn to_compact_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
