//! QoE prediction from ratings: features and meta-features, outlier
//! filtering, ordinal/linear/logistic regression, a small MLP, the Dummy and
//! Vanilla-RS baselines, k-fold evaluation and feature-count sweeps.

mod eval;
mod features;
mod glm;
mod mlp;
mod optim;
mod ordinal;

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rating::Rating;

pub use eval::{cross_validate, feature_sweep, score_predictions, EvalReport, FoldReport, Score, SweepPoint};
pub use features::{build_design, filter_outliers, Basic, DesignMatrix, Feature, FeatureSpec, OutlierMode};
pub use glm::{fit_linear, fit_logistic, LinearHyper, LinearModel, LogisticHyper, LogisticModel};
pub use mlp::{fit_mlp, init_mlp, MlpHyper, MlpModel};
pub use ordinal::{fit_ordinal, OrdinalHyper, OrdinalModel};

/// Fewest rows a model may be fitted on.
pub const MIN_FIT_ROWS: usize = 50;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid feature spec: {0}")]
    InvalidSpec(String),
    #[error("need at least {needed} rows to fit, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("labels contain a single class")]
    SingleClass,
    #[error("row has {got} features, model expects {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("model needs feature column `{0}`")]
    MissingColumn(String),
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_fit_input(design: &DesignMatrix) -> Result<(), ModelError> {
    if design.len() < MIN_FIT_ROWS {
        return Err(ModelError::TooFewRows { needed: MIN_FIT_ROWS, got: design.len() });
    }
    let first = design.labels[0];
    if design.labels.iter().all(|&l| l == first) {
        return Err(ModelError::SingleClass);
    }
    Ok(())
}

/// Distinct (row, label) pairs with their multiplicities, in first-seen
/// order. Likelihood objectives are evaluated on these instead of the raw
/// rows; ratings take few distinct values so this is much shorter.
pub(crate) struct Grouped {
    pub rows: Vec<Vec<f64>>,
    /// Zero-based class.
    pub classes: Vec<usize>,
    pub counts: Vec<f64>,
    pub total: f64,
}

pub(crate) fn group_rows(design: &DesignMatrix) -> Grouped {
    let mut index: HashMap<(Vec<u64>, usize), usize> = HashMap::new();
    let mut g = Grouped { rows: Vec::new(), classes: Vec::new(), counts: Vec::new(), total: design.len() as f64 };
    for (row, y) in design.rows.iter().zip(&design.labels) {
        let class = usize::from(y.get()) - 1;
        let key = (row.iter().map(|v| v.to_bits()).collect(), class);
        let slot = *index.entry(key).or_insert_with(|| {
            g.rows.push(row.clone());
            g.classes.push(class);
            g.counts.push(0.0);
            g.rows.len() - 1
        });
        g.counts[slot] += 1.0;
    }
    g
}

/// Clamps to [1, 5] and rounds half up.
pub(crate) fn round_clamped(x: f64) -> Rating {
    let x = if x.is_nan() { 3.0 } else { x.clamp(1.0, 5.0) };
    Rating::saturating((x + 0.5).floor() as i64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Ordinal,
    Linear,
    Logistic,
    Mlp,
    /// Always predicts 3.
    Dummy,
    /// Predicts the Int rating.
    Vanilla,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] =
        [ModelKind::Ordinal, ModelKind::Linear, ModelKind::Logistic, ModelKind::Mlp, ModelKind::Dummy, ModelKind::Vanilla];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ordinal => "ordinal",
            ModelKind::Linear => "linear",
            ModelKind::Logistic => "logistic",
            ModelKind::Mlp => "mlp",
            ModelKind::Dummy => "dummy",
            ModelKind::Vanilla => "vanilla",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ModelError::InvalidParameter(format!("unknown model kind `{s}`")))
    }
}

/// Hyperparameters of every model kind.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub ordinal: OrdinalHyper,
    pub linear: LinearHyper,
    pub logistic: LogisticHyper,
    pub mlp: MlpHyper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedModel {
    Ordinal(OrdinalModel),
    Linear(LinearModel),
    Logistic(LogisticModel),
    Mlp(MlpModel),
    Dummy { feature_names: Vec<String> },
    Vanilla { feature_names: Vec<String>, column: usize },
}

pub fn fit(kind: ModelKind, design: &DesignMatrix, config: &FitConfig) -> Result<FittedModel, ModelError> {
    let names = design.feature_names.clone();
    Ok(match kind {
        ModelKind::Ordinal => FittedModel::Ordinal(fit_ordinal(design, &config.ordinal)?),
        ModelKind::Linear => FittedModel::Linear(fit_linear(design, &config.linear)?),
        ModelKind::Logistic => FittedModel::Logistic(fit_logistic(design, &config.logistic)?),
        ModelKind::Mlp => FittedModel::Mlp(fit_mlp(design, &config.mlp)?),
        ModelKind::Dummy => FittedModel::Dummy { feature_names: names },
        ModelKind::Vanilla => {
            let column = names
                .iter()
                .position(|n| n == "Int")
                .ok_or_else(|| ModelError::MissingColumn("Int".into()))?;
            FittedModel::Vanilla { feature_names: names, column }
        }
    })
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Ordinal(_) => ModelKind::Ordinal,
            FittedModel::Linear(_) => ModelKind::Linear,
            FittedModel::Logistic(_) => ModelKind::Logistic,
            FittedModel::Mlp(_) => ModelKind::Mlp,
            FittedModel::Dummy { .. } => ModelKind::Dummy,
            FittedModel::Vanilla { .. } => ModelKind::Vanilla,
        }
    }

    pub fn feature_names(&self) -> &[String] {
        match self {
            FittedModel::Ordinal(m) => &m.feature_names,
            FittedModel::Linear(m) => &m.feature_names,
            FittedModel::Logistic(m) => &m.feature_names,
            FittedModel::Mlp(m) => &m.feature_names,
            FittedModel::Dummy { feature_names } | FittedModel::Vanilla { feature_names, .. } => feature_names,
        }
    }

    pub fn predict(&self, row: &[f64]) -> Result<Rating, ModelError> {
        let expected = self.feature_names().len();
        if row.len() != expected {
            return Err(ModelError::WidthMismatch { expected, got: row.len() });
        }
        Ok(match self {
            FittedModel::Ordinal(m) => m.predict(row),
            FittedModel::Linear(m) => m.predict(row),
            FittedModel::Logistic(m) => m.predict(row),
            FittedModel::Mlp(m) => m.predict(row),
            FittedModel::Dummy { .. } => Rating::saturating(3),
            FittedModel::Vanilla { column, .. } => round_clamped(row[*column]),
        })
    }

    /// Weights divided by their L1 norm, for the models that have a single
    /// weight vector.
    pub fn normalized_weights(&self) -> Option<Vec<f64>> {
        let w = match self {
            FittedModel::Ordinal(m) => &m.weights,
            FittedModel::Linear(m) => &m.weights,
            _ => return None,
        };
        let norm: f64 = w.iter().map(|v| v.abs()).sum();
        Some(if norm == 0.0 { w.clone() } else { w.iter().map(|v| v / norm).collect() })
    }

    pub fn raw_weights(&self) -> Option<Vec<f64>> {
        match self {
            FittedModel::Ordinal(m) => Some(m.weights.clone()),
            FittedModel::Linear(m) => Some(m.weights.clone()),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rating::Sample;

    fn samples(n: usize) -> Vec<Sample> {
        (0..n)
            .map(|i| {
                let r = |k: usize| ((i * k + i / 5) % 5 + 1) as u8;
                Sample::from_raw(r(1), r(3), r(2), r(1)).unwrap()
            })
            .collect()
    }

    #[test]
    fn rounding_rule() {
        assert_eq!(round_clamped(2.5).get(), 3);
        assert_eq!(round_clamped(2.49).get(), 2);
        assert_eq!(round_clamped(-4.0).get(), 1);
        assert_eq!(round_clamped(7.2).get(), 5);
        assert_eq!(round_clamped(4.5).get(), 5);
    }

    #[test]
    fn baselines() {
        let d = build_design(&samples(10), &FeatureSpec::selected());
        let dummy = fit(ModelKind::Dummy, &d, &FitConfig::default()).unwrap();
        let vanilla = fit(ModelKind::Vanilla, &d, &FitConfig::default()).unwrap();
        assert_eq!(dummy.predict(&[1.0, 5.0, 1.0]).unwrap().get(), 3);
        assert_eq!(vanilla.predict(&[1.0, 4.0, 1.0]).unwrap().get(), 4);
        assert!(matches!(vanilla.predict(&[1.0]), Err(ModelError::WidthMismatch { expected: 3, got: 1 })));
        let no_int = build_design(&samples(10), &"QoS;QoR".parse().unwrap());
        assert!(matches!(fit(ModelKind::Vanilla, &no_int, &FitConfig::default()), Err(ModelError::MissingColumn(_))));
    }

    #[test]
    fn fit_preconditions() {
        let d = build_design(&samples(49), &FeatureSpec::qos_int());
        assert!(matches!(fit(ModelKind::Ordinal, &d, &FitConfig::default()), Err(ModelError::TooFewRows { .. })));
        let same: Vec<Sample> = (0..60).map(|_| Sample::from_raw(3, 3, 3, 3).unwrap()).collect();
        let d = build_design(&same, &FeatureSpec::qos_int());
        for kind in [ModelKind::Ordinal, ModelKind::Linear, ModelKind::Logistic, ModelKind::Mlp] {
            assert!(matches!(fit(kind, &d, &FitConfig::default()), Err(ModelError::SingleClass)));
        }
    }

    #[test]
    fn model_json_round_trip() {
        let d = build_design(&samples(100), &FeatureSpec::selected());
        let cfg = FitConfig { mlp: MlpHyper { epochs: 3, ..MlpHyper::default() }, ..FitConfig::default() };
        for kind in ModelKind::ALL {
            let m = fit(kind, &d, &cfg).unwrap();
            let back = FittedModel::from_json(&m.to_json().unwrap()).unwrap();
            assert_eq!(back, m);
            assert_eq!(back.kind(), kind);
        }
    }

    #[test]
    fn kind_names() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("svr".parse::<ModelKind>().is_err());
    }
}
