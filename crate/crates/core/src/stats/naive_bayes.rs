//! Naive Bayes High/Low QoE classifier over binarized QoS, Int and QoR.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{BinaryFeatures, Level, StatsError};
use crate::seed::kfold_partition;

/// Priors of the High class swept by the decision table.
pub const DECISION_PRIORS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Conditional tables `P(feature = High | QoE class)` for QoS, Int, QoR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbModel {
    pub p_high_given_high: [f64; 3],
    pub p_high_given_low: [f64; 3],
    /// Fraction of High QoE in the training data.
    pub empirical_prior: f64,
}

impl NbModel {
    /// Builds a model from explicit tables; every entry must lie strictly
    /// inside (0, 1).
    pub fn from_cpts(p_high_given_high: [f64; 3], p_high_given_low: [f64; 3], prior: f64) -> Result<Self, StatsError> {
        for &p in p_high_given_high.iter().chain(&p_high_given_low).chain([&prior]) {
            if !(p > 0.0 && p < 1.0) {
                return Err(StatsError::InvalidProbability(p));
            }
        }
        Ok(Self { p_high_given_high, p_high_given_low, empirical_prior: prior })
    }

    fn likelihood(&self, class: Level, input: [Level; 3]) -> f64 {
        let table = match class {
            Level::High => &self.p_high_given_high,
            Level::Low => &self.p_high_given_low,
        };
        input
            .iter()
            .zip(table)
            .map(|(x, p)| if *x == Level::High { *p } else { 1.0 - p })
            .product()
    }
}

/// Fits the tables with add-one smoothing.
pub fn nb_fit(samples: &[BinaryFeatures]) -> Result<NbModel, StatsError> {
    let mut n = [0usize; 2];
    let mut high = [[0usize; 3]; 2];
    for s in samples {
        let c = usize::from(s.qoe == Level::High);
        n[c] += 1;
        for (slot, x) in high[c].iter_mut().zip(s.inputs()) {
            *slot += usize::from(x == Level::High);
        }
    }
    if n[0] == 0 || n[1] == 0 {
        return Err(StatsError::MissingClass);
    }
    let cpt = |c: usize| high[c].map(|h| (h as f64 + 1.0) / (n[c] as f64 + 2.0));
    Ok(NbModel {
        p_high_given_high: cpt(1),
        p_high_given_low: cpt(0),
        empirical_prior: n[1] as f64 / samples.len() as f64,
    })
}

/// Predicts High iff `prior * P(x | High) >= (1 - prior) * P(x | Low)`.
pub fn nb_predict(model: &NbModel, input: [Level; 3], prior: f64) -> Level {
    let high = prior * model.likelihood(Level::High, input);
    let low = (1.0 - prior) * model.likelihood(Level::Low, input);
    if high >= low {
        Level::High
    } else {
        Level::Low
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRow {
    /// QoS, Int, QoR.
    pub inputs: [Level; 3],
    /// One prediction per prior.
    pub predictions: Vec<Level>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTable {
    pub priors: Vec<f64>,
    pub rows: Vec<DecisionRow>,
}

impl DecisionTable {
    /// CSV with columns `QoS,Int,QoR` then one column per prior.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("QoS,Int,QoR");
        for p in &self.priors {
            write!(out, ",{p:.1}").unwrap();
        }
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> =
                row.inputs.iter().chain(&row.predictions).map(ToString::to_string).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// All eight input combinations, Low before High, QoS varying slowest.
pub fn all_inputs() -> [[Level; 3]; 8] {
    std::array::from_fn(|i| {
        let bit = |b: usize| if i >> b & 1 == 1 { Level::High } else { Level::Low };
        [bit(2), bit(1), bit(0)]
    })
}

pub fn nb_decision_table(model: &NbModel, priors: &[f64]) -> DecisionTable {
    let rows = all_inputs()
        .into_iter()
        .map(|inputs| DecisionRow {
            inputs,
            predictions: priors.iter().map(|&p| nb_predict(model, inputs, p)).collect(),
        })
        .collect();
    DecisionTable { priors: priors.to_vec(), rows }
}

/// k-fold accuracy (percent), each fold predicted at its training prior.
pub fn nb_cv_accuracy(samples: &[BinaryFeatures], k: usize, seed: u64) -> Result<f64, StatsError> {
    if k < 2 || samples.len() < k {
        return Err(StatsError::TooFewObservations { needed: k.max(2), got: samples.len() });
    }
    let folds = kfold_partition(samples.len(), k, seed);
    let mut in_test = vec![usize::MAX; samples.len()];
    for (f, idx) in folds.iter().enumerate() {
        for &i in idx {
            in_test[i] = f;
        }
    }
    let mut correct = 0usize;
    for (f, idx) in folds.iter().enumerate() {
        let train: Vec<BinaryFeatures> =
            samples.iter().zip(&in_test).filter(|(_, &t)| t != f).map(|(s, _)| *s).collect();
        let model = nb_fit(&train)?;
        correct += idx
            .iter()
            .filter(|&&i| nb_predict(&model, samples[i].inputs(), model.empirical_prior) == samples[i].qoe)
            .count();
    }
    Ok(100.0 * correct as f64 / samples.len() as f64)
}
