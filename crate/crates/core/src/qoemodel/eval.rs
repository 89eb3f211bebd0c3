use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_design, fit, FeatureSpec, FitConfig, ModelError, ModelKind};
use crate::rating::{Rating, Sample};
use crate::seed::{child_seed, kfold_partition};

/// MAE and the distribution of absolute errors, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub n: usize,
    pub mae: f64,
    /// Error 0.
    pub exact: f64,
    /// Error 1.
    pub one: f64,
    /// Error above 1.
    pub gt1: f64,
}

pub fn score_predictions(predicted: &[Rating], truth: &[Rating]) -> Score {
    assert_eq!(predicted.len(), truth.len(), "prediction and label counts differ");
    let n = truth.len();
    let mut buckets = [0usize; 3];
    let mut total = 0usize;
    for (p, t) in predicted.iter().zip(truth) {
        let err = usize::from(p.get().abs_diff(t.get()));
        total += err;
        buckets[err.min(2)] += 1;
    }
    let pct = |c: usize| if n == 0 { 0.0 } else { 100.0 * c as f64 / n as f64 };
    Score {
        n,
        mae: if n == 0 { 0.0 } else { total as f64 / n as f64 },
        exact: pct(buckets[0]),
        one: pct(buckets[1]),
        gt1: pct(buckets[2]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: ModelKind,
    pub features: Vec<String>,
    pub k: usize,
    pub seed: u64,
    pub score: Score,
    pub folds: Vec<FoldReport>,
    /// From a fit on all samples; ordinal and linear only.
    pub normalized_weights: Option<Vec<f64>>,
    pub raw_weights: Option<Vec<f64>>,
}

/// k-fold cross-validation. Fold `f`'s MLP is seeded with
/// `child_seed(config.mlp.seed, f)`. With `jobs > 1` folds are fitted in
/// parallel; the report does not depend on `jobs`.
pub fn cross_validate(
    samples: &[Sample],
    spec: &FeatureSpec,
    kind: ModelKind,
    k: usize,
    seed: u64,
    config: &FitConfig,
    jobs: usize,
) -> Result<EvalReport, ModelError> {
    if k < 2 || samples.len() < k {
        return Err(ModelError::InvalidParameter(format!("{k}-fold CV needs k >= 2 and at least k samples")));
    }
    let design = build_design(samples, spec);
    let folds = kfold_partition(samples.len(), k, seed);
    let run_fold = |(f, test): (usize, &Vec<usize>)| -> Result<(FoldReport, Vec<Rating>), ModelError> {
        let mut is_test = vec![false; design.len()];
        for &i in test {
            is_test[i] = true;
        }
        let train: Vec<usize> = (0..design.len()).filter(|&i| !is_test[i]).collect();
        let mut cfg = *config;
        cfg.mlp.seed = child_seed(config.mlp.seed, f as u64);
        let model = fit(kind, &design.select(&train), &cfg)?;
        let preds = test.iter().map(|&i| model.predict(&design.rows[i])).collect::<Result<Vec<_>, _>>()?;
        let truth: Vec<Rating> = test.iter().map(|&i| design.labels[i]).collect();
        let mae = score_predictions(&preds, &truth).mae;
        Ok((FoldReport { fold: f, n_train: train.len(), n_test: test.len(), mae }, preds))
    };
    let results: Vec<(FoldReport, Vec<Rating>)> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| ModelError::InvalidParameter(format!("thread pool: {e}")))?;
        pool.install(|| folds.par_iter().enumerate().map(run_fold).collect::<Result<_, _>>())?
    } else {
        folds.iter().enumerate().map(run_fold).collect::<Result<_, _>>()?
    };

    let mut predicted = vec![Rating::saturating(3); design.len()];
    for ((_, preds), test) in results.iter().zip(&folds) {
        for (&i, &p) in test.iter().zip(preds) {
            predicted[i] = p;
        }
    }
    let (normalized_weights, raw_weights) = if matches!(kind, ModelKind::Ordinal | ModelKind::Linear) {
        let full = fit(kind, &design, config)?;
        (full.normalized_weights(), full.raw_weights())
    } else {
        (None, None)
    };
    Ok(EvalReport {
        model: kind,
        features: spec.names(),
        k,
        seed,
        score: score_predictions(&predicted, &design.labels),
        folds: results.into_iter().map(|(r, _)| r).collect(),
        normalized_weights,
        raw_weights,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n_features: usize,
    pub features: Vec<String>,
    pub mae: f64,
}

/// Ranks the features of `spec` by absolute normalized weight from a fit on
/// all samples, then cross-validates the top-N features for every N. Ties
/// keep spec order; each subset keeps spec order.
pub fn feature_sweep(
    samples: &[Sample],
    spec: &FeatureSpec,
    kind: ModelKind,
    k: usize,
    seed: u64,
    config: &FitConfig,
    jobs: usize,
) -> Result<Vec<SweepPoint>, ModelError> {
    if spec.len() < 2 {
        return Err(ModelError::InvalidSpec("a sweep needs at least two features".into()));
    }
    if !matches!(kind, ModelKind::Ordinal | ModelKind::Linear) {
        return Err(ModelError::InvalidParameter(format!("cannot rank features of a {kind} model")));
    }
    let weights = fit(kind, &build_design(samples, spec), config)?
        .normalized_weights()
        .expect("ordinal and linear models have weights");
    let mut order: Vec<usize> = (0..spec.len()).collect();
    order.sort_by(|&a, &b| weights[b].abs().total_cmp(&weights[a].abs()));
    (1..=spec.len())
        .map(|n| {
            let keep: Vec<_> = order[..n].iter().map(|&i| spec.features()[i]).collect();
            let sub = spec.subset(&keep)?;
            let report = cross_validate(samples, &sub, kind, k, seed, config, jobs)?;
            Ok(SweepPoint { n_features: n, features: sub.names(), mae: report.score.mae })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(v: u8) -> Rating {
        Rating::new(v).unwrap()
    }

    #[test]
    fn score_arithmetic() {
        let s = score_predictions(&[r(3), r(3)], &[r(3), r(5)]);
        assert_eq!(s.mae, 1.0);
        assert_eq!((s.exact, s.one, s.gt1), (50.0, 0.0, 50.0));
        let s = score_predictions(&[r(1), r(2), r(5)], &[r(2), r(2), r(1)]);
        assert!((s.mae - 5.0 / 3.0).abs() < 1e-12);
        assert!((s.exact + s.one + s.gt1 - 100.0).abs() < 1e-9);
    }

    #[test]
    fn cv_rejects_bad_k() {
        let samples = vec![Sample::from_raw(3, 3, 3, 3).unwrap(); 3];
        let spec = FeatureSpec::qos_int();
        assert!(cross_validate(&samples, &spec, ModelKind::Dummy, 1, 0, &FitConfig::default(), 1).is_err());
        assert!(cross_validate(&samples, &spec, ModelKind::Dummy, 4, 0, &FitConfig::default(), 1).is_err());
        let rep = cross_validate(&samples, &spec, ModelKind::Dummy, 3, 0, &FitConfig::default(), 1).unwrap();
        assert_eq!(rep.score.mae, 0.0);
        assert_eq!(rep.folds.len(), 3);
    }
}
