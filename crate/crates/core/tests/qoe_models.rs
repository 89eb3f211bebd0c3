use proptest::prelude::*;
use qosrec_core::qoemodel::{
    build_design, cross_validate, feature_sweep, filter_outliers, fit, FeatureSpec, FitConfig, ModelKind, OrdinalModel,
    OutlierMode,
};
use qosrec_core::rating::{Rating, Sample};
use qosrec_core::simulator::{synthetic_samples, RatingModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn r(v: u8) -> Rating {
    Rating::new(v).unwrap()
}

fn ordinal(weights: Vec<f64>, thresholds: [f64; 4]) -> OrdinalModel {
    OrdinalModel {
        feature_names: FeatureSpec::selected().names(),
        weights,
        thresholds,
        converged: true,
        iterations: 0,
        log_likelihood: 0.0,
    }
}

fn sorted_thresholds() -> impl Strategy<Value = [f64; 4]> {
    (0.0f64..4.0, prop::array::uniform3(0.05f64..2.0)).prop_map(|(t1, g)| [t1, t1 + g[0], t1 + g[0] + g[1], t1 + g[0] + g[1] + g[2]])
}

fn sample() -> impl Strategy<Value = Sample> {
    prop::array::uniform4(1u8..=5).prop_map(|[i, q, r, e]| Sample::from_raw(i, q, r, e).unwrap())
}

proptest! {
    #[test]
    fn predictions_monotone_over_grid(w in prop::array::uniform3(0.0f64..1.0), t in sorted_thresholds()) {
        let m = ordinal(w.to_vec(), t);
        let spec = FeatureSpec::selected();
        let grid: Vec<Vec<u8>> = (1..=5u8)
            .map(|i| (1..=5u8).map(|q| m.predict(&spec.row(r(q), r(i), r(3))).get()).collect())
            .collect();
        for i in 0..5 {
            for q in 0..5 {
                if i + 1 < 5 { prop_assert!(grid[i][q] <= grid[i + 1][q], "{:?}", grid); }
                if q + 1 < 5 { prop_assert!(grid[i][q] <= grid[i][q + 1], "{:?}", grid); }
            }
        }
    }

    #[test]
    fn cumulative_strictly_decreasing_in_latent(
        w in prop::array::uniform3(0.01f64..1.0),
        t in sorted_thresholds(),
        a in prop::array::uniform3(1u8..=5),
        b in prop::array::uniform3(1u8..=5),
    ) {
        let m = ordinal(w.to_vec(), t);
        let spec = FeatureSpec::selected();
        let (ra, rb) = (spec.row(r(a[0]), r(a[1]), r(a[2])), spec.row(r(b[0]), r(b[1]), r(b[2])));
        let (sa, sb) = (m.latent(&ra), m.latent(&rb));
        prop_assume!((sa - sb).abs() > 1e-9);
        let (lo, hi) = if sa < sb { (ra, rb) } else { (rb, ra) };
        let (cl, ch) = (m.cumulative(&lo), m.cumulative(&hi));
        for k in 0..4 {
            prop_assert!(ch[k] < cl[k], "k={} {:?} {:?}", k, cl, ch);
        }
        let p = m.probabilities(&lo);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn normalization_keeps_predictions(w in prop::array::uniform3(0.01f64..3.0), t in sorted_thresholds(), s in sample()) {
        let m = ordinal(w.to_vec(), t);
        let row = FeatureSpec::selected().row(s.qos, s.interest, s.qor);
        let n = m.normalized();
        prop_assert!((n.weights.iter().map(|v| v.abs()).sum::<f64>() - 1.0).abs() < 1e-12);
        let (s1, s2) = (m.latent(&row) * n.weights[0] / m.weights[0], n.latent(&row));
        prop_assert!((s1 - s2).abs() < 1e-9);
        // Exact ties with a threshold may flip after rescaling.
        if m.thresholds.iter().all(|th| (th - m.latent(&row)).abs() > 1e-9) {
            prop_assert_eq!(m.predict(&row), n.predict(&row));
        }
    }

    #[test]
    fn outlier_filter_keeps_envelope(samples in prop::collection::vec(sample(), 0..60)) {
        let kept = filter_outliers(&samples, OutlierMode::QosInt);
        let inside: Vec<Sample> = samples
            .iter()
            .filter(|s| s.qos.min(s.interest) <= s.qoe && s.qoe <= s.qos.max(s.interest))
            .copied()
            .collect();
        prop_assert_eq!(&kept, &inside);
        let wide = filter_outliers(&samples, OutlierMode::QosIntQor);
        prop_assert!(wide.len() >= kept.len());
        prop_assert!(kept.iter().all(|s| wide.contains(s)));
    }
}

#[test]
fn dummy_mae_on_uniform_labels() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let samples: Vec<Sample> = (0..10_000)
        .map(|_| Sample::from_raw(rng.gen_range(1..=5), rng.gen_range(1..=5), rng.gen_range(1..=5), rng.gen_range(1..=5)).unwrap())
        .collect();
    let rep = cross_validate(&samples, &FeatureSpec::qos_int(), ModelKind::Dummy, 5, 3, &FitConfig::default(), 1).unwrap();
    // E|U - 3| over U uniform on 1..=5 is (2+1+0+1+2)/5.
    assert!((rep.score.mae - 1.2).abs() < 0.05, "{}", rep.score.mae);
}

#[test]
fn vanilla_exact_when_qoe_is_interest() {
    let model = RatingModel::default();
    let samples: Vec<Sample> = synthetic_samples(&model, 2000, 0.5, 5)
        .into_iter()
        .map(|s| Sample { qoe: s.interest, ..s })
        .collect();
    let cfg = FitConfig::default();
    let van = cross_validate(&samples, &FeatureSpec::qos_int(), ModelKind::Vanilla, 5, 1, &cfg, 1).unwrap();
    assert_eq!(van.score.mae, 0.0);
    assert_eq!(van.score.exact, 100.0);
    let ord = cross_validate(&samples, &FeatureSpec::qos_int(), ModelKind::Ordinal, 5, 1, &cfg, 1).unwrap();
    assert!(ord.score.mae <= 0.05, "{}", ord.score.mae);
}

#[test]
fn weight_recovery() {
    let model = RatingModel::default();
    let samples = synthetic_samples(&model, 5000, 0.5, 7);
    let design = build_design(&samples, &FeatureSpec::selected());
    let fitted = fit(ModelKind::Ordinal, &design, &FitConfig::default()).unwrap();
    let w = fitted.normalized_weights().unwrap();
    for (got, want) in w.iter().zip([0.17, 0.30, 0.53]) {
        assert!((got - want).abs() < 0.10, "{w:?}");
    }
}

#[test]
fn cv_is_deterministic_and_parallel_safe() {
    let samples = synthetic_samples(&RatingModel::default(), 600, 0.5, 2);
    let cfg = FitConfig::default();
    for kind in [ModelKind::Ordinal, ModelKind::Linear, ModelKind::Logistic] {
        let a = cross_validate(&samples, &FeatureSpec::selected(), kind, 5, 9, &cfg, 1).unwrap();
        let b = cross_validate(&samples, &FeatureSpec::selected(), kind, 5, 9, &cfg, 4).unwrap();
        assert_eq!(a, b, "{kind}");
        assert!((a.score.exact + a.score.one + a.score.gt1 - 100.0).abs() < 1e-9);
    }
}

#[test]
fn sweep_covers_every_size() {
    let samples = synthetic_samples(&RatingModel::default(), 1500, 0.5, 4);
    let spec = FeatureSpec::basic_three();
    let sweep = feature_sweep(&samples, &spec, ModelKind::Ordinal, 5, 1, &FitConfig::default(), 1).unwrap();
    assert_eq!(sweep.iter().map(|p| p.n_features).collect::<Vec<_>>(), vec![1, 2, 3]);
    for pair in sweep.windows(2) {
        assert!(pair[0].features.iter().all(|f| pair[1].features.contains(f)));
    }
    assert_eq!(sweep[2].features, spec.names());
    assert!(sweep.iter().all(|p| p.mae.is_finite() && p.mae >= 0.0));
    assert!(feature_sweep(&samples, &spec, ModelKind::Mlp, 5, 1, &FitConfig::default(), 1).is_err());
}
