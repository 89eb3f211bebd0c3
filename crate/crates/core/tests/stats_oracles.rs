use proptest::prelude::*;
use qosrec_core::stats::special::chi2_log10_sf;
use qosrec_core::stats::{
    all_inputs, chi_square, nb_decision_table, nb_predict, ContingencyTable, Level, NbModel, DECISION_PRIORS,
};

/// erfc from the Maclaurin series of erf below 2 and the Laplace continued
/// fraction above.
fn erfc(z: f64) -> f64 {
    if z < 2.0 {
        let mut term = z;
        let mut sum = z;
        for n in 1..200 {
            term *= -z * z / n as f64;
            sum += term / (2 * n + 1) as f64;
        }
        1.0 - 2.0 / std::f64::consts::PI.sqrt() * sum
    } else {
        let mut f = z;
        for n in (1..300).rev() {
            f = z + (n as f64 / 2.0) / f;
        }
        (-z * z).exp() / std::f64::consts::PI.sqrt() / f
    }
}

/// Chi-square survival function by the closed finite sums for integer dof.
fn series_log10_sf(x: f64, dof: u32) -> f64 {
    let h = x / 2.0;
    let p = if dof % 2 == 0 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in 1..dof / 2 {
            term *= h / j as f64;
            sum += term;
        }
        (-h).exp() * sum
    } else {
        // Gamma(1/2 + j) built up from Gamma(1/2) = sqrt(pi).
        let mut term = h.sqrt() / std::f64::consts::PI.sqrt() / 0.5;
        let mut sum = 0.0;
        for j in 1..=dof / 2 {
            if j > 1 {
                term *= h / (j as f64 - 0.5);
            }
            sum += term;
        }
        erfc(h.sqrt()) + (-h).exp() * sum
    };
    p.log10()
}

#[test]
fn log10_p_matches_series() {
    let mut worst = 0.0f64;
    for dof in 1..=10u32 {
        for i in 0..=500 {
            let x = i as f64 * 0.1;
            let got = chi2_log10_sf(x, f64::from(dof));
            let want = series_log10_sf(x, dof);
            let err = (got - want).abs() / want.abs().max(1e-300);
            if want != 0.0 {
                worst = worst.max(err);
            }
            assert!(err <= 1e-6 || (got - want).abs() < 1e-15, "dof {dof} x {x}: {got} vs {want}");
        }
    }
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn series_oracle_sanity() {
    // scipy.stats.chi2.logsf(3.84, 1) / ln 10
    assert!((series_log10_sf(3.84, 1) + 1.300_652_139_324_768).abs() < 1e-9);
    assert!((series_log10_sf(2.0, 2) + 1.0 / std::f64::consts::LN_10).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn two_by_two_closed_form(a in 1u64..500, b in 1u64..500, c in 1u64..500, d in 1u64..500) {
        let t = ContingencyTable::from_counts(vec![vec![a, b], vec![c, d]]).unwrap();
        let got = chi_square(&t).unwrap().statistic;
        let (a, b, c, d) = (a as f64, b as f64, c as f64, d as f64);
        let n = a + b + c + d;
        let want = n * (a * d - b * c).powi(2) / ((a + b) * (c + d) * (a + c) * (b + d));
        prop_assert!((got - want).abs() <= 1e-9 * want.max(1.0), "{} vs {}", got, want);
    }

    #[test]
    fn independent_tables_score_zero(
        r in prop::collection::vec(1u64..20, 2..5),
        c in prop::collection::vec(1u64..20, 2..5),
    ) {
        let counts: Vec<Vec<u64>> = r.iter().map(|&ri| c.iter().map(|&cj| ri * cj).collect()).collect();
        let t = chi_square(&ContingencyTable::from_counts(counts).unwrap()).unwrap();
        prop_assert!(t.statistic.abs() < 1e-9, "{}", t.statistic);
        prop_assert!(t.log10_p.abs() < 1e-9);
    }
}

fn random_model() -> impl Strategy<Value = NbModel> {
    let p = || 0.01f64..0.99;
    ([p(), p(), p()], [p(), p(), p()], p())
        .prop_map(|(h, l, prior)| NbModel::from_cpts(h, l, prior).unwrap())
}

/// Posterior of High from the full joint table over (class, inputs).
fn brute_force(model: &NbModel, input: [Level; 3], prior: f64) -> Level {
    let mut joint = [[0.0f64; 8]; 2];
    for (cls, cpt, pc) in [(1, model.p_high_given_high, prior), (0, model.p_high_given_low, 1.0 - prior)] {
        for (idx, combo) in all_inputs().iter().enumerate() {
            let mut p = pc;
            for (x, q) in combo.iter().zip(cpt) {
                p *= if *x == Level::High { q } else { 1.0 - q };
            }
            joint[cls][idx] = p;
        }
    }
    let idx = all_inputs().iter().position(|c| *c == input).unwrap();
    let posterior_high = joint[1][idx] / (joint[0][idx] + joint[1][idx]);
    if posterior_high >= 0.5 {
        Level::High
    } else {
        Level::Low
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn nb_matches_brute_force(model in random_model()) {
        for input in all_inputs() {
            for prior in DECISION_PRIORS {
                prop_assert_eq!(nb_predict(&model, input, prior), brute_force(&model, input, prior));
            }
        }
    }

    #[test]
    fn decision_table_monotone_in_prior(model in random_model()) {
        let table = nb_decision_table(&model, &DECISION_PRIORS);
        for row in &table.rows {
            prop_assert!(row.predictions.windows(2).all(|w| w[0] <= w[1]), "{:?}", row);
        }
    }
}
