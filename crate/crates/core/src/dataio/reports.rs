use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{fx, DataError, Provenance};
use crate::qoemodel::{EvalReport, FeatureSpec, FittedModel, ModelError, ModelKind, SweepPoint};
use crate::rating::{Rating, Sample};
use crate::recommender::LIST_LEN;
use crate::simulator::{click_probabilities, ClickModel, Session, StepAction, DEFAULT_ZIPF_EXPONENT};
use crate::stats::{welch_t_test, DecisionTable, NamedChiSquare};

fn opt(v: Option<f64>) -> String {
    v.map(fx).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrRrRow {
    /// High-QoS items in the shown list.
    pub k: usize,
    pub n_steps: usize,
    /// Share of the group's clicks that went to high-QoS items.
    pub observed_hr: Option<f64>,
    /// Expected HR if clicks were uniform over positions.
    pub uniform_hr: f64,
    /// Expected HR under Zipf position bias with the high-QoS items on top.
    pub zipf_hr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrRrTable {
    pub rows: Vec<HrRrRow>,
    pub n_steps: usize,
    pub overall_rr: f64,
    pub overall_hr: f64,
}

impl HrRrTable {
    pub fn to_csv(&self, provenance: &Provenance) -> String {
        let mut out = provenance.header();
        writeln!(out, "# overall_rr={} overall_hr={} n_steps={}", fx(self.overall_rr), fx(self.overall_hr), self.n_steps)
            .unwrap();
        out.push_str("k,rr,n_steps,observed_hr,uniform_hr,zipf_hr\n");
        for r in &self.rows {
            let rr = r.k as f64 / LIST_LEN as f64;
            writeln!(out, "{},{},{},{},{},{}", r.k, fx(rr), r.n_steps, opt(r.observed_hr), fx(r.uniform_hr), fx(r.zipf_hr))
                .unwrap();
        }
        out
    }
}

/// Groups clicked steps with a full-length list by the number of high-QoS
/// items in it.
pub fn emit_hr_rr(sessions: &[Session]) -> Result<HrRrTable, DataError> {
    let mut n = [0usize; LIST_LEN + 1];
    let mut hits = [0usize; LIST_LEN + 1];
    for step in sessions.iter().flat_map(|s| &s.steps) {
        if step.recs.len() != LIST_LEN {
            continue;
        }
        if let Some(high) = step.selected_high_qos() {
            let k = step.recs.high_qos_count();
            n[k] += 1;
            hits[k] += usize::from(high);
        }
    }
    let total: usize = n.iter().sum();
    if total == 0 {
        return Err(DataError::Empty("no clicked steps with a full recommendation list"));
    }
    let zipf = click_probabilities(&ClickModel::zipf(DEFAULT_ZIPF_EXPONENT), LIST_LEN);
    let rows = (0..=LIST_LEN)
        .map(|k| HrRrRow {
            k,
            n_steps: n[k],
            observed_hr: (n[k] > 0).then(|| hits[k] as f64 / n[k] as f64),
            uniform_hr: k as f64 / LIST_LEN as f64,
            zipf_hr: zipf[..k].iter().fold(0.0, |a, p| a + p),
        })
        .collect();
    let shown: usize = n.iter().enumerate().map(|(k, c)| k * c).sum();
    Ok(HrRrTable {
        rows,
        n_steps: total,
        overall_rr: shown as f64 / (LIST_LEN * total) as f64,
        overall_hr: hits.iter().sum::<usize>() as f64 / total as f64,
    })
}

/// Sample mean with a normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub n: usize,
    pub mean: f64,
    pub half_width: f64,
}

impl MeanCi {
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let half_width = if xs.len() < 2 {
            0.0
        } else {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            1.96 * (var / n).sqrt()
        };
        Some(Self { n: xs.len(), mean, half_width })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingsRow {
    pub high_qos: bool,
    pub n: usize,
    pub interest: MeanCi,
    pub qos: MeanCi,
    /// Rating of the list the video was picked from; absent for first steps.
    pub qor: Option<MeanCi>,
    pub qoe: MeanCi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingsTable {
    pub rows: Vec<RatingsRow>,
    pub notes: Vec<String>,
}

fn class_name(high: bool) -> &'static str {
    if high {
        "high"
    } else {
        "low"
    }
}

impl RatingsTable {
    pub fn to_csv(&self, provenance: &Provenance) -> String {
        let mut out = provenance.header();
        for note in &self.notes {
            writeln!(out, "# note={note}").unwrap();
        }
        out.push_str("qos_class,n,int_mean,int_ci,qos_mean,qos_ci,qor_n,qor_mean,qor_ci,qoe_mean,qoe_ci\n");
        for r in &self.rows {
            let cell = |m: &MeanCi| format!("{},{}", fx(m.mean), fx(m.half_width));
            let qor = r.qor.map_or("0,,".to_string(), |m| format!("{},{}", m.n, cell(&m)));
            writeln!(
                out,
                "{},{},{},{},{},{}",
                class_name(r.high_qos),
                r.n,
                cell(&r.interest),
                cell(&r.qos),
                qor,
                cell(&r.qoe)
            )
            .unwrap();
        }
        out
    }
}

/// Mean ratings of low- and high-QoS views with 95% intervals.
pub fn emit_ratings_table(sessions: &[Session]) -> RatingsTable {
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for high in [false, true] {
        let mut vals: [Vec<f64>; 4] = Default::default();
        for s in sessions {
            for (i, step) in s.steps.iter().enumerate() {
                if step.watched_high_qos != high {
                    continue;
                }
                vals[0].push(step.ratings.interest.as_f64());
                vals[1].push(step.ratings.qos.as_f64());
                vals[3].push(step.ratings.qoe.as_f64());
                if i > 0 {
                    vals[2].push(s.steps[i - 1].ratings.qor.as_f64());
                }
            }
        }
        match (MeanCi::of(&vals[0]), MeanCi::of(&vals[1]), MeanCi::of(&vals[3])) {
            (Some(interest), Some(qos), Some(qoe)) => rows.push(RatingsRow {
                high_qos: high,
                n: interest.n,
                interest,
                qos,
                qor: MeanCi::of(&vals[2]),
                qoe,
            }),
            _ => notes.push(format!("no {}-QoS views", class_name(high))),
        }
    }
    RatingsTable { rows, notes }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbandonmentRow {
    pub rating: String,
    pub all_mean: f64,
    pub abandoned_mean: Option<f64>,
    /// How much lower the abandoned mean is, in percent of the overall mean.
    pub gap_pct: Option<f64>,
    /// Welch t-test p-value, abandoned against continued steps.
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbandonmentTable {
    pub n_steps: usize,
    pub n_abandoned: usize,
    pub rows: Vec<AbandonmentRow>,
}

impl AbandonmentTable {
    pub fn to_csv(&self, provenance: &Provenance) -> String {
        let mut out = provenance.header();
        writeln!(out, "# n_steps={} n_abandoned={}", self.n_steps, self.n_abandoned).unwrap();
        out.push_str("rating,all_mean,abandoned_mean,gap_pct,p_value\n");
        for r in &self.rows {
            let p = r.p_value.map(|p| format!("{p:.3e}")).unwrap_or_default();
            writeln!(out, "{},{},{},{},{}", r.rating, fx(r.all_mean), opt(r.abandoned_mean), opt(r.gap_pct), p).unwrap();
        }
        out
    }
}

/// Mean Int, QoS and QoR over all steps and over abandoned steps. Steps that
/// ended the session without a choice (step limit or empty list) are left out
/// of both.
pub fn emit_abandonment_table(sessions: &[Session]) -> Result<AbandonmentTable, DataError> {
    type Get = fn(&Sample) -> Rating;
    let getters: [(&str, Get); 3] = [("Int", |s| s.interest), ("QoS", |s| s.qos), ("QoR", |s| s.qor)];
    let steps: Vec<_> = sessions.iter().flat_map(|s| &s.steps).filter(|st| st.action != StepAction::SessionEnd).collect();
    if steps.is_empty() {
        return Err(DataError::Empty("every step ended its session"));
    }
    let n_abandoned = steps.iter().filter(|st| st.action == StepAction::Abandoned).count();
    let rows = getters
        .into_iter()
        .map(|(name, get)| {
            let all: Vec<f64> = steps.iter().map(|st| get(&st.ratings).as_f64()).collect();
            let (ab, cont): (Vec<f64>, Vec<f64>) = steps
                .iter()
                .map(|st| (st.action == StepAction::Abandoned, get(&st.ratings).as_f64()))
                .fold((Vec::new(), Vec::new()), |(mut a, mut c), (is_ab, v)| {
                    if is_ab { a.push(v) } else { c.push(v) }
                    (a, c)
                });
            let all_mean = all.iter().sum::<f64>() / all.len() as f64;
            let abandoned_mean = (!ab.is_empty()).then(|| ab.iter().sum::<f64>() / ab.len() as f64);
            AbandonmentRow {
                rating: name.into(),
                all_mean,
                abandoned_mean,
                gap_pct: abandoned_mean.map(|m| 100.0 * (all_mean - m) / all_mean),
                p_value: welch_t_test(&ab, &cont).ok().map(|t| t.p),
            }
        })
        .collect();
    Ok(AbandonmentTable { n_steps: steps.len(), n_abandoned, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub high_qos: bool,
    pub n: usize,
    /// Views per Interest rating 1..=5.
    pub counts: [usize; 5],
    pub percent: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionTable {
    pub rows: Vec<DistributionRow>,
}

impl DistributionTable {
    pub fn to_csv(&self, provenance: &Provenance) -> String {
        let mut out = provenance.header();
        out.push_str("qos_class,n,count_1,count_2,count_3,count_4,count_5,pct_1,pct_2,pct_3,pct_4,pct_5\n");
        for r in &self.rows {
            let counts: Vec<String> = r.counts.iter().map(ToString::to_string).collect();
            let pct: Vec<String> = r.percent.iter().map(|&p| fx(p)).collect();
            writeln!(out, "{},{},{},{}", class_name(r.high_qos), r.n, counts.join(","), pct.join(",")).unwrap();
        }
        out
    }
}

/// Histogram of Interest ratings per QoS class; empty classes are left out.
pub fn emit_distribution_table(sessions: &[Session]) -> DistributionTable {
    let mut counts = [[0usize; 5]; 2];
    for step in sessions.iter().flat_map(|s| &s.steps) {
        counts[usize::from(step.watched_high_qos)][usize::from(step.ratings.interest.get()) - 1] += 1;
    }
    let rows = [false, true]
        .into_iter()
        .filter_map(|high| {
            let c = counts[usize::from(high)];
            let n: usize = c.iter().sum();
            (n > 0).then(|| DistributionRow { high_qos: high, n, counts: c, percent: c.map(|v| 100.0 * v as f64 / n as f64) })
        })
        .collect();
    DistributionTable { rows }
}

/// Predicted QoE over the 5x5 grid of (Int, QoS) ratings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub model: ModelKind,
    pub features: Vec<String>,
    /// QoR value used for every cell.
    pub qor_fill: Rating,
    /// `grid[int - 1][qos - 1]`.
    pub grid: [[Rating; 5]; 5],
}

impl Heatmap {
    pub fn to_csv(&self, provenance: &Provenance) -> String {
        let mut out = provenance.header();
        writeln!(out, "# model={} features={} qor_fill={}", self.model, self.features.join(";"), self.qor_fill).unwrap();
        out.push_str("int\\qos,1,2,3,4,5\n");
        for (i, row) in self.grid.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(ToString::to_string).collect();
            writeln!(out, "{},{}", i + 1, cells.join(",")).unwrap();
        }
        out
    }
}

pub fn emit_heatmap(model: &FittedModel, spec: &FeatureSpec, qor_fill: Rating) -> Result<Heatmap, ModelError> {
    if spec.names() != model.feature_names() {
        return Err(ModelError::InvalidSpec("spec does not match the model's features".into()));
    }
    let mut grid = [[Rating::saturating(1); 5]; 5];
    for (i, interest) in Rating::all().enumerate() {
        for (q, qos) in Rating::all().enumerate() {
            grid[i][q] = model.predict(&spec.row(qos, interest, qor_fill))?;
        }
    }
    Ok(Heatmap { model: model.kind(), features: spec.names(), qor_fill, grid })
}

/// Everything a `report` run produces, as one JSON document.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportBundle {
    pub provenance: BTreeMap<String, String>,
    pub n_samples: usize,
    pub n_samples_after_filter: usize,
    pub eval: Vec<EvalReport>,
    pub sweep: Vec<SweepPoint>,
    pub heatmaps: Vec<Heatmap>,
    pub ratings: Option<RatingsTable>,
    pub hr_rr: Option<HrRrTable>,
    pub abandonment: Option<AbandonmentTable>,
    pub distribution: Option<DistributionTable>,
    pub chi_square_binary: Vec<NamedChiSquare>,
    pub chi_square_ratings: Vec<NamedChiSquare>,
    pub pearson_min_product: Option<f64>,
    pub decision_table: Option<DecisionTable>,
    pub nb_cv_accuracy: Option<f64>,
}

impl ReportBundle {
    pub fn to_json(&self) -> Result<String, DataError> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}
