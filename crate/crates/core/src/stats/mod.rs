//! Statistical tests used on rating data: contingency tables with Pearson
//! chi-square tests, Pearson correlation, Welch's t-test, High/Low
//! binarization of ratings, and a Naive Bayes High/Low QoE classifier.

mod naive_bayes;
pub mod special;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::rating::{Rating, Sample};

pub use naive_bayes::{
    all_inputs, nb_cv_accuracy, nb_decision_table, nb_fit, nb_predict, DecisionRow, DecisionTable, NbModel,
    DECISION_PRIORS,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("rating {0} outside 1..=5")]
    RatingOutOfRange(i64),
    #[error("contingency table must be at least 2x2 and rectangular")]
    BadShape,
    #[error("contingency table has an all-zero {0}")]
    ZeroMarginal(&'static str),
    #[error("inputs have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("zero variance")]
    ZeroVariance,
    #[error("samples must contain both High and Low QoE")]
    MissingClass,
    #[error("invalid probability {0}")]
    InvalidProbability(f64),
}

/// Binary rating level: ratings up to 3 are Low, 4 and 5 are High.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    Low,
    High,
}

impl Level {
    pub fn flip(self) -> Self {
        match self {
            Level::Low => Level::High,
            Level::High => Level::Low,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Low => "Low",
            Level::High => "High",
        })
    }
}

impl From<Rating> for Level {
    fn from(r: Rating) -> Self {
        if r.get() <= 3 {
            Level::Low
        } else {
            Level::High
        }
    }
}

/// Maps a raw 1..=5 rating to its level.
pub fn binarize(rating: i64) -> Result<Level, StatsError> {
    u8::try_from(rating)
        .ok()
        .and_then(|r| Rating::new(r).ok())
        .map(Level::from)
        .ok_or(StatsError::RatingOutOfRange(rating))
}

/// Binarized view of a [`Sample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinaryFeatures {
    pub qos: Level,
    pub interest: Level,
    pub qor: Level,
    pub qoe: Level,
}

impl From<&Sample> for BinaryFeatures {
    fn from(s: &Sample) -> Self {
        Self {
            qos: s.qos.into(),
            interest: s.interest.into(),
            qor: s.qor.into(),
            qoe: s.qoe.into(),
        }
    }
}

impl BinaryFeatures {
    /// Inputs in the classifier's order: QoS, Int, QoR.
    pub fn inputs(&self) -> [Level; 3] {
        [self.qos, self.interest, self.qor]
    }
}

/// Observed counts cross-classified by two categorical variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    counts: Vec<Vec<u64>>,
    row_labels: Vec<String>,
    col_labels: Vec<String>,
}

impl ContingencyTable {
    pub fn new(counts: Vec<Vec<u64>>, row_labels: Vec<String>, col_labels: Vec<String>) -> Result<Self, StatsError> {
        let cols = counts.first().map_or(0, Vec::len);
        if counts.len() < 2 || cols < 2 || counts.iter().any(|r| r.len() != cols) {
            return Err(StatsError::BadShape);
        }
        if row_labels.len() != counts.len() || col_labels.len() != cols {
            return Err(StatsError::BadShape);
        }
        Ok(Self { counts, row_labels, col_labels })
    }

    /// Unlabeled table; labels default to indices.
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self, StatsError> {
        let rows = counts.len();
        let cols = counts.first().map_or(0, Vec::len);
        Self::new(counts, (0..rows).map(|i| i.to_string()).collect(), (0..cols).map(|i| i.to_string()).collect())
    }

    /// Cross-tabulates paired observations over the categories that occur.
    pub fn from_observations<R, C>(pairs: impl IntoIterator<Item = (R, C)>) -> Result<Self, StatsError>
    where
        R: Ord + Clone + fmt::Display,
        C: Ord + Clone + fmt::Display,
    {
        let pairs: Vec<(R, C)> = pairs.into_iter().collect();
        let rows: Vec<R> = pairs.iter().map(|p| p.0.clone()).collect::<BTreeSet<_>>().into_iter().collect();
        let cols: Vec<C> = pairs.iter().map(|p| p.1.clone()).collect::<BTreeSet<_>>().into_iter().collect();
        let mut counts = vec![vec![0u64; cols.len()]; rows.len()];
        for (r, c) in &pairs {
            let i = rows.binary_search(r).expect("row category collected above");
            let j = cols.binary_search(c).expect("column category collected above");
            counts[i][j] += 1;
        }
        Self::new(
            counts,
            rows.iter().map(ToString::to_string).collect(),
            cols.iter().map(ToString::to_string).collect(),
        )
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    pub fn row_totals(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_totals(&self) -> Vec<u64> {
        (0..self.counts[0].len()).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Result of a chi-square independence test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    /// `log10` of the p-value.
    pub log10_p: f64,
}

/// Pearson chi-square test of independence, without continuity correction.
pub fn chi_square(table: &ContingencyTable) -> Result<ChiSquare, StatsError> {
    chi_square_with(table, false)
}

/// Pearson chi-square test; `yates` applies the continuity correction to 2x2
/// tables and is ignored for larger ones.
pub fn chi_square_with(table: &ContingencyTable, yates: bool) -> Result<ChiSquare, StatsError> {
    let rows = table.row_totals();
    let cols = table.col_totals();
    if rows.iter().any(|&r| r == 0) {
        return Err(StatsError::ZeroMarginal("row"));
    }
    if cols.iter().any(|&c| c == 0) {
        return Err(StatsError::ZeroMarginal("column"));
    }
    let n = table.total() as f64;
    let correct = yates && rows.len() == 2 && cols.len() == 2;
    let mut statistic = 0.0;
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &obs) in row.iter().enumerate() {
            let expected = rows[i] as f64 * cols[j] as f64 / n;
            let mut diff = (obs as f64 - expected).abs();
            if correct {
                diff = (diff - 0.5).max(0.0);
            }
            statistic += diff * diff / expected;
        }
    }
    let dof = (rows.len() - 1) * (cols.len() - 1);
    Ok(ChiSquare { statistic, dof, log10_p: special::chi2_log10_sf(statistic, dof as f64) })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the `n - 1` denominator.
fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Sample Pearson correlation coefficient.
pub fn pearson_corr(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooFewObservations { needed: 2, got: x.len() });
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    /// Welch-Satterthwaite degrees of freedom.
    pub dof: f64,
    /// Two-sided p-value.
    pub p: f64,
}

/// Welch's unequal-variance t-test of `mean(a) == mean(b)`.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest, StatsError> {
    for xs in [a, b] {
        if xs.len() < 2 {
            return Err(StatsError::TooFewObservations { needed: 2, got: xs.len() });
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (variance(a) / na, variance(b) / nb);
    if sa + sb == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let t = (mean(a) - mean(b)) / (sa + sb).sqrt();
    let dof = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, dof).map_err(|_| StatsError::ZeroVariance)?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(WelchTest { t, dof, p })
}

/// A labelled chi-square result, as listed in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedChiSquare {
    pub rows: String,
    pub cols: String,
    pub n: u64,
    pub test: ChiSquare,
}

fn named<R, C>(rows: &str, cols: &str, pairs: impl IntoIterator<Item = (R, C)>) -> Option<NamedChiSquare>
where
    R: Ord + Clone + fmt::Display,
    C: Ord + Clone + fmt::Display,
{
    let table = ContingencyTable::from_observations(pairs).ok()?;
    let test = chi_square(&table).ok()?;
    Some(NamedChiSquare { rows: rows.into(), cols: cols.into(), n: table.total(), test })
}

/// Pairwise chi-square tests on binarized ratings: each feature against QoE,
/// the features against each other, and each feature pair against QoE.
/// Tests whose table degenerates (a single category) are omitted.
pub fn binary_chi_square_suite(samples: &[BinaryFeatures]) -> Vec<NamedChiSquare> {
    type Get = fn(&BinaryFeatures) -> Level;
    let features: [(&str, Get); 3] = [("QoS", |b| b.qos), ("Int", |b| b.interest), ("QoR", |b| b.qor)];
    let mut out = Vec::new();
    for (name, get) in features {
        out.extend(named(name, "QoE", samples.iter().map(|b| (get(b), b.qoe))));
    }
    let pairs = [(0, 1), (0, 2), (2, 1)];
    for (i, j) in pairs {
        let (ni, gi) = features[i];
        let (nj, gj) = features[j];
        out.extend(named(ni, nj, samples.iter().map(|b| (gi(b), gj(b)))));
    }
    for (i, j) in pairs {
        let (ni, gi) = features[i];
        let (nj, gj) = features[j];
        let label = format!("({ni},{nj})");
        out.extend(named(&label, "QoE", samples.iter().map(|b| (format!("{}/{}", gi(b), gj(b)), b.qoe))));
    }
    out
}

/// Chi-square tests of QoE against each raw 1..=5 rating.
pub fn rating_chi_square_suite(samples: &[Sample]) -> Vec<NamedChiSquare> {
    type Get = fn(&Sample) -> Rating;
    let features: [(&str, Get); 3] = [("QoS", |s| s.qos), ("QoR", |s| s.qor), ("Int", |s| s.interest)];
    features
        .into_iter()
        .filter_map(|(name, get)| named(name, "QoE", samples.iter().map(|s| (get(s), s.qoe))))
        .collect()
}
