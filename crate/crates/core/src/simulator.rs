//! User-session simulation.
//!
//! A session starts from a trending video, then repeats: build the
//! recommendation list, draw the four ratings, decide whether the user
//! abandons, otherwise click one of the recommendations under a position-bias
//! model. Sessions stop after [`MAX_STEPS`] videos, on abandonment, or when the
//! graph has nothing left to recommend.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{CacheSet, RelatedGraph, VideoId};
use crate::rating::{Rating, Sample};
use crate::recommender::{RecommendError, RecommendationList, Recommender, LIST_LEN};
use crate::seed::{child_seed, rng_from_seed, SimRng};

/// Maximum number of videos watched in one session.
pub const MAX_STEPS: usize = 5;
/// Number of trending videos offered at session start.
pub const TRENDING_CANDIDATES: usize = 20;
/// Zipf exponent for position bias over recommendation lists.
pub const DEFAULT_ZIPF_EXPONENT: f64 = 0.78;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("no trending videos to start a session from")]
    EmptyTrending,
    #[error("invalid simulation parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Recommend(#[from] RecommendError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClickKind {
    Uniform,
    #[default]
    Zipf,
}

/// Position-bias model over a recommendation list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClickModel {
    pub kind: ClickKind,
    /// Zipf exponent; ignored for uniform clicks.
    pub exponent: f64,
}

impl Default for ClickModel {
    fn default() -> Self {
        Self { kind: ClickKind::Zipf, exponent: DEFAULT_ZIPF_EXPONENT }
    }
}

impl ClickModel {
    pub fn uniform() -> Self {
        Self { kind: ClickKind::Uniform, exponent: DEFAULT_ZIPF_EXPONENT }
    }

    pub fn zipf(exponent: f64) -> Self {
        Self { kind: ClickKind::Zipf, exponent }
    }

    fn validate(&self) -> Result<(), SimError> {
        if !(self.exponent.is_finite() && self.exponent >= 0.0) {
            return Err(SimError::InvalidParameter(format!("click exponent {}", self.exponent)));
        }
        Ok(())
    }

    /// Draws a 1-based position from a list of `len >= 1` items.
    pub fn sample_position<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> usize {
        let probs = click_probabilities(self, len);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i + 1;
            }
        }
        len
    }
}

/// Click probability of each position `1..=list_len`.
///
/// Uniform gives `1/list_len`; Zipf gives `i^-a / sum_j j^-a`.
pub fn click_probabilities(model: &ClickModel, list_len: usize) -> Vec<f64> {
    if list_len == 0 {
        return Vec::new();
    }
    match model.kind {
        ClickKind::Uniform => vec![1.0 / list_len as f64; list_len],
        ClickKind::Zipf => {
            let raw: Vec<f64> = (1..=list_len).map(|i| (i as f64).powf(-model.exponent)).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|w| w / total).collect()
        }
    }
}

/// A probability mass function over the ratings 1..=5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RatingPmf([f64; 5]);

impl RatingPmf {
    pub fn new(p: [f64; 5]) -> Result<Self, SimError> {
        let total: f64 = p.iter().sum();
        if p.iter().any(|x| !x.is_finite() || *x < 0.0) || (total - 1.0).abs() > 1e-6 {
            return Err(SimError::InvalidParameter(format!("rating distribution {p:?} must be non-negative and sum to 1")));
        }
        Ok(Self(p.map(|x| x / total)))
    }

    /// All mass on one rating.
    pub fn point(rating: Rating) -> Self {
        let mut p = [0.0; 5];
        p[usize::from(rating.get()) - 1] = 1.0;
        Self(p)
    }

    pub fn probs(&self) -> &[f64; 5] {
        &self.0
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Rating {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, p) in self.0.iter().enumerate() {
            acc += p;
            if u < acc {
                return Rating::saturating(i as i64 + 1);
            }
        }
        // rounding slack: last rating with positive mass
        let last = self.0.iter().rposition(|p| *p > 0.0).unwrap_or(4);
        Rating::saturating(last as i64 + 1)
    }

    /// Exponentially tilts the pmf (`p_k * e^(lambda k)`) so its mean equals
    /// `target`, clamped to the open interval spanned by the support.
    pub fn tilted_to_mean(&self, target: f64) -> Self {
        let support: Vec<usize> = (0..5).filter(|&i| self.0[i] > 0.0).collect();
        let (lo, hi) = match (support.first(), support.last()) {
            (Some(&lo), Some(&hi)) if lo < hi => ((lo + 1) as f64, (hi + 1) as f64),
            _ => return *self,
        };
        let target = target.clamp(lo + 1e-9, hi - 1e-9);
        let tilt = |lambda: f64| {
            let w: Vec<f64> = (0..5).map(|i| self.0[i] * (lambda * (i as f64 - 2.0)).exp()).collect();
            let z: f64 = w.iter().sum();
            w.into_iter().map(|x| x / z).collect::<Vec<f64>>()
        };
        let mean_of = |p: &[f64]| p.iter().enumerate().map(|(i, x)| (i + 1) as f64 * x).sum::<f64>();
        let (mut a, mut b) = (-60.0_f64, 60.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mean_of(&tilt(mid)) < target {
                a = mid;
            } else {
                b = mid;
            }
        }
        let p = tilt(0.5 * (a + b));
        Self([p[0], p[1], p[2], p[3], p[4]])
    }
}

impl TryFrom<Vec<f64>> for RatingPmf {
    type Error = String;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        let arr: [f64; 5] = v.try_into().map_err(|v: Vec<f64>| format!("expected 5 probabilities, got {}", v.len()))?;
        RatingPmf::new(arr).map_err(|e| e.to_string())
    }
}

impl From<RatingPmf> for Vec<f64> {
    fn from(p: RatingPmf) -> Vec<f64> {
        p.0.to_vec()
    }
}

/// Weights of the ground-truth QoE latent score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QoeWeights {
    pub qos: f64,
    pub interest: f64,
    pub min_qos_interest: f64,
    pub qor: f64,
}

impl Default for QoeWeights {
    fn default() -> Self {
        Self { qos: 0.17, interest: 0.30, min_qos_interest: 0.53, qor: 0.0 }
    }
}

/// Proportional-odds generator of QoE labels.
///
/// `s = scale * (w . x)`; the label is `1 + #{k : s + eps > theta_k}` with
/// standard logistic `eps`, so `P(y <= k) = logistic(theta_k - s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QoeGenerator {
    pub weights: QoeWeights,
    pub scale: f64,
    pub thresholds: [f64; 4],
}

impl Default for QoeGenerator {
    fn default() -> Self {
        let scale = 3.0;
        Self {
            weights: QoeWeights::default(),
            scale,
            thresholds: [1.5, 2.5, 3.5, 4.5].map(|t| t * scale),
        }
    }
}

impl QoeGenerator {
    pub fn validate(&self) -> Result<(), SimError> {
        let t = &self.thresholds;
        if !(self.scale.is_finite() && self.scale > 0.0) || !t.windows(2).all(|w| w[0] < w[1]) {
            return Err(SimError::InvalidParameter(
                "QoE generator needs a positive scale and strictly increasing thresholds".into(),
            ));
        }
        Ok(())
    }

    pub fn latent(&self, qos: Rating, interest: Rating, qor: Rating) -> f64 {
        let w = &self.weights;
        let (q, i) = (qos.as_f64(), interest.as_f64());
        self.scale * (w.qos * q + w.interest * i + w.min_qos_interest * q.min(i) + w.qor * qor.as_f64())
    }

    pub fn sample<R: Rng + ?Sized>(&self, qos: Rating, interest: Rating, qor: Rating, rng: &mut R) -> Rating {
        let u: f64 = rng.gen_range(f64::EPSILON..1.0);
        let noise = (u / (1.0 - u)).ln();
        let s = self.latent(qos, interest, qor) + noise;
        Rating::saturating(1 + self.thresholds.iter().filter(|&&t| s > t).count() as i64)
    }

    /// Median of the label distribution, the MAE-optimal prediction.
    pub fn median(&self, qos: Rating, interest: Rating, qor: Rating) -> Rating {
        let s = self.latent(qos, interest, qor);
        Rating::saturating(1 + self.thresholds.iter().filter(|&&t| t < s).count() as i64)
    }
}

/// Distributions the simulated users draw their ratings from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatingModel {
    pub interest_low_qos: RatingPmf,
    pub interest_high_qos: RatingPmf,
    pub qos_low: RatingPmf,
    pub qos_high: RatingPmf,
    /// QoR distribution for a list with no high-QoS items.
    pub qor_base: RatingPmf,
    /// Change of the QoR mean when every recommended item is high-QoS; scaled
    /// linearly by the list's share of high-QoS items.
    pub qor_nudge_shift: f64,
    pub qoe: QoeGenerator,
}

impl Default for RatingModel {
    fn default() -> Self {
        let pmf = |p| RatingPmf::new(p).expect("default pmf is valid");
        Self {
            interest_low_qos: pmf([0.08, 0.16, 0.19, 0.30, 0.27]),
            interest_high_qos: pmf([0.13, 0.12, 0.18, 0.23, 0.34]),
            qos_low: pmf([0.42, 0.37, 0.15, 0.04, 0.02]),
            qos_high: pmf([0.02, 0.03, 0.07, 0.39, 0.49]),
            qor_base: pmf([0.07, 0.11, 0.23, 0.33, 0.26]),
            qor_nudge_shift: -0.2,
            qoe: QoeGenerator::default(),
        }
    }
}

impl RatingModel {
    pub fn sample<R: Rng + ?Sized>(&self, watched_high_qos: bool, recs: &RecommendationList, rng: &mut R) -> Sample {
        self.sample_with_ratio(watched_high_qos, recs.recommendation_ratio(), rng)
    }

    /// Ratings for a view whose recommendation list has the given share of
    /// high-QoS items.
    pub fn sample_with_ratio<R: Rng + ?Sized>(&self, watched_high_qos: bool, ratio: f64, rng: &mut R) -> Sample {
        let (interest_pmf, qos_pmf) = if watched_high_qos {
            (&self.interest_high_qos, &self.qos_high)
        } else {
            (&self.interest_low_qos, &self.qos_low)
        };
        let interest = interest_pmf.sample(rng);
        let qos = qos_pmf.sample(rng);
        let qor = if ratio == 0.0 || self.qor_nudge_shift == 0.0 {
            self.qor_base.sample(rng)
        } else {
            self.qor_base
                .tilted_to_mean(self.qor_base.mean() + self.qor_nudge_shift * ratio)
                .sample(rng)
        };
        let qoe = self.qoe.sample(qos, interest, qor, rng);
        Sample { interest, qos, qor, qoe }
    }
}

/// `n` independent rating samples outside any session: each view is high-QoS
/// with probability `high_qos_share` and its list has no high-QoS items.
pub fn synthetic_samples(model: &RatingModel, n: usize, high_qos_share: f64, seed: u64) -> Vec<Sample> {
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|_| {
            let high = rng.gen_bool(high_qos_share.clamp(0.0, 1.0));
            model.sample_with_ratio(high, 0.0, &mut rng)
        })
        .collect()
}

/// Logistic abandonment in the interest and QoS ratings of the current video.
///
/// `p = logistic(logit(base_rate) - s_int (Int - 3) - s_qos (QoS - 3))`; a base
/// rate of exactly 0 or 1 pins the probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbandonModel {
    pub base_rate: f64,
    pub interest_sensitivity: f64,
    pub qos_sensitivity: f64,
}

impl Default for AbandonModel {
    fn default() -> Self {
        Self { base_rate: 0.15, interest_sensitivity: 0.26, qos_sensitivity: 0.58 }
    }
}

impl AbandonModel {
    pub fn never() -> Self {
        Self { base_rate: 0.0, interest_sensitivity: 0.0, qos_sensitivity: 0.0 }
    }

    pub fn always() -> Self {
        Self { base_rate: 1.0, interest_sensitivity: 0.0, qos_sensitivity: 0.0 }
    }

    fn validate(&self) -> Result<(), SimError> {
        if !(0.0..=1.0).contains(&self.base_rate)
            || !self.interest_sensitivity.is_finite()
            || !self.qos_sensitivity.is_finite()
        {
            return Err(SimError::InvalidParameter("abandon base_rate must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn probability(&self, interest: Rating, qos: Rating) -> f64 {
        if self.base_rate <= 0.0 {
            return 0.0;
        }
        if self.base_rate >= 1.0 {
            return 1.0;
        }
        let logit = (self.base_rate / (1.0 - self.base_rate)).ln()
            - self.interest_sensitivity * (interest.as_f64() - 3.0)
            - self.qos_sensitivity * (qos.as_f64() - 3.0);
        1.0 / (1.0 + (-logit).exp())
    }
}

/// What the user did after rating a video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepAction {
    /// Clicked the recommendation at this 1-based position.
    Selected { position: u8 },
    Abandoned,
    /// Reached the step limit or ran out of recommendations.
    SessionEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStep {
    pub step_index: u8,
    pub watched: VideoId,
    pub watched_high_qos: bool,
    pub recs: RecommendationList,
    pub ratings: Sample,
    pub action: StepAction,
}

impl SessionStep {
    /// The clicked video, if any.
    pub fn selected_id(&self) -> Option<VideoId> {
        match self.action {
            StepAction::Selected { position } => self.recs.at(usize::from(position)).map(|it| it.id),
            _ => None,
        }
    }

    /// Whether the clicked video is high-QoS.
    pub fn selected_high_qos(&self) -> Option<bool> {
        match self.action {
            StepAction::Selected { position } => self.recs.at(usize::from(position)).map(|it| it.high_qos),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub region: String,
    pub steps: Vec<SessionStep>,
}

/// Everything a session needs apart from its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub recommender: Recommender,
    pub click: ClickModel,
    pub ratings: RatingModel,
    pub abandon: AbandonModel,
    pub region: String,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            recommender: Recommender::nudge(),
            click: ClickModel::default(),
            ratings: RatingModel::default(),
            abandon: AbandonModel::default(),
            region: "synthetic".into(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.click.validate()?;
        self.abandon.validate()?;
        self.ratings.qoe.validate()
    }
}

/// Read-only content state shared by all sessions.
#[derive(Debug, Clone, Copy)]
pub struct World<'a> {
    pub graph: &'a RelatedGraph,
    pub cache: &'a CacheSet,
    pub trending: &'a [VideoId],
}

/// Session id used by [`run_experiment`] for the `index`-th session.
pub fn session_label(index: usize) -> String {
    format!("s{index:06}")
}

/// Simulates one session. Fully determined by `seed`.
pub fn run_session(world: World<'_>, config: &SimConfig, session_id: &str, seed: u64) -> Result<Session, SimError> {
    config.validate()?;
    let mut rng = rng_from_seed(seed);
    simulate(world, config, session_id, &mut rng)
}

fn simulate(world: World<'_>, config: &SimConfig, session_id: &str, rng: &mut SimRng) -> Result<Session, SimError> {
    if world.trending.is_empty() {
        return Err(SimError::EmptyTrending);
    }
    let offered: Vec<VideoId> = world
        .trending
        .choose_multiple(rng, TRENDING_CANDIDATES.min(world.trending.len()))
        .copied()
        .collect();
    let mut watched = *offered.choose(rng).expect("offered list is non-empty");
    let mut history = Vec::with_capacity(MAX_STEPS);
    let mut steps = Vec::with_capacity(MAX_STEPS);

    for step in 1..=MAX_STEPS {
        history.push(watched);
        let recs = config.recommender.recommend(world.graph, world.cache, watched, &history, LIST_LEN)?;
        let watched_high_qos = world.cache.contains(watched);
        let ratings = config.ratings.sample(watched_high_qos, &recs, rng);
        let action = if step == MAX_STEPS || recs.is_empty() {
            StepAction::SessionEnd
        } else if rng.gen::<f64>() < config.abandon.probability(ratings.interest, ratings.qos) {
            StepAction::Abandoned
        } else {
            StepAction::Selected { position: config.click.sample_position(recs.len(), rng) as u8 }
        };
        let next = match action {
            StepAction::Selected { position } => recs.at(usize::from(position)).map(|it| it.id),
            _ => None,
        };
        steps.push(SessionStep { step_index: step as u8, watched, watched_high_qos, recs, ratings, action });
        match next {
            Some(id) => watched = id,
            None => break,
        }
    }

    Ok(Session { session_id: session_id.to_owned(), region: config.region.clone(), steps })
}

/// Runs `n_sessions` sessions. Session `i` uses `child_seed(master_seed, i)`;
/// the output is ordered by `i` whatever `jobs` is.
pub fn run_experiment(
    world: World<'_>,
    config: &SimConfig,
    n_sessions: usize,
    master_seed: u64,
    jobs: usize,
) -> Result<Vec<Session>, SimError> {
    if n_sessions == 0 {
        return Err(SimError::InvalidParameter("n_sessions must be at least 1".into()));
    }
    config.validate()?;
    let one = |i: usize| {
        let mut rng = rng_from_seed(child_seed(master_seed, i as u64));
        simulate(world, config, &session_label(i), &mut rng)
    };
    if jobs <= 1 {
        return (0..n_sessions).map(one).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| SimError::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| (0..n_sessions).into_par_iter().map(one).collect())
}
