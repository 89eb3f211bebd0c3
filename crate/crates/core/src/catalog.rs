//! Synthetic content catalogs, the related-items graph, and construction of
//! the high-QoS (cached) set.
//!
//! The cache policy reserves the first [`TRENDING_RESERVE`] trending videos and
//! fills the remaining capacity with the most viewed items found in the
//! related lists of those trending videos.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::rng_from_seed;

/// Longest related list a video may carry.
pub const MAX_RELATED: usize = 50;
/// Number of trending videos always placed in the cache.
pub const TRENDING_RESERVE: usize = 50;
pub const DEFAULT_CACHE_CAPACITY: usize = 500;

/// View count of the most popular synthetic video.
const PEAK_VIEWS: f64 = 50_000_000.0;
/// Related items are drawn with weight `views^RELATED_POPULARITY_BIAS`.
const RELATED_POPULARITY_BIAS: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("invalid catalog config: {0}")]
    InvalidConfig(String),
    #[error("video {0} lists itself as related")]
    SelfLoop(VideoId),
    #[error("video {src} lists unknown related video {dst}")]
    DanglingEdge { src: VideoId, dst: VideoId },
    #[error("video {src} lists related video {dst} more than once")]
    DuplicateEdge { src: VideoId, dst: VideoId },
    #[error("video {id} has {len} related items (max {MAX_RELATED})")]
    TooManyRelated { id: VideoId, len: usize },
    #[error("unknown video {0}")]
    UnknownVideo(VideoId),
    #[error("cache capacity must be positive")]
    ZeroCapacity,
}

/// Opaque video identifier.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct VideoId(pub u32);

impl fmt::Display for VideoId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::str::FromStr for VideoId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim().parse().map(VideoId)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub id: VideoId,
    pub view_count: u64,
    pub is_trending: bool,
}

/// Ordered related-items lists. Position 0 of a list is the most related item.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RelatedGraph {
    adjacency: BTreeMap<VideoId, Vec<VideoId>>,
}

impl RelatedGraph {
    /// Validates and wraps an adjacency map. Every video must appear as a key,
    /// even if its list is empty.
    pub fn new(adjacency: BTreeMap<VideoId, Vec<VideoId>>) -> Result<Self, CatalogError> {
        for (&src, list) in &adjacency {
            if list.len() > MAX_RELATED {
                return Err(CatalogError::TooManyRelated { id: src, len: list.len() });
            }
            let mut seen = BTreeSet::new();
            for &dst in list {
                if dst == src {
                    return Err(CatalogError::SelfLoop(src));
                }
                if !adjacency.contains_key(&dst) {
                    return Err(CatalogError::DanglingEdge { src, dst });
                }
                if !seen.insert(dst) {
                    return Err(CatalogError::DuplicateEdge { src, dst });
                }
            }
        }
        Ok(Self { adjacency })
    }

    pub fn related(&self, id: VideoId) -> Option<&[VideoId]> {
        self.adjacency.get(&id).map(Vec::as_slice)
    }

    pub fn contains(&self, id: VideoId) -> bool {
        self.adjacency.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = VideoId> + '_ {
        self.adjacency.keys().copied()
    }

    /// Edges as `(src, rank, dst)` with 1-based rank, sorted by `(src, rank)`.
    pub fn edges(&self) -> impl Iterator<Item = (VideoId, usize, VideoId)> + '_ {
        self.adjacency
            .iter()
            .flat_map(|(&src, list)| list.iter().enumerate().map(move |(i, &dst)| (src, i + 1, dst)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CatalogConfig {
    pub n_videos: usize,
    pub n_trending: usize,
    pub related_out_degree: usize,
    /// Zipf exponent of the view-count distribution.
    pub popularity_skew: f64,
    pub seed: u64,
}

impl Default for CatalogConfig {
    fn default() -> Self {
        Self {
            n_videos: 5000,
            n_trending: 50,
            related_out_degree: 50,
            popularity_skew: 1.0,
            seed: 0,
        }
    }
}

impl CatalogConfig {
    pub fn validate(&self) -> Result<(), CatalogError> {
        let bad = |msg: String| Err(CatalogError::InvalidConfig(msg));
        if self.n_videos == 0 || self.n_trending == 0 || self.related_out_degree == 0 {
            return bad("n_videos, n_trending and related_out_degree must be positive".into());
        }
        if self.related_out_degree > MAX_RELATED {
            return bad(format!("related_out_degree {} exceeds {MAX_RELATED}", self.related_out_degree));
        }
        if !(self.popularity_skew.is_finite() && self.popularity_skew > 0.0) {
            return bad(format!("popularity_skew must be positive, got {}", self.popularity_skew));
        }
        if self.n_videos < self.n_trending + self.related_out_degree {
            return bad(format!(
                "n_videos ({}) must be at least n_trending + related_out_degree ({})",
                self.n_videos,
                self.n_trending + self.related_out_degree
            ));
        }
        Ok(())
    }
}

/// A generated content universe.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    pub videos: Vec<VideoMeta>,
    pub graph: RelatedGraph,
    /// Trending ids, most viewed first.
    pub trending: Vec<VideoId>,
}

/// Generates a synthetic catalog. Deterministic in `config.seed`.
///
/// View counts follow `PEAK_VIEWS * rank^-skew` over a random popularity
/// ranking. Trending videos are sampled without replacement with probability
/// proportional to views; related lists are sampled without replacement with
/// weight `sqrt(views)`, so popular items are over-represented and tend to sit
/// near the top of each list.
pub fn generate_catalog(config: &CatalogConfig) -> Result<Catalog, CatalogError> {
    config.validate()?;
    let n = config.n_videos;
    let mut rng = rng_from_seed(config.seed);

    let mut ranks: Vec<usize> = (1..=n).collect();
    ranks.shuffle(&mut rng);
    let views: Vec<u64> = ranks
        .iter()
        .map(|&r| (PEAK_VIEWS * (r as f64).powf(-config.popularity_skew)).round() as u64)
        .collect();

    // Efraimidis-Spirakis keys: ln(u) / w, largest keys win.
    let mut keyed: Vec<(f64, usize)> = views
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let key = if v == 0 { f64::NEG_INFINITY } else { u.ln() / v as f64 };
            (key, i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut trending_idx: Vec<usize> = keyed.iter().take(config.n_trending).map(|&(_, i)| i).collect();
    trending_idx.sort_by_key(|&i| (Reverse(views[i]), i));
    let trending_set: BTreeSet<usize> = trending_idx.iter().copied().collect();

    let weights: Vec<f64> = views
        .iter()
        .map(|&v| (v as f64).powf(RELATED_POPULARITY_BIAS) + 1.0)
        .collect();
    let sampler = WeightedIndex::new(&weights).expect("weights are positive and finite");
    let degree = config.related_out_degree;
    let max_draws = 200 * degree;

    let mut adjacency = BTreeMap::new();
    for src in 0..n {
        let mut chosen = Vec::with_capacity(degree);
        let mut seen = BTreeSet::new();
        seen.insert(src);
        let mut draws = 0;
        while chosen.len() < degree && draws < max_draws {
            let dst = sampler.sample(&mut rng);
            draws += 1;
            if seen.insert(dst) {
                chosen.push(dst);
            }
        }
        if chosen.len() < degree {
            // extreme skew: top up uniformly from the unchosen remainder
            let mut rest: Vec<usize> = (0..n).filter(|i| !seen.contains(i)).collect();
            rest.shuffle(&mut rng);
            chosen.extend(rest.into_iter().take(degree - chosen.len()));
        }
        adjacency.insert(
            VideoId(src as u32),
            chosen.into_iter().map(|i| VideoId(i as u32)).collect(),
        );
    }

    let videos = views
        .iter()
        .enumerate()
        .map(|(i, &view_count)| VideoMeta {
            id: VideoId(i as u32),
            view_count,
            is_trending: trending_set.contains(&i),
        })
        .collect();

    Ok(Catalog {
        videos,
        graph: RelatedGraph::new(adjacency)?,
        trending: trending_idx.into_iter().map(|i| VideoId(i as u32)).collect(),
    })
}

/// The set of videos deliverable in high QoS.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CacheSet {
    members: BTreeSet<VideoId>,
    capacity: usize,
    /// Set when the candidate pool could not fill the capacity.
    under_capacity: bool,
}

impl CacheSet {
    /// A cache holding exactly `members`; capacity equals its size.
    pub fn from_members(members: impl IntoIterator<Item = VideoId>) -> Self {
        let members: BTreeSet<VideoId> = members.into_iter().collect();
        let capacity = members.len().max(1);
        Self { members, capacity, under_capacity: false }
    }

    pub fn empty() -> Self {
        Self::from_members(std::iter::empty())
    }

    pub fn contains(&self, id: VideoId) -> bool {
        self.members.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn under_capacity(&self) -> bool {
        self.under_capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = VideoId> + '_ {
        self.members.iter().copied()
    }
}

/// Builds the high-QoS set: the first [`TRENDING_RESERVE`] trending ids, then
/// the most viewed of their depth-1 related items (deduplicated, ties broken by
/// ascending id) until `capacity` is reached.
pub fn build_cache_set(
    videos: &[VideoMeta],
    graph: &RelatedGraph,
    trending: &[VideoId],
    capacity: usize,
) -> Result<CacheSet, CatalogError> {
    if capacity == 0 {
        return Err(CatalogError::ZeroCapacity);
    }
    let views: HashMap<VideoId, u64> = videos.iter().map(|v| (v.id, v.view_count)).collect();
    let view_of = |id: VideoId| views.get(&id).copied().ok_or(CatalogError::UnknownVideo(id));

    let reserve: Vec<VideoId> = trending.iter().copied().take(TRENDING_RESERVE.min(capacity)).collect();
    let mut members = BTreeSet::new();
    for &t in &reserve {
        view_of(t)?;
        members.insert(t);
    }

    let mut pool = BTreeSet::new();
    for &t in &reserve {
        let related = graph.related(t).ok_or(CatalogError::UnknownVideo(t))?;
        pool.extend(related.iter().copied().filter(|id| !members.contains(id)));
    }
    let mut ranked = pool
        .into_iter()
        .map(|id| view_of(id).map(|v| (Reverse(v), id)))
        .collect::<Result<Vec<_>, _>>()?;
    ranked.sort_unstable();

    let room = capacity - members.len();
    members.extend(ranked.into_iter().take(room).map(|(_, id)| id));
    let under_capacity = members.len() < capacity;
    if under_capacity {
        log::warn!("cache candidate pool exhausted: {} of {} slots filled", members.len(), capacity);
    }
    Ok(CacheSet { members, capacity, under_capacity })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(id: u32, views: u64) -> VideoMeta {
        VideoMeta { id: VideoId(id), view_count: views, is_trending: false }
    }

    fn graph(edges: &[(u32, &[u32])]) -> RelatedGraph {
        RelatedGraph::new(
            edges
                .iter()
                .map(|(s, l)| (VideoId(*s), l.iter().map(|&d| VideoId(d)).collect()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn graph_rejects_self_loops_and_dangling() {
        let mut adj = BTreeMap::new();
        adj.insert(VideoId(0), vec![VideoId(0)]);
        assert_eq!(RelatedGraph::new(adj).unwrap_err(), CatalogError::SelfLoop(VideoId(0)));

        let mut adj = BTreeMap::new();
        adj.insert(VideoId(0), vec![VideoId(9)]);
        assert!(matches!(RelatedGraph::new(adj), Err(CatalogError::DanglingEdge { .. })));
    }

    #[test]
    fn config_rejects_small_catalog() {
        let cfg = CatalogConfig { n_videos: 99, n_trending: 50, related_out_degree: 50, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(CatalogError::InvalidConfig(_))));
        let cfg = CatalogConfig { n_videos: 100, ..cfg };
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = CatalogConfig { n_videos: 1000, seed: 7, ..Default::default() };
        assert_eq!(generate_catalog(&cfg).unwrap(), generate_catalog(&cfg).unwrap());
        let other = CatalogConfig { seed: 8, ..cfg };
        assert_ne!(generate_catalog(&cfg).unwrap(), generate_catalog(&other).unwrap());
    }

    #[test]
    fn trending_flags_match_list() {
        let cfg = CatalogConfig { n_videos: 1000, n_trending: 50, seed: 3, ..Default::default() };
        let cat = generate_catalog(&cfg).unwrap();
        assert_eq!(cat.videos.iter().filter(|v| v.is_trending).count(), 50);
        assert_eq!(cat.trending.len(), 50);
        for id in &cat.trending {
            assert!(cat.videos[id.0 as usize].is_trending);
        }
    }

    #[test]
    fn related_lists_are_valid() {
        let cfg = CatalogConfig { n_videos: 300, related_out_degree: 20, n_trending: 10, seed: 1, ..Default::default() };
        let cat = generate_catalog(&cfg).unwrap();
        for id in cat.graph.ids() {
            let list = cat.graph.related(id).unwrap();
            assert_eq!(list.len(), 20);
            assert!(!list.contains(&id));
        }
    }

    #[test]
    fn extreme_skew_still_fills_lists() {
        let cfg = CatalogConfig {
            n_videos: 120,
            n_trending: 10,
            related_out_degree: 50,
            popularity_skew: 6.0,
            seed: 2,
        };
        let cat = generate_catalog(&cfg).unwrap();
        assert!(cat.graph.ids().all(|id| cat.graph.related(id).unwrap().len() == 50));
    }

    #[test]
    fn popularity_is_heavy_tailed() {
        let cfg = CatalogConfig { n_videos: 10_000, popularity_skew: 1.0, seed: 11, ..Default::default() };
        let cat = generate_catalog(&cfg).unwrap();
        let mut views: Vec<u64> = cat.videos.iter().map(|v| v.view_count).collect();
        views.sort_unstable_by(|a, b| b.cmp(a));
        let total: u64 = views.iter().sum();
        let top: u64 = views[..100].iter().sum();
        let bottom: u64 = views[views.len() - 100..].iter().sum();
        let (top_share, bottom_share) = (top as f64 / total as f64, bottom as f64 / total as f64);
        assert!(top_share > bottom_share);
        // rank^-1 over 10k items: the top 1% holds roughly half of all views
        assert!(top_share > 0.4, "top share {top_share}");
    }

    #[test]
    fn cache_fills_to_capacity_from_large_pool() {
        // 50 trending ids, each with 50 distinct related items: 2500 candidates.
        let mut videos = Vec::new();
        let mut adj = BTreeMap::new();
        let trending: Vec<VideoId> = (0..50).map(VideoId).collect();
        for t in 0..50u32 {
            videos.push(meta(t, 1_000_000));
            let list: Vec<VideoId> = (0..50).map(|j| VideoId(1000 + t * 50 + j)).collect();
            adj.insert(VideoId(t), list);
        }
        for c in 1000..3500u32 {
            videos.push(meta(c, u64::from(c)));
            adj.insert(VideoId(c), Vec::new());
        }
        let g = RelatedGraph::new(adj).unwrap();
        let cache = build_cache_set(&videos, &g, &trending, 500).unwrap();
        assert_eq!(cache.len(), 500);
        assert!(!cache.under_capacity());
        assert!(trending.iter().all(|&t| cache.contains(t)));
        // the 450 most viewed candidates are ids 3050..3500
        assert!(cache.contains(VideoId(3050)) && !cache.contains(VideoId(3049)));
    }

    #[test]
    fn cache_pool_exhaustion_is_flagged() {
        let videos = vec![meta(0, 10), meta(1, 5), meta(2, 6), meta(3, 7), meta(4, 100)];
        let g = graph(&[(0, &[1, 2, 3]), (1, &[]), (2, &[]), (3, &[]), (4, &[])]);
        let cache = build_cache_set(&videos, &g, &[VideoId(0)], 500).unwrap();
        assert_eq!(cache.iter().collect::<Vec<_>>(), vec![VideoId(0), VideoId(1), VideoId(2), VideoId(3)]);
        assert!(cache.under_capacity());
    }

    #[test]
    fn cache_ties_break_by_ascending_id() {
        let videos = vec![meta(0, 1), meta(5, 9), meta(3, 9)];
        let g = graph(&[(0, &[5, 3]), (5, &[]), (3, &[])]);
        let cache = build_cache_set(&videos, &g, &[VideoId(0)], 2).unwrap();
        assert!(cache.contains(VideoId(3)));
        assert!(!cache.contains(VideoId(5)));
    }

    #[test]
    fn cache_members_are_trending_or_adjacent() {
        let cfg = CatalogConfig { n_videos: 2000, seed: 5, ..Default::default() };
        let cat = generate_catalog(&cfg).unwrap();
        let cache = build_cache_set(&cat.videos, &cat.graph, &cat.trending, 500).unwrap();
        let cache2 = build_cache_set(&cat.videos, &cat.graph, &cat.trending, 500).unwrap();
        assert_eq!(cache, cache2);
        let mut allowed: BTreeSet<VideoId> = cat.trending.iter().copied().collect();
        for t in &cat.trending {
            allowed.extend(cat.graph.related(*t).unwrap());
        }
        assert!(cache.iter().all(|id| allowed.contains(&id)));
        assert!(cache.len() <= 500);
    }

    #[test]
    fn unknown_trending_is_an_error() {
        let videos = vec![meta(0, 1)];
        let g = graph(&[(0, &[])]);
        assert_eq!(
            build_cache_set(&videos, &g, &[VideoId(9)], 10).unwrap_err(),
            CatalogError::UnknownVideo(VideoId(9))
        );
    }
}
