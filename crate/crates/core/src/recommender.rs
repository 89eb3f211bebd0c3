//! Recommendation lists for a watched video: vanilla (top related items) or
//! QoS-nudged, where cached items found by a depth-2 breadth-first search over
//! the related lists are promoted into the list.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{CacheSet, RelatedGraph, VideoId};

/// Length of the recommendation list shown to users.
pub const LIST_LEN: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecommendError {
    #[error("watched video {0} is not in the related graph")]
    UnknownVideo(VideoId),
    #[error("recommendation list has duplicate id {0}")]
    DuplicateItem(VideoId),
    #[error("recommendation list has {len} items, more than the {requested} requested")]
    TooLong { len: usize, requested: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecItem {
    /// 1-based slot in the list.
    pub position: u8,
    pub id: VideoId,
    pub high_qos: bool,
}

/// An ordered recommendation list. Positions are contiguous from 1 and ids are
/// unique.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecommendationList {
    items: Vec<RecItem>,
    requested: usize,
}

impl RecommendationList {
    /// Builds a list from `(id, high_qos)` pairs in display order.
    pub fn from_entries(
        entries: impl IntoIterator<Item = (VideoId, bool)>,
        requested: usize,
    ) -> Result<Self, RecommendError> {
        let mut seen = HashSet::new();
        let mut items = Vec::new();
        for (i, (id, high_qos)) in entries.into_iter().enumerate() {
            if !seen.insert(id) {
                return Err(RecommendError::DuplicateItem(id));
            }
            items.push(RecItem { position: (i + 1) as u8, id, high_qos });
        }
        if items.len() > requested {
            return Err(RecommendError::TooLong { len: items.len(), requested });
        }
        Ok(Self { items, requested })
    }

    fn flagged(ids: Vec<VideoId>, cache: &CacheSet, requested: usize) -> Self {
        let items = ids
            .into_iter()
            .enumerate()
            .map(|(i, id)| RecItem { position: (i + 1) as u8, id, high_qos: cache.contains(id) })
            .collect();
        Self { items, requested }
    }

    pub fn items(&self) -> &[RecItem] {
        &self.items
    }

    pub fn ids(&self) -> impl Iterator<Item = VideoId> + '_ {
        self.items.iter().map(|it| it.id)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn requested(&self) -> usize {
        self.requested
    }

    /// True when the graph ran out of candidates before `requested` items.
    pub fn is_exhausted(&self) -> bool {
        self.items.len() < self.requested
    }

    pub fn high_qos_count(&self) -> usize {
        self.items.iter().filter(|it| it.high_qos).count()
    }

    /// Share of high-QoS items in this list (0 for an empty list).
    pub fn recommendation_ratio(&self) -> f64 {
        if self.items.is_empty() {
            0.0
        } else {
            self.high_qos_count() as f64 / self.items.len() as f64
        }
    }

    /// Item at a 1-based position.
    pub fn at(&self, position: usize) -> Option<&RecItem> {
        position.checked_sub(1).and_then(|i| self.items.get(i))
    }

    pub fn contains(&self, id: VideoId) -> bool {
        self.items.iter().any(|it| it.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecommenderKind {
    Vanilla,
    #[default]
    Nudge,
}

/// Where nudged items land when fewer than `n` cached items are found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Cached items take positions 1..k, followed by the vanilla fill.
    #[default]
    Top,
    /// Cached items already in the vanilla list keep their slot; other cached
    /// items take the slots of the lowest-ranked vanilla items they displace.
    OriginalRanks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NudgeOptions {
    pub placement: Placement,
    /// Also exclude everything watched earlier in the session.
    pub exclude_history: bool,
}

/// First `n` related items of `watched`, in rank order.
pub fn vanilla_recommend(
    graph: &RelatedGraph,
    cache: &CacheSet,
    watched: VideoId,
    n: usize,
) -> Result<RecommendationList, RecommendError> {
    let excluded = HashSet::new();
    let ids = vanilla_ids(graph, watched, &excluded, n)?;
    Ok(RecommendationList::flagged(ids, cache, n))
}

/// QoS-nudged list with default options (top placement, only the watched
/// video excluded).
pub fn nudge_recommend(
    graph: &RelatedGraph,
    cache: &CacheSet,
    watched: VideoId,
    n: usize,
) -> Result<RecommendationList, RecommendError> {
    nudge_with(graph, cache, watched, &HashSet::new(), n, Placement::Top)
}

fn vanilla_ids(
    graph: &RelatedGraph,
    watched: VideoId,
    excluded: &HashSet<VideoId>,
    n: usize,
) -> Result<Vec<VideoId>, RecommendError> {
    let related = graph.related(watched).ok_or(RecommendError::UnknownVideo(watched))?;
    Ok(related
        .iter()
        .copied()
        .filter(|id| *id != watched && !excluded.contains(id))
        .take(n)
        .collect())
}

/// Cached items reachable within two hops, in BFS encounter order: depth 1 in
/// rank order, then the related lists of depth-1 items, each in rank order.
/// Stops after `limit` items.
fn bfs_cached(
    graph: &RelatedGraph,
    cache: &CacheSet,
    watched: VideoId,
    excluded: &HashSet<VideoId>,
    limit: usize,
) -> Result<Vec<VideoId>, RecommendError> {
    let depth1 = graph.related(watched).ok_or(RecommendError::UnknownVideo(watched))?;
    let mut found = Vec::new();
    if limit == 0 || cache.is_empty() {
        return Ok(found);
    }
    let mut seen: HashSet<VideoId> = HashSet::with_capacity(depth1.len() * (depth1.len() + 1));
    seen.insert(watched);
    let mut visit = |id: VideoId, found: &mut Vec<VideoId>| {
        if seen.insert(id) && cache.contains(id) && !excluded.contains(&id) {
            found.push(id);
        }
        found.len() >= limit
    };
    for &v in depth1 {
        if visit(v, &mut found) {
            return Ok(found);
        }
    }
    for &v in depth1 {
        for &u in graph.related(v).unwrap_or(&[]) {
            if visit(u, &mut found) {
                return Ok(found);
            }
        }
    }
    Ok(found)
}

fn nudge_with(
    graph: &RelatedGraph,
    cache: &CacheSet,
    watched: VideoId,
    excluded: &HashSet<VideoId>,
    n: usize,
    placement: Placement,
) -> Result<RecommendationList, RecommendError> {
    let found = bfs_cached(graph, cache, watched, excluded, n)?;
    let base = vanilla_ids(graph, watched, excluded, n)?;
    let found_set: HashSet<VideoId> = found.iter().copied().collect();
    let fill: Vec<VideoId> = base.iter().copied().filter(|id| !found_set.contains(id)).collect();
    let total = n.min(found.len() + fill.len());
    let kept_fill = total - found.len();

    let ids = match placement {
        Placement::Top => found.iter().chain(fill.iter().take(kept_fill)).copied().collect(),
        Placement::OriginalRanks => {
            let kept: HashSet<VideoId> = fill.iter().take(kept_fill).copied().collect();
            let base_set: HashSet<VideoId> = base.iter().copied().collect();
            let mut newcomers = found.iter().copied().filter(|id| !base_set.contains(id));
            let mut slots: Vec<VideoId> = Vec::with_capacity(total);
            for &id in &base {
                if found_set.contains(&id) || kept.contains(&id) {
                    slots.push(id);
                } else if let Some(nc) = newcomers.next() {
                    slots.push(nc);
                }
            }
            slots.extend(newcomers);
            slots
        }
    };
    Ok(RecommendationList::flagged(ids, cache, n))
}

/// A configured recommender.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Recommender {
    pub kind: RecommenderKind,
    pub nudge: NudgeOptions,
}

impl Recommender {
    pub fn vanilla() -> Self {
        Self { kind: RecommenderKind::Vanilla, nudge: NudgeOptions::default() }
    }

    pub fn nudge() -> Self {
        Self { kind: RecommenderKind::Nudge, nudge: NudgeOptions::default() }
    }

    /// Builds the list for `watched`. `history` holds earlier videos of the
    /// session; it is only consulted when history exclusion is enabled.
    pub fn recommend(
        &self,
        graph: &RelatedGraph,
        cache: &CacheSet,
        watched: VideoId,
        history: &[VideoId],
        n: usize,
    ) -> Result<RecommendationList, RecommendError> {
        let excluded: HashSet<VideoId> = if self.nudge.exclude_history {
            history.iter().copied().collect()
        } else {
            HashSet::new()
        };
        match self.kind {
            RecommenderKind::Vanilla => {
                let ids = vanilla_ids(graph, watched, &excluded, n)?;
                Ok(RecommendationList::flagged(ids, cache, n))
            }
            RecommenderKind::Nudge => nudge_with(graph, cache, watched, &excluded, n, self.nudge.placement),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;

    fn id(v: u32) -> VideoId {
        VideoId(v)
    }

    fn graph(edges: &[(u32, &[u32])]) -> RelatedGraph {
        let mut adj: BTreeMap<VideoId, Vec<VideoId>> = BTreeMap::new();
        for (s, list) in edges {
            adj.insert(id(*s), list.iter().map(|&d| id(d)).collect());
            for &d in *list {
                adj.entry(id(d)).or_default();
            }
        }
        RelatedGraph::new(adj).unwrap()
    }

    fn ids(list: &RecommendationList) -> Vec<u32> {
        list.ids().map(|v| v.0).collect()
    }

    #[test]
    fn vanilla_is_prefix() {
        let g = graph(&[(0, &[1, 2, 3, 4, 5, 6])]);
        let list = vanilla_recommend(&g, &CacheSet::empty(), id(0), 5).unwrap();
        assert_eq!(ids(&list), vec![1, 2, 3, 4, 5]);
        assert!(!list.is_exhausted());
        assert_eq!(list.items()[4].position, 5);
    }

    #[test]
    fn vanilla_exhaustion_is_flagged() {
        let g = graph(&[(0, &[1, 2])]);
        let list = vanilla_recommend(&g, &CacheSet::empty(), id(0), 5).unwrap();
        assert_eq!(ids(&list), vec![1, 2]);
        assert!(list.is_exhausted());
    }

    #[test]
    fn unknown_watched_is_an_error() {
        let g = graph(&[(0, &[1])]);
        assert_eq!(
            vanilla_recommend(&g, &CacheSet::empty(), id(42), 5).unwrap_err(),
            RecommendError::UnknownVideo(id(42))
        );
        assert!(nudge_recommend(&g, &CacheSet::empty(), id(42), 5).is_err());
    }

    #[test]
    fn five_cached_at_depth_one_fill_the_list() {
        let g = graph(&[(0, &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10])]);
        let cache = CacheSet::from_members([3, 5, 7, 8, 9, 10].map(id));
        let list = nudge_recommend(&g, &cache, id(0), 5).unwrap();
        assert_eq!(ids(&list), vec![3, 5, 7, 8, 9]);
        assert_eq!(list.high_qos_count(), 5);
    }

    #[test]
    fn few_cached_go_on_top_then_vanilla_fill() {
        // x = 20 at depth 2 via 1, y = 30 at depth 2 via 3
        let g = graph(&[(0, &[1, 2, 3, 4, 5, 6]), (1, &[20, 0]), (3, &[30, 20])]);
        let cache = CacheSet::from_members([20, 30].map(id));
        let list = nudge_recommend(&g, &cache, id(0), 5).unwrap();
        assert_eq!(ids(&list), vec![20, 30, 1, 2, 3]);
        let flags: Vec<bool> = list.items().iter().map(|it| it.high_qos).collect();
        assert_eq!(flags, vec![true, true, false, false, false]);
    }

    #[test]
    fn cached_item_inside_vanilla_is_not_repeated() {
        let g = graph(&[(0, &[1, 2, 3, 4, 5, 6]), (1, &[20])]);
        let cache = CacheSet::from_members([4, 20].map(id));
        let list = nudge_recommend(&g, &cache, id(0), 5).unwrap();
        assert_eq!(ids(&list), vec![4, 20, 1, 2, 3]);
    }

    #[test]
    fn original_ranks_placement() {
        let g = graph(&[(0, &[1, 2, 3, 4, 5, 6]), (1, &[20])]);
        let cache = CacheSet::from_members([4, 20].map(id));
        let rec = Recommender {
            kind: RecommenderKind::Nudge,
            nudge: NudgeOptions { placement: Placement::OriginalRanks, exclude_history: false },
        };
        let list = rec.recommend(&g, &cache, id(0), &[], 5).unwrap();
        // 4 keeps slot 4; 20 displaces the lowest-ranked vanilla item (5)
        assert_eq!(ids(&list), vec![1, 2, 3, 4, 20]);
    }

    #[test]
    fn history_exclusion_is_opt_in() {
        let g = graph(&[(0, &[1, 2, 3, 4, 5, 6])]);
        let cache = CacheSet::empty();
        let plain = Recommender::nudge().recommend(&g, &cache, id(0), &[id(2)], 5).unwrap();
        assert_eq!(ids(&plain), vec![1, 2, 3, 4, 5]);
        let rec = Recommender {
            kind: RecommenderKind::Nudge,
            nudge: NudgeOptions { exclude_history: true, ..Default::default() },
        };
        let list = rec.recommend(&g, &cache, id(0), &[id(2)], 5).unwrap();
        assert_eq!(ids(&list), vec![1, 3, 4, 5, 6]);
    }

    #[test]
    fn empty_cache_matches_vanilla() {
        let g = graph(&[(0, &[1, 2, 3, 4, 5, 6]), (1, &[7, 8])]);
        let cache = CacheSet::empty();
        assert_eq!(
            nudge_recommend(&g, &cache, id(0), 5).unwrap(),
            vanilla_recommend(&g, &cache, id(0), 5).unwrap()
        );
    }

    #[test]
    fn list_validation() {
        assert!(matches!(
            RecommendationList::from_entries([(id(1), false), (id(1), true)], 5),
            Err(RecommendError::DuplicateItem(_))
        ));
        let entries: Vec<(VideoId, bool)> = (0..6).map(|v| (id(v), false)).collect();
        assert!(matches!(RecommendationList::from_entries(entries, 5), Err(RecommendError::TooLong { .. })));
        let list = RecommendationList::from_entries([(id(1), true), (id(2), false)], 5).unwrap();
        assert_eq!(list.at(1).unwrap().id, id(1));
        assert!(list.at(0).is_none());
        assert!((list.recommendation_ratio() - 0.5).abs() < 1e-12);
    }
}
