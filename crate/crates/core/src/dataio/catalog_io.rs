use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{DataError, Provenance};
use crate::catalog::{CacheSet, Catalog, RelatedGraph, VideoId, VideoMeta};

pub const VIDEOS_FILE: &str = "videos.csv";
pub const EDGES_FILE: &str = "edges.csv";
pub const CACHE_FILE: &str = "cache.txt";

/// Writes `videos.csv` (id,view_count,is_trending), `edges.csv`
/// (src,rank,dst) and `cache.txt` (one id per line) into `dir`.
pub fn write_catalog(dir: &Path, catalog: &Catalog, cache: &CacheSet, provenance: &Provenance) -> Result<(), DataError> {
    fs::create_dir_all(dir)?;
    let header = provenance.header();

    let mut videos = format!("{header}id,view_count,is_trending\n");
    for v in &catalog.videos {
        videos.push_str(&format!("{},{},{}\n", v.id, v.view_count, u8::from(v.is_trending)));
    }
    fs::write(dir.join(VIDEOS_FILE), videos)?;

    let mut edges = format!("{header}src,rank,dst\n");
    for (src, rank, dst) in catalog.graph.edges() {
        edges.push_str(&format!("{src},{rank},{dst}\n"));
    }
    fs::write(dir.join(EDGES_FILE), edges)?;

    let mut ids = header;
    for id in cache.iter() {
        ids.push_str(&format!("{id}\n"));
    }
    fs::write(dir.join(CACHE_FILE), ids)?;
    Ok(())
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>, DataError> {
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T, DataError> {
    let line = rec.position().map_or(0, |p| p.line());
    let raw = rec.get(i).unwrap_or("");
    raw.trim()
        .parse()
        .map_err(|_| DataError::Row { line, message: format!("bad {name} `{raw}`") })
}

/// Reads a catalog written by [`write_catalog`]. Trending videos are ordered
/// by descending view count, then id.
pub fn read_catalog(dir: &Path) -> Result<(Catalog, CacheSet), DataError> {
    let mut videos = Vec::new();
    for rec in csv_reader(&dir.join(VIDEOS_FILE))?.records() {
        let rec = rec?;
        let trending: u8 = field(&rec, 2, "is_trending")?;
        videos.push(VideoMeta {
            id: field(&rec, 0, "id")?,
            view_count: field(&rec, 1, "view_count")?,
            is_trending: trending == 1,
        });
    }

    let mut ranked: BTreeMap<VideoId, Vec<(usize, VideoId)>> = videos.iter().map(|v| (v.id, Vec::new())).collect();
    for rec in csv_reader(&dir.join(EDGES_FILE))?.records() {
        let rec = rec?;
        let src: VideoId = field(&rec, 0, "src")?;
        let entry = ranked.entry(src).or_default();
        entry.push((field(&rec, 1, "rank")?, field(&rec, 2, "dst")?));
    }
    let adjacency = ranked
        .into_iter()
        .map(|(src, mut list)| {
            list.sort_unstable();
            (src, list.into_iter().map(|(_, dst)| dst).collect())
        })
        .collect();
    let graph = RelatedGraph::new(adjacency)?;

    let mut trending: Vec<&VideoMeta> = videos.iter().filter(|v| v.is_trending).collect();
    trending.sort_by(|a, b| b.view_count.cmp(&a.view_count).then(a.id.cmp(&b.id)));
    let trending = trending.into_iter().map(|v| v.id).collect();

    let text = fs::read_to_string(dir.join(CACHE_FILE))?;
    let mut members = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        members.push(l.parse().map_err(|_| DataError::Row { line: i as u64 + 1, message: format!("bad cache id `{l}`") })?);
    }
    Ok((Catalog { videos, graph, trending }, CacheSet::from_members(members)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build_cache_set, generate_catalog, CatalogConfig};

    #[test]
    fn catalog_files_round_trip() {
        let cfg = CatalogConfig { n_videos: 300, n_trending: 20, related_out_degree: 10, ..CatalogConfig::default() };
        let cat = generate_catalog(&cfg).unwrap();
        let cache = build_cache_set(&cat.videos, &cat.graph, &cat.trending, 60).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_catalog(dir.path(), &cat, &cache, &Provenance::new().with("seed", 0)).unwrap();
        let (back, back_cache) = read_catalog(dir.path()).unwrap();
        assert_eq!(back.videos, cat.videos);
        assert_eq!(back.graph, cat.graph);
        assert_eq!(back.trending, cat.trending);
        assert_eq!(back_cache.iter().collect::<Vec<_>>(), cache.iter().collect::<Vec<_>>());
        let videos = fs::read_to_string(dir.path().join(VIDEOS_FILE)).unwrap();
        assert!(videos.starts_with("# seed=0\nid,view_count,is_trending\n"));
    }
}
