//! Gaussian/tile pair lists, per-tile depth sorting and depth-bound culling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::preprocess::{intersect_tiles, ProjectedGaussian, RenderConfig, TileGrid};

/// One Gaussian/tile work item.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair {
    /// Persistent Gaussian id.
    pub id: u32,
    /// Index into the projected list the pairs were built from.
    pub slot: u32,
    /// Sort key: camera-space z of the Gaussian center.
    pub depth: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairList {
    pub tiles: Vec<Vec<Pair>>,
    pub total_pairs: u64,
}

impl PairList {
    pub fn tile(&self, id: usize) -> &[Pair] {
        &self.tiles[id]
    }

    /// Recomputes the accounting identity `total = Σ per-tile lengths`.
    pub fn recount(&self) -> u64 {
        self.tiles.iter().map(|t| t.len() as u64).sum()
    }
}

/// Early-stop depth bound of one tile.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "depth")]
pub enum DepthBound {
    #[default]
    Unbounded,
    Bounded(f64),
}

impl DepthBound {
    pub fn admits(self, depth: f64) -> bool {
        match self {
            DepthBound::Unbounded => true,
            DepthBound::Bounded(d) => depth <= d,
        }
    }
}

/// Emits pairs with the configured intersection test. Within a tile, pairs
/// follow the order of `projected`.
pub fn build_pairs(
    projected: &[ProjectedGaussian],
    grid: &TileGrid,
    cfg: &RenderConfig,
) -> PairList {
    let per_gaussian: Vec<Vec<usize>> = projected
        .par_iter()
        .map(|pg| intersect_tiles(pg, grid, cfg))
        .collect();
    let mut tiles: Vec<Vec<Pair>> = vec![Vec::new(); grid.tile_count()];
    let mut total = 0u64;
    for (slot, (pg, hits)) in projected.iter().zip(&per_gaussian).enumerate() {
        for &t in hits {
            tiles[t].push(Pair {
                id: pg.id,
                slot: slot as u32,
                depth: pg.depth,
            });
        }
        total += hits.len() as u64;
    }
    PairList {
        tiles,
        total_pairs: total,
    }
}

/// Sorts items by an `f64` key, ties broken by a `u64` secondary key.
/// Shared by the per-tile depth sort and the scheduler's workload ordering.
pub fn sort_by_key_then_id<T>(items: &mut [T], key: impl Fn(&T) -> (f64, u64)) {
    items.sort_by(|a, b| {
        let (ka, ia) = key(a);
        let (kb, ib) = key(b);
        ka.total_cmp(&kb).then(ia.cmp(&ib))
    });
}

/// Ascending depth, ties by Gaussian id.
pub fn depth_sort_tile(pairs: &mut [Pair]) {
    assert!(
        pairs.iter().all(|p| !p.depth.is_nan()),
        "NaN depth reached the sorter"
    );
    sort_by_key_then_id(pairs, |p| (p.depth, p.id as u64));
}

/// Drops pairs deeper than the tile's early-stop bound.
pub fn dpes_cull(pairs: &mut Vec<Pair>, bound: DepthBound) {
    if let DepthBound::Bounded(_) = bound {
        pairs.retain(|p| bound.admits(p.depth));
    }
}

/// Pair-count counters for reports.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PairCounts {
    pub pairs_by_stage: std::collections::BTreeMap<String, u64>,
    pub pairs_after_dpes: u64,
}
