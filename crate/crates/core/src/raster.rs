//! Front-to-back alpha blending over depth-sorted tile lists.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binning::{build_pairs, depth_sort_tile, dpes_cull, DepthBound, Pair, PairList};
use crate::image::RgbImage;
use crate::preprocess::{
    pixel_density, project_scene, DepthMode, ProjectedGaussian, ProjectionStats, RenderConfig,
    TileGrid,
};
use crate::scene::{CameraPose, GaussianSet};

/// Accumulated opacity below which a pixel has no defined depth.
pub const MIN_DEPTH_ALPHA: f64 = 1e-6;

/// Per-frame buffers, all row-major `width × height`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBuffers {
    pub color: RgbImage,
    /// Opacity-weighted scene depth; `None` where nothing was blended.
    pub depth: Vec<Option<f64>>,
    /// Truncated depth: depth of the splat that triggered early stopping,
    /// else of the last blended splat, else 0.
    pub depth_max: Vec<f64>,
    /// Pixel has a render or reprojection source.
    pub valid: Vec<bool>,
    /// Pixel was filled by interpolation.
    pub interp_mask: Vec<bool>,
    pub background: [f64; 3],
}

impl FrameBuffers {
    /// Background-colored frame with no valid pixels.
    pub fn blank(width: u32, height: u32, background: [f64; 3]) -> Self {
        let n = width as usize * height as usize;
        Self {
            color: RgbImage::filled(width, height, background),
            depth: vec![None; n],
            depth_max: vec![0.0; n],
            valid: vec![false; n],
            interp_mask: vec![false; n],
            background,
        }
    }

    pub fn width(&self) -> u32 {
        self.color.width
    }

    pub fn height(&self) -> u32 {
        self.color.height
    }

    pub fn index(&self, x: u32, y: u32) -> usize {
        self.color.index(x, y)
    }

    /// Writes a rendered tile. With `only_missing`, pixels that are already
    /// valid keep their current contents.
    pub fn write_tile(
        &mut self,
        grid: &TileGrid,
        tile: usize,
        rendered: &TileRender,
        only_missing: bool,
    ) {
        let (xs, ys) = grid.tile_pixels(tile);
        let mut k = 0;
        for y in ys {
            for x in xs.clone() {
                let i = self.index(x, y);
                let px = &rendered.pixels[k];
                k += 1;
                if only_missing && self.valid[i] {
                    continue;
                }
                self.color.pixels[i] = px.color;
                self.depth[i] = px.depth;
                self.depth_max[i] = px.depth_max;
                self.valid[i] = true;
                self.interp_mask[i] = false;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelResult {
    pub color: [f64; 3],
    pub depth: Option<f64>,
    pub depth_max: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BlendCounters {
    /// Splats actually blended (α ≥ τ).
    pub blended: u64,
    pub early_stops: u64,
}

impl std::ops::AddAssign for BlendCounters {
    fn add_assign(&mut self, o: Self) {
        self.blended += o.blended;
        self.early_stops += o.early_stops;
    }
}

/// Blends splats front to back at pixel position `p`.
pub fn blend_pixel<'a>(
    splats: impl IntoIterator<Item = &'a ProjectedGaussian>,
    p: [f64; 2],
    cfg: &RenderConfig,
    counters: &mut BlendCounters,
) -> PixelResult {
    let mut t = 1.0;
    let mut accum = [0.0; 3];
    let mut accum_alpha = 0.0;
    let mut accum_depth = 0.0;
    let mut last_depth = 0.0;
    for pg in splats {
        let alpha = pixel_density(pg, p);
        if alpha < cfg.tau {
            continue;
        }
        let w = alpha * t;
        for (a, c) in accum.iter_mut().zip(pg.color) {
            *a += c * w;
        }
        accum_alpha += w;
        accum_depth += pg.depth * w;
        last_depth = pg.depth;
        t *= 1.0 - alpha;
        counters.blended += 1;
        if cfg.early_stop && t < cfg.t_stop {
            counters.early_stops += 1;
            break;
        }
    }
    let depth = (accum_alpha > MIN_DEPTH_ALPHA).then(|| match cfg.depth_mode {
        DepthMode::Normalized => accum_depth / accum_alpha,
        DepthMode::Unnormalized => accum_depth,
    });
    let bg = cfg.background;
    PixelResult {
        color: [
            accum[0] + t * bg[0],
            accum[1] + t * bg[1],
            accum[2] + t * bg[2],
        ],
        depth,
        depth_max: last_depth,
    }
}

/// Output of one tile, pixels row-major within the tile.
#[derive(Debug, Clone, PartialEq)]
pub struct TileRender {
    pub pixels: Vec<PixelResult>,
    pub counters: BlendCounters,
}

/// Renders one tile from its depth-sorted pairs.
pub fn render_tile(
    pairs: &[Pair],
    projected: &[ProjectedGaussian],
    grid: &TileGrid,
    tile: usize,
    cfg: &RenderConfig,
) -> TileRender {
    let (xs, ys) = grid.tile_pixels(tile);
    let splats: Vec<&ProjectedGaussian> =
        pairs.iter().map(|p| &projected[p.slot as usize]).collect();
    let mut counters = BlendCounters::default();
    let mut pixels = Vec::with_capacity(xs.len() * ys.len());
    for y in ys {
        for x in xs.clone() {
            let p = [x as f64 + 0.5, y as f64 + 0.5];
            pixels.push(blend_pixel(splats.iter().copied(), p, cfg, &mut counters));
        }
    }
    TileRender { pixels, counters }
}

/// Projection and binning for one view.
#[derive(Debug, Clone)]
pub struct PreparedView {
    pub grid: TileGrid,
    pub projected: Vec<ProjectedGaussian>,
    pub pairs: PairList,
    pub stats: ProjectionStats,
}

pub fn prepare_view(set: &GaussianSet, pose: &CameraPose, cfg: &RenderConfig) -> PreparedView {
    let grid = TileGrid::for_pose(pose);
    let (projected, stats) = project_scene(set, pose, cfg);
    let pairs = build_pairs(&projected, &grid, cfg);
    PreparedView {
        grid,
        projected,
        pairs,
        stats,
    }
}

/// Result of rendering a subset of tiles.
#[derive(Debug, Clone)]
pub struct TileBatch {
    pub tiles: Vec<usize>,
    pub renders: Vec<TileRender>,
    /// Pair count per tile after depth-bound culling.
    pub loads: Vec<u64>,
}

impl TileBatch {
    pub fn counters(&self) -> BlendCounters {
        let mut c = BlendCounters::default();
        for r in &self.renders {
            c += r.counters;
        }
        c
    }

    pub fn pairs_after_cull(&self) -> u64 {
        self.loads.iter().sum()
    }
}

/// Culls, sorts and renders the requested tiles. Tiles are independent and
/// rendered in parallel; results come back in request order.
pub fn render_tiles(
    view: &PreparedView,
    tiles: &[(usize, DepthBound)],
    cfg: &RenderConfig,
) -> TileBatch {
    let results: Vec<(TileRender, u64)> = tiles
        .par_iter()
        .map(|&(tile, bound)| {
            let mut pairs = view.pairs.tile(tile).to_vec();
            dpes_cull(&mut pairs, bound);
            depth_sort_tile(&mut pairs);
            let load = pairs.len() as u64;
            (
                render_tile(&pairs, &view.projected, &view.grid, tile, cfg),
                load,
            )
        })
        .collect();
    let (renders, loads) = results.into_iter().unzip();
    TileBatch {
        tiles: tiles.iter().map(|t| t.0).collect(),
        renders,
        loads,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameStats {
    pub projection: ProjectionStats,
    pub total_pairs: u64,
    pub pairs_rendered: u64,
    pub blended_pairs: u64,
    pub early_stops: u64,
}

/// Full pipeline: cull, project, intersect, bin, sort and blend every tile.
pub fn render_frame_full(
    set: &GaussianSet,
    pose: &CameraPose,
    cfg: &RenderConfig,
) -> (FrameBuffers, FrameStats) {
    let view = prepare_view(set, pose, cfg);
    let requests: Vec<(usize, DepthBound)> = (0..view.grid.tile_count())
        .map(|t| (t, DepthBound::Unbounded))
        .collect();
    let batch = render_tiles(&view, &requests, cfg);
    let mut frame = FrameBuffers::blank(pose.width, pose.height, cfg.background);
    for (tile, render) in batch.tiles.iter().zip(&batch.renders) {
        frame.write_tile(&view.grid, *tile, render, false);
    }
    let counters = batch.counters();
    let stats = FrameStats {
        projection: view.stats.clone(),
        total_pairs: view.pairs.total_pairs,
        pairs_rendered: batch.pairs_after_cull(),
        blended_pairs: counters.blended,
        early_stops: counters.early_stops,
    };
    (frame, stats)
}

/// Oracle renderer: every projected splat in global depth order at every
/// pixel, with no tiling, intersection test or early stopping.
pub fn brute_force_reference(
    set: &GaussianSet,
    pose: &CameraPose,
    cfg: &RenderConfig,
) -> FrameBuffers {
    let (mut projected, _) = project_scene(set, pose, cfg);
    projected.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.id.cmp(&b.id)));
    let cfg = RenderConfig {
        early_stop: false,
        ..cfg.clone()
    };
    let (w, h) = (pose.width, pose.height);
    let rows: Vec<Vec<PixelResult>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut counters = BlendCounters::default();
            (0..w)
                .map(|x| {
                    blend_pixel(
                        &projected,
                        [x as f64 + 0.5, y as f64 + 0.5],
                        &cfg,
                        &mut counters,
                    )
                })
                .collect()
        })
        .collect();
    let mut frame = FrameBuffers::blank(w, h, cfg.background);
    for (i, px) in rows.into_iter().flatten().enumerate() {
        frame.color.pixels[i] = px.color;
        frame.depth[i] = px.depth;
        frame.depth_max[i] = px.depth_max;
        frame.valid[i] = true;
    }
    frame
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::test_support::splat;
    use crate::scene::generate_synthetic_scene;
    use nalgebra::{Matrix3, Vector3};

    const TAU: f64 = 1.0 / 255.0;

    fn with(mut pg: ProjectedGaussian, id: u32, depth: f64, color: [f64; 3]) -> ProjectedGaussian {
        pg.id = id;
        pg.depth = depth;
        pg.color = color;
        pg
    }

    #[test]
    fn density_examples() {
        let pg = splat([10.0, 10.0], [1.0, 0.0, 1.0], 1.0, TAU);
        assert_eq!(pixel_density(&pg, [10.0, 10.0]), 0.99);
        let r = (2.0 * 255f64.ln()).sqrt();
        assert!((pixel_density(&pg, [10.0 + r, 10.0]) - TAU).abs() < 1e-15);
        let pg = splat([10.0, 10.0], [1.0, 0.0, 1.0], 0.4, TAU);
        assert_eq!(pixel_density(&pg, [10.0, 10.0]), 0.4);
        let mut z = pg.clone();
        z.opacity = 0.0;
        assert_eq!(pixel_density(&z, [10.0, 10.0]), 0.0);
    }

    #[test]
    fn empty_pixel_is_background() {
        let cfg = RenderConfig {
            background: [0.1, 0.2, 0.3],
            ..Default::default()
        };
        let mut c = BlendCounters::default();
        let px = blend_pixel(std::iter::empty(), [0.5, 0.5], &cfg, &mut c);
        assert_eq!(px.color, [0.1, 0.2, 0.3]);
        assert_eq!(px.depth, None);
        assert_eq!(px.depth_max, 0.0);
    }

    #[test]
    fn single_and_double_blend() {
        let cfg = RenderConfig::default();
        let base = splat([0.5, 0.5], [1.0, 0.0, 1.0], 0.5, TAU);
        let a = with(base.clone(), 0, 2.0, [1.0, 0.0, 0.0]);
        let b = with(base, 1, 3.0, [0.0, 1.0, 0.0]);
        let mut c = BlendCounters::default();
        let px = blend_pixel([&a], [0.5, 0.5], &cfg, &mut c);
        assert_eq!(px.color, [0.5, 0.0, 0.0]);
        assert_eq!(px.depth, Some(2.0));
        assert_eq!(px.depth_max, 2.0);

        let bg = [0.2, 0.4, 0.8];
        let cfg = RenderConfig {
            background: bg,
            ..cfg
        };
        let px = blend_pixel([&a, &b], [0.5, 0.5], &cfg, &mut c);
        let expect = [0.5 + 0.25 * bg[0], 0.25 + 0.25 * bg[1], 0.25 * bg[2]];
        for (got, want) in px.color.iter().zip(expect) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!((px.depth.unwrap() - (0.5 * 2.0 + 0.25 * 3.0) / 0.75).abs() < 1e-15);
        assert_eq!(px.depth_max, 3.0);
        assert_eq!(c.blended, 3);
    }

    #[test]
    fn early_stop_records_triggering_depth() {
        let cfg = RenderConfig::default();
        let base = splat([0.5, 0.5], [1.0, 0.0, 1.0], 0.99, TAU);
        let splats: Vec<_> = (0..5)
            .map(|i| with(base.clone(), i, 1.0 + i as f64, [1.0; 3]))
            .collect();
        let mut c = BlendCounters::default();
        let px = blend_pixel(&splats, [0.5, 0.5], &cfg, &mut c);
        // T: 1e-2 after one, 1e-4 after two (not < t_stop), 1e-6 after three.
        assert_eq!(c.blended, 3);
        assert_eq!(c.early_stops, 1);
        assert_eq!(px.depth_max, 3.0);
    }

    #[test]
    fn unnormalized_depth_mode() {
        let cfg = RenderConfig {
            depth_mode: DepthMode::Unnormalized,
            ..Default::default()
        };
        let a = with(
            splat([0.5, 0.5], [1.0, 0.0, 1.0], 0.5, TAU),
            0,
            4.0,
            [1.0; 3],
        );
        let px = blend_pixel([&a], [0.5, 0.5], &cfg, &mut BlendCounters::default());
        assert_eq!(px.depth, Some(2.0));
    }

    fn desk_pose() -> CameraPose {
        CameraPose::new(
            Matrix3::identity(),
            Vector3::new(0.0, 0.0, 3.0),
            96.0,
            96.0,
            32.0,
            32.0,
            64,
            64,
            0.1,
        )
        .unwrap()
    }

    #[test]
    fn empty_scene_renders_background() {
        let cfg = RenderConfig {
            background: [0.3, 0.3, 0.3],
            ..Default::default()
        };
        let (frame, stats) = render_frame_full(&GaussianSet::default(), &desk_pose(), &cfg);
        assert!(frame.color.pixels.iter().all(|p| *p == [0.3, 0.3, 0.3]));
        assert!(frame.valid.iter().all(|v| *v));
        assert_eq!(stats.total_pairs, 0);
        assert_eq!(frame, {
            let mut f = brute_force_reference(&GaussianSet::default(), &desk_pose(), &cfg);
            f.valid.iter_mut().for_each(|v| *v = true);
            f
        });
    }

    #[test]
    fn tiled_matches_brute_force_on_small_scene() {
        let set = generate_synthetic_scene(4, 300, 2.0);
        let cfg = RenderConfig {
            early_stop: false,
            ..Default::default()
        };
        let (tiled, _) = render_frame_full(&set, &desk_pose(), &cfg);
        let brute = brute_force_reference(&set, &desk_pose(), &cfg);
        let max_err = tiled
            .color
            .pixels
            .iter()
            .zip(&brute.color.pixels)
            .flat_map(|(a, b)| (0..3).map(move |k| (a[k] - b[k]).abs()))
            .fold(0.0, f64::max);
        assert!(max_err < 1e-12, "max error {max_err}");
    }

    #[test]
    fn transmittance_is_monotone_and_depth_in_range() {
        let set = generate_synthetic_scene(9, 200, 2.0);
        let cfg = RenderConfig::default();
        let (mut projected, _) = project_scene(&set, &desk_pose(), &cfg);
        projected.sort_by(|a, b| a.depth.total_cmp(&b.depth));
        for &(x, y) in &[(32u32, 32u32), (10, 40), (50, 12)] {
            let p = [x as f64 + 0.5, y as f64 + 0.5];
            let mut t = 1.0f64;
            let mut depths = Vec::new();
            for pg in &projected {
                let a = pixel_density(pg, p);
                if a < cfg.tau {
                    continue;
                }
                let next = t * (1.0 - a);
                assert!(next < t && next > 0.0);
                t = next;
                depths.push(pg.depth);
                if t < cfg.t_stop {
                    break;
                }
            }
            let px = blend_pixel(&projected, p, &cfg, &mut BlendCounters::default());
            if let Some(d) = px.depth {
                let lo = depths.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = depths.iter().cloned().fold(0.0, f64::max);
                assert!(d >= lo - 1e-12 && d <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn tile_order_does_not_change_frame() {
        let set = generate_synthetic_scene(2, 300, 2.0);
        let cfg = RenderConfig::default();
        let pose = desk_pose();
        let view = prepare_view(&set, &pose, &cfg);
        let fwd: Vec<_> = (0..view.grid.tile_count())
            .map(|t| (t, DepthBound::Unbounded))
            .collect();
        let rev: Vec<_> = fwd.iter().rev().cloned().collect();
        let paint = |req: &[(usize, DepthBound)]| {
            let batch = render_tiles(&view, req, &cfg);
            let mut f = FrameBuffers::blank(pose.width, pose.height, cfg.background);
            for (t, r) in batch.tiles.iter().zip(&batch.renders) {
                f.write_tile(&view.grid, *t, r, false);
            }
            f
        };
        assert_eq!(paint(&fwd), paint(&rev));
    }
}
