//! Forward warping of a rendered frame to a new viewpoint, tile
//! classification, in-tile interpolation and per-tile early-stop depth bounds.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binning::DepthBound;
use crate::error::{Error, Result};
use crate::preprocess::TileGrid;
use crate::raster::FrameBuffers;
use crate::scene::CameraPose;
use crate::TILE_SIZE;

/// Smallest valid-pixel count (out of 256) at which a tile is interpolated
/// instead of re-rendered: at most one sixth of the tile may be missing.
pub const DEFAULT_N0_VALID: u32 = 214;
pub const DEFAULT_WINDOW: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarpMode {
    /// Reproject, interpolate dense tiles, re-render sparse tiles.
    TileWarp,
    /// Reproject and re-render only missing pixels.
    PixelWarp,
}

impl WarpMode {
    pub fn name(self) -> &'static str {
        match self {
            WarpMode::TileWarp => "tile",
            WarpMode::PixelWarp => "pixel",
        }
    }
}

impl std::str::FromStr for WarpMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tile" | "tile_warp" => Ok(WarpMode::TileWarp),
            "pixel" | "pixel_warp" => Ok(WarpMode::PixelWarp),
            _ => Err(Error::InvalidArgument(format!(
                "unknown warp mode `{s}` (tile|pixel)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpConfig {
    pub n0_valid: u32,
    /// Warped frames between full renders.
    pub window: u32,
    /// Exclude interpolated pixels from the next warp.
    pub mask_enabled: bool,
    pub mode: WarpMode,
}

impl Default for WarpConfig {
    fn default() -> Self {
        Self {
            n0_valid: DEFAULT_N0_VALID,
            window: DEFAULT_WINDOW,
            mask_enabled: true,
            mode: WarpMode::TileWarp,
        }
    }
}

impl WarpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n0_valid > TILE_SIZE * TILE_SIZE {
            return Err(Error::InvalidArgument(format!(
                "n0_valid must be at most {}, got {}",
                TILE_SIZE * TILE_SIZE,
                self.n0_valid
            )));
        }
        Ok(())
    }
}

/// A back-projected pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpPoint {
    /// Row-major index of the source pixel.
    pub source: usize,
    pub position: Vector3<f64>,
    pub color: [f64; 3],
    /// World point at the truncated depth along the same ray.
    pub truncated: Vector3<f64>,
    pub interpolated: bool,
}

/// Camera-space direction through the center of pixel `(x, y)`, with z = 1.
pub fn pixel_ray(pose: &CameraPose, x: u32, y: u32) -> Vector3<f64> {
    Vector3::new(
        (x as f64 + 0.5 - pose.cx) / pose.fx,
        (y as f64 + 0.5 - pose.cy) / pose.fy,
        1.0,
    )
}

/// Lifts every valid pixel with a defined depth to world space. With
/// `mask_enabled`, interpolated pixels are skipped.
pub fn backproject(frame: &FrameBuffers, pose: &CameraPose, mask_enabled: bool) -> Vec<WarpPoint> {
    let w = frame.width();
    (0..frame.depth.len())
        .into_par_iter()
        .filter_map(|i| {
            if !frame.valid[i] || (mask_enabled && frame.interp_mask[i]) {
                return None;
            }
            let d = frame.depth[i]?;
            let ray = pixel_ray(pose, i as u32 % w, i as u32 / w);
            Some(WarpPoint {
                source: i,
                position: pose.camera_to_world(&(ray * d)),
                color: frame.color.pixels[i],
                truncated: pose.camera_to_world(&(ray * frame.depth_max[i])),
                interpolated: frame.interp_mask[i],
            })
        })
        .collect()
}

/// Target pixel and camera depth of a world point, if it lands in the image
/// in front of the camera. Landing positions snap to the pixel whose center
/// is nearest.
fn land(pose: &CameraPose, p: &Vector3<f64>) -> Option<(u32, u32, f64)> {
    let c = pose.world_to_camera(p);
    if !(c.z > 0.0) {
        return None;
    }
    let u = pose.fx * c.x / c.z + pose.cx;
    let v = pose.fy * c.y / c.z + pose.cy;
    if !(u >= 0.0 && v >= 0.0 && u < pose.width as f64 && v < pose.height as f64) {
        return None;
    }
    Some((u.floor() as u32, v.floor() as u32, c.z))
}

/// Splats points onto the target view with a z-buffer. Ties go to the
/// lower source index.
pub fn reproject(points: &[WarpPoint], target: &CameraPose, background: [f64; 3]) -> FrameBuffers {
    let landed: Vec<Option<(usize, f64)>> = points
        .par_iter()
        .map(|pt| land(target, &pt.position).map(|(x, y, z)| ((y * target.width + x) as usize, z)))
        .collect();
    let n = target.pixel_count();
    let mut winner: Vec<Option<(usize, f64)>> = vec![None; n];
    for (k, hit) in landed.iter().enumerate() {
        let Some((i, z)) = *hit else { continue };
        let better = match winner[i] {
            None => true,
            Some((j, zj)) => z < zj || (z == zj && points[k].source < points[j].source),
        };
        if better {
            winner[i] = Some((k, z));
        }
    }
    let mut out = FrameBuffers::blank(target.width, target.height, background);
    for (i, w) in winner.iter().enumerate() {
        let Some((k, z)) = *w else { continue };
        let pt = &points[k];
        out.color.pixels[i] = pt.color;
        out.depth[i] = Some(z);
        out.depth_max[i] = target.world_to_camera(&pt.truncated).z;
        out.valid[i] = true;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TileStatus {
    Interpolate,
    Rerender,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TilePlanEntry {
    pub tile: usize,
    pub status: TileStatus,
    pub valid_count: u32,
    pub bound: DepthBound,
    /// Pairs after depth-bound culling; filled in by the scheduler.
    pub load: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TilePlan {
    pub tiles_x: u32,
    pub tiles_y: u32,
    pub tiles: Vec<TilePlanEntry>,
}

impl TilePlan {
    /// Every tile marked for re-rendering with no bound.
    pub fn full_render(grid: &TileGrid) -> Self {
        Self {
            tiles_x: grid.tiles_x,
            tiles_y: grid.tiles_y,
            tiles: (0..grid.tile_count())
                .map(|tile| TilePlanEntry {
                    tile,
                    status: TileStatus::Rerender,
                    valid_count: 0,
                    bound: DepthBound::Unbounded,
                    load: 0,
                })
                .collect(),
        }
    }

    pub fn count(&self, status: TileStatus) -> usize {
        self.tiles.iter().filter(|t| t.status == status).count()
    }

    pub fn rerender_tiles(&self) -> impl Iterator<Item = &TilePlanEntry> {
        self.tiles
            .iter()
            .filter(|t| t.status == TileStatus::Rerender)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Max truncated depth over the tile's valid pixels.
fn tile_bound(frame: &FrameBuffers, grid: &TileGrid, tile: usize) -> DepthBound {
    let (xs, ys) = grid.tile_pixels(tile);
    let mut max = f64::NEG_INFINITY;
    for y in ys {
        for x in xs.clone() {
            let i = frame.index(x, y);
            if frame.valid[i] {
                max = max.max(frame.depth_max[i]);
            }
        }
    }
    if max > 0.0 {
        DepthBound::Bounded(max)
    } else {
        DepthBound::Unbounded
    }
}

fn tile_valid_count(frame: &FrameBuffers, grid: &TileGrid, tile: usize) -> u32 {
    let (xs, ys) = grid.tile_pixels(tile);
    ys.flat_map(|y| xs.clone().map(move |x| (x, y)))
        .filter(|&(x, y)| frame.valid[frame.index(x, y)])
        .count() as u32
}

/// Splits tiles into interpolation and re-render sets and attaches depth
/// bounds to the re-render tiles.
pub fn classify_tiles(sparse: &FrameBuffers, grid: &TileGrid, cfg: &WarpConfig) -> TilePlan {
    let tiles = (0..grid.tile_count())
        .into_par_iter()
        .map(|tile| {
            let valid_count = tile_valid_count(sparse, grid, tile);
            let (status, bound) = if valid_count >= cfg.n0_valid {
                (TileStatus::Interpolate, DepthBound::Unbounded)
            } else {
                (TileStatus::Rerender, tile_bound(sparse, grid, tile))
            };
            TilePlanEntry {
                tile,
                status,
                valid_count,
                bound,
                load: 0,
            }
        })
        .collect();
    TilePlan {
        tiles_x: grid.tiles_x,
        tiles_y: grid.tiles_y,
        tiles,
    }
}

/// A pixel filled by interpolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fill {
    pub index: usize,
    pub color: [f64; 3],
    pub depth: Option<f64>,
    pub depth_max: f64,
}

/// Fills missing pixels of one tile from valid pixels of the same tile.
/// Each missing pixel searches square rings of growing radius until one
/// holds a valid pixel, then takes the inverse-distance weighted mean of
/// that ring's valid pixels. Depths come from the nearest contributor.
pub fn interpolate_tile(frame: &FrameBuffers, grid: &TileGrid, tile: usize) -> Result<Vec<Fill>> {
    let (xs, ys) = grid.tile_pixels(tile);
    let (x0, y0, x1, y1) = (
        xs.start as i64,
        ys.start as i64,
        xs.end as i64,
        ys.end as i64,
    );
    let mut fills = Vec::new();
    let mut any_valid = false;
    let max_radius = (x1 - x0).max(y1 - y0);
    for y in y0..y1 {
        for x in x0..x1 {
            let i = frame.index(x as u32, y as u32);
            if frame.valid[i] {
                any_valid = true;
                continue;
            }
            let mut found = None;
            for r in 1..max_radius {
                let mut wsum = 0.0;
                let mut acc = [0.0; 3];
                let mut nearest: Option<(f64, usize)> = None;
                for ny in (y - r).max(y0)..=(y + r).min(y1 - 1) {
                    for nx in (x - r).max(x0)..=(x + r).min(x1 - 1) {
                        if (nx - x).abs().max((ny - y).abs()) != r {
                            continue;
                        }
                        let j = frame.index(nx as u32, ny as u32);
                        if !frame.valid[j] {
                            continue;
                        }
                        let d = (((nx - x).pow(2) + (ny - y).pow(2)) as f64).sqrt();
                        let w = 1.0 / d;
                        wsum += w;
                        for (a, c) in acc.iter_mut().zip(frame.color.pixels[j]) {
                            *a += w * c;
                        }
                        if nearest.is_none_or(|(dn, _)| d < dn) {
                            nearest = Some((d, j));
                        }
                    }
                }
                if let Some((_, j)) = nearest {
                    found = Some(Fill {
                        index: i,
                        color: acc.map(|a| a / wsum),
                        depth: frame.depth[j],
                        depth_max: frame.depth_max[j],
                    });
                    break;
                }
            }
            if let Some(f) = found {
                fills.push(f);
            }
        }
    }
    if !any_valid && (x1 > x0 && y1 > y0) {
        return Err(Error::InvalidArgument(format!(
            "tile {tile} has no valid pixels to interpolate from"
        )));
    }
    Ok(fills)
}

/// Writes interpolated pixels and flags them in the mask.
pub fn apply_fills(frame: &mut FrameBuffers, fills: &[Fill]) {
    for f in fills {
        frame.color.pixels[f.index] = f.color;
        frame.depth[f.index] = f.depth;
        frame.depth_max[f.index] = f.depth_max;
        frame.valid[f.index] = true;
        frame.interp_mask[f.index] = true;
    }
}

/// Warps `reference` from `ref_pose` to `tgt_pose`. Interpolate tiles come
/// back complete; re-render tiles are left for the renderer.
///
/// In pixel-warp mode every tile with a missing pixel is marked for
/// re-rendering without a depth bound, and nothing is interpolated.
pub fn warp_frame(
    reference: &FrameBuffers,
    ref_pose: &CameraPose,
    tgt_pose: &CameraPose,
    cfg: &WarpConfig,
) -> Result<(FrameBuffers, TilePlan)> {
    cfg.validate()?;
    if !ref_pose.same_intrinsics(tgt_pose) {
        return Err(Error::InvalidArgument(
            "reference and target intrinsics differ".into(),
        ));
    }
    let grid = TileGrid::for_pose(tgt_pose);
    let points = backproject(reference, ref_pose, cfg.mask_enabled);
    let mut frame = reproject(&points, tgt_pose, reference.background);
    let plan = match cfg.mode {
        WarpMode::TileWarp => {
            let plan = classify_tiles(&frame, &grid, cfg);
            let fills: Vec<Vec<Fill>> = plan
                .tiles
                .par_iter()
                .filter(|t| t.status == TileStatus::Interpolate)
                .map(|t| interpolate_tile(&frame, &grid, t.tile))
                .collect::<Result<_>>()?;
            for f in &fills {
                apply_fills(&mut frame, f);
            }
            plan
        }
        WarpMode::PixelWarp => {
            let full = TILE_SIZE * TILE_SIZE;
            let mut plan = classify_tiles(
                &frame,
                &grid,
                &WarpConfig {
                    n0_valid: full,
                    ..cfg.clone()
                },
            );
            for t in &mut plan.tiles {
                t.bound = DepthBound::Unbounded;
            }
            plan
        }
    };
    Ok((frame, plan))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::RenderConfig;
    use crate::raster::render_frame_full;
    use crate::scene::generate_synthetic_scene;
    use nalgebra::Matrix3;

    fn pose_at(z: f64) -> CameraPose {
        CameraPose::new(
            Matrix3::identity(),
            Vector3::new(0.0, 0.0, z),
            100.0,
            100.0,
            32.0,
            32.0,
            64,
            64,
            0.1,
        )
        .unwrap()
    }

    fn frame_with(f: impl Fn(u32, u32) -> Option<(f64, [f64; 3])>) -> FrameBuffers {
        let mut fb = FrameBuffers::blank(64, 64, [0.0; 3]);
        for y in 0..64 {
            for x in 0..64 {
                if let Some((d, c)) = f(x, y) {
                    let i = fb.index(x, y);
                    fb.valid[i] = true;
                    fb.depth[i] = Some(d);
                    fb.depth_max[i] = d + 0.5;
                    fb.color.pixels[i] = c;
                }
            }
        }
        fb
    }

    #[test]
    fn all_invalid_backprojects_to_nothing() {
        let fb = FrameBuffers::blank(64, 64, [0.0; 3]);
        assert!(backproject(&fb, &pose_at(0.0), true).is_empty());
    }

    #[test]
    fn principal_point_backprojects_onto_axis() {
        let pose = CameraPose::new(
            Matrix3::identity(),
            Vector3::zeros(),
            100.0,
            100.0,
            32.5,
            20.5,
            64,
            64,
            0.1,
        )
        .unwrap();
        let fb = frame_with(|x, y| (x == 32 && y == 20).then_some((3.0, [1.0; 3])));
        let pts = backproject(&fb, &pose, true);
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].position, Vector3::new(0.0, 0.0, 3.0));
    }

    #[test]
    fn mask_flag_controls_interpolated_sources() {
        let mut fb = frame_with(|_, _| Some((2.0, [0.5; 3])));
        fb.interp_mask[5] = true;
        assert_eq!(backproject(&fb, &pose_at(0.0), true).len(), 64 * 64 - 1);
        assert_eq!(backproject(&fb, &pose_at(0.0), false).len(), 64 * 64);
    }

    #[test]
    fn identity_reprojection_is_exact() {
        let fb = frame_with(|x, y| {
            ((x + y) % 3 != 0).then_some((
                1.0 + 0.01 * x as f64,
                [x as f64 / 64.0, 0.3, y as f64 / 64.0],
            ))
        });
        let pose = pose_at(-2.0);
        let out = reproject(&backproject(&fb, &pose, true), &pose, [0.0; 3]);
        assert_eq!(out.valid, fb.valid);
        for i in 0..fb.valid.len() {
            if fb.valid[i] {
                assert_eq!(out.color.pixels[i], fb.color.pixels[i]);
            }
        }
    }

    #[test]
    fn forward_translation_scales_radius() {
        // A pixel at radius ρ with depth d lands at ρ·d/(d−Δ) after moving Δ forward.
        let d = 4.0;
        let delta = 1.0;
        let src = pose_at(0.0);
        // Moving the camera forward by Δ means world point z - Δ in the new camera.
        let tgt = pose_at(-delta);
        let (x, y) = (40u32, 32u32);
        let fb = frame_with(|px, py| (px == x && py == y).then_some((d, [1.0; 3])));
        let pts = backproject(&fb, &src, true);
        let rho = x as f64 + 0.5 - 32.0;
        let expect = rho * d / (d - delta);
        let c = tgt.world_to_camera(&pts[0].position);
        let u = tgt.fx * c.x / c.z + tgt.cx - 32.0;
        assert!((u - expect).abs() < 1e-12);
        let out = reproject(&pts, &tgt, [0.0; 3]);
        let landed = (32.0 + expect).floor() as u32;
        assert!(out.valid[out.index(landed, 32)]);
        assert_eq!(out.depth[out.index(landed, 32)], Some(d - delta));
    }

    #[test]
    fn zbuffer_keeps_nearest() {
        let pose = pose_at(0.0);
        let mk = |source, z: f64, c| WarpPoint {
            source,
            position: Vector3::new(0.0, 0.0, z),
            color: [c; 3],
            truncated: Vector3::new(0.0, 0.0, z + 1.0),
            interpolated: false,
        };
        for pts in [
            vec![mk(0, 3.0, 0.1), mk(1, 2.0, 0.2)],
            vec![mk(1, 2.0, 0.2), mk(0, 3.0, 0.1)],
        ] {
            let out = reproject(&pts, &pose, [0.0; 3]);
            let i = out.index(32, 32);
            assert_eq!(out.depth[i], Some(2.0));
            assert_eq!(out.color.pixels[i], [0.2; 3]);
            assert_eq!(out.depth_max[i], 3.0);
            assert_eq!(out.valid.iter().filter(|v| **v).count(), 1);
        }
        let out = reproject(&[mk(7, 2.0, 0.7), mk(3, 2.0, 0.3)], &pose, [0.0; 3]);
        assert_eq!(out.color.pixels[out.index(32, 32)], [0.3; 3]);
    }

    #[test]
    fn points_behind_or_outside_are_dropped() {
        let pose = pose_at(0.0);
        let mk = |p| WarpPoint {
            source: 0,
            position: p,
            color: [1.0; 3],
            truncated: p,
            interpolated: false,
        };
        let out = reproject(
            &[
                mk(Vector3::new(0.0, 0.0, -1.0)),
                mk(Vector3::new(50.0, 0.0, 1.0)),
            ],
            &pose,
            [0.0; 3],
        );
        assert!(out.valid.iter().all(|v| !v));
    }

    fn frame_with_tile_valid(count: u32) -> FrameBuffers {
        frame_with(|x, y| (x < 16 && y < 16 && y * 16 + x < count).then_some((1.0, [1.0; 3])))
    }

    #[test]
    fn classification_threshold() {
        let grid = TileGrid::new(64, 64);
        let cfg = WarpConfig::default();
        for (count, status) in [
            (256, TileStatus::Interpolate),
            (214, TileStatus::Interpolate),
            (213, TileStatus::Rerender),
        ] {
            let plan = classify_tiles(&frame_with_tile_valid(count), &grid, &cfg);
            assert_eq!(plan.tiles[0].status, status, "{count}");
            assert_eq!(plan.tiles[0].valid_count, count);
            assert_eq!(
                plan.count(TileStatus::Interpolate) + plan.count(TileStatus::Rerender),
                16
            );
        }
    }

    #[test]
    fn rerender_bound_is_max_truncated_depth() {
        let grid = TileGrid::new(64, 64);
        let mut fb = FrameBuffers::blank(64, 64, [0.0; 3]);
        for (k, d) in [1.0, 4.0, 2.5].into_iter().enumerate() {
            let i = fb.index(k as u32, 0);
            fb.valid[i] = true;
            fb.depth[i] = Some(0.5);
            fb.depth_max[i] = d;
        }
        let plan = classify_tiles(&fb, &grid, &WarpConfig::default());
        assert_eq!(plan.tiles[0].bound, DepthBound::Bounded(4.0));
        assert_eq!(plan.tiles[1].bound, DepthBound::Unbounded);
        assert!(plan.to_json().unwrap().contains("RERENDER"));
    }

    #[test]
    fn interpolation_examples() {
        let grid = TileGrid::new(64, 64);
        let full = frame_with(|_, _| Some((1.0, [0.2; 3])));
        assert!(interpolate_tile(&full, &grid, 0).unwrap().is_empty());

        let mut one = full.clone();
        let i = one.index(5, 5);
        one.valid[i] = false;
        let fills = interpolate_tile(&one, &grid, 0).unwrap();
        assert_eq!(fills.len(), 1);
        assert!((fills[0].color[0] - 0.2).abs() < 1e-15);
        apply_fills(&mut one, &fills);
        assert!(one.interp_mask[i] && one.valid[i]);

        // Two ring-1 neighbors at equal distance.
        let fb = frame_with(|x, y| match (x, y) {
            (4, 5) => Some((1.0, [1.0, 0.0, 0.0])),
            (6, 5) => Some((2.0, [0.0, 0.0, 1.0])),
            _ => None,
        });
        let fills = interpolate_tile(&fb, &grid, 0).unwrap();
        let f = fills.iter().find(|f| f.index == fb.index(5, 5)).unwrap();
        assert_eq!(f.color, [0.5, 0.0, 0.5]);
        // Tie on nearest contributor: first in scan order.
        assert_eq!(f.depth, Some(1.0));
        assert_eq!(fills.len(), 256 - 2);
    }

    #[test]
    fn empty_tile_cannot_be_interpolated() {
        let grid = TileGrid::new(64, 64);
        let fb = FrameBuffers::blank(64, 64, [0.0; 3]);
        assert!(interpolate_tile(&fb, &grid, 3).is_err());
    }

    fn scene_pose(dx: f64) -> CameraPose {
        CameraPose::look_at(
            Vector3::new(dx, 0.0, -4.0),
            Vector3::zeros(),
            80.0,
            80.0,
            64,
            64,
            0.1,
        )
        .unwrap()
    }

    #[test]
    fn identity_warp_of_full_frame() {
        let set = generate_synthetic_scene(3, 400, 2.0);
        let pose = scene_pose(0.0);
        let (reference, _) = render_frame_full(&set, &pose, &RenderConfig::default());
        let cfg = WarpConfig {
            mask_enabled: false,
            ..Default::default()
        };
        let (out, plan) = warp_frame(&reference, &pose, &pose, &cfg).unwrap();
        // Background pixels have no depth; they are missing after the warp
        // and come back through interpolation only in dense tiles.
        for i in 0..out.valid.len() {
            if reference.depth[i].is_some() {
                assert_eq!(out.color.pixels[i], reference.color.pixels[i]);
                assert!(!out.interp_mask[i]);
            }
        }
        assert_eq!(
            plan.count(TileStatus::Interpolate) + plan.count(TileStatus::Rerender),
            plan.tiles.len()
        );
    }

    #[test]
    fn mask_excludes_interpolated_pixels_next_frame() {
        let set = generate_synthetic_scene(3, 400, 2.0);
        let (reference, _) = render_frame_full(&set, &scene_pose(0.0), &RenderConfig::default());
        let cfg = WarpConfig::default();
        let (f1, _) = warp_frame(&reference, &scene_pose(0.0), &scene_pose(0.05), &cfg).unwrap();
        let masked: Vec<usize> = (0..f1.valid.len()).filter(|&i| f1.interp_mask[i]).collect();
        let sources: std::collections::HashSet<usize> = backproject(&f1, &scene_pose(0.05), true)
            .iter()
            .map(|p| p.source)
            .collect();
        assert!(masked.iter().all(|i| !sources.contains(i)));
    }

    #[test]
    fn pixel_warp_never_interpolates() {
        let set = generate_synthetic_scene(3, 400, 2.0);
        let (reference, _) = render_frame_full(&set, &scene_pose(0.0), &RenderConfig::default());
        let cfg = WarpConfig {
            mode: WarpMode::PixelWarp,
            ..Default::default()
        };
        let (f1, plan) = warp_frame(&reference, &scene_pose(0.0), &scene_pose(0.05), &cfg).unwrap();
        assert!(f1.interp_mask.iter().all(|m| !m));
        for t in &plan.tiles {
            assert_eq!(t.status == TileStatus::Interpolate, t.valid_count == 256);
            assert_eq!(t.bound, DepthBound::Unbounded);
        }
    }
}
