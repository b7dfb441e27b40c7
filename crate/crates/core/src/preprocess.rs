//! Per-view preprocessing: frustum culling, EWA projection to 2D splats and
//! the Gaussian/tile intersection tests.
//!
//! Four tests are provided, from loosest to exact:
//!
//! * `aabb_tiles_baseline`: the square circumscribing the 3σ circle of the
//!   major axis.
//! * tight box: the axis extrema of the ellipse where opacity decays to τ.
//! * `two_stage_tiles`: the tight box followed by a per-tile distance test
//!   along the minor axis.
//! * `exact_tiles`: brute force over pixel centers, used as an oracle.

use nalgebra::{Matrix2x3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{CameraPose, Gaussian3D, GaussianSet};
use crate::sh::sh_to_color;
use crate::TILE_SIZE;

/// Distance from a tile center to its corners, in pixels.
pub const TILE_CIRCUMRADIUS: f64 = 8.0 * std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntersectionMode {
    #[serde(rename = "aabb3sigma")]
    Aabb3Sigma,
    Tight,
    TwoStage,
    Exact,
}

impl IntersectionMode {
    pub const ALL: [IntersectionMode; 4] = [
        IntersectionMode::Aabb3Sigma,
        IntersectionMode::Tight,
        IntersectionMode::TwoStage,
        IntersectionMode::Exact,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IntersectionMode::Aabb3Sigma => "aabb3sigma",
            IntersectionMode::Tight => "tight",
            IntersectionMode::TwoStage => "two_stage",
            IntersectionMode::Exact => "exact",
        }
    }
}

impl std::str::FromStr for IntersectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IntersectionMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown intersection mode `{s}`")))
    }
}

/// Form of the minor-axis predicate in the second stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage2Form {
    /// Discard when `p - r > R_minor`; never drops a truly overlapping tile.
    Conservative,
    /// Discard when `p + r > R_minor`, as literally written; may drop
    /// overlapping tiles.
    Literal,
}

impl std::str::FromStr for Stage2Form {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conservative" => Ok(Stage2Form::Conservative),
            "literal" => Ok(Stage2Form::Literal),
            _ => Err(Error::InvalidArgument(format!(
                "unknown stage-2 form `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthMode {
    /// Opacity-weighted depth divided by accumulated opacity.
    Normalized,
    /// Raw opacity-weighted sum.
    Unnormalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    /// Opacity threshold τ below which a splat is skipped at a pixel.
    pub tau: f64,
    /// Transmittance threshold for early stopping.
    pub t_stop: f64,
    pub early_stop: bool,
    pub intersection_mode: IntersectionMode,
    pub stage2_form: Stage2Form,
    pub cov_dilation: f64,
    pub depth_mode: DepthMode,
    pub background: [f64; 3],
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            tau: 1.0 / 255.0,
            t_stop: 1e-4,
            early_stop: true,
            intersection_mode: IntersectionMode::TwoStage,
            stage2_form: Stage2Form::Conservative,
            cov_dilation: 0.3,
            depth_mode: DepthMode::Normalized,
            background: [0.0; 3],
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "tau {} outside (0, 1)",
                self.tau
            )));
        }
        if !(self.t_stop > 0.0 && self.t_stop < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "t_stop {} outside (0, 1)",
                self.t_stop
            )));
        }
        if !(self.cov_dilation >= 0.0) {
            return Err(Error::InvalidArgument(
                "cov_dilation must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Grid of 16×16 tiles covering an image; tile ids are row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileGrid {
    pub width: u32,
    pub height: u32,
    pub tiles_x: u32,
    pub tiles_y: u32,
}

impl TileGrid {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            tiles_x: width.div_ceil(TILE_SIZE),
            tiles_y: height.div_ceil(TILE_SIZE),
        }
    }

    pub fn for_pose(pose: &CameraPose) -> Self {
        Self::new(pose.width, pose.height)
    }

    pub fn tile_count(&self) -> usize {
        self.tiles_x as usize * self.tiles_y as usize
    }

    pub fn tile_id(&self, tx: u32, ty: u32) -> usize {
        (ty * self.tiles_x + tx) as usize
    }

    pub fn tile_coords(&self, id: usize) -> (u32, u32) {
        (id as u32 % self.tiles_x, id as u32 / self.tiles_x)
    }

    pub fn tile_center(&self, id: usize) -> [f64; 2] {
        let (tx, ty) = self.tile_coords(id);
        let half = TILE_SIZE as f64 / 2.0;
        [
            (tx * TILE_SIZE) as f64 + half,
            (ty * TILE_SIZE) as f64 + half,
        ]
    }

    /// Pixel index ranges (x, y) covered by a tile, clipped to the image.
    pub fn tile_pixels(&self, id: usize) -> (std::ops::Range<u32>, std::ops::Range<u32>) {
        let (tx, ty) = self.tile_coords(id);
        let x0 = tx * TILE_SIZE;
        let y0 = ty * TILE_SIZE;
        (
            x0..(x0 + TILE_SIZE).min(self.width),
            y0..(y0 + TILE_SIZE).min(self.height),
        )
    }

    /// Tile containing a pixel.
    pub fn tile_of_pixel(&self, x: u32, y: u32) -> usize {
        self.tile_id(x / TILE_SIZE, y / TILE_SIZE)
    }

    /// Tiles whose interior overlaps the closed rectangle
    /// `[center - half, center + half]`, clipped to the grid, row-major.
    pub fn tiles_in_rect(&self, center: [f64; 2], half: [f64; 2]) -> Vec<usize> {
        let Some((xs, ys)) = self.tile_span(center, half) else {
            return Vec::new();
        };
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for ty in ys {
            for tx in xs.clone() {
                out.push(self.tile_id(tx, ty));
            }
        }
        out
    }

    fn tile_span(
        &self,
        center: [f64; 2],
        half: [f64; 2],
    ) -> Option<(std::ops::Range<u32>, std::ops::Range<u32>)> {
        let ts = TILE_SIZE as f64;
        let span = |c: f64, h: f64, n: u32| -> Option<std::ops::Range<u32>> {
            let lo = ((c - h) / ts).floor();
            let hi = ((c + h) / ts).ceil() - 1.0;
            let lo = lo.max(0.0);
            let hi = hi.min(n as f64 - 1.0);
            if !(lo <= hi) {
                return None;
            }
            Some(lo as u32..hi as u32 + 1)
        };
        Some((
            span(center[0], half[0], self.tiles_x)?,
            span(center[1], half[1], self.tiles_y)?,
        ))
    }
}

/// A Gaussian projected onto the image plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedGaussian {
    pub id: u32,
    /// Projected center in pixels.
    pub mean: [f64; 2],
    /// Dilated 2D covariance `[xx, xy, yy]` in pixels².
    pub cov: [f64; 3],
    /// Inverse covariance `[xx, xy, yy]`.
    pub conic: [f64; 3],
    /// Camera-space z of the center.
    pub depth: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub e_minor: [f64; 2],
    pub r_major: f64,
    pub r_minor: f64,
    /// Tight half extents (half width, half height) of the τ iso-contour.
    pub bbox: [f64; 2],
    pub color: [f64; 3],
    pub opacity: f64,
}

/// Why a Gaussian did not produce a splat.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    BehindCamera,
    Degenerate,
    /// Opacity at or below τ: contributes to no pixel.
    Transparent,
}

/// Conservative upper bound on the largest eigenvalue of the projected
/// covariance, from the Frobenius norm of the projection Jacobian.
fn lambda_max_bound(g: &Gaussian3D, cam: &Vector3<f64>, pose: &CameraPose, dilation: f64) -> f64 {
    let z = cam.z;
    let (ux, uy) = (cam.x / z, cam.y / z);
    let j2 = (pose.fx * pose.fx * (1.0 + ux * ux) + pose.fy * pose.fy * (1.0 + uy * uy)) / (z * z);
    j2 * g.max_scale() * g.max_scale() + dilation
}

/// Keeps Gaussians in front of the near plane whose projected center lies
/// within the image expanded by `3·√λmax` on every side. Order is preserved.
pub fn frustum_cull(
    set: &GaussianSet,
    pose: &CameraPose,
    cfg: &RenderConfig,
) -> Vec<(u32, Vector3<f64>)> {
    set.gaussians
        .iter()
        .enumerate()
        .filter_map(|(i, g)| {
            let cam = pose.world_to_camera(&g.position);
            if !(cam.z > pose.near) {
                return None;
            }
            let margin = 3.0 * lambda_max_bound(g, &cam, pose, cfg.cov_dilation).sqrt();
            let u = pose.fx * cam.x / cam.z + pose.cx;
            let v = pose.fy * cam.y / cam.z + pose.cy;
            let inside = u >= -margin
                && u <= pose.width as f64 + margin
                && v >= -margin
                && v <= pose.height as f64 + margin;
            inside.then_some((i as u32, cam))
        })
        .collect()
}

/// Closed-form eigen-decomposition of a symmetric 2×2 matrix `[xx, xy, yy]`.
///
/// Returns `(λ1, λ2, e_minor)` with `λ1 ≥ λ2 > 0`; `e_minor` is the unit
/// eigenvector of `λ2`, signed so its y component is positive (x positive
/// when y is zero). Repeated roots give `(0, 1)`.
pub fn eigen2x2(cov: [f64; 3]) -> Result<(f64, f64, [f64; 2])> {
    let [a, b, c] = cov;
    let mean = 0.5 * (a + c);
    let half_diff = 0.5 * (a - c);
    let d = (half_diff * half_diff + b * b).sqrt();
    let (l1, l2) = (mean + d, mean - d);
    if !(l2 > 0.0) {
        return Err(Error::DegenerateCovariance { lambda2: l2 });
    }
    if d <= 1e-12 * mean.abs() {
        return Ok((l1, l2, [0.0, 1.0]));
    }
    // Two candidate eigenvectors of λ2; take the better conditioned one.
    let v1 = [b, l2 - a];
    let v2 = [l2 - c, b];
    let n1 = v1[0].hypot(v1[1]);
    let n2 = v2[0].hypot(v2[1]);
    let (v, n) = if n1 >= n2 { (v1, n1) } else { (v2, n2) };
    let mut e = [v[0] / n, v[1] / n];
    if e[1] < 0.0 || (e[1] == 0.0 && e[0] < 0.0) {
        e = [-e[0], -e[1]];
    }
    Ok((l1, l2, e))
}

/// Distance at which `o·exp(-d²/2λ)` decays to τ; zero when `o ≤ τ`.
pub fn radius_at_threshold(opacity: f64, lambda: f64, tau: f64) -> f64 {
    (2.0 * (opacity / tau).ln().max(0.0) * lambda).sqrt()
}

/// Effective semi-axes `(R_major, R_minor)`; `None` is the cull signal for a
/// splat whose opacity never exceeds τ.
pub fn effective_radii(opacity: f64, lambda1: f64, lambda2: f64, tau: f64) -> Option<(f64, f64)> {
    if opacity <= tau {
        return None;
    }
    Some((
        radius_at_threshold(opacity, lambda1, tau),
        radius_at_threshold(opacity, lambda2, tau),
    ))
}

/// Tight half extents of the τ iso-opacity ellipse:
/// `√(2 ln(o/τ)·Σ'xx)` and `√(2 ln(o/τ)·Σ'yy)`.
pub fn tight_bbox(pg: &ProjectedGaussian, tau: f64) -> [f64; 2] {
    [
        radius_at_threshold(pg.opacity, pg.cov[0], tau),
        radius_at_threshold(pg.opacity, pg.cov[2], tau),
    ]
}

/// EWA projection of one Gaussian.
pub fn project_gaussian(
    id: u32,
    g: &Gaussian3D,
    pose: &CameraPose,
    sh_degree: u8,
    cfg: &RenderConfig,
) -> std::result::Result<ProjectedGaussian, DropReason> {
    let cam = pose.world_to_camera(&g.position);
    let z = cam.z;
    if !(z > 0.0) {
        return Err(DropReason::BehindCamera);
    }
    let jac = Matrix2x3::new(
        pose.fx / z,
        0.0,
        -pose.fx * cam.x / (z * z),
        0.0,
        pose.fy / z,
        -pose.fy * cam.y / (z * z),
    );
    let t = jac * pose.rotation;
    let cov2 = t * g.covariance() * t.transpose();
    let cov = [
        cov2[(0, 0)] + cfg.cov_dilation,
        0.5 * (cov2[(0, 1)] + cov2[(1, 0)]),
        cov2[(1, 1)] + cfg.cov_dilation,
    ];
    if !cov.iter().all(|v| v.is_finite()) {
        return Err(DropReason::Degenerate);
    }
    let (lambda1, lambda2, e_minor) = eigen2x2(cov).map_err(|_| DropReason::Degenerate)?;
    let det = cov[0] * cov[2] - cov[1] * cov[1];
    if !(det > 0.0) {
        return Err(DropReason::Degenerate);
    }
    let (r_major, r_minor) =
        effective_radii(g.opacity, lambda1, lambda2, cfg.tau).ok_or(DropReason::Transparent)?;
    let mean = [pose.fx * cam.x / z + pose.cx, pose.fy * cam.y / z + pose.cy];
    let dir = (g.position - pose.center()).normalize();
    let color = sh_to_color(&g.sh, &dir, sh_degree).map_err(|_| DropReason::Degenerate)?;
    let mut pg = ProjectedGaussian {
        id,
        mean,
        cov,
        conic: [cov[2] / det, -cov[1] / det, cov[0] / det],
        depth: z,
        lambda1,
        lambda2,
        e_minor,
        r_major,
        r_minor,
        bbox: [0.0; 2],
        color,
        opacity: g.opacity,
    };
    pg.bbox = tight_bbox(&pg, cfg.tau);
    Ok(pg)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionStats {
    pub gaussians_in: u64,
    pub frustum_culled: u64,
    pub degenerate: u64,
    pub transparent: u64,
}

impl ProjectionStats {
    pub fn culled(&self) -> u64 {
        self.frustum_culled + self.degenerate + self.transparent
    }
}

/// Frustum culling followed by projection. Output is in id order.
pub fn project_scene(
    set: &GaussianSet,
    pose: &CameraPose,
    cfg: &RenderConfig,
) -> (Vec<ProjectedGaussian>, ProjectionStats) {
    use rayon::prelude::*;

    let kept = frustum_cull(set, pose, cfg);
    let results: Vec<_> = kept
        .par_iter()
        .map(|(id, _)| {
            project_gaussian(*id, &set.gaussians[*id as usize], pose, set.sh_degree, cfg)
        })
        .collect();
    let mut stats = ProjectionStats {
        gaussians_in: set.len() as u64,
        frustum_culled: (set.len() - kept.len()) as u64,
        ..Default::default()
    };
    let mut out = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(pg) => out.push(pg),
            Err(DropReason::Transparent) => stats.transparent += 1,
            Err(DropReason::BehindCamera) => stats.frustum_culled += 1,
            Err(DropReason::Degenerate) => stats.degenerate += 1,
        }
    }
    (out, stats)
}

/// Baseline test: tiles overlapping the square of half extent `3·√λ1`.
pub fn aabb_tiles_baseline(pg: &ProjectedGaussian, grid: &TileGrid) -> Vec<usize> {
    let h = 3.0 * pg.lambda1.sqrt();
    grid.tiles_in_rect(pg.mean, [h, h])
}

/// First stage only: tiles overlapping the tight iso-opacity box.
pub fn tight_tiles(pg: &ProjectedGaussian, grid: &TileGrid) -> Vec<usize> {
    grid.tiles_in_rect(pg.mean, pg.bbox)
}

/// Distance from a tile center to the major axis, i.e. the projection of the
/// center offset onto the minor axis.
pub fn minor_axis_offset(pg: &ProjectedGaussian, tile_center: [f64; 2]) -> f64 {
    let dx = tile_center[0] - pg.mean[0];
    let dy = tile_center[1] - pg.mean[1];
    (dx * pg.e_minor[0] + dy * pg.e_minor[1]).abs()
}

/// Second-stage predicate: true when the tile is classified non-intersecting.
pub fn stage2_discards(pg: &ProjectedGaussian, tile_center: [f64; 2], form: Stage2Form) -> bool {
    let p = minor_axis_offset(pg, tile_center);
    match form {
        Stage2Form::Conservative => p - TILE_CIRCUMRADIUS > pg.r_minor,
        Stage2Form::Literal => p + TILE_CIRCUMRADIUS > pg.r_minor,
    }
}

/// Tight box, then the minor-axis distance predicate per tile.
pub fn two_stage_tiles(pg: &ProjectedGaussian, grid: &TileGrid, form: Stage2Form) -> Vec<usize> {
    let mut tiles = tight_tiles(pg, grid);
    tiles.retain(|&t| !stage2_discards(pg, grid.tile_center(t), form));
    tiles
}

/// Opacity of a splat at pixel position `p`, clamped to 0.99.
#[inline]
pub fn pixel_density(pg: &ProjectedGaussian, p: [f64; 2]) -> f64 {
    let dx = p[0] - pg.mean[0];
    let dy = p[1] - pg.mean[1];
    let power =
        -0.5 * (pg.conic[0] * dx * dx + 2.0 * pg.conic[1] * dx * dy + pg.conic[2] * dy * dy);
    (pg.opacity * power.exp()).min(0.99)
}

/// Oracle: tiles containing at least one pixel center where density ≥ τ.
/// Only tiles of the tight box are scanned.
pub fn exact_tiles(pg: &ProjectedGaussian, grid: &TileGrid, tau: f64) -> Vec<usize> {
    let mut tiles = tight_tiles(pg, grid);
    tiles.retain(|&t| {
        let (xs, ys) = grid.tile_pixels(t);
        ys.into_iter().any(|y| {
            xs.clone()
                .any(|x| pixel_density(pg, [x as f64 + 0.5, y as f64 + 0.5]) >= tau)
        })
    });
    tiles
}

/// Dispatches to the configured intersection test.
pub fn intersect_tiles(pg: &ProjectedGaussian, grid: &TileGrid, cfg: &RenderConfig) -> Vec<usize> {
    match cfg.intersection_mode {
        IntersectionMode::Aabb3Sigma => aabb_tiles_baseline(pg, grid),
        IntersectionMode::Tight => tight_tiles(pg, grid),
        IntersectionMode::TwoStage => two_stage_tiles(pg, grid, cfg.stage2_form),
        IntersectionMode::Exact => exact_tiles(pg, grid, cfg.tau),
    }
}

/// Builds a white splat at unit depth directly from its 2D parameters.
/// Radii are zero when `opacity ≤ tau`.
pub fn splat_from_2d(
    mean: [f64; 2],
    cov: [f64; 3],
    opacity: f64,
    tau: f64,
) -> Result<ProjectedGaussian> {
    let (lambda1, lambda2, e_minor) = eigen2x2(cov)?;
    let (r_major, r_minor) = effective_radii(opacity, lambda1, lambda2, tau).unwrap_or((0.0, 0.0));
    let det = cov[0] * cov[2] - cov[1] * cov[1];
    let mut pg = ProjectedGaussian {
        id: 0,
        mean,
        cov,
        conic: [cov[2] / det, -cov[1] / det, cov[0] / det],
        depth: 1.0,
        lambda1,
        lambda2,
        e_minor,
        r_major,
        r_minor,
        bbox: [0.0; 2],
        color: [1.0, 1.0, 1.0],
        opacity,
    };
    pg.bbox = tight_bbox(&pg, tau);
    Ok(pg)
}


#[cfg(test)]
mod tests {
    use super::test_support::splat;
    use super::*;
    use nalgebra::{Matrix3, UnitQuaternion};

    const TAU: f64 = 1.0 / 255.0;

    fn axis_pose() -> CameraPose {
        CameraPose::new(
            Matrix3::identity(),
            Vector3::zeros(),
            300.0,
            250.0,
            128.0,
            128.0,
            256,
            256,
            0.1,
        )
        .unwrap()
    }

    fn gaussian(position: Vector3<f64>, scale: Vector3<f64>) -> Gaussian3D {
        Gaussian3D {
            position,
            scale,
            rotation: UnitQuaternion::identity(),
            opacity: 0.8,
            sh: [0.0; 48],
        }
    }

    #[test]
    fn eigen_examples() {
        let (l1, l2, e) = eigen2x2([4.0, 0.0, 1.0]).unwrap();
        assert_eq!((l1, l2, e), (4.0, 1.0, [0.0, 1.0]));
        let (l1, l2, e) = eigen2x2([2.5, 1.5, 2.5]).unwrap();
        assert!((l1 - 4.0).abs() < 1e-12 && (l2 - 1.0).abs() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((e[0].abs() - s).abs() < 1e-12 && (e[1].abs() - s).abs() < 1e-12);
        assert!(e[0] * e[1] < 0.0);
        assert_eq!(eigen2x2([3.0, 0.0, 3.0]).unwrap(), (3.0, 3.0, [0.0, 1.0]));
        assert_eq!(eigen2x2([1.0, 0.0, 4.0]).unwrap().2, [1.0, 0.0]);
        assert!(matches!(
            eigen2x2([1.0, 2.0, 1.0]),
            Err(Error::DegenerateCovariance { .. })
        ));
    }

    #[test]
    fn radii_examples() {
        assert!(effective_radii(TAU, 1.0, 1.0, TAU).is_none());
        assert_eq!(radius_at_threshold(TAU, 1.0, TAU), 0.0);
        let (a, b) = effective_radii(1.0, 1.0, 1.0, TAU).unwrap();
        assert!((a - 3.329_042_969).abs() < 1e-6 && a == b);
        let (a, b) = effective_radii(1.0, 4.0, 1.0, TAU).unwrap();
        assert!((a - 2.0 * b).abs() < 1e-12);
    }

    #[test]
    fn tight_bbox_examples() {
        let pg = splat([0.0, 0.0], [5.0, 0.0, 5.0], 0.7, TAU);
        assert!((pg.bbox[0] - pg.r_major).abs() < 1e-12 && (pg.bbox[1] - pg.r_major).abs() < 1e-12);
        let pg = splat([0.0, 0.0], [4.0, 0.0, 1.0], 1.0, TAU);
        assert!((pg.bbox[0] - 6.658_085_938).abs() < 1e-6);
        assert!((pg.bbox[1] - 3.329_042_969).abs() < 1e-6);
        let pg = splat([0.0, 0.0], [2.5, 1.5, 2.5], 1.0, TAU);
        assert!(
            (pg.bbox[0] - 5.263_679_106).abs() < 1e-6 && (pg.bbox[0] - pg.bbox[1]).abs() < 1e-12
        );
    }

    #[test]
    fn frustum_cull_examples() {
        let pose = axis_pose();
        let set = GaussianSet {
            gaussians: vec![
                gaussian(Vector3::new(0.0, 0.0, -1.0), Vector3::repeat(0.01)),
                gaussian(Vector3::new(0.0, 0.0, 0.2), Vector3::repeat(0.01)),
                // u = 300·x/z + 128 = 128 + 256 + 5000
                gaussian(
                    Vector3::new(5256.0 / 300.0, 0.0, 1.0),
                    Vector3::repeat(1e-4),
                ),
            ],
            sh_degree: 0,
        };
        let kept = frustum_cull(&set, &pose, &RenderConfig::default());
        assert_eq!(kept.iter().map(|k| k.0).collect::<Vec<_>>(), vec![1]);
        assert!((kept[0].1.z - 0.2).abs() < 1e-12);
    }

    #[test]
    fn isotropic_on_axis_closed_form() {
        let pose = axis_pose();
        let cfg = RenderConfig::default();
        let (s, z) = (0.05, 2.0);
        let g = gaussian(Vector3::new(0.0, 0.0, z), Vector3::repeat(s));
        let pg = project_gaussian(0, &g, &pose, 0, &cfg).unwrap();
        assert!((pg.cov[0] - ((s * 300.0 / z).powi(2) + 0.3)).abs() < 1e-9);
        assert!((pg.cov[2] - ((s * 250.0 / z).powi(2) + 0.3)).abs() < 1e-9);
        assert!(pg.cov[1].abs() < 1e-12);
        assert_eq!(pg.mean, [128.0, 128.0]);
        assert_eq!(pg.depth, z);

        let cfg0 = RenderConfig {
            cov_dilation: 0.0,
            ..cfg
        };
        let near = project_gaussian(0, &g, &pose, 0, &cfg0).unwrap();
        let far = project_gaussian(
            0,
            &gaussian(Vector3::new(0.0, 0.0, 2.0 * z), Vector3::repeat(s)),
            &pose,
            0,
            &cfg0,
        )
        .unwrap();
        assert!((far.cov[0].sqrt() - 0.5 * near.cov[0].sqrt()).abs() < 1e-12);
    }

    #[test]
    fn identity_quaternion_gives_diagonal_covariance() {
        let g = gaussian(Vector3::zeros(), Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(
            g.covariance(),
            Matrix3::from_diagonal(&Vector3::new(1.0, 4.0, 9.0))
        );
    }

    #[test]
    fn transparent_gaussian_is_dropped() {
        let mut g = gaussian(Vector3::new(0.0, 0.0, 1.0), Vector3::repeat(0.1));
        g.opacity = TAU;
        let r = project_gaussian(0, &g, &axis_pose(), 0, &RenderConfig::default());
        assert_eq!(r, Err(DropReason::Transparent));
    }

    #[test]
    fn aabb_examples() {
        let grid = TileGrid::new(256, 256);
        let pg = splat([88.0, 88.0], [1.0 / 9.0, 0.0, 1.0 / 9.0], 1.0, TAU);
        assert_eq!(aabb_tiles_baseline(&pg, &grid), vec![grid.tile_id(5, 5)]);
        let pg = splat([16.0, 16.0], [1.0 / 9.0, 0.0, 1.0 / 9.0], 1.0, TAU);
        assert_eq!(aabb_tiles_baseline(&pg, &grid).len(), 4);
        let pg = splat([100.0, 52.0], [25.0, 0.0, 4.0], 1.0, TAU);
        let tiles = aabb_tiles_baseline(&pg, &grid);
        let mut expect = Vec::new();
        for ty in 2..=4 {
            for tx in 5..=7 {
                expect.push(grid.tile_id(tx, ty));
            }
        }
        assert_eq!(tiles, expect);
    }

    #[test]
    fn stage2_examples() {
        // λ1 = R_major²/(2 ln 255) etc. so that R_major = 40, R_minor = 4.
        let k = 2.0 * 255f64.ln();
        let pg = splat([128.0, 128.0], [1600.0 / k, 0.0, 16.0 / k], 1.0, TAU);
        assert!((pg.r_major - 40.0).abs() < 1e-9 && (pg.r_minor - 4.0).abs() < 1e-9);
        assert_eq!(pg.e_minor, [0.0, 1.0]);
        assert!(stage2_discards(
            &pg,
            [128.0, 168.0],
            Stage2Form::Conservative
        ));
        assert!(!stage2_discards(
            &pg,
            [168.0, 128.0],
            Stage2Form::Conservative
        ));
        assert!(!stage2_discards(
            &pg,
            [128.0, 128.0],
            Stage2Form::Conservative
        ));
        // Literal form keeps the center tile only when R_minor exceeds r.
        assert!(stage2_discards(&pg, [128.0, 128.0], Stage2Form::Literal));
        let wide = splat([128.0, 128.0], [1600.0 / k, 0.0, 400.0 / k], 1.0, TAU);
        assert!(!stage2_discards(&wide, [128.0, 128.0], Stage2Form::Literal));
    }

    #[test]
    fn exact_examples() {
        let grid = TileGrid::new(64, 64);
        // opacity = τ: density never reaches τ off the center
        let mut pg = splat([20.3, 20.7], [4.0, 0.0, 4.0], 0.5, TAU);
        pg.opacity = TAU;
        assert!(exact_tiles(&pg, &grid, TAU).is_empty());
        let pg = splat([24.0, 24.0], [2.0, 0.0, 2.0], 1.0, TAU);
        assert!(pg.r_major < 8.0);
        assert_eq!(exact_tiles(&pg, &grid, TAU), vec![grid.tile_id(1, 1)]);
    }

    #[test]
    fn tiles_in_rect_clips_to_grid() {
        let grid = TileGrid::new(32, 32);
        assert!(grid.tiles_in_rect([-100.0, 10.0], [5.0, 5.0]).is_empty());
        assert_eq!(grid.tiles_in_rect([-2.0, 10.0], [5.0, 5.0]), vec![0]);
        assert_eq!(grid.tiles_in_rect([16.0, 16.0], [100.0, 100.0]).len(), 4);
    }
}
