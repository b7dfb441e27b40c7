//! Desk-scale fixtures shared by tests, benchmarks and the CLI: a seeded
//! scene with a backdrop, a smooth camera path through it, and skewed tile
//! workloads for the scheduler.

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::scene::{
    generate_synthetic_scene, interpolate_trajectory, CameraPose, Gaussian3D, GaussianSet,
    DEFAULT_FPS, DEFAULT_OMEGA_MAX, DEFAULT_V_MAX, SH_COEFFS,
};
use crate::scheduler::TileLoad;
use crate::sh::SH_C0;

pub const DESK_SPLATS: usize = 5000;
pub const DESK_SIZE: u32 = 256;
pub const DESK_FOCAL: f64 = 256.0;
pub const DESK_EXTENT: f64 = 2.0;
/// Backdrop grid edge; the wall uses `WALL_GRID²` of the splats.
const WALL_GRID: usize = 24;
const WALL_Z: f64 = 3.0;
const WALL_HALF: f64 = 6.0;
const CAMERA_Z: f64 = -4.0;

/// Random cloud in front of an opaque, smoothly colored wall, so every
/// pixel of the desk views has a defined depth.
pub fn desk_scene(seed: u64) -> GaussianSet {
    let wall_count = WALL_GRID * WALL_GRID;
    let mut set = generate_synthetic_scene(seed, DESK_SPLATS - wall_count, DESK_EXTENT);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0a11);
    let spacing = 2.0 * WALL_HALF / (WALL_GRID - 1) as f64;
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    for j in 0..WALL_GRID {
        for i in 0..WALL_GRID {
            let x = -WALL_HALF + i as f64 * spacing;
            let y = -WALL_HALF + j as f64 * spacing;
            let rgb = [
                0.5 + 0.35 * (0.6 * x + phase).sin(),
                0.5 + 0.35 * (0.5 * y - phase).cos(),
                0.5 + 0.25 * (0.3 * (x + y)).sin(),
            ];
            let mut sh = [0.0; SH_COEFFS];
            for (c, v) in sh.iter_mut().zip(rgb) {
                *c = (v - 0.5) / SH_C0;
            }
            set.gaussians.push(Gaussian3D {
                position: Vector3::new(x, y, WALL_Z + rng.gen_range(-0.05..0.05)),
                scale: Vector3::new(0.45 * spacing, 0.45 * spacing, 0.02),
                rotation: UnitQuaternion::from_euler_angles(0.0, 0.0, rng.gen_range(-0.3..0.3)),
                opacity: 0.98,
                sh,
            });
        }
    }
    set
}

/// Desk camera at `eye` looking at the scene center.
pub fn desk_pose(eye: Vector3<f64>) -> CameraPose {
    CameraPose::look_at(
        eye,
        Vector3::zeros(),
        DESK_FOCAL,
        DESK_FOCAL,
        DESK_SIZE,
        DESK_SIZE,
        0.05,
    )
    .expect("desk pose is valid")
}

/// Reference view used for single-frame checks.
pub fn desk_view() -> CameraPose {
    desk_pose(Vector3::new(0.3, -0.4, CAMERA_Z))
}

/// End points of a sideways dolly whose chord is `span` long, both looking
/// at the scene center.
pub fn desk_keyposes(span: f64) -> [CameraPose; 2] {
    let dir = Vector3::new(1.0, 0.0, 0.25).normalize();
    let mid = Vector3::new(0.0, -0.4, CAMERA_Z);
    [
        desk_pose(mid - dir * (span / 2.0)),
        desk_pose(mid + dir * (span / 2.0)),
    ]
}

/// `frames` poses along the desk dolly, one default speed-capped step apart.
pub fn desk_trajectory(frames: usize) -> Result<Vec<CameraPose>> {
    let span = DEFAULT_V_MAX / DEFAULT_FPS * frames.saturating_sub(1) as f64;
    let keys = desk_keyposes(span);
    if frames <= 1 {
        return Ok(vec![keys[0].clone(); frames]);
    }
    let traj = interpolate_trajectory(&keys, DEFAULT_FPS, DEFAULT_V_MAX, DEFAULT_OMEGA_MAX)?;
    Ok(traj.poses)
}

pub const WORKLOAD_TILES: u32 = 16;

/// Spatially clustered, Zipf-skewed per-tile pair counts on a 16×16 tile
/// grid. Tiles are ranked by distance to a random hot spot (with jitter)
/// and rank `k` gets a load proportional to `k^-s`.
pub fn zipf_workload(seed: u64) -> Vec<TileLoad> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = WORKLOAD_TILES;
    let hot = [rng.gen_range(0.0..n as f64), rng.gen_range(0.0..n as f64)];
    let exponent = rng.gen_range(0.45..0.55);
    let peak = rng.gen_range(2000.0..6000.0);
    let mut tiles: Vec<(f64, u32, u32)> = (0..n * n)
        .map(|i| {
            let (x, y) = (i % n, i / n);
            let d = ((x as f64 + 0.5 - hot[0]).powi(2) + (y as f64 + 0.5 - hot[1]).powi(2)).sqrt();
            (d + rng.gen_range(0.0..1.5), x, y)
        })
        .collect();
    tiles.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.2, a.1).cmp(&(b.2, b.1))));
    tiles
        .into_iter()
        .enumerate()
        .map(|(rank, (_, tx, ty))| TileLoad {
            tile: (ty * n + tx) as usize,
            tx,
            ty,
            load: (peak * ((rank + 1) as f64).powf(-exponent)).round() as u64 + 1,
        })
        .collect()
}
