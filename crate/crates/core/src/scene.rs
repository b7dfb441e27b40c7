//! Scene primitives, cameras and trajectories.
//!
//! A scene is an ordered list of anisotropic 3D Gaussians whose index is the
//! persistent id for the whole run. Cameras use the pinhole model with the
//! x-right, y-down, z-forward convention; pixel centers sit at integer + 0.5.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sh::SH_C0;
use crate::TILE_SIZE;

/// Number of spherical-harmonic scalars per Gaussian (3 DC + 45 rest).
pub const SH_COEFFS: usize = 48;

#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian3D {
    pub position: Vector3<f64>,
    /// Linear (activated) scale along the local axes.
    pub scale: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
    /// Activated opacity in [0, 1].
    pub opacity: f64,
    /// `sh[0..3]` holds the DC term per channel; `sh[3..48]` holds the
    /// higher-order terms channel-major (15 per channel), as stored on disk.
    pub sh: [f64; SH_COEFFS],
}

impl Gaussian3D {
    /// 3D covariance `R · diag(scale²) · Rᵀ`.
    pub fn covariance(&self) -> Matrix3<f64> {
        let r = self.rotation.to_rotation_matrix().into_inner();
        let s2 = Matrix3::from_diagonal(&self.scale.component_mul(&self.scale));
        r * s2 * r.transpose()
    }

    pub fn max_scale(&self) -> f64 {
        self.scale.x.max(self.scale.y).max(self.scale.z)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GaussianSet {
    pub gaussians: Vec<Gaussian3D>,
    pub sh_degree: u8,
}

impl GaussianSet {
    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }
}

/// World-to-camera pose plus pinhole intrinsics.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub near: f64,
}

fn pad_to_tile(v: u32) -> u32 {
    v.div_ceil(TILE_SIZE) * TILE_SIZE
}

impl CameraPose {
    /// Validates the pose and pads the image size up to whole tiles.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        near: f64,
    ) -> Result<Self> {
        let err = (rotation.transpose() * rotation - Matrix3::identity())
            .abs()
            .max();
        if !err.is_finite() || err > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "camera rotation is not orthonormal (|RᵀR - I| = {err:e})"
            )));
        }
        if rotation.determinant() < 0.0 {
            return Err(Error::InvalidArgument(
                "camera rotation is a reflection".into(),
            ));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("image size must be positive".into()));
        }
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::InvalidArgument(
                "focal lengths must be positive".into(),
            ));
        }
        if !(near > 0.0) {
            return Err(Error::InvalidArgument("near plane must be positive".into()));
        }
        Ok(Self {
            rotation,
            translation,
            fx,
            fy,
            cx,
            cy,
            width: pad_to_tile(width),
            height: pad_to_tile(height),
            near,
        })
    }

    /// Camera at `eye` looking at `target`; world -y is treated as up.
    #[allow(clippy::too_many_arguments)]
    pub fn look_at(
        eye: Vector3<f64>,
        target: Vector3<f64>,
        fx: f64,
        fy: f64,
        width: u32,
        height: u32,
        near: f64,
    ) -> Result<Self> {
        let forward = (target - eye).normalize();
        let up = Vector3::new(0.0, -1.0, 0.0);
        let mut right = forward.cross(&up);
        if right.norm() < 1e-9 {
            right = forward.cross(&Vector3::z());
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let rotation =
            Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * eye);
        Self::new(
            rotation,
            translation,
            fx,
            fy,
            width as f64 / 2.0,
            height as f64 / 2.0,
            width,
            height,
            near,
        )
    }

    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn camera_to_world(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p - self.translation)
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.rotation))
    }

    pub fn same_intrinsics(&self, other: &CameraPose) -> bool {
        self.fx == other.fx
            && self.fy == other.fy
            && self.cx == other.cx
            && self.cy == other.cy
            && self.width == other.width
            && self.height == other.height
            && self.near == other.near
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub poses: Vec<CameraPose>,
    pub fps: f64,
    /// One full render every `full_render_period` frames (window + 1).
    pub full_render_period: usize,
}

/// Evaluates the view-dependent color of one Gaussian.
pub use crate::sh::sh_to_color;

/// Deterministic desk-scale scene: positions uniform in a centered cube of
/// side `extent`, log-uniform anisotropic scales, degree-0 colors.
pub fn generate_synthetic_scene(seed: u64, count: usize, extent: f64) -> GaussianSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = extent / 2.0;
    let (lo, hi) = ((0.005 * extent).ln(), (0.1 * extent).ln());
    let dc_range = 0.5 / SH_C0;
    let gaussians = (0..count)
        .map(|_| {
            let position = Vector3::new(
                rng.gen_range(-half..=half),
                rng.gen_range(-half..=half),
                rng.gen_range(-half..=half),
            );
            let scale = Vector3::new(
                rng.gen_range(lo..=hi).exp(),
                rng.gen_range(lo..=hi).exp(),
                rng.gen_range(lo..=hi).exp(),
            );
            let rotation = random_rotation(&mut rng);
            let opacity = rng.gen_range(0.2..=1.0);
            let mut sh = [0.0; SH_COEFFS];
            for c in sh.iter_mut().take(3) {
                *c = rng.gen_range(-dc_range..=dc_range);
            }
            Gaussian3D {
                position,
                scale,
                rotation,
                opacity,
                sh,
            }
        })
        .collect();
    GaussianSet {
        gaussians,
        sh_degree: 0,
    }
}

// Shoemake's uniform sampling of SO(3).
fn random_rotation(rng: &mut impl Rng) -> UnitQuaternion<f64> {
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let tau = std::f64::consts::TAU;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let q = nalgebra::Quaternion::new(
        b * (tau * u3).cos(),
        a * (tau * u2).sin(),
        a * (tau * u2).cos(),
        b * (tau * u3).sin(),
    );
    UnitQuaternion::from_quaternion(q)
}

/// Default motion caps: 90 FPS, 1.8 m/s, 90 deg/s.
pub const DEFAULT_FPS: f64 = 90.0;
pub const DEFAULT_V_MAX: f64 = 1.8;
pub const DEFAULT_OMEGA_MAX: f64 = 90.0;

/// Geodesic angle in degrees between two world-to-camera rotations.
pub fn rotation_delta_deg(a: &CameraPose, b: &CameraPose) -> f64 {
    a.quaternion().angle_to(&b.quaternion()).to_degrees()
}

/// Distance between camera centers.
pub fn translation_delta(a: &CameraPose, b: &CameraPose) -> f64 {
    (a.center() - b.center()).norm()
}

/// Densifies key poses so that no step exceeds `v_max / fps` in camera
/// center travel or `omega_max / fps` degrees of rotation. Camera centers are
/// interpolated linearly and rotations by slerp.
pub fn interpolate_trajectory(
    keyposes: &[CameraPose],
    fps: f64,
    v_max: f64,
    omega_max: f64,
) -> Result<Trajectory> {
    if keyposes.len() < 2 {
        return Err(Error::InvalidArgument(
            "trajectory interpolation needs at least two key poses".into(),
        ));
    }
    if !(fps > 0.0 && v_max > 0.0 && omega_max > 0.0) {
        return Err(Error::InvalidArgument(
            "fps, v_max and omega_max must be positive".into(),
        ));
    }
    if let Some(bad) = keyposes.iter().find(|p| !p.same_intrinsics(&keyposes[0])) {
        return Err(Error::InvalidArgument(format!(
            "key poses must share intrinsics (found {}x{} vs {}x{})",
            bad.width, bad.height, keyposes[0].width, keyposes[0].height
        )));
    }

    let step_t = v_max / fps;
    let step_r = omega_max / fps;
    let mut poses = vec![keyposes[0].clone()];
    for pair in keyposes.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let dt = translation_delta(a, b);
        let dr = rotation_delta_deg(a, b);
        // Tolerate rounding so already-dense inputs map to themselves.
        // Every key pose is kept, so a repeated pose holds the camera still.
        let steps = ((dt / step_t) - 1e-9)
            .ceil()
            .max((dr / step_r - 1e-9).ceil())
            .max(1.0) as usize;
        let (ca, cb) = (a.center(), b.center());
        let (qa, qb) = (a.quaternion(), b.quaternion());
        for i in 1..=steps {
            let s = i as f64 / steps as f64;
            if i == steps {
                poses.push(b.clone());
                continue;
            }
            let center = ca.lerp(&cb, s);
            let q = qa.try_slerp(&qb, s, 1e-12).unwrap_or(qa);
            let rotation = q.to_rotation_matrix().into_inner();
            poses.push(CameraPose {
                rotation,
                translation: -(rotation * center),
                ..a.clone()
            });
        }
    }
    Ok(Trajectory {
        poses,
        fps,
        full_render_period: 6,
    })
}

/// One camera entry of the trajectory / key-pose JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoseRecord {
    /// World-to-camera rotation, row-major.
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub near: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryFile {
    pub fps: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub poses: Vec<PoseRecord>,
}

impl From<&CameraPose> for PoseRecord {
    fn from(p: &CameraPose) -> Self {
        let r = &p.rotation;
        PoseRecord {
            rotation: [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
            translation: [p.translation.x, p.translation.y, p.translation.z],
            fx: p.fx,
            fy: p.fy,
            cx: p.cx,
            cy: p.cy,
            width: p.width,
            height: p.height,
            near: p.near,
        }
    }
}

impl TryFrom<&PoseRecord> for CameraPose {
    type Error = Error;

    fn try_from(r: &PoseRecord) -> Result<Self> {
        CameraPose::new(
            Matrix3::from_row_slice(&r.rotation),
            Vector3::from_column_slice(&r.translation),
            r.fx,
            r.fy,
            r.cx,
            r.cy,
            r.width,
            r.height,
            r.near,
        )
    }
}

impl TrajectoryFile {
    pub fn from_poses(poses: &[CameraPose], fps: f64, v_max: f64, omega_max: f64) -> Self {
        TrajectoryFile {
            fps,
            v_max,
            omega_max,
            poses: poses.iter().map(PoseRecord::from).collect(),
        }
    }

    pub fn camera_poses(&self) -> Result<Vec<CameraPose>> {
        self.poses.iter().map(CameraPose::try_from).collect()
    }

    /// Parses key poses and densifies them with the file's motion caps.
    /// A single pose yields a one-frame trajectory.
    pub fn to_trajectory(&self) -> Result<Trajectory> {
        let poses = self.camera_poses()?;
        match poses.len() {
            0 => Err(Error::InvalidArgument(
                "trajectory file has no poses".into(),
            )),
            1 => Ok(Trajectory {
                poses,
                fps: self.fps,
                full_render_period: 6,
            }),
            _ => interpolate_trajectory(&poses, self.fps, self.v_max, self.omega_max),
        }
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pose_at(center: Vector3<f64>, rotation: Matrix3<f64>) -> CameraPose {
        CameraPose::new(
            rotation,
            -(rotation * center),
            200.0,
            200.0,
            64.0,
            64.0,
            128,
            128,
            0.1,
        )
        .unwrap()
    }

    #[test]
    fn pose_rejects_non_orthonormal_rotation() {
        let r = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(CameraPose::new(r, Vector3::zeros(), 1.0, 1.0, 0.0, 0.0, 16, 16, 0.1).is_err());
    }

    #[test]
    fn pose_pads_to_tiles() {
        let p = CameraPose::new(
            Matrix3::identity(),
            Vector3::zeros(),
            1.0,
            1.0,
            0.0,
            0.0,
            100,
            17,
            0.1,
        )
        .unwrap();
        assert_eq!((p.width, p.height), (112, 32));
    }

    #[test]
    fn look_at_down_z_is_identity() {
        let p = CameraPose::look_at(Vector3::zeros(), Vector3::z(), 1.0, 1.0, 16, 16, 0.1).unwrap();
        assert!((p.rotation - Matrix3::identity()).abs().max() < 1e-12);
        let q = CameraPose::look_at(
            Vector3::new(3.0, 1.0, -2.0),
            Vector3::zeros(),
            1.0,
            1.0,
            16,
            16,
            0.1,
        )
        .unwrap();
        let c = q.world_to_camera(&Vector3::zeros());
        assert!(c.x.abs() < 1e-12 && c.y.abs() < 1e-12 && c.z > 0.0);
        assert!((q.center() - Vector3::new(3.0, 1.0, -2.0)).norm() < 1e-12);
    }

    #[test]
    fn synthetic_scene_is_deterministic() {
        assert!(generate_synthetic_scene(1, 0, 1.0).is_empty());
        let a = generate_synthetic_scene(7, 100, 2.0);
        let b = generate_synthetic_scene(7, 100, 2.0);
        assert_eq!(a, b);
        let c = generate_synthetic_scene(2, 100, 2.0);
        let d = generate_synthetic_scene(1, 100, 2.0);
        assert_ne!(
            c.gaussians.iter().map(|g| g.position).collect::<Vec<_>>(),
            d.gaussians.iter().map(|g| g.position).collect::<Vec<_>>()
        );
        for g in &a.gaussians {
            assert!(g.position.iter().all(|v| v.abs() <= 1.0));
            assert!(g
                .scale
                .iter()
                .all(|&s| (0.01 - 1e-12..=0.2 + 1e-12).contains(&s)));
            assert!((0.2..=1.0).contains(&g.opacity));
            assert!((g.rotation.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn repeated_keyposes_hold_still() {
        let p = pose_at(Vector3::zeros(), Matrix3::identity());
        let t =
            interpolate_trajectory(&[p.clone(), p.clone(), p.clone()], 90.0, 1.8, 90.0).unwrap();
        assert_eq!(t.poses.len(), 3);
        assert_eq!(t.poses[0], p);
    }

    #[test]
    fn translation_gap_splits_into_uniform_steps() {
        let a = pose_at(Vector3::zeros(), Matrix3::identity());
        let b = pose_at(Vector3::new(1.8, 0.0, 0.0), Matrix3::identity());
        let t = interpolate_trajectory(&[a, b], 90.0, 1.8, 90.0).unwrap();
        assert_eq!(t.poses.len(), 91);
        for w in t.poses.windows(2) {
            assert!((translation_delta(&w[0], &w[1]) - 0.02).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_gap_splits_into_degree_steps() {
        let a = pose_at(Vector3::zeros(), Matrix3::identity());
        let r = Rotation3::from_axis_angle(&Vector3::y_axis(), 90f64.to_radians()).into_inner();
        let b = pose_at(Vector3::zeros(), r);
        let t =
            interpolate_trajectory(&[a, b], DEFAULT_FPS, DEFAULT_V_MAX, DEFAULT_OMEGA_MAX).unwrap();
        assert_eq!(t.poses.len(), 91);
        for w in t.poses.windows(2) {
            assert!((rotation_delta_deg(&w[0], &w[1]) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn interpolation_requires_two_poses_and_shared_intrinsics() {
        let a = pose_at(Vector3::zeros(), Matrix3::identity());
        assert!(interpolate_trajectory(std::slice::from_ref(&a), 90.0, 1.8, 90.0).is_err());
        let mut b = a.clone();
        b.fx = 10.0;
        assert!(interpolate_trajectory(&[a, b], 90.0, 1.8, 90.0).is_err());
    }

    #[test]
    fn trajectory_json_round_trip() {
        let a = pose_at(Vector3::new(0.5, -0.2, 0.1), Matrix3::identity());
        let file = TrajectoryFile::from_poses(std::slice::from_ref(&a), 90.0, 1.8, 90.0);
        let text = serde_json::to_string(&file).unwrap();
        let back: TrajectoryFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.camera_poses().unwrap()[0], a);
        assert!(text.contains("\"omega_max\""));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn trajectory_respects_caps(
                moves in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.5f64..1.5, -1.5f64..1.5), 2..5),
                fps in 30.0f64..120.0,
            ) {
                let keys: Vec<_> = moves
                    .iter()
                    .map(|&(x, y, z, ay, ax)| {
                        let r = Rotation3::from_euler_angles(ax, ay, 0.0).into_inner();
                        pose_at(Vector3::new(x, y, z), r)
                    })
                    .collect();
                let t = interpolate_trajectory(&keys, fps, 1.8, 90.0).unwrap();
                for w in t.poses.windows(2) {
                    prop_assert!(translation_delta(&w[0], &w[1]) <= 1.8 / fps + 1e-9);
                    prop_assert!(rotation_delta_deg(&w[0], &w[1]) <= 90.0 / fps + 1e-9);
                }
                prop_assert_eq!(t.poses.last().unwrap(), keys.last().unwrap());
            }
        }
    }
}
