//! Real spherical-harmonic color evaluation up to degree 3.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::scene::SH_COEFFS;

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
const SH_C1: f64 = 0.488_602_511_902_919_9;
const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// Real SH basis values for `dir`, ordered by degree then m = -l..=l.
pub fn sh_basis(dir: &Vector3<f64>, degree: u8) -> Vec<f64> {
    let (x, y, z) = (dir.x, dir.y, dir.z);
    let mut out = vec![SH_C0];
    if degree >= 1 {
        out.extend([-SH_C1 * y, SH_C1 * z, -SH_C1 * x]);
    }
    if degree >= 2 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        out.extend([
            SH_C2[0] * x * y,
            SH_C2[1] * y * z,
            SH_C2[2] * (2.0 * zz - xx - yy),
            SH_C2[3] * x * z,
            SH_C2[4] * (xx - yy),
        ]);
    }
    if degree >= 3 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        out.extend([
            SH_C3[0] * y * (3.0 * xx - yy),
            SH_C3[1] * x * y * z,
            SH_C3[2] * y * (4.0 * zz - xx - yy),
            SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy),
            SH_C3[4] * x * (4.0 * zz - xx - yy),
            SH_C3[5] * z * (xx - yy),
            SH_C3[6] * x * (xx - 3.0 * yy),
        ]);
    }
    out
}

/// View-dependent RGB: SH expansion + 0.5, clamped to [0, 1] per channel.
pub fn sh_to_color(sh: &[f64; SH_COEFFS], view_dir: &Vector3<f64>, degree: u8) -> Result<[f64; 3]> {
    if degree > 3 {
        return Err(Error::InvalidArgument(format!(
            "spherical-harmonic degree {degree} outside 0..=3"
        )));
    }
    let basis = sh_basis(view_dir, degree);
    let mut rgb = [0.0; 3];
    for (c, out) in rgb.iter_mut().enumerate() {
        let mut v = basis[0] * sh[c];
        for (k, b) in basis.iter().enumerate().skip(1) {
            v += b * sh[3 + c * 15 + (k - 1)];
        }
        *out = (v + 0.5).clamp(0.0, 1.0);
    }
    Ok(rgb)
}
