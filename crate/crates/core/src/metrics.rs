//! Image quality metrics and workload counters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::RgbImage;

/// Reported PSNR for identical images.
pub const PSNR_CAP: f64 = 99.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

/// PSNR over all RGB channels with a peak of 1, capped at [`PSNR_CAP`].
pub fn psnr(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    a.check_same_size(b)?;
    let n = a.pixels.len() * 3;
    if n == 0 {
        return Ok(PSNR_CAP);
    }
    let sum: f64 = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .flat_map(|(p, q)| (0..3).map(move |k| (p[k] - q[k]).powi(2)))
        .sum();
    let mse = sum / n as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

/// Normalized 1D Gaussian taps.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let taps: Vec<f64> = (0..size)
        .map(|i| (-(i as f64 - c).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / s).collect()
}

pub fn luminance(img: &RgbImage) -> Vec<f64> {
    img.pixels
        .iter()
        .map(|p| (p[0] + p[1] + p[2]) / 3.0)
        .collect()
}

/// Valid-region separable filtering of a `w × h` plane.
fn filter_valid(plane: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (ow, oh) = (w - k + 1, h - k + 1);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = taps
                .iter()
                .enumerate()
                .map(|(i, t)| t * plane[y * w + x + i])
                .sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps
                .iter()
                .enumerate()
                .map(|(i, t)| t * rows[(y + i) * ow + x])
                .sum();
        }
    }
    out
}

/// Mean SSIM over all full 11×11 windows of the luminance planes.
pub fn ssim(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    a.check_same_size(b)?;
    let (w, h) = (a.width as usize, a.height as usize);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {w}x{h}"
        )));
    }
    let taps = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);
    let la = luminance(a);
    let lb = luminance(b);
    let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<_>>();
    let mu_a = filter_valid(&la, w, h, &taps);
    let mu_b = filter_valid(&lb, w, h, &taps);
    let e_aa = filter_valid(&prod(&la, &la), w, h, &taps);
    let e_bb = filter_valid(&prod(&lb, &lb), w, h, &taps);
    let e_ab = filter_valid(&prod(&la, &lb), w, h, &taps);
    let n = mu_a.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2))
        })
        .sum();
    Ok(total / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub psnr: f64,
    pub ssim: f64,
}

impl QualityReport {
    pub fn compare(a: &RgbImage, b: &RgbImage) -> Result<Self> {
        Ok(Self {
            psnr: psnr(a, b)?,
            ssim: ssim(a, b)?,
        })
    }
}

/// Workload accounting for one frame or a whole run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadCounters {
    pub gaussians_in: u64,
    pub culled: u64,
    /// Pairs emitted per intersection mode that was run.
    pub pairs: BTreeMap<String, u64>,
    pub pairs_after_dpes: u64,
    pub tiles_interpolated: u64,
    pub tiles_rerendered: u64,
    pub blended_pairs: u64,
    pub early_stops: u64,
}

impl std::ops::AddAssign<&WorkloadCounters> for WorkloadCounters {
    fn add_assign(&mut self, o: &WorkloadCounters) {
        self.gaussians_in += o.gaussians_in;
        self.culled += o.culled;
        for (k, v) in &o.pairs {
            *self.pairs.entry(k.clone()).or_default() += v;
        }
        self.pairs_after_dpes += o.pairs_after_dpes;
        self.tiles_interpolated += o.tiles_interpolated;
        self.tiles_rerendered += o.tiles_rerendered;
        self.blended_pairs += o.blended_pairs;
        self.early_stops += o.early_stops;
    }
}
