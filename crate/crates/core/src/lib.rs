//! Tile-based Gaussian splat rendering with temporal reuse.
//!
//! The crate covers scene loading, projection and tile intersection,
//! binning and depth sorting, alpha blending, view-transform reuse between
//! frames, workload scheduling across rasterizer blocks, and image metrics.

// NaN must fail validity checks, hence `!(x > 0.0)` over `x <= 0.0`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod binning;
pub mod desk;
pub mod error;
pub mod image;
pub mod metrics;
pub mod pipeline;
pub mod ply;
pub mod preprocess;
pub mod raster;
pub mod scene;
pub mod scheduler;
pub mod sh;
pub mod viewtrans;

pub use error::{Error, Result};

/// Tile edge length in pixels.
pub const TILE_SIZE: u32 = 16;
