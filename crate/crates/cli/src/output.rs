//! Frame, depth and stats file writers.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use lsg_core::raster::FrameBuffers;
use lsg_core::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy)]
pub struct FrameOptions {
    pub png: bool,
    pub depth: bool,
}

#[derive(Serialize)]
struct DepthHeader<'a> {
    width: u32,
    height: u32,
    dtype: &'a str,
    /// Value stored where no depth is defined.
    missing: &'a str,
    data: &'a str,
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_png(path: &Path, frame: &FrameBuffers) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), frame.width(), frame.height());
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let to_io = |e: png::EncodingError| Error::io(path, std::io::Error::other(e));
    let mut w = enc.write_header().map_err(to_io)?;
    w.write_image_data(&frame.color.to_rgb8()).map_err(to_io)?;
    w.finish().map_err(to_io)
}

/// Writes `frame_NNNNN.ppm` plus the optional PNG and depth files.
pub fn write_frame(
    dir: &Path,
    index: usize,
    frame: &FrameBuffers,
    opts: FrameOptions,
) -> Result<()> {
    let stem = format!("frame_{index:05}");
    write_bytes(&dir.join(format!("{stem}.ppm")), &frame.color.to_ppm())?;
    if opts.png {
        write_png(&dir.join(format!("{stem}.png")), frame)?;
    }
    if opts.depth {
        let raw: Vec<u8> = frame
            .depth
            .iter()
            .flat_map(|d| d.map_or(f32::NAN, |v| v as f32).to_le_bytes())
            .collect();
        let data = format!("depth_{index:05}.f32");
        write_bytes(&dir.join(&data), &raw)?;
        let header = DepthHeader {
            width: frame.width(),
            height: frame.height(),
            dtype: "f32le",
            missing: "nan",
            data: &data,
        };
        let json = serde_json::to_string_pretty(&header)?;
        write_text(&dir.join(format!("depth_{index:05}.json")), &json)?;
    }
    Ok(())
}
