//! Frame sequencing: full renders, warped frames with sparse re-rendering,
//! block scheduling per frame and an optional full-render shadow pass.

use serde::{Deserialize, Serialize};

use crate::binning::DepthBound;
use crate::error::Result;
use crate::metrics::{QualityReport, WorkloadCounters};
use crate::preprocess::{IntersectionMode, RenderConfig};
use crate::raster::{prepare_view, render_tiles, FrameBuffers, PreparedView};
use crate::scene::{CameraPose, GaussianSet};
use crate::scheduler::{estimate_tile_load, schedule, SchedulerConfig, UtilizationReport};
use crate::viewtrans::{warp_frame, TilePlan, TileStatus, WarpConfig, WarpMode};

pub const STATS_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub render: RenderConfig,
    pub warp: WarpConfig,
    pub scheduler: SchedulerConfig,
    /// Cull pairs beyond each re-render tile's depth bound.
    pub dpes: bool,
    /// Also render every frame fully and report quality against it.
    pub shadow: bool,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            render: RenderConfig::default(),
            warp: WarpConfig::default(),
            scheduler: SchedulerConfig::default(),
            dpes: true,
            shadow: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    Full,
    Warped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    pub kind: FrameKind,
    pub counters: WorkloadCounters,
    pub schedule: UtilizationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quality: Option<QualityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamReport {
    pub schema: u32,
    pub config: StreamConfig,
    pub frames: Vec<FrameRecord>,
    pub totals: WorkloadCounters,
    /// Mean of the per-frame utilizations.
    pub mean_utilization: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_psnr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_ssim: Option<f64>,
}

impl StreamReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// True when frame `t` is rendered from scratch.
pub fn is_full_frame(t: usize, window: u32) -> bool {
    t.is_multiple_of(window as usize + 1)
}

fn paint(
    frame: &mut FrameBuffers,
    view: &PreparedView,
    requests: &[(usize, DepthBound)],
    cfg: &RenderConfig,
    only_missing: bool,
) -> (u64, u64, u64) {
    let batch = render_tiles(view, requests, cfg);
    for (tile, render) in batch.tiles.iter().zip(&batch.renders) {
        frame.write_tile(&view.grid, *tile, render, only_missing);
    }
    let c = batch.counters();
    (batch.pairs_after_cull(), c.blended, c.early_stops)
}

/// Renders every tile of a prepared view.
pub fn render_view_full(
    view: &PreparedView,
    pose: &CameraPose,
    cfg: &RenderConfig,
) -> FrameBuffers {
    let mut frame = FrameBuffers::blank(pose.width, pose.height, cfg.background);
    let requests: Vec<_> = (0..view.grid.tile_count())
        .map(|t| (t, DepthBound::Unbounded))
        .collect();
    paint(&mut frame, view, &requests, cfg, false);
    frame
}

/// Streams `poses`, handing each finished frame to `sink` in order. Frame
/// `t` is a full render when `t` is a multiple of `window + 1`; otherwise
/// the previous frame is warped and only re-render tiles are drawn.
pub fn stream(
    set: &GaussianSet,
    poses: &[CameraPose],
    cfg: &StreamConfig,
    mut sink: impl FnMut(usize, &FrameBuffers) -> Result<()>,
) -> Result<StreamReport> {
    cfg.render.validate()?;
    cfg.warp.validate()?;
    cfg.scheduler.validate()?;
    let mut records = Vec::with_capacity(poses.len());
    let mut totals = WorkloadCounters::default();
    let mut prev: Option<(FrameBuffers, &CameraPose)> = None;
    for (t, pose) in poses.iter().enumerate() {
        let view = prepare_view(set, pose, &cfg.render);
        let full = prev.is_none() || is_full_frame(t, cfg.warp.window);
        let (mut frame, mut plan) = match (&prev, full) {
            (Some((reference, ref_pose)), false) => {
                warp_frame(reference, ref_pose, pose, &cfg.warp)?
            }
            _ => (
                FrameBuffers::blank(pose.width, pose.height, cfg.render.background),
                TilePlan::full_render(&view.grid),
            ),
        };
        if !cfg.dpes {
            plan.tiles
                .iter_mut()
                .for_each(|e| e.bound = DepthBound::Unbounded);
        }
        let loads = estimate_tile_load(&mut plan, &view.pairs);
        let (_, schedule_report) = schedule(&loads, &cfg.scheduler)?;
        let requests: Vec<(usize, DepthBound)> =
            plan.rerender_tiles().map(|e| (e.tile, e.bound)).collect();
        let only_missing = !full && cfg.warp.mode == WarpMode::PixelWarp;
        let (after_dpes, blended, early_stops) =
            paint(&mut frame, &view, &requests, &cfg.render, only_missing);

        let mut counters = WorkloadCounters {
            gaussians_in: view.stats.gaussians_in,
            culled: view.stats.culled(),
            pairs_after_dpes: after_dpes,
            tiles_interpolated: plan.count(TileStatus::Interpolate) as u64,
            tiles_rerendered: plan.count(TileStatus::Rerender) as u64,
            blended_pairs: blended,
            early_stops,
            ..Default::default()
        };
        counters.pairs.insert(
            cfg.render.intersection_mode.name().to_string(),
            view.pairs.total_pairs,
        );

        let quality = if cfg.shadow {
            let reference = render_view_full(&view, pose, &cfg.render);
            Some(QualityReport::compare(&frame.color, &reference.color)?)
        } else {
            None
        };
        sink(t, &frame)?;
        totals += &counters;
        records.push(FrameRecord {
            frame: t,
            kind: if full {
                FrameKind::Full
            } else {
                FrameKind::Warped
            },
            counters,
            schedule: schedule_report,
            quality,
        });
        prev = Some((frame, pose));
    }
    let n = records.len().max(1) as f64;
    let mean_utilization = records.iter().map(|r| r.schedule.utilization).sum::<f64>() / n;
    let mean = |f: fn(&QualityReport) -> f64| {
        cfg.shadow.then(|| {
            records
                .iter()
                .filter_map(|r| r.quality.as_ref())
                .map(f)
                .sum::<f64>()
                / n
        })
    };
    Ok(StreamReport {
        schema: STATS_SCHEMA,
        config: cfg.clone(),
        mean_psnr: mean(|q| q.psnr),
        mean_ssim: mean(|q| q.ssim),
        frames: records,
        totals,
        mean_utilization,
    })
}

/// Full render of every pose: streaming with no warped frames.
pub fn render_sequence(
    set: &GaussianSet,
    poses: &[CameraPose],
    cfg: &StreamConfig,
    sink: impl FnMut(usize, &FrameBuffers) -> Result<()>,
) -> Result<StreamReport> {
    let cfg = StreamConfig {
        warp: WarpConfig {
            window: 0,
            ..cfg.warp.clone()
        },
        ..cfg.clone()
    };
    stream(set, poses, &cfg, sink)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyBench {
    pub policy: String,
    pub mean_utilization: f64,
    pub total_makespan: f64,
    pub bubble_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema: u32,
    pub frames: usize,
    /// Total pairs over the trajectory per intersection mode.
    pub pairs_by_mode: std::collections::BTreeMap<String, u64>,
    pub baseline_blended_pairs: u64,
    pub streaming_blended_pairs: u64,
    /// Baseline blended pairs over streaming blended pairs.
    pub algorithmic_speedup: f64,
    pub baseline_pairs_rendered: u64,
    pub streaming_pairs_rendered: u64,
    pub policies: Vec<PolicyBench>,
}

impl BenchReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Pair counts for every intersection mode, full-render versus streaming
/// work, and both scheduler policies over the same trajectory.
pub fn bench(set: &GaussianSet, poses: &[CameraPose], cfg: &StreamConfig) -> Result<BenchReport> {
    let mut pairs_by_mode = std::collections::BTreeMap::new();
    for mode in IntersectionMode::ALL {
        let render = RenderConfig {
            intersection_mode: mode,
            ..cfg.render.clone()
        };
        let total: u64 = poses
            .iter()
            .map(|p| prepare_view(set, p, &render).pairs.total_pairs)
            .sum();
        pairs_by_mode.insert(mode.name().to_string(), total);
    }
    let baseline = render_sequence(set, poses, cfg, |_, _| Ok(()))?;
    let mut policies = Vec::new();
    let mut streaming = None;
    let blocks = cfg.scheduler.num_blocks;
    for sched in [SchedulerConfig::naive(blocks), SchedulerConfig::ldu(blocks)] {
        let run_cfg = StreamConfig {
            scheduler: SchedulerConfig {
                sort_cost: cfg.scheduler.sort_cost,
                raster_cost: cfg.scheduler.raster_cost,
                ..sched
            },
            shadow: false,
            ..cfg.clone()
        };
        let report = stream(set, poses, &run_cfg, |_, _| Ok(()))?;
        policies.push(PolicyBench {
            policy: run_cfg.scheduler.policy.name().to_string(),
            mean_utilization: report.mean_utilization,
            total_makespan: report.frames.iter().map(|f| f.schedule.makespan).sum(),
            bubble_time: report.frames.iter().map(|f| f.schedule.bubble_time).sum(),
        });
        streaming = Some(report);
    }
    let streaming = streaming.expect("two policies ran");
    let base = baseline.totals.blended_pairs;
    let stream_blended = streaming.totals.blended_pairs;
    Ok(BenchReport {
        schema: STATS_SCHEMA,
        frames: poses.len(),
        pairs_by_mode,
        baseline_blended_pairs: base,
        streaming_blended_pairs: stream_blended,
        algorithmic_speedup: if stream_blended > 0 {
            base as f64 / stream_blended as f64
        } else {
            1.0
        },
        baseline_pairs_rendered: baseline.totals.pairs_after_dpes,
        streaming_pairs_rendered: streaming.totals.pairs_after_dpes,
        policies,
    })
}
