//! Tile-to-block load distribution and a sorter→rasterizer pipeline model.

use serde::{Deserialize, Serialize};

use crate::binning::{dpes_cull, sort_by_key_then_id, PairList};
use crate::error::{Error, Result};
use crate::viewtrans::{TilePlan, TileStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Row-major tiles dealt round-robin, one per block.
    NaiveRoundRobin,
    /// Morton traversal with a per-block load cap.
    Ldu,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::NaiveRoundRobin => "naive",
            Policy::Ldu => "ldu",
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" | "naive_round_robin" => Ok(Policy::NaiveRoundRobin),
            "ldu" => Ok(Policy::Ldu),
            _ => Err(Error::InvalidArgument(format!(
                "unknown scheduler `{s}` (naive|ldu)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntraOrder {
    /// Keep the traversal order of the policy.
    Arbitrary,
    LightToHeavy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub num_blocks: usize,
    pub policy: Policy,
    /// Sorter time per pair.
    pub sort_cost: f64,
    /// Rasterizer time per pair.
    pub raster_cost: f64,
    pub intra_order: IntraOrder,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            num_blocks: 16,
            policy: Policy::Ldu,
            sort_cost: 1.0,
            raster_cost: 4.0,
            intra_order: IntraOrder::LightToHeavy,
        }
    }
}

impl SchedulerConfig {
    /// The baseline: round-robin dealing, no reordering.
    pub fn naive(num_blocks: usize) -> Self {
        Self {
            num_blocks,
            policy: Policy::NaiveRoundRobin,
            intra_order: IntraOrder::Arbitrary,
            ..Default::default()
        }
    }

    pub fn ldu(num_blocks: usize) -> Self {
        Self {
            num_blocks,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_blocks == 0 {
            return Err(Error::InvalidArgument(
                "block count must be at least 1".into(),
            ));
        }
        if !(self.sort_cost > 0.0 && self.raster_cost > 0.0) {
            return Err(Error::InvalidArgument(
                "cost coefficients must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One schedulable tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileLoad {
    pub tile: usize,
    pub tx: u32,
    pub ty: u32,
    pub load: u64,
}

impl TileLoad {
    pub fn morton(&self) -> u64 {
        morton_encode(self.tx, self.ty)
    }
}

/// Fills in each plan entry's load: pairs surviving the depth bound for
/// re-render tiles, zero for interpolated ones. Returns the re-render tiles.
pub fn estimate_tile_load(plan: &mut TilePlan, pairs: &PairList) -> Vec<TileLoad> {
    let tiles_x = plan.tiles_x;
    let mut out = Vec::new();
    for entry in &mut plan.tiles {
        entry.load = match entry.status {
            TileStatus::Interpolate => 0,
            TileStatus::Rerender => {
                let mut p = pairs.tile(entry.tile).to_vec();
                dpes_cull(&mut p, entry.bound);
                p.len() as u64
            }
        };
        if entry.status == TileStatus::Rerender {
            out.push(TileLoad {
                tile: entry.tile,
                tx: entry.tile as u32 % tiles_x,
                ty: entry.tile as u32 / tiles_x,
                load: entry.load,
            });
        }
    }
    out
}

/// Z-order key: x bits in even positions, y bits in odd positions.
pub fn morton_encode(tx: u32, ty: u32) -> u64 {
    fn spread(v: u32) -> u64 {
        let mut v = v as u64 & 0xffff_ffff;
        v = (v | (v << 16)) & 0x0000_ffff_0000_ffff;
        v = (v | (v << 8)) & 0x00ff_00ff_00ff_00ff;
        v = (v | (v << 4)) & 0x0f0f_0f0f_0f0f_0f0f;
        v = (v | (v << 2)) & 0x3333_3333_3333_3333;
        v = (v | (v << 1)) & 0x5555_5555_5555_5555;
        v
    }
    spread(tx) | (spread(ty) << 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockAssignment {
    pub blocks: Vec<Vec<TileLoad>>,
    pub block_loads: Vec<u64>,
    /// Per-block load cap `(1 + 1/N)·W`; `None` for round-robin.
    pub cap: Option<f64>,
}

/// Distributes tiles over blocks, then orders each block per
/// `cfg.intra_order`.
pub fn assign_blocks(tiles: &[TileLoad], cfg: &SchedulerConfig) -> Result<BlockAssignment> {
    cfg.validate()?;
    let b = cfg.num_blocks;
    let mut blocks: Vec<Vec<TileLoad>> = vec![Vec::new(); b];
    let mut cap = None;
    match cfg.policy {
        Policy::NaiveRoundRobin => {
            let mut order = tiles.to_vec();
            order.sort_by_key(|t| (t.ty, t.tx));
            for (i, t) in order.into_iter().enumerate() {
                blocks[i % b].push(t);
            }
        }
        Policy::Ldu => {
            let mut order = tiles.to_vec();
            order.sort_by_key(|t| t.morton());
            let total: u64 = order.iter().map(|t| t.load).sum();
            let w = total as f64 / b as f64;
            let n = order.len().div_ceil(b).max(1);
            let c = (1.0 + 1.0 / n as f64) * w;
            cap = Some(c);
            let mut current = 0;
            let mut cum = 0u64;
            for t in order {
                let deferred = !blocks[current].is_empty() && (cum + t.load) as f64 >= c;
                if deferred && current + 1 < b {
                    current += 1;
                    cum = 0;
                }
                cum += t.load;
                blocks[current].push(t);
            }
        }
    }
    for block in &mut blocks {
        order_within_block(block, cfg.intra_order);
    }
    let block_loads = blocks
        .iter()
        .map(|bl| bl.iter().map(|t| t.load).sum())
        .collect();
    Ok(BlockAssignment {
        blocks,
        block_loads,
        cap,
    })
}

/// Light to heavy, ties by Morton key. Uses the same comparison as the
/// per-tile depth sort.
pub fn order_within_block(block: &mut [TileLoad], order: IntraOrder) {
    if order == IntraOrder::LightToHeavy {
        sort_by_key_then_id(block, |t| (t.load as f64, t.morton()));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub tiles: usize,
    pub load: u64,
    pub busy: f64,
    pub finish: f64,
    /// Time before the first tile's sort completes.
    pub sort_latency: f64,
    /// Rasterizer waits after the first tile.
    pub bubble: f64,
    /// Time between this block finishing and the makespan.
    pub idle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilizationReport {
    pub policy: Policy,
    pub blocks: usize,
    pub makespan: f64,
    pub utilization: f64,
    pub bubble_time: f64,
    pub sort_latency: f64,
    pub idle_time: f64,
    pub per_block: Vec<BlockReport>,
}

impl UtilizationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// One tile's sorter and rasterizer intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelineEvent {
    pub block: usize,
    pub tile: usize,
    pub load: u64,
    pub sort_start: f64,
    pub sort_end: f64,
    pub raster_start: f64,
    pub raster_end: f64,
}

/// Runs each block's sorter and rasterizer in lockstep. Utilization is
/// total rasterizer busy time over `blocks × makespan`, and 1 when there
/// is no work.
pub fn simulate_pipeline(
    assignment: &BlockAssignment,
    cfg: &SchedulerConfig,
) -> (UtilizationReport, Vec<TimelineEvent>) {
    let mut per_block = Vec::with_capacity(assignment.blocks.len());
    let mut timeline = Vec::new();
    for (bi, block) in assignment.blocks.iter().enumerate() {
        let mut sorter = 0.0;
        let mut raster = 0.0;
        let mut busy = 0.0;
        let mut bubble = 0.0;
        let mut latency = 0.0;
        for (k, t) in block.iter().enumerate() {
            let sort_start = sorter;
            sorter += cfg.sort_cost * t.load as f64;
            let start = f64::max(raster, sorter);
            let wait = start - raster;
            if k == 0 {
                latency = wait;
            } else {
                bubble += wait;
            }
            let dur = cfg.raster_cost * t.load as f64;
            raster = start + dur;
            busy += dur;
            timeline.push(TimelineEvent {
                block: bi,
                tile: t.tile,
                load: t.load,
                sort_start,
                sort_end: sorter,
                raster_start: start,
                raster_end: raster,
            });
        }
        per_block.push(BlockReport {
            tiles: block.len(),
            load: assignment.block_loads[bi],
            busy,
            finish: raster,
            sort_latency: latency,
            bubble,
            idle: 0.0,
        });
    }
    let makespan = per_block.iter().map(|b| b.finish).fold(0.0, f64::max);
    for b in &mut per_block {
        b.idle = makespan - b.finish;
    }
    let busy: f64 = per_block.iter().map(|b| b.busy).sum();
    let blocks = per_block.len();
    let utilization = if makespan > 0.0 {
        busy / (blocks as f64 * makespan)
    } else {
        1.0
    };
    let report = UtilizationReport {
        policy: cfg.policy,
        blocks,
        makespan,
        utilization,
        bubble_time: per_block.iter().map(|b| b.bubble).sum(),
        sort_latency: per_block.iter().map(|b| b.sort_latency).sum(),
        idle_time: per_block.iter().map(|b| b.idle).sum(),
        per_block,
    };
    (report, timeline)
}

/// Assign, order and simulate in one step.
pub fn schedule(
    tiles: &[TileLoad],
    cfg: &SchedulerConfig,
) -> Result<(BlockAssignment, UtilizationReport)> {
    let assignment = assign_blocks(tiles, cfg)?;
    let (report, _) = simulate_pipeline(&assignment, cfg);
    Ok((assignment, report))
}

/// CSV timeline with a header row.
pub fn timeline_csv(events: &[TimelineEvent]) -> String {
    let mut out = String::from("block,tile,load,sort_start,sort_end,raster_start,raster_end\n");
    for e in events {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            e.block, e.tile, e.load, e.sort_start, e.sort_end, e.raster_start, e.raster_end
        ));
    }
    out
}
