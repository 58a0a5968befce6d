//! Grid sweeps over (delta, k_min, seed).
//!
//! Every cell runs independently on fresh state. Per seed, the same
//! shuffled ordering feeds one full-majority reference run (whose accuracy
//! anchors the per-delta target) and every grid cell.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::dataset::shuffle;
use crate::harness::engine::{self, RunOutput};
use crate::types::{ArmSpec, ConfidenceMethod, DatasetShape, Instance, Mode, PolicyConfig};

/// The swept axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub deltas: Vec<f64>,
    pub k_mins: Vec<usize>,
    pub seeds: Vec<u64>,
}

/// One sweep-table row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub k_min: usize,
    pub seed: u64,
    /// delta times the same-seed full-majority accuracy.
    pub target_accuracy: Option<f64>,
    pub accuracy: Option<f64>,
    pub cost_per_million_tokens: f64,
}

/// A completed cell: its table row plus the full run output.
#[derive(Clone, Debug)]
pub struct SweepCell {
    pub row: SweepRow,
    pub output: RunOutput,
}

/// Run the full grid. Rows come out in (delta, k_min, seed) iteration order
/// and are deterministic for a fixed grid and dataset.
pub fn run_sweep(
    base: &PolicyConfig,
    arms: &[ArmSpec],
    instances: &[Instance],
    shape: DatasetShape,
    grid: &SweepGrid,
) -> Result<Vec<SweepCell>> {
    // Per-seed shuffled orderings and full-majority reference accuracies.
    let mut shuffled: Vec<Vec<Instance>> = Vec::with_capacity(grid.seeds.len());
    let mut majority_accuracy: Vec<Option<f64>> = Vec::with_capacity(grid.seeds.len());
    for &seed in &grid.seeds {
        let mut ordering = instances.to_vec();
        shuffle(&mut ordering, seed);
        // The reference run's predictions do not depend on the confidence
        // method, so use the cheap one.
        let reference = PolicyConfig {
            mode: Mode::FullMajority,
            confidence_method: ConfidenceMethod::BetaCdf,
            seed,
            ..base.clone()
        };
        let out = engine::run(&reference, arms, &ordering, shape)?;
        majority_accuracy.push(out.summary.accuracy);
        shuffled.push(ordering);
    }

    let mut cells = Vec::new();
    for &delta in &grid.deltas {
        for &k_min in &grid.k_mins {
            for (s_idx, &seed) in grid.seeds.iter().enumerate() {
                let config = PolicyConfig {
                    delta,
                    k_min,
                    seed,
                    ..base.clone()
                };
                let output = engine::run(&config, arms, &shuffled[s_idx], shape)?;
                let row = SweepRow {
                    delta,
                    k_min,
                    seed,
                    target_accuracy: majority_accuracy[s_idx].map(|a| delta * a),
                    accuracy: output.summary.accuracy,
                    cost_per_million_tokens: output.summary.cost_per_million_tokens,
                };
                cells.push(SweepCell { row, output });
            }
        }
    }
    Ok(cells)
}

pub const SWEEP_HEADER: &str = "delta,k_min,seed,target_acc,accuracy,cost_per_mtok";

/// Serialize the sweep table; stable byte-for-byte for equal rows.
pub fn write_sweep_csv<W: Write>(mut out: W, rows: &[SweepRow]) -> Result<()> {
    out.write_all(SWEEP_HEADER.as_bytes())?;
    out.write_all(b"\n")?;
    for r in rows {
        let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let line = format!(
            "{},{},{},{},{},{}\n",
            r.delta,
            r.k_min,
            r.seed,
            fmt_opt(r.target_accuracy),
            fmt_opt(r.accuracy),
            r.cost_per_million_tokens,
        );
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}
