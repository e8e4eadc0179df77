//! JSON reports written by the command-line tool.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellId, CellKind, Filtration};
use crate::losses::{LossConfig, LossReport};
use crate::matching::BettiMatching;
use crate::metrics::{macro_average, MetricsReport};
use crate::persistence::{Bar, Barcode, Dims};

pub const SCHEMA_VERSION: u32 = 1;

/// Everything needed to rerun the command that produced a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub pred: Option<String>,
    pub gt: Option<String>,
    pub classes: Option<usize>,
    pub step: u64,
    pub dims: Dims,
    pub seed: u64,
    pub loss: LossConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub schema_version: u32,
    pub config: RunConfig,
    pub result: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(config: RunConfig, result: T) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            config,
            result,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_json()?)?)
    }
}

pub fn read_report<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Report<T>> {
    let report: Report<T> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if report.schema_version != SCHEMA_VERSION {
        return Err(Error::Format(format!("unsupported report schema {}", report.schema_version)));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDump {
    pub kind: CellKind,
    /// Top-left pixel of the cell.
    pub anchor: (usize, usize),
    /// Pixel whose value the cell takes.
    pub critical_pixel: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarDump {
    pub dim: u8,
    pub birth: f64,
    pub death: f64,
    pub essential: bool,
    pub birth_cell: CellDump,
    pub death_cell: Option<CellDump>,
}

fn cell_dump(filt: &Filtration, cell: CellId) -> CellDump {
    let p = filt.critical_vertex(cell);
    CellDump {
        kind: filt.grid().kind(cell),
        anchor: filt.grid().anchor(cell),
        critical_pixel: (p % filt.width(), p / filt.width()),
    }
}

pub fn bar_dump(filt: &Filtration, bar: &Bar) -> BarDump {
    BarDump {
        dim: bar.dim,
        birth: bar.birth,
        death: bar.death,
        essential: bar.is_essential(),
        birth_cell: cell_dump(filt, bar.birth_cell),
        death_cell: bar.death_cell.map(|c| cell_dump(filt, c)),
    }
}

pub fn barcode_dump(filt: &Filtration, bc: &Barcode) -> Vec<BarDump> {
    bc.bars().iter().map(|b| bar_dump(filt, b)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassBarcodes {
    pub class: usize,
    pub pred: Vec<BarDump>,
    pub gt: Option<Vec<BarDump>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimMatchDump {
    pub dim: usize,
    pub matched: Vec<(BarDump, BarDump)>,
    pub unmatched_pred: Vec<BarDump>,
    pub unmatched_gt: Vec<BarDump>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMatchDump {
    pub class: usize,
    pub num_unmatched: usize,
    pub dims: Vec<DimMatchDump>,
}

pub fn matching_dump(class: usize, m: &BettiMatching, fp: &Filtration, fg: &Filtration, dims: Dims) -> ClassMatchDump {
    ClassMatchDump {
        class,
        num_unmatched: dims.iter().map(|d| m.dim(d).num_unmatched()).sum(),
        dims: dims
            .iter()
            .map(|d| DimMatchDump {
                dim: d,
                matched: m.matched_bars(d).map(|(p, g)| (bar_dump(fp, p), bar_dump(fg, g))).collect(),
                unmatched_pred: m.unmatched_pred_bars(d).map(|b| bar_dump(fp, b)).collect(),
                unmatched_gt: m.unmatched_gt_bars(d).map(|b| bar_dump(fg, b)).collect(),
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossFileReport {
    pub loss: LossReport,
    pub gradient_file: Option<String>,
    pub gradient_shape: (usize, usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub total: f64,
    pub dice_component: f64,
    pub topo_matched: f64,
    pub topo_unmatched: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub param: String,
    pub points: Vec<SweepPoint>,
    /// Metrics of the binarized prediction; they do not vary along the sweep.
    pub metrics: MetricsReport,
}

/// The total-loss identity holds exactly for the reported numbers.
pub fn verify_loss(report: &LossReport) -> bool {
    report.recomposed_total() == report.total
}

/// The macro block and totals are reproduced exactly from the per-class rows.
pub fn verify_metrics(report: &MetricsReport) -> bool {
    let (m, bm, beta) = macro_average(&report.per_class);
    m == report.macro_average && bm == report.total_bm_error && beta == report.total_gt_betti
}
