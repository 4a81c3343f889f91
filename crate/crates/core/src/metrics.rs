//! Fairness and throughput statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{MetricsError, SweepError};
use crate::mac::Variant;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotCounts {
    pub empty: u64,
    pub success: u64,
    pub collision: u64,
}

impl SlotCounts {
    pub fn total(&self) -> u64 {
        self.empty + self.success + self.collision
    }
}

/// Summary of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub variant: Variant,
    pub nodes: usize,
    pub seed: u64,
    /// Bits per second of measured simulated time.
    pub per_node_throughput: Vec<f64>,
    pub per_node_delivered_bits: Vec<u64>,
    pub aggregate_throughput: f64,
    pub delivered_bits: u64,
    pub delivered_packets: u64,
    /// `None` when no node delivered anything.
    pub jfi: Option<f64>,
    pub convergence_slot: Option<u64>,
    pub slot_counts: SlotCounts,
    pub elapsed_us: f64,
    /// Simulated time the throughput figures are measured over.
    pub measured_us: f64,
}

impl RunMetrics {
    pub fn converged(&self) -> bool {
        self.convergence_slot.is_some()
    }
}

/// Jain's fairness index `(Σx)² / (n·Σx²)`.
pub fn jain_index(x: &[f64]) -> Result<f64, MetricsError> {
    if x.is_empty() {
        return Err(MetricsError::Empty);
    }
    let sum: f64 = x.iter().sum();
    let sum_sq: f64 = x.iter().map(|v| v * v).sum();
    if sum_sq == 0.0 {
        return Err(MetricsError::NoTraffic);
    }
    Ok(sum * sum / (x.len() as f64 * sum_sq))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub mean: f64,
    pub half_width: f64,
}

impl ConfidenceInterval {
    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }

    pub fn overlaps(&self, other: &ConfidenceInterval) -> bool {
        self.lower() <= other.upper() && other.lower() <= self.upper()
    }
}

/// Two-sided Student-t quantile `t_{(1+level)/2, df}`.
pub fn t_quantile(level: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("degrees of freedom are positive");
    dist.inverse_cdf(0.5 + level / 2.0)
}

/// Mean and Student-t half-width `t · s / √n` at the given level.
pub fn confidence_interval(samples: &[f64], level: f64) -> Result<ConfidenceInterval, MetricsError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(MetricsError::BadLevel(level));
    }
    let n = samples.len();
    if n < 2 {
        return Err(MetricsError::TooFewSamples(n));
    }
    let nf = n as f64;
    if samples.iter().all(|&v| v == samples[0]) {
        return Ok(ConfidenceInterval {
            mean: samples[0],
            half_width: 0.0,
        });
    }
    let mean = samples.iter().sum::<f64>() / nf;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let half_width = t_quantile(level, nf - 1.0) * var.sqrt() / nf.sqrt();
    Ok(ConfidenceInterval { mean, half_width })
}

/// Aggregated statistics of one (variant, N) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub variant: Variant,
    pub nodes: usize,
    pub replications: usize,
    pub throughput: ConfidenceInterval,
    /// Over the replications whose JFI is defined.
    pub jfi: Option<ConfidenceInterval>,
    pub converged_fraction: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<CellSummary>,
}

impl SweepResult {
    pub fn cell(&self, variant: Variant, nodes: usize) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.variant == variant && c.nodes == nodes)
    }

    pub fn variant_cells(&self, variant: Variant) -> impl Iterator<Item = &CellSummary> {
        self.cells.iter().filter(move |c| c.variant == variant)
    }
}

pub const CONFIDENCE_LEVEL: f64 = 0.95;

/// Summarises one cell. A single replication yields a zero-width interval.
pub fn summarize_cell(variant: Variant, nodes: usize, runs: &[RunMetrics]) -> Result<CellSummary, SweepError> {
    if runs.is_empty() {
        return Err(SweepError::Config(crate::error::ConfigError::Invalid(format!(
            "cell {variant}/N={nodes} has no replications"
        ))));
    }
    let ci = |xs: &[f64]| -> Result<ConfidenceInterval, MetricsError> {
        match xs {
            [only] => Ok(ConfidenceInterval {
                mean: *only,
                half_width: 0.0,
            }),
            _ => confidence_interval(xs, CONFIDENCE_LEVEL),
        }
    };
    let throughput: Vec<f64> = runs.iter().map(|r| r.aggregate_throughput).collect();
    let jfis: Vec<f64> = runs.iter().filter_map(|r| r.jfi).collect();
    let converged = runs.iter().filter(|r| r.converged()).count();
    Ok(CellSummary {
        variant,
        nodes,
        replications: runs.len(),
        throughput: ci(&throughput)?,
        jfi: if jfis.is_empty() { None } else { Some(ci(&jfis)?) },
        converged_fraction: converged as f64 / runs.len() as f64,
    })
}

/// Reduces replications grouped by (variant, N) into per-cell statistics,
/// ordered by variant then N.
pub fn aggregate(cells: &BTreeMap<(Variant, usize), Vec<RunMetrics>>) -> Result<SweepResult, SweepError> {
    let cells = cells
        .iter()
        .map(|(&(variant, nodes), runs)| summarize_cell(variant, nodes, runs))
        .collect::<Result<_, _>>()?;
    Ok(SweepResult { cells })
}
