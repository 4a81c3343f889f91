//! Replicated parameter sweeps and figure datasets.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel;
use crate::config::SimConfig;
use crate::error::{ConfigError, SweepError};
use crate::mac::Variant;
use crate::metrics::{aggregate, CellSummary, RunMetrics, SweepResult};

pub const CSV_HEADER: &str =
    "variant,N,mean_throughput_bps,ci_throughput_bps,mean_jfi,ci_jfi,converged_fraction";

/// A figure dataset: file name and the variants it plots.
pub struct Figure {
    pub file_name: &'static str,
    pub variants: &'static [Variant],
}

pub const FIGURES: [Figure; 2] = [
    Figure {
        file_name: "fig1_throughput.csv",
        variants: &[Variant::CsmaCa, Variant::CsmaEca],
    },
    Figure {
        file_name: "fig2_hysteresis_fairshare.csv",
        variants: &[Variant::EcaHysteresis, Variant::EcaHysteresisFairShare],
    },
];

pub const METADATA_FILE: &str = "sweep_meta.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variants: Vec<Variant>,
    pub nodes: Vec<usize>,
    pub replications: usize,
    pub base_seed: u64,
    /// Shared settings for every run; `variant`, `nodes` and `seed` are
    /// overwritten per replication.
    pub template: SimConfig,
    /// Where datasets are written. `None` keeps results in memory only.
    pub output_dir: Option<PathBuf>,
    /// Worker threads; `None` uses every core.
    pub workers: Option<usize>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            variants: Variant::ALL.to_vec(),
            nodes: (2..=50).collect(),
            replications: 100,
            base_seed: 1,
            template: SimConfig::default(),
            output_dir: None,
            workers: None,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.replications == 0 {
            return Err(ConfigError::Invalid("replications must be at least 1".into()));
        }
        if self.nodes.is_empty() {
            return Err(ConfigError::Invalid("no node counts to sweep".into()));
        }
        if self.variants.is_empty() {
            return Err(ConfigError::Invalid("no variants to sweep".into()));
        }
        if self.workers == Some(0) {
            return Err(ConfigError::Invalid("workers must be at least 1".into()));
        }
        for &n in &self.nodes {
            self.config_for(self.variants[0], n, 0).validate()?;
        }
        Ok(())
    }

    pub fn config_for(&self, variant: Variant, nodes: usize, replication: usize) -> SimConfig {
        SimConfig {
            variant,
            nodes,
            seed: derive_seed(self.base_seed, variant, nodes, replication),
            trace_enabled: false,
            ..self.template.clone()
        }
    }

    fn cells(&self) -> Vec<(Variant, usize)> {
        let mut cells = Vec::new();
        for &v in &self.variants {
            for &n in &self.nodes {
                if !cells.contains(&(v, n)) {
                    cells.push((v, n));
                }
            }
        }
        cells
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replication `replication` of cell (`variant`, `nodes`).
///
/// A chain of SplitMix64 finalisers, folding in one tuple component per
/// round. Each round is a bijection, so for a fixed prefix distinct last
/// components never collide.
pub fn derive_seed(base: u64, variant: Variant, nodes: usize, replication: usize) -> u64 {
    let mut h = splitmix64(base);
    h = splitmix64(h ^ variant.code());
    h = splitmix64(h ^ nodes as u64);
    splitmix64(h ^ replication as u64)
}

fn check_seed_collisions(spec: &SweepSpec) -> Result<(), SweepError> {
    let mut seen: HashMap<u64, (Variant, usize, usize)> = HashMap::new();
    for (v, n) in spec.cells() {
        for r in 0..spec.replications {
            let seed = derive_seed(spec.base_seed, v, n, r);
            if let Some(&(pv, pn, pr)) = seen.get(&seed) {
                return Err(SweepError::SeedCollision(
                    format!("{pv}/N={pn}/r={pr}"),
                    format!("{v}/N={n}/r={r}"),
                ));
            }
            seen.insert(seed, (v, n, r));
        }
    }
    Ok(())
}

fn output_error(path: &Path, source: std::io::Error) -> SweepError {
    SweepError::Output {
        path: path.to_path_buf(),
        source,
    }
}

fn ensure_writable(dir: &Path) -> Result<(), SweepError> {
    fs::create_dir_all(dir).map_err(|e| output_error(dir, e))?;
    let probe = dir.join(".ecasim-write-probe");
    fs::write(&probe, b"").map_err(|e| output_error(&probe, e))?;
    fs::remove_file(&probe).map_err(|e| output_error(&probe, e))
}

/// Formats like C's `%.6g`.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if !(-4..6).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{x:.*}", (5 - exp) as usize)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn csv_row(cell: &CellSummary) -> String {
    let (jfi, jfi_ci) = match cell.jfi {
        Some(ci) => (format_sig6(ci.mean), format_sig6(ci.half_width)),
        None => ("NA".into(), "NA".into()),
    };
    format!(
        "{},{},{},{},{},{},{}",
        cell.variant,
        cell.nodes,
        format_sig6(cell.throughput.mean),
        format_sig6(cell.throughput.half_width),
        jfi,
        jfi_ci,
        format_sig6(cell.converged_fraction)
    )
}

/// Renders one figure dataset. `incomplete` prepends a marker line.
pub fn render_dataset(result: &SweepResult, variants: &[Variant], incomplete: bool) -> String {
    let mut out = String::new();
    if incomplete {
        out.push_str("# INCOMPLETE: sweep aborted, some cells are missing\n");
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    for &v in variants {
        for cell in result.variant_cells(v) {
            out.push_str(&csv_row(cell));
            out.push('\n');
        }
    }
    out
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    complete: bool,
    base_seed: u64,
    seed_derivation: &'static str,
    replications: usize,
    variants: &'a [Variant],
    nodes: &'a [usize],
    confidence_level: f64,
    template: &'a SimConfig,
    files: Vec<&'static str>,
}

fn write_outputs(dir: &Path, spec: &SweepSpec, result: &SweepResult, complete: bool) -> Result<Vec<PathBuf>, SweepError> {
    let mut written = Vec::new();
    let mut names = Vec::new();
    for fig in &FIGURES {
        let variants: Vec<Variant> = fig
            .variants
            .iter()
            .copied()
            .filter(|v| spec.variants.contains(v))
            .collect();
        if variants.is_empty() {
            continue;
        }
        let path = dir.join(fig.file_name);
        fs::write(&path, render_dataset(result, &variants, !complete)).map_err(|e| output_error(&path, e))?;
        names.push(fig.file_name);
        written.push(path);
    }
    let meta = Metadata {
        tool: "ecasim",
        version: env!("CARGO_PKG_VERSION"),
        complete,
        base_seed: spec.base_seed,
        seed_derivation: "splitmix64 chain over (base_seed, variant code, N, replication)",
        replications: spec.replications,
        variants: &spec.variants,
        nodes: &spec.nodes,
        confidence_level: crate::metrics::CONFIDENCE_LEVEL,
        template: &spec.template,
        files: names,
    };
    let path = dir.join(METADATA_FILE);
    let mut file = fs::File::create(&path).map_err(|e| output_error(&path, e))?;
    serde_json::to_writer_pretty(&mut file, &meta)
        .map_err(std::io::Error::from)
        .and_then(|_| file.write_all(b"\n"))
        .map_err(|e| output_error(&path, e))?;
    written.push(path);
    Ok(written)
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub result: SweepResult,
    /// Raw replications per cell, in replication order.
    pub runs: BTreeMap<(Variant, usize), Vec<RunMetrics>>,
    pub files: Vec<PathBuf>,
}

/// Runs every replication of every (variant, N) cell, aggregates, and
/// writes the figure datasets when an output directory is set.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome, SweepError> {
    spec.validate()?;
    if let Some(dir) = &spec.output_dir {
        ensure_writable(dir)?;
    }
    check_seed_collisions(spec)?;

    let cells = spec.cells();
    let execute = || -> Vec<Result<Vec<RunMetrics>, ConfigError>> {
        cells
            .par_iter()
            .map(|&(v, n)| {
                (0..spec.replications)
                    .into_par_iter()
                    .map(|r| channel::run(&spec.config_for(v, n, r)))
                    .collect()
            })
            .collect()
    };
    let outcomes = match spec.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| ConfigError::Invalid(format!("cannot start worker pool: {e}")))?
            .install(execute),
        None => execute(),
    };

    let mut runs = BTreeMap::new();
    let mut failure = None;
    for (&(v, n), outcome) in cells.iter().zip(outcomes) {
        match outcome {
            Ok(r) => {
                runs.insert((v, n), r);
            }
            Err(e) => {
                failure.get_or_insert(SweepError::Cell {
                    cell: format!("{v}/N={n}"),
                    msg: e.to_string(),
                });
            }
        }
    }
    let result = aggregate(&runs)?;
    let files = match &spec.output_dir {
        Some(dir) => write_outputs(dir, spec, &result, failure.is_none())?,
        None => Vec::new(),
    };
    match failure {
        Some(e) => Err(e),
        None => Ok(SweepOutcome { result, runs, files }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn seeds_are_stable_and_distinct() {
        assert_eq!(
            derive_seed(7, Variant::CsmaEca, 10, 3),
            derive_seed(7, Variant::CsmaEca, 10, 3)
        );
        assert_ne!(
            derive_seed(7, Variant::CsmaEca, 2, 0),
            derive_seed(7, Variant::CsmaEca, 3, 0)
        );
        let mut seen = HashSet::new();
        for base in [0u64, 1, 42, u64::MAX] {
            seen.clear();
            for v in Variant::ALL {
                for n in 1..=64 {
                    for r in 0..200 {
                        assert!(seen.insert(derive_seed(base, v, n, r)), "collision at {base} {v} {n} {r}");
                    }
                }
            }
        }
    }

    #[test]
    fn default_sweep_has_no_seed_collisions() {
        check_seed_collisions(&SweepSpec::default()).unwrap();
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(1.0), "1");
        assert_eq!(format_sig6(0.5), "0.5");
        assert_eq!(format_sig6(2.0 / 3.0), "0.666667");
        assert_eq!(format_sig6(123456.7), "123457");
        assert_eq!(format_sig6(9717260.4), "9.71726e+06");
        assert_eq!(format_sig6(1e-5), "1e-05");
        assert_eq!(format_sig6(0.000123456789), "0.000123457");
        assert_eq!(format_sig6(-42.5), "-42.5");
        assert_eq!(format_sig6(999999.7), "1e+06");
    }

    #[test]
    fn spec_validation() {
        assert!(SweepSpec { replications: 0, ..Default::default() }.validate().is_err());
        assert!(SweepSpec { nodes: vec![], ..Default::default() }.validate().is_err());
        assert!(SweepSpec { nodes: vec![0], ..Default::default() }.validate().is_err());
        assert!(SweepSpec { workers: Some(0), ..Default::default() }.validate().is_err());
        SweepSpec::default().validate().unwrap();
    }
}
