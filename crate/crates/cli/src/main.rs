use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ecasim::channel::{self, Simulator};
use ecasim::runner::{run_sweep, SweepSpec};
use ecasim::{RunMetrics, SimConfig, Variant};

#[derive(Parser, Debug)]
#[command(name = "ecasim", version, about = "Slotted CSMA/CA and CSMA/ECA contention simulator")]
struct Cli {
    /// Print the effective configuration before running.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Execute one saturated run and print its metrics.
    Run {
        #[command(flatten)]
        sim: SimArgs,
        /// Also print the full metrics record as one JSON line.
        #[arg(long)]
        json: bool,
    },
    /// Replicated sweep over variants and node counts; writes figure datasets.
    Sweep(SweepArgs),
    /// Dump the per-slot trace of one run.
    Trace {
        #[command(flatten)]
        sim: SimArgs,
        /// Maximum number of slots to emit.
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        slots: u64,
        /// Write the trace here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Simulation flags. Unset flags fall back to the config file, then to defaults.
#[derive(Args, Debug, Default)]
struct SimArgs {
    /// `key = value` file with SimConfig fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// ca, eca, eca-hys or eca-hys-fs.
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    nodes: Option<u64>,
    /// Simulated seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Seconds excluded from throughput and fairness.
    #[arg(long)]
    warmup: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    cw_min: Option<u32>,
    #[arg(long)]
    max_stage: Option<u32>,
    #[command(flatten)]
    timing: TimingArgs,
}

#[derive(Args, Debug, Default)]
struct TimingArgs {
    #[arg(long)]
    sigma_us: Option<f64>,
    #[arg(long)]
    difs_us: Option<f64>,
    #[arg(long)]
    sifs_us: Option<f64>,
    #[arg(long)]
    payload_bits: Option<u64>,
    #[arg(long)]
    header_bits: Option<u64>,
    #[arg(long)]
    ack_bits: Option<u64>,
    #[arg(long)]
    data_rate_bps: Option<f64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// `key = value` file with SimConfig fields shared by every run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma separated variants.
    #[arg(long, value_delimiter = ',', default_value = "ca,eca,eca-hys,eca-hys-fs")]
    variants: Vec<Variant>,
    /// Smallest node count.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    nodes_from: u64,
    /// Largest node count (inclusive).
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    nodes_to: u64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    replications: u64,
    /// Base seed; per-run seeds are derived from it.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    warmup: Option<f64>,
    #[arg(long)]
    cw_min: Option<u32>,
    #[arg(long)]
    max_stage: Option<u32>,
    #[command(flatten)]
    timing: TimingArgs,
    /// Output directory for datasets.
    #[arg(long, env = "ECASIM_OUT_DIR", default_value = "results")]
    out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Usage(_) => ExitCode::from(2),
            Failure::Runtime(_) => ExitCode::from(1),
        }
    }
}

fn load_file(config: &mut SimConfig, path: &Option<PathBuf>) -> Result<(), Failure> {
    if let Some(path) = path {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Runtime(format!("cannot read {}: {e}", path.display())))?;
        config
            .apply_file(&text)
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn apply_timing(config: &mut SimConfig, t: &TimingArgs) {
    let timing = &mut config.timing;
    if let Some(v) = t.sigma_us {
        timing.sigma_us = v;
    }
    if let Some(v) = t.difs_us {
        timing.difs_us = v;
    }
    if let Some(v) = t.sifs_us {
        timing.sifs_us = v;
    }
    if let Some(v) = t.payload_bits {
        timing.payload_bits = v;
    }
    if let Some(v) = t.header_bits {
        timing.header_bits = v;
    }
    if let Some(v) = t.ack_bits {
        timing.ack_bits = v;
    }
    if let Some(v) = t.data_rate_bps {
        timing.data_rate_bps = v;
    }
}

impl SimArgs {
    fn resolve(&self) -> Result<SimConfig, Failure> {
        let mut config = SimConfig::default();
        load_file(&mut config, &self.config)?;
        if let Some(v) = self.variant {
            config.variant = v;
        }
        if let Some(n) = self.nodes {
            config.nodes = n as usize;
        }
        if let Some(d) = self.duration {
            config.duration_s = d;
        }
        if let Some(w) = self.warmup {
            config.warmup_s = w;
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(c) = self.cw_min {
            config.cw_min = c;
        }
        if let Some(m) = self.max_stage {
            config.max_stage = m;
        }
        apply_timing(&mut config, &self.timing);
        config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(config)
    }
}

impl SweepArgs {
    fn resolve(&self) -> Result<SweepSpec, Failure> {
        if self.nodes_from > self.nodes_to {
            return Err(Failure::Usage(format!(
                "--nodes-from {} exceeds --nodes-to {}",
                self.nodes_from, self.nodes_to
            )));
        }
        let mut template = SimConfig::default();
        load_file(&mut template, &self.config)?;
        if let Some(d) = self.duration {
            template.duration_s = d;
        }
        if let Some(w) = self.warmup {
            template.warmup_s = w;
        }
        if let Some(c) = self.cw_min {
            template.cw_min = c;
        }
        if let Some(m) = self.max_stage {
            template.max_stage = m;
        }
        apply_timing(&mut template, &self.timing);
        let mut variants = Vec::new();
        for v in &self.variants {
            if !variants.contains(v) {
                variants.push(*v);
            }
        }
        let spec = SweepSpec {
            variants,
            nodes: (self.nodes_from as usize..=self.nodes_to as usize).collect(),
            replications: self.replications as usize,
            base_seed: self.seed,
            template,
            output_dir: Some(self.out_dir.clone()),
            workers: self.workers.map(|w| w as usize),
        };
        spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(spec)
    }
}

fn print_summary(m: &RunMetrics) {
    println!("variant      {}", m.variant);
    println!("nodes        {}", m.nodes);
    println!("seed         {}", m.seed);
    println!("simulated    {:.6} s", m.elapsed_us / 1e6);
    println!("throughput   {:.4} Mb/s", m.aggregate_throughput / 1e6);
    match m.jfi {
        Some(j) => println!("jfi          {j:.5}"),
        None => println!("jfi          undefined (no traffic)"),
    }
    let c = m.slot_counts;
    println!(
        "slots        {} (empty {}, success {}, collision {})",
        c.total(),
        c.empty,
        c.success,
        c.collision
    );
    println!("packets      {}", m.delivered_packets);
    match m.convergence_slot {
        Some(s) => println!("converged    yes, zero collisions from slot {s}"),
        None => println!("converged    no"),
    }
}

fn cmd_run(sim: &SimArgs, json: bool, verbose: u8) -> Result<(), Failure> {
    let config = sim.resolve()?;
    if verbose > 0 {
        eprintln!("{config:?}");
    }
    let metrics = channel::run(&config).map_err(|e| Failure::Runtime(e.to_string()))?;
    print_summary(&metrics);
    if json {
        let line = serde_json::to_string(&metrics)
            .map_err(|e| Failure::Runtime(format!("cannot encode metrics: {e}")))?;
        println!("{line}");
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs, verbose: u8) -> Result<(), Failure> {
    let spec = args.resolve()?;
    if verbose > 0 {
        eprintln!("{spec:?}");
    }
    let start = Instant::now();
    let outcome = run_sweep(&spec).map_err(|e| Failure::Runtime(e.to_string()))?;
    for cell in &outcome.result.cells {
        let jfi = cell.jfi.map_or("NA".to_string(), |j| format!("{:.4}", j.mean));
        println!(
            "{:<11} N={:<3} throughput {:>8.4} Mb/s ±{:.4}  jfi {}  converged {:.2}",
            cell.variant,
            cell.nodes,
            cell.throughput.mean / 1e6,
            cell.throughput.half_width / 1e6,
            jfi,
            cell.converged_fraction
        );
    }
    println!(
        "{} cells x {} replications in {:.1} s",
        outcome.result.cells.len(),
        spec.replications,
        start.elapsed().as_secs_f64()
    );
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_trace(sim: &SimArgs, slots: u64, out: &Option<PathBuf>, verbose: u8) -> Result<(), Failure> {
    let config = sim.resolve()?;
    if verbose > 0 {
        eprintln!("{config:?}");
    }
    let mut simulator = Simulator::from_config(&config).map_err(|e| Failure::Usage(e.to_string()))?;
    simulator.enable_trace();
    let deadline = config.duration_s * 1e6;
    while simulator.slot_index() < slots && simulator.elapsed_us() < deadline {
        simulator.step();
    }
    let write = |w: &mut dyn Write| -> io::Result<()> {
        for rec in simulator.trace().unwrap_or_default() {
            writeln!(w, "{rec}")?;
        }
        w.flush()
    };
    let result = match out {
        Some(path) => fs::File::create(path).and_then(|f| write(&mut BufWriter::new(f))),
        None => write(&mut BufWriter::new(io::stdout().lock())),
    };
    result.map_err(|e| Failure::Runtime(format!("cannot write trace: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Run { sim, json } => cmd_run(sim, *json, cli.verbose),
        Command::Sweep(args) => cmd_sweep(args, cli.verbose),
        Command::Trace { sim, slots, out } => cmd_trace(sim, *slots, out, cli.verbose),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Usage(msg) => eprintln!("error: {msg}\n\nFor more information, try '--help'."),
                Failure::Runtime(msg) => eprintln!("error: {msg}"),
            }
            failure.exit_code()
        }
    }
}
