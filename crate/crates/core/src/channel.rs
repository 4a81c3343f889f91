//! Slotted contention engine.
//!
//! Each system slot is empty, a success or a collision depending on how
//! many nodes have an expired backoff counter. Only empty slots decrement
//! counters; busy slots freeze everyone who stayed silent.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::ConfigError;
use crate::mac::{NodeState, ProtocolParams, Variant};
use crate::metrics::{jain_index, RunMetrics, SlotCounts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SlotKind {
    Empty,
    Success,
    Collision,
}

impl SlotKind {
    pub fn code(self) -> char {
        match self {
            SlotKind::Empty => 'E',
            SlotKind::Success => 'S',
            SlotKind::Collision => 'C',
        }
    }
}

/// Classifies a slot by how many nodes transmitted in it.
pub fn classify_slot(transmitters: usize) -> SlotKind {
    match transmitters {
        0 => SlotKind::Empty,
        1 => SlotKind::Success,
        _ => SlotKind::Collision,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotOutcome {
    pub kind: SlotKind,
    pub transmitters: Vec<usize>,
    pub duration_us: f64,
    /// Packets acknowledged in this slot (zero unless `kind` is `Success`).
    pub packets_delivered: u32,
}

/// Channel timing. Durations in microseconds, frame sizes in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingModel {
    pub sigma_us: f64,
    pub difs_us: f64,
    pub sifs_us: f64,
    pub payload_bits: u64,
    pub header_bits: u64,
    pub ack_bits: u64,
    pub data_rate_bps: f64,
}

impl Default for TimingModel {
    fn default() -> Self {
        TimingModel {
            sigma_us: 20.0,
            difs_us: 50.0,
            sifs_us: 10.0,
            payload_bits: 12_000,
            header_bits: 400,
            ack_bits: 304,
            data_rate_bps: 11e6,
        }
    }
}

impl TimingModel {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let durations = [
            ("sigma_us", self.sigma_us),
            ("difs_us", self.difs_us),
            ("sifs_us", self.sifs_us),
            ("data_rate_bps", self.data_rate_bps),
        ];
        for (name, value) in durations {
            if !(value.is_finite() && value > 0.0) {
                return Err(ConfigError::Invalid(format!(
                    "{name} must be a positive number, got {value}"
                )));
            }
        }
        let sizes = [
            ("payload_bits", self.payload_bits),
            ("header_bits", self.header_bits),
            ("ack_bits", self.ack_bits),
        ];
        for (name, value) in sizes {
            if value == 0 {
                return Err(ConfigError::Invalid(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Airtime of one data frame (header plus payload).
    pub fn data_airtime_us(&self) -> f64 {
        (self.header_bits + self.payload_bits) as f64 * 1e6 / self.data_rate_bps
    }

    pub fn ack_airtime_us(&self) -> f64 {
        self.ack_bits as f64 * 1e6 / self.data_rate_bps
    }

    /// Duration of a slot of the given kind. `bursts` lists the burst size
    /// of every transmitter in the slot.
    pub fn slot_duration(&self, kind: SlotKind, bursts: &[u32]) -> f64 {
        match kind {
            SlotKind::Empty => {
                debug_assert!(bursts.is_empty());
                self.sigma_us
            }
            SlotKind::Success => {
                assert!(
                    bursts.len() == 1 && bursts[0] > 0,
                    "success slot needs exactly one non-empty burst, got {bursts:?}"
                );
                let exchange = self.data_airtime_us() + self.sifs_us + self.ack_airtime_us();
                self.difs_us + f64::from(bursts[0]) * exchange
            }
            SlotKind::Collision => {
                assert!(bursts.len() >= 2, "collision needs at least two transmitters");
                let longest = bursts.iter().copied().max().unwrap_or(0);
                let ack_timeout = self.sifs_us + self.ack_airtime_us();
                self.difs_us + f64::from(longest) * self.data_airtime_us() + ack_timeout
            }
        }
    }
}

/// One line of the per-slot trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub slot_index: u64,
    pub kind: SlotKind,
    pub transmitters: Vec<usize>,
    pub duration_us: f64,
    /// Backoff stage of each transmitter when it transmitted.
    pub stages: Vec<u32>,
}

fn write_list<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T]) -> fmt::Result {
    if items.is_empty() {
        return f.write_str("-");
    }
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{item}")?;
    }
    Ok(())
}

fn parse_list<T: FromStr>(field: &str) -> Option<Vec<T>> {
    if field == "-" {
        return Some(Vec::new());
    }
    field.split(',').map(|s| s.parse().ok()).collect()
}

/// Tab separated: `slot_index kind transmitters duration_us stages`, lists
/// comma separated and `-` when empty.
impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t", self.slot_index, self.kind.code())?;
        write_list(f, &self.transmitters)?;
        write!(f, "\t{:.3}\t", self.duration_us)?;
        write_list(f, &self.stages)
    }
}

impl FromStr for TraceRecord {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let fields: Vec<&str> = line.trim_end().split('\t').collect();
        if fields.len() != 5 {
            return Err(format!("expected 5 fields, got {}", fields.len()));
        }
        let bad = |what: &str| format!("bad {what} in trace line `{line}`");
        let kind = match fields[1] {
            "E" => SlotKind::Empty,
            "S" => SlotKind::Success,
            "C" => SlotKind::Collision,
            _ => return Err(bad("kind")),
        };
        Ok(TraceRecord {
            slot_index: fields[0].parse().map_err(|_| bad("slot index"))?,
            kind,
            transmitters: parse_list(fields[2]).ok_or_else(|| bad("transmitters"))?,
            duration_us: fields[3].parse().map_err(|_| bad("duration"))?,
            stages: parse_list(fields[4]).ok_or_else(|| bad("stages"))?,
        })
    }
}

/// Smallest slot index `s` such that no collision happens in `[s, end)` and
/// at least `window` slots follow `s`.
pub fn convergence_index<I>(kinds: I, window: u64) -> Option<u64>
where
    I: IntoIterator<Item = SlotKind>,
{
    assert!(window >= 1, "convergence window must be at least one slot");
    let mut total = 0u64;
    let mut last_collision = None;
    for (i, kind) in kinds.into_iter().enumerate() {
        total += 1;
        if kind == SlotKind::Collision {
            last_collision = Some(i as u64);
        }
    }
    converged_from(last_collision, total, window)
}

fn converged_from(last_collision: Option<u64>, total: u64, window: u64) -> Option<u64> {
    let start = last_collision.map_or(0, |c| c + 1);
    (total.saturating_sub(start) >= window).then_some(start)
}

/// Number of trailing slots that must be collision-free for a run of
/// `total` slots to count as converged.
pub fn convergence_window(total: u64, fraction: f64) -> u64 {
    ((total as f64 * fraction).ceil() as u64).max(1)
}

/// Mutable state of one simulation run.
#[derive(Debug, Clone)]
pub struct Simulator {
    params: ProtocolParams,
    variant: Variant,
    timing: TimingModel,
    nodes: Vec<NodeState>,
    rng: ChaCha8Rng,
    slot_index: u64,
    elapsed_us: f64,
    counts: SlotCounts,
    delivered_packets: u64,
    last_collision: Option<u64>,
    trace: Option<Vec<TraceRecord>>,
    transmitters: Vec<usize>,
    bursts: Vec<u32>,
}

impl Simulator {
    /// Builds a cold-started population: every node at stage 0 with a
    /// uniform backoff over `[0, CW_min - 1]`, drawn in node order.
    pub fn new(
        variant: Variant,
        nodes: usize,
        params: ProtocolParams,
        timing: TimingModel,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nodes = (0..nodes)
            .map(|_| NodeState::initial(&params, variant, &mut rng))
            .collect();
        Simulator {
            params,
            variant,
            timing,
            nodes,
            rng,
            slot_index: 0,
            elapsed_us: 0.0,
            counts: SlotCounts::default(),
            delivered_packets: 0,
            last_collision: None,
            trace: None,
            transmitters: Vec::new(),
            bursts: Vec::new(),
        }
    }

    pub fn from_config(config: &SimConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let mut sim = Simulator::new(
            config.variant,
            config.nodes,
            config.protocol(),
            config.timing,
            config.seed,
        );
        if config.trace_enabled {
            sim.enable_trace();
        }
        Ok(sim)
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn trace(&self) -> Option<&[TraceRecord]> {
        self.trace.as_deref()
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn slot_index(&self) -> u64 {
        self.slot_index
    }

    pub fn elapsed_us(&self) -> f64 {
        self.elapsed_us
    }

    pub fn counts(&self) -> SlotCounts {
        self.counts
    }

    pub fn delivered_packets(&self) -> u64 {
        self.delivered_packets
    }

    pub fn last_collision(&self) -> Option<u64> {
        self.last_collision
    }

    /// Advances one system slot and reports what happened in it.
    pub fn step(&mut self) -> SlotOutcome {
        let (kind, duration_us, packets_delivered) = self.advance();
        SlotOutcome {
            kind,
            transmitters: self.transmitters.clone(),
            duration_us,
            packets_delivered,
        }
    }

    fn advance(&mut self) -> (SlotKind, f64, u32) {
        self.transmitters.clear();
        self.bursts.clear();
        for (i, node) in self.nodes.iter().enumerate() {
            if node.wants_to_transmit() {
                self.transmitters.push(i);
                self.bursts.push(node.pending_burst);
            }
        }
        let kind = classify_slot(self.transmitters.len());
        let duration = self.timing.slot_duration(kind, &self.bursts);
        let stages: Option<Vec<u32>> = self
            .trace
            .as_ref()
            .map(|_| self.transmitters.iter().map(|&i| self.nodes[i].stage).collect());

        let mut packets = 0;
        match kind {
            SlotKind::Empty => {
                for node in &mut self.nodes {
                    *node = node.on_empty_slot();
                }
                self.counts.empty += 1;
            }
            SlotKind::Success => {
                let node = &mut self.nodes[self.transmitters[0]];
                packets = node.pending_burst;
                node.delivered_bits += u64::from(packets) * self.timing.payload_bits;
                *node = node.on_success(&self.params, self.variant, &mut self.rng);
                self.delivered_packets += u64::from(packets);
                self.counts.success += 1;
            }
            SlotKind::Collision => {
                for &i in &self.transmitters {
                    self.nodes[i] = self.nodes[i].on_collision(&self.params, self.variant, &mut self.rng);
                }
                self.last_collision = Some(self.slot_index);
                self.counts.collision += 1;
            }
        }

        if let (Some(trace), Some(stages)) = (self.trace.as_mut(), stages) {
            trace.push(TraceRecord {
                slot_index: self.slot_index,
                kind,
                transmitters: self.transmitters.clone(),
                duration_us: duration,
                stages,
            });
        }
        self.slot_index += 1;
        self.elapsed_us += duration;
        (kind, duration, packets)
    }

    /// Consumes the run of empty slots before the next transmission in one
    /// pass, stopping early once `limit_us` of simulated time has elapsed.
    /// Equivalent slot-for-slot to repeated [`Simulator::step`] calls.
    /// Returns how many empty slots were consumed.
    fn skip_empty(&mut self, limit_us: f64) -> u32 {
        let Some(gap) = self.nodes.iter().map(|n| n.backoff).min() else {
            return 0;
        };
        let mut k = 0;
        while k < gap && self.elapsed_us < limit_us {
            self.elapsed_us += self.timing.sigma_us;
            k += 1;
        }
        if k > 0 {
            for node in &mut self.nodes {
                node.backoff -= k;
            }
            self.slot_index += u64::from(k);
            self.counts.empty += u64::from(k);
        }
        k
    }

    /// Runs slots until `duration_us` of simulated time has elapsed. A slot
    /// starting before the deadline always completes.
    pub fn run_until(&mut self, duration_us: f64) {
        self.run_measured(duration_us, 0.0);
    }

    /// Like [`Simulator::run_until`], returning each node's delivered bits
    /// at the first slot boundary at or after `warmup_us`, with that time.
    fn run_measured(&mut self, duration_us: f64, warmup_us: f64) -> (Vec<u64>, f64) {
        let mut snapshot: Option<(Vec<u64>, f64)> = None;
        let fast = self.trace.is_none();
        loop {
            if snapshot.is_none() && self.elapsed_us >= warmup_us {
                let bits = self.nodes.iter().map(|n| n.delivered_bits).collect();
                snapshot = Some((bits, self.elapsed_us));
            }
            if self.elapsed_us >= duration_us {
                break;
            }
            let limit = if snapshot.is_none() { warmup_us } else { duration_us };
            if fast && self.skip_empty(limit) > 0 {
                continue;
            }
            self.advance();
        }
        snapshot.unwrap_or_else(|| (vec![0; self.nodes.len()], 0.0))
    }

    fn metrics(&self, config: &SimConfig, baseline: &[u64], start_us: f64) -> RunMetrics {
        let measured_s = (self.elapsed_us - start_us) / 1e6;
        let per_node_bits: Vec<u64> = self
            .nodes
            .iter()
            .zip(baseline)
            .map(|(n, b)| n.delivered_bits - b)
            .collect();
        let per_node_throughput: Vec<f64> = per_node_bits
            .iter()
            .map(|&b| if measured_s > 0.0 { b as f64 / measured_s } else { 0.0 })
            .collect();
        let delivered_bits: u64 = per_node_bits.iter().sum();
        let aggregate = if measured_s > 0.0 {
            delivered_bits as f64 / measured_s
        } else {
            0.0
        };
        let total = self.slot_index;
        let window = convergence_window(total, config.convergence_window);
        RunMetrics {
            variant: config.variant,
            nodes: config.nodes,
            seed: config.seed,
            jfi: jain_index(&per_node_throughput).ok(),
            per_node_throughput,
            per_node_delivered_bits: per_node_bits,
            aggregate_throughput: aggregate,
            delivered_bits,
            delivered_packets: self.delivered_packets,
            convergence_slot: converged_from(self.last_collision, total, window),
            slot_counts: self.counts,
            elapsed_us: self.elapsed_us,
            measured_us: self.elapsed_us - start_us,
        }
    }
}

/// Executes one saturated run and summarises it.
pub fn run(config: &SimConfig) -> Result<RunMetrics, ConfigError> {
    run_with_trace(config).map(|(metrics, _)| metrics)
}

/// Executes one run, also returning the slot trace when
/// `config.trace_enabled` is set.
pub fn run_with_trace(config: &SimConfig) -> Result<(RunMetrics, Option<Vec<TraceRecord>>), ConfigError> {
    let mut sim = Simulator::from_config(config)?;
    let (baseline, start_us) = sim.run_measured(config.duration_s * 1e6, config.warmup_s * 1e6);
    let metrics = sim.metrics(config, &baseline, start_us);
    Ok((metrics, sim.trace.take()))
}
