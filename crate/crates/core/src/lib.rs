//! Slotted simulator of WLAN contention under saturation.
//!
//! Implements CSMA/CA, CSMA/ECA, and CSMA/ECA with hysteresis and with
//! hysteresis plus fair-share, together with a replicated sweep runner
//! that produces throughput and fairness datasets.
//!
//! ```
//! use ecasim::{channel, SimConfig, Variant};
//!
//! let config = SimConfig { variant: Variant::CsmaEca, nodes: 8, duration_s: 1.0, ..Default::default() };
//! let metrics = channel::run(&config).unwrap();
//! assert!(metrics.aggregate_throughput > 0.0);
//! ```

pub mod channel;
pub mod config;
pub mod error;
pub mod mac;
pub mod metrics;
pub mod runner;

pub use channel::{run, Simulator, SlotKind, SlotOutcome, TimingModel, TraceRecord};
pub use config::SimConfig;
pub use error::{ConfigError, MetricsError, SweepError};
pub use mac::{NodeState, ProtocolParams, Variant};
pub use metrics::{jain_index, RunMetrics, SweepResult};
pub use runner::{derive_seed, run_sweep, SweepSpec};
