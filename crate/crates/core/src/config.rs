//! Run configuration and the `key = value` config file format.

use serde::{Deserialize, Serialize};

use crate::channel::TimingModel;
use crate::error::ConfigError;
use crate::mac::{ProtocolParams, Variant};

/// Everything needed to reproduce one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub variant: Variant,
    pub nodes: usize,
    pub cw_min: u32,
    pub max_stage: u32,
    pub timing: TimingModel,
    pub duration_s: f64,
    /// Deliveries before this time are excluded from throughput and JFI.
    pub warmup_s: f64,
    pub seed: u64,
    pub trace_enabled: bool,
    /// Trailing fraction of slots that must be collision-free for a run to
    /// count as converged.
    pub convergence_window: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            variant: Variant::CsmaEca,
            nodes: 2,
            cw_min: 32,
            max_stage: 5,
            timing: TimingModel::default(),
            duration_s: 10.0,
            warmup_s: 0.0,
            seed: 1,
            trace_enabled: false,
            convergence_window: 0.2,
        }
    }
}

impl SimConfig {
    pub fn protocol(&self) -> ProtocolParams {
        ProtocolParams {
            cw_min: self.cw_min,
            max_stage: self.max_stage,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.nodes == 0 {
            return Err(ConfigError::Invalid("nodes must be at least 1".into()));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "duration_s must be positive, got {}",
                self.duration_s
            )));
        }
        if !(self.warmup_s >= 0.0 && self.warmup_s < self.duration_s) {
            return Err(ConfigError::Invalid(format!(
                "warmup_s must lie in [0, duration_s), got {}",
                self.warmup_s
            )));
        }
        if !(self.convergence_window > 0.0 && self.convergence_window <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "convergence_window must lie in (0, 1], got {}",
                self.convergence_window
            )));
        }
        self.protocol().validate()?;
        self.timing.validate()
    }

    /// Sets one field from its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(value: &str) -> Result<T, String> {
            value.parse().map_err(|_| format!("cannot parse `{value}`"))
        }
        match key {
            "variant" => self.variant = value.parse().map_err(|e: ConfigError| e.to_string())?,
            "nodes" => self.nodes = num(value)?,
            "cw_min" => self.cw_min = num(value)?,
            "max_stage" => self.max_stage = num(value)?,
            "duration_s" => self.duration_s = num(value)?,
            "warmup_s" => self.warmup_s = num(value)?,
            "seed" => self.seed = num(value)?,
            "trace_enabled" => self.trace_enabled = num(value)?,
            "convergence_window" => self.convergence_window = num(value)?,
            "sigma_us" => self.timing.sigma_us = num(value)?,
            "difs_us" => self.timing.difs_us = num(value)?,
            "sifs_us" => self.timing.sifs_us = num(value)?,
            "payload_bits" => self.timing.payload_bits = num(value)?,
            "header_bits" => self.timing.header_bits = num(value)?,
            "ack_bits" => self.timing.ack_bits = num(value)?,
            "data_rate_bps" => self.timing.data_rate_bps = num(value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Applies a config file on top of `self`. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn apply_file(&mut self, text: &str) -> Result<(), ConfigError> {
        for (key, value, line) in parse_pairs(text)? {
            self.set(key, value)
                .map_err(|msg| ConfigError::Parse { line, msg })?;
        }
        Ok(())
    }
}

/// Splits `key = value` lines into (key, value, 1-based line number).
pub fn parse_pairs(text: &str) -> Result<Vec<(&str, &str, usize)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
            line: i + 1,
            msg: format!("expected key=value, got `{line}`"),
        })?;
        out.push((key.trim(), value.trim(), i + 1));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = SimConfig::default();
        c.validate().unwrap();
        assert_eq!(c.cw_min, 32);
        assert_eq!(c.max_stage, 5);
        assert_eq!(c.duration_s, 10.0);
        assert_eq!(c.timing.data_rate_bps, 11e6);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            SimConfig { nodes: 0, ..Default::default() },
            SimConfig { duration_s: 0.0, ..Default::default() },
            SimConfig { duration_s: f64::NAN, ..Default::default() },
            SimConfig { warmup_s: 10.0, ..Default::default() },
            SimConfig { cw_min: 12, ..Default::default() },
            SimConfig { convergence_window: 0.0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn file_overrides() {
        let mut c = SimConfig::default();
        c.apply_file("# comment\nvariant = eca-hys-fs\nnodes=50\n\nsifs_us = 16\nseed = 9\n")
            .unwrap();
        assert_eq!(c.variant, Variant::EcaHysteresisFairShare);
        assert_eq!(c.nodes, 50);
        assert_eq!(c.timing.sifs_us, 16.0);
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn file_errors_carry_line_numbers() {
        let mut c = SimConfig::default();
        match c.apply_file("nodes = 3\nbogus = 1\n") {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(c.apply_file("nodes 3").is_err());
        assert!(c.apply_file("nodes = three").is_err());
        assert!(c.apply_file("variant = dcf").is_err());
    }
}
