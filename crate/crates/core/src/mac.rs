//! Per-node contention state machines.
//!
//! Every transition here is a pure function of the node's own state, the
//! protocol parameters, the variant and (for random draws) the run's
//! generator. A node never learns how many other contenders exist.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Channel access protocol run by every node in a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// Binary exponential backoff, window reset after each success.
    #[serde(rename = "ca")]
    CsmaCa,
    /// Deterministic backoff of `CW_min / 2` after each success.
    #[serde(rename = "eca")]
    CsmaEca,
    /// ECA keeping the backoff stage after a success, deterministic backoff `CW(k) / 2`.
    #[serde(rename = "eca-hys")]
    EcaHysteresis,
    /// Hysteresis plus `2^k` packets per transmission.
    #[serde(rename = "eca-hys-fs")]
    EcaHysteresisFairShare,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::CsmaCa,
        Variant::CsmaEca,
        Variant::EcaHysteresis,
        Variant::EcaHysteresisFairShare,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::CsmaCa => "ca",
            Variant::CsmaEca => "eca",
            Variant::EcaHysteresis => "eca-hys",
            Variant::EcaHysteresisFairShare => "eca-hys-fs",
        }
    }

    /// Stable small integer used when mixing seeds.
    pub fn code(self) -> u64 {
        match self {
            Variant::CsmaCa => 0,
            Variant::CsmaEca => 1,
            Variant::EcaHysteresis => 2,
            Variant::EcaHysteresisFairShare => 3,
        }
    }

    pub fn is_deterministic(self) -> bool {
        self != Variant::CsmaCa
    }

    pub fn keeps_stage_on_success(self) -> bool {
        matches!(self, Variant::EcaHysteresis | Variant::EcaHysteresisFairShare)
    }

    pub fn is_fair_share(self) -> bool {
        self == Variant::EcaHysteresisFairShare
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "ca" => Ok(Variant::CsmaCa),
            "eca" => Ok(Variant::CsmaEca),
            "eca-hys" => Ok(Variant::EcaHysteresis),
            "eca-hys-fs" => Ok(Variant::EcaHysteresisFairShare),
            other => Err(ConfigError::UnknownVariant(other.to_string())),
        }
    }
}

/// Contention window parameters shared by all nodes of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub cw_min: u32,
    pub max_stage: u32,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            cw_min: 32,
            max_stage: 5,
        }
    }
}

impl ProtocolParams {
    pub fn new(cw_min: u32, max_stage: u32) -> Result<Self, ConfigError> {
        let params = ProtocolParams { cw_min, max_stage };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.cw_min < 2 || !self.cw_min.is_power_of_two() {
            return Err(ConfigError::Invalid(format!(
                "cw_min must be a power of two >= 2, got {}",
                self.cw_min
            )));
        }
        // CW(m) has to fit in a u32.
        if u64::from(self.cw_min) << self.max_stage > u64::from(u32::MAX) {
            return Err(ConfigError::Invalid(format!(
                "cw_min {} with max_stage {} overflows the contention window",
                self.cw_min, self.max_stage
            )));
        }
        Ok(())
    }

    /// Contention window at `stage`: `2^stage * cw_min`.
    pub fn cw(&self, stage: u32) -> u32 {
        assert!(
            stage <= self.max_stage,
            "backoff stage {stage} exceeds maximum stage {}",
            self.max_stage
        );
        self.cw_min << stage
    }
}

/// Uniform draw from `[0, CW(stage) - 1]`.
pub fn sample_random_backoff<R: Rng + ?Sized>(params: &ProtocolParams, stage: u32, rng: &mut R) -> u32 {
    rng.gen_range(0..params.cw(stage))
}

/// Backoff chosen after a successful transmission by the ECA family.
///
/// Plain ECA always uses `CW_min / 2`; the hysteresis variants use
/// `CW(stage) / 2`. Calling this for [`Variant::CsmaCa`] is a bug.
pub fn deterministic_backoff(params: &ProtocolParams, variant: Variant, stage: u32) -> u32 {
    match variant {
        Variant::CsmaCa => panic!("CSMA/CA has no deterministic backoff"),
        Variant::CsmaEca => params.cw_min / 2,
        Variant::EcaHysteresis | Variant::EcaHysteresisFairShare => params.cw(stage) / 2,
    }
}

fn burst_for(variant: Variant, stage: u32) -> u32 {
    if variant.is_fair_share() {
        1 << stage
    } else {
        1
    }
}

/// One contender's backoff state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeState {
    pub backoff: u32,
    pub stage: u32,
    /// Packets sent on the next attempt.
    pub pending_burst: u32,
    /// Payload bits successfully delivered so far.
    pub delivered_bits: u64,
}

impl NodeState {
    /// Cold start: stage 0, uniform backoff over `[0, CW_min - 1]`.
    pub fn initial<R: Rng + ?Sized>(params: &ProtocolParams, variant: Variant, rng: &mut R) -> Self {
        NodeState {
            backoff: sample_random_backoff(params, 0, rng),
            stage: 0,
            pending_burst: burst_for(variant, 0),
            delivered_bits: 0,
        }
    }

    pub fn wants_to_transmit(&self) -> bool {
        self.backoff == 0
    }

    /// Transition after this node's transmission was acknowledged.
    ///
    /// Delivery accounting is left to the caller.
    pub fn on_success<R: Rng + ?Sized>(self, params: &ProtocolParams, variant: Variant, rng: &mut R) -> Self {
        let stage = if variant.keeps_stage_on_success() {
            self.stage
        } else {
            0
        };
        let backoff = match variant {
            Variant::CsmaCa => sample_random_backoff(params, stage, rng),
            _ => deterministic_backoff(params, variant, stage),
        };
        NodeState {
            backoff,
            stage,
            pending_burst: burst_for(variant, stage),
            ..self
        }
    }

    /// Transition after this node took part in a collision. The packet
    /// stays queued; the stage saturates at `max_stage`.
    pub fn on_collision<R: Rng + ?Sized>(self, params: &ProtocolParams, variant: Variant, rng: &mut R) -> Self {
        let stage = (self.stage + 1).min(params.max_stage);
        NodeState {
            backoff: sample_random_backoff(params, stage, rng),
            stage,
            pending_burst: burst_for(variant, stage),
            ..self
        }
    }

    /// Transition for a node that stayed silent during an empty slot.
    pub fn on_empty_slot(self) -> Self {
        assert!(
            self.backoff > 0,
            "node with expired backoff must transmit, not observe an empty slot"
        );
        NodeState {
            backoff: self.backoff - 1,
            ..self
        }
    }

    /// Checks the per-state invariants; used by tests and debug assertions.
    pub fn is_consistent(&self, params: &ProtocolParams, variant: Variant) -> bool {
        self.stage <= params.max_stage
            && self.backoff < params.cw(self.stage)
            && self.pending_burst == burst_for(variant, self.stage)
    }
}
