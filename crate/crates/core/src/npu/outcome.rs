// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::BlockId;

/// One injectable bit: `(cycle, flip-flop, bit position)` within a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FaultSite {
    pub block: BlockId,
    /// Index into [`super::NpuModel::registers`].
    pub register: usize,
    pub bit: u8,
    pub cycle: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenResult {
    pub top1_labels: Vec<u16>,
    pub cycle_count: u64,
    /// SHA-256 prefix over the final registers and shared buffer.
    pub state_digest: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OutcomeKind {
    Masked,
    Sdc,
    Crash,
}

impl OutcomeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeKind::Masked => "masked",
            OutcomeKind::Sdc => "sdc",
            OutcomeKind::Crash => "crash",
        }
    }
}

impl fmt::Display for OutcomeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OutcomeKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "masked" => Ok(OutcomeKind::Masked),
            "sdc" => Ok(OutcomeKind::Sdc),
            "crash" => Ok(OutcomeKind::Crash),
            _ => Err(format!("unknown outcome kind `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CrashReason {
    Watchdog,
    InvalidAccess,
    IllegalState,
}

impl CrashReason {
    pub fn as_str(self) -> &'static str {
        match self {
            CrashReason::Watchdog => "watchdog",
            CrashReason::InvalidAccess => "invalid_access",
            CrashReason::IllegalState => "illegal_state",
        }
    }
}

impl fmt::Display for CrashReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CrashReason {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "watchdog" => Ok(CrashReason::Watchdog),
            "invalid_access" => Ok(CrashReason::InvalidAccess),
            "illegal_state" => Ok(CrashReason::IllegalState),
            _ => Err(format!("unknown crash reason `{s}`")),
        }
    }
}

/// Classification of one injected run against the golden run.
///
/// The SDC fraction is kept as an exact ratio `mismatches / inputs` so that
/// campaign sums stay exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct InjectionOutcome {
    pub kind: OutcomeKind,
    pub mismatches: u32,
    pub inputs: u32,
    pub crash_reason: Option<CrashReason>,
}

impl InjectionOutcome {
    pub fn masked(inputs: u32) -> Self {
        InjectionOutcome {
            kind: OutcomeKind::Masked,
            mismatches: 0,
            inputs,
            crash_reason: None,
        }
    }

    pub fn crash(inputs: u32, reason: CrashReason) -> Self {
        InjectionOutcome {
            kind: OutcomeKind::Crash,
            mismatches: 0,
            inputs,
            crash_reason: Some(reason),
        }
    }

    /// Classifies a completed run from its top-1 mismatch count.
    pub fn completed(mismatches: u32, inputs: u32) -> Self {
        InjectionOutcome {
            kind: if mismatches == 0 {
                OutcomeKind::Masked
            } else {
                OutcomeKind::Sdc
            },
            mismatches,
            inputs,
            crash_reason: None,
        }
    }

    pub fn sdc_fraction(&self) -> f64 {
        if self.inputs == 0 {
            0.0
        } else {
            f64::from(self.mismatches) / f64::from(self.inputs)
        }
    }

    pub fn is_sdc(&self) -> bool {
        self.kind == OutcomeKind::Sdc
    }
}
