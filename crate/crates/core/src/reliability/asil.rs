// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ReliabilityError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AsilLevel {
    B,
    C,
    D,
}

impl AsilLevel {
    /// SoC failures per 10⁹ hours.
    pub fn soc_fit_budget(self) -> f64 {
        match self {
            AsilLevel::D => 10.0,
            AsilLevel::B | AsilLevel::C => 100.0,
        }
    }
}

impl fmt::Display for AsilLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AsilLevel::B => "asil-b",
            AsilLevel::C => "asil-c",
            AsilLevel::D => "asil-d",
        };
        f.write_str(s)
    }
}

impl TryFrom<String> for AsilLevel {
    type Error = ReliabilityError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<AsilLevel> for String {
    fn from(l: AsilLevel) -> String {
        l.to_string()
    }
}

impl FromStr for AsilLevel {
    type Err = ReliabilityError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        match lower.strip_prefix("asil-").unwrap_or(&lower) {
            "b" => Ok(AsilLevel::B),
            "c" => Ok(AsilLevel::C),
            "d" => Ok(AsilLevel::D),
            _ => Err(ReliabilityError::Domain(format!("unknown ASIL level `{s}`"))),
        }
    }
}

/// The four MAC configurations of the reference IP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MacConfig {
    #[serde(rename = "MAC-32")]
    Mac32,
    #[serde(rename = "MAC-64")]
    Mac64,
    #[serde(rename = "MAC-128")]
    Mac128,
    #[serde(rename = "MAC-256")]
    Mac256,
}

impl MacConfig {
    pub const ALL: [MacConfig; 4] = [MacConfig::Mac32, MacConfig::Mac64, MacConfig::Mac128, MacConfig::Mac256];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for MacConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MAC-{}", 32 << self.index())
    }
}

impl FromStr for MacConfig {
    type Err = ReliabilityError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MacConfig::ALL
            .into_iter()
            .find(|m| m.to_string().eq_ignore_ascii_case(s) || (32 << m.index()).to_string() == s)
            .ok_or_else(|| ReliabilityError::Domain(format!("unknown MAC configuration `{s}`")))
    }
}

/// Published ASIL-D per-inference thresholds, indexed by [`MacConfig`].
pub const PUBLISHED_THRESHOLD: [f64; 4] = [0.1e-15, 0.12e-15, 0.15e-15, 0.23e-15];
/// NPU share of SoC area, indexed by [`MacConfig`].
pub const PUBLISHED_AREA_FRACTION: [f64; 4] = [0.12, 0.14, 0.17, 0.27];
pub const PUBLISHED_INFERENCE_TIME_S: f64 = 0.3e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsilTarget {
    pub level: AsilLevel,
    pub soc_fit_budget: f64,
    pub area_fraction: f64,
    pub inference_time_s: f64,
    pub threshold_per_inference: f64,
}

/// Per-inference threshold derived from the SoC budget, NPU area share and inference time.
pub fn asil_threshold(level: AsilLevel, area_fraction: f64, inference_time_s: f64) -> Result<AsilTarget, ReliabilityError> {
    if !(area_fraction > 0.0 && area_fraction <= 1.0) {
        return Err(ReliabilityError::Domain(format!("area fraction must lie in (0, 1], got {area_fraction}")));
    }
    if !(inference_time_s > 0.0) {
        return Err(ReliabilityError::Domain(format!("inference time must be positive, got {inference_time_s}")));
    }
    let soc = level.soc_fit_budget();
    Ok(AsilTarget {
        level,
        soc_fit_budget: soc,
        area_fraction,
        inference_time_s,
        threshold_per_inference: soc * area_fraction * inference_time_s / (1e9 * 3600.0),
    })
}

/// Canonical target for a MAC configuration: the published constant for
/// ASIL-D, the derived threshold for ASIL-B/C.
pub fn published_target(mac: MacConfig, level: AsilLevel) -> AsilTarget {
    let i = mac.index();
    let mut t = asil_threshold(level, PUBLISHED_AREA_FRACTION[i], PUBLISHED_INFERENCE_TIME_S).expect("valid constants");
    if level == AsilLevel::D {
        t.threshold_per_inference = PUBLISHED_THRESHOLD[i];
    }
    t
}

pub fn meets_asil(sdc_npu: f64, target: &AsilTarget) -> bool {
    sdc_npu < target.threshold_per_inference
}
