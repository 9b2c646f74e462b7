// SPDX-License-Identifier: Apache-2.0

//! Project configuration file.
//!
//! ```toml
//! [npu]
//! mac_rows = 2
//! mac_cols = 2
//! buffer_bytes = 4096
//!
//! [workload]
//! preset = "tiny-cnn"      # or file = "net.toml", relative to this file
//! seed = 42
//! num_inputs = 16
//!
//! [tech]
//! node = "16nm"            # preset; any TechNode field may be overridden
//! freq_hz = 1e9
//!
//! [logic]
//! fanin = 2.0
//!
//! [sampling]
//! seed = 1
//! total = 20000            # proportional allocation; omit to size each block by margin
//! [sampling.per_block]
//! TSU = 500
//!
//! [protection]
//! mac_config = "MAC-32"
//! reading = "reduction"
//!
//! [target]
//! level = "asil-d"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::campaign::{SamplingPlan, DEFAULT_CONFIDENCE, DEFAULT_MARGIN};
use crate::npu::{BlockId, FaultSpace, NpuConfig, NpuError, Workload};
use crate::protection::{dmr_delta_pct, preset_areas, BlockArea, HardeningReading, Scheme};
use crate::reliability::{
    asil_threshold, published_target, AsilLevel, AsilTarget, LogicFaultParams, MacConfig, ReliabilityError, TechNode,
    PUBLISHED_AREA_FRACTION,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config error at `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

impl ConfigError {
    fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

fn from_reliability(e: ReliabilityError) -> ConfigError {
    match e {
        ReliabilityError::Config { key, reason } => ConfigError::invalid(key, reason),
        other => ConfigError::invalid("tech", other.to_string()),
    }
}

fn default_seed() -> u64 {
    42
}
fn default_inputs() -> usize {
    16
}
fn default_node() -> String {
    "16nm".into()
}
fn default_freq() -> f64 {
    1e9
}
fn default_sampling_seed() -> u64 {
    1
}
fn default_margin() -> f64 {
    DEFAULT_MARGIN
}
fn default_confidence() -> f64 {
    DEFAULT_CONFIDENCE
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSection {
    pub preset: Option<String>,
    pub file: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_inputs")]
    pub num_inputs: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechSection {
    #[serde(default = "default_node")]
    pub node: String,
    #[serde(default = "default_freq")]
    pub freq_hz: f64,
    pub ff_fit_per_mb: Option<f64>,
    pub voltage: Option<f64>,
    pub fom_pct: Option<f64>,
    pub cross_section_cm2: Option<f64>,
    pub qcrit_fc: Option<f64>,
    pub flux: Option<f64>,
}

impl Default for TechSection {
    fn default() -> Self {
        TechSection {
            node: default_node(),
            freq_hz: default_freq(),
            ff_fit_per_mb: None,
            voltage: None,
            fom_pct: None,
            cross_section_cm2: None,
            qcrit_fc: None,
            flux: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    #[serde(default = "default_sampling_seed")]
    pub seed: u64,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    pub total: Option<u64>,
    #[serde(default)]
    pub per_block: BTreeMap<BlockId, u64>,
}

impl Default for SamplingSection {
    fn default() -> Self {
        SamplingSection {
            seed: default_sampling_seed(),
            margin: DEFAULT_MARGIN,
            confidence: DEFAULT_CONFIDENCE,
            total: None,
            per_block: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtectionSection {
    #[serde(default = "default_mac")]
    pub mac_config: MacConfig,
    #[serde(default)]
    pub reading: HardeningReading,
    pub delta_pct: Option<f64>,
    pub schemes: Option<Vec<Scheme>>,
    pub areas: Option<Vec<BlockArea>>,
}

fn default_mac() -> MacConfig {
    MacConfig::Mac32
}

impl Default for ProtectionSection {
    fn default() -> Self {
        ProtectionSection {
            mac_config: MacConfig::Mac32,
            reading: HardeningReading::Reduction,
            delta_pct: None,
            schemes: None,
            areas: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    #[serde(default = "default_level")]
    pub level: AsilLevel,
    /// Replaces the looked-up per-inference threshold.
    pub threshold: Option<f64>,
    /// Derive the threshold from this inference time instead of the lookup.
    pub inference_time_s: Option<f64>,
}

fn default_level() -> AsilLevel {
    AsilLevel::D
}

impl Default for TargetSection {
    fn default() -> Self {
        TargetSection {
            level: AsilLevel::D,
            threshold: None,
            inference_time_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub npu: NpuConfig,
    pub workload: WorkloadSection,
    #[serde(default)]
    pub tech: TechSection,
    #[serde(default)]
    pub logic: LogicFaultParams,
    #[serde(default)]
    pub sampling: SamplingSection,
    #[serde(default)]
    pub protection: ProtectionSection,
    #[serde(default)]
    pub target: TargetSection,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ProjectConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::new(text);
        let cfg: ProjectConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            ConfigError::invalid(key, e.into_inner().message().trim().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = ProjectConfig::from_toml_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match (&self.workload.preset, &self.workload.file) {
            (Some(_), Some(_)) => return Err(ConfigError::invalid("workload", "set either `preset` or `file`, not both")),
            (None, None) => return Err(ConfigError::invalid("workload", "one of `preset` or `file` is required")),
            _ => {}
        }
        self.tech()?;
        if !(self.tech.freq_hz > 0.0) {
            return Err(ConfigError::invalid("tech.freq_hz", "must be positive"));
        }
        self.logic.validate().map_err(from_reliability)?;
        for (key, v) in [("sampling.margin", self.sampling.margin), ("sampling.confidence", self.sampling.confidence)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(ConfigError::invalid(key, "must lie in (0, 1)"));
            }
        }
        for (b, &k) in &self.sampling.per_block {
            if k == 0 {
                return Err(ConfigError::invalid(format!("sampling.per_block.{b}"), "must be at least 1"));
            }
        }
        self.schemes()?;
        self.areas()?;
        self.delta_pct()?;
        if let Some(t) = self.target.threshold {
            if !(t > 0.0) {
                return Err(ConfigError::invalid("target.threshold", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn workload(&self) -> Result<Workload, NpuError> {
        match (&self.workload.preset, &self.workload.file) {
            (Some(name), _) => Workload::preset(name, self.workload.seed, self.workload.num_inputs),
            (None, Some(file)) => Workload::load(&self.base_dir.join(file)),
            (None, None) => Err(NpuError::WorkloadFile("no workload configured".into())),
        }
    }

    pub fn tech(&self) -> Result<TechNode, ConfigError> {
        let mut t = TechNode::preset(&self.tech.node).map_err(|e| ConfigError::invalid("tech.node", e.to_string()))?;
        let s = &self.tech;
        let overrides = [
            (&mut t.ff_fit_per_mb, s.ff_fit_per_mb),
            (&mut t.voltage, s.voltage),
            (&mut t.fom_pct, s.fom_pct),
            (&mut t.cross_section_cm2, s.cross_section_cm2),
            (&mut t.qcrit_fc, s.qcrit_fc),
            (&mut t.flux, s.flux),
        ];
        for (field, value) in overrides {
            if let Some(v) = value {
                *field = v;
            }
        }
        t.validate().map_err(from_reliability)?;
        Ok(t)
    }

    pub fn schemes(&self) -> Result<Vec<Scheme>, ConfigError> {
        let schemes = self
            .protection
            .schemes
            .clone()
            .unwrap_or_else(|| Scheme::defaults(self.protection.reading));
        for (i, s) in schemes.iter().enumerate() {
            s.validate()
                .map_err(|e| ConfigError::invalid(format!("protection.schemes[{i}]"), e.to_string()))?;
        }
        Ok(schemes)
    }

    /// Block areas in canonical block order.
    pub fn areas(&self) -> Result<Vec<BlockArea>, ConfigError> {
        let Some(given) = &self.protection.areas else {
            return Ok(preset_areas());
        };
        let mut out = Vec::with_capacity(6);
        for b in BlockId::ALL {
            let matching: Vec<&BlockArea> = given.iter().filter(|a| a.block == b).collect();
            match matching.as_slice() {
                [a] => {
                    a.validate()
                        .map_err(|e| ConfigError::invalid(format!("protection.areas.{b}"), e.to_string()))?;
                    out.push(**a);
                }
                [] => return Err(ConfigError::invalid("protection.areas", format!("missing block {b}"))),
                _ => return Err(ConfigError::invalid("protection.areas", format!("block {b} listed twice"))),
            }
        }
        Ok(out)
    }

    pub fn delta_pct(&self) -> Result<f64, ConfigError> {
        match self.protection.delta_pct {
            Some(d) if d >= 0.0 => Ok(d),
            Some(_) => Err(ConfigError::invalid("protection.delta_pct", "must be non-negative")),
            None => dmr_delta_pct(&self.tech.node, self.protection.mac_config)
                .map_err(|e| ConfigError::invalid("protection.delta_pct", e.to_string())),
        }
    }

    pub fn target(&self) -> Result<AsilTarget, ConfigError> {
        let mac = self.protection.mac_config;
        let mut t = match self.target.inference_time_s {
            Some(time) => asil_threshold(self.target.level, PUBLISHED_AREA_FRACTION[mac.index()], time)
                .map_err(|e| ConfigError::invalid("target.inference_time_s", e.to_string()))?,
            None => published_target(mac, self.target.level),
        };
        if let Some(thr) = self.target.threshold {
            t.threshold_per_inference = thr;
        }
        Ok(t)
    }

    /// Sampling plan for a fault space: proportional when `total` is set,
    /// margin-sized otherwise, then per-block overrides.
    pub fn plan(&self, space: &FaultSpace) -> Result<SamplingPlan, crate::campaign::CampaignError> {
        let s = &self.sampling;
        let mut plan = match s.total {
            Some(total) => SamplingPlan::proportional(space, total, s.seed)?,
            None => SamplingPlan::from_margin(space, s.margin, s.confidence, s.seed)?,
        };
        plan.margin = s.margin;
        plan.confidence = s.confidence;
        for (&b, &k) in &s.per_block {
            plan.per_block.insert(b, k);
        }
        plan.validate(space)?;
        Ok(plan)
    }
}
