// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ReliabilityError;

/// Technology parameters for one process node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechNode {
    pub name: String,
    /// Raw flop FIT per MB of flop bits.
    pub ff_fit_per_mb: f64,
    pub voltage: f64,
    pub fom_pct: f64,
    pub cross_section_cm2: f64,
    /// Carried for completeness; no formula consumes it.
    pub qcrit_fc: f64,
    /// Particles per cm² per hour.
    pub flux: f64,
}

impl TechNode {
    pub fn n16() -> Self {
        TechNode {
            name: "16nm".into(),
            ff_fit_per_mb: 50.0,
            voltage: 0.75,
            fom_pct: 0.5,
            cross_section_cm2: 3e-11,
            qcrit_fc: 0.9477,
            flux: 0.001,
        }
    }

    pub fn n7() -> Self {
        TechNode {
            name: "7nm".into(),
            ff_fit_per_mb: 10.0,
            voltage: 0.7,
            fom_pct: 0.05,
            cross_section_cm2: 0.306e-11,
            qcrit_fc: 0.8059,
            flux: 0.001,
        }
    }

    pub fn preset(name: &str) -> Result<Self, ReliabilityError> {
        match name.to_ascii_lowercase().as_str() {
            "16nm" | "16" => Ok(TechNode::n16()),
            "7nm" | "7" => Ok(TechNode::n7()),
            _ => Err(ReliabilityError::Domain(format!(
                "unknown technology node `{name}` (expected 16nm or 7nm)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<(), ReliabilityError> {
        for (key, v) in [
            ("ff_fit_per_mb", self.ff_fit_per_mb),
            ("voltage", self.voltage),
            ("fom_pct", self.fom_pct),
            ("cross_section_cm2", self.cross_section_cm2),
            ("qcrit_fc", self.qcrit_fc),
            ("flux", self.flux),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ReliabilityError::Config {
                    key: format!("tech.{key}"),
                    reason: format!("must be positive, got {v}"),
                });
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ReliabilityError> {
        let node: TechNode = toml::from_str(text).map_err(|e| ReliabilityError::Config {
            key: "tech".into(),
            reason: e.message().to_string(),
        })?;
        node.validate()?;
        Ok(node)
    }

    pub fn load(path: &Path) -> Result<Self, ReliabilityError> {
        let text = std::fs::read_to_string(path).map_err(|e| ReliabilityError::Config {
            key: path.display().to_string(),
            reason: e.to_string(),
        })?;
        TechNode::from_toml_str(&text)
    }
}

fn default_one() -> f64 {
    1.0
}
fn default_fanin() -> f64 {
    2.0
}
fn default_depth() -> f64 {
    3.5
}
fn default_latch() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogicFaultParams {
    #[serde(default = "default_one")]
    pub ld_comb: f64,
    #[serde(default = "default_one")]
    pub freq_ghz: f64,
    #[serde(default = "default_fanin")]
    pub fanin: f64,
    #[serde(default = "default_depth")]
    pub depth_d: f64,
    /// `SER_latch / SER_ff`.
    #[serde(default = "default_latch")]
    pub latch_factor: f64,
    #[serde(default)]
    pub alpha_model: AlphaModel,
}

impl Default for LogicFaultParams {
    fn default() -> Self {
        LogicFaultParams {
            ld_comb: 1.0,
            freq_ghz: 1.0,
            fanin: 2.0,
            depth_d: 3.5,
            latch_factor: 0.5,
            alpha_model: AlphaModel::LatchBound,
        }
    }
}

impl LogicFaultParams {
    pub fn validate(&self) -> Result<(), ReliabilityError> {
        let bad = |key: &str, reason: &str| {
            Err(ReliabilityError::Config {
                key: format!("logic.{key}"),
                reason: reason.into(),
            })
        };
        if !(self.ld_comb > 0.0 && self.ld_comb <= 1.0) {
            return bad("ld_comb", "must lie in (0, 1]");
        }
        if !(self.freq_ghz > 0.0) {
            return bad("freq_ghz", "must be positive");
        }
        if !(self.fanin >= 1.0) {
            return bad("fanin", "must be at least 1");
        }
        if !(self.depth_d > 0.0) {
            return bad("depth_d", "must be positive");
        }
        if !(self.latch_factor >= 0.0) {
            return bad("latch_factor", "must be non-negative");
        }
        Ok(())
    }
}

/// Which logic-SER formulation feeds `α`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaModel {
    /// `flux × cross_section` in errors per hour.
    Flux,
    /// Fan-in upper bound relative to latch SER.
    #[default]
    LatchBound,
}

/// Combinational SER as a percentage of latch SER (fan-in upper bound).
pub fn ser_comb_ratio(params: &LogicFaultParams, fom_pct: f64) -> Result<f64, ReliabilityError> {
    if !(params.fanin >= 1.0) {
        return Err(ReliabilityError::Domain(format!("fan-in must be at least 1, got {}", params.fanin)));
    }
    if !(params.depth_d > 0.0) {
        return Err(ReliabilityError::Domain(format!("depth must be positive, got {}", params.depth_d)));
    }
    let series = if params.fanin == 1.0 {
        params.depth_d
    } else {
        (params.fanin.powf(params.depth_d + 1.0) - 1.0) / (params.fanin - 1.0)
    };
    Ok(params.ld_comb * params.freq_ghz * fom_pct * series)
}

/// Logic SER in errors per hour from particle flux and sensitive area.
pub fn ser_comb_flux(flux: f64, cross_section_cm2: f64) -> f64 {
    flux * cross_section_cm2
}

/// `α` in FIT from a logic SER rate in errors per hour.
pub fn alpha_from_ser(ser_comb_per_hr: f64) -> f64 {
    ser_comb_per_hr * 1e9
}

/// `α` in FIT from a cumulative error count over `hours` of operation.
pub fn alpha_from_cumulative(errors: f64, hours: f64) -> Result<f64, ReliabilityError> {
    if !(hours > 0.0) {
        return Err(ReliabilityError::Domain(format!("operating time must be positive, got {hours}")));
    }
    Ok(errors * 1e9 / hours)
}

pub fn adjusted_fit(fit: f64, alpha: f64) -> f64 {
    fit + alpha
}

/// `α` to add to a block's flop FIT/MB under the chosen formulation.
///
/// The latch-bound path converts the percentage through
/// `SER_latch = latch_factor × SER_ff`.
pub fn block_alpha(tech: &TechNode, params: &LogicFaultParams) -> Result<f64, ReliabilityError> {
    match params.alpha_model {
        AlphaModel::Flux => Ok(alpha_from_ser(ser_comb_flux(tech.flux, tech.cross_section_cm2))),
        AlphaModel::LatchBound => {
            let pct = ser_comb_ratio(params, tech.fom_pct)?;
            let ser_per_hr = pct / 100.0 * params.latch_factor * tech.ff_fit_per_mb / 1e9;
            Ok(alpha_from_ser(ser_per_hr))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fan_in_branches() {
        let mut p = LogicFaultParams { fanin: 1.0, ..Default::default() };
        assert!((ser_comb_ratio(&p, 0.5).unwrap() - 1.75).abs() < 1e-12);
        p.fanin = 2.0;
        let expected = 0.5 * (2f64.powf(4.5) - 1.0);
        assert!((ser_comb_ratio(&p, 0.5).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 10.81).abs() < 0.005);
        assert_eq!(ser_comb_ratio(&p, 0.0).unwrap(), 0.0);
        p.fanin = 0.9;
        assert!(ser_comb_ratio(&p, 0.5).is_err());
    }

    #[test]
    fn flux_alpha() {
        let a16 = alpha_from_ser(ser_comb_flux(0.001, 3e-11));
        assert!((a16 - 3e-5).abs() < 1e-18);
        let a7 = alpha_from_ser(ser_comb_flux(0.001, 0.306e-11));
        assert!((a16 / a7 - 3.0 / 0.306).abs() < 1e-9);
        assert_eq!(alpha_from_ser(ser_comb_flux(0.0, 3e-11)), 0.0);
        assert!((adjusted_fit(50.0, a16) - 50.00003).abs() < 1e-12);
    }

    #[test]
    fn cumulative_reading() {
        assert!((alpha_from_cumulative(3e-14 * 1000.0, 1000.0).unwrap() - 3e-5).abs() < 1e-18);
        assert!(alpha_from_cumulative(1.0, 0.0).is_err());
    }

    #[test]
    fn presets_and_toml() {
        TechNode::n16().validate().unwrap();
        TechNode::n7().validate().unwrap();
        assert_eq!(TechNode::preset("7NM").unwrap(), TechNode::n7());
        let text = toml::to_string(&TechNode::n16()).unwrap();
        assert_eq!(TechNode::from_toml_str(&text).unwrap(), TechNode::n16());
        let bad = text.replace("flux = 0.001", "flux = 0.0");
        assert!(matches!(
            TechNode::from_toml_str(&bad),
            Err(ReliabilityError::Config { key, .. }) if key == "tech.flux"
        ));
    }
}
