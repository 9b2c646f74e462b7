// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ProtectionError;
use crate::campaign::BlockStats;
use crate::reliability::fault_probability;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    None,
    Dmr,
    QuatroHard,
    TspcDiceHard,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [
        SchemeKind::None,
        SchemeKind::QuatroHard,
        SchemeKind::Dmr,
        SchemeKind::TspcDiceHard,
    ];

    /// Assignment-vector code: 0 none, 1 flop hardening, 2 DMR, 3 hardening with logic-fault elimination.
    pub fn code(self) -> u8 {
        match self {
            SchemeKind::None => 0,
            SchemeKind::QuatroHard => 1,
            SchemeKind::Dmr => 2,
            SchemeKind::TspcDiceHard => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        SchemeKind::ALL.into_iter().find(|k| k.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::None => "none",
            SchemeKind::Dmr => "dmr",
            SchemeKind::QuatroHard => "quatro",
            SchemeKind::TspcDiceHard => "tspc-dice",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = ProtectionError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "none" => Ok(SchemeKind::None),
            "dmr" => Ok(SchemeKind::Dmr),
            "quatro" | "quatro-hard" => Ok(SchemeKind::QuatroHard),
            "tspc-dice" | "tspc-dice-hard" => Ok(SchemeKind::TspcDiceHard),
            _ => Err(ProtectionError::Config(format!("unknown scheme `{s}`"))),
        }
    }
}

/// How a tabulated hardening FIT figure is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HardeningReading {
    /// The figure is the fraction of upsets removed; `fit_ratio = 1 - figure`.
    #[default]
    Reduction,
    /// The figure is `FIT_hardened / FIT_unhardened` itself.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scheme {
    pub kind: SchemeKind,
    /// DMR: percent of the whole block before the checker overhead; hardening: percent of sequential area.
    pub area_overhead_pct: f64,
    /// `FIT_hardened / FIT_unhardened`; unused for DMR.
    pub fit_ratio: f64,
    /// `α' / α`.
    pub alpha_ratio: f64,
}

impl Scheme {
    pub fn none() -> Self {
        Scheme {
            kind: SchemeKind::None,
            area_overhead_pct: 0.0,
            fit_ratio: 1.0,
            alpha_ratio: 1.0,
        }
    }

    pub fn dmr() -> Self {
        Scheme {
            kind: SchemeKind::Dmr,
            area_overhead_pct: 100.0,
            fit_ratio: 0.0,
            alpha_ratio: 0.0,
        }
    }

    pub fn quatro(reading: HardeningReading) -> Self {
        Scheme {
            kind: SchemeKind::QuatroHard,
            area_overhead_pct: 157.0,
            fit_ratio: reading.ratio(0.98),
            alpha_ratio: 1.0,
        }
    }

    pub fn tspc_dice(reading: HardeningReading) -> Self {
        Scheme {
            kind: SchemeKind::TspcDiceHard,
            area_overhead_pct: 46.05,
            fit_ratio: reading.ratio(0.75),
            alpha_ratio: 0.0,
        }
    }

    /// The four schemes in code order.
    pub fn defaults(reading: HardeningReading) -> Vec<Scheme> {
        vec![
            Scheme::none(),
            Scheme::quatro(reading),
            Scheme::dmr(),
            Scheme::tspc_dice(reading),
        ]
    }

    pub fn validate(&self) -> Result<(), ProtectionError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let ok = self.area_overhead_pct >= 0.0
            && unit(self.fit_ratio)
            && unit(self.alpha_ratio)
            && match self.kind {
                SchemeKind::None => self.area_overhead_pct == 0.0 && self.fit_ratio == 1.0 && self.alpha_ratio == 1.0,
                SchemeKind::Dmr => self.alpha_ratio == 0.0,
                SchemeKind::QuatroHard | SchemeKind::TspcDiceHard => self.fit_ratio < 1.0,
            };
        if ok {
            Ok(())
        } else {
            Err(ProtectionError::Config(format!("inconsistent parameters for scheme {}: {self:?}", self.kind)))
        }
    }
}

impl HardeningReading {
    pub fn ratio(self, figure: f64) -> f64 {
        match self {
            HardeningReading::Reduction => 1.0 - figure,
            HardeningReading::Raw => figure,
        }
    }
}

/// Flop FIT, logic `α` and clock of one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockRates {
    pub fit_per_mb: f64,
    pub alpha: f64,
    pub freq_hz: f64,
}

/// Per-site probability and block SDC contribution under a scheme.
pub fn apply_scheme(
    stats: &BlockStats,
    rates: &BlockRates,
    scheme: &Scheme,
    logic_faults: bool,
) -> Result<(f64, f64), ProtectionError> {
    if stats.k == 0 {
        return Err(ProtectionError::Input(format!("block {} has no samples", stats.block)));
    }
    let fit = match (scheme.kind, logic_faults) {
        (SchemeKind::Dmr, _) => return Ok((0.0, 0.0)),
        (_, false) => scheme.fit_ratio * rates.fit_per_mb,
        (_, true) => scheme.fit_ratio * rates.fit_per_mb + scheme.alpha_ratio * rates.alpha,
    };
    let p = fault_probability(fit, rates.freq_hz)?;
    Ok((p, p * (stats.n as f64 / stats.k as f64) * stats.sdc_sum()))
}
