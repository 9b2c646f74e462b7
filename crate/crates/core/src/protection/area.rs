// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::{ProtectionError, Scheme, SchemeKind};
use crate::npu::BlockId;
use crate::reliability::MacConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockArea {
    pub block: BlockId,
    pub total_area: f64,
    /// Share of the block's area that is sequential.
    #[serde(default = "one")]
    pub ff_fraction: f64,
}

fn one() -> f64 {
    1.0
}

impl BlockArea {
    pub fn new(block: BlockId, total_area: f64, ff_fraction: f64) -> Self {
        BlockArea {
            block,
            total_area,
            ff_fraction,
        }
    }

    pub fn validate(&self) -> Result<(), ProtectionError> {
        if !(self.total_area > 0.0 && self.total_area.is_finite()) {
            return Err(ProtectionError::Config(format!("areas.{}.total_area must be positive", self.block)));
        }
        if !(self.ff_fraction > 0.0 && self.ff_fraction <= 1.0) {
            return Err(ProtectionError::Config(format!("areas.{}.ff_fraction must lie in (0, 1]", self.block)));
        }
        Ok(())
    }

    /// Area a scheme adds to this block.
    pub fn added_area(&self, scheme: &Scheme, delta_pct: f64) -> f64 {
        match scheme.kind {
            SchemeKind::None => 0.0,
            SchemeKind::Dmr => self.total_area * (scheme.area_overhead_pct + delta_pct) / 100.0,
            SchemeKind::QuatroHard | SchemeKind::TspcDiceHard => {
                self.total_area * self.ff_fraction * scheme.area_overhead_pct / 100.0
            }
        }
    }
}

/// Relative block areas shipped as defaults (arbitrary units).
pub fn preset_areas() -> Vec<BlockArea> {
    [
        (BlockId::Ao, 8.0),
        (BlockId::Dma, 12.0),
        (BlockId::Mac, 40.0),
        (BlockId::Reg, 10.0),
        (BlockId::Tsu, 8.0),
        (BlockId::Wd, 6.0),
    ]
    .into_iter()
    .map(|(b, a)| BlockArea::new(b, a, 0.4))
    .collect()
}

/// DMR checker overhead in percent by node and MAC configuration.
pub fn dmr_delta_pct(node: &str, mac: MacConfig) -> Result<f64, ProtectionError> {
    let table = match node.to_ascii_lowercase().as_str() {
        "16nm" => [7.3, 8.4, 10.7, 13.5],
        "7nm" => [5.1, 6.6, 7.4, 10.1],
        _ => return Err(ProtectionError::Config(format!("no DMR checker overhead for node `{node}`"))),
    };
    Ok(table[mac.index()])
}

/// Baseline area, added area and overhead percentage of an assignment.
pub fn config_area(
    areas: &[BlockArea],
    assignment: &[&Scheme],
    delta_pct: f64,
) -> Result<(f64, f64, f64), ProtectionError> {
    if areas.len() != assignment.len() {
        return Err(ProtectionError::Input(format!(
            "{} block areas for {} assigned schemes",
            areas.len(),
            assignment.len()
        )));
    }
    let baseline: f64 = areas.iter().map(|a| a.total_area).sum();
    let added: f64 = areas.iter().zip(assignment).map(|(a, s)| a.added_area(s, delta_pct)).sum();
    Ok((baseline, added, added / baseline * 100.0))
}
