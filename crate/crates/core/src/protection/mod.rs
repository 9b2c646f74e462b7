// SPDX-License-Identifier: Apache-2.0

//! Per-block protection schemes and the area-constrained search over them.
//!
//! A [`ProtectionProblem`] tabulates, for every block and scheme, the area the
//! scheme adds and the block's SDC contribution under it. Every assignment is
//! then a sum over that table, so exhaustive search and the branch-and-bound
//! optimizer see bit-identical values.

mod area;
mod scheme;
mod search;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::campaign::StatsReport;
use crate::npu::BlockId;
use crate::reliability::{meets_asil, AsilTarget, ReliabilityError};

pub use area::{config_area, dmr_delta_pct, preset_areas, BlockArea};
pub use scheme::{apply_scheme, BlockRates, HardeningReading, Scheme, SchemeKind};
pub use search::{enumerate_design_space, evaluate_all, min_area, optimize, pareto_frontier, DEFAULT_ENUMERATION_CAP};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtectionError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Input(String),
    #[error("design space of {size} assignments exceeds the cap of {cap}")]
    Capacity { size: f64, cap: u64 },
    #[error("{0}")]
    Domain(String),
    #[error("no feasible assignment: {reason}")]
    Infeasible {
        reason: String,
        frontier: Vec<EvaluatedConfig>,
    },
    #[error(transparent)]
    Reliability(#[from] ReliabilityError),
}

/// Added area and SDC contribution of one scheme on one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeOption {
    pub added_area: f64,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedConfig {
    /// Index into [`ProtectionProblem::schemes`] per block.
    pub choice: Vec<usize>,
    pub assignment: Vec<SchemeKind>,
    pub total_area: f64,
    pub area_overhead_pct: f64,
    pub sdc_npu: f64,
    /// Always true when the problem has no target.
    pub meets_target: bool,
}

impl EvaluatedConfig {
    /// Assignment vector in scheme codes, e.g. `[2,0,1,0,2,2]`.
    pub fn codes(&self) -> Vec<u8> {
        self.assignment.iter().map(|k| k.code()).collect()
    }

    pub fn codes_string(&self) -> String {
        let parts: Vec<String> = self.codes().iter().map(|c| c.to_string()).collect();
        format!("[{}]", parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtectionProblem {
    pub blocks: Vec<BlockId>,
    pub schemes: Vec<Scheme>,
    pub baseline_area: f64,
    /// `options[block][scheme]`.
    pub options: Vec<Vec<SchemeOption>>,
    pub target: Option<AsilTarget>,
}

impl ProtectionProblem {
    pub fn new(
        blocks: Vec<BlockId>,
        schemes: Vec<Scheme>,
        baseline_area: f64,
        options: Vec<Vec<SchemeOption>>,
        target: Option<AsilTarget>,
    ) -> Result<Self, ProtectionError> {
        if blocks.is_empty() || schemes.is_empty() {
            return Err(ProtectionError::Input("need at least one block and one scheme".into()));
        }
        if options.len() != blocks.len() || options.iter().any(|o| o.len() != schemes.len()) {
            return Err(ProtectionError::Input("option table does not match blocks × schemes".into()));
        }
        for s in &schemes {
            s.validate()?;
        }
        let mut kinds: Vec<SchemeKind> = schemes.iter().map(|s| s.kind).collect();
        kinds.sort();
        kinds.dedup();
        if kinds.len() != schemes.len() {
            return Err(ProtectionError::Config("scheme kinds must be distinct".into()));
        }
        if !(baseline_area > 0.0) {
            return Err(ProtectionError::Input("baseline area must be positive".into()));
        }
        Ok(ProtectionProblem {
            blocks,
            schemes,
            baseline_area,
            options,
            target,
        })
    }

    /// Table built from campaign statistics.
    pub fn from_stats(
        stats: &StatsReport,
        rates: &[BlockRates],
        areas: &[BlockArea],
        schemes: &[Scheme],
        delta_pct: f64,
        logic_faults: bool,
        target: Option<AsilTarget>,
    ) -> Result<Self, ProtectionError> {
        if rates.len() != areas.len() {
            return Err(ProtectionError::Input("one rate entry per block area is required".into()));
        }
        let mut options = Vec::with_capacity(areas.len());
        for (area, rate) in areas.iter().zip(rates) {
            area.validate()?;
            let st = stats
                .block(area.block)
                .ok_or_else(|| ProtectionError::Input(format!("no statistics for block {}", area.block)))?;
            let mut row = Vec::with_capacity(schemes.len());
            for s in schemes {
                let (_, contribution) = apply_scheme(st, rate, s, logic_faults)?;
                row.push(SchemeOption {
                    added_area: area.added_area(s, delta_pct),
                    contribution,
                });
            }
            options.push(row);
        }
        ProtectionProblem::new(
            areas.iter().map(|a| a.block).collect(),
            schemes.to_vec(),
            areas.iter().map(|a| a.total_area).sum(),
            options,
            target,
        )
    }

    /// Table from baseline block contributions, hardening scaling them by `fit_ratio`.
    pub fn from_contributions(
        blocks: &[(BlockArea, f64)],
        schemes: &[Scheme],
        delta_pct: f64,
        target: Option<AsilTarget>,
    ) -> Result<Self, ProtectionError> {
        let mut options = Vec::with_capacity(blocks.len());
        for (area, base) in blocks {
            area.validate()?;
            if !(*base >= 0.0) {
                return Err(ProtectionError::Input(format!("block {}: negative contribution", area.block)));
            }
            options.push(
                schemes
                    .iter()
                    .map(|s| SchemeOption {
                        added_area: area.added_area(s, delta_pct),
                        contribution: match s.kind {
                            SchemeKind::Dmr => 0.0,
                            _ => s.fit_ratio * base,
                        },
                    })
                    .collect(),
            );
        }
        ProtectionProblem::new(
            blocks.iter().map(|(a, _)| a.block).collect(),
            schemes.to_vec(),
            blocks.iter().map(|(a, _)| a.total_area).sum(),
            options,
            target,
        )
    }

    pub fn scheme_index(&self, kind: SchemeKind) -> Option<usize> {
        self.schemes.iter().position(|s| s.kind == kind)
    }

    /// The same scheme on every block.
    pub fn uniform(&self, kind: SchemeKind) -> Option<Vec<usize>> {
        self.scheme_index(kind).map(|i| vec![i; self.blocks.len()])
    }

    pub fn evaluate(&self, choice: &[usize]) -> Result<EvaluatedConfig, ProtectionError> {
        if choice.len() != self.blocks.len() || choice.iter().any(|&c| c >= self.schemes.len()) {
            return Err(ProtectionError::Input(format!("invalid assignment {choice:?}")));
        }
        let mut added = 0.0;
        let mut sdc = 0.0;
        for (b, &c) in choice.iter().enumerate() {
            added += self.options[b][c].added_area;
            sdc += self.options[b][c].contribution;
        }
        Ok(self.finish(choice.to_vec(), added, sdc))
    }

    pub(crate) fn finish(&self, choice: Vec<usize>, added: f64, sdc: f64) -> EvaluatedConfig {
        EvaluatedConfig {
            assignment: choice.iter().map(|&c| self.schemes[c].kind).collect(),
            choice,
            total_area: self.baseline_area + added,
            area_overhead_pct: added / self.baseline_area * 100.0,
            sdc_npu: sdc,
            meets_target: self.target.as_ref().is_none_or(|t| meets_asil(sdc, t)),
        }
    }
}

/// Frontier CSV: one row per configuration.
pub fn frontier_csv(points: &[EvaluatedConfig], blocks: &[BlockId]) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    for b in blocks {
        write!(out, "{b},").expect("string write");
    }
    out.push_str("total_area,area_overhead_pct,sdc_npu,meets_target\n");
    for p in points {
        for c in p.codes() {
            write!(out, "{c},").expect("string write");
        }
        writeln!(out, "{:e},{:e},{:e},{}", p.total_area, p.area_overhead_pct, p.sdc_npu, p.meets_target)
            .expect("string write");
    }
    out
}
