// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::log::CampaignRecord;
use super::sampling::z_score;
use super::CampaignError;
use crate::npu::{BlockId, FaultSpace, OutcomeKind};

/// Wilson score interval for a proportion `p` observed over `n` trials.
pub fn wilson_interval(p: f64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if p <= 0.0 { 0.0 } else { (centre - half).clamp(0.0, p) };
    let hi = if p >= 1.0 { 1.0 } else { (centre + half).clamp(p, 1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockStats {
    pub block: BlockId,
    /// Samples drawn.
    pub k: u64,
    /// Fault-site population.
    pub n: u64,
    pub sdc_runs: u64,
    pub crashes: u64,
    /// Top-1 mismatches summed over all samples and inputs.
    pub mismatches: u64,
    /// Workload inputs per injection run.
    pub inputs: u32,
    pub sdc_mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ci_halfwidth: f64,
    pub crash_rate: f64,
}

impl BlockStats {
    /// Σ SDC_i over the block's samples.
    pub fn sdc_sum(&self) -> f64 {
        self.mismatches as f64 / f64::from(self.inputs)
    }

    /// Builds stats from raw counts.
    pub fn from_counts(
        block: BlockId,
        k: u64,
        n: u64,
        sdc_runs: u64,
        crashes: u64,
        mismatches: u64,
        inputs: u32,
        z: f64,
    ) -> Self {
        let sdc_mean = if k == 0 {
            0.0
        } else {
            mismatches as f64 / (k as f64 * f64::from(inputs))
        };
        let (ci_low, ci_high) = wilson_interval(sdc_mean, k, z);
        BlockStats {
            block,
            k,
            n,
            sdc_runs,
            crashes,
            mismatches,
            inputs,
            sdc_mean,
            ci_low,
            ci_high,
            ci_halfwidth: (ci_high - ci_low) / 2.0,
            crash_rate: if k == 0 { 0.0 } else { crashes as f64 / k as f64 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub seed: u64,
    pub confidence: f64,
    pub total_runs: u64,
    pub blocks: Vec<BlockStats>,
}

impl StatsReport {
    pub fn block(&self, block: BlockId) -> Option<&BlockStats> {
        self.blocks.iter().find(|b| b.block == block)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "block,k,n,sdc_runs,crashes,mismatches,inputs,sdc_mean,ci_low,ci_high,ci_halfwidth,crash_rate\n",
        );
        for b in &self.blocks {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{:e},{:e},{:e},{:e},{:e}",
                b.block,
                b.k,
                b.n,
                b.sdc_runs,
                b.crashes,
                b.mismatches,
                b.inputs,
                b.sdc_mean,
                b.ci_low,
                b.ci_high,
                b.ci_halfwidth,
                b.crash_rate
            )
            .expect("string write");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, CampaignError> {
        serde_json::from_str(text).map_err(|e| CampaignError::Stats(e.to_string()))
    }
}

/// Per-block statistics over a complete record stream.
pub fn compute_stats(
    records: &[CampaignRecord],
    space: &FaultSpace,
    seed: u64,
    confidence: f64,
) -> Result<StatsReport, CampaignError> {
    let z = z_score(confidence)?;
    #[derive(Default)]
    struct Acc {
        k: u64,
        sdc: u64,
        crash: u64,
        mismatches: u64,
        inputs: Option<u32>,
    }
    let mut acc: BTreeMap<BlockId, Acc> = BTreeMap::new();
    for rec in records {
        let a = acc.entry(rec.site.block).or_default();
        match a.inputs {
            None => a.inputs = Some(rec.outcome.inputs),
            Some(i) if i != rec.outcome.inputs => {
                return Err(CampaignError::Stats(format!(
                    "run {} reports {} inputs, earlier runs {i}",
                    rec.run_id, rec.outcome.inputs
                )))
            }
            Some(_) => {}
        }
        a.k += 1;
        a.mismatches += u64::from(rec.outcome.mismatches);
        match rec.outcome.kind {
            OutcomeKind::Sdc => a.sdc += 1,
            OutcomeKind::Crash => a.crash += 1,
            OutcomeKind::Masked => {}
        }
    }
    let blocks = acc
        .into_iter()
        .map(|(block, a)| {
            BlockStats::from_counts(
                block,
                a.k,
                space.population(block),
                a.sdc,
                a.crash,
                a.mismatches,
                a.inputs.unwrap_or(1),
                z,
            )
        })
        .collect();
    Ok(StatsReport {
        seed,
        confidence,
        total_runs: records.len() as u64,
        blocks,
    })
}
