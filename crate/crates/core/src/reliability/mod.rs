// SPDX-License-Identifier: Apache-2.0

//! Closed-form reliability arithmetic: per-site fault probability, the
//! multi-flip event expansion and its first-order simplification, the
//! block-decomposed Monte Carlo estimator, logic-fault adjustment and ASIL
//! thresholds.

mod asil;
mod logic;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::campaign::{BlockStats, StatsReport};
use crate::npu::{BlockId, FaultSpace};

pub use asil::{
    asil_threshold, meets_asil, published_target, AsilLevel, AsilTarget, MacConfig, PUBLISHED_AREA_FRACTION,
    PUBLISHED_INFERENCE_TIME_S, PUBLISHED_THRESHOLD,
};
pub use logic::{
    adjusted_fit, alpha_from_cumulative, alpha_from_ser, block_alpha, ser_comb_flux, ser_comb_ratio, AlphaModel,
    LogicFaultParams, TechNode,
};

/// Flop bits in one megabyte.
pub const BITS_PER_MB: f64 = (1u64 << 20) as f64 * 8.0;
/// Largest site count accepted by [`sdc_exact_multiflip`].
pub const MAX_EXACT_SITES: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReliabilityError {
    #[error("{0}")]
    Domain(String),
    #[error("exact expansion supports at most {max} sites, got {n}; use sdc_simplified")]
    Capacity { n: usize, max: usize },
    #[error("no statistics for block {0}")]
    MissingBlock(BlockId),
    #[error("{0}")]
    Input(String),
    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },
}

/// Probability that one flop bit flips in one clock cycle.
pub fn fault_probability(fit_per_mb: f64, freq_hz: f64) -> Result<f64, ReliabilityError> {
    if !(freq_hz > 0.0) {
        return Err(ReliabilityError::Domain(format!("frequency must be positive, got {freq_hz}")));
    }
    if !(fit_per_mb >= 0.0) {
        return Err(ReliabilityError::Domain(format!("FIT must be non-negative, got {fit_per_mb}")));
    }
    Ok(fit_per_mb / (BITS_PER_MB * 1e9 * 3600.0 * freq_hz))
}

/// Probability that one flop bit flips within one second.
pub fn fault_probability_per_second(fit_per_mb: f64) -> Result<f64, ReliabilityError> {
    fault_probability(fit_per_mb, 1.0)
}

/// Exact SDC over all `2^n` flip/no-flip events.
///
/// `event_sdc[mask]` is the SDC of the event in which exactly the sites whose
/// bits are set in `mask` flip; `event_sdc[0]` must be 0.
pub fn sdc_exact_multiflip(p: &[f64], event_sdc: &[f64]) -> Result<f64, ReliabilityError> {
    let n = p.len();
    if n > MAX_EXACT_SITES {
        return Err(ReliabilityError::Capacity { n, max: MAX_EXACT_SITES });
    }
    if event_sdc.len() != 1 << n {
        return Err(ReliabilityError::Input(format!(
            "expected {} event SDC values for {n} sites, got {}",
            1usize << n,
            event_sdc.len()
        )));
    }
    if event_sdc[0] != 0.0 {
        return Err(ReliabilityError::Input("SDC of the no-flip event must be 0".into()));
    }
    if let Some(bad) = p.iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
        return Err(ReliabilityError::Domain(format!("probability {bad} outside [0, 1]")));
    }
    // probs[mask] built incrementally: one multiply per event
    let mut probs = vec![1.0f64; 1 << n];
    for (i, &pi) in p.iter().enumerate() {
        let half = 1 << i;
        for mask in (0..half).rev() {
            let base = probs[mask];
            probs[mask | half] = base * pi;
            probs[mask] = base * (1.0 - pi);
        }
    }
    Ok(probs.iter().zip(event_sdc).skip(1).map(|(pr, s)| pr * s).sum())
}

/// First-order SDC: `Σ P_i · SDC_i`.
pub fn sdc_simplified(sites: &[(f64, f64)]) -> f64 {
    sites.iter().map(|(p, s)| p * s).sum()
}

/// Per-block population `N_K` and per-site fault probability `P_K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SitePopulation {
    pub per_block: BTreeMap<BlockId, (u64, f64)>,
}

impl SitePopulation {
    /// Same probability for every block.
    pub fn uniform(space: &FaultSpace, p: f64) -> Self {
        SitePopulation {
            per_block: space.iter().map(|(b, n)| (b, (n, p))).collect(),
        }
    }

    pub fn new(space: &FaultSpace, p: impl Fn(BlockId) -> f64) -> Self {
        SitePopulation {
            per_block: space.iter().map(|(b, n)| (b, (n, p(b)))).collect(),
        }
    }

    pub fn probability(&self, block: BlockId) -> Option<f64> {
        self.per_block.get(&block).map(|&(_, p)| p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockContribution {
    pub block: BlockId,
    pub p: f64,
    pub n: u64,
    pub k: u64,
    pub sdc_mean: f64,
    pub contribution: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdcEstimate {
    pub sdc_npu: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub blocks: Vec<BlockContribution>,
}

/// One block's term `P · (N/K) · Σ SDC_i`.
pub fn block_contribution(stats: &BlockStats, p: f64) -> BlockContribution {
    let scale = p * stats.n as f64;
    BlockContribution {
        block: stats.block,
        p,
        n: stats.n,
        k: stats.k,
        sdc_mean: stats.sdc_mean,
        contribution: p * (stats.n as f64 / stats.k as f64) * stats.sdc_sum(),
        ci_low: scale * stats.ci_low,
        ci_high: scale * stats.ci_high,
    }
}

/// Block-decomposed Monte Carlo estimate of SDC per inference, with the
/// per-block Wilson bounds propagated linearly.
pub fn sdc_npu_estimate(stats: &StatsReport, pop: &SitePopulation) -> Result<SdcEstimate, ReliabilityError> {
    let mut blocks = Vec::with_capacity(pop.per_block.len());
    for (&block, &(n, p)) in &pop.per_block {
        let s = stats.block(block).ok_or(ReliabilityError::MissingBlock(block))?;
        if s.k == 0 {
            return Err(ReliabilityError::Input(format!("block {block} has no samples")));
        }
        if s.n != n {
            return Err(ReliabilityError::Input(format!(
                "block {block}: stats population {} differs from site population {n}",
                s.n
            )));
        }
        if !(0.0..1.0).contains(&p) {
            return Err(ReliabilityError::Domain(format!("block {block}: P = {p} outside [0, 1)")));
        }
        blocks.push(block_contribution(s, p));
    }
    Ok(SdcEstimate {
        sdc_npu: blocks.iter().map(|b| b.contribution).sum(),
        ci_low: blocks.iter().map(|b| b.ci_low).sum(),
        ci_high: blocks.iter().map(|b| b.ci_high).sum(),
        blocks,
    })
}
