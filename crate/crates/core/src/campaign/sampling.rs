// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::CampaignError;
use crate::npu::{BlockId, FaultSite, FaultSpace, NpuModel};

pub const DEFAULT_MARGIN: f64 = 0.01;
pub const DEFAULT_CONFIDENCE: f64 = 0.99;

/// Size of the population a sample is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Population {
    Finite(u64),
    Infinite,
}

fn check_unit(name: &str, v: f64) -> Result<(), CampaignError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(CampaignError::Domain(format!("{name} must lie in (0, 1), got {v}")))
    }
}

/// Two-sided standard-normal quantile for a confidence level.
pub fn z_score(confidence: f64) -> Result<f64, CampaignError> {
    check_unit("confidence", confidence)?;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(1.0 - (1.0 - confidence) / 2.0))
}

/// Finite-population sample size for estimating a proportion.
pub fn sample_size(
    population: Population,
    margin: f64,
    confidence: f64,
    p: f64,
) -> Result<u64, CampaignError> {
    check_unit("margin", margin)?;
    check_unit("p", p)?;
    let z = z_score(confidence)?;
    let base = z * z * p * (1.0 - p) / (margin * margin);
    match population {
        Population::Infinite => Ok(base.ceil() as u64),
        Population::Finite(0) => Err(CampaignError::Domain("population must be at least 1".into())),
        Population::Finite(n) => {
            let nf = n as f64;
            let k = (nf / (1.0 + (nf - 1.0) / base)).ceil() as u64;
            Ok(k.clamp(1, n))
        }
    }
}

/// Per-block sample counts plus the statistical settings of a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub per_block: BTreeMap<BlockId, u64>,
    pub seed: u64,
    pub margin: f64,
    pub confidence: f64,
}

impl SamplingPlan {
    pub fn new(per_block: BTreeMap<BlockId, u64>, seed: u64) -> Self {
        SamplingPlan {
            per_block,
            seed,
            margin: DEFAULT_MARGIN,
            confidence: DEFAULT_CONFIDENCE,
        }
    }

    /// Every site of every block.
    pub fn exhaustive(space: &FaultSpace, seed: u64) -> Self {
        SamplingPlan::new(space.iter().collect(), seed)
    }

    /// Per-block counts from [`sample_size`] at the given margin and confidence, worst-case `p = 0.5`.
    pub fn from_margin(
        space: &FaultSpace,
        margin: f64,
        confidence: f64,
        seed: u64,
    ) -> Result<Self, CampaignError> {
        let mut per_block = BTreeMap::new();
        for (block, n) in space.iter() {
            per_block.insert(block, sample_size(Population::Finite(n), margin, confidence, 0.5)?);
        }
        Ok(SamplingPlan {
            per_block,
            seed,
            margin,
            confidence,
        })
    }

    /// Splits `total` samples across blocks in proportion to `N_K` (largest remainder),
    /// keeping every block between 1 and `N_K`.
    pub fn proportional(space: &FaultSpace, total: u64, seed: u64) -> Result<Self, CampaignError> {
        let n_total = space.total();
        if total < 6 || total > n_total {
            return Err(CampaignError::Plan(format!(
                "total sample count {total} must lie in [6, {n_total}]"
            )));
        }
        let mut alloc: Vec<(BlockId, u64, u128)> = space
            .iter()
            .map(|(b, n)| {
                let exact = u128::from(total) * u128::from(n);
                let k = (exact / u128::from(n_total)) as u64;
                (b, k, exact % u128::from(n_total))
            })
            .collect();
        let mut left = total - alloc.iter().map(|a| a.1).sum::<u64>();
        let mut order: Vec<usize> = (0..alloc.len()).collect();
        order.sort_by(|&a, &b| alloc[b].2.cmp(&alloc[a].2).then(a.cmp(&b)));
        for &i in &order {
            if left == 0 {
                break;
            }
            alloc[i].1 += 1;
            left -= 1;
        }
        let mut per_block: BTreeMap<BlockId, u64> = alloc.iter().map(|a| (a.0, a.1)).collect();
        // lift empty blocks to one sample, taking from the largest allocation
        for b in BlockId::ALL {
            if per_block[&b] == 0 {
                let donor = *per_block
                    .iter()
                    .filter(|(d, &k)| k > 1 && **d != b)
                    .max_by_key(|(d, &k)| (k, std::cmp::Reverse(**d)))
                    .expect("total >= 6")
                    .0;
                *per_block.get_mut(&donor).expect("present") -= 1;
                per_block.insert(b, 1);
            }
        }
        Ok(SamplingPlan::new(per_block, seed))
    }

    pub fn total(&self) -> u64 {
        self.per_block.values().sum()
    }

    pub fn validate(&self, space: &FaultSpace) -> Result<(), CampaignError> {
        check_unit("margin", self.margin)?;
        check_unit("confidence", self.confidence)?;
        if self.per_block.is_empty() {
            return Err(CampaignError::Plan("plan samples no block".into()));
        }
        for (&block, &k) in &self.per_block {
            let n = space.population(block);
            if k == 0 {
                return Err(CampaignError::Plan(format!("block {block} has K = 0")));
            }
            if k > n {
                return Err(CampaignError::Plan(format!(
                    "block {block}: K = {k} exceeds population N = {n}"
                )));
            }
        }
        Ok(())
    }
}

fn block_rng(seed: u64, block: BlockId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block.index() as u64 + 1);
    rng
}

/// `k` distinct indices from `0..n`, uniformly without replacement, sorted ascending.
pub fn draw_indices(seed: u64, block: BlockId, n: u64, k: u64) -> Result<Vec<u64>, CampaignError> {
    if k > n {
        return Err(CampaignError::Plan(format!(
            "block {block}: K = {k} exceeds population N = {n}"
        )));
    }
    let n_usize = usize::try_from(n)
        .map_err(|_| CampaignError::Plan(format!("block {block}: population too large")))?;
    let mut idx: Vec<u64> = if k == n {
        (0..n).collect()
    } else {
        let mut rng = block_rng(seed, block);
        rand::seq::index::sample(&mut rng, n_usize, k as usize)
            .into_iter()
            .map(|i| i as u64)
            .collect()
    };
    idx.sort_unstable();
    Ok(idx)
}

/// Sites of a plan, blocks in canonical order, each block's sites in fault-space order.
/// A site's position in the list is its `run_id`.
pub fn draw_samples(
    plan: &SamplingPlan,
    model: &NpuModel,
    space: &FaultSpace,
) -> Result<Vec<FaultSite>, CampaignError> {
    plan.validate(space)?;
    let mut sites = Vec::with_capacity(plan.total() as usize);
    for (&block, &k) in &plan.per_block {
        for i in draw_indices(plan.seed, block, space.population(block), k)? {
            sites.push(model.site_at(block, i)?);
        }
    }
    Ok(sites)
}
