// SPDX-License-Identifier: Apache-2.0

//! Random inputs for the reliability and protection oracles.

use npu_sdc::campaign::{z_score, BlockStats, StatsReport};
use npu_sdc::npu::BlockId;
use npu_sdc::protection::{
    dmr_delta_pct, BlockArea, BlockRates, HardeningReading, ProtectionProblem, Scheme, SchemeKind,
};
use npu_sdc::reliability::{
    asil_threshold, block_alpha, AsilLevel, LogicFaultParams, MacConfig, TechNode, PUBLISHED_AREA_FRACTION,
};
use rand::Rng;

/// `n` sites with probabilities up to `max_p` and SDC for every flip subset.
///
/// Single-flip SDCs are uniform in `[0, 1]`; a multi-flip event's SDC lies
/// between the largest and the (capped) sum of its members' single-flip SDCs.
pub fn multiflip_instance(rng: &mut impl Rng, n: usize, max_p: f64) -> (Vec<f64>, Vec<f64>) {
    let p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=max_p)).collect();
    let single: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
    let mut sdc = vec![0.0; 1 << n];
    for mask in 1usize..1 << n {
        let members = (0..n).filter(|i| mask >> i & 1 == 1);
        let (mut hi, mut lo) = (0.0f64, 0.0f64);
        for i in members {
            hi += single[i];
            lo = lo.max(single[i]);
        }
        let hi = hi.min(1.0);
        sdc[mask] = if mask.count_ones() == 1 { lo } else { rng.gen_range(lo..=hi) };
    }
    (p, sdc)
}

/// Synthetic campaign statistics; roughly one block in six has no SDC at all.
pub fn random_stats(rng: &mut impl Rng) -> StatsReport {
    let z = z_score(0.99).unwrap();
    let inputs = rng.gen_range(1..=32u32);
    let blocks = BlockId::ALL
        .into_iter()
        .map(|b| {
            let n = rng.gen_range(1_000..=50_000_000u64);
            let k = rng.gen_range(1..=n.min(20_000));
            let mismatches = if rng.gen_bool(1.0 / 6.0) {
                0
            } else {
                let rate = 10f64.powf(rng.gen_range(-4.0..0.0));
                ((k * u64::from(inputs)) as f64 * rate).round() as u64
            };
            let sdc_runs = mismatches.min(k);
            BlockStats::from_counts(b, k, n, sdc_runs, 0, mismatches, inputs, z)
        })
        .collect();
    StatsReport {
        seed: 0,
        confidence: 0.99,
        total_runs: 0,
        blocks,
    }
}

pub fn random_areas(rng: &mut impl Rng) -> Vec<BlockArea> {
    BlockId::ALL
        .into_iter()
        .map(|b| BlockArea::new(b, rng.gen_range(1.0..100.0), rng.gen_range(0.1..=1.0)))
        .collect()
}

pub struct Instance {
    pub stats: StatsReport,
    pub rates: Vec<BlockRates>,
    pub areas: Vec<BlockArea>,
    pub schemes: Vec<Scheme>,
    pub delta: f64,
    pub mac: MacConfig,
    /// Target threshold as a fraction of the unprotected SDC.
    pub threshold_factor: f64,
}

impl Instance {
    pub fn problem(&self, logic_faults: bool, with_target: bool) -> ProtectionProblem {
        let mut p =
            ProtectionProblem::from_stats(&self.stats, &self.rates, &self.areas, &self.schemes, self.delta, logic_faults, None)
                .unwrap();
        if with_target {
            let baseline = p.evaluate(&p.uniform(SchemeKind::None).unwrap()).unwrap().sdc_npu;
            let mut t = asil_threshold(AsilLevel::D, PUBLISHED_AREA_FRACTION[self.mac.index()], 0.3e-3).unwrap();
            t.threshold_per_inference = baseline * self.threshold_factor;
            p.target = Some(t);
        }
        p
    }
}

pub fn random_instance(rng: &mut impl Rng) -> Instance {
    let tech = if rng.gen_bool(0.5) { TechNode::n16() } else { TechNode::n7() };
    let params = LogicFaultParams {
        fanin: rng.gen_range(1.0..4.0),
        ..Default::default()
    };
    let alpha = block_alpha(&tech, &params).unwrap();
    let freq_hz = 1e9;
    let reading = if rng.gen_bool(0.5) { HardeningReading::Reduction } else { HardeningReading::Raw };
    let mac = MacConfig::ALL[rng.gen_range(0..4)];
    Instance {
        stats: random_stats(rng),
        rates: BlockId::ALL
            .iter()
            .map(|_| BlockRates { fit_per_mb: tech.ff_fit_per_mb, alpha, freq_hz })
            .collect(),
        areas: random_areas(rng),
        schemes: Scheme::defaults(reading),
        delta: dmr_delta_pct(&tech.name, mac).unwrap(),
        mac,
        threshold_factor: 10f64.powf(rng.gen_range(-3.0..0.1)),
    }
}
