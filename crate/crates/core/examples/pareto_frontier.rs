// SPDX-License-Identifier: Apache-2.0

//! Area versus SDC frontier over all 4096 assignments, with and without logic faults.

use npu_sdc::campaign::{z_score, BlockStats, StatsReport};
use npu_sdc::npu::BlockId;
use npu_sdc::protection::{
    dmr_delta_pct, evaluate_all, frontier_csv, pareto_frontier, preset_areas, BlockRates, HardeningReading,
    ProtectionProblem, Scheme,
};
use npu_sdc::reliability::{block_alpha, LogicFaultParams, MacConfig, TechNode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let z = z_score(0.99)?;
    let stats = StatsReport {
        seed: 0,
        confidence: 0.99,
        total_runs: 6_000,
        blocks: BlockId::ALL
            .into_iter()
            .zip([12, 40, 25, 8, 60, 55])
            .map(|(b, m)| BlockStats::from_counts(b, 1_000, 5_000_000, m, 0, m, 1, z))
            .collect(),
    };
    let tech = TechNode::n7();
    let rate = BlockRates {
        fit_per_mb: tech.ff_fit_per_mb,
        alpha: block_alpha(&tech, &LogicFaultParams::default())?,
        freq_hz: 1e9,
    };
    for logic in [false, true] {
        let problem = ProtectionProblem::from_stats(
            &stats,
            &[rate; 6],
            &preset_areas(),
            &Scheme::defaults(HardeningReading::Reduction),
            dmr_delta_pct("7nm", MacConfig::Mac64)?,
            logic,
            None,
        )?;
        let frontier = pareto_frontier(&evaluate_all(&problem)?)?;
        println!("logic faults {logic}: {} frontier points", frontier.len());
        print!("{}", frontier_csv(&frontier, &problem.blocks));
    }
    Ok(())
}
