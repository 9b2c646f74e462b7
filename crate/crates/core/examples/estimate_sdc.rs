// SPDX-License-Identifier: Apache-2.0

//! Per-block and NPU-level SDC per inference from a sampled campaign.

use npu_sdc::campaign::{run_campaign, RunOptions, SamplingPlan};
use npu_sdc::npu::{build_npu, NpuConfig, Session, Workload};
use npu_sdc::reliability::{fault_probability, fault_probability_per_second, sdc_npu_estimate, SitePopulation, TechNode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = build_npu(NpuConfig::new(1, 1, 4096))?;
    let session = Session::new(&model, &Workload::preset("toy-dense", 1, 2)?)?;
    let space = session.fault_space();
    let run = run_campaign(&session, &SamplingPlan::proportional(&space, 4_800, 1)?, &RunOptions { jobs: 4, ..Default::default() })?;

    for tech in [TechNode::n16(), TechNode::n7()] {
        let p = fault_probability(tech.ff_fit_per_mb, 1e9)?;
        println!(
            "{}: {} FIT/MB, P per cycle {p:.4e}, per second {:.4e}",
            tech.name,
            tech.ff_fit_per_mb,
            fault_probability_per_second(tech.ff_fit_per_mb)?
        );
        let est = sdc_npu_estimate(&run.stats, &SitePopulation::uniform(&space, p))?;
        for b in &est.blocks {
            println!("  {:<4} N {:>6} K {:>5} sdc_mean {:.4} -> {:.3e}", b.block.name(), b.n, b.k, b.sdc_mean, b.contribution);
        }
        println!("  SDC_NPU {:.4e} in [{:.4e}, {:.4e}]", est.sdc_npu, est.ci_low, est.ci_high);
    }
    Ok(())
}
