// SPDX-License-Identifier: Apache-2.0

//! Cheapest assignment meeting ASIL-D and lowest-SDC assignment under area budgets.

use npu_sdc::npu::BlockId;
use npu_sdc::protection::{dmr_delta_pct, min_area, optimize, preset_areas, HardeningReading, ProtectionProblem, Scheme};
use npu_sdc::reliability::{published_target, AsilLevel, MacConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // SDC per inference of each unprotected block
    let base = [2.0e-17, 6.0e-17, 3.0e-17, 1.0e-17, 9.0e-17, 8.0e-17];
    let blocks: Vec<_> = preset_areas().into_iter().zip(base).collect();
    let target = published_target(MacConfig::Mac32, AsilLevel::D);
    let problem = ProtectionProblem::from_contributions(
        &blocks,
        &Scheme::defaults(HardeningReading::Reduction),
        dmr_delta_pct("16nm", MacConfig::Mac32)?,
        Some(target.clone()),
    )?;
    println!("blocks {:?}, threshold {:.2e}", BlockId::ALL.map(|b| b.name()), target.threshold_per_inference);

    let best = min_area(&problem)?;
    println!("min area: {}  +{:.2}%  SDC {:.3e}", best.codes_string(), best.area_overhead_pct, best.sdc_npu);
    for pct in [0.0, 5.0, 20.0, 60.0] {
        let c = optimize(&problem, problem.baseline_area * (1.0 + pct / 100.0))?;
        println!(
            "budget +{pct:>4}%: {}  +{:.2}%  SDC {:.3e}  meets {}",
            c.codes_string(),
            c.area_overhead_pct,
            c.sdc_npu,
            c.meets_target
        );
    }
    Ok(())
}
