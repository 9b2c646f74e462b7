// SPDX-License-Identifier: Apache-2.0

//! Combinational-logic fault rate and its effect on the per-cycle fault probability.

use npu_sdc::reliability::{
    adjusted_fit, alpha_from_cumulative, block_alpha, fault_probability, ser_comb_ratio, AlphaModel, LogicFaultParams,
    TechNode,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for fanin in [1.0, 2.0, 3.0] {
        let params = LogicFaultParams { fanin, ..Default::default() };
        println!("fan-in {fanin}: logic/flop SER ratio {:.4}%", ser_comb_ratio(&params, TechNode::n16().fom_pct)?);
    }
    for tech in [TechNode::n16(), TechNode::n7()] {
        for model in [AlphaModel::LatchBound, AlphaModel::Flux] {
            let alpha = block_alpha(&tech, &LogicFaultParams { alpha_model: model, ..Default::default() })?;
            let fit = adjusted_fit(tech.ff_fit_per_mb, alpha);
            println!(
                "{} {model:?}: alpha {alpha:.4e} FIT/MB, P {:.4e} -> {:.4e}",
                tech.name,
                fault_probability(tech.ff_fit_per_mb, 1e9)?,
                fault_probability(fit, 1e9)?
            );
        }
    }
    println!("3 latched errors over 1e6 h: alpha {:.1e}", alpha_from_cumulative(3.0, 1e6)?);
    Ok(())
}
