// SPDX-License-Identifier: Apache-2.0

//! Single bit flips in the MAC accumulator and the watchdog, one per cycle sample.

use npu_sdc::npu::{build_npu, BlockId, NpuConfig, Session, Workload};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = build_npu(NpuConfig::new(2, 2, 4096))?;
    let session = Session::new(&model, &Workload::preset("tiny-cnn", 42, 4)?)?;
    let cycles = session.golden().cycle_count;
    for (block, register, bit) in [(BlockId::Mac, "acc[0]", 20), (BlockId::Mac, "acc[0]", 2), (BlockId::Tsu, "fsm_state", 1)] {
        for cycle in [cycles / 4, cycles / 2, 3 * cycles / 4] {
            let site = model.site(block, register, bit, cycle, session.golden())?;
            let o = session.inject(&site)?;
            println!(
                "{block}.{register}[{bit}] @ {cycle:>5}: {:<6} {}/{} mismatched{}",
                o.kind,
                o.mismatches,
                o.inputs,
                o.crash_reason.map(|r| format!(" ({r})")).unwrap_or_default()
            );
        }
    }
    Ok(())
}
