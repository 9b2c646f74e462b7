// SPDX-License-Identifier: Apache-2.0

//! Fault-free run of the tiny CNN on a 2x2 MAC array, with per-block flop counts.

use npu_sdc::npu::{build_npu, BlockId, NpuConfig, Session, Workload};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = build_npu(NpuConfig::new(2, 2, 4096))?;
    let workload = Workload::preset("tiny-cnn", 42, 4)?;
    let session = Session::new(&model, &workload)?;
    let golden = session.golden();
    println!("labels {:?}", golden.top1_labels);
    println!("cycles {}  state digest {:016x}", golden.cycle_count, golden.state_digest);
    for b in BlockId::ALL {
        let regs: Vec<String> =
            model.block_registers(b).iter().map(|r| format!("{}:{}", r.name, r.width)).collect();
        println!("{:<4} {:>4} bits  {}", b.name(), model.block_bits(b), regs.join(" "));
    }
    assert_eq!(session.replay()?, *golden);
    Ok(())
}
