// SPDX-License-Identifier: Apache-2.0

//! Proportionally allocated campaign with a resumable record log.

use npu_sdc::campaign::{run_campaign, sample_size, Population, RunOptions, SamplingPlan};
use npu_sdc::npu::{build_npu, NpuConfig, Session, Workload};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = build_npu(NpuConfig::new(1, 1, 4096))?;
    let session = Session::new(&model, &Workload::preset("toy-dense", 1, 2)?)?;
    let space = session.fault_space();
    println!(
        "{} sites; a 1% margin at 99% confidence needs {} runs per block",
        space.total(),
        sample_size(Population::Infinite, 0.01, 0.99, 0.5)?
    );

    let plan = SamplingPlan::proportional(&space, 2_000, 7)?;
    let dir = std::env::temp_dir().join("npu-sdc-example");
    std::fs::create_dir_all(&dir)?;
    let log = dir.join("records.log");
    let first = run_campaign(
        &session,
        &plan,
        &RunOptions { jobs: 4, log: Some(log.clone()), max_runs: Some(500), ..Default::default() },
    );
    println!("first pass: {}", first.err().map(|e| e.to_string()).unwrap_or_default());
    let done = run_campaign(&session, &plan, &RunOptions { jobs: 4, log: Some(log), resume: true, ..Default::default() })?;
    println!("resumed {} of {} runs\n{}", done.resumed, done.records.len(), done.stats.to_csv());
    Ok(())
}
