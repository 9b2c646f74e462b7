// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use npu_sdc::campaign::{
    compute_stats, draw_indices, draw_samples, parse_record, format_record, run_campaign, sample_size,
    CampaignError, CampaignRecord, Population, RunOptions, SamplingPlan,
};
use npu_sdc::npu::{build_npu, BlockId, NpuConfig, Session, Workload};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn toy() -> Session {
    let w = Workload::preset("toy-dense", 1, 2).unwrap();
    let model = build_npu(NpuConfig::new(1, 1, 4096)).unwrap();
    Session::new(&model, &w).unwrap()
}

fn small_plan(session: &Session, per_block: u64, seed: u64) -> SamplingPlan {
    let per: BTreeMap<_, _> = session.fault_space().iter().map(|(b, _)| (b, per_block)).collect();
    SamplingPlan::new(per, seed)
}

#[test]
fn sample_size_infinite_population() {
    let n = sample_size(Population::Infinite, 0.01, 0.99, 0.5).unwrap();
    assert!(n.abs_diff(16_590) <= 5, "{n}");
    // z = 2.576 evaluated directly
    let direct = (2.576f64 * 2.576 * 0.25 / 1e-4).ceil() as u64;
    assert_eq!(direct, 16_590);
}

#[test]
fn sample_size_monotone_in_margin() {
    for n in [10u64, 1_000, 1_000_000] {
        let mut prev = 0;
        for margin in [0.4, 0.2, 0.1, 0.05, 0.01, 0.005] {
            let k = sample_size(Population::Finite(n), margin, 0.99, 0.5).unwrap();
            assert!(k >= prev && k <= n);
            prev = k;
        }
    }
}

/// Ten 4-bit registers over 25 cycles, as a flat fault-space index.
#[test]
fn draws_are_uniform_over_registers() {
    let (regs, width, cycles) = (10u64, 4u64, 25u64);
    let n = regs * width * cycles;
    let mut hits = [0u64; 10];
    for seed in 0..10_000 {
        for idx in draw_indices(seed, BlockId::Reg, n, 10).unwrap() {
            let offset = idx % (regs * width);
            hits[(offset / width) as usize] += 1;
        }
    }
    let total: u64 = hits.iter().sum();
    assert_eq!(total, 100_000);
    let expected = total as f64 / regs as f64;
    let chi2: f64 = hits.iter().map(|&h| (h as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new(9.0).unwrap().inverse_cdf(0.99);
    assert!(chi2 < critical, "chi2 {chi2} >= {critical}; {hits:?}");
}

#[test]
fn draws_are_distinct_sorted_and_seeded() {
    let s = toy();
    let plan = small_plan(&s, 50, 7);
    let space = s.fault_space();
    let a = draw_samples(&plan, s.model(), &space).unwrap();
    assert_eq!(a, draw_samples(&plan, s.model(), &space).unwrap());
    assert_eq!(a.len(), 300);
    for b in BlockId::ALL {
        let idx: Vec<u64> = a.iter().filter(|x| x.block == b).map(|x| s.model().site_index(x)).collect();
        assert_eq!(idx.len(), 50);
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        assert!(idx.iter().all(|&i| i < space.population(b)));
    }
    let other = SamplingPlan { seed: 8, ..plan };
    assert_ne!(a, draw_samples(&other, s.model(), &space).unwrap());
}

#[test]
fn plan_validation() {
    let s = toy();
    let space = s.fault_space();
    let mut plan = small_plan(&s, 1, 0);
    plan.per_block.insert(BlockId::Mac, 0);
    assert!(matches!(run_campaign(&s, &plan, &RunOptions::default()), Err(CampaignError::Plan(_))));
    plan.per_block.insert(BlockId::Mac, space.population(BlockId::Mac) + 1);
    assert!(matches!(plan.validate(&space), Err(CampaignError::Plan(_))));
    let empty = SamplingPlan::new(BTreeMap::new(), 0);
    assert!(empty.validate(&space).is_err());
}

#[test]
fn proportional_allocation() {
    let s = toy();
    let space = s.fault_space();
    for total in [6, 7, 100, 4_801, 20_000, space.total()] {
        let plan = SamplingPlan::proportional(&space, total, 0).unwrap();
        assert_eq!(plan.total(), total);
        for (b, n) in space.iter() {
            let k = plan.per_block[&b];
            assert!(k >= 1 && k <= n);
            let ideal = total as f64 * n as f64 / space.total() as f64;
            if total >= 100 {
                assert!((k as f64 - ideal).abs() <= 1.0, "{b}: {k} vs {ideal}");
            }
        }
    }
    assert!(SamplingPlan::proportional(&space, 5, 0).is_err());
    assert!(SamplingPlan::proportional(&space, space.total() + 1, 0).is_err());
}

#[test]
fn exhaustive_campaign_equals_brute_force() {
    let s = toy();
    let space = s.fault_space();
    assert!(space.total() <= 50_000);
    let plan = SamplingPlan::exhaustive(&space, 0);
    let result = run_campaign(&s, &plan, &RunOptions { jobs: 4, ..Default::default() }).unwrap();
    for (block, n) in space.iter() {
        let mut mismatches = 0u64;
        for i in 0..n {
            let site = s.model().site_at(block, i).unwrap();
            mismatches += u64::from(s.inject(&site).unwrap().mismatches);
        }
        let st = result.stats.block(block).unwrap();
        assert_eq!(st.k, n);
        assert_eq!(st.mismatches, mismatches);
        let brute_mean = mismatches as f64 / (n as f64 * 2.0);
        assert_eq!(st.sdc_mean, brute_mean);
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let s = toy();
    let plan = small_plan(&s, 300, 21);
    let base = run_campaign(&s, &plan, &RunOptions::default()).unwrap();
    for jobs in [2, 3, 8] {
        let r = run_campaign(&s, &plan, &RunOptions { jobs, ..Default::default() }).unwrap();
        assert_eq!(r.records, base.records);
        assert_eq!(r.stats.to_json(), base.stats.to_json());
    }
}

#[test]
fn resume_at_every_prefix_is_identical() {
    let s = toy();
    let mut per = BTreeMap::new();
    for (b, k) in BlockId::ALL.into_iter().zip([20, 20, 20, 15, 15, 10]) {
        per.insert(b, k);
    }
    let plan = SamplingPlan::new(per, 5);
    let dir = tempfile::tempdir().unwrap();
    let full_log = dir.path().join("full.log");
    let full = run_campaign(
        &s,
        &plan,
        &RunOptions { log: Some(full_log.clone()), ..Default::default() },
    )
    .unwrap();
    assert_eq!(full.records.len(), 100);
    let full_bytes = std::fs::read(&full_log).unwrap();
    let full_stats = full.stats.to_json();

    for k in 0..=100u64 {
        let log = dir.path().join(format!("part{k}.log"));
        let opts = RunOptions {
            log: Some(log.clone()),
            max_runs: Some(k),
            jobs: 2,
            ..Default::default()
        };
        match run_campaign(&s, &plan, &opts) {
            Err(CampaignError::Interrupted { completed, planned }) => {
                assert_eq!((completed, planned), (k, 100));
            }
            Ok(_) => assert_eq!(k, 100),
            Err(e) => panic!("{e}"),
        }
        let resumed = run_campaign(
            &s,
            &plan,
            &RunOptions { log: Some(log.clone()), resume: true, jobs: 3, ..Default::default() },
        )
        .unwrap();
        assert_eq!(resumed.resumed, k);
        assert_eq!(resumed.stats.to_json(), full_stats, "k = {k}");
        assert_eq!(std::fs::read(&log).unwrap(), full_bytes, "k = {k}");
    }
}

#[test]
fn resume_without_log_runs_everything() {
    let s = toy();
    let plan = small_plan(&s, 5, 1);
    let dir = tempfile::tempdir().unwrap();
    let r = run_campaign(
        &s,
        &plan,
        &RunOptions { log: Some(dir.path().join("none.log")), resume: true, ..Default::default() },
    )
    .unwrap();
    assert_eq!((r.resumed, r.records.len()), (0, 30));
}

#[test]
fn stop_flag_interrupts_before_any_run() {
    let s = toy();
    let plan = small_plan(&s, 5, 1);
    let stop = Arc::new(AtomicBool::new(true));
    let err = run_campaign(&s, &plan, &RunOptions { stop: Some(stop), ..Default::default() }).unwrap_err();
    assert!(matches!(err, CampaignError::Interrupted { completed: 0, .. }));
}

#[test]
fn corrupted_log_reports_last_valid_run() {
    let s = toy();
    let plan = small_plan(&s, 5, 1);
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("c.log");
    run_campaign(&s, &plan, &RunOptions { log: Some(log.clone()), ..Default::default() }).unwrap();
    let text = std::fs::read_to_string(&log).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let resume = RunOptions { log: Some(log.clone()), resume: true, ..Default::default() };

    lines[7] = lines[7].replace(",masked,", ",bogus,").replace(",sdc,", ",bogus,").replace(",crash,", ",bogus,");
    std::fs::write(&log, lines.join("\n") + "\n").unwrap();
    match run_campaign(&s, &plan, &resume) {
        Err(CampaignError::CorruptLog { last_valid, line, .. }) => assert_eq!((last_valid, line), (Some(6), 8)),
        other => panic!("{other:?}"),
    }

    std::fs::write(&log, &text[..text.len() - 3]).unwrap();
    match run_campaign(&s, &plan, &resume) {
        Err(CampaignError::CorruptLog { last_valid, .. }) => assert_eq!(last_valid, Some(28)),
        other => panic!("{other:?}"),
    }

    // a record for a site the plan never drew
    let other_plan = small_plan(&s, 5, 2);
    std::fs::write(&log, &text).unwrap();
    match run_campaign(&s, &other_plan, &resume) {
        Err(CampaignError::CorruptLog { last_valid: None, .. }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn stats_rebuild_from_log() {
    let s = toy();
    let plan = small_plan(&s, 40, 3);
    let r = run_campaign(&s, &plan, &RunOptions::default()).unwrap();
    let lines: Vec<String> = r.records.iter().map(|rec| format_record(s.model(), rec)).collect();
    let parsed: Vec<CampaignRecord> = lines.iter().map(|l| parse_record(s.model(), l).unwrap()).collect();
    assert_eq!(parsed, r.records);
    let again = compute_stats(&parsed, &s.fault_space(), 3, plan.confidence).unwrap();
    assert_eq!(again.to_csv(), r.stats.to_csv());
    assert_eq!(r.stats.total_runs, 240);
    assert_eq!(r.stats.blocks.iter().map(|b| b.k).sum::<u64>(), 240);
    for b in &r.stats.blocks {
        assert!((0.0..=1.0).contains(&b.sdc_mean));
        assert!(b.ci_low <= b.sdc_mean && b.sdc_mean <= b.ci_high && b.ci_halfwidth >= 0.0);
        assert!(b.k <= b.n);
    }
}

#[test]
fn all_masked_block_has_wilson_zero_interval() {
    let s = toy();
    let reg = s.model().register_index(BlockId::Reg, "cfg[7]").unwrap();
    let records: Vec<CampaignRecord> = (0..50u64)
        .map(|i| {
            let site = npu_sdc::npu::FaultSite { block: BlockId::Reg, register: reg, bit: (i % 32) as u8, cycle: i };
            CampaignRecord { run_id: i, site, outcome: s.inject(&site).unwrap() }
        })
        .collect();
    let stats = compute_stats(&records, &s.fault_space(), 0, 0.99).unwrap();
    let b = stats.block(BlockId::Reg).unwrap();
    assert_eq!(b.sdc_mean, 0.0);
    assert_eq!(b.ci_low, 0.0);
    assert!(b.ci_high > 0.0 && b.ci_high < 0.15);
}

/// Per-block 99% intervals from 10% samples cover the exhaustive mean.
#[test]
fn confidence_intervals_are_calibrated() {
    let s = toy();
    let space = s.fault_space();
    let exhaustive = run_campaign(&s, &SamplingPlan::exhaustive(&space, 0), &RunOptions { jobs: 4, ..Default::default() }).unwrap();
    let table: BTreeMap<_, Vec<u32>> = BlockId::ALL
        .into_iter()
        .map(|b| {
            let v = exhaustive.records.iter().filter(|r| r.site.block == b).map(|r| r.outcome.mismatches).collect();
            (b, v)
        })
        .collect();
    let z = npu_sdc::campaign::z_score(0.99).unwrap();
    let reps = 200;
    for (b, n) in space.iter() {
        let truth = exhaustive.stats.block(b).unwrap().sdc_mean;
        let k = n / 10;
        let mut covered = 0;
        for seed in 0..reps {
            let m: u64 = draw_indices(seed, b, n, k).unwrap().iter().map(|&i| u64::from(table[&b][i as usize])).sum();
            let mean = m as f64 / (k as f64 * 2.0);
            let (lo, hi) = npu_sdc::campaign::wilson_interval(mean, k, z);
            covered += u32::from(lo <= truth && truth <= hi);
        }
        assert!(covered as f64 >= 0.95 * reps as f64, "{b}: {covered}/{reps}");
    }
}

proptest! {
    #[test]
    fn draw_indices_properties(seed in any::<u64>(), n in 1u64..5_000, frac in 0.0f64..=1.0) {
        let k = ((n as f64 * frac) as u64).max(1);
        let idx = draw_indices(seed, BlockId::Tsu, n, k).unwrap();
        prop_assert_eq!(idx.len() as u64, k);
        prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(idx.iter().all(|&i| i < n));
    }

    #[test]
    fn sample_size_never_exceeds_population(n in 1u64..10_000_000, margin in 0.001f64..0.5, conf in 0.5f64..0.999) {
        let k = sample_size(Population::Finite(n), margin, conf, 0.5).unwrap();
        prop_assert!(k >= 1 && k <= n);
        let inf = sample_size(Population::Infinite, margin, conf, 0.5).unwrap();
        prop_assert!(k <= inf);
    }
}
