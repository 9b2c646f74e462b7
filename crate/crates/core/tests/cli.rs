// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::Command;

use npu_sdc::campaign::{z_score, BlockStats, StatsReport};
use npu_sdc::npu::BlockId;
use npu_sdc::reliability::TechNode;

fn presets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets")
}

fn npu_sdc(config: &Path, out: &Path, args: &[&str]) -> (i32, String, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_npu-sdc"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap();
    (
        o.status.code().unwrap(),
        String::from_utf8(o.stdout).unwrap(),
        String::from_utf8(o.stderr).unwrap(),
    )
}

fn toy() -> PathBuf {
    presets().join("toy-dense.toml")
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn sites_fixture_for_tiny_cnn() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = npu_sdc(&presets().join("tiny-cnn.toml"), dir.path(), &["sites"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(
        read(&dir.path().join("sites.csv")),
        "block,bits,cycles,population\n\
         AO,72,5568,400896\n\
         DMA,112,5568,623616\n\
         MAC,192,5568,1069056\n\
         REG,256,5568,1425408\n\
         TSU,56,5568,311808\n\
         WD,56,5568,311808\n\
         total,744,5568,4142592\n"
    );
}

#[test]
fn usage_and_io_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(npu_sdc(&dir.path().join("missing.toml"), dir.path(), &["sites"]).0, 2);
    assert_eq!(npu_sdc(&toy(), dir.path(), &["frobnicate"]).0, 1);
    assert_eq!(npu_sdc(&toy(), dir.path(), &["--jobs", "0", "sites"]).0, 1);
    assert_eq!(npu_sdc(&toy(), dir.path(), &["--node", "5nm", "sites"]).0, 1);
    assert_eq!(npu_sdc(&toy(), dir.path(), &["inject", "--block", "MAC", "--register", "nope", "--bit", "0", "--cycle", "0"]).0, 1);
    // no stats yet
    assert_eq!(npu_sdc(&toy(), dir.path(), &["estimate"]).0, 2);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[sampling]\nmargin = 2.0\n").unwrap();
    assert_eq!(npu_sdc(&bad, dir.path(), &["sites"]).0, 1);
    std::fs::write(&bad, "[npu]\nmac_rows = \"two\"\n").unwrap();
    let (code, _, err) = npu_sdc(&bad, dir.path(), &["sites"]);
    assert_eq!(code, 1);
    assert!(err.contains("mac_rows"), "{err}");
}

#[test]
fn interrupted_campaign_resumes_to_identical_stats() {
    let dir = tempfile::tempdir().unwrap();
    let full = dir.path().join("full");
    let part = dir.path().join("part");
    assert_eq!(npu_sdc(&toy(), &full, &["--jobs", "2", "campaign"]).0, 0);
    assert_eq!(npu_sdc(&toy(), &part, &["campaign", "--max-runs", "700"]).0, 4);
    assert!(!part.join("stats.json").exists());
    assert_eq!(npu_sdc(&toy(), &part, &["--resume", "campaign", "--max-runs", "900"]).0, 4);
    let (code, out, _) = npu_sdc(&toy(), &part, &["--resume", "--jobs", "3", "campaign"]);
    assert_eq!(code, 0);
    assert!(out.contains("(1600 resumed)"), "{out}");
    for f in ["records.log", "stats.json", "stats.csv"] {
        assert_eq!(read(&full.join(f)), read(&part.join(f)), "{f}");
    }

    // same seed reruns are byte-identical, a different seed is not
    let again = dir.path().join("again");
    assert_eq!(npu_sdc(&toy(), &again, &["campaign"]).0, 0);
    assert_eq!(read(&full.join("stats.json")), read(&again.join("stats.json")));
    let other = dir.path().join("other");
    assert_eq!(npu_sdc(&toy(), &other, &["--seed", "2", "campaign"]).0, 0);
    assert_ne!(read(&full.join("records.log")), read(&other.join("records.log")));
}

#[test]
fn corrupt_log_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(npu_sdc(&toy(), dir.path(), &["campaign", "--max-runs", "50"]).0, 4);
    let log = dir.path().join("records.log");
    let mut text = read(&log);
    text.push_str("garbage line\n");
    std::fs::write(&log, text).unwrap();
    let (code, _, err) = npu_sdc(&toy(), dir.path(), &["--resume", "campaign"]);
    assert_eq!(code, 2);
    assert!(err.contains("line 51"), "{err}");
}

fn write_stats(path: &Path, mismatches: impl Fn(BlockId) -> u64) {
    let z = z_score(0.99).unwrap();
    let report = StatsReport {
        seed: 0,
        confidence: 0.99,
        total_runs: 600,
        blocks: BlockId::ALL
            .into_iter()
            .map(|b| BlockStats::from_counts(b, 100, 10_000, mismatches(b).min(100), 0, mismatches(b), 2, z))
            .collect(),
    };
    std::fs::write(path, report.to_json()).unwrap();
}

#[test]
fn all_masked_stats_give_zero_sdc_and_meet_the_target() {
    let dir = tempfile::tempdir().unwrap();
    write_stats(&dir.path().join("stats.json"), |_| 0);
    let (code, out, err) = npu_sdc(&toy(), dir.path(), &["--logic-faults", "estimate"]);
    assert_eq!(code, 0, "{err}");
    let est: serde_json::Value = serde_json::from_str(&read(&dir.path().join("estimate.json"))).unwrap();
    assert_eq!(est["without_logic"]["sdc_npu"], 0.0);
    assert_eq!(est["with_logic"]["sdc_npu"], 0.0);
    assert_eq!(est["meets_target"], true);
    assert!(out.contains("met"), "{out}");
    let (code, _, _) = npu_sdc(&toy(), dir.path(), &["optimize"]);
    assert_eq!(code, 0);
    assert!(read(&dir.path().join("optimize.csv")).contains("target,0,0,0,0,0,0,"));
}

#[test]
fn logic_column_dominates_and_zero_budget_protects_nothing() {
    let dir = tempfile::tempdir().unwrap();
    write_stats(&dir.path().join("stats.json"), |b| 3 + 7 * b.index() as u64);
    assert_eq!(npu_sdc(&toy(), dir.path(), &["estimate"]).0, 0);
    let est: serde_json::Value = serde_json::from_str(&read(&dir.path().join("estimate.json"))).unwrap();
    let off = est["without_logic"]["blocks"].as_array().unwrap();
    let on = est["with_logic"]["blocks"].as_array().unwrap();
    for (a, b) in off.iter().zip(on) {
        assert!(b["contribution"].as_f64().unwrap() >= a["contribution"].as_f64().unwrap());
    }

    for logic in [&[][..], &["--logic-faults"][..]] {
        let mut args = logic.to_vec();
        args.extend(["--budget", "0", "optimize"]);
        assert_eq!(npu_sdc(&toy(), dir.path(), &args).0, 0);
        let csv = read(&dir.path().join("optimize.csv"));
        assert!(csv.lines().nth(1).unwrap().starts_with("budget,0,0,0,0,0,0,"), "{csv}");
    }
    assert_eq!(npu_sdc(&toy(), dir.path(), &["--budget", "-5", "optimize"]).0, 1);
}

#[test]
fn unreachable_target_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    write_stats(&dir.path().join("stats.json"), |_| 50);
    let config = dir.path().join("no-dmr.toml");
    std::fs::write(
        &config,
        "[npu]\nmac_rows = 1\nmac_cols = 1\nbuffer_bytes = 4096\n[workload]\npreset = \"toy-dense\"\nseed = 1\nnum_inputs = 2\n\
         [[protection.schemes]]\nkind = \"none\"\narea_overhead_pct = 0.0\nfit_ratio = 1.0\nalpha_ratio = 1.0\n\
         [[protection.schemes]]\nkind = \"quatro-hard\"\narea_overhead_pct = 157.0\nfit_ratio = 0.02\nalpha_ratio = 1.0\n\
         [target]\nthreshold = 1e-40\n",
    )
    .unwrap();
    let (code, out, _) = npu_sdc(&config, dir.path(), &["optimize"]);
    assert_eq!(code, 3);
    assert!(out.contains("infeasible"), "{out}");
    assert!(read(&dir.path().join("frontier.csv")).lines().count() > 1);
}

#[test]
fn tech_preset_files_match_built_ins() {
    for (file, built_in) in [("16nm.toml", TechNode::n16()), ("7nm.toml", TechNode::n7())] {
        assert_eq!(TechNode::load(&presets().join("tech").join(file)).unwrap(), built_in);
    }
}

#[test]
fn every_preset_config_loads() {
    for name in ["tiny-cnn.toml", "toy-dense.toml", "cnn-file.toml"] {
        let dir = tempfile::tempdir().unwrap();
        let (code, _, err) = npu_sdc(&presets().join(name), dir.path(), &["golden"]);
        assert_eq!(code, 0, "{name}: {err}");
        assert!(dir.path().join("golden.json").exists());
    }
}
