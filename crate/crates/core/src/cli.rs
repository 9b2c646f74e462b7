// SPDX-License-Identifier: Apache-2.0

//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 I/O error, 3 infeasible,
//! 4 interrupted.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::campaign::{run_campaign, CampaignError, RunOptions, StatsReport};
use crate::config::{ConfigError, ProjectConfig};
use crate::npu::{build_npu, BlockId, FaultSite, NpuError, Session};
use crate::protection::{evaluate_all, min_area, optimize, pareto_frontier, frontier_csv, BlockRates, EvaluatedConfig, ProtectionError, ProtectionProblem};
use crate::reliability::{
    block_alpha, fault_probability, fault_probability_per_second, meets_asil, sdc_npu_estimate, AsilLevel, AsilTarget,
    ReliabilityError, SdcEstimate, SitePopulation,
};

#[derive(Debug, Parser, Clone)]
#[command(name = "npu-sdc", version, about = "Soft-error SDC analysis for a functional-block NPU")]
pub struct Cli {
    /// Project configuration file.
    #[arg(long, global = true, default_value = "npu-sdc.toml")]
    pub config: PathBuf,
    /// Overrides the sampling seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Parallel injection workers.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Continue a campaign from its record log.
    #[arg(long, global = true)]
    pub resume: bool,
    /// Include combinational-logic faults.
    #[arg(long, global = true)]
    pub logic_faults: bool,
    /// Overrides the technology node.
    #[arg(long, global = true, value_parser = ["16nm", "7nm"])]
    pub node: Option<String>,
    /// Area budget as percent overhead over the unprotected NPU.
    #[arg(long, global = true)]
    pub budget: Option<f64>,
    /// Overrides the ASIL level.
    #[arg(long, global = true, value_parser = ["asil-b", "asil-c", "asil-d"])]
    pub target: Option<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Clone)]
pub enum Command {
    /// Per-block fault-site populations.
    Sites,
    /// Fault-free run.
    Golden,
    /// One injection.
    Inject {
        #[arg(long)]
        block: BlockId,
        #[arg(long)]
        register: String,
        #[arg(long)]
        bit: u8,
        #[arg(long)]
        cycle: u64,
    },
    /// Sampled fault-injection campaign.
    Campaign {
        /// Stop after this many new runs, leaving a resumable log.
        #[arg(long)]
        max_runs: Option<u64>,
    },
    /// SDC per inference from campaign statistics.
    Estimate {
        /// Defaults to `<out>/stats.json`.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Protection assignment under an area budget or ASIL target.
    Optimize {
        /// Defaults to `<out>/stats.json`.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Npu(#[from] NpuError),
    #[error(transparent)]
    Campaign(#[from] CampaignError),
    #[error(transparent)]
    Reliability(#[from] ReliabilityError),
    #[error(transparent)]
    Protection(#[from] ProtectionError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(ConfigError::Io { .. }) | CliError::Io { .. } => 2,
            CliError::Usage(_) | CliError::Config(_) | CliError::Npu(_) | CliError::Reliability(_) => 1,
            CliError::Campaign(e) => match e {
                CampaignError::Io { .. } | CampaignError::CorruptLog { .. } | CampaignError::Stats(_) => 2,
                CampaignError::Interrupted { .. } => 4,
                _ => 1,
            },
            CliError::Protection(ProtectionError::Infeasible { .. }) => 3,
            CliError::Protection(_) => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, contents).map_err(io_err(path))
}

fn say(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(io_err(Path::new("<stdout>")))
}

/// Four significant digits for human-readable tables.
pub fn sig4(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-3..6).contains(&mag) {
        format!("{:.*}", (3 - mag).max(0) as usize, x)
    } else {
        format!("{x:.3e}")
    }
}

impl Cli {
    fn load_config(&self) -> Result<ProjectConfig, CliError> {
        let mut cfg = ProjectConfig::load(&self.config)?;
        if let Some(node) = &self.node {
            cfg.tech.node = node.clone();
        }
        if let Some(seed) = self.seed {
            cfg.sampling.seed = seed;
        }
        if let Some(level) = &self.target {
            cfg.target.level = level.parse::<AsilLevel>()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn stats_path(&self, given: &Option<PathBuf>) -> PathBuf {
        given.clone().unwrap_or_else(|| self.out.join("stats.json"))
    }
}

fn session(cfg: &ProjectConfig) -> Result<Session, CliError> {
    let model = build_npu(cfg.npu.clone())?;
    let workload = cfg.workload()?;
    Ok(Session::new(&model, &workload)?)
}

fn read_stats(path: &Path) -> Result<StatsReport, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(StatsReport::from_json(&text)?)
}

/// Runs one command, writing human output to `out`.
pub fn run(cli: &Cli, stop: Option<Arc<AtomicBool>>, out: &mut dyn Write) -> Result<(), CliError> {
    if cli.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let cfg = cli.load_config()?;
    match &cli.command {
        Command::Sites => cmd_sites(cli, &cfg, out),
        Command::Golden => cmd_golden(cli, &cfg, out),
        Command::Inject {
            block,
            register,
            bit,
            cycle,
        } => cmd_inject(&cfg, *block, register, *bit, *cycle, out),
        Command::Campaign { max_runs } => cmd_campaign(cli, &cfg, *max_runs, stop, out),
        Command::Estimate { stats } => cmd_estimate(cli, &cfg, &read_stats(&cli.stats_path(stats))?, out).map(|_| ()),
        Command::Optimize { stats } => cmd_optimize(cli, &cfg, &read_stats(&cli.stats_path(stats))?, out).map(|_| ()),
    }
}

pub fn cmd_sites(cli: &Cli, cfg: &ProjectConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let s = session(cfg)?;
    let space = s.fault_space();
    let mut csv = String::from("block,bits,cycles,population\n");
    let mut table = format!("{:<6}{:>8}{:>10}{:>14}\n", "block", "bits", "cycles", "N_K");
    for (b, n) in space.iter() {
        writeln!(csv, "{b},{},{},{n}", space.bits(b), space.cycles()).expect("string write");
        writeln!(table, "{:<6}{:>8}{:>10}{:>14}", b.name(), space.bits(b), space.cycles(), n).expect("string write");
    }
    let bits: u64 = BlockId::ALL.iter().map(|&b| space.bits(b)).sum();
    writeln!(csv, "total,{bits},{},{}", space.cycles(), space.total()).expect("string write");
    writeln!(table, "{:<6}{:>8}{:>10}{:>14}", "total", bits, space.cycles(), space.total()).expect("string write");
    write_file(&cli.out.join("sites.csv"), &csv)?;
    say(out, &table)
}

pub fn cmd_golden(cli: &Cli, cfg: &ProjectConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let s = session(cfg)?;
    let g = s.golden();
    let json = serde_json::to_string_pretty(g).expect("golden serialize") + "\n";
    write_file(&cli.out.join("golden.json"), &json)?;
    say(
        out,
        &format!(
            "cycles {}\ndigest {:016x}\nlabels {:?}\n",
            g.cycle_count, g.state_digest, g.top1_labels
        ),
    )
}

pub fn cmd_inject(
    cfg: &ProjectConfig,
    block: BlockId,
    register: &str,
    bit: u8,
    cycle: u64,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let s = session(cfg)?;
    let site: FaultSite = s.model().site(block, register, bit, cycle, s.golden())?;
    let o = s.inject(&site)?;
    let reason = o.crash_reason.map_or("-", |r| r.as_str());
    say(
        out,
        &format!(
            "{block}.{register}[{bit}] @ {cycle}: {} sdc_fraction {}/{} crash_reason {reason}\n",
            o.kind, o.mismatches, o.inputs
        ),
    )
}

pub fn cmd_campaign(
    cli: &Cli,
    cfg: &ProjectConfig,
    max_runs: Option<u64>,
    stop: Option<Arc<AtomicBool>>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let s = session(cfg)?;
    let plan = cfg.plan(&s.fault_space())?;
    std::fs::create_dir_all(&cli.out).map_err(io_err(&cli.out))?;
    let opts = RunOptions {
        jobs: cli.jobs,
        log: Some(cli.out.join("records.log")),
        resume: cli.resume,
        max_runs,
        stop,
    };
    let result = run_campaign(&s, &plan, &opts)?;
    write_file(&cli.out.join("stats.csv"), &result.stats.to_csv())?;
    write_file(&cli.out.join("stats.json"), &result.stats.to_json())?;
    let mut table = format!(
        "{} runs ({} resumed)\n{:<6}{:>8}{:>14}{:>8}{:>8}{:>12}{:>12}{:>12}\n",
        result.records.len(),
        result.resumed,
        "block",
        "K",
        "N",
        "sdc",
        "crash",
        "sdc_mean",
        "ci_half",
        "crash_rate"
    );
    for b in &result.stats.blocks {
        writeln!(
            table,
            "{:<6}{:>8}{:>14}{:>8}{:>8}{:>12}{:>12}{:>12}",
            b.block.name(),
            b.k,
            b.n,
            b.sdc_runs,
            b.crashes,
            sig4(b.sdc_mean),
            sig4(b.ci_halfwidth),
            sig4(b.crash_rate)
        )
        .expect("string write");
    }
    say(out, &table)
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub node: String,
    pub freq_hz: f64,
    pub p_per_cycle: f64,
    pub p_per_second: f64,
    pub alpha: f64,
    pub p_per_cycle_logic: f64,
    pub target: AsilTarget,
    pub without_logic: SdcEstimate,
    pub with_logic: SdcEstimate,
    pub meets_target: bool,
    pub meets_target_logic: bool,
}

pub fn estimate(cfg: &ProjectConfig, stats: &StatsReport) -> Result<EstimateReport, CliError> {
    let tech = cfg.tech()?;
    let freq = cfg.tech.freq_hz;
    let alpha = block_alpha(&tech, &cfg.logic)?;
    let p = fault_probability(tech.ff_fit_per_mb, freq)?;
    let p_logic = fault_probability(tech.ff_fit_per_mb + alpha, freq)?;
    let pop = |p: f64| SitePopulation {
        per_block: stats.blocks.iter().map(|b| (b.block, (b.n, p))).collect(),
    };
    for b in BlockId::ALL {
        if stats.block(b).is_none() {
            return Err(ReliabilityError::MissingBlock(b).into());
        }
    }
    let without_logic = sdc_npu_estimate(stats, &pop(p))?;
    let with_logic = sdc_npu_estimate(stats, &pop(p_logic))?;
    let target = cfg.target()?;
    Ok(EstimateReport {
        node: tech.name.clone(),
        freq_hz: freq,
        p_per_cycle: p,
        p_per_second: fault_probability_per_second(tech.ff_fit_per_mb)?,
        alpha,
        p_per_cycle_logic: p_logic,
        meets_target: meets_asil(without_logic.sdc_npu, &target),
        meets_target_logic: meets_asil(with_logic.sdc_npu, &target),
        target,
        without_logic,
        with_logic,
    })
}

pub fn cmd_estimate(
    cli: &Cli,
    cfg: &ProjectConfig,
    stats: &StatsReport,
    out: &mut dyn Write,
) -> Result<EstimateReport, CliError> {
    let r = estimate(cfg, stats)?;
    let mut csv = String::from(
        "block,n,k,sdc_mean,p,contribution,ci_low,ci_high,p_logic,contribution_logic,ci_low_logic,ci_high_logic\n",
    );
    let mut table = format!(
        "node {}  P/cycle {}  P/second {}  alpha {} FIT/MB\n{:<6}{:>14}{:>8}{:>12}{:>14}{:>14}\n",
        r.node,
        sig4(r.p_per_cycle),
        sig4(r.p_per_second),
        sig4(r.alpha),
        "block",
        "N",
        "K",
        "sdc_mean",
        "SDC",
        "SDC+logic"
    );
    for (a, b) in r.without_logic.blocks.iter().zip(&r.with_logic.blocks) {
        writeln!(
            csv,
            "{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            a.block, a.n, a.k, a.sdc_mean, a.p, a.contribution, a.ci_low, a.ci_high, b.p, b.contribution, b.ci_low, b.ci_high
        )
        .expect("string write");
        writeln!(
            table,
            "{:<6}{:>14}{:>8}{:>12}{:>14}{:>14}",
            a.block.name(),
            a.n,
            a.k,
            sig4(a.sdc_mean),
            sig4(a.contribution),
            sig4(b.contribution)
        )
        .expect("string write");
    }
    let (w, l) = (&r.without_logic, &r.with_logic);
    writeln!(
        csv,
        "NPU,,,,,{:e},{:e},{:e},,{:e},{:e},{:e}",
        w.sdc_npu, w.ci_low, w.ci_high, l.sdc_npu, l.ci_low, l.ci_high
    )
    .expect("string write");
    let verdict = |ok: bool| if ok { "met" } else { "NOT met" };
    writeln!(
        table,
        "SDC_NPU {} [{}, {}]  with logic {} [{}, {}]\n{} threshold {} per inference: {} ({} with logic faults)",
        sig4(w.sdc_npu),
        sig4(w.ci_low),
        sig4(w.ci_high),
        sig4(l.sdc_npu),
        sig4(l.ci_low),
        sig4(l.ci_high),
        r.target.level,
        sig4(r.target.threshold_per_inference),
        verdict(r.meets_target),
        verdict(r.meets_target_logic)
    )
    .expect("string write");
    write_file(&cli.out.join("estimate.csv"), &csv)?;
    write_file(
        &cli.out.join("estimate.json"),
        &(serde_json::to_string_pretty(&r).expect("estimate serialize") + "\n"),
    )?;
    say(out, &table)?;
    Ok(r)
}

/// Protection problem for the configured node, areas and schemes.
pub fn protection_problem(cfg: &ProjectConfig, stats: &StatsReport, logic_faults: bool) -> Result<ProtectionProblem, CliError> {
    let tech = cfg.tech()?;
    let alpha = block_alpha(&tech, &cfg.logic)?;
    let rate = BlockRates {
        fit_per_mb: tech.ff_fit_per_mb,
        alpha,
        freq_hz: cfg.tech.freq_hz,
    };
    let areas = cfg.areas()?;
    Ok(ProtectionProblem::from_stats(
        stats,
        &vec![rate; areas.len()],
        &areas,
        &cfg.schemes()?,
        cfg.delta_pct()?,
        logic_faults,
        Some(cfg.target()?),
    )?)
}

fn optimize_row(mode: &str, c: &EvaluatedConfig) -> String {
    let codes: Vec<String> = c.codes().iter().map(|x| x.to_string()).collect();
    format!(
        "{mode},{},{:e},{:e},{:e},{}\n",
        codes.join(","),
        c.total_area,
        c.area_overhead_pct,
        c.sdc_npu,
        c.meets_target
    )
}

pub fn cmd_optimize(
    cli: &Cli,
    cfg: &ProjectConfig,
    stats: &StatsReport,
    out: &mut dyn Write,
) -> Result<EvaluatedConfig, CliError> {
    let problem = protection_problem(cfg, stats, cli.logic_faults)?;
    let frontier = pareto_frontier(&evaluate_all(&problem)?)?;
    write_file(&cli.out.join("frontier.csv"), &frontier_csv(&frontier, &problem.blocks))?;

    let (mode, result) = match cli.budget {
        Some(pct) if !(pct >= 0.0) => return Err(CliError::Usage("--budget must be a non-negative percentage".into())),
        Some(pct) => ("budget", optimize(&problem, problem.baseline_area * (1.0 + pct / 100.0))),
        None => ("target", min_area(&problem)),
    };
    let mut header = String::from("mode,");
    for b in &problem.blocks {
        write!(header, "{b},").expect("string write");
    }
    header.push_str("total_area,area_overhead_pct,sdc_npu,meets_target\n");
    let best = match result {
        Ok(best) => best,
        Err(e) => {
            write_file(&cli.out.join("optimize.csv"), &header)?;
            say(out, &format!("infeasible ({mode} mode); Pareto frontier has {} points\n", frontier.len()))?;
            return Err(e.into());
        }
    };
    write_file(&cli.out.join("optimize.csv"), &(header + &optimize_row(mode, &best)))?;
    let names: Vec<&str> = problem.blocks.iter().map(|b| b.name()).collect();
    say(
        out,
        &format!(
            "blocks [{}]\nassignment {}  (0 none, 1 FF hardening, 2 DMR, 3 FF hardening + logic-fault elimination)\narea overhead {}%  SDC_NPU {}  target {}: {}\nfrontier: {} points\n",
            names.join(", "),
            best.codes_string(),
            sig4(best.area_overhead_pct),
            sig4(best.sdc_npu),
            sig4(problem.target.as_ref().map_or(0.0, |t| t.threshold_per_inference)),
            if best.meets_target { "met" } else { "NOT met" },
            frontier.len()
        ),
    )?;
    Ok(best)
}
