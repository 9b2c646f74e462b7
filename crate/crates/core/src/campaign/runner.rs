// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use rayon::prelude::*;

use super::log::{read_log, CampaignRecord, LogWriter};
use super::sampling::{draw_samples, SamplingPlan};
use super::stats::{compute_stats, StatsReport};
use super::CampaignError;
use crate::npu::{FaultSite, Session};

/// Runs per parallel chunk; the log is flushed after each chunk.
const CHUNK: usize = 256;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub jobs: usize,
    /// Record log; `None` keeps records in memory only.
    pub log: Option<PathBuf>,
    /// Continue from the records already in `log`.
    pub resume: bool,
    /// Stop after this many new runs, as if interrupted.
    pub max_runs: Option<u64>,
    /// Checked between chunks.
    pub stop: Option<Arc<AtomicBool>>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            jobs: 1,
            log: None,
            resume: false,
            max_runs: None,
            stop: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub records: Vec<CampaignRecord>,
    pub stats: StatsReport,
    /// Runs taken from an existing log.
    pub resumed: u64,
}

fn run_chunk(session: &Session, sites: &[FaultSite], first_id: u64) -> Result<Vec<CampaignRecord>, CampaignError> {
    sites
        .par_iter()
        .enumerate()
        .map(|(i, site)| {
            Ok(CampaignRecord {
                run_id: first_id + i as u64,
                site: *site,
                outcome: session.inject(site)?,
            })
        })
        .collect()
}

/// Draws the plan's sites, executes them and reduces the records to per-block stats.
///
/// Returns [`CampaignError::Interrupted`] when stopped early; the log then
/// holds a valid prefix that `resume` completes.
pub fn run_campaign(
    session: &Session,
    plan: &SamplingPlan,
    opts: &RunOptions,
) -> Result<CampaignResult, CampaignError> {
    let space = session.fault_space();
    let sites = draw_samples(plan, session.model(), &space)?;
    if opts.jobs == 0 {
        return Err(CampaignError::Plan("jobs must be at least 1".into()));
    }

    let mut records = match (&opts.log, opts.resume) {
        (Some(path), true) => read_log(path, session.model(), &sites)?,
        _ => Vec::new(),
    };
    let resumed = records.len() as u64;
    let mut writer = match &opts.log {
        Some(path) => Some(LogWriter::open(path, !opts.resume)?),
        None => None,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| CampaignError::Plan(format!("thread pool: {e}")))?;

    let limit = opts
        .max_runs
        .map_or(sites.len(), |m| (records.len() as u64).saturating_add(m).min(sites.len() as u64) as usize);
    while records.len() < limit {
        if opts.stop.as_ref().is_some_and(|s| s.load(Ordering::SeqCst)) {
            break;
        }
        let start = records.len();
        let end = (start + CHUNK * opts.jobs).min(limit);
        let chunk = pool.install(|| run_chunk(session, &sites[start..end], start as u64))?;
        if let Some(w) = writer.as_mut() {
            w.append(session.model(), &chunk)?;
        }
        records.extend(chunk);
    }
    if records.len() < sites.len() {
        return Err(CampaignError::Interrupted {
            completed: records.len() as u64,
            planned: sites.len() as u64,
        });
    }

    let stats = compute_stats(&records, &space, plan.seed, plan.confidence)?;
    Ok(CampaignResult {
        records,
        stats,
        resumed,
    })
}
