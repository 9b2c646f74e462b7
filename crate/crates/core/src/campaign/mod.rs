// SPDX-License-Identifier: Apache-2.0

//! Statistical fault-injection campaigns.
//!
//! A [`SamplingPlan`] fixes how many sites `K` are drawn from each block's
//! population `N`. Sites are drawn uniformly without replacement from a
//! per-block ChaCha stream, executed in parallel, appended to a record log in
//! `run_id` order and reduced to [`BlockStats`].

mod log;
mod runner;
mod sampling;
mod stats;

use std::path::Path;

use thiserror::Error;

use crate::npu::NpuError;

pub use log::{format_record, parse_record, read_log, CampaignRecord, LogWriter};
pub use runner::{run_campaign, CampaignResult, RunOptions};
pub use sampling::{
    draw_indices, draw_samples, sample_size, z_score, Population, SamplingPlan, DEFAULT_CONFIDENCE,
    DEFAULT_MARGIN,
};
pub use stats::{compute_stats, wilson_interval, BlockStats, StatsReport};

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("{0}")]
    Domain(String),
    #[error("invalid sampling plan: {0}")]
    Plan(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupted record log at line {line} (last valid run_id: {}): {reason}", last_valid.map_or("none".to_string(), |r| r.to_string()))]
    CorruptLog {
        line: u64,
        last_valid: Option<u64>,
        reason: String,
    },
    #[error("campaign interrupted after {completed} of {planned} runs")]
    Interrupted { completed: u64, planned: u64 },
    #[error("bad stats: {0}")]
    Stats(String),
    #[error(transparent)]
    Npu(#[from] NpuError),
}

impl CampaignError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CampaignError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
