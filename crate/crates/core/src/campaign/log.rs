// SPDX-License-Identifier: Apache-2.0

//! Line-delimited record log.
//!
//! One record per line, comma separated, no header:
//!
//! ```text
//! run_id,block,register,bit,cycle,kind,sdc_fraction,crash_reason
//! 17,TSU,fsm_state,3,412,crash,0/16,illegal_state
//! 18,WD,weight_latch,7,90,sdc,2/16,-
//! ```
//!
//! `sdc_fraction` is written as `mismatches/inputs` so stats rebuilt from a
//! log are bit-identical to those of the live run.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::CampaignError;
use crate::npu::{BlockId, CrashReason, FaultSite, InjectionOutcome, NpuModel, OutcomeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CampaignRecord {
    pub run_id: u64,
    pub site: FaultSite,
    pub outcome: InjectionOutcome,
}

pub fn format_record(model: &NpuModel, rec: &CampaignRecord) -> String {
    let o = &rec.outcome;
    format!(
        "{},{},{},{},{},{},{}/{},{}",
        rec.run_id,
        rec.site.block,
        model.register_name(rec.site.register),
        rec.site.bit,
        rec.site.cycle,
        o.kind,
        o.mismatches,
        o.inputs,
        o.crash_reason.map_or("-", |r| r.as_str()),
    )
}

pub fn parse_record(model: &NpuModel, line: &str) -> Result<CampaignRecord, String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 8 {
        return Err(format!("expected 8 fields, found {}", fields.len()));
    }
    let num = |i: usize, what: &str| -> Result<u64, String> {
        fields[i].parse::<u64>().map_err(|_| format!("bad {what} `{}`", fields[i]))
    };
    let run_id = num(0, "run_id")?;
    let block: BlockId = fields[1].parse()?;
    let register = model
        .register_index(block, fields[2])
        .ok_or_else(|| format!("unknown register `{}` in block {block}", fields[2]))?;
    let bit = u8::try_from(num(3, "bit")?).map_err(|_| "bit out of range".to_string())?;
    let cycle = num(4, "cycle")?;
    let kind: OutcomeKind = fields[5].parse()?;
    let (m, n) = fields[6]
        .split_once('/')
        .ok_or_else(|| format!("bad sdc_fraction `{}`", fields[6]))?;
    let mismatches: u32 = m.parse().map_err(|_| format!("bad sdc_fraction `{}`", fields[6]))?;
    let inputs: u32 = n.parse().map_err(|_| format!("bad sdc_fraction `{}`", fields[6]))?;
    let crash_reason = match fields[7] {
        "-" => None,
        s => Some(s.parse::<CrashReason>()?),
    };
    let outcome = InjectionOutcome {
        kind,
        mismatches,
        inputs,
        crash_reason,
    };
    let consistent = inputs > 0
        && mismatches <= inputs
        && match kind {
            OutcomeKind::Masked => mismatches == 0 && crash_reason.is_none(),
            OutcomeKind::Sdc => mismatches > 0 && crash_reason.is_none(),
            OutcomeKind::Crash => mismatches == 0 && crash_reason.is_some(),
        };
    if !consistent {
        return Err(format!("inconsistent outcome `{}`", fields[5..].join(",")));
    }
    Ok(CampaignRecord {
        run_id,
        site: FaultSite {
            block,
            register,
            bit,
            cycle,
        },
        outcome,
    })
}

/// Reads a log prefix and checks it against the planned sites.
///
/// A missing file is an empty prefix.
pub fn read_log(
    path: &Path,
    model: &NpuModel,
    planned: &[FaultSite],
) -> Result<Vec<CampaignRecord>, CampaignError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(CampaignError::io(path, e)),
    };
    let mut reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut line = String::new();
    loop {
        line.clear();
        let read = reader.read_line(&mut line).map_err(|e| CampaignError::io(path, e))?;
        if read == 0 {
            break;
        }
        let last_valid = records.last().map(|r: &CampaignRecord| r.run_id);
        let corrupt = |reason: String| CampaignError::CorruptLog {
            line: records.len() as u64 + 1,
            last_valid,
            reason,
        };
        let Some(body) = line.strip_suffix('\n') else {
            return Err(corrupt("truncated record".into()));
        };
        let rec = parse_record(model, body).map_err(corrupt)?;
        let expected = records.len() as u64;
        if rec.run_id != expected {
            return Err(corrupt(format!("run_id {} where {expected} was expected", rec.run_id)));
        }
        match planned.get(expected as usize) {
            Some(site) if *site == rec.site => {}
            Some(_) => return Err(corrupt("site does not match the sampling plan".into())),
            None => return Err(corrupt("more records than planned runs".into())),
        }
        records.push(rec);
    }
    Ok(records)
}

/// Append-only writer; every batch is flushed before returning.
pub struct LogWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl LogWriter {
    /// Opens for appending, or truncates when `fresh`.
    pub fn open(path: &Path, fresh: bool) -> Result<Self, CampaignError> {
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .append(!fresh)
            .truncate(fresh)
            .open(path)
            .map_err(|e| CampaignError::io(path, e))?;
        Ok(LogWriter {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        })
    }

    pub fn append(&mut self, model: &NpuModel, records: &[CampaignRecord]) -> Result<(), CampaignError> {
        for rec in records {
            writeln!(self.out, "{}", format_record(model, rec))
                .map_err(|e| CampaignError::io(&self.path, e))?;
        }
        self.out.flush().map_err(|e| CampaignError::io(&self.path, e))
    }
}
