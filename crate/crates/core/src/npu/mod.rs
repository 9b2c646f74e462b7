// SPDX-License-Identifier: Apache-2.0

//! Cycle-level model of a functional-block NPU running quantized inference.
//!
//! The NPU is split into six fault-injectable functional blocks. Each block
//! owns a small set of architecturally visible registers; the shared buffer
//! is ECC-protected storage and is never part of the fault space.
//!
//! | block | registers |
//! |-------|-----------|
//! | `AO`  | `act_in:32`, `bias:32`, `act_out:8` |
//! | `DMA` | `src_addr:32`, `dst_addr:32`, `burst_cnt:16`, `data_latch:32` |
//! | `MAC` | per cell: `acc[i]:32`, `a_latch[i]:8`, `w_latch[i]:8` |
//! | `REG` | `cfg[0]..cfg[7]:32` (`cfg[6]`, `cfg[7]` are reserved) |
//! | `TSU` | `row_cnt:16`, `col_cnt:16`, `chan_cnt:16`, `fsm_state:8` |
//! | `WD`  | `wbuf_ptr:16`, `decode_shift:32`, `weight_latch:8` |
//!
//! Widths can be overridden per register through [`NpuConfig::register_widths`]
//! using `"BLOCK.name"` keys (`"MAC.acc"` applies to every cell).

mod outcome;
mod program;
mod sim;
mod workload;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use outcome::{CrashReason, FaultSite, GoldenResult, InjectionOutcome, OutcomeKind};
pub use program::Program;
pub use sim::{CycleTrace, Phase, Session};
pub use workload::{Layer, LayerKind, Shape, Workload, WorkloadFile};

/// Largest buffer addressable through the 16-bit base-address fields.
pub const MAX_BUFFER_BYTES: u32 = 1 << 16;
/// Smallest buffer accepted by [`build_npu`].
pub const MIN_BUFFER_BYTES: u32 = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NpuError {
    #[error("invalid NPU configuration `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("workload shape error: {0}")]
    Shape(String),
    #[error("fault site out of range: {0}")]
    SiteOutOfRange(String),
    #[error("workload file error: {0}")]
    WorkloadFile(String),
}

impl NpuError {
    fn config(field: &str, reason: impl Into<String>) -> Self {
        NpuError::Config {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

/// Functional blocks, in the canonical `[AO, DMA, MAC, REG, TSU, WD]` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BlockId {
    #[serde(rename = "AO")]
    Ao,
    #[serde(rename = "DMA")]
    Dma,
    #[serde(rename = "MAC")]
    Mac,
    #[serde(rename = "REG")]
    Reg,
    #[serde(rename = "TSU")]
    Tsu,
    #[serde(rename = "WD")]
    Wd,
}

impl BlockId {
    pub const ALL: [BlockId; 6] = [
        BlockId::Ao,
        BlockId::Dma,
        BlockId::Mac,
        BlockId::Reg,
        BlockId::Tsu,
        BlockId::Wd,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            BlockId::Ao => "AO",
            BlockId::Dma => "DMA",
            BlockId::Mac => "MAC",
            BlockId::Reg => "REG",
            BlockId::Tsu => "TSU",
            BlockId::Wd => "WD",
        }
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BlockId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BlockId::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown functional block `{s}`"))
    }
}

fn default_watchdog() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NpuConfig {
    pub mac_rows: u32,
    pub mac_cols: u32,
    pub buffer_bytes: u32,
    /// A run is declared hung once it exceeds this multiple of the golden cycle count.
    #[serde(default = "default_watchdog")]
    pub watchdog_factor: f64,
    #[serde(default)]
    pub register_widths: BTreeMap<String, u8>,
}

impl NpuConfig {
    pub fn new(mac_rows: u32, mac_cols: u32, buffer_bytes: u32) -> Self {
        NpuConfig {
            mac_rows,
            mac_cols,
            buffer_bytes,
            watchdog_factor: default_watchdog(),
            register_widths: BTreeMap::new(),
        }
    }

    pub fn cells(&self) -> usize {
        self.mac_rows as usize * self.mac_cols as usize
    }
}

/// One flip-flop register of a functional block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterDesc {
    pub block: BlockId,
    pub name: String,
    pub width: u8,
    /// Bit offset of this register within its block's flop vector.
    pub block_offset: u64,
}

/// Indices of the named registers inside [`NpuModel::registers`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct RegMap {
    pub ao_in: usize,
    pub ao_bias: usize,
    pub ao_out: usize,
    pub dma_src: usize,
    pub dma_dst: usize,
    pub dma_burst: usize,
    pub dma_latch: usize,
    pub mac_acc: usize,
    pub mac_a: usize,
    pub mac_w: usize,
    pub cfg: usize,
    pub tsu_row: usize,
    pub tsu_col: usize,
    pub tsu_chan: usize,
    pub tsu_fsm: usize,
    pub wd_ptr: usize,
    pub wd_shift: usize,
    pub wd_latch: usize,
}

pub const REG_CFG_COUNT: usize = 8;

/// A built NPU: configuration plus its fixed register inventory.
#[derive(Debug, Clone, PartialEq)]
pub struct NpuModel {
    config: NpuConfig,
    registers: Vec<RegisterDesc>,
    block_ranges: [(usize, usize); 6],
    block_bits: [u64; 6],
    pub(crate) map: RegMap,
}

/// Builds the NPU model for `config`.
pub fn build_npu(config: NpuConfig) -> Result<NpuModel, NpuError> {
    NpuModel::new(config)
}

impl NpuModel {
    pub fn new(config: NpuConfig) -> Result<Self, NpuError> {
        if config.mac_rows == 0 {
            return Err(NpuError::config("mac_rows", "must be at least 1"));
        }
        if config.mac_cols == 0 {
            return Err(NpuError::config("mac_cols", "must be at least 1"));
        }
        if config.cells() > 4096 {
            return Err(NpuError::config("mac_rows", "MAC array larger than 4096 cells"));
        }
        if config.buffer_bytes < MIN_BUFFER_BYTES {
            return Err(NpuError::config(
                "buffer_bytes",
                format!("{} bytes is below the {MIN_BUFFER_BYTES}-byte minimum", config.buffer_bytes),
            ));
        }
        if config.buffer_bytes > MAX_BUFFER_BYTES {
            return Err(NpuError::config(
                "buffer_bytes",
                format!("{} bytes exceeds the 16-bit address space", config.buffer_bytes),
            ));
        }
        if !(config.watchdog_factor.is_finite() && config.watchdog_factor > 1.0) {
            return Err(NpuError::config("watchdog_factor", "must be a finite value > 1"));
        }

        let cells = config.cells();
        let width_of = |key: &str, default: u8| -> Result<u8, NpuError> {
            match config.register_widths.get(key) {
                Some(&w) if (1..=32).contains(&w) => Ok(w),
                Some(&w) => Err(NpuError::config(
                    &format!("register_widths.{key}"),
                    format!("width {w} outside 1..=32"),
                )),
                None => Ok(default),
            }
        };

        let mut inventory: Vec<(BlockId, String, u8)> = Vec::new();
        for (name, w) in [("act_in", 32), ("bias", 32), ("act_out", 8)] {
            inventory.push((BlockId::Ao, name.into(), width_of(&format!("AO.{name}"), w)?));
        }
        for (name, w) in [("src_addr", 32), ("dst_addr", 32), ("burst_cnt", 16), ("data_latch", 32)] {
            inventory.push((BlockId::Dma, name.into(), width_of(&format!("DMA.{name}"), w)?));
        }
        for (name, w) in [("acc", 32), ("a_latch", 8), ("w_latch", 8)] {
            let w = width_of(&format!("MAC.{name}"), w)?;
            for cell in 0..cells {
                inventory.push((BlockId::Mac, format!("{name}[{cell}]"), w));
            }
        }
        let cfg_w = width_of("REG.cfg", 32)?;
        for i in 0..REG_CFG_COUNT {
            inventory.push((BlockId::Reg, format!("cfg[{i}]"), cfg_w));
        }
        for (name, w) in [("row_cnt", 16), ("col_cnt", 16), ("chan_cnt", 16), ("fsm_state", 8)] {
            inventory.push((BlockId::Tsu, name.into(), width_of(&format!("TSU.{name}"), w)?));
        }
        for (name, w) in [("wbuf_ptr", 16), ("decode_shift", 32), ("weight_latch", 8)] {
            inventory.push((BlockId::Wd, name.into(), width_of(&format!("WD.{name}"), w)?));
        }
        if let Some(key) = config.register_widths.keys().find(|k| {
            let known = inventory.iter().any(|(b, n, _)| {
                let base = n.split('[').next().unwrap_or(n);
                *k == &format!("{b}.{base}")
            });
            !known
        }) {
            return Err(NpuError::config(
                &format!("register_widths.{key}"),
                "no such register",
            ));
        }

        if inventory
            .iter()
            .any(|(b, n, w)| *b == BlockId::Tsu && n == "fsm_state" && *w < 5)
        {
            return Err(NpuError::config(
                "register_widths.TSU.fsm_state",
                "controller state encoding needs at least 5 bits",
            ));
        }

        let mut registers = Vec::with_capacity(inventory.len());
        let mut block_ranges = [(0usize, 0usize); 6];
        let mut block_bits = [0u64; 6];
        for (block, name, width) in inventory {
            let b = block.index();
            if block_bits[b] == 0 {
                block_ranges[b].0 = registers.len();
            }
            registers.push(RegisterDesc {
                block,
                name,
                width,
                block_offset: block_bits[b],
            });
            block_bits[b] += u64::from(width);
            block_ranges[b].1 = registers.len();
        }

        let find = |name: &str| registers.iter().position(|r| r.name == name).expect("inventory");
        let map = RegMap {
            ao_in: find("act_in"),
            ao_bias: find("bias"),
            ao_out: find("act_out"),
            dma_src: find("src_addr"),
            dma_dst: find("dst_addr"),
            dma_burst: find("burst_cnt"),
            dma_latch: find("data_latch"),
            mac_acc: find("acc[0]"),
            mac_a: find("a_latch[0]"),
            mac_w: find("w_latch[0]"),
            cfg: find("cfg[0]"),
            tsu_row: find("row_cnt"),
            tsu_col: find("col_cnt"),
            tsu_chan: find("chan_cnt"),
            tsu_fsm: find("fsm_state"),
            wd_ptr: find("wbuf_ptr"),
            wd_shift: find("decode_shift"),
            wd_latch: find("weight_latch"),
        };

        Ok(NpuModel {
            config,
            registers,
            block_ranges,
            block_bits,
            map,
        })
    }

    pub fn config(&self) -> &NpuConfig {
        &self.config
    }

    pub fn registers(&self) -> &[RegisterDesc] {
        &self.registers
    }

    /// Registers of one block, in inventory order.
    pub fn block_registers(&self, block: BlockId) -> &[RegisterDesc] {
        let (lo, hi) = self.block_ranges[block.index()];
        &self.registers[lo..hi]
    }

    /// Flop bits in `block`; a pure function of the configuration.
    pub fn block_bits(&self, block: BlockId) -> u64 {
        self.block_bits[block.index()]
    }

    pub fn total_bits(&self) -> u64 {
        self.block_bits.iter().sum()
    }

    pub fn register_index(&self, block: BlockId, name: &str) -> Option<usize> {
        let (lo, hi) = self.block_ranges[block.index()];
        (lo..hi).find(|&i| self.registers[i].name == name)
    }

    /// Per-block fault-site populations: flop bits times golden cycles.
    pub fn enumerate_fault_sites(&self, golden: &GoldenResult) -> FaultSpace {
        let mut per_block = [0u64; 6];
        for b in BlockId::ALL {
            per_block[b.index()] = self.block_bits(b) * golden.cycle_count;
        }
        FaultSpace {
            per_block,
            block_bits: self.block_bits,
            cycles: golden.cycle_count,
        }
    }

    /// Maps a block-local fault-site index to its `(cycle, register, bit)` triple.
    ///
    /// Index layout is cycle-major: `index = cycle * block_bits + bit_offset`.
    pub fn site_at(&self, block: BlockId, index: u64) -> Result<FaultSite, NpuError> {
        let bits = self.block_bits(block);
        let cycle = index / bits;
        let mut offset = index % bits;
        for (i, reg) in self.block_registers(block).iter().enumerate() {
            let w = u64::from(reg.width);
            if offset < w {
                return Ok(FaultSite {
                    block,
                    register: self.block_ranges[block.index()].0 + i,
                    bit: offset as u8,
                    cycle,
                });
            }
            offset -= w;
        }
        unreachable!("offset below block bit count")
    }

    /// Inverse of [`NpuModel::site_at`].
    pub fn site_index(&self, site: &FaultSite) -> u64 {
        let reg = &self.registers[site.register];
        site.cycle * self.block_bits(site.block) + reg.block_offset + u64::from(site.bit)
    }

    pub fn register_name(&self, index: usize) -> &str {
        &self.registers[index].name
    }

    /// Builds a fault site from names, validating it against `golden`.
    pub fn site(
        &self,
        block: BlockId,
        register: &str,
        bit: u8,
        cycle: u64,
        golden: &GoldenResult,
    ) -> Result<FaultSite, NpuError> {
        let register = self.register_index(block, register).ok_or_else(|| {
            NpuError::SiteOutOfRange(format!("block {block} has no register `{register}`"))
        })?;
        let site = FaultSite {
            block,
            register,
            bit,
            cycle,
        };
        self.check_site(&site, golden)?;
        Ok(site)
    }

    pub fn check_site(&self, site: &FaultSite, golden: &GoldenResult) -> Result<(), NpuError> {
        let reg = self.registers.get(site.register).ok_or_else(|| {
            NpuError::SiteOutOfRange(format!("register index {} out of range", site.register))
        })?;
        if reg.block != site.block {
            return Err(NpuError::SiteOutOfRange(format!(
                "register `{}` belongs to {}, not {}",
                reg.name, reg.block, site.block
            )));
        }
        if site.bit >= reg.width {
            return Err(NpuError::SiteOutOfRange(format!(
                "bit {} outside {}-bit register `{}`",
                site.bit, reg.width, reg.name
            )));
        }
        if site.cycle >= golden.cycle_count {
            return Err(NpuError::SiteOutOfRange(format!(
                "cycle {} beyond golden run length {}",
                site.cycle, golden.cycle_count
            )));
        }
        Ok(())
    }

    /// Runs `workload` without faults.
    pub fn run_golden(&self, workload: &Workload) -> Result<GoldenResult, NpuError> {
        Ok(Session::new(self, workload)?.golden().clone())
    }

    /// Runs `workload` with a single bit-flip at `site` and classifies the outcome.
    pub fn run_injected(
        &self,
        workload: &Workload,
        site: &FaultSite,
        golden: &GoldenResult,
    ) -> Result<InjectionOutcome, NpuError> {
        self.check_site(site, golden)?;
        let session = Session::new(self, workload)?;
        if session.golden() != golden {
            return Err(NpuError::Shape(
                "golden result does not belong to this model/workload pair".into(),
            ));
        }
        session.inject(site)
    }
}

/// Fault-site populations `N_K` of every block for one golden run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSpace {
    per_block: [u64; 6],
    block_bits: [u64; 6],
    cycles: u64,
}

impl FaultSpace {
    pub fn population(&self, block: BlockId) -> u64 {
        self.per_block[block.index()]
    }

    pub fn bits(&self, block: BlockId) -> u64 {
        self.block_bits[block.index()]
    }

    pub fn cycles(&self) -> u64 {
        self.cycles
    }

    pub fn total(&self) -> u64 {
        self.per_block.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (BlockId, u64)> + '_ {
        BlockId::ALL.into_iter().map(|b| (b, self.population(b)))
    }
}
