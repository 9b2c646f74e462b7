// SPDX-License-Identifier: Apache-2.0

//! The cycle engine.
//!
//! Every call to `Machine::step` is one clock cycle: it reads the current
//! register values and writes their next values. A fault is applied after
//! the cycle's update by XOR-ing one register bit.
//!
//! Dataflow is output-stationary with weight broadcast: a tile is one output
//! channel (`chan_cnt`) times `mac_rows * mac_cols` consecutive output pixels
//! starting at `col_cnt`. `row_cnt` sequences the reduction in the compute
//! phase and the cell index in the drain phase. The weight decoder runs one
//! reduction step ahead of the MAC cells.

use sha2::{Digest, Sha256};

use super::outcome::{CrashReason, FaultSite, GoldenResult, InjectionOutcome};
use super::program::{Program, OP_CONV3X3, OP_DENSE};
use super::{FaultSpace, NpuError, NpuModel, Workload};

/// TSU controller states. Codes have even parity so any single-bit upset of
/// `fsm_state` lands on an illegal encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Config,
    InputSetup,
    InputXfer,
    WeightSetup,
    WeightXfer,
    Tile,
    Compute,
    Drain,
    Next,
    Done,
}

impl Phase {
    pub const fn code(self) -> u32 {
        match self {
            Phase::Config => 0x03,
            Phase::InputSetup => 0x05,
            Phase::InputXfer => 0x06,
            Phase::WeightSetup => 0x09,
            Phase::WeightXfer => 0x0A,
            Phase::Tile => 0x0C,
            Phase::Compute => 0x11,
            Phase::Drain => 0x12,
            Phase::Next => 0x14,
            Phase::Done => 0x18,
        }
    }

    pub fn from_code(code: u32) -> Option<Phase> {
        Some(match code {
            0x03 => Phase::Config,
            0x05 => Phase::InputSetup,
            0x06 => Phase::InputXfer,
            0x09 => Phase::WeightSetup,
            0x0A => Phase::WeightXfer,
            0x0C => Phase::Tile,
            0x11 => Phase::Compute,
            0x12 => Phase::Drain,
            0x14 => Phase::Next,
            0x18 => Phase::Done,
            _ => return None,
        })
    }
}

/// What happened in one golden cycle; counters are the values read by that cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleTrace {
    pub cycle: u64,
    pub phase: Phase,
    pub image: usize,
    /// Index of the compute op (relu layers are fused, so this is not the layer index).
    pub op: usize,
    pub chan: u32,
    pub col: u32,
    pub row: u32,
}

type Step<T> = Result<T, CrashReason>;

/// Decoded `REG` contents.
#[derive(Debug, Clone, Copy)]
struct LayerCfg {
    kernel: usize,
    relu: bool,
    shift: u32,
    h: usize,
    w: usize,
    cin: usize,
    cout: usize,
    ifm: usize,
    ofm: usize,
    weight_base: usize,
    weight_src: u32,
}

impl LayerCfg {
    fn k(&self) -> usize {
        self.cin * self.kernel * self.kernel
    }

    fn pixels(&self) -> usize {
        self.h * self.w
    }

    fn bias_offset(&self) -> usize {
        (self.cout * self.k() + 3) & !3
    }

    fn blob_words(&self) -> usize {
        (self.bias_offset() + 4 * self.cout) / 4
    }

    fn input_words(&self) -> usize {
        (self.cin * self.h * self.w).div_ceil(4)
    }
}

enum RunEnd {
    Completed { labels: Vec<u16> },
    Crashed(CrashReason),
}

struct Machine<'a> {
    model: &'a NpuModel,
    prog: &'a Program,
    masks: &'a [u32],
    regs: Vec<u32>,
    buf: Vec<u8>,
    op: usize,
    image: usize,
    labels: Vec<u16>,
}

impl<'a> Machine<'a> {
    fn new(model: &'a NpuModel, prog: &'a Program, masks: &'a [u32]) -> Self {
        let mut m = Machine {
            model,
            prog,
            masks,
            regs: vec![0; masks.len()],
            buf: vec![0; model.config().buffer_bytes as usize],
            op: 0,
            image: 0,
            labels: Vec::with_capacity(prog.input_addrs.len()),
        };
        m.set(model.map.tsu_fsm, Phase::Config.code());
        m
    }

    #[inline]
    fn get(&self, r: usize) -> u32 {
        self.regs[r]
    }

    /// Register value sign-extended from its width.
    #[inline]
    fn get_signed(&self, r: usize) -> i32 {
        let width = self.masks[r].count_ones();
        let v = self.regs[r];
        if width >= 32 {
            v as i32
        } else {
            let sh = 32 - width;
            ((v << sh) as i32) >> sh
        }
    }

    #[inline]
    fn set(&mut self, r: usize, v: u32) {
        self.regs[r] = v & self.masks[r];
    }

    fn cells(&self) -> usize {
        self.model.config().cells()
    }

    fn layer_cfg(&self) -> Step<LayerCfg> {
        let c = self.model.map.cfg;
        let r0 = self.get(c);
        let kernel = match r0 & 0xF {
            OP_DENSE => 1,
            OP_CONV3X3 => 3,
            _ => return Err(CrashReason::IllegalState),
        };
        let (r1, r2, r3) = (self.get(c + 1), self.get(c + 2), self.get(c + 3));
        let cfg = LayerCfg {
            kernel,
            relu: r0 & 0x10 != 0,
            shift: (r0 >> 8) & 0x1F,
            h: (r1 & 0xFFFF) as usize,
            w: (r1 >> 16) as usize,
            cin: (r2 & 0xFFFF) as usize,
            cout: (r2 >> 16) as usize,
            ifm: (r3 & 0xFFFF) as usize,
            ofm: (r3 >> 16) as usize,
            weight_base: self.get(c + 4) as usize,
            weight_src: self.get(c + 5),
        };
        if cfg.h == 0 || cfg.w == 0 || cfg.cin == 0 || cfg.cout == 0 {
            return Err(CrashReason::IllegalState);
        }
        Ok(cfg)
    }

    fn buf_range(&self, addr: usize, len: usize) -> Step<std::ops::Range<usize>> {
        match addr.checked_add(len) {
            Some(end) if end <= self.buf.len() => Ok(addr..end),
            _ => Err(CrashReason::InvalidAccess),
        }
    }

    fn read32(&self, addr: usize) -> Step<u32> {
        let r = self.buf_range(addr, 4)?;
        Ok(u32::from_le_bytes(self.buf[r].try_into().expect("4 bytes")))
    }

    fn write32(&mut self, addr: usize, v: u32) -> Step<()> {
        let r = self.buf_range(addr, 4)?;
        self.buf[r].copy_from_slice(&v.to_le_bytes());
        Ok(())
    }

    fn read8(&self, addr: usize) -> Step<i8> {
        self.buf.get(addr).map(|&b| b as i8).ok_or(CrashReason::InvalidAccess)
    }

    fn write8(&mut self, addr: usize, v: u8) -> Step<()> {
        let slot = self.buf.get_mut(addr).ok_or(CrashReason::InvalidAccess)?;
        *slot = v;
        Ok(())
    }

    /// DMA fetch stage: `data_latch <- ext[src]`, `src += 4`.
    fn dma_fetch(&mut self) -> Step<()> {
        let m = &self.model.map;
        let src = self.get(m.dma_src) as usize;
        let word = self
            .prog
            .ext
            .get(src..src.wrapping_add(4))
            .filter(|_| src.checked_add(4).is_some())
            .ok_or(CrashReason::InvalidAccess)?;
        let word = u32::from_le_bytes(word.try_into().expect("4 bytes"));
        self.set(m.dma_latch, word);
        self.set(m.dma_src, (src as u32).wrapping_add(4));
        Ok(())
    }

    /// Weight decoder: emit the byte at `wbuf_ptr`, reloading the word on
    /// alignment (or when forced at tile start).
    fn wd_fetch(&mut self, force: bool) -> Step<()> {
        let m = &self.model.map;
        let ptr = self.get(m.wd_ptr) as usize;
        if force || ptr & 3 == 0 {
            let word = self.read32(ptr & !3)?;
            self.set(m.wd_shift, word);
        }
        let byte = (self.get(m.wd_shift) >> (8 * (ptr & 3))) & 0xFF;
        self.set(m.wd_latch, byte);
        self.set(m.wd_ptr, ptr as u32 + 1);
        Ok(())
    }

    /// Activation operand for output pixel `pixel` at reduction step `step`.
    fn activation(&self, l: &LayerCfg, pixel: usize, step: usize) -> Step<i8> {
        if pixel >= l.pixels() {
            return Ok(0);
        }
        let taps = l.kernel * l.kernel;
        let ci = step / taps;
        let tap = step % taps;
        let pad = l.kernel / 2;
        let y = (pixel / l.w + tap / l.kernel) as isize - pad as isize;
        let x = (pixel % l.w + tap % l.kernel) as isize - pad as isize;
        if y < 0 || x < 0 || y as usize >= l.h || x as usize >= l.w {
            return Ok(0);
        }
        self.read8(l.ifm + (ci * l.h + y as usize) * l.w + x as usize)
    }

    fn finish_image(&mut self) {
        let out = &self.buf[self.prog.output_addr..self.prog.output_addr + self.prog.output_len];
        let mut best = 0usize;
        for (i, &v) in out.iter().enumerate() {
            if (v as i8) > (out[best] as i8) {
                best = i;
            }
        }
        self.labels.push(best as u16);
    }

    /// One clock cycle. Returns the phase that executed.
    fn step(&mut self) -> Step<Phase> {
        let m = self.model.map;
        let phase = Phase::from_code(self.get(m.tsu_fsm)).ok_or(CrashReason::IllegalState)?;
        match phase {
            Phase::Config => {
                let cfg = self.prog.ops[self.op].cfg;
                for (j, v) in cfg.into_iter().enumerate() {
                    self.set(m.cfg + j, v);
                }
                let next = if self.op == 0 {
                    Phase::InputSetup
                } else {
                    Phase::WeightSetup
                };
                self.set(m.tsu_fsm, next.code());
            }
            Phase::InputSetup => {
                let l = self.layer_cfg()?;
                self.set(m.dma_src, self.prog.input_addrs[self.image]);
                self.set(m.dma_dst, l.ifm as u32);
                self.set(m.dma_burst, l.input_words() as u32);
                self.dma_fetch()?;
                self.set(m.tsu_fsm, Phase::InputXfer.code());
            }
            Phase::WeightSetup => {
                let l = self.layer_cfg()?;
                self.set(m.dma_src, l.weight_src);
                self.set(m.dma_dst, l.weight_base as u32);
                self.set(m.dma_burst, l.blob_words() as u32);
                self.dma_fetch()?;
                self.set(m.tsu_chan, 0);
                self.set(m.tsu_col, 0);
                self.set(m.tsu_fsm, Phase::WeightXfer.code());
            }
            Phase::InputXfer | Phase::WeightXfer => {
                let dst = self.get(m.dma_dst);
                self.write32(dst as usize, self.get(m.dma_latch))?;
                self.set(m.dma_dst, dst.wrapping_add(4));
                let remaining = self.get(m.dma_burst).wrapping_sub(1);
                self.set(m.dma_burst, remaining);
                if self.get(m.dma_burst) != 0 {
                    self.dma_fetch()?;
                } else {
                    let next = if phase == Phase::InputXfer {
                        Phase::WeightSetup
                    } else {
                        Phase::Tile
                    };
                    self.set(m.tsu_fsm, next.code());
                }
            }
            Phase::Tile => {
                let l = self.layer_cfg()?;
                let co = self.get(m.tsu_chan) as usize;
                let bias = self.read32(l.weight_base + l.bias_offset() + 4 * co)?;
                self.set(m.ao_bias, bias);
                for c in 0..self.cells() {
                    self.set(m.mac_acc + c, 0);
                }
                self.set(m.wd_ptr, (l.weight_base + co * l.k()) as u32);
                self.wd_fetch(true)?;
                self.set(m.tsu_row, 0);
                self.set(m.tsu_fsm, Phase::Compute.code());
            }
            Phase::Compute => {
                let l = self.layer_cfg()?;
                let k = l.k();
                let s = self.get(m.tsu_row) as usize;
                let cells = self.cells();
                if s > 0 {
                    for c in 0..cells {
                        let prod = self.get_signed(m.mac_a + c) * self.get_signed(m.mac_w + c);
                        let acc = self.get(m.mac_acc + c).wrapping_add(prod as u32);
                        self.set(m.mac_acc + c, acc);
                    }
                }
                if s < k {
                    let p0 = self.get(m.tsu_col) as usize;
                    let weight = self.get(m.wd_latch);
                    for c in 0..cells {
                        let a = self.activation(&l, p0 + c, s)?;
                        self.set(m.mac_a + c, a as u8 as u32);
                        self.set(m.mac_w + c, weight);
                    }
                    if s + 1 < k {
                        self.wd_fetch(false)?;
                    }
                    self.set(m.tsu_row, s as u32 + 1);
                } else {
                    self.set(m.tsu_row, 0);
                    self.set(m.tsu_fsm, Phase::Drain.code());
                }
            }
            Phase::Drain => {
                let l = self.layer_cfg()?;
                let co = self.get(m.tsu_chan) as usize;
                let p0 = self.get(m.tsu_col) as usize;
                let active = self.cells().min(l.pixels().saturating_sub(p0));
                let j = self.get(m.tsu_row) as usize;
                let pending_out = self.get(m.ao_out);
                let pending_in = self.get_signed(m.ao_in);
                if j >= 2 && j - 2 < active {
                    let addr = l.ofm + co * l.pixels() + p0 + j - 2;
                    self.write8(addr, pending_out as u8)?;
                }
                if j >= 1 && j - 1 < active {
                    let v = pending_in.wrapping_add(self.get_signed(m.ao_bias));
                    let mut q = (v >> l.shift).clamp(-128, 127);
                    if l.relu {
                        q = q.max(0);
                    }
                    self.set(m.ao_out, q as u8 as u32);
                }
                if j < active {
                    self.set(m.ao_in, self.get(m.mac_acc + j));
                }
                if j + 1 >= active + 2 {
                    self.set(m.tsu_row, 0);
                    self.set(m.tsu_fsm, Phase::Next.code());
                } else {
                    self.set(m.tsu_row, j as u32 + 1);
                }
            }
            Phase::Next => {
                let l = self.layer_cfg()?;
                let next_col = self.get(m.tsu_col) as usize + self.cells();
                if next_col < l.pixels() {
                    self.set(m.tsu_col, next_col as u32);
                    self.set(m.tsu_fsm, Phase::Tile.code());
                } else {
                    self.set(m.tsu_col, 0);
                    let chan = self.get(m.tsu_chan) + 1;
                    self.set(m.tsu_chan, chan);
                    if (chan as usize) < l.cout {
                        self.set(m.tsu_fsm, Phase::Tile.code());
                    } else {
                        self.end_of_op();
                    }
                }
            }
            Phase::Done => {}
        }
        Ok(phase)
    }

    /// Host-side bookkeeping when the last tile of an op drains.
    fn end_of_op(&mut self) {
        let fsm = self.model.map.tsu_fsm;
        self.op += 1;
        if self.op < self.prog.ops.len() {
            self.set(fsm, Phase::Config.code());
            return;
        }
        self.finish_image();
        self.op = 0;
        self.image += 1;
        let next = if self.image == self.prog.input_addrs.len() {
            Phase::Done
        } else {
            Phase::Config
        };
        self.set(fsm, next.code());
    }

    fn done(&self) -> bool {
        self.get(self.model.map.tsu_fsm) == Phase::Done.code()
    }

    fn digest(&self) -> u64 {
        let mut h = Sha256::new();
        for r in &self.regs {
            h.update(r.to_le_bytes());
        }
        h.update(&self.buf);
        let out = h.finalize();
        u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
    }
}

/// A model paired with a compiled workload and its golden run.
///
/// Sessions are immutable; every injection starts from reset, so one session
/// can serve any number of threads.
#[derive(Debug, Clone)]
pub struct Session {
    model: NpuModel,
    program: Program,
    masks: Vec<u32>,
    golden: GoldenResult,
    watchdog_limit: u64,
}

const GOLDEN_CYCLE_CAP: u64 = 1 << 36;

impl Session {
    pub fn new(model: &NpuModel, workload: &Workload) -> Result<Session, NpuError> {
        let program = Program::compile(workload, model.config().buffer_bytes)?;
        let masks = model
            .registers()
            .iter()
            .map(|r| {
                if r.width >= 32 {
                    u32::MAX
                } else {
                    (1u32 << r.width) - 1
                }
            })
            .collect();
        let mut session = Session {
            model: model.clone(),
            program,
            masks,
            golden: GoldenResult {
                top1_labels: Vec::new(),
                cycle_count: 0,
                state_digest: 0,
            },
            watchdog_limit: GOLDEN_CYCLE_CAP,
        };
        session.golden = session.replay()?;
        let limit = (model.config().watchdog_factor * session.golden.cycle_count as f64).ceil();
        session.watchdog_limit = limit as u64;
        Ok(session)
    }

    pub fn model(&self) -> &NpuModel {
        &self.model
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn golden(&self) -> &GoldenResult {
        &self.golden
    }

    pub fn num_inputs(&self) -> u32 {
        self.program.input_addrs.len() as u32
    }

    pub fn watchdog_limit(&self) -> u64 {
        self.watchdog_limit
    }

    pub fn fault_space(&self) -> FaultSpace {
        self.model.enumerate_fault_sites(&self.golden)
    }

    /// Fault-free run, recomputing labels, length and state digest.
    pub fn replay(&self) -> Result<GoldenResult, NpuError> {
        let mut m = Machine::new(&self.model, &self.program, &self.masks);
        let mut cycle = 0u64;
        loop {
            if cycle >= GOLDEN_CYCLE_CAP {
                return Err(NpuError::Shape("fault-free run did not terminate".into()));
            }
            m.step().map_err(|r| NpuError::Shape(format!("fault-free run crashed: {r}")))?;
            cycle += 1;
            if m.done() {
                break;
            }
        }
        Ok(GoldenResult {
            top1_labels: m.labels.clone(),
            cycle_count: cycle,
            state_digest: m.digest(),
        })
    }

    /// Per-cycle record of the fault-free run.
    pub fn trace(&self) -> Vec<CycleTrace> {
        let map = &self.model.map;
        let mut m = Machine::new(&self.model, &self.program, &self.masks);
        let mut out = Vec::with_capacity(self.golden.cycle_count as usize);
        for cycle in 0..self.golden.cycle_count {
            let (image, op) = (m.image, m.op);
            let (chan, col, row) = (m.get(map.tsu_chan), m.get(map.tsu_col), m.get(map.tsu_row));
            let phase = m.step().expect("golden run does not crash");
            out.push(CycleTrace {
                cycle,
                phase,
                image,
                op,
                chan,
                col,
                row,
            });
        }
        out
    }

    fn run(&self, site: Option<&FaultSite>) -> RunEnd {
        let mut m = Machine::new(&self.model, &self.program, &self.masks);
        let mut cycle = 0u64;
        loop {
            if cycle >= self.watchdog_limit {
                return RunEnd::Crashed(CrashReason::Watchdog);
            }
            if let Err(reason) = m.step() {
                return RunEnd::Crashed(reason);
            }
            if m.done() {
                break;
            }
            if let Some(s) = site {
                if s.cycle == cycle {
                    m.regs[s.register] ^= 1 << s.bit;
                }
            }
            cycle += 1;
        }
        RunEnd::Completed { labels: m.labels }
    }

    /// Runs with a single bit-flip at `site` and classifies against the golden run.
    pub fn inject(&self, site: &FaultSite) -> Result<InjectionOutcome, NpuError> {
        self.model.check_site(site, &self.golden)?;
        Ok(self.classify(self.run(Some(site))))
    }

    /// Control run with injection disabled.
    pub fn run_control(&self) -> InjectionOutcome {
        self.classify(self.run(None))
    }

    fn classify(&self, end: RunEnd) -> InjectionOutcome {
        let n = self.num_inputs();
        match end {
            RunEnd::Crashed(reason) => InjectionOutcome::crash(n, reason),
            RunEnd::Completed { labels, .. } => {
                let mismatches = labels
                    .iter()
                    .zip(&self.golden.top1_labels)
                    .filter(|(a, b)| a != b)
                    .count() as u32;
                InjectionOutcome::completed(mismatches, n)
            }
        }
    }
}
