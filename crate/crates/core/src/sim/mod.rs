//! Behavioral interpreter for the ISA subset, parameterized by
//! injectable bug toggles.
//!
//! The all-toggles-off configuration is the golden model; any toggled
//! configuration stands in for a buggy device under test. Golden and
//! DUT share one interpreter so that a toggle's effect is exactly its
//! documented fault model and nothing else. Each retired instruction
//! emits one [`TraceRecord`] and a handful of behavioral coverage hits.

use crate::coverage::{
    self, CoverageSet, FenceEvent, MemEvent, MuldivEdge, OperandPattern,
};
use crate::isa::{decode, DecodeResult, EncodedWord, Instruction, Mnemonic, Register};
use serde::{Deserialize, Serialize};
use std::fmt;

/// One of the four injectable fault models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BugToggle {
    /// Multiply/divide writebacks execute but are absent from the trace.
    TraceOmitMuldivWb,
    /// Writes targeting x0 appear in the trace although state stays 0.
    TraceX0Write,
    /// Out-of-bounds is reported where misalignment has priority.
    ExcPrioritySwap,
    /// Instruction fetch reads a shadow copy refreshed only by FENCE.I,
    /// so self-modifying code without FENCE.I executes stale words.
    StaleIfetchNoFencei,
}

impl BugToggle {
    pub const ALL: [BugToggle; 4] = [
        BugToggle::TraceOmitMuldivWb,
        BugToggle::TraceX0Write,
        BugToggle::ExcPrioritySwap,
        BugToggle::StaleIfetchNoFencei,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BugToggle::TraceOmitMuldivWb => "trace-omit-muldiv-wb",
            BugToggle::TraceX0Write => "trace-x0-write",
            BugToggle::ExcPrioritySwap => "exc-priority-swap",
            BugToggle::StaleIfetchNoFencei => "stale-ifetch-no-fencei",
        }
    }

    pub fn parse(s: &str) -> Option<BugToggle> {
        BugToggle::ALL.iter().copied().find(|t| t.name() == s)
    }

    fn bit(self) -> u8 {
        1 << BugToggle::ALL.iter().position(|&t| t == self).unwrap()
    }
}

impl fmt::Display for BugToggle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A set of bug toggles. The empty set is the golden configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ToggleSet(u8);

impl ToggleSet {
    pub const EMPTY: ToggleSet = ToggleSet(0);

    pub fn single(t: BugToggle) -> ToggleSet {
        ToggleSet(t.bit())
    }

    pub fn insert(&mut self, t: BugToggle) {
        self.0 |= t.bit();
    }

    pub fn with(mut self, t: BugToggle) -> ToggleSet {
        self.insert(t);
        self
    }

    pub fn contains(self, t: BugToggle) -> bool {
        self.0 & t.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = BugToggle> {
        BugToggle::ALL.into_iter().filter(move |t| self.contains(*t))
    }

    /// Parse a comma-separated toggle list; empty or "none" is the
    /// golden configuration.
    pub fn parse_list(s: &str) -> Result<ToggleSet, String> {
        let mut set = ToggleSet::EMPTY;
        let trimmed = s.trim();
        if trimmed.is_empty() || trimmed == "none" {
            return Ok(set);
        }
        for part in trimmed.split(',') {
            let name = part.trim();
            let t = BugToggle::parse(name).ok_or_else(|| {
                format!(
                    "unknown toggle `{name}` (expected one of: {})",
                    BugToggle::ALL.map(|t| t.name()).join(", ")
                )
            })?;
            set.insert(t);
        }
        Ok(set)
    }
}

impl FromIterator<BugToggle> for ToggleSet {
    fn from_iter<I: IntoIterator<Item = BugToggle>>(iter: I) -> ToggleSet {
        let mut s = ToggleSet::EMPTY;
        for t in iter {
            s.insert(t);
        }
        s
    }
}

impl fmt::Display for ToggleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("none");
        }
        let names: Vec<&str> = self.iter().map(BugToggle::name).collect();
        f.write_str(&names.join(","))
    }
}

impl Serialize for ToggleSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let names: Vec<&str> = self.iter().map(BugToggle::name).collect();
        names.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ToggleSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<ToggleSet, D::Error> {
        let names = Vec::<String>::deserialize(d)?;
        let mut set = ToggleSet::EMPTY;
        for n in &names {
            let t = BugToggle::parse(n)
                .ok_or_else(|| serde::de::Error::custom(format!("unknown toggle `{n}`")))?;
            set.insert(t);
        }
        Ok(set)
    }
}

/// Exception kinds the interpreter can raise. Every exception halts
/// execution (there are no trap handlers in this flat model).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum ExceptionKind {
    IllegalInstruction,
    LoadAddressMisaligned,
    StoreAddressMisaligned,
    LoadAccessFault,
    StoreAccessFault,
    Ecall,
    Breakpoint,
}

impl ExceptionKind {
    pub const ALL: [ExceptionKind; 7] = [
        ExceptionKind::IllegalInstruction,
        ExceptionKind::LoadAddressMisaligned,
        ExceptionKind::StoreAddressMisaligned,
        ExceptionKind::LoadAccessFault,
        ExceptionKind::StoreAccessFault,
        ExceptionKind::Ecall,
        ExceptionKind::Breakpoint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExceptionKind::IllegalInstruction => "illegal-instruction",
            ExceptionKind::LoadAddressMisaligned => "load-address-misaligned",
            ExceptionKind::StoreAddressMisaligned => "store-address-misaligned",
            ExceptionKind::LoadAccessFault => "load-access-fault",
            ExceptionKind::StoreAccessFault => "store-access-fault",
            ExceptionKind::Ecall => "ecall",
            ExceptionKind::Breakpoint => "breakpoint",
        }
    }

    pub fn parse(s: &str) -> Option<ExceptionKind> {
        ExceptionKind::ALL.iter().copied().find(|k| k.name() == s)
    }

    /// Index into the coverage catalog's exception block; the order of
    /// `ALL` matches `coverage::EXCEPTION_NAMES`.
    pub fn coverage_index(self) -> usize {
        ExceptionKind::ALL.iter().position(|&k| k == self).unwrap()
    }
}

impl fmt::Display for ExceptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A register writeback observed in the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RegWrite {
    pub rd: Register,
    pub value: u32,
}

/// A memory store observed in the trace. `value` is the stored value
/// truncated to `width` bytes and zero-extended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MemWrite {
    pub addr: u32,
    pub width: u8,
    pub value: u32,
}

/// One retired instruction as observed by the mismatch detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TraceRecord {
    pub step: u32,
    pub pc: u32,
    pub word: EncodedWord,
    pub reg_write: Option<RegWrite>,
    pub mem_write: Option<MemWrite>,
    pub exception: Option<ExceptionKind>,
}

impl TraceRecord {
    /// Fixed line form: `step pc word rd:value|- addr:width:value|- exc|-`,
    /// hexadecimal values. Stable across versions for replay diffing.
    pub fn line(&self) -> String {
        let reg = match self.reg_write {
            Some(w) => format!("x{}:{:08x}", w.rd.index(), w.value),
            None => "-".to_string(),
        };
        let mem = match self.mem_write {
            Some(w) => format!("{:08x}:{}:{:08x}", w.addr, w.width, w.value),
            None => "-".to_string(),
        };
        let exc = match self.exception {
            Some(k) => k.name().to_string(),
            None => "-".to_string(),
        };
        format!("{} {:08x} {} {} {} {}", self.step, self.pc, self.word, reg, mem, exc)
    }
}

/// Serialize a whole trace, one record per line.
pub fn write_trace(trace: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in trace {
        out.push_str(&r.line());
        out.push('\n');
    }
    out
}

/// Execution parameters for one simulation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecConfig {
    /// Flat byte-addressable memory size.
    pub mem_size: u32,
    /// Load address and initial pc of the program.
    pub entry_pc: u32,
    /// Maximum retired instructions before a forced halt.
    pub step_cap: u32,
    /// Active fault models; empty is the golden model.
    pub toggles: ToggleSet,
}

impl Default for ExecConfig {
    fn default() -> ExecConfig {
        ExecConfig {
            mem_size: 64 * 1024,
            entry_pc: 0,
            step_cap: 4096,
            toggles: ToggleSet::EMPTY,
        }
    }
}

impl ExecConfig {
    pub fn golden(&self) -> ExecConfig {
        ExecConfig {
            toggles: ToggleSet::EMPTY,
            ..self.clone()
        }
    }

    pub fn with_toggles(&self, toggles: ToggleSet) -> ExecConfig {
        ExecConfig {
            toggles,
            ..self.clone()
        }
    }
}

/// Simulation setup failure.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("program of {bytes} bytes does not fit below memory size {mem_size}")]
    ProgramTooLarge { bytes: u64, mem_size: u32 },
}

/// Full architectural state of one simulated hart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchState {
    pub pc: u32,
    pub regs: [u32; 32],
    pub mem: Vec<u8>,
    /// Shadow copy of memory used for fetch under the stale-fetch fault
    /// model; refreshed only by FENCE.I.
    pub icache_snapshot: Vec<u8>,
    pub halted: bool,
    /// Instructions retired so far.
    pub steps_retired: u32,
    /// Byte range of the loaded program image, for store-to-code
    /// coverage events.
    program_range: (u32, u32),
    /// A store has targeted the program image since the last FENCE.I.
    pending_code_store: bool,
}

impl ArchState {
    pub fn reg(&self, r: Register) -> u32 {
        self.regs[r.index() as usize]
    }
}

/// Load a program and build the initial state.
pub fn reset(config: &ExecConfig, program: &[EncodedWord]) -> Result<ArchState, SimError> {
    let bytes = program.len() as u64 * 4;
    let end = config.entry_pc as u64 + bytes;
    if end > config.mem_size as u64 {
        return Err(SimError::ProgramTooLarge {
            bytes,
            mem_size: config.mem_size,
        });
    }
    let mut mem = vec![0u8; config.mem_size as usize];
    for (i, w) in program.iter().enumerate() {
        let at = config.entry_pc as usize + i * 4;
        mem[at..at + 4].copy_from_slice(&w.bits().to_le_bytes());
    }
    let icache_snapshot = mem.clone();
    Ok(ArchState {
        pc: config.entry_pc,
        regs: [0; 32],
        mem,
        icache_snapshot,
        halted: false,
        steps_retired: 0,
        program_range: (config.entry_pc, end as u32),
        pending_code_store: false,
    })
}

fn read_mem(mem: &[u8], addr: u32, width: u8) -> u32 {
    let a = addr as usize;
    match width {
        1 => mem[a] as u32,
        2 => u16::from_le_bytes([mem[a], mem[a + 1]]) as u32,
        4 => u32::from_le_bytes([mem[a], mem[a + 1], mem[a + 2], mem[a + 3]]),
        _ => unreachable!(),
    }
}

fn write_mem(mem: &mut [u8], addr: u32, width: u8, value: u32) {
    let a = addr as usize;
    match width {
        1 => mem[a] = value as u8,
        2 => mem[a..a + 2].copy_from_slice(&(value as u16).to_le_bytes()),
        4 => mem[a..a + 4].copy_from_slice(&value.to_le_bytes()),
        _ => unreachable!(),
    }
}

/// Check a data access: misalignment before bounds in the golden order,
/// the reverse under the priority-swap fault model.
fn check_access(
    config: &ExecConfig,
    addr: u32,
    width: u8,
    is_load: bool,
) -> Option<ExceptionKind> {
    let misaligned = addr % width as u32 != 0;
    let oob = addr as u64 + width as u64 > config.mem_size as u64;
    let misaligned_kind = if is_load {
        ExceptionKind::LoadAddressMisaligned
    } else {
        ExceptionKind::StoreAddressMisaligned
    };
    let oob_kind = if is_load {
        ExceptionKind::LoadAccessFault
    } else {
        ExceptionKind::StoreAccessFault
    };
    let swap = config.toggles.contains(BugToggle::ExcPrioritySwap);
    let order = if swap {
        [(oob, oob_kind), (misaligned, misaligned_kind)]
    } else {
        [(misaligned, misaligned_kind), (oob, oob_kind)]
    };
    order.iter().find(|(cond, _)| *cond).map(|&(_, kind)| kind)
}

/// Outcome of executing one decoded instruction, before trace policy.
struct Effect {
    next_pc: u32,
    reg_write: Option<RegWrite>,
    mem_write: Option<MemWrite>,
    exception: Option<ExceptionKind>,
}

/// Execute one instruction. Also the lowest-level coverage source: this
/// is where behavioral events are classified.
fn step_collecting(
    state: &mut ArchState,
    config: &ExecConfig,
    hits: &mut CoverageSet,
) -> TraceRecord {
    debug_assert!(!state.halted, "step on a halted state");
    let step_no = state.steps_retired;
    state.steps_retired += 1;
    let pc = state.pc;

    let fault = |state: &mut ArchState, word: EncodedWord, kind: ExceptionKind| {
        state.halted = true;
        TraceRecord {
            step: step_no,
            pc,
            word,
            reg_write: None,
            mem_write: None,
            exception: Some(kind),
        }
    };

    // Fetch. A misaligned or out-of-range pc cannot deliver an
    // instruction; the flat model reports it as an illegal instruction
    // (there is no separate fetch-fault kind in the exception set).
    if pc % 4 != 0 || pc as u64 + 4 > config.mem_size as u64 {
        hits.insert(coverage::point_exception(
            ExceptionKind::IllegalInstruction.coverage_index(),
        ));
        return fault(state, EncodedWord(0), ExceptionKind::IllegalInstruction);
    }
    let fetch_mem = if config.toggles.contains(BugToggle::StaleIfetchNoFencei) {
        &state.icache_snapshot
    } else {
        &state.mem
    };
    let word = EncodedWord(read_mem(fetch_mem, pc, 4));

    // Decode.
    let instr = match decode(word) {
        DecodeResult::Valid(i) => i,
        DecodeResult::Illegal => {
            hits.insert(coverage::point_exception(
                ExceptionKind::IllegalInstruction.coverage_index(),
            ));
            return fault(state, word, ExceptionKind::IllegalInstruction);
        }
    };
    hit_static_points(&instr, hits);

    // Execute.
    let effect = execute(state, config, pc, &instr, hits);

    if let Some(kind) = effect.exception {
        hits.insert(coverage::point_exception(kind.coverage_index()));
        return fault(state, word, kind);
    }

    // Apply architectural effects. Writes to x0 never change state.
    if let Some(w) = effect.reg_write {
        if !w.rd.is_zero() {
            state.regs[w.rd.index() as usize] = w.value;
        }
    }
    if let Some(w) = effect.mem_write {
        write_mem(&mut state.mem, w.addr, w.width, w.value);
        let (lo, hi) = state.program_range;
        if w.addr < hi && w.addr as u64 + w.width as u64 > lo as u64 {
            hits.insert(coverage::point_fence(FenceEvent::StoreToCode));
            state.pending_code_store = true;
        }
    }
    state.pc = effect.next_pc;

    // Trace policy: which architectural effects appear in the record.
    let traced_reg = match effect.reg_write {
        Some(w) => {
            let omit_muldiv = instr.mnemonic.is_muldiv()
                && config.toggles.contains(BugToggle::TraceOmitMuldivWb);
            let report_x0 = config.toggles.contains(BugToggle::TraceX0Write);
            if omit_muldiv {
                None
            } else if w.rd.is_zero() && !report_x0 {
                None
            } else {
                Some(w)
            }
        }
        None => None,
    };

    TraceRecord {
        step: step_no,
        pc,
        word,
        reg_write: traced_reg,
        mem_write: effect.mem_write,
        exception: None,
    }
}

/// Coverage points determined by the instruction's static form.
fn hit_static_points(instr: &Instruction, hits: &mut CoverageSet) {
    hits.insert(coverage::point_opcode(instr.mnemonic));
    let f = instr.mnemonic.format();
    if let Some(p) = coverage::classify_imm(f, instr.imm).and_then(|p| coverage::point_imm(f, p)) {
        hits.insert(p);
    }
    if f.has_rd() && instr.rd.is_zero() {
        hits.insert(coverage::point_operand(OperandPattern::RdX0));
    }
    if f.has_rs1() && instr.rs1.is_zero() {
        hits.insert(coverage::point_operand(OperandPattern::Rs1X0));
    }
    if f.has_rs2() && instr.rs2.is_zero() {
        hits.insert(coverage::point_operand(OperandPattern::Rs2X0));
    }
    if f.has_rd() && f.has_rs1() && instr.rd == instr.rs1 {
        hits.insert(coverage::point_operand(OperandPattern::RdEqRs1));
    }
    if f.has_rd() && f.has_rs2() && instr.rd == instr.rs2 {
        hits.insert(coverage::point_operand(OperandPattern::RdEqRs2));
    }
    if f.has_rs1() && f.has_rs2() && instr.rs1 == instr.rs2 {
        hits.insert(coverage::point_operand(OperandPattern::Rs1EqRs2));
    }
}

fn load_width(m: Mnemonic) -> u8 {
    match m {
        Mnemonic::Lb | Mnemonic::Lbu | Mnemonic::Sb => 1,
        Mnemonic::Lh | Mnemonic::Lhu | Mnemonic::Sh => 2,
        Mnemonic::Lw | Mnemonic::Sw => 4,
        _ => unreachable!(),
    }
}

fn mem_event(is_load: bool, width: u8, exception: Option<ExceptionKind>) -> MemEvent {
    use ExceptionKind::*;
    match (is_load, width, exception) {
        (true, _, Some(LoadAccessFault)) => MemEvent::LoadOob,
        (false, _, Some(StoreAccessFault)) => MemEvent::StoreOob,
        (true, 2, Some(LoadAddressMisaligned)) => MemEvent::LoadMisaligned2,
        (true, 4, Some(LoadAddressMisaligned)) => MemEvent::LoadMisaligned4,
        (false, 2, Some(StoreAddressMisaligned)) => MemEvent::StoreMisaligned2,
        (false, 4, Some(StoreAddressMisaligned)) => MemEvent::StoreMisaligned4,
        (true, 1, None) => MemEvent::LoadAligned1,
        (true, 2, None) => MemEvent::LoadAligned2,
        (true, 4, None) => MemEvent::LoadAligned4,
        (false, 1, None) => MemEvent::StoreAligned1,
        (false, 2, None) => MemEvent::StoreAligned2,
        (false, 4, None) => MemEvent::StoreAligned4,
        _ => unreachable!("byte accesses cannot misalign"),
    }
}

fn execute(
    state: &mut ArchState,
    config: &ExecConfig,
    pc: u32,
    instr: &Instruction,
    hits: &mut CoverageSet,
) -> Effect {
    use Mnemonic::*;

    let m = instr.mnemonic;
    let r1 = state.reg(instr.rs1);
    let r2 = state.reg(instr.rs2);
    let imm = instr.imm;
    let imm_u = imm as u32;
    let mut next_pc = pc.wrapping_add(4);
    let mut reg_write: Option<RegWrite> = None;
    let mut mem_write: Option<MemWrite> = None;
    let mut exception: Option<ExceptionKind> = None;

    let mut wr = |rd: Register, value: u32| {
        reg_write = Some(RegWrite { rd, value });
    };

    match m {
        Lui => wr(instr.rd, imm_u << 12),
        Auipc => wr(instr.rd, pc.wrapping_add(imm_u << 12)),
        Jal => {
            wr(instr.rd, pc.wrapping_add(4));
            next_pc = pc.wrapping_add(imm_u);
        }
        Jalr => {
            let link = pc.wrapping_add(4);
            next_pc = r1.wrapping_add(imm_u) & !1;
            wr(instr.rd, link);
        }
        Beq | Bne | Blt | Bge | Bltu | Bgeu => {
            let taken = match m {
                Beq => r1 == r2,
                Bne => r1 != r2,
                Blt => (r1 as i32) < (r2 as i32),
                Bge => (r1 as i32) >= (r2 as i32),
                Bltu => r1 < r2,
                Bgeu => r1 >= r2,
                _ => unreachable!(),
            };
            hits.insert(coverage::point_branch(m, taken).unwrap());
            if taken {
                next_pc = pc.wrapping_add(imm_u);
            }
        }
        Lb | Lh | Lw | Lbu | Lhu => {
            let addr = r1.wrapping_add(imm_u);
            let width = load_width(m);
            exception = check_access(config, addr, width, true);
            hits.insert(coverage::point_mem(mem_event(true, width, exception)));
            if exception.is_none() {
                let raw = read_mem(&state.mem, addr, width);
                let value = match m {
                    Lb => raw as u8 as i8 as i32 as u32,
                    Lh => raw as u16 as i16 as i32 as u32,
                    _ => raw,
                };
                wr(instr.rd, value);
            }
        }
        Sb | Sh | Sw => {
            let addr = r1.wrapping_add(imm_u);
            let width = load_width(m);
            exception = check_access(config, addr, width, false);
            hits.insert(coverage::point_mem(mem_event(false, width, exception)));
            if exception.is_none() {
                let value = match width {
                    1 => r2 & 0xff,
                    2 => r2 & 0xffff,
                    _ => r2,
                };
                mem_write = Some(MemWrite { addr, width, value });
            }
        }
        Addi => wr(instr.rd, r1.wrapping_add(imm_u)),
        Slti => wr(instr.rd, ((r1 as i32) < imm) as u32),
        Sltiu => wr(instr.rd, (r1 < imm_u) as u32),
        Xori => wr(instr.rd, r1 ^ imm_u),
        Ori => wr(instr.rd, r1 | imm_u),
        Andi => wr(instr.rd, r1 & imm_u),
        Slli => wr(instr.rd, r1 << imm),
        Srli => wr(instr.rd, r1 >> imm),
        Srai => wr(instr.rd, ((r1 as i32) >> imm) as u32),
        Add => wr(instr.rd, r1.wrapping_add(r2)),
        Sub => wr(instr.rd, r1.wrapping_sub(r2)),
        Sll => wr(instr.rd, r1 << (r2 & 31)),
        Slt => wr(instr.rd, ((r1 as i32) < (r2 as i32)) as u32),
        Sltu => wr(instr.rd, (r1 < r2) as u32),
        Xor => wr(instr.rd, r1 ^ r2),
        Srl => wr(instr.rd, r1 >> (r2 & 31)),
        Sra => wr(instr.rd, ((r1 as i32) >> (r2 & 31)) as u32),
        Or => wr(instr.rd, r1 | r2),
        And => wr(instr.rd, r1 & r2),
        Fence => {}
        FenceI => {
            let event = if state.pending_code_store {
                FenceEvent::FenceiAfterStore
            } else {
                FenceEvent::FenceiClean
            };
            hits.insert(coverage::point_fence(event));
            state.pending_code_store = false;
            state.icache_snapshot.copy_from_slice(&state.mem);
        }
        Ecall => exception = Some(ExceptionKind::Ecall),
        Ebreak => exception = Some(ExceptionKind::Breakpoint),
        Mul | Mulh | Mulhsu | Mulhu | Div | Divu | Rem | Remu => {
            let value = muldiv(m, r1, r2, hits);
            wr(instr.rd, value);
        }
    }

    Effect {
        next_pc,
        reg_write,
        mem_write,
        exception,
    }
}

fn muldiv(m: Mnemonic, r1: u32, r2: u32, hits: &mut CoverageSet) -> u32 {
    use Mnemonic::*;
    let s1 = r1 as i32;
    let s2 = r2 as i32;
    let overflow = s1 == i32::MIN && s2 == -1;

    let mut edge = |e: MuldivEdge| hits.insert(coverage::point_muldiv(e));

    match m {
        Mul | Mulh | Mulhsu | Mulhu => {
            if r1 == 0 || r2 == 0 {
                edge(MuldivEdge::MulZeroOperand);
            }
            let (high, low) = match m {
                Mul | Mulh => {
                    let p = (s1 as i64).wrapping_mul(s2 as i64);
                    ((p >> 32) as u32, p as u32)
                }
                Mulhsu => {
                    let p = (s1 as i64).wrapping_mul(r2 as u64 as i64);
                    ((p >> 32) as u32, p as u32)
                }
                Mulhu => {
                    let p = (r1 as u64) * (r2 as u64);
                    ((p >> 32) as u32, p as u32)
                }
                _ => unreachable!(),
            };
            if high != 0 {
                edge(match m {
                    Mul => MuldivEdge::HighMul,
                    Mulh => MuldivEdge::HighMulh,
                    Mulhsu => MuldivEdge::HighMulhsu,
                    Mulhu => MuldivEdge::HighMulhu,
                    _ => unreachable!(),
                });
            }
            if m == Mul {
                low
            } else {
                high
            }
        }
        Div => {
            if r2 == 0 {
                edge(MuldivEdge::DivZeroDiv);
                u32::MAX
            } else if overflow {
                edge(MuldivEdge::OverflowDiv);
                r1
            } else {
                s1.wrapping_div(s2) as u32
            }
        }
        Divu => {
            if r2 == 0 {
                edge(MuldivEdge::DivZeroDivu);
                u32::MAX
            } else {
                r1 / r2
            }
        }
        Rem => {
            if r2 == 0 {
                edge(MuldivEdge::DivZeroRem);
                r1
            } else if overflow {
                edge(MuldivEdge::OverflowRem);
                0
            } else {
                s1.wrapping_rem(s2) as u32
            }
        }
        Remu => {
            if r2 == 0 {
                edge(MuldivEdge::DivZeroRemu);
                r1
            } else {
                r1 % r2
            }
        }
        _ => unreachable!(),
    }
}

/// Retire one instruction, returning its trace record. Coverage hits
/// are discarded; use [`run_program`] to collect them.
pub fn step(state: &mut ArchState, config: &ExecConfig) -> TraceRecord {
    let mut scratch = CoverageSet::new();
    step_collecting(state, config, &mut scratch)
}

/// Run a program to completion: halt, fault, or step cap.
///
/// Returns the full trace and the set of coverage points hit.
/// `(program, config)` fully determines the result.
pub fn run_program(
    program: &[EncodedWord],
    config: &ExecConfig,
) -> Result<(Vec<TraceRecord>, CoverageSet), SimError> {
    let (trace, cov, _) = run_program_with_state(program, config)?;
    Ok((trace, cov))
}

/// As [`run_program`], but also returns the final architectural state
/// (used by tests that check trace-only fault models leave state
/// untouched).
pub fn run_program_with_state(
    program: &[EncodedWord],
    config: &ExecConfig,
) -> Result<(Vec<TraceRecord>, CoverageSet, ArchState), SimError> {
    let mut state = reset(config, program)?;
    let mut trace = Vec::new();
    let mut cov = CoverageSet::new();
    while !state.halted && state.steps_retired < config.step_cap {
        trace.push(step_collecting(&mut state, config, &mut cov));
    }
    state.halted = true;
    Ok((trace, cov, state))
}
