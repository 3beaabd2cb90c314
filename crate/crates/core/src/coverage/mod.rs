//! Behavioral coverage: a versioned catalog of execution events and the
//! set algebra over them.
//!
//! The catalog is the desk-scale analog of an RTL condition-coverage
//! model: each point names one distinct functional behavior of the
//! simulator (an opcode retiring, a branch going one way, an exception
//! kind, an operand pattern, a memory event, a multiply/divide edge
//! case, a fence event). Runs report *stand-alone* coverage (points hit
//! by one test), *incremental* coverage (points hit for the first
//! time), and *total* coverage (everything hit so far).

use crate::isa::{Format, Mnemonic};
use std::fmt;
use std::sync::OnceLock;

/// Categories of behavioral coverage points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Category {
    OpcodeExecuted,
    BranchTaken,
    BranchNotTaken,
    ExceptionKind,
    OperandPattern,
    MemEvent,
    MuldivEdge,
    FenceEvent,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::OpcodeExecuted => "opcode-executed",
            Category::BranchTaken => "branch-taken",
            Category::BranchNotTaken => "branch-not-taken",
            Category::ExceptionKind => "exception-kind",
            Category::OperandPattern => "operand-pattern",
            Category::MemEvent => "mem-event",
            Category::MuldivEdge => "muldiv-edge",
            Category::FenceEvent => "fence-event",
        })
    }
}

/// Identifier of one catalog point. Ids are dense (0..catalog size) and
/// stable for a given catalog version.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PointId(pub u32);

/// One behavioral coverage point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoveragePoint {
    pub id: PointId,
    pub name: String,
    pub category: Category,
}

/// An id referring outside the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("coverage point id {0} outside catalog of size {1}")]
pub struct UnknownPoint(pub u32, pub u32);

// ---------------------------------------------------------------------
// Catalog layout. Id ranges are assigned in fixed blocks so that sim-side
// lookups are O(1); the block bases below are part of the catalog version
// (changing them changes `catalog_hash`).

const OPCODE_BASE: u32 = 0; // one point per mnemonic
const BRANCH_TAKEN_BASE: u32 = OPCODE_BASE + MNEMONIC_COUNT;
const BRANCH_NOT_TAKEN_BASE: u32 = BRANCH_TAKEN_BASE + BRANCH_COUNT;
const EXCEPTION_BASE: u32 = BRANCH_NOT_TAKEN_BASE + BRANCH_COUNT;
const IMM_BASE: u32 = EXCEPTION_BASE + EXCEPTION_COUNT;
const OPERAND_BASE: u32 = IMM_BASE + IMM_POINT_COUNT;
const MEM_BASE: u32 = OPERAND_BASE + OPERAND_COUNT;
const MULDIV_BASE: u32 = MEM_BASE + MEM_COUNT;
const FENCE_BASE: u32 = MULDIV_BASE + MULDIV_COUNT;

const MNEMONIC_COUNT: u32 = 49;
const BRANCH_COUNT: u32 = 6;
const EXCEPTION_COUNT: u32 = 7;
// 7 immediate-bearing formats x 4 patterns, minus the unreachable
// (IShift, Neg) and (IShift, Min) combinations: shift amounts cannot be
// negative, and the minimum shift amount is zero, which classifies as
// the Zero pattern.
const IMM_POINT_COUNT: u32 = 26;
const OPERAND_COUNT: u32 = 6;
const MEM_COUNT: u32 = 12;
const MULDIV_COUNT: u32 = 11;
const FENCE_COUNT: u32 = 3;

/// Number of points in the catalog.
pub const CATALOG_SIZE: u32 =
    MNEMONIC_COUNT + 2 * BRANCH_COUNT + EXCEPTION_COUNT + IMM_POINT_COUNT + OPERAND_COUNT
        + MEM_COUNT
        + MULDIV_COUNT
        + FENCE_COUNT;

const SET_WORDS: usize = ((CATALOG_SIZE as usize) + 63) / 64;

const BRANCHES: [Mnemonic; 6] = [
    Mnemonic::Beq,
    Mnemonic::Bne,
    Mnemonic::Blt,
    Mnemonic::Bge,
    Mnemonic::Bltu,
    Mnemonic::Bgeu,
];

/// Names of the exception-kind points, in the order the simulator's
/// exception enum uses (`ExceptionKind::coverage_index` must agree).
pub const EXCEPTION_NAMES: [&str; EXCEPTION_COUNT as usize] = [
    "exc-illegal-instruction",
    "exc-load-address-misaligned",
    "exc-store-address-misaligned",
    "exc-load-access-fault",
    "exc-store-access-fault",
    "exc-ecall",
    "exc-breakpoint",
];

/// Immediate-value patterns tracked per encoding format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImmPattern {
    Neg,
    Zero,
    Max,
    Min,
}

const IMM_PATTERNS: [ImmPattern; 4] = [
    ImmPattern::Neg,
    ImmPattern::Zero,
    ImmPattern::Max,
    ImmPattern::Min,
];

const IMM_FORMATS: [Format; 7] = [
    Format::I,
    Format::IShift,
    Format::ILoad,
    Format::S,
    Format::B,
    Format::U,
    Format::J,
];

fn imm_pattern_name(p: ImmPattern) -> &'static str {
    match p {
        ImmPattern::Neg => "neg",
        ImmPattern::Zero => "zero",
        ImmPattern::Max => "max",
        ImmPattern::Min => "min",
    }
}

fn imm_format_name(f: Format) -> &'static str {
    match f {
        Format::I => "i",
        Format::IShift => "ishift",
        Format::ILoad => "iload",
        Format::S => "s",
        Format::B => "b",
        Format::U => "u",
        Format::J => "j",
        Format::R | Format::None => unreachable!("formats without immediates"),
    }
}

fn imm_reachable(f: Format, p: ImmPattern) -> bool {
    !(f == Format::IShift && matches!(p, ImmPattern::Neg | ImmPattern::Min))
}

/// Register-operand patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperandPattern {
    RdX0,
    Rs1X0,
    Rs2X0,
    RdEqRs1,
    RdEqRs2,
    Rs1EqRs2,
}

const OPERAND_PATTERNS: [(OperandPattern, &str); OPERAND_COUNT as usize] = [
    (OperandPattern::RdX0, "operand-rd-x0"),
    (OperandPattern::Rs1X0, "operand-rs1-x0"),
    (OperandPattern::Rs2X0, "operand-rs2-x0"),
    (OperandPattern::RdEqRs1, "operand-rd-eq-rs1"),
    (OperandPattern::RdEqRs2, "operand-rd-eq-rs2"),
    (OperandPattern::Rs1EqRs2, "operand-rs1-eq-rs2"),
];

/// Memory access events, classified by direction, alignment/bounds
/// outcome, and width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemEvent {
    LoadAligned1,
    LoadAligned2,
    LoadAligned4,
    StoreAligned1,
    StoreAligned2,
    StoreAligned4,
    LoadMisaligned2,
    LoadMisaligned4,
    StoreMisaligned2,
    StoreMisaligned4,
    LoadOob,
    StoreOob,
}

const MEM_EVENTS: [(MemEvent, &str); MEM_COUNT as usize] = [
    (MemEvent::LoadAligned1, "mem-load-aligned-w1"),
    (MemEvent::LoadAligned2, "mem-load-aligned-w2"),
    (MemEvent::LoadAligned4, "mem-load-aligned-w4"),
    (MemEvent::StoreAligned1, "mem-store-aligned-w1"),
    (MemEvent::StoreAligned2, "mem-store-aligned-w2"),
    (MemEvent::StoreAligned4, "mem-store-aligned-w4"),
    (MemEvent::LoadMisaligned2, "mem-load-misaligned-w2"),
    (MemEvent::LoadMisaligned4, "mem-load-misaligned-w4"),
    (MemEvent::StoreMisaligned2, "mem-store-misaligned-w2"),
    (MemEvent::StoreMisaligned4, "mem-store-misaligned-w4"),
    (MemEvent::LoadOob, "mem-load-oob"),
    (MemEvent::StoreOob, "mem-store-oob"),
];

/// Multiply/divide edge cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MuldivEdge {
    DivZeroDiv,
    DivZeroDivu,
    DivZeroRem,
    DivZeroRemu,
    OverflowDiv,
    OverflowRem,
    HighMul,
    HighMulh,
    HighMulhsu,
    HighMulhu,
    MulZeroOperand,
}

const MULDIV_EDGES: [(MuldivEdge, &str); MULDIV_COUNT as usize] = [
    (MuldivEdge::DivZeroDiv, "muldiv-divzero-div"),
    (MuldivEdge::DivZeroDivu, "muldiv-divzero-divu"),
    (MuldivEdge::DivZeroRem, "muldiv-divzero-rem"),
    (MuldivEdge::DivZeroRemu, "muldiv-divzero-remu"),
    (MuldivEdge::OverflowDiv, "muldiv-overflow-div"),
    (MuldivEdge::OverflowRem, "muldiv-overflow-rem"),
    (MuldivEdge::HighMul, "muldiv-high-mul"),
    (MuldivEdge::HighMulh, "muldiv-high-mulh"),
    (MuldivEdge::HighMulhsu, "muldiv-high-mulhsu"),
    (MuldivEdge::HighMulhu, "muldiv-high-mulhu"),
    (MuldivEdge::MulZeroOperand, "muldiv-mul-zero"),
];

/// Instruction-fetch coherence events.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FenceEvent {
    /// A store whose target lies inside the loaded program image.
    StoreToCode,
    /// FENCE.I executed while a store-to-code was pending.
    FenceiAfterStore,
    /// FENCE.I executed with no pending store-to-code.
    FenceiClean,
}

const FENCE_EVENTS: [(FenceEvent, &str); FENCE_COUNT as usize] = [
    (FenceEvent::StoreToCode, "fence-store-to-code"),
    (FenceEvent::FenceiAfterStore, "fence-fencei-after-store"),
    (FenceEvent::FenceiClean, "fence-fencei-clean"),
];

// ---------------------------------------------------------------------
// Point lookups (all O(1); ids follow the block layout above).

/// Point hit when `m` retires.
pub fn point_opcode(m: Mnemonic) -> PointId {
    PointId(OPCODE_BASE + m.ordinal() as u32)
}

/// Point hit when branch `m` resolves taken/not-taken. `None` for
/// non-branch mnemonics.
pub fn point_branch(m: Mnemonic, taken: bool) -> Option<PointId> {
    let idx = BRANCHES.iter().position(|&b| b == m)? as u32;
    let base = if taken {
        BRANCH_TAKEN_BASE
    } else {
        BRANCH_NOT_TAKEN_BASE
    };
    Some(PointId(base + idx))
}

/// Point hit when the exception with the given index (the simulator's
/// `ExceptionKind` order, matching [`EXCEPTION_NAMES`]) is raised.
pub fn point_exception(index: usize) -> PointId {
    assert!(index < EXCEPTION_COUNT as usize);
    PointId(EXCEPTION_BASE + index as u32)
}

/// Point hit when an instruction of format `f` retires with an immediate
/// matching `p`. `None` when the combination is unreachable or the
/// format carries no immediate.
pub fn point_imm(f: Format, p: ImmPattern) -> Option<PointId> {
    if !f.has_imm() || !imm_reachable(f, p) {
        return None;
    }
    let mut id = IMM_BASE;
    for &fmt in &IMM_FORMATS {
        for &pat in &IMM_PATTERNS {
            if !imm_reachable(fmt, pat) {
                continue;
            }
            if fmt == f && pat == p {
                return Some(PointId(id));
            }
            id += 1;
        }
    }
    unreachable!("format/pattern enumeration covers all reachable combos")
}

/// Classify an executed immediate against its format's range. Zero is
/// checked first (so a zero shift amount is Zero, not Min), then the
/// range extremes, then sign.
pub fn classify_imm(f: Format, imm: i32) -> Option<ImmPattern> {
    if !f.has_imm() {
        return None;
    }
    let (lo, hi) = f.imm_range();
    Some(if imm == 0 {
        ImmPattern::Zero
    } else if imm == hi {
        ImmPattern::Max
    } else if imm == lo {
        ImmPattern::Min
    } else if imm < 0 {
        ImmPattern::Neg
    } else {
        return None; // unremarkable positive immediate
    })
}

/// Point hit when a retiring instruction exhibits a register-operand
/// pattern.
pub fn point_operand(p: OperandPattern) -> PointId {
    let idx = OPERAND_PATTERNS
        .iter()
        .position(|&(op, _)| op == p)
        .unwrap() as u32;
    PointId(OPERAND_BASE + idx)
}

/// Point hit on a classified memory access.
pub fn point_mem(e: MemEvent) -> PointId {
    let idx = MEM_EVENTS.iter().position(|&(ev, _)| ev == e).unwrap() as u32;
    PointId(MEM_BASE + idx)
}

/// Point hit on a multiply/divide edge case.
pub fn point_muldiv(e: MuldivEdge) -> PointId {
    let idx = MULDIV_EDGES.iter().position(|&(ev, _)| ev == e).unwrap() as u32;
    PointId(MULDIV_BASE + idx)
}

/// Point hit on an instruction-fetch coherence event.
pub fn point_fence(e: FenceEvent) -> PointId {
    let idx = FENCE_EVENTS.iter().position(|&(ev, _)| ev == e).unwrap() as u32;
    PointId(FENCE_BASE + idx)
}

// ---------------------------------------------------------------------
// Catalog construction.

fn build_catalog() -> Vec<CoveragePoint> {
    let mut points = Vec::with_capacity(CATALOG_SIZE as usize);
    let mut push = |name: String, category: Category| {
        let id = PointId(points.len() as u32);
        points.push(CoveragePoint { id, name, category });
    };

    for &m in Mnemonic::ALL {
        push(format!("op-{}", m.text()), Category::OpcodeExecuted);
    }
    for &b in &BRANCHES {
        push(format!("branch-taken-{}", b.text()), Category::BranchTaken);
    }
    for &b in &BRANCHES {
        push(
            format!("branch-not-taken-{}", b.text()),
            Category::BranchNotTaken,
        );
    }
    for name in EXCEPTION_NAMES {
        push(name.to_string(), Category::ExceptionKind);
    }
    for &f in &IMM_FORMATS {
        for &p in &IMM_PATTERNS {
            if imm_reachable(f, p) {
                push(
                    format!("imm-{}-{}", imm_format_name(f), imm_pattern_name(p)),
                    Category::OperandPattern,
                );
            }
        }
    }
    for &(_, name) in &OPERAND_PATTERNS {
        push(name.to_string(), Category::OperandPattern);
    }
    for &(_, name) in &MEM_EVENTS {
        push(name.to_string(), Category::MemEvent);
    }
    for &(_, name) in &MULDIV_EDGES {
        push(name.to_string(), Category::MuldivEdge);
    }
    for &(_, name) in &FENCE_EVENTS {
        push(name.to_string(), Category::FenceEvent);
    }
    assert_eq!(points.len() as u32, CATALOG_SIZE);
    points
}

/// The versioned coverage-point catalog. Deterministic: repeated calls
/// return the identical list.
pub fn catalog() -> &'static [CoveragePoint] {
    static CATALOG: OnceLock<Vec<CoveragePoint>> = OnceLock::new();
    CATALOG.get_or_init(build_catalog)
}

/// Catalog dump as CSV (`id,name,category`), one row per point.
pub fn catalog_csv() -> String {
    let mut out = String::from("id,name,category\n");
    for p in catalog() {
        out.push_str(&format!("{},{},{}\n", p.id.0, p.name, p.category));
    }
    out
}

/// FNV-1a hash of the catalog dump: the catalog version. Reports embed
/// it so runs over different catalogs cannot be compared silently.
pub fn catalog_hash() -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for b in catalog_csv().bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(PRIME);
    }
    h
}

// ---------------------------------------------------------------------
// Coverage sets.

/// A set of catalog point ids, stored as a fixed-width bitset so that
/// union (the parallel-merge operation) is a handful of word ORs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CoverageSet {
    words: [u64; SET_WORDS],
}

impl Default for CoverageSet {
    fn default() -> Self {
        CoverageSet::new()
    }
}

impl CoverageSet {
    pub fn new() -> CoverageSet {
        CoverageSet {
            words: [0; SET_WORDS],
        }
    }

    /// Build a set from raw ids, rejecting ids outside the catalog.
    pub fn from_ids<I: IntoIterator<Item = u32>>(ids: I) -> Result<CoverageSet, UnknownPoint> {
        let mut s = CoverageSet::new();
        for id in ids {
            if id >= CATALOG_SIZE {
                return Err(UnknownPoint(id, CATALOG_SIZE));
            }
            s.insert(PointId(id));
        }
        Ok(s)
    }

    pub fn insert(&mut self, p: PointId) {
        debug_assert!(p.0 < CATALOG_SIZE);
        self.words[(p.0 / 64) as usize] |= 1u64 << (p.0 % 64);
    }

    pub fn contains(&self, p: PointId) -> bool {
        p.0 < CATALOG_SIZE && self.words[(p.0 / 64) as usize] >> (p.0 % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn union(&self, other: &CoverageSet) -> CoverageSet {
        let mut words = self.words;
        for (w, o) in words.iter_mut().zip(other.words.iter()) {
            *w |= o;
        }
        CoverageSet { words }
    }

    /// Number of points in `self` not present in `other`.
    pub fn count_minus(&self, other: &CoverageSet) -> usize {
        self.words
            .iter()
            .zip(other.words.iter())
            .map(|(w, o)| (w & !o).count_ones() as usize)
            .sum()
    }

    pub fn is_subset(&self, other: &CoverageSet) -> bool {
        self.count_minus(other) == 0
    }

    /// Ids in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = PointId> + '_ {
        (0..CATALOG_SIZE).filter_map(move |id| {
            let p = PointId(id);
            self.contains(p).then_some(p)
        })
    }
}

/// Per-test coverage accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoverageStats {
    /// Points hit by this test alone.
    pub standalone: usize,
    /// Points hit by this test for the first time in the run.
    pub incremental: usize,
    /// Size of the accumulated total set after this test.
    pub total: usize,
}

/// Fold one test's hits into the running total.
///
/// Returns the test's stats and the new total set. The fold is
/// order-insensitive in its final total (set union), which is what
/// licenses merging coverage from parallel simulations.
pub fn update(
    total_set: &CoverageSet,
    hits: &CoverageSet,
) -> Result<(CoverageStats, CoverageSet), UnknownPoint> {
    // Constructed sets cannot hold out-of-catalog ids, but sets parsed
    // from external input are validated in from_ids; both uphold the
    // precondition, so this is a structural re-check of the bitset tail.
    let tail_bits = (SET_WORDS as u32 * 64) - CATALOG_SIZE;
    if tail_bits > 0 {
        let mask = !0u64 << (64 - tail_bits);
        for s in [total_set, hits] {
            let tail = s.words[SET_WORDS - 1] & mask;
            if tail != 0 {
                let id = 64 * (SET_WORDS as u32 - 1) + tail.trailing_zeros();
                return Err(UnknownPoint(id, CATALOG_SIZE));
            }
        }
    }
    let standalone = hits.len();
    let incremental = hits.count_minus(total_set);
    let new_total = total_set.union(hits);
    let stats = CoverageStats {
        standalone,
        incremental,
        total: new_total.len(),
    };
    Ok((stats, new_total))
}

/// Percent of the catalog covered by `total_set`.
pub fn percent(total_set: &CoverageSet) -> f64 {
    100.0 * total_set.len() as f64 / CATALOG_SIZE as f64
}
