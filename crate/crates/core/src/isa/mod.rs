//! RV32I + M instruction subset: symbolic instructions, bit-exact
//! encode/decode, an assembly text format, and the strict disassembler
//! used as a reward agent.
//!
//! The subset is RV32I base integer plus the M extension, without AMO,
//! CSR, or compressed instructions. FENCE.I is included so that
//! instruction-fetch coherence is expressible. Decode is deliberately
//! strict: reserved or hinted encodings outside the subset are reported
//! as illegal.

mod decode;
mod encode;
mod text;

pub use decode::{decode, DecodeResult};
pub use encode::encode;
pub use text::{assemble, parse_instruction, ParseError};

use std::fmt;

/// One of the 32 integer registers. Index 0 is the hardwired zero
/// register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Register(u8);

impl Register {
    pub const X0: Register = Register(0);

    pub fn new(index: u8) -> Option<Register> {
        (index < 32).then_some(Register(index))
    }

    /// Extract a register from a 5-bit instruction field.
    pub(crate) fn from_bits(bits: u32) -> Register {
        Register((bits & 0x1f) as u8)
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Register {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

/// Instruction encoding formats of the subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Format {
    /// Register-register: rd, rs1, rs2.
    R,
    /// Register-immediate: rd, rs1, imm (12-bit signed).
    I,
    /// Shift-immediate: rd, rs1, shamt in [0, 31].
    IShift,
    /// Load: rd, rs1, imm (12-bit signed offset).
    ILoad,
    /// Store: rs1, rs2, imm (12-bit signed offset).
    S,
    /// Branch: rs1, rs2, imm (13-bit signed, even).
    B,
    /// Upper-immediate: rd, imm (20-bit signed).
    U,
    /// Jump-and-link: rd, imm (21-bit signed, even).
    J,
    /// No operands (FENCE, FENCE.I, ECALL, EBREAK).
    None,
}

impl Format {
    /// Inclusive immediate range for the format, in the symbolic
    /// (pre-encoding) representation.
    pub fn imm_range(self) -> (i32, i32) {
        match self {
            Format::R | Format::None => (0, 0),
            Format::I | Format::ILoad | Format::S => (-2048, 2047),
            Format::IShift => (0, 31),
            Format::B => (-4096, 4094),
            Format::U => (-524288, 524287),
            Format::J => (-1048576, 1048574),
        }
    }

    /// Immediates of branch and jump formats must be even.
    pub fn imm_must_be_even(self) -> bool {
        matches!(self, Format::B | Format::J)
    }

    pub fn has_rd(self) -> bool {
        matches!(
            self,
            Format::R | Format::I | Format::IShift | Format::ILoad | Format::U | Format::J
        )
    }

    pub fn has_rs1(self) -> bool {
        matches!(
            self,
            Format::R | Format::I | Format::IShift | Format::ILoad | Format::S | Format::B
        )
    }

    pub fn has_rs2(self) -> bool {
        matches!(self, Format::R | Format::S | Format::B)
    }

    pub fn has_imm(self) -> bool {
        !matches!(self, Format::R | Format::None)
    }
}

macro_rules! mnemonics {
    ($(($variant:ident, $text:expr, $format:ident)),+ $(,)?) => {
        /// Every mnemonic in the subset.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum Mnemonic {
            $($variant),+
        }

        impl Mnemonic {
            pub const ALL: &'static [Mnemonic] = &[$(Mnemonic::$variant),+];

            pub fn format(self) -> Format {
                match self {
                    $(Mnemonic::$variant => Format::$format),+
                }
            }

            pub fn text(self) -> &'static str {
                match self {
                    $(Mnemonic::$variant => $text),+
                }
            }

            pub fn parse(s: &str) -> Option<Mnemonic> {
                let lower = s.to_ascii_lowercase();
                match lower.as_str() {
                    $($text => Some(Mnemonic::$variant),)+
                    _ => None,
                }
            }
        }
    };
}

mnemonics![
    (Lui, "lui", U),
    (Auipc, "auipc", U),
    (Jal, "jal", J),
    (Jalr, "jalr", I),
    (Beq, "beq", B),
    (Bne, "bne", B),
    (Blt, "blt", B),
    (Bge, "bge", B),
    (Bltu, "bltu", B),
    (Bgeu, "bgeu", B),
    (Lb, "lb", ILoad),
    (Lh, "lh", ILoad),
    (Lw, "lw", ILoad),
    (Lbu, "lbu", ILoad),
    (Lhu, "lhu", ILoad),
    (Sb, "sb", S),
    (Sh, "sh", S),
    (Sw, "sw", S),
    (Addi, "addi", I),
    (Slti, "slti", I),
    (Sltiu, "sltiu", I),
    (Xori, "xori", I),
    (Ori, "ori", I),
    (Andi, "andi", I),
    (Slli, "slli", IShift),
    (Srli, "srli", IShift),
    (Srai, "srai", IShift),
    (Add, "add", R),
    (Sub, "sub", R),
    (Sll, "sll", R),
    (Slt, "slt", R),
    (Sltu, "sltu", R),
    (Xor, "xor", R),
    (Srl, "srl", R),
    (Sra, "sra", R),
    (Or, "or", R),
    (And, "and", R),
    (Fence, "fence", None),
    (FenceI, "fence.i", None),
    (Ecall, "ecall", None),
    (Ebreak, "ebreak", None),
    (Mul, "mul", R),
    (Mulh, "mulh", R),
    (Mulhsu, "mulhsu", R),
    (Mulhu, "mulhu", R),
    (Div, "div", R),
    (Divu, "divu", R),
    (Rem, "rem", R),
    (Remu, "remu", R),
];

impl Mnemonic {
    pub fn is_branch(self) -> bool {
        matches!(
            self,
            Mnemonic::Beq
                | Mnemonic::Bne
                | Mnemonic::Blt
                | Mnemonic::Bge
                | Mnemonic::Bltu
                | Mnemonic::Bgeu
        )
    }

    pub fn is_load(self) -> bool {
        self.format() == Format::ILoad
    }

    pub fn is_store(self) -> bool {
        self.format() == Format::S
    }

    pub fn is_muldiv(self) -> bool {
        matches!(
            self,
            Mnemonic::Mul
                | Mnemonic::Mulh
                | Mnemonic::Mulhsu
                | Mnemonic::Mulhu
                | Mnemonic::Div
                | Mnemonic::Divu
                | Mnemonic::Rem
                | Mnemonic::Remu
        )
    }

    /// Position in `ALL`; stable for a given build of the subset.
    pub fn ordinal(self) -> usize {
        Mnemonic::ALL.iter().position(|&m| m == self).unwrap()
    }
}

impl fmt::Display for Mnemonic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.text())
    }
}

/// One symbolic instruction. Fields that the mnemonic's format does not
/// use are kept at their canonical zero values so that equality and
/// round-trips are well defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Instruction {
    pub mnemonic: Mnemonic,
    pub rd: Register,
    pub rs1: Register,
    pub rs2: Register,
    pub imm: i32,
}

/// Violation of a mnemonic's operand format.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormatViolation {
    #[error("{mnemonic}: immediate {imm} outside [{lo}, {hi}]")]
    ImmOutOfRange {
        mnemonic: Mnemonic,
        imm: i32,
        lo: i32,
        hi: i32,
    },
    #[error("{mnemonic}: immediate {imm} must be even")]
    ImmMisaligned { mnemonic: Mnemonic, imm: i32 },
    #[error("{mnemonic}: operand {field} not used by this format must be zero")]
    UnusedOperand {
        mnemonic: Mnemonic,
        field: &'static str,
    },
}

impl Instruction {
    /// Build an instruction, canonicalizing unused fields and checking
    /// the format's immediate constraints.
    pub fn new(
        mnemonic: Mnemonic,
        rd: Register,
        rs1: Register,
        rs2: Register,
        imm: i32,
    ) -> Result<Instruction, FormatViolation> {
        let f = mnemonic.format();
        let instr = Instruction {
            mnemonic,
            rd: if f.has_rd() { rd } else { Register::X0 },
            rs1: if f.has_rs1() { rs1 } else { Register::X0 },
            rs2: if f.has_rs2() { rs2 } else { Register::X0 },
            imm: if f.has_imm() { imm } else { 0 },
        };
        instr.validate()?;
        Ok(instr)
    }

    /// Check the format invariants of an already-built instruction.
    pub fn validate(&self) -> Result<(), FormatViolation> {
        let f = self.mnemonic.format();
        let (lo, hi) = f.imm_range();
        if self.imm < lo || self.imm > hi {
            return Err(FormatViolation::ImmOutOfRange {
                mnemonic: self.mnemonic,
                imm: self.imm,
                lo,
                hi,
            });
        }
        if f.imm_must_be_even() && self.imm % 2 != 0 {
            return Err(FormatViolation::ImmMisaligned {
                mnemonic: self.mnemonic,
                imm: self.imm,
            });
        }
        if !f.has_rd() && !self.rd.is_zero() {
            return Err(FormatViolation::UnusedOperand {
                mnemonic: self.mnemonic,
                field: "rd",
            });
        }
        if !f.has_rs1() && !self.rs1.is_zero() {
            return Err(FormatViolation::UnusedOperand {
                mnemonic: self.mnemonic,
                field: "rs1",
            });
        }
        if !f.has_rs2() && !self.rs2.is_zero() {
            return Err(FormatViolation::UnusedOperand {
                mnemonic: self.mnemonic,
                field: "rs2",
            });
        }
        if !f.has_imm() && self.imm != 0 {
            return Err(FormatViolation::UnusedOperand {
                mnemonic: self.mnemonic,
                field: "imm",
            });
        }
        Ok(())
    }

    /// Shorthand for register-register instructions.
    pub fn rtype(m: Mnemonic, rd: Register, rs1: Register, rs2: Register) -> Instruction {
        debug_assert_eq!(m.format(), Format::R);
        Instruction {
            mnemonic: m,
            rd,
            rs1,
            rs2,
            imm: 0,
        }
    }

    /// Shorthand for rd/rs1/imm instructions (I, shifts, loads).
    pub fn itype(m: Mnemonic, rd: Register, rs1: Register, imm: i32) -> Instruction {
        Instruction {
            mnemonic: m,
            rd,
            rs1,
            rs2: Register::X0,
            imm,
        }
    }

    /// Shorthand for stores: rs1 is the base address, rs2 the source.
    pub fn stype(m: Mnemonic, rs1: Register, rs2: Register, imm: i32) -> Instruction {
        Instruction {
            mnemonic: m,
            rd: Register::X0,
            rs1,
            rs2,
            imm,
        }
    }

    /// Shorthand for branches.
    pub fn btype(m: Mnemonic, rs1: Register, rs2: Register, imm: i32) -> Instruction {
        Instruction {
            mnemonic: m,
            rd: Register::X0,
            rs1,
            rs2,
            imm,
        }
    }

    /// Shorthand for LUI/AUIPC/JAL.
    pub fn utype(m: Mnemonic, rd: Register, imm: i32) -> Instruction {
        Instruction {
            mnemonic: m,
            rd,
            rs1: Register::X0,
            rs2: Register::X0,
            imm,
        }
    }

    /// Shorthand for the no-operand instructions.
    pub fn bare(m: Mnemonic) -> Instruction {
        debug_assert_eq!(m.format(), Format::None);
        Instruction {
            mnemonic: m,
            rd: Register::X0,
            rs1: Register::X0,
            rs2: Register::X0,
            imm: 0,
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fm = self.mnemonic.format();
        write!(f, "{}", self.mnemonic)?;
        let mut sep = " ";
        if fm.has_rd() {
            write!(f, "{sep}{}", self.rd)?;
            sep = ", ";
        }
        if fm.has_rs1() {
            write!(f, "{sep}{}", self.rs1)?;
            sep = ", ";
        }
        if fm.has_rs2() {
            write!(f, "{sep}{}", self.rs2)?;
            sep = ", ";
        }
        if fm.has_imm() {
            write!(f, "{sep}{}", self.imm)?;
        }
        Ok(())
    }
}

/// A raw 32-bit instruction word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EncodedWord(pub u32);

impl EncodedWord {
    pub fn bits(self) -> u32 {
        self.0
    }
}

impl From<u32> for EncodedWord {
    fn from(bits: u32) -> Self {
        EncodedWord(bits)
    }
}

impl fmt::Display for EncodedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:08x}", self.0)
    }
}

/// Per-word outcome in a [`DisasmReport`] listing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisasmEntry {
    Valid(Instruction),
    Illegal(EncodedWord),
}

/// Result of disassembling a whole program: the reward agent's view.
#[derive(Debug, Clone, PartialEq)]
pub struct DisasmReport {
    pub total: usize,
    pub valid: usize,
    pub invalid: usize,
    pub listing: Vec<DisasmEntry>,
}

/// Disassemble a sequence of words, counting every word exactly once.
pub fn disassemble_program(words: &[EncodedWord]) -> DisasmReport {
    let mut valid = 0;
    let mut invalid = 0;
    let listing = words
        .iter()
        .map(|&w| match decode(w) {
            DecodeResult::Valid(i) => {
                valid += 1;
                DisasmEntry::Valid(i)
            }
            DecodeResult::Illegal => {
                invalid += 1;
                DisasmEntry::Illegal(w)
            }
        })
        .collect();
    DisasmReport {
        total: words.len(),
        valid,
        invalid,
        listing,
    }
}

/// Pack a program into the little-endian binary format.
pub fn words_to_bytes(words: &[EncodedWord]) -> Vec<u8> {
    let mut out = Vec::with_capacity(words.len() * 4);
    for w in words {
        out.extend_from_slice(&w.0.to_le_bytes());
    }
    out
}

/// Read a program back from little-endian bytes. Trailing bytes that do
/// not fill a word are rejected.
pub fn bytes_to_words(bytes: &[u8]) -> Option<Vec<EncodedWord>> {
    if bytes.len() % 4 != 0 {
        return None;
    }
    Some(
        bytes
            .chunks_exact(4)
            .map(|c| EncodedWord(u32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect(),
    )
}

#[cfg(test)]
mod tests;
