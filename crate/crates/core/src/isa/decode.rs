use super::encode::{EBREAK_WORD, ECALL_WORD, FENCE_I_WORD, FENCE_WORD};
use super::{EncodedWord, Instruction, Mnemonic, Register};

/// Outcome of decoding one word. An illegal word is a value, not a
/// fault: the disassembler scores generated programs and must never
/// abort on garbage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeResult {
    Valid(Instruction),
    Illegal,
}

impl DecodeResult {
    pub fn ok(self) -> Option<Instruction> {
        match self {
            DecodeResult::Valid(i) => Some(i),
            DecodeResult::Illegal => None,
        }
    }
}

fn sext(value: u32, bits: u32) -> i32 {
    let shift = 32 - bits;
    ((value << shift) as i32) >> shift
}

fn i_imm(w: u32) -> i32 {
    sext(w >> 20, 12)
}

fn s_imm(w: u32) -> i32 {
    sext(((w >> 25) << 5) | ((w >> 7) & 0x1f), 12)
}

fn b_imm(w: u32) -> i32 {
    let b12 = (w >> 31) & 1;
    let b11 = (w >> 7) & 1;
    let b10_5 = (w >> 25) & 0x3f;
    let b4_1 = (w >> 8) & 0xf;
    sext((b12 << 12) | (b11 << 11) | (b10_5 << 5) | (b4_1 << 1), 13)
}

fn u_imm(w: u32) -> i32 {
    sext(w >> 12, 20)
}

fn j_imm(w: u32) -> i32 {
    let b20 = (w >> 31) & 1;
    let b19_12 = (w >> 12) & 0xff;
    let b11 = (w >> 20) & 1;
    let b10_1 = (w >> 21) & 0x3ff;
    sext((b20 << 20) | (b19_12 << 12) | (b11 << 11) | (b10_1 << 1), 21)
}

/// Decode a word to the unique subset instruction it encodes, or report
/// it illegal. Encodings outside the subset (AMO, CSR, compressed,
/// non-canonical fences, system words other than ECALL/EBREAK) are all
/// illegal here even where the full ISA assigns them a meaning.
pub fn decode(word: EncodedWord) -> DecodeResult {
    use Mnemonic::*;
    let w = word.bits();
    let opcode = w & 0x7f;
    let rd = Register::from_bits(w >> 7);
    let funct3 = (w >> 12) & 0x7;
    let rs1 = Register::from_bits(w >> 15);
    let rs2 = Register::from_bits(w >> 20);
    let funct7 = w >> 25;

    let instr = match opcode {
        0b0110111 => Instruction::utype(Lui, rd, u_imm(w)),
        0b0010111 => Instruction::utype(Auipc, rd, u_imm(w)),
        0b1101111 => Instruction::utype(Jal, rd, j_imm(w)),
        0b1100111 => {
            if funct3 != 0 {
                return DecodeResult::Illegal;
            }
            Instruction::itype(Jalr, rd, rs1, i_imm(w))
        }
        0b1100011 => {
            let m = match funct3 {
                0b000 => Beq,
                0b001 => Bne,
                0b100 => Blt,
                0b101 => Bge,
                0b110 => Bltu,
                0b111 => Bgeu,
                _ => return DecodeResult::Illegal,
            };
            Instruction::btype(m, rs1, rs2, b_imm(w))
        }
        0b0000011 => {
            let m = match funct3 {
                0b000 => Lb,
                0b001 => Lh,
                0b010 => Lw,
                0b100 => Lbu,
                0b101 => Lhu,
                _ => return DecodeResult::Illegal,
            };
            Instruction::itype(m, rd, rs1, i_imm(w))
        }
        0b0100011 => {
            let m = match funct3 {
                0b000 => Sb,
                0b001 => Sh,
                0b010 => Sw,
                _ => return DecodeResult::Illegal,
            };
            Instruction::stype(m, rs1, rs2, s_imm(w))
        }
        0b0010011 => match funct3 {
            0b000 => Instruction::itype(Addi, rd, rs1, i_imm(w)),
            0b010 => Instruction::itype(Slti, rd, rs1, i_imm(w)),
            0b011 => Instruction::itype(Sltiu, rd, rs1, i_imm(w)),
            0b100 => Instruction::itype(Xori, rd, rs1, i_imm(w)),
            0b110 => Instruction::itype(Ori, rd, rs1, i_imm(w)),
            0b111 => Instruction::itype(Andi, rd, rs1, i_imm(w)),
            0b001 => {
                if funct7 != 0 {
                    return DecodeResult::Illegal;
                }
                Instruction::itype(Slli, rd, rs1, rs2.index() as i32)
            }
            0b101 => match funct7 {
                0b0000000 => Instruction::itype(Srli, rd, rs1, rs2.index() as i32),
                0b0100000 => Instruction::itype(Srai, rd, rs1, rs2.index() as i32),
                _ => return DecodeResult::Illegal,
            },
            _ => unreachable!(),
        },
        0b0110011 => {
            let m = match (funct7, funct3) {
                (0b0000000, 0b000) => Add,
                (0b0100000, 0b000) => Sub,
                (0b0000000, 0b001) => Sll,
                (0b0000000, 0b010) => Slt,
                (0b0000000, 0b011) => Sltu,
                (0b0000000, 0b100) => Xor,
                (0b0000000, 0b101) => Srl,
                (0b0100000, 0b101) => Sra,
                (0b0000000, 0b110) => Or,
                (0b0000000, 0b111) => And,
                (0b0000001, 0b000) => Mul,
                (0b0000001, 0b001) => Mulh,
                (0b0000001, 0b010) => Mulhsu,
                (0b0000001, 0b011) => Mulhu,
                (0b0000001, 0b100) => Div,
                (0b0000001, 0b101) => Divu,
                (0b0000001, 0b110) => Rem,
                (0b0000001, 0b111) => Remu,
                _ => return DecodeResult::Illegal,
            };
            Instruction::rtype(m, rd, rs1, rs2)
        }
        0b0001111 => match w {
            FENCE_WORD => Instruction::bare(Fence),
            FENCE_I_WORD => Instruction::bare(FenceI),
            _ => return DecodeResult::Illegal,
        },
        0b1110011 => match w {
            ECALL_WORD => Instruction::bare(Ecall),
            EBREAK_WORD => Instruction::bare(Ebreak),
            _ => return DecodeResult::Illegal,
        },
        _ => return DecodeResult::Illegal,
    };
    DecodeResult::Valid(instr)
}
