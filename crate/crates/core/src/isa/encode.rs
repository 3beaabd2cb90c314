use super::{EncodedWord, Format, FormatViolation, Instruction, Mnemonic};

const OPC_LUI: u32 = 0b0110111;
const OPC_AUIPC: u32 = 0b0010111;
const OPC_JAL: u32 = 0b1101111;
const OPC_JALR: u32 = 0b1100111;
const OPC_BRANCH: u32 = 0b1100011;
const OPC_LOAD: u32 = 0b0000011;
const OPC_STORE: u32 = 0b0100011;
const OPC_OP_IMM: u32 = 0b0010011;
const OPC_OP: u32 = 0b0110011;
const OPC_MISC_MEM: u32 = 0b0001111;
const OPC_SYSTEM: u32 = 0b1110011;

/// FENCE with pred=iorw, succ=iorw and all other fields zero; the only
/// fence encoding the subset admits.
pub(super) const FENCE_WORD: u32 = 0x0ff0000f;
pub(super) const FENCE_I_WORD: u32 = 0x0000100f;
pub(super) const ECALL_WORD: u32 = 0x00000073;
pub(super) const EBREAK_WORD: u32 = 0x00100073;

/// (opcode, funct3, funct7) triple for each mnemonic; fields that the
/// format does not encode are zero.
pub(super) fn opcode_fields(m: Mnemonic) -> (u32, u32, u32) {
    use Mnemonic::*;
    match m {
        Lui => (OPC_LUI, 0, 0),
        Auipc => (OPC_AUIPC, 0, 0),
        Jal => (OPC_JAL, 0, 0),
        Jalr => (OPC_JALR, 0b000, 0),
        Beq => (OPC_BRANCH, 0b000, 0),
        Bne => (OPC_BRANCH, 0b001, 0),
        Blt => (OPC_BRANCH, 0b100, 0),
        Bge => (OPC_BRANCH, 0b101, 0),
        Bltu => (OPC_BRANCH, 0b110, 0),
        Bgeu => (OPC_BRANCH, 0b111, 0),
        Lb => (OPC_LOAD, 0b000, 0),
        Lh => (OPC_LOAD, 0b001, 0),
        Lw => (OPC_LOAD, 0b010, 0),
        Lbu => (OPC_LOAD, 0b100, 0),
        Lhu => (OPC_LOAD, 0b101, 0),
        Sb => (OPC_STORE, 0b000, 0),
        Sh => (OPC_STORE, 0b001, 0),
        Sw => (OPC_STORE, 0b010, 0),
        Addi => (OPC_OP_IMM, 0b000, 0),
        Slti => (OPC_OP_IMM, 0b010, 0),
        Sltiu => (OPC_OP_IMM, 0b011, 0),
        Xori => (OPC_OP_IMM, 0b100, 0),
        Ori => (OPC_OP_IMM, 0b110, 0),
        Andi => (OPC_OP_IMM, 0b111, 0),
        Slli => (OPC_OP_IMM, 0b001, 0b0000000),
        Srli => (OPC_OP_IMM, 0b101, 0b0000000),
        Srai => (OPC_OP_IMM, 0b101, 0b0100000),
        Add => (OPC_OP, 0b000, 0b0000000),
        Sub => (OPC_OP, 0b000, 0b0100000),
        Sll => (OPC_OP, 0b001, 0b0000000),
        Slt => (OPC_OP, 0b010, 0b0000000),
        Sltu => (OPC_OP, 0b011, 0b0000000),
        Xor => (OPC_OP, 0b100, 0b0000000),
        Srl => (OPC_OP, 0b101, 0b0000000),
        Sra => (OPC_OP, 0b101, 0b0100000),
        Or => (OPC_OP, 0b110, 0b0000000),
        And => (OPC_OP, 0b111, 0b0000000),
        Fence => (OPC_MISC_MEM, 0b000, 0),
        FenceI => (OPC_MISC_MEM, 0b001, 0),
        Ecall => (OPC_SYSTEM, 0b000, 0),
        Ebreak => (OPC_SYSTEM, 0b000, 0),
        Mul => (OPC_OP, 0b000, 0b0000001),
        Mulh => (OPC_OP, 0b001, 0b0000001),
        Mulhsu => (OPC_OP, 0b010, 0b0000001),
        Mulhu => (OPC_OP, 0b011, 0b0000001),
        Div => (OPC_OP, 0b100, 0b0000001),
        Divu => (OPC_OP, 0b101, 0b0000001),
        Rem => (OPC_OP, 0b110, 0b0000001),
        Remu => (OPC_OP, 0b111, 0b0000001),
    }
}

/// Encode an instruction into its unique 32-bit word.
///
/// Out-of-range or misaligned immediates are rejected rather than
/// truncated, so a successful encode always round-trips through
/// [`super::decode`].
pub fn encode(instr: &Instruction) -> Result<EncodedWord, FormatViolation> {
    instr.validate()?;
    let (opcode, funct3, funct7) = opcode_fields(instr.mnemonic);
    let rd = instr.rd.index() as u32;
    let rs1 = instr.rs1.index() as u32;
    let rs2 = instr.rs2.index() as u32;
    let imm = instr.imm;

    let word = match instr.mnemonic.format() {
        Format::R => (funct7 << 25) | (rs2 << 20) | (rs1 << 15) | (funct3 << 12) | (rd << 7) | opcode,
        Format::I | Format::ILoad => {
            let imm12 = (imm as u32) & 0xfff;
            (imm12 << 20) | (rs1 << 15) | (funct3 << 12) | (rd << 7) | opcode
        }
        Format::IShift => {
            let shamt = (imm as u32) & 0x1f;
            (funct7 << 25) | (shamt << 20) | (rs1 << 15) | (funct3 << 12) | (rd << 7) | opcode
        }
        Format::S => {
            let imm12 = (imm as u32) & 0xfff;
            let hi = imm12 >> 5;
            let lo = imm12 & 0x1f;
            (hi << 25) | (rs2 << 20) | (rs1 << 15) | (funct3 << 12) | (lo << 7) | opcode
        }
        Format::B => {
            let imm13 = (imm as u32) & 0x1fff;
            let b12 = (imm13 >> 12) & 1;
            let b11 = (imm13 >> 11) & 1;
            let b10_5 = (imm13 >> 5) & 0x3f;
            let b4_1 = (imm13 >> 1) & 0xf;
            (b12 << 31)
                | (b10_5 << 25)
                | (rs2 << 20)
                | (rs1 << 15)
                | (funct3 << 12)
                | (b4_1 << 8)
                | (b11 << 7)
                | opcode
        }
        Format::U => {
            let imm20 = (imm as u32) & 0xfffff;
            (imm20 << 12) | (rd << 7) | opcode
        }
        Format::J => {
            let imm21 = (imm as u32) & 0x1fffff;
            let b20 = (imm21 >> 20) & 1;
            let b19_12 = (imm21 >> 12) & 0xff;
            let b11 = (imm21 >> 11) & 1;
            let b10_1 = (imm21 >> 1) & 0x3ff;
            (b20 << 31) | (b10_1 << 21) | (b11 << 20) | (b19_12 << 12) | (rd << 7) | opcode
        }
        Format::None => match instr.mnemonic {
            Mnemonic::Fence => FENCE_WORD,
            Mnemonic::FenceI => FENCE_I_WORD,
            Mnemonic::Ecall => ECALL_WORD,
            Mnemonic::Ebreak => EBREAK_WORD,
            _ => unreachable!(),
        },
    };
    Ok(EncodedWord(word))
}
