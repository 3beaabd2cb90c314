//! Synthetic training-set generator. Emits function-body-shaped
//! samples: a register is seeded first, most later instructions read a
//! register written earlier in the same sample, and branches/jumps
//! target forward in-sample offsets. Samples are training text only
//! and are never executed here.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::isa::{Instruction, Mnemonic, Register};

use super::{CorpusSample, SampleSource};

/// Version tag recorded in dataset manifests.
pub const GENERATOR_VERSION: &str = "synth-v1";

/// Shortest / longest sample, in instructions.
pub const MIN_LEN: usize = 4;
pub const MAX_LEN: usize = 32;

/// Generate `n` samples. Sample `i` draws from an independent,
/// documented RNG stream: `ChaCha8Rng::seed_from_u64(seed)` with
/// `set_stream(i)`, so results are identical regardless of thread
/// count or generation order.
pub fn synth_generate(n: usize, seed: u64) -> Vec<CorpusSample> {
    assert!(n > 0, "sample count must be positive");
    (0..n)
        .into_par_iter()
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index as u64);
            CorpusSample {
                instrs: gen_sample(&mut rng),
                source: SampleSource::Synthetic,
            }
        })
        .collect()
}

/// Fraction of instructions (over all samples) that read at least one
/// register previously written in the same sample.
pub fn def_use_ratio(samples: &[CorpusSample]) -> f64 {
    let mut total = 0usize;
    let mut uses = 0usize;
    for s in samples {
        let mut written = [false; 32];
        for i in &s.instrs {
            let f = i.mnemonic.format();
            let reads_written = (f.has_rs1() && written[i.rs1.index() as usize])
                || (f.has_rs2() && written[i.rs2.index() as usize]);
            if reads_written {
                uses += 1;
            }
            if f.has_rd() && !i.rd.is_zero() {
                written[i.rd.index() as usize] = true;
            }
            total += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        uses as f64 / total as f64
    }
}

fn gen_sample(rng: &mut ChaCha8Rng) -> Vec<Instruction> {
    let len = rng.gen_range(MIN_LEN..=MAX_LEN);
    let mut out: Vec<Instruction> = Vec::with_capacity(len);
    let mut written: Vec<Register> = Vec::new();

    out.push(seed_write(rng, &mut written));
    while out.len() < len {
        // Forward room for control flow: indices after this one.
        let room = len - out.len() - 1;
        let roll: f64 = rng.gen();
        if roll < 0.08 && len - out.len() >= 3 {
            emit_idiom(rng, &mut out, &mut written);
        } else if roll < 0.93 {
            out.push(dependent(rng, &mut written, room));
        } else {
            out.push(independent(rng, &mut written, room));
        }
    }
    debug_assert_eq!(out.len(), len);
    out
}

fn any_reg(rng: &mut ChaCha8Rng) -> Register {
    Register::new(rng.gen_range(1..=15)).unwrap()
}

fn pick(written: &[Register], rng: &mut ChaCha8Rng) -> Register {
    written[rng.gen_range(0..written.len())]
}

/// Choose a destination and record it as written. Sources for the
/// same instruction must be drawn before calling this.
fn dest(rng: &mut ChaCha8Rng, written: &mut Vec<Register>) -> Register {
    let r = any_reg(rng);
    if !written.contains(&r) {
        written.push(r);
    }
    r
}

/// An in-range immediate biased toward boundary and alignment classes.
fn interesting_imm(rng: &mut ChaCha8Rng, m: Mnemonic) -> i32 {
    let f = m.format();
    let (lo, hi) = f.imm_range();
    let candidates = [
        lo,
        hi,
        0,
        1,
        -1,
        4,
        -4,
        8,
        15,
        -15,
        16,
        30,
        64,
        -64,
        255,
        -255,
        258,
        1024,
        rng.gen_range(lo..=hi),
    ];
    for _ in 0..16 {
        let v = candidates[rng.gen_range(0..candidates.len())];
        if v >= lo && v <= hi && !(f.imm_must_be_even() && v % 2 != 0) {
            return v;
        }
    }
    0
}

/// An instruction that writes a register without reading one.
fn seed_write(rng: &mut ChaCha8Rng, written: &mut Vec<Register>) -> Instruction {
    match rng.gen_range(0..4) {
        0 | 1 => {
            let imm = interesting_imm(rng, Mnemonic::Addi);
            let rd = dest(rng, written);
            Instruction::itype(Mnemonic::Addi, rd, Register::X0, imm)
        }
        2 => {
            const UPPERS: [i32; 5] = [1, 16, 0x12345, 524287, -524288];
            let imm = UPPERS[rng.gen_range(0..UPPERS.len())];
            let rd = dest(rng, written);
            Instruction::utype(Mnemonic::Lui, rd, imm)
        }
        _ => {
            let rd = dest(rng, written);
            Instruction::utype(Mnemonic::Auipc, rd, rng.gen_range(0..16))
        }
    }
}

/// An instruction reading at least one previously written register.
fn dependent(
    rng: &mut ChaCha8Rng,
    written: &mut Vec<Register>,
    room: usize,
) -> Instruction {
    const ALU_R: [Mnemonic; 10] = [
        Mnemonic::Add,
        Mnemonic::Sub,
        Mnemonic::Sll,
        Mnemonic::Slt,
        Mnemonic::Sltu,
        Mnemonic::Xor,
        Mnemonic::Srl,
        Mnemonic::Sra,
        Mnemonic::Or,
        Mnemonic::And,
    ];
    const ALU_I: [Mnemonic; 6] = [
        Mnemonic::Addi,
        Mnemonic::Slti,
        Mnemonic::Sltiu,
        Mnemonic::Xori,
        Mnemonic::Ori,
        Mnemonic::Andi,
    ];
    const SHIFTS: [Mnemonic; 3] = [Mnemonic::Slli, Mnemonic::Srli, Mnemonic::Srai];
    const LOADS: [Mnemonic; 5] = [
        Mnemonic::Lb,
        Mnemonic::Lh,
        Mnemonic::Lw,
        Mnemonic::Lbu,
        Mnemonic::Lhu,
    ];
    const STORES: [Mnemonic; 3] = [Mnemonic::Sb, Mnemonic::Sh, Mnemonic::Sw];
    const MULDIV: [Mnemonic; 8] = [
        Mnemonic::Mul,
        Mnemonic::Mulh,
        Mnemonic::Mulhsu,
        Mnemonic::Mulhu,
        Mnemonic::Div,
        Mnemonic::Divu,
        Mnemonic::Rem,
        Mnemonic::Remu,
    ];
    const BRANCHES: [Mnemonic; 6] = [
        Mnemonic::Beq,
        Mnemonic::Bne,
        Mnemonic::Blt,
        Mnemonic::Bge,
        Mnemonic::Bltu,
        Mnemonic::Bgeu,
    ];

    loop {
        match rng.gen_range(0..16) {
            0..=4 => {
                let m = ALU_R[rng.gen_range(0..ALU_R.len())];
                let rs1 = pick(written, rng);
                let rs2 = if rng.gen_bool(0.7) {
                    pick(written, rng)
                } else {
                    any_reg(rng)
                };
                let rd = dest(rng, written);
                return Instruction::rtype(m, rd, rs1, rs2);
            }
            5..=8 => {
                let m = ALU_I[rng.gen_range(0..ALU_I.len())];
                let imm = interesting_imm(rng, m);
                let rs1 = pick(written, rng);
                let rd = dest(rng, written);
                return Instruction::itype(m, rd, rs1, imm);
            }
            9 => {
                let m = SHIFTS[rng.gen_range(0..SHIFTS.len())];
                let rs1 = pick(written, rng);
                let rd = dest(rng, written);
                return Instruction::itype(m, rd, rs1, rng.gen_range(0..32));
            }
            10 => {
                let m = LOADS[rng.gen_range(0..LOADS.len())];
                let rs1 = pick(written, rng);
                let rd = dest(rng, written);
                return Instruction::itype(m, rd, rs1, 4 * rng.gen_range(0..8));
            }
            11 => {
                let m = STORES[rng.gen_range(0..STORES.len())];
                let rs1 = pick(written, rng);
                let rs2 = pick(written, rng);
                return Instruction::stype(m, rs1, rs2, 4 * rng.gen_range(0..8));
            }
            12 | 13 => {
                let m = MULDIV[rng.gen_range(0..MULDIV.len())];
                let rs1 = pick(written, rng);
                // Occasionally divide by the zero register.
                let rs2 = if m.is_muldiv() && rng.gen_bool(0.15) {
                    Register::X0
                } else {
                    pick(written, rng)
                };
                let rd = dest(rng, written);
                return Instruction::rtype(m, rd, rs1, rs2);
            }
            14 if room >= 1 => {
                let m = BRANCHES[rng.gen_range(0..BRANCHES.len())];
                let rs1 = pick(written, rng);
                let rs2 = if rng.gen_bool(0.5) {
                    pick(written, rng)
                } else {
                    Register::X0
                };
                let target = 4 * rng.gen_range(1..=room as i32);
                return Instruction::btype(m, rs1, rs2, target);
            }
            15 => {
                let rs1 = pick(written, rng);
                return Instruction::itype(Mnemonic::Jalr, Register::X0, rs1, 0);
            }
            _ => continue,
        }
    }
}

/// An instruction with no in-sample register dependence.
fn independent(
    rng: &mut ChaCha8Rng,
    written: &mut Vec<Register>,
    room: usize,
) -> Instruction {
    match rng.gen_range(0..8) {
        0..=3 => seed_write(rng, written),
        4 if room >= 1 => {
            let link = if rng.gen_bool(0.5) {
                Register::X0
            } else {
                dest(rng, written)
            };
            let target = 4 * rng.gen_range(1..=room as i32);
            Instruction::utype(Mnemonic::Jal, link, target)
        }
        5 => Instruction::bare(Mnemonic::Fence),
        6 => Instruction::bare(Mnemonic::Ecall),
        _ => seed_write(rng, written),
    }
}

/// Short multi-instruction patterns: division-overflow setup and
/// store-then-fence.i. Appends 3 instructions.
fn emit_idiom(
    rng: &mut ChaCha8Rng,
    out: &mut Vec<Instruction>,
    written: &mut Vec<Register>,
) {
    if rng.gen_bool(0.5) {
        // i32::MIN / -1 overflow pattern.
        let a = dest(rng, written);
        out.push(Instruction::utype(Mnemonic::Lui, a, -524288));
        let b = dest(rng, written);
        out.push(Instruction::itype(Mnemonic::Addi, b, Register::X0, -1));
        let m = if rng.gen_bool(0.5) {
            Mnemonic::Div
        } else {
            Mnemonic::Rem
        };
        let rd = dest(rng, written);
        out.push(Instruction::rtype(m, rd, a, b));
    } else {
        // Store near a known address, then an instruction fence.
        let addr = pick(written, rng);
        let val = pick(written, rng);
        out.push(Instruction::stype(Mnemonic::Sw, addr, val, 4 * rng.gen_range(0..8)));
        out.push(Instruction::bare(Mnemonic::FenceI));
        let rs1 = pick(written, rng);
        let rd = dest(rng, written);
        out.push(Instruction::itype(Mnemonic::Addi, rd, rs1, 1));
    }
}
