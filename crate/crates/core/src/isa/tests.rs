//! Unit tests for the instruction set layer. The encoding oracle values
//! below were computed by hand from the base ISA bit layouts and are
//! frozen: a change that breaks one of them is a change to the encoder's
//! observable behavior, not a refactor.

use super::*;
use proptest::prelude::*;

fn reg(i: u8) -> Register {
    Register::new(i).unwrap()
}

mod encode_oracle {
    use super::*;

    #[test]
    fn hand_assembled_words() {
        let cases: &[(Instruction, u32)] = &[
            (
                Instruction::rtype(Mnemonic::Add, Register::X0, Register::X0, Register::X0),
                0x0000_0033,
            ),
            (
                Instruction::itype(Mnemonic::Addi, reg(1), Register::X0, 1),
                0x0010_0093,
            ),
            (
                Instruction::itype(Mnemonic::Lw, reg(4), reg(2), 16),
                0x0101_2203,
            ),
            (
                Instruction::stype(Mnemonic::Sw, reg(2), reg(7), -4),
                0xfe71_2e23,
            ),
            (
                Instruction::btype(Mnemonic::Beq, Register::X0, Register::X0, -4),
                0xfe00_0ee3,
            ),
            (Instruction::utype(Mnemonic::Jal, Register::X0, -4), 0xffdf_f06f),
            (
                Instruction::utype(Mnemonic::Lui, reg(5), 0x12345),
                0x1234_52b7,
            ),
            (Instruction::utype(Mnemonic::Auipc, reg(2), 1), 0x0000_1117),
            (
                Instruction::itype(Mnemonic::Jalr, reg(1), reg(5), 0),
                0x0002_80e7,
            ),
            (
                Instruction::itype(Mnemonic::Srai, reg(1), reg(2), 4),
                0x4041_5093,
            ),
            (
                Instruction::rtype(Mnemonic::Mul, reg(1), reg(2), reg(3)),
                0x0231_00b3,
            ),
            (Instruction::bare(Mnemonic::Fence), 0x0ff0_000f),
            (Instruction::bare(Mnemonic::FenceI), 0x0000_100f),
            (Instruction::bare(Mnemonic::Ecall), 0x0000_0073),
            (Instruction::bare(Mnemonic::Ebreak), 0x0010_0073),
        ];
        for (instr, word) in cases {
            assert_eq!(
                encode(instr).unwrap(),
                EncodedWord(*word),
                "encoding of `{instr}`"
            );
            assert_eq!(
                decode(EncodedWord(*word)),
                DecodeResult::Valid(*instr),
                "decoding of {word:#010x}"
            );
        }
    }

    #[test]
    fn out_of_range_immediates_rejected() {
        assert!(Instruction::new(Mnemonic::Addi, reg(1), reg(2), Register::X0, 2048).is_err());
        assert!(Instruction::new(Mnemonic::Addi, reg(1), reg(2), Register::X0, -2049).is_err());
        assert!(Instruction::new(Mnemonic::Slli, reg(1), reg(2), Register::X0, 32).is_err());
        assert!(Instruction::new(Mnemonic::Slli, reg(1), reg(2), Register::X0, -1).is_err());
        assert!(Instruction::new(Mnemonic::Beq, Register::X0, reg(1), reg(2), 4096).is_err());
        assert!(Instruction::new(Mnemonic::Jal, reg(1), Register::X0, Register::X0, 1048576).is_err());
    }

    #[test]
    fn odd_branch_and_jump_offsets_rejected() {
        assert!(Instruction::new(Mnemonic::Beq, Register::X0, reg(1), reg(2), 3).is_err());
        assert!(Instruction::new(Mnemonic::Jal, reg(1), Register::X0, Register::X0, 7).is_err());
    }

    #[test]
    fn new_canonicalizes_unused_fields() {
        let i = Instruction::new(Mnemonic::Lui, reg(3), reg(9), reg(9), 55).unwrap();
        assert_eq!(i.rs1, Register::X0);
        assert_eq!(i.rs2, Register::X0);
        let i = Instruction::new(Mnemonic::Ecall, reg(9), reg(9), reg(9), 0).unwrap();
        assert_eq!(i, Instruction::bare(Mnemonic::Ecall));
    }

    #[test]
    fn validate_rejects_noncanonical_fields() {
        let mut i = Instruction::bare(Mnemonic::Ecall);
        i.rd = reg(1);
        assert!(i.validate().is_err());
        let mut i = Instruction::utype(Mnemonic::Lui, reg(1), 0);
        i.rs1 = reg(2);
        assert!(i.validate().is_err());
    }
}

mod decode_strictness {
    use super::*;

    #[test]
    fn reserved_words_are_illegal() {
        let illegal: &[u32] = &[
            0x0000_0000, // all zeros
            0xffff_ffff, // all ones
            0x0000_1067, // JALR with funct3 = 1
            0x0400_0033, // OP with funct7 = 0b0000010
            0x4000_1013, // SLLI with funct7 = 0b0100000
            0x2000_5013, // SRLI/SRAI with funct7 = 0b0010000
            0x0000_000f, // FENCE with empty pred/succ sets
            0x0000_300f, // MISC-MEM with funct3 = 3
            0x0000_3003, // load funct3 = 3 (64-bit LD)
            0x0000_2063, // branch funct3 = 2
            0x0000_3023, // store funct3 = 3 (64-bit SD)
            0x0020_0073, // SYSTEM with imm = 2
            0x0010_0173, // EBREAK bits with rd = 2
            0x0000_0057, // unassigned major opcode
        ];
        for &w in illegal {
            assert_eq!(
                decode(EncodedWord(w)),
                DecodeResult::Illegal,
                "{w:#010x} should be illegal"
            );
        }
    }

    #[test]
    fn nop_is_valid_addi() {
        assert_eq!(
            decode(EncodedWord(0x0000_0013)),
            DecodeResult::Valid(Instruction::itype(Mnemonic::Addi, Register::X0, Register::X0, 0))
        );
    }

    #[test]
    fn decode_is_deterministic() {
        for &w in &[0x0000_0033u32, 0xdead_beef, 0x0230_45b3] {
            assert_eq!(decode(EncodedWord(w)), decode(EncodedWord(w)));
        }
    }
}

mod roundtrip {
    use super::*;

    /// Boundary operand sweep: every mnemonic with its immediate at the
    /// limits of its range and registers at both ends of the file.
    #[test]
    fn boundary_sweep() {
        let mut checked = 0;
        for &m in Mnemonic::ALL {
            let f = m.format();
            let (lo, hi) = f.imm_range();
            let imms = if f.has_imm() { vec![lo, 0, hi] } else { vec![0] };
            let regsets = [
                (Register::X0, Register::X0, Register::X0),
                (reg(1), reg(2), reg(3)),
                (reg(31), reg(31), reg(31)),
            ];
            for &imm in &imms {
                for &(rd, rs1, rs2) in &regsets {
                    let instr = Instruction::new(m, rd, rs1, rs2, imm).unwrap();
                    let word = encode(&instr).unwrap();
                    assert_eq!(
                        decode(word),
                        DecodeResult::Valid(instr),
                        "round-trip of `{instr}` ({word})"
                    );
                    checked += 1;
                }
            }
        }
        assert!(checked > 300, "sweep unexpectedly small: {checked}");
    }
}

mod report {
    use super::*;

    #[test]
    fn partition_counts_every_word_once() {
        let words = vec![
            EncodedWord(0x0000_0033), // valid
            EncodedWord(0x0000_0000), // illegal
            EncodedWord(0x0010_0093), // valid
            EncodedWord(0xffff_ffff), // illegal
            EncodedWord(0x0000_0073), // valid
        ];
        let r = disassemble_program(&words);
        assert_eq!(r.total, 5);
        assert_eq!(r.valid, 3);
        assert_eq!(r.invalid, 2);
        assert_eq!(r.valid + r.invalid, r.total);
        assert_eq!(r.listing.len(), r.total);
        let listed_valid = r
            .listing
            .iter()
            .filter(|e| matches!(e, DisasmEntry::Valid(_)))
            .count();
        assert_eq!(listed_valid, r.valid);
    }

    #[test]
    fn empty_program() {
        let r = disassemble_program(&[]);
        assert_eq!((r.total, r.valid, r.invalid), (0, 0, 0));
        assert!(r.listing.is_empty());
    }

    #[test]
    fn byte_roundtrip_little_endian() {
        let words = vec![EncodedWord(0x0010_0093), EncodedWord(0xdead_beef)];
        let bytes = words_to_bytes(&words);
        assert_eq!(bytes[..4], [0x93, 0x00, 0x10, 0x00]);
        assert_eq!(bytes_to_words(&bytes).unwrap(), words);
        assert!(bytes_to_words(&bytes[..5]).is_none());
    }
}

fn arb_instruction() -> impl Strategy<Value = Instruction> {
    (0..Mnemonic::ALL.len()).prop_flat_map(|mi| {
        let m = Mnemonic::ALL[mi];
        let (lo, hi) = m.format().imm_range();
        (lo..=hi, 0u8..32, 0u8..32, 0u8..32).prop_map(move |(imm, rd, rs1, rs2)| {
            let imm = if m.format().imm_must_be_even() {
                imm & !1
            } else {
                imm
            };
            Instruction::new(m, reg(rd), reg(rs1), reg(rs2), imm).unwrap()
        })
    })
}

proptest! {
    /// Every well-formed instruction survives encode/decode unchanged.
    #[test]
    fn prop_encode_decode_identity(instr in arb_instruction()) {
        let word = encode(&instr).unwrap();
        prop_assert_eq!(decode(word), DecodeResult::Valid(instr));
    }

    /// Strict decode accepts only canonical encodings, so re-encoding a
    /// decoded word must reproduce it bit for bit.
    #[test]
    fn prop_decode_encode_canonical(bits in any::<u32>()) {
        if let DecodeResult::Valid(instr) = decode(EncodedWord(bits)) {
            prop_assert_eq!(encode(&instr).unwrap(), EncodedWord(bits));
        }
    }

    /// The disassembly report is a partition: total = valid + invalid.
    #[test]
    fn prop_report_partition(bits in proptest::collection::vec(any::<u32>(), 0..64)) {
        let words: Vec<EncodedWord> = bits.into_iter().map(EncodedWord).collect();
        let r = disassemble_program(&words);
        prop_assert_eq!(r.total, words.len());
        prop_assert_eq!(r.valid + r.invalid, r.total);
        prop_assert_eq!(r.listing.len(), r.total);
    }
}
