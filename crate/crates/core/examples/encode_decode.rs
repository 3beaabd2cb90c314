//! Assemble a small program, encode it to machine words, and decode the
//! words back to instructions.
//!
//! ```sh
//! cargo run --example encode_decode
//! ```

use rvfuzz::isa::{decode, encode, parse_instruction};

fn main() {
    let source = [
        "addi x1, x0, 6",
        "addi x2, x0, 7",
        "mul  x3, x1, x2",
        "beq  x3, x0, -8",
        "sw   x0, x3, 16",
        "ecall",
    ];

    println!("{:<10} {:<22} decoded", "word", "instruction");
    for line in source {
        let ins = parse_instruction(line).expect("valid assembly");
        let word = encode(&ins).expect("encodable");
        let back = decode(word).ok().expect("round-trips");
        assert_eq!(back, ins);
        println!("{:#010x} {:<22} {}", word.bits(), line.trim(), back);
    }
    println!("\n{} instructions, all encode/decode round-trips exact", source.len());
}
