//! Execute a program on the behavioral simulator and print its
//! architectural trace.
//!
//! ```sh
//! cargo run --example run_program
//! ```

use rvfuzz::isa::assemble;
use rvfuzz::sim::{run_program_with_state, write_trace, ExecConfig};

fn main() {
    let source = "\
addi x1, x0, 3       # counter
addi x2, x0, 0       # sum
add  x2, x2, x1      # loop: sum += counter
addi x1, x1, -1
bne  x1, x0, -8
sw   x2, x0, 64      # spill the result
lw   x3, x0, 64
ecall
";
    let program = assemble(source).expect("valid assembly");

    let config = ExecConfig::default();
    let (trace, coverage, state) =
        run_program_with_state(&program, &config).expect("program loads");

    print!("{}", write_trace(&trace));
    println!();
    println!("retired {} instructions", trace.len());
    println!("x2 (sum 3..=1)  = {}", state.regs[2]);
    println!("x3 (reloaded)   = {}", state.regs[3]);
    println!("coverage points hit: {}", coverage.len());
}
