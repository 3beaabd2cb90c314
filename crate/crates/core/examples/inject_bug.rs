//! Differential testing against an injected bug: run the same program on
//! the golden simulator and on a DUT with one fault model enabled, then
//! diff the traces and fingerprint the mismatch.
//!
//! ```sh
//! cargo run --example inject_bug
//! ```

use rvfuzz::difftest::{compare, fingerprint, MismatchLog};
use rvfuzz::driver::directed_program;
use rvfuzz::isa::assemble;
use rvfuzz::sim::{run_program, BugToggle, ExecConfig, ToggleSet};

fn main() {
    let golden_cfg = ExecConfig::default();
    let mut log = MismatchLog::new();

    for toggle in BugToggle::ALL {
        let program = assemble(directed_program(toggle)).expect("valid assembly");

        let (golden, _) = run_program(&program, &golden_cfg).expect("golden run");
        let dut_cfg = ExecConfig {
            toggles: ToggleSet::single(toggle),
            ..ExecConfig::default()
        };
        let (dut, _) = run_program(&program, &dut_cfg).expect("dut run");

        let mismatches = compare(&dut, &golden);
        println!("{}:", toggle.name());
        for m in &mismatches {
            println!("  step {:>2}  {}  (fingerprint {})", m.step, m.kind, fingerprint(m));
            log.record(0, m);
        }
        if mismatches.is_empty() {
            println!("  (no divergence)");
        }
    }

    println!();
    println!(
        "{} raw mismatches dedup to {} unique fingerprints",
        log.total(),
        log.unique()
    );
}
