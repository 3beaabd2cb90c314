//! Replay a directed probe program against every bug toggle and print
//! the full divergence report for one of them.
//!
//! ```sh
//! cargo run --example replay_bug
//! ```

use rvfuzz::driver::{directed_program, replay, RunConfig};
use rvfuzz::sim::BugToggle;

fn main() {
    // One probe per fault model; each is a handful of instructions
    // crafted to make that specific bug visible.
    for toggle in BugToggle::ALL {
        let cfg = RunConfig::default();
        let report = replay(directed_program(toggle), &cfg).expect("probe runs");
        let triggered: Vec<&str> = report
            .per_toggle
            .iter()
            .filter(|(_, ms)| !ms.is_empty())
            .map(|(t, _)| t.name())
            .collect();
        println!("probe for {:<24} trips: {}", toggle.name(), triggered.join(", "));
    }

    println!("\nfull report for the stale-instruction-fetch probe:\n");
    let cfg = RunConfig::default();
    let report = replay(directed_program(BugToggle::StaleIfetchNoFencei), &cfg)
        .expect("probe runs");
    print!("{}", report.render());
}
