//! Coverage accounting across a run: per-test standalone hits,
//! incremental (new-to-the-run) hits, and the accumulated total.
//!
//! ```sh
//! cargo run --example coverage_map
//! ```

use rvfuzz::coverage::{catalog, percent, update, CoverageSet, CATALOG_SIZE};
use rvfuzz::isa::assemble;
use rvfuzz::sim::{run_program, ExecConfig};

fn run(source: &str, config: &ExecConfig) -> CoverageSet {
    let program = assemble(source).expect("valid assembly");
    let (_, hits) = run_program(&program, config).expect("program loads");
    hits
}

fn main() {
    let config = ExecConfig::default();
    let tests = [
        ("arithmetic", "addi x1, x0, 5\nadd x2, x1, x1\nsub x3, x2, x1\necall\n"),
        ("same again", "addi x1, x0, 9\nadd x2, x1, x1\nsub x3, x2, x1\necall\n"),
        ("multiply", "addi x1, x0, -1\nmul x2, x1, x1\nmulh x3, x1, x1\necall\n"),
        ("memory", "addi x1, x0, 64\nsw x1, x1, 0\nlw x2, x1, 0\nlb x3, x1, 1\necall\n"),
    ];

    println!("catalog: {CATALOG_SIZE} points");
    println!("{:<12} {:>10} {:>11} {:>6} {:>8}", "test", "standalone", "incremental", "total", "percent");

    let mut total = CoverageSet::new();
    for (name, source) in tests {
        let hits = run(source, &config);
        let (stats, merged) = update(&total, &hits).expect("catalog ids");
        total = merged;
        println!(
            "{:<12} {:>10} {:>11} {:>6} {:>7.2}%",
            name,
            stats.standalone,
            stats.incremental,
            stats.total,
            percent(&total)
        );
    }

    println!("\nsample of points the run hit:");
    for point in catalog().iter().filter(|p| total.contains(p.id)).take(12) {
        println!("  [{:>3}] {}", point.id.0, point.name);
    }
}
