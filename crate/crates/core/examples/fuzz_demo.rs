//! End-to-end differential fuzzing: pretrain a tiny model, fuzz the
//! bug-injected simulator with its generations, and compare coverage
//! against a format-correct random baseline at the same budget.
//!
//! ```sh
//! cargo run --release --example fuzz_demo
//! ```

use rvfuzz::driver::{baseline_random_fuzz, fuzz, load_corpus, stage1_pretrain, RunConfig};
use rvfuzz::lm::LmConfig;

fn main() {
    let mut cfg = RunConfig::default();
    cfg.model = LmConfig {
        vocab_size: 123,
        context_len: 64,
        layers: 2,
        heads: 2,
        model_dim: 32,
        ff_dim: 64,
        seed: 1,
    };
    cfg.corpus.n = 200;
    cfg.stage1.epochs = 3;
    cfg.fuzz.tests = 60;
    cfg.fuzz.batch = 16;
    cfg.fuzz.max_instrs = 24;
    cfg.fuzz.workers = 4;

    let samples = load_corpus(&cfg).expect("synthesizable corpus");
    println!("pretraining...");
    let model = stage1_pretrain(&cfg, &samples).expect("pretrain").params;

    println!("fuzzing {} tests (all four bug toggles armed)...", cfg.fuzz.tests);
    let lm_run = fuzz(&model, cfg.fuzz.tests, &cfg).expect("fuzz");
    let random_run = baseline_random_fuzz(cfg.fuzz.tests, &cfg).expect("baseline");

    println!();
    println!("{:<22} {:>10} {:>10}", "", "model", "random");
    println!(
        "{:<22} {:>9.2}% {:>9.2}%",
        "final coverage",
        lm_run.final_coverage_percent,
        random_run.final_coverage_percent
    );
    println!(
        "{:<22} {:>10} {:>10}",
        "raw mismatches", lm_run.total_mismatches, random_run.total_mismatches
    );
    println!(
        "{:<22} {:>10} {:>10}",
        "unique fingerprints", lm_run.unique_fingerprints, random_run.unique_fingerprints
    );

    println!("\nbug classes the model run surfaced:");
    for row in &lm_run.fingerprints {
        println!(
            "  {:<8} {:<24} x{:<4} (first: test {}, step {})",
            row.mnemonic, row.kind, row.count, row.exemplar_program, row.exemplar_step
        );
    }
    println!("\ntoggles surfaced per configuration:");
    for (toggle, unique) in &lm_run.per_toggle_unique {
        println!("  {toggle}: {unique} fingerprint(s)");
    }
}
