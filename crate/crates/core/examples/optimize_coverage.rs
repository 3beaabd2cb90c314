//! Second policy-gradient stage: generations are executed live on the
//! golden simulator and rewarded for covering new behavior, so the
//! model drifts toward programs that exercise more of the catalog.
//!
//! ```sh
//! cargo run --release --example optimize_coverage
//! ```

use rvfuzz::corpus::VOCAB_SIZE;
use rvfuzz::coverage::CATALOG_SIZE;
use rvfuzz::driver::{load_corpus, stage1_pretrain, stage3_optimize, RunConfig};
use rvfuzz::lm::LmConfig;

fn main() {
    let mut cfg = RunConfig::default();
    cfg.model = LmConfig {
        vocab_size: VOCAB_SIZE as usize,
        context_len: 64,
        layers: 2,
        heads: 2,
        model_dim: 32,
        ff_dim: 64,
        seed: 1,
    };
    cfg.corpus.n = 200;
    cfg.stage1.epochs = 3;
    cfg.stage3.dataset = 96;
    cfg.stage3.max_epochs = 5;
    cfg.stage3.rl.batch = 32;

    let samples = load_corpus(&cfg).expect("synthesizable corpus");
    println!("pretraining...");
    let pretrained = stage1_pretrain(&cfg, &samples).expect("pretrain");

    println!("optimizing for coverage (catalog: {CATALOG_SIZE} points)...");
    let optimized = stage3_optimize(&pretrained.params, &cfg, &samples).expect("optimize");
    for row in &optimized.log {
        println!(
            "  epoch {}: reward {:+.3}, kl {:.4}, training coverage {:.2}%",
            row.update, row.mean_reward, row.approx_kl, row.aux
        );
    }
    println!(
        "\ntraining generations covered {} / {CATALOG_SIZE} points",
        optimized.coverage.len()
    );
    if (optimized.log.len()) < cfg.stage3.max_epochs {
        println!("(stopped early: an epoch added no new coverage)");
    }
}
