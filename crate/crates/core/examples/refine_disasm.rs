//! Policy-gradient refinement against the disassembler reward
//! (valid instructions minus a penalty per malformed run), starting
//! from a pretrained model. Prints the held-out invalid rate before
//! and after.
//!
//! ```sh
//! cargo run --release --example refine_disasm
//! ```

use rvfuzz::corpus::VOCAB_SIZE;
use rvfuzz::driver::{
    draw_prompts, invalid_rate, load_corpus, stage1_pretrain, stage2_refine, RunConfig,
};
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
    cfg.stage2.dataset = 96;
    cfg.stage2.epochs = 3;
    cfg.stage2.rl.batch = 32;

    let samples = load_corpus(&cfg).expect("synthesizable corpus");
    println!("pretraining ({} functions, {} epochs)...", cfg.corpus.n, cfg.stage1.epochs);
    let pretrained = stage1_pretrain(&cfg, &samples).expect("pretrain");

    let held_out = draw_prompts(&samples, 64, (2, 5), 0xe7a1);
    let before = invalid_rate(&pretrained.params, &held_out, cfg.model.context_len, 7);

    println!("refining against the disassembler reward...");
    let refined = stage2_refine(&pretrained.params, &cfg, &samples).expect("refine");
    for row in &refined.log {
        println!(
            "  epoch {}: reward {:+.3}, kl {:.4}, train invalid rate {:.3}",
            row.update, row.mean_reward, row.approx_kl, row.aux
        );
    }

    let after = invalid_rate(&refined.params, &held_out, cfg.model.context_len, 7);
    println!("\nheld-out invalid rate: {before:.3} -> {after:.3}");
}
