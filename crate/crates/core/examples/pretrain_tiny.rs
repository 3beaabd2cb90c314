//! Pretrain a miniature next-token model on a synthetic corpus, then
//! sample raw completions from it.
//!
//! Runs a deliberately tiny configuration so it finishes in seconds;
//! the library defaults train a much larger model.
//!
//! ```sh
//! cargo run --release --example pretrain_tiny
//! ```

use rvfuzz::corpus::{detokenize, synth_generate, tokenize, BOS, VOCAB_SIZE};
use rvfuzz::lm::{build_windows, sample, train, LmConfig, Params, TrainHyper};

fn main() {
    let config = LmConfig {
        vocab_size: VOCAB_SIZE as usize,
        context_len: 64,
        layers: 2,
        heads: 2,
        model_dim: 32,
        ff_dim: 64,
        seed: 1,
    };
    println!("model: {} parameters", config.param_count());

    let samples = synth_generate(200, 5);
    let seqs: Vec<Vec<u16>> = samples.iter().map(|s| tokenize(&s.instrs)).collect();
    let windows = build_windows(&seqs, config.context_len);
    println!("corpus: {} functions -> {} training windows", samples.len(), windows.len());

    let mut params = Params::<f32>::init(config).expect("valid config");
    let hyper = TrainHyper { lr: 3e-4, batch: 16, epochs: 4, seed: 2 };
    let losses = train(&mut params, &windows, &hyper);
    for (epoch, loss) in losses.iter().enumerate() {
        println!("epoch {epoch}: mean nll {loss:.4}");
    }

    println!("\nsampled completions:");
    for seed in 0..3 {
        let out = sample(&params, &[BOS], 1.0, config.vocab_size, 40, seed);
        let (instrs, skipped) = detokenize(out.completion());
        for ins in &instrs {
            println!("  {ins}");
        }
        println!("  -- {} instructions, {} malformed runs skipped\n", instrs.len(), skipped);
    }
}
