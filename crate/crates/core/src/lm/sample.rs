//! Autoregressive sampling with temperature and top-k truncation,
//! retaining each generated token's log-probability under the actual
//! sampling distribution (needed for policy-gradient training).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::EOS;

use super::model::Params;

/// A sampled sequence: the prompt followed by `generated` new tokens,
/// with one log-probability per generated token.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutput {
    pub tokens: Vec<u16>,
    pub generated: usize,
    pub logprobs: Vec<f64>,
}

impl SampleOutput {
    /// The generated suffix.
    pub fn completion(&self) -> &[u16] {
        &self.tokens[self.tokens.len() - self.generated..]
    }
}

/// Sample a continuation of `prompt`. Generation stops at EOS, at
/// `max_len` total tokens, or at the model's context limit, whichever
/// comes first. Deterministic for a given seed; `top_k = 1` is greedy
/// argmax (ties to the lowest token id) and ignores the seed.
pub fn sample(
    params: &Params<f32>,
    prompt: &[u16],
    temperature: f64,
    top_k: usize,
    max_len: usize,
    seed: u64,
) -> SampleOutput {
    assert!(!prompt.is_empty(), "prompt must be non-empty");
    assert!(temperature > 0.0, "temperature must be positive");
    assert!(top_k > 0, "top_k must be positive");
    assert!(
        prompt.len() < params.config.context_len,
        "prompt must leave room in the context"
    );

    let mut tokens = prompt.to_vec();
    let mut logprobs = Vec::new();
    let cap = max_len.min(params.config.context_len);
    if tokens.len() >= cap {
        return SampleOutput {
            tokens,
            generated: 0,
            logprobs,
        };
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cache = params.new_cache();
    let mut logits = Vec::new();
    for &t in prompt {
        logits = params.step(&mut cache, t).expect("prompt fits context");
    }

    loop {
        let (tok, lp) = draw(&logits, temperature, top_k, &mut rng);
        tokens.push(tok);
        logprobs.push(lp);
        if tok == EOS || tokens.len() >= cap {
            break;
        }
        logits = params.step(&mut cache, tok).expect("capped at context");
    }

    let generated = tokens.len() - prompt.len();
    SampleOutput {
        tokens,
        generated,
        logprobs,
    }
}

/// Draw one token: logits are divided by the temperature, truncated to
/// the `top_k` highest (ties broken toward lower ids), renormalized,
/// and sampled by inverse-CDF in descending-probability order.
fn draw(logits: &[f32], temperature: f64, top_k: usize, rng: &mut ChaCha8Rng) -> (u16, f64) {
    let mut scored: Vec<(usize, f64)> = logits
        .iter()
        .enumerate()
        .map(|(i, &l)| (i, l as f64 / temperature))
        .collect();
    scored.sort_unstable_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(top_k.min(logits.len()));

    let max = scored[0].1;
    let mut denom = 0f64;
    let exps: Vec<f64> = scored
        .iter()
        .map(|&(_, s)| {
            let e = (s - max).exp();
            denom += e;
            e
        })
        .collect();

    let r: f64 = rng.gen::<f64>() * denom;
    let mut acc = 0f64;
    for (&(id, _), &e) in scored.iter().zip(&exps) {
        acc += e;
        if r < acc {
            return (id as u16, (e / denom).ln());
        }
    }
    let last = scored.len() - 1;
    (scored[last].0 as u16, (exps[last] / denom).ln())
}
