//! Policy-gradient refinement of the language model with pluggable,
//! deterministic reward agents: a disassembler-based validity reward
//! and a coverage-based novelty reward, optimized with a clipped
//! surrogate objective and generalized advantage estimation.

mod ppo;

#[cfg(test)]
mod tests;

pub use ppo::{ppo_update, PpoHyper, PpoMetrics, RlError, ValueHead};

use crate::corpus::{decode_runs, DecodedRun};
use crate::coverage::CoverageStats;
use crate::isa::{disassemble_program, encode, EncodedWord, Instruction};
use crate::lm::{Params, SampleOutput};

/// One generated program: the sampled token sequence, its decoded
/// instructions, and the encoded machine words with every malformed
/// token run replaced by one all-zero (illegal) placeholder word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenText {
    pub prompt: Vec<u16>,
    pub completion: Vec<u16>,
    pub instrs: Vec<Instruction>,
    pub words: Vec<EncodedWord>,
    /// Total word count: valid + invalid per the disassembly partition.
    pub n: usize,
    pub invalid: usize,
}

impl GenText {
    /// Decode a sampled completion into an executable program. Each
    /// well-formed token run becomes its encoded word; each skipped run
    /// becomes a single `0x00000000` word, which the disassembler
    /// rejects — so ill-formed generations genuinely lower the
    /// validity reward instead of silently vanishing.
    pub fn from_tokens(prompt: &[u16], completion: &[u16]) -> GenText {
        let mut instrs = Vec::new();
        let mut words = Vec::new();
        for run in decode_runs(completion) {
            match run {
                DecodedRun::Instr(i) => {
                    words.push(encode(&i).expect("detokenized instructions are well-formed"));
                    instrs.push(i);
                }
                DecodedRun::Skipped(_) => words.push(EncodedWord(0)),
            }
        }
        let report = disassemble_program(&words);
        debug_assert_eq!(report.total, report.valid + report.invalid);
        GenText {
            prompt: prompt.to_vec(),
            completion: completion.to_vec(),
            instrs,
            words,
            n: report.total,
            invalid: report.invalid,
        }
    }
}

/// Validity reward: instruction count minus five per word the
/// disassembler rejects.
pub fn disasm_reward(g: &GenText) -> f64 {
    g.n as f64 - 5.0 * g.invalid as f64
}

/// Weights of the coverage reward.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScoreWeights {
    pub w_standalone: f64,
    pub w_incremental: f64,
    pub no_improve_penalty: f64,
}

impl Default for ScoreWeights {
    fn default() -> ScoreWeights {
        ScoreWeights {
            w_standalone: 1.0,
            w_incremental: 10.0,
            no_improve_penalty: 1.0,
        }
    }
}

impl ScoreWeights {
    pub fn validate(&self) -> Result<(), RlError> {
        if !(self.w_incremental > 0.0) {
            return Err(RlError::Config("w_incremental must be positive".into()));
        }
        if self.no_improve_penalty < 0.0 {
            return Err(RlError::Config("no_improve_penalty must be ≥ 0".into()));
        }
        Ok(())
    }
}

/// Coverage reward: normalized stand-alone coverage plus a bonus per
/// newly covered point, with a flat penalty when nothing new is hit.
pub fn coverage_reward(stats: &CoverageStats, catalog_size: usize, w: &ScoreWeights) -> f64 {
    let mut r = w.w_standalone * (stats.standalone as f64 / catalog_size as f64)
        + w.w_incremental * stats.incremental as f64;
    if stats.incremental == 0 {
        r -= w.no_improve_penalty;
    }
    r
}

/// One sampled episode with everything the PPO update needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    /// Prompt followed by the generated completion.
    pub tokens: Vec<u16>,
    pub prompt_len: usize,
    /// Per generated token: log-probability under the sampling policy.
    pub logprobs: Vec<f64>,
    /// Per generated token: value estimate of the state it was drawn in.
    pub values: Vec<f64>,
    /// Episodic terminal reward.
    pub reward: f64,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Rollout {
    /// Number of generated tokens.
    pub fn gen_len(&self) -> usize {
        self.tokens.len() - self.prompt_len
    }

    pub fn completion(&self) -> &[u16] {
        &self.tokens[self.prompt_len..]
    }

    /// Assemble a rollout from a sampled sequence and its terminal
    /// reward; value estimates come from the value head over the
    /// model's hidden states. Returns None when nothing was generated.
    pub fn from_sample(
        params: &Params<f32>,
        value: &ValueHead,
        out: &SampleOutput,
        reward: f64,
    ) -> Option<Rollout> {
        if out.generated == 0 {
            return None;
        }
        let prompt_len = out.tokens.len() - out.generated;
        // Token at index i was drawn from the state after prefix ..=i-1,
        // i.e. from hidden row i-1; the last token's row is len-2.
        let (_, hidden) = params
            .forward_hidden(&out.tokens[..out.tokens.len() - 1])
            .expect("sampled sequence fits context");
        let values = (0..out.generated)
            .map(|j| value.predict_row(hidden.row(prompt_len - 1 + j)))
            .collect();
        Some(Rollout {
            tokens: out.tokens.clone(),
            prompt_len,
            logprobs: out.logprobs.clone(),
            values,
            reward,
            advantages: Vec::new(),
            returns: Vec::new(),
        })
    }
}

/// Generalized advantage estimation over the episodic reward: the
/// reward lands on the final generated step, everything earlier gets
/// it through the discounted, λ-weighted temporal differences.
pub fn compute_advantages(rollout: &mut Rollout, gamma: f64, lambda: f64) {
    let n = rollout.gen_len();
    assert_eq!(rollout.values.len(), n, "values must align with generation");
    let mut advantages = vec![0f64; n];
    let mut gae = 0f64;
    for t in (0..n).rev() {
        let reward_t = if t == n - 1 { rollout.reward } else { 0.0 };
        let next_value = if t == n - 1 { 0.0 } else { rollout.values[t + 1] };
        let delta = reward_t + gamma * next_value - rollout.values[t];
        gae = delta + gamma * lambda * gae;
        advantages[t] = gae;
    }
    rollout.returns = advantages
        .iter()
        .zip(&rollout.values)
        .map(|(a, v)| a + v)
        .collect();
    rollout.advantages = advantages;
}

/// The clipped surrogate term for one action:
/// `min(ratio·A, clip(ratio, 1−ε, 1+ε)·A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip_eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    (ratio * advantage).min(clipped * advantage)
}

/// One row of the RL training log.
#[derive(Debug, Clone, PartialEq)]
pub struct RlLogRow {
    pub update: usize,
    pub mean_reward: f64,
    pub loss: f64,
    pub approx_kl: f64,
    /// Stage-specific column: invalid rate or incremental coverage.
    pub aux: f64,
}

/// Render the log with the stage-appropriate name for the aux column.
pub fn rl_log_csv(aux_column: &str, rows: &[RlLogRow]) -> String {
    let mut out = format!("update,mean_reward,loss,approx_kl,{aux_column}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6}\n",
            r.update, r.mean_reward, r.loss, r.approx_kl, r.aux
        ));
    }
    out
}
