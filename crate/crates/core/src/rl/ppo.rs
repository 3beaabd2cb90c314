//! Clipped-surrogate policy optimization over sampled rollouts, with a
//! detached value readout trained jointly on the returns.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::lm::math::{log_sum_exp, standard_normal, Mat};
use crate::lm::{backward, Adam, Params};

use super::Rollout;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RlError {
    #[error(
        "recorded log-probs disagree with the provided params (max diff {max_diff:.4}); \
         rollouts are stale"
    )]
    StalePolicy { max_diff: f64 },
    #[error("invalid RL config: {0}")]
    Config(String),
}

/// Optimization settings for the policy update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoHyper {
    pub clip_eps: f64,
    /// Optimization epochs over each rollout batch.
    pub ppo_epochs: usize,
    pub lr: f64,
    /// Discount; episodic terminal reward keeps it at 1.
    pub gamma: f64,
    pub gae_lambda: f64,
    /// Mean-KL level above which the metrics carry a warning flag.
    pub kl_warn: f64,
    /// Rollouts per optimizer step.
    pub batch: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
}

impl Default for PpoHyper {
    fn default() -> PpoHyper {
        PpoHyper {
            clip_eps: 0.2,
            ppo_epochs: 4,
            lr: 1e-4,
            gamma: 1.0,
            gae_lambda: 0.95,
            kl_warn: 0.5,
            batch: 64,
            entropy_coef: 0.01,
            value_coef: 0.5,
        }
    }
}

impl PpoHyper {
    pub fn validate(&self) -> Result<(), RlError> {
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(RlError::Config("clip_eps must be in (0, 1)".into()));
        }
        for (name, v) in [("gamma", self.gamma), ("gae_lambda", self.gae_lambda)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(RlError::Config(format!("{name} must be in [0, 1]")));
            }
        }
        if self.ppo_epochs == 0 || self.batch == 0 {
            return Err(RlError::Config("ppo_epochs and batch must be positive".into()));
        }
        Ok(())
    }
}

/// Per-update monitoring numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoMetrics {
    /// Mean total loss (policy − entropy bonus + value) over the final
    /// optimization epoch.
    pub loss: f64,
    pub mean_reward: f64,
    /// k1 estimator of KL(old ‖ new) over completion tokens.
    pub approx_kl: f64,
    pub kl_warned: bool,
}

/// Two-layer tanh readout predicting a scalar value from a final
/// hidden state. Deliberately detached: its gradients stay inside the
/// head and never flow back into the transformer.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueHead {
    w1: Mat<f32>,
    b1: Vec<f32>,
    w2: Vec<f32>,
    b2: f32,
    // Adam moments, flattened in (w1, b1, w2, b2) order.
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

const VALUE_HIDDEN: usize = 64;

/// The value head trains at a multiple of the policy rate: its targets
/// are raw returns (often tens per episode), and a head that lags the
/// return scale contributes nothing as a baseline. It shares no
/// parameters with the policy, so the faster rate cannot destabilize
/// the clipped update.
const VALUE_LR_MULT: f64 = 10.0;

impl ValueHead {
    pub fn new(model_dim: usize, seed: u64) -> ValueHead {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w1 = Mat::zeros(model_dim, VALUE_HIDDEN);
        for x in &mut w1.data {
            *x = (standard_normal(&mut rng) * 0.1) as f32;
        }
        let mut w2 = vec![0f32; VALUE_HIDDEN];
        for x in &mut w2 {
            *x = (standard_normal(&mut rng) * 0.1) as f32;
        }
        let n = model_dim * VALUE_HIDDEN + VALUE_HIDDEN + VALUE_HIDDEN + 1;
        ValueHead {
            w1,
            b1: vec![0.0; VALUE_HIDDEN],
            w2,
            b2: 0.0,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// Value estimate for one hidden row.
    pub fn predict_row(&self, hidden: &[f32]) -> f64 {
        let mut out = self.b2 as f64;
        for (j, (&w2j, &b1j)) in self.w2.iter().zip(&self.b1).enumerate() {
            let mut a = b1j as f64;
            for (i, &h) in hidden.iter().enumerate() {
                a += h as f64 * self.w1.data[i * VALUE_HIDDEN + j] as f64;
            }
            out += w2j as f64 * a.tanh();
        }
        out
    }

    /// Accumulate squared-error gradients for one (hidden, error) pair,
    /// where `err = d(loss)/d(prediction)`.
    fn grad_row(&self, hidden: &[f32], err: f64, g: &mut ValueGrads) {
        let mut act = vec![0f64; VALUE_HIDDEN];
        for (j, (act_j, &b1j)) in act.iter_mut().zip(&self.b1).enumerate() {
            let mut a = b1j as f64;
            for (i, &h) in hidden.iter().enumerate() {
                a += h as f64 * self.w1.data[i * VALUE_HIDDEN + j] as f64;
            }
            *act_j = a.tanh();
        }
        g.b2 += err;
        for j in 0..VALUE_HIDDEN {
            g.w2[j] += err * act[j];
            let da = err * self.w2[j] as f64 * (1.0 - act[j] * act[j]);
            g.b1[j] += da;
            for (i, &h) in hidden.iter().enumerate() {
                g.w1[i * VALUE_HIDDEN + j] += da * h as f64;
            }
        }
    }

    fn adam_step(&mut self, g: &ValueGrads, lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let bc1 = 1.0 - B1.powi(self.t as i32);
        let bc2 = 1.0 - B2.powi(self.t as i32);
        let flat_g: Vec<f64> = g
            .w1
            .iter()
            .chain(&g.b1)
            .chain(&g.w2)
            .chain(std::iter::once(&g.b2))
            .copied()
            .collect();
        let mut update = |idx: usize, p: &mut f32| {
            let gi = flat_g[idx];
            self.m[idx] = B1 * self.m[idx] + (1.0 - B1) * gi;
            self.v[idx] = B2 * self.v[idx] + (1.0 - B2) * gi * gi;
            let mhat = self.m[idx] / bc1;
            let vhat = self.v[idx] / bc2;
            *p -= (lr * mhat / (vhat.sqrt() + EPS)) as f32;
        };
        let mut idx = 0;
        for i in 0..self.w1.data.len() {
            let mut p = self.w1.data[i];
            update(idx, &mut p);
            self.w1.data[i] = p;
            idx += 1;
        }
        for i in 0..VALUE_HIDDEN {
            let mut p = self.b1[i];
            update(idx, &mut p);
            self.b1[i] = p;
            idx += 1;
        }
        for i in 0..VALUE_HIDDEN {
            let mut p = self.w2[i];
            update(idx, &mut p);
            self.w2[i] = p;
            idx += 1;
        }
        let mut p = self.b2;
        update(idx, &mut p);
        self.b2 = p;
    }

    pub fn bits(&self) -> Vec<u32> {
        self.w1
            .data
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(std::iter::once(&self.b2))
            .map(|x| x.to_bits())
            .collect()
    }
}

struct ValueGrads {
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

impl ValueGrads {
    fn zeros(model_dim: usize) -> ValueGrads {
        ValueGrads {
            w1: vec![0.0; model_dim * VALUE_HIDDEN],
            b1: vec![0.0; VALUE_HIDDEN],
            w2: vec![0.0; VALUE_HIDDEN],
            b2: 0.0,
        }
    }
}

/// Consistency tolerance between recorded rollout log-probs and their
/// recomputation under the provided params. The incremental sampling
/// path and the batch path accumulate in different orders, so a small
/// float gap is expected; a stale parameter set is orders larger.
const STALE_TOL: f64 = 0.05;

/// One PPO update over a batch of rollouts: `ppo_epochs` passes of the
/// clipped-surrogate objective with entropy bonus, the value head
/// trained on the GAE returns from detached hidden states.
pub fn ppo_update(
    params: &mut Params<f32>,
    adam: &mut Adam<f32>,
    value: &mut ValueHead,
    rollouts: &[Rollout],
    hyper: &PpoHyper,
) -> Result<PpoMetrics, RlError> {
    hyper.validate()?;
    let usable: Vec<&Rollout> = rollouts
        .iter()
        .filter(|r| r.gen_len() > 0 && !r.advantages.is_empty())
        .collect();
    if usable.is_empty() {
        return Err(RlError::Config(
            "no usable rollouts (empty completions or missing advantages)".into(),
        ));
    }

    // Stale-policy check: the recorded log-probs must be reproducible
    // under the params we are about to update.
    let mut max_diff = 0f64;
    let probe = usable[0];
    for (j, (_, new_lp)) in completion_logps(params, probe).into_iter().enumerate() {
        max_diff = max_diff.max((new_lp - probe.logprobs[j]).abs());
    }
    if max_diff > STALE_TOL {
        return Err(RlError::StalePolicy { max_diff });
    }

    let mut last_epoch_loss = 0f64;
    for epoch in 0..hyper.ppo_epochs {
        let mut epoch_loss_sum = 0f64;
        let mut epoch_tokens = 0usize;
        for chunk in usable.chunks(hyper.batch) {
            let total_tokens: usize = chunk.iter().map(|r| r.gen_len()).sum();
            let inv_n = 1.0 / total_tokens as f64;
            let mut acc = params.zeros_like();
            let mut vgrads = ValueGrads::zeros(params.config.model_dim);
            let mut chunk_loss = 0f64;

            for r in chunk {
                let input = &r.tokens[..r.tokens.len() - 1];
                let (cache, logits) =
                    params.forward_cached(input).expect("rollout fits context");
                let mut dlogits = Mat::zeros(logits.rows, logits.cols);

                for j in 0..r.gen_len() {
                    let row_idx = r.prompt_len - 1 + j;
                    let action = r.tokens[r.prompt_len + j] as usize;
                    let row = logits.row(row_idx);
                    let lse = log_sum_exp(row);
                    let new_lp = row[action] as f64 - lse;
                    let ratio = (new_lp - r.logprobs[j]).exp();
                    let adv = r.advantages[j];

                    let unclipped = ratio * adv;
                    let clipped =
                        ratio.clamp(1.0 - hyper.clip_eps, 1.0 + hyper.clip_eps) * adv;
                    let surrogate = unclipped.min(clipped);
                    // Gradient flows only while the unclipped term is
                    // the active minimum.
                    let coef = if unclipped <= clipped { unclipped } else { 0.0 };

                    let mut probs: Vec<f64> =
                        row.iter().map(|&l| (l as f64 - lse).exp()).collect();
                    let entropy: f64 = probs
                        .iter()
                        .map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 })
                        .sum();

                    // d(-surrogate)/dz and d(-c_e·H)/dz, both scaled to
                    // the batch mean.
                    for (k, p) in probs.iter_mut().enumerate() {
                        let onehot = if k == action { 1.0 } else { 0.0 };
                        let d_policy = coef * (*p - onehot);
                        let d_entropy =
                            hyper.entropy_coef * *p * (p.ln() + entropy);
                        dlogits.row_mut(row_idx)[k] +=
                            ((d_policy + d_entropy) * inv_n) as f32;
                    }
                    chunk_loss += (-surrogate - hyper.entropy_coef * entropy) * inv_n;

                    // Value head on the detached hidden row.
                    let hidden = cache.final_hidden.row(row_idx);
                    let v_pred = value.predict_row(hidden);
                    let v_err = v_pred - r.returns[j];
                    chunk_loss += hyper.value_coef * 0.5 * v_err * v_err * inv_n;
                    value.grad_row(hidden, hyper.value_coef * v_err * inv_n, &mut vgrads);
                }

                let g = backward(params, &cache, &dlogits);
                for (a, b) in acc.tensors_mut().into_iter().zip(g.tensors()) {
                    for (x, y) in a.data.iter_mut().zip(&b.data) {
                        *x += *y;
                    }
                }
            }

            adam.step(params, &acc);
            value.adam_step(&vgrads, hyper.lr * VALUE_LR_MULT);
            epoch_loss_sum += chunk_loss * total_tokens as f64;
            epoch_tokens += total_tokens;
        }
        if epoch == hyper.ppo_epochs - 1 {
            last_epoch_loss = epoch_loss_sum / epoch_tokens as f64;
        }
    }

    // Final monitoring pass under the updated params.
    let mut kl_sum = 0f64;
    let mut kl_tokens = 0usize;
    for r in &usable {
        for (j, (_, new_lp)) in completion_logps(params, r).into_iter().enumerate() {
            kl_sum += r.logprobs[j] - new_lp;
            kl_tokens += 1;
        }
    }
    let approx_kl = kl_sum / kl_tokens as f64;
    let mean_reward =
        usable.iter().map(|r| r.reward).sum::<f64>() / usable.len() as f64;
    Ok(PpoMetrics {
        loss: last_epoch_loss,
        mean_reward,
        approx_kl,
        kl_warned: approx_kl > hyper.kl_warn,
    })
}

/// (action, log-prob) per completion token under `params`.
fn completion_logps(params: &Params<f32>, r: &Rollout) -> Vec<(u16, f64)> {
    let input = &r.tokens[..r.tokens.len() - 1];
    let logits = params.forward(input).expect("rollout fits context");
    (0..r.gen_len())
        .map(|j| {
            let row = logits.row(r.prompt_len - 1 + j);
            let action = r.tokens[r.prompt_len + j];
            (action, row[action as usize] as f64 - log_sum_exp(row))
        })
        .collect()
}

