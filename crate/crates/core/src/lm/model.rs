//! Decoder-only autoregressive transformer, written directly against
//! dense matrices: learned token + position embeddings, pre-norm
//! blocks (causal multi-head self-attention, then a GELU feed-forward),
//! a final normalization, and a weight-tied output projection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::math::{gelu, softmax_row, standard_normal, Mat, Scalar};

const LN_EPS: f64 = 1e-5;
const INIT_STD: f64 = 0.02;

/// Model shape and the seed its weights are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LmConfig {
    pub vocab_size: usize,
    pub context_len: usize,
    pub layers: usize,
    pub heads: usize,
    pub model_dim: usize,
    pub ff_dim: usize,
    pub seed: u64,
}

impl Default for LmConfig {
    fn default() -> LmConfig {
        LmConfig {
            vocab_size: crate::corpus::VOCAB_SIZE as usize,
            context_len: 128,
            layers: 4,
            heads: 4,
            model_dim: 128,
            ff_dim: 512,
            seed: 0,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<(), LmError> {
        let positive = [
            ("vocab_size", self.vocab_size),
            ("context_len", self.context_len),
            ("layers", self.layers),
            ("heads", self.heads),
            ("model_dim", self.model_dim),
            ("ff_dim", self.ff_dim),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(LmError::ConfigInvalid(format!("{name} must be positive")));
            }
        }
        if self.model_dim % self.heads != 0 {
            return Err(LmError::ConfigInvalid(format!(
                "model_dim {} not divisible by heads {}",
                self.model_dim, self.heads
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.heads
    }

    /// Closed-form number of scalar parameters.
    pub fn param_count(&self) -> usize {
        let (v, c, l, d, f) = (
            self.vocab_size,
            self.context_len,
            self.layers,
            self.model_dim,
            self.ff_dim,
        );
        let per_layer = 4 * d * d + 4 * d   // attention projections + biases
            + 2 * (2 * d)                    // two layer norms
            + 2 * d * f + f + d; // feed-forward weights + biases
        v * d + c * d + l * per_layer + 2 * d
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LmError {
    #[error("invalid model config: {0}")]
    ConfigInvalid(String),
    #[error("sequence length {len} exceeds context {context}")]
    SequenceTooLong { len: usize, context: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// One transformer block's weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<S> {
    pub ln1_g: Mat<S>,
    pub ln1_b: Mat<S>,
    pub wq: Mat<S>,
    pub bq: Mat<S>,
    pub wk: Mat<S>,
    pub bk: Mat<S>,
    pub wv: Mat<S>,
    pub bv: Mat<S>,
    pub wo: Mat<S>,
    pub bo: Mat<S>,
    pub ln2_g: Mat<S>,
    pub ln2_b: Mat<S>,
    pub w1: Mat<S>,
    pub b1: Mat<S>,
    pub w2: Mat<S>,
    pub b2: Mat<S>,
}

/// All model weights plus the config that shaped them. The output
/// projection is tied to `tok_emb`.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<S = f32> {
    pub config: LmConfig,
    pub tok_emb: Mat<S>,
    pub pos_emb: Mat<S>,
    pub layers: Vec<LayerParams<S>>,
    pub lnf_g: Mat<S>,
    pub lnf_b: Mat<S>,
}

impl<S: Scalar> Params<S> {
    /// Deterministic initialization: weight matrices and embeddings are
    /// drawn N(0, 0.02²) in declared tensor order from
    /// `ChaCha8Rng::seed_from_u64(config.seed)`; the residual output
    /// projections (`wo`, `w2`) use std 0.02/√(2·layers); biases start
    /// at zero and norm gains at one.
    pub fn init(config: LmConfig) -> Result<Params<S>, LmError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = config.model_dim;
        let f = config.ff_dim;
        let resid_std = INIT_STD / (2.0 * config.layers as f64).sqrt();

        let mut normal = |rows: usize, cols: usize, std: f64| -> Mat<S> {
            let mut m = Mat::zeros(rows, cols);
            for x in &mut m.data {
                *x = S::from_f64(standard_normal(&mut rng) * std);
            }
            m
        };

        let tok_emb = normal(config.vocab_size, d, INIT_STD);
        let pos_emb = normal(config.context_len, d, INIT_STD);
        let mut layers = Vec::with_capacity(config.layers);
        for _ in 0..config.layers {
            layers.push(LayerParams {
                ln1_g: ones(1, d),
                ln1_b: Mat::zeros(1, d),
                wq: normal(d, d, INIT_STD),
                bq: Mat::zeros(1, d),
                wk: normal(d, d, INIT_STD),
                bk: Mat::zeros(1, d),
                wv: normal(d, d, INIT_STD),
                bv: Mat::zeros(1, d),
                wo: normal(d, d, resid_std),
                bo: Mat::zeros(1, d),
                ln2_g: ones(1, d),
                ln2_b: Mat::zeros(1, d),
                w1: normal(d, f, INIT_STD),
                b1: Mat::zeros(1, f),
                w2: normal(f, d, resid_std),
                b2: Mat::zeros(1, d),
            });
        }
        Ok(Params {
            config,
            tok_emb,
            pos_emb,
            layers,
            lnf_g: ones(1, d),
            lnf_b: Mat::zeros(1, d),
        })
    }

    /// A same-shaped bundle of zeros (gradients, optimizer moments).
    pub fn zeros_like(&self) -> Params<S> {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            for x in &mut t.data {
                *x = S::zero();
            }
        }
        z
    }

    /// Every tensor in declared (checkpoint) order.
    pub fn tensors(&self) -> Vec<&Mat<S>> {
        let mut v: Vec<&Mat<S>> = vec![&self.tok_emb, &self.pos_emb];
        for l in &self.layers {
            v.extend([
                &l.ln1_g, &l.ln1_b, &l.wq, &l.bq, &l.wk, &l.bk, &l.wv, &l.bv, &l.wo,
                &l.bo, &l.ln2_g, &l.ln2_b, &l.w1, &l.b1, &l.w2, &l.b2,
            ]);
        }
        v.extend([&self.lnf_g, &self.lnf_b]);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Mat<S>> {
        let mut v: Vec<&mut Mat<S>> = vec![&mut self.tok_emb, &mut self.pos_emb];
        for l in &mut self.layers {
            v.extend([
                &mut l.ln1_g,
                &mut l.ln1_b,
                &mut l.wq,
                &mut l.bq,
                &mut l.wk,
                &mut l.bk,
                &mut l.wv,
                &mut l.bv,
                &mut l.wo,
                &mut l.bo,
                &mut l.ln2_g,
                &mut l.ln2_b,
                &mut l.w1,
                &mut l.b1,
                &mut l.w2,
                &mut l.b2,
            ]);
        }
        v.extend([&mut self.lnf_g, &mut self.lnf_b]);
        v
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    /// Logits for every input position; row `t` depends only on tokens
    /// `0..=t`.
    pub fn forward(&self, ids: &[u16]) -> Result<Mat<S>, LmError> {
        Ok(self.forward_cached(ids)?.1)
    }

    /// Logits plus the final (post-norm) hidden states, one row per
    /// position; the value readout consumes the hidden rows.
    pub fn forward_hidden(&self, ids: &[u16]) -> Result<(Mat<S>, Mat<S>), LmError> {
        let (cache, logits) = self.forward_cached(ids)?;
        Ok((logits, cache.final_hidden))
    }

    /// Full forward pass retaining every intermediate needed by the
    /// backward pass.
    pub(crate) fn forward_cached(&self, ids: &[u16]) -> Result<(Cache<S>, Mat<S>), LmError> {
        let t_len = ids.len();
        if t_len > self.config.context_len {
            return Err(LmError::SequenceTooLong {
                len: t_len,
                context: self.config.context_len,
            });
        }
        if t_len == 0 {
            return Err(LmError::ShapeMismatch("empty input sequence".into()));
        }
        let d = self.config.model_dim;

        let mut x = Mat::zeros(t_len, d);
        for (t, &id) in ids.iter().enumerate() {
            assert!((id as usize) < self.config.vocab_size, "token id out of range");
            let e = self.tok_emb.row(id as usize);
            let p = self.pos_emb.row(t);
            for (o, (a, b)) in x.row_mut(t).iter_mut().zip(e.iter().zip(p)) {
                *o = *a + *b;
            }
        }
        let mut layer_caches = Vec::with_capacity(self.layers.len());
        for lp in &self.layers {
            let (lc, x_next) = self.layer_forward(lp, &x);
            layer_caches.push(lc);
            x = x_next;
        }

        let (lnf, final_hidden) = norm_forward(&x, &self.lnf_g, &self.lnf_b);
        let logits = final_hidden.matmul_nt(&self.tok_emb);

        Ok((
            Cache {
                ids: ids.to_vec(),
                layers: layer_caches,
                lnf,
                final_hidden,
            },
            logits,
        ))
    }

    fn layer_forward(&self, lp: &LayerParams<S>, x: &Mat<S>) -> (LayerCache<S>, Mat<S>) {
        let t_len = x.rows;
        let d = self.config.model_dim;
        let heads = self.config.heads;
        let dh = self.config.head_dim();
        let inv_sqrt_dh = S::from_f64(1.0 / (dh as f64).sqrt());

        let (ln1, ln1_out) = norm_forward(x, &lp.ln1_g, &lp.ln1_b);
        let mut q = ln1_out.matmul(&lp.wq);
        q.add_row_bias(lp.bq.row(0));
        let mut k = ln1_out.matmul(&lp.wk);
        k.add_row_bias(lp.bk.row(0));
        let mut v = ln1_out.matmul(&lp.wv);
        v.add_row_bias(lp.bv.row(0));

        // Causal attention: explicit j ≤ t loops so row t provably
        // touches only earlier positions, and so the incremental path
        // can reproduce the identical accumulation order.
        let mut probs = Vec::with_capacity(heads);
        let mut ctx = Mat::zeros(t_len, d);
        for h in 0..heads {
            let o = h * dh;
            let mut p = Mat::zeros(t_len, t_len);
            for t in 0..t_len {
                let qrow = &q.row(t)[o..o + dh];
                let prow = p.row_mut(t);
                for (j, pj) in prow.iter_mut().enumerate().take(t + 1) {
                    let krow = &k.row(j)[o..o + dh];
                    let mut s = S::zero();
                    for (a, b) in qrow.iter().zip(krow) {
                        s = s + *a * *b;
                    }
                    *pj = s * inv_sqrt_dh;
                }
                softmax_row(&mut prow[..t + 1]);
            }
            for t in 0..t_len {
                for j in 0..=t {
                    let w = p.row(t)[j];
                    if w == S::zero() {
                        continue;
                    }
                    // Split borrow: v row j is read, ctx row t written.
                    let vrow = &v.data[j * d + o..j * d + o + dh];
                    let crow = &mut ctx.data[t * d + o..t * d + o + dh];
                    for (c, vv) in crow.iter_mut().zip(vrow) {
                        *c = *c + w * *vv;
                    }
                }
            }
            probs.push(p);
        }

        let mut attn_out = ctx.matmul(&lp.wo);
        attn_out.add_row_bias(lp.bo.row(0));
        let mut x_mid = x.clone();
        for (a, b) in x_mid.data.iter_mut().zip(&attn_out.data) {
            *a = *a + *b;
        }

        let (ln2, ln2_out) = norm_forward(&x_mid, &lp.ln2_g, &lp.ln2_b);
        let mut h_pre = ln2_out.matmul(&lp.w1);
        h_pre.add_row_bias(lp.b1.row(0));
        let mut h_act = h_pre.clone();
        for a in &mut h_act.data {
            *a = gelu(*a);
        }
        let mut ff_out = h_act.matmul(&lp.w2);
        ff_out.add_row_bias(lp.b2.row(0));
        let mut x_out = x_mid.clone();
        for (a, b) in x_out.data.iter_mut().zip(&ff_out.data) {
            *a = *a + *b;
        }

        (
            LayerCache {
                ln1,
                ln1_out,
                q,
                k,
                v,
                probs,
                ctx,
                ln2,
                ln2_out,
                h_pre,
                h_act,
            },
            x_out,
        )
    }

    /// Fresh incremental-decoding state.
    pub fn new_cache(&self) -> KvCache<S> {
        KvCache {
            k: (0..self.layers.len())
                .map(|_| Mat::zeros(self.config.context_len, self.config.model_dim))
                .collect(),
            v: (0..self.layers.len())
                .map(|_| Mat::zeros(self.config.context_len, self.config.model_dim))
                .collect(),
            len: 0,
        }
    }

    /// Feed one token at the next position; returns that position's
    /// logits row. Attention reads the cached keys/values in the same
    /// order as the batch forward pass.
    pub fn step(&self, cache: &mut KvCache<S>, id: u16) -> Result<Vec<S>, LmError> {
        let pos = cache.len;
        if pos >= self.config.context_len {
            return Err(LmError::SequenceTooLong {
                len: pos + 1,
                context: self.config.context_len,
            });
        }
        assert!((id as usize) < self.config.vocab_size, "token id out of range");
        let d = self.config.model_dim;
        let heads = self.config.heads;
        let dh = self.config.head_dim();
        let inv_sqrt_dh = S::from_f64(1.0 / (dh as f64).sqrt());

        let mut x = Mat::zeros(1, d);
        for (o, (a, b)) in x
            .row_mut(0)
            .iter_mut()
            .zip(self.tok_emb.row(id as usize).iter().zip(self.pos_emb.row(pos)))
        {
            *o = *a + *b;
        }

        for (li, lp) in self.layers.iter().enumerate() {
            let (_, h) = norm_forward(&x, &lp.ln1_g, &lp.ln1_b);
            let mut q = h.matmul(&lp.wq);
            q.add_row_bias(lp.bq.row(0));
            let mut krow = h.matmul(&lp.wk);
            krow.add_row_bias(lp.bk.row(0));
            let mut vrow = h.matmul(&lp.wv);
            vrow.add_row_bias(lp.bv.row(0));
            cache.k[li].row_mut(pos).copy_from_slice(krow.row(0));
            cache.v[li].row_mut(pos).copy_from_slice(vrow.row(0));

            let mut ctx = Mat::zeros(1, d);
            let mut scores = vec![S::zero(); pos + 1];
            for hh in 0..heads {
                let o = hh * dh;
                let qrow = &q.row(0)[o..o + dh];
                for (j, sj) in scores.iter_mut().enumerate() {
                    let kj = &cache.k[li].row(j)[o..o + dh];
                    let mut s = S::zero();
                    for (a, b) in qrow.iter().zip(kj) {
                        s = s + *a * *b;
                    }
                    *sj = s * inv_sqrt_dh;
                }
                softmax_row(&mut scores);
                for (j, &w) in scores.iter().enumerate() {
                    if w == S::zero() {
                        continue;
                    }
                    let vj = &cache.v[li].row(j)[o..o + dh];
                    for (c, vv) in ctx.row_mut(0)[o..o + dh].iter_mut().zip(vj) {
                        *c = *c + w * *vv;
                    }
                }
            }
            let mut attn_out = ctx.matmul(&lp.wo);
            attn_out.add_row_bias(lp.bo.row(0));
            for (a, b) in x.data.iter_mut().zip(&attn_out.data) {
                *a = *a + *b;
            }

            let (_, ln2_out) = norm_forward(&x, &lp.ln2_g, &lp.ln2_b);
            let mut h_pre = ln2_out.matmul(&lp.w1);
            h_pre.add_row_bias(lp.b1.row(0));
            for a in &mut h_pre.data {
                *a = gelu(*a);
            }
            let mut ff_out = h_pre.matmul(&lp.w2);
            ff_out.add_row_bias(lp.b2.row(0));
            for (a, b) in x.data.iter_mut().zip(&ff_out.data) {
                *a = *a + *b;
            }
        }

        let (_, hidden) = norm_forward(&x, &self.lnf_g, &self.lnf_b);
        let logits = hidden.matmul_nt(&self.tok_emb);
        cache.len += 1;
        Ok(logits.data)
    }
}

fn ones<S: Scalar>(rows: usize, cols: usize) -> Mat<S> {
    Mat {
        rows,
        cols,
        data: vec![S::one(); rows * cols],
    }
}

/// Incremental-decoding state: cached keys/values per layer.
pub struct KvCache<S = f32> {
    k: Vec<Mat<S>>,
    v: Vec<Mat<S>>,
    pub len: usize,
}

/// Per-row normalization statistics retained for the backward pass.
pub(crate) struct NormCache<S> {
    pub rstd: Vec<S>,
    pub normed: Mat<S>,
}

pub(crate) struct LayerCache<S> {
    pub ln1: NormCache<S>,
    pub ln1_out: Mat<S>,
    pub q: Mat<S>,
    pub k: Mat<S>,
    pub v: Mat<S>,
    pub probs: Vec<Mat<S>>,
    pub ctx: Mat<S>,
    pub ln2: NormCache<S>,
    pub ln2_out: Mat<S>,
    pub h_pre: Mat<S>,
    pub h_act: Mat<S>,
}

pub(crate) struct Cache<S> {
    pub ids: Vec<u16>,
    pub layers: Vec<LayerCache<S>>,
    pub lnf: NormCache<S>,
    pub final_hidden: Mat<S>,
}

/// Layer normalization with mean/variance accumulated in f64.
pub(crate) fn norm_forward<S: Scalar>(
    x: &Mat<S>,
    gain: &Mat<S>,
    bias: &Mat<S>,
) -> (NormCache<S>, Mat<S>) {
    let (rows, cols) = (x.rows, x.cols);
    let mut rstd = Vec::with_capacity(rows);
    let mut normed = Mat::zeros(rows, cols);
    let mut out = Mat::zeros(rows, cols);
    for r in 0..rows {
        let row = x.row(r);
        let mu = row.iter().map(|v| v.as_f64()).sum::<f64>() / cols as f64;
        let var = row
            .iter()
            .map(|v| {
                let d = v.as_f64() - mu;
                d * d
            })
            .sum::<f64>()
            / cols as f64;
        let rs = 1.0 / (var + LN_EPS).sqrt();
        let mu_s = S::from_f64(mu);
        let rs_s = S::from_f64(rs);
        rstd.push(rs_s);
        for c in 0..cols {
            let n = (row[c] - mu_s) * rs_s;
            normed.row_mut(r)[c] = n;
            out.row_mut(r)[c] = gain.row(0)[c] * n + bias.row(0)[c];
        }
    }
    (NormCache { rstd, normed }, out)
}
