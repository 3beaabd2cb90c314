//! Next-token training: cross-entropy loss, the hand-written backward
//! pass, an adaptive-moment optimizer with global-norm clipping, and
//! the epoch loop over fixed-length windows of the token stream.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::PAD;

use super::math::{gelu_grad, log_sum_exp, softmax_row, Mat, Scalar};
use super::model::{Cache, LayerCache, LayerParams, LmError, NormCache, Params};

// --------------------------------------------------------------- loss

/// Mean negative log-likelihood of `targets` under `logits`, over
/// non-PAD target positions (0 when every position is PAD).
pub fn nll_loss<S: Scalar>(logits: &Mat<S>, targets: &[u16]) -> Result<f64, LmError> {
    let (sum, n, _) = ce_components(logits, targets, false)?;
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

/// Summed loss, unmasked-position count, and (when `want_grad`) the
/// un-normalized loss gradient w.r.t. the logits: `softmax − onehot`
/// per unmasked row.
fn ce_components<S: Scalar>(
    logits: &Mat<S>,
    targets: &[u16],
    want_grad: bool,
) -> Result<(f64, usize, Mat<S>), LmError> {
    if logits.rows != targets.len() {
        return Err(LmError::ShapeMismatch(format!(
            "{} logits rows vs {} targets",
            logits.rows,
            targets.len()
        )));
    }
    let mut dlogits = Mat::zeros(if want_grad { logits.rows } else { 0 }, logits.cols);
    let mut sum = 0f64;
    let mut n = 0usize;
    for (t, &y) in targets.iter().enumerate() {
        if y == PAD {
            continue;
        }
        let row = logits.row(t);
        if y as usize >= row.len() {
            return Err(LmError::ShapeMismatch(format!(
                "target {y} outside vocab {}",
                row.len()
            )));
        }
        sum += log_sum_exp(row) - row[y as usize].as_f64();
        n += 1;
        if want_grad {
            let drow = dlogits.row_mut(t);
            drow.copy_from_slice(row);
            softmax_row(drow);
            drow[y as usize] = drow[y as usize] - S::one();
        }
    }
    Ok((sum, n, dlogits))
}

/// Mean loss and its gradient for one (inputs, targets) pair.
pub fn loss_and_grad<S: Scalar>(
    params: &Params<S>,
    inputs: &[u16],
    targets: &[u16],
) -> Result<(f64, Params<S>), LmError> {
    let (cache, logits) = params.forward_cached(inputs)?;
    let (sum, n, mut dlogits) = ce_components(&logits, targets, true)?;
    if n == 0 {
        return Ok((0.0, params.zeros_like()));
    }
    let scale = S::from_f64(1.0 / n as f64);
    for x in &mut dlogits.data {
        *x = *x * scale;
    }
    Ok((sum / n as f64, backward(params, &cache, &dlogits)))
}

// ------------------------------------------------------------ backward

/// Gradient of a scalar objective with gradient `dlogits` w.r.t. every
/// parameter; mirrors `forward_cached` exactly, in reverse.
pub(crate) fn backward<S: Scalar>(
    params: &Params<S>,
    cache: &Cache<S>,
    dlogits: &Mat<S>,
) -> Params<S> {
    let mut g = params.zeros_like();

    // Tied output projection: logits = hidden @ tok_emb.T
    dlogits.matmul_tn_acc(&cache.final_hidden, &mut g.tok_emb);
    let dhidden = dlogits.matmul(&params.tok_emb);

    let mut dx = norm_backward(
        &cache.lnf,
        &params.lnf_g,
        &dhidden,
        &mut g.lnf_g,
        &mut g.lnf_b,
    );

    for li in (0..params.layers.len()).rev() {
        dx = layer_backward(
            params,
            &params.layers[li],
            &cache.layers[li],
            &dx,
            &mut g.layers[li],
        );
    }

    for (t, &id) in cache.ids.iter().enumerate() {
        let drow = dx.row(t);
        for (gv, dv) in g.tok_emb.row_mut(id as usize).iter_mut().zip(drow) {
            *gv = *gv + *dv;
        }
        for (gv, dv) in g.pos_emb.row_mut(t).iter_mut().zip(drow) {
            *gv = *gv + *dv;
        }
    }
    g
}

fn layer_backward<S: Scalar>(
    params: &Params<S>,
    lp: &LayerParams<S>,
    lc: &LayerCache<S>,
    dx_out: &Mat<S>,
    g: &mut LayerParams<S>,
) -> Mat<S> {
    let t_len = dx_out.rows;
    let d = params.config.model_dim;
    let heads = params.config.heads;
    let dh = params.config.head_dim();
    let inv_sqrt_dh = S::from_f64(1.0 / (dh as f64).sqrt());

    // Feed-forward half: x_out = x_mid + W2·gelu(W1·ln2(x_mid)+b1)+b2
    lc.h_act.matmul_tn_acc(dx_out, &mut g.w2);
    col_sum_acc(dx_out, &mut g.b2);
    let mut dh_act = dx_out.matmul_nt(&lp.w2);
    for (a, &pre) in dh_act.data.iter_mut().zip(&lc.h_pre.data) {
        *a = *a * gelu_grad(pre);
    }
    lc.ln2_out.matmul_tn_acc(&dh_act, &mut g.w1);
    col_sum_acc(&dh_act, &mut g.b1);
    let dln2_out = dh_act.matmul_nt(&lp.w1);
    let mut dx_mid = norm_backward(&lc.ln2, &lp.ln2_g, &dln2_out, &mut g.ln2_g, &mut g.ln2_b);
    for (a, b) in dx_mid.data.iter_mut().zip(&dx_out.data) {
        *a = *a + *b; // residual
    }

    // Attention half: x_mid = x + Wo·attend(q,k,v)+bo
    lc.ctx.matmul_tn_acc(&dx_mid, &mut g.wo);
    col_sum_acc(&dx_mid, &mut g.bo);
    let dctx = dx_mid.matmul_nt(&lp.wo);

    let mut dq = Mat::zeros(t_len, d);
    let mut dk = Mat::zeros(t_len, d);
    let mut dv = Mat::zeros(t_len, d);
    let mut dp = vec![S::zero(); t_len];
    for h in 0..heads {
        let o = h * dh;
        let p = &lc.probs[h];
        for t in 0..t_len {
            let dctx_t = &dctx.row(t)[o..o + dh];
            let prow = p.row(t);
            for j in 0..=t {
                let vrow = &lc.v.row(j)[o..o + dh];
                let mut s = S::zero();
                for (a, b) in dctx_t.iter().zip(vrow) {
                    s = s + *a * *b;
                }
                dp[j] = s;
                let w = prow[j];
                for (gv, cv) in dv.row_mut(j)[o..o + dh].iter_mut().zip(dctx_t) {
                    *gv = *gv + w * *cv;
                }
            }
            // Softmax backward on the causal row.
            let mut p_dot_dp = 0f64;
            for j in 0..=t {
                p_dot_dp += (prow[j] * dp[j]).as_f64();
            }
            let p_dot_dp = S::from_f64(p_dot_dp);
            for j in 0..=t {
                let ds = prow[j] * (dp[j] - p_dot_dp) * inv_sqrt_dh;
                if ds == S::zero() {
                    continue;
                }
                let krow = &lc.k.row(j)[o..o + dh];
                for (gv, kv) in dq.row_mut(t)[o..o + dh].iter_mut().zip(krow) {
                    *gv = *gv + ds * *kv;
                }
                let qrow = &lc.q.row(t)[o..o + dh];
                for (gv, qv) in dk.row_mut(j)[o..o + dh].iter_mut().zip(qrow) {
                    *gv = *gv + ds * *qv;
                }
            }
        }
    }

    lc.ln1_out.matmul_tn_acc(&dq, &mut g.wq);
    col_sum_acc(&dq, &mut g.bq);
    lc.ln1_out.matmul_tn_acc(&dk, &mut g.wk);
    col_sum_acc(&dk, &mut g.bk);
    lc.ln1_out.matmul_tn_acc(&dv, &mut g.wv);
    col_sum_acc(&dv, &mut g.bv);
    let mut dln1_out = dq.matmul_nt(&lp.wq);
    for (a, b) in dln1_out.data.iter_mut().zip(dk.matmul_nt(&lp.wk).data) {
        *a = *a + b;
    }
    for (a, b) in dln1_out.data.iter_mut().zip(dv.matmul_nt(&lp.wv).data) {
        *a = *a + b;
    }
    let mut dx = norm_backward(&lc.ln1, &lp.ln1_g, &dln1_out, &mut g.ln1_g, &mut g.ln1_b);
    for (a, b) in dx.data.iter_mut().zip(&dx_mid.data) {
        *a = *a + *b; // residual
    }
    dx
}

fn norm_backward<S: Scalar>(
    nc: &NormCache<S>,
    gain: &Mat<S>,
    dout: &Mat<S>,
    dgain: &mut Mat<S>,
    dbias: &mut Mat<S>,
) -> Mat<S> {
    let (rows, cols) = (dout.rows, dout.cols);
    let inv_cols = 1.0 / cols as f64;
    let mut dx = Mat::zeros(rows, cols);
    for r in 0..rows {
        let n = nc.normed.row(r);
        let dorow = dout.row(r);
        let grow = gain.row(0);
        let mut mean_dn = 0f64;
        let mut mean_dnn = 0f64;
        for c in 0..cols {
            dgain.data[c] = dgain.data[c] + dorow[c] * n[c];
            dbias.data[c] = dbias.data[c] + dorow[c];
            let dn = (dorow[c] * grow[c]).as_f64();
            mean_dn += dn;
            mean_dnn += dn * n[c].as_f64();
        }
        let mean_dn = S::from_f64(mean_dn * inv_cols);
        let mean_dnn = S::from_f64(mean_dnn * inv_cols);
        let rstd = nc.rstd[r];
        for c in 0..cols {
            let dn = dorow[c] * grow[c];
            dx.row_mut(r)[c] = rstd * (dn - mean_dn - n[c] * mean_dnn);
        }
    }
    dx
}

fn col_sum_acc<S: Scalar>(m: &Mat<S>, out: &mut Mat<S>) {
    debug_assert_eq!(out.data.len(), m.cols);
    for r in 0..m.rows {
        for (o, v) in out.data.iter_mut().zip(m.row(r)) {
            *o = *o + *v;
        }
    }
}

// ------------------------------------------------------------ optimizer

/// Adaptive-moment optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient-norm ceiling.
    pub clip: f64,
}

impl Default for AdamHyper {
    fn default() -> AdamHyper {
        AdamHyper {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip: 1.0,
        }
    }
}

/// Optimizer state: first/second moment per parameter.
pub struct Adam<S = f32> {
    m: Params<S>,
    v: Params<S>,
    t: u64,
    pub hyper: AdamHyper,
}

impl<S: Scalar> Adam<S> {
    pub fn new(params: &Params<S>, hyper: AdamHyper) -> Adam<S> {
        Adam {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
            hyper,
        }
    }

    /// One update step; `grads` is clipped to global norm `clip` first.
    pub fn step(&mut self, params: &mut Params<S>, grads: &Params<S>) {
        let h = self.hyper;
        let mut norm_sq = 0f64;
        for t in grads.tensors() {
            for &x in &t.data {
                let v = x.as_f64();
                norm_sq += v * v;
            }
        }
        let norm = norm_sq.sqrt();
        let scale = if norm > h.clip { h.clip / norm } else { 1.0 };

        self.t += 1;
        let bc1 = 1.0 - h.beta1.powi(self.t as i32);
        let bc2 = 1.0 - h.beta2.powi(self.t as i32);
        let (b1, b2) = (S::from_f64(h.beta1), S::from_f64(h.beta2));
        let (ob1, ob2) = (S::from_f64(1.0 - h.beta1), S::from_f64(1.0 - h.beta2));
        let scale = S::from_f64(scale);
        let lr = S::from_f64(h.lr);
        let eps = S::from_f64(h.eps);
        let (ibc1, ibc2) = (S::from_f64(1.0 / bc1), S::from_f64(1.0 / bc2));

        let mut pt = params.tensors_mut();
        let mut mt = self.m.tensors_mut();
        let mut vt = self.v.tensors_mut();
        let gt = grads.tensors();
        for i in 0..pt.len() {
            let p = &mut pt[i].data;
            let m = &mut mt[i].data;
            let v = &mut vt[i].data;
            let gsrc = &gt[i].data;
            for j in 0..p.len() {
                let g = gsrc[j] * scale;
                m[j] = b1 * m[j] + ob1 * g;
                v[j] = b2 * v[j] + ob2 * g * g;
                let mhat = m[j] * ibc1;
                let vhat = v[j] * ibc2;
                p[j] = p[j] - lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

// ------------------------------------------------------------- training

/// Supervised training settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainHyper {
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    /// Shuffling seed; independent of the weight-init seed.
    pub seed: u64,
}

impl Default for TrainHyper {
    fn default() -> TrainHyper {
        TrainHyper {
            lr: 3e-4,
            batch: 64,
            epochs: 10,
            seed: 0,
        }
    }
}

/// Concatenate token sequences into one stream and cut it into windows
/// of `context_len + 1` tokens with stride `context_len`, so every
/// adjacent-token transition is trained exactly once; the tail window
/// is PAD-padded.
pub fn build_windows(seqs: &[Vec<u16>], context_len: usize) -> Vec<Vec<u16>> {
    let stream: Vec<u16> = seqs.iter().flatten().copied().collect();
    let mut windows = Vec::new();
    let mut start = 0;
    while start + 1 < stream.len() {
        let end = (start + context_len + 1).min(stream.len());
        let mut w = stream[start..end].to_vec();
        w.resize(context_len + 1, PAD);
        windows.push(w);
        start += context_len;
    }
    windows
}

/// Train over the windows; returns the per-epoch token-weighted mean
/// loss (measured on the fly over the pre-update batches).
pub fn train<S: Scalar>(
    params: &mut Params<S>,
    windows: &[Vec<u16>],
    hyper: &TrainHyper,
) -> Vec<f64> {
    assert!(hyper.batch > 0 && hyper.epochs > 0, "hyper must be positive");
    let context = params.config.context_len;
    let mut adam = Adam::new(
        params,
        AdamHyper {
            lr: hyper.lr,
            ..AdamHyper::default()
        },
    );
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut curve = Vec::with_capacity(hyper.epochs);

    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0f64;
        let mut epoch_tokens = 0usize;
        for chunk in order.chunks(hyper.batch) {
            let mut acc = params.zeros_like();
            let mut batch_tokens = 0usize;
            for &wi in chunk {
                let w = &windows[wi];
                debug_assert_eq!(w.len(), context + 1);
                let (cache, logits) = params
                    .forward_cached(&w[..context])
                    .expect("window fits context");
                let (sum, n, dlogits) =
                    ce_components(&logits, &w[1..], true).expect("shapes fixed");
                if n == 0 {
                    continue;
                }
                let g = backward(params, &cache, &dlogits);
                for (a, b) in acc.tensors_mut().into_iter().zip(g.tensors()) {
                    for (x, y) in a.data.iter_mut().zip(&b.data) {
                        *x = *x + *y;
                    }
                }
                epoch_loss += sum;
                batch_tokens += n;
            }
            if batch_tokens == 0 {
                continue;
            }
            let inv = S::from_f64(1.0 / batch_tokens as f64);
            for t in acc.tensors_mut() {
                for x in &mut t.data {
                    *x = *x * inv;
                }
            }
            adam.step(params, &acc);
            epoch_tokens += batch_tokens;
        }
        curve.push(if epoch_tokens == 0 {
            0.0
        } else {
            epoch_loss / epoch_tokens as f64
        });
    }
    curve
}

/// Loss curve in CSV form.
pub fn loss_curve_csv(curve: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (i, l) in curve.iter().enumerate() {
        out.push_str(&format!("{i},{l:.6}\n"));
    }
    out
}
