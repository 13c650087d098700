//! Manual backpropagation through the traced encoder forward pass.

use super::forward::{EncodeTrace, LnTrace};
use super::{EncoderGrads, EncoderState};
use crate::linalg::Mat;

/// Accumulate parameter gradients for one sequence into `grads`, given the
/// gradient `d_output` of a scalar loss with respect to the final hidden
/// states (`n×d`). Positional encodings are constants; the input gradient
/// lands in the embedding rows of the sequence's tokens.
pub fn backward(trace: &EncodeTrace, state: &EncoderState, d_output: &Mat, grads: &mut EncoderGrads) {
    let cfg = &state.config;
    let dk = cfg.head_dim();
    let scale = 1.0 / (dk as f64).sqrt();

    let mut d = d_output.clone();
    for layer_idx in (0..state.layers.len()).rev() {
        let tr = &trace.layers[layer_idx];
        let params = &state.layers[layer_idx];
        let g = &mut grads.layers[layer_idx];

        // out = LN2(r2)
        let dr2 = ln_backward(&d, &tr.ln2, &params.ln2_gain, &mut g.ln2_gain, &mut g.ln2_bias);

        // r2 = h1 + dropout(ffn_out)
        let mut d_ffn_out = dr2.clone();
        if let Some(mask) = &tr.drop_ffn {
            mul_mask(&mut d_ffn_out, mask);
        }
        let mut d_h1 = dr2;

        // ffn_out = relu(h1·w1 + b1)·w2 + b2
        add_col_sums(&d_ffn_out, &mut g.b2);
        g.w2.add_assign(&tr.ffn_act.matmul_transa(&d_ffn_out));
        let mut d_pre = d_ffn_out.matmul_transb(&params.w2);
        for (dp, &pre) in d_pre.data_mut().iter_mut().zip(tr.ffn_pre.data()) {
            if pre <= 0.0 {
                *dp = 0.0;
            }
        }
        add_col_sums(&d_pre, &mut g.b1);
        g.w1.add_assign(&tr.h1.matmul_transa(&d_pre));
        d_h1.add_assign(&d_pre.matmul_transb(&params.w1));

        // h1 = LN1(r1)
        let dr1 = ln_backward(&d_h1, &tr.ln1, &params.ln1_gain, &mut g.ln1_gain, &mut g.ln1_bias);

        // r1 = x_in + dropout(attn_out)
        let mut d_attn_out = dr1.clone();
        if let Some(mask) = &tr.drop_attn {
            mul_mask(&mut d_attn_out, mask);
        }
        let mut d_x = dr1;

        // attn_out = ctx·wo
        g.wo.add_assign(&tr.ctx.matmul_transa(&d_attn_out));
        let d_ctx = d_attn_out.matmul_transb(&params.wo);

        let n = d_ctx.rows();
        let mut d_q = Mat::zeros(n, cfg.dim);
        let mut d_k = Mat::zeros(n, cfg.dim);
        let mut d_v = Mat::zeros(n, cfg.dim);
        for h in 0..cfg.heads {
            let (c0, c1) = (h * dk, (h + 1) * dk);
            let d_head = d_ctx.cols_copy(c0, c1);
            let weights = &tr.attn[h];
            let vh = tr.v.cols_copy(c0, c1);
            let qh = tr.q.cols_copy(c0, c1);
            let kh = tr.k.cols_copy(c0, c1);

            // head = weights·vh
            let d_weights = d_head.matmul_transb(&vh);
            d_v.add_cols(c0, &weights.matmul_transa(&d_head));

            // weights = softmax(scores); masked columns carry zero weight
            // and therefore zero gradient.
            let mut d_scores = softmax_rows_backward(weights, &d_weights);
            d_scores.scale(scale);

            // scores = qh·khᵀ (pre-scale)
            d_q.add_cols(c0, &d_scores.matmul(&kh));
            d_k.add_cols(c0, &d_scores.matmul_transa(&qh));
        }

        // q = x_in·wq, k = x_in·wk, v = x_in·wv
        g.wq.add_assign(&tr.x_in.matmul_transa(&d_q));
        g.wk.add_assign(&tr.x_in.matmul_transa(&d_k));
        g.wv.add_assign(&tr.x_in.matmul_transa(&d_v));
        d_x.add_assign(&d_q.matmul_transb(&params.wq));
        d_x.add_assign(&d_k.matmul_transb(&params.wk));
        d_x.add_assign(&d_v.matmul_transb(&params.wv));

        d = d_x;
    }

    for (pos, &tok) in trace.tokens.iter().enumerate() {
        let src = d.row(pos);
        let dst = grads.embedding.row_mut(tok);
        for (g, s) in dst.iter_mut().zip(src) {
            *g += s;
        }
    }
}

/// `y = xhat ⊙ gain + bias` with `xhat = (x − μ)/σ`; returns `dx` and
/// accumulates the gain/bias gradients.
fn ln_backward(
    dy: &Mat,
    trace: &LnTrace,
    gain: &[f64],
    d_gain: &mut [f64],
    d_bias: &mut [f64],
) -> Mat {
    let (n, d) = (dy.rows(), dy.cols());
    let inv_d = 1.0 / d as f64;
    let mut dx = Mat::zeros(n, d);
    for i in 0..n {
        let dy_row = dy.row(i);
        let xhat_row = trace.xhat.row(i);
        let mut mean_dxhat = 0.0;
        let mut mean_dxhat_xhat = 0.0;
        for j in 0..d {
            let dxhat = dy_row[j] * gain[j];
            mean_dxhat += dxhat;
            mean_dxhat_xhat += dxhat * xhat_row[j];
            d_gain[j] += dy_row[j] * xhat_row[j];
            d_bias[j] += dy_row[j];
        }
        mean_dxhat *= inv_d;
        mean_dxhat_xhat *= inv_d;
        let istd = trace.inv_std[i];
        let dx_row = dx.row_mut(i);
        for j in 0..d {
            let dxhat = dy_row[j] * gain[j];
            dx_row[j] = istd * (dxhat - mean_dxhat - xhat_row[j] * mean_dxhat_xhat);
        }
    }
    dx
}

/// Row-wise softmax Jacobian-vector product: `ds = w ⊙ (dw − Σ_j dw_j w_j)`.
fn softmax_rows_backward(weights: &Mat, d_weights: &Mat) -> Mat {
    let (n, m) = (weights.rows(), weights.cols());
    let mut out = Mat::zeros(n, m);
    for i in 0..n {
        let w = weights.row(i);
        let dw = d_weights.row(i);
        let dot: f64 = w.iter().zip(dw).map(|(a, b)| a * b).sum();
        let o = out.row_mut(i);
        for j in 0..m {
            o[j] = w[j] * (dw[j] - dot);
        }
    }
    out
}

fn add_col_sums(x: &Mat, acc: &mut [f64]) {
    for i in 0..x.rows() {
        for (a, v) in acc.iter_mut().zip(x.row(i)) {
            *a += v;
        }
    }
}

fn mul_mask(x: &mut Mat, mask: &Mat) {
    for (v, m) in x.data_mut().iter_mut().zip(mask.data()) {
        *v *= m;
    }
}
