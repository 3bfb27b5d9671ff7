//! Shifted-window multi-head self-attention blocks.
//!
//! Tokens live on a `grid x grid` lattice in row-major order. A block
//! partitions the lattice into `window x window` groups and attends only
//! within a group. Shifted blocks first roll the lattice by `-shift` in both
//! axes, so groups straddle the unshifted window boundaries; the roll is
//! implemented as a gather/scatter permutation and is undone on output.

use super::config::NetworkConfig;
use super::ops::{
    axpy, bias_backward, dot, gelu, gelu_grad, layer_norm_backward, layer_norm_rows, linear_backward_input,
    linear_backward_weight, linear_forward, LnCache, LN_EPS,
};
use super::params::{BlockIdx, NetworkParams};
use super::scalar::Scalar;

/// Token bookkeeping for one block: window membership and relative offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPlan {
    /// `perm[w * n + i]` is the lattice index of local token `i` in window `w`.
    pub perm: Vec<usize>,
    /// Row into the relative-bias table for local pair `(i, j)`, flattened `i * n + j`.
    pub rel_index: Vec<usize>,
    pub per_window: usize,
    pub windows: usize,
}

impl WindowPlan {
    pub fn new(grid: usize, window: usize, shift: usize) -> Self {
        let per_row = grid / window;
        let n = window * window;
        let windows = per_row * per_row;
        let mut perm = Vec::with_capacity(windows * n);
        for w in 0..windows {
            let (wy, wx) = (w / per_row, w % per_row);
            for l in 0..n {
                let (ly, lx) = (l / window, l % window);
                let gy = (wy * window + ly + shift) % grid;
                let gx = (wx * window + lx + shift) % grid;
                perm.push(gy * grid + gx);
            }
        }
        let side = 2 * window - 1;
        let mut rel_index = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let dy = (i / window) + window - 1 - (j / window);
                let dx = (i % window) + window - 1 - (j % window);
                rel_index.push(dy * side + dx);
            }
        }
        Self { perm, rel_index, per_window: n, windows }
    }

    /// Window index of each lattice token.
    pub fn window_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.perm.len()];
        for (p, &t) in self.perm.iter().enumerate() {
            out[t] = p / self.per_window;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockCache<T> {
    pub shifted: bool,
    pub x: Vec<T>,
    pub ln1: LnCache<T>,
    pub qkv: Vec<T>,
    pub attn: Vec<T>,
    pub ctx: Vec<T>,
    pub x1: Vec<T>,
    pub ln2: LnCache<T>,
    pub m1: Vec<T>,
    pub act: Vec<T>,
}

fn plan_for(cfg: &NetworkConfig, shifted: bool) -> WindowPlan {
    WindowPlan::new(cfg.grid(), cfg.window, if shifted { cfg.shift } else { 0 })
}

/// Pre-norm block: `x1 = x + Proj(WindowAttn(LN1(x)))`, `out = x1 + MLP(LN2(x1))`.
pub(crate) fn block_forward<T: Scalar>(
    params: &NetworkParams<T>,
    bi: &BlockIdx,
    x: Vec<T>,
    shifted: bool,
) -> (Vec<T>, BlockCache<T>) {
    let cfg = &params.config;
    let (n_tok, d, heads) = (cfg.tokens(), cfg.embed_dim, cfg.heads);
    let hd = d / heads;
    let plan = plan_for(cfg, shifted);
    let n = plan.per_window;
    let scale = T::c(1.0 / (hd as f64).sqrt());

    let ln1 = layer_norm_rows(&x, params.get(bi.ln1.g), params.get(bi.ln1.b), LN_EPS);
    let qkv = linear_forward(&ln1.y, params.get(bi.qkv.w), params.get(bi.qkv.b), n_tok, d, 3 * d);
    let rel = params.get(bi.rel);

    let mut attn = vec![T::zero(); plan.windows * heads * n * n];
    let mut ctx = vec![T::zero(); n_tok * d];
    for win in 0..plan.windows {
        let toks = &plan.perm[win * n..(win + 1) * n];
        for h in 0..heads {
            let a = &mut attn[(win * heads + h) * n * n..(win * heads + h + 1) * n * n];
            for i in 0..n {
                let qi = &qkv[toks[i] * 3 * d + h * hd..toks[i] * 3 * d + (h + 1) * hd];
                let row = &mut a[i * n..(i + 1) * n];
                let mut max = T::neg_infinity();
                for j in 0..n {
                    let kb = toks[j] * 3 * d + d + h * hd;
                    let s = dot(qi, &qkv[kb..kb + hd]) * scale + rel[plan.rel_index[i * n + j] * heads + h];
                    row[j] = s;
                    max = max.max(s);
                }
                let mut sum = T::zero();
                for r in row.iter_mut() {
                    *r = (*r - max).exp();
                    sum = sum + *r;
                }
                let inv = T::one() / sum;
                let ci = &mut ctx[toks[i] * d + h * hd..toks[i] * d + (h + 1) * hd];
                for j in 0..n {
                    row[j] = row[j] * inv;
                    let vb = toks[j] * 3 * d + 2 * d + h * hd;
                    axpy(row[j], &qkv[vb..vb + hd], ci);
                }
            }
        }
    }

    let proj = linear_forward(&ctx, params.get(bi.proj.w), params.get(bi.proj.b), n_tok, d, d);
    let x1: Vec<T> = x.iter().zip(&proj).map(|(&a, &b)| a + b).collect();

    let ln2 = layer_norm_rows(&x1, params.get(bi.ln2.g), params.get(bi.ln2.b), LN_EPS);
    let hid = cfg.mlp_hidden;
    let m1 = linear_forward(&ln2.y, params.get(bi.mlp1.w), params.get(bi.mlp1.b), n_tok, d, hid);
    let act: Vec<T> = m1.iter().map(|&v| gelu(v)).collect();
    let m2 = linear_forward(&act, params.get(bi.mlp2.w), params.get(bi.mlp2.b), n_tok, hid, d);
    let out: Vec<T> = x1.iter().zip(&m2).map(|(&a, &b)| a + b).collect();

    let cache = BlockCache { shifted, x, ln1, qkv, attn, ctx, x1, ln2, m1, act };
    (out, cache)
}

/// Returns the gradient w.r.t. the block input; parameter gradients are accumulated into `grads`.
pub(crate) fn block_backward<T: Scalar>(
    params: &NetworkParams<T>,
    bi: &BlockIdx,
    cache: &BlockCache<T>,
    dout: &[T],
    grads: &mut [T],
) -> Vec<T> {
    let cfg = &params.config;
    let (n_tok, d, heads, hid) = (cfg.tokens(), cfg.embed_dim, cfg.heads, cfg.mlp_hidden);
    let hd = d / heads;
    let plan = plan_for(cfg, cache.shifted);
    let n = plan.per_window;
    let scale = T::c(1.0 / (hd as f64).sqrt());

    // MLP branch.
    linear_backward_weight(&cache.act, dout, &mut grads[bi.mlp2.w.range()], n_tok, hid, d);
    bias_backward(dout, &mut grads[bi.mlp2.b.range()]);
    let mut dm1 = linear_backward_input(dout, params.get(bi.mlp2.w), n_tok, hid, d);
    for (g, &m) in dm1.iter_mut().zip(&cache.m1) {
        *g = *g * gelu_grad(m);
    }
    linear_backward_weight(&cache.ln2.y, &dm1, &mut grads[bi.mlp1.w.range()], n_tok, d, hid);
    bias_backward(&dm1, &mut grads[bi.mlp1.b.range()]);
    let dln2 = linear_backward_input(&dm1, params.get(bi.mlp1.w), n_tok, d, hid);
    let (dg2, db2) = split_pair(grads, bi.ln2.g.range(), bi.ln2.b.range());
    let dx1_mlp = layer_norm_backward(&cache.ln2, params.get(bi.ln2.g), &dln2, dg2, db2);
    let dx1: Vec<T> = dout.iter().zip(&dx1_mlp).map(|(&a, &b)| a + b).collect();

    // Attention branch.
    linear_backward_weight(&cache.ctx, &dx1, &mut grads[bi.proj.w.range()], n_tok, d, d);
    bias_backward(&dx1, &mut grads[bi.proj.b.range()]);
    let dctx = linear_backward_input(&dx1, params.get(bi.proj.w), n_tok, d, d);

    let qkv = &cache.qkv;
    let mut dqkv = vec![T::zero(); n_tok * 3 * d];
    let mut drel = vec![T::zero(); bi.rel.len];
    let mut da = vec![T::zero(); n];
    let mut dq = vec![T::zero(); hd];
    for win in 0..plan.windows {
        let toks = &plan.perm[win * n..(win + 1) * n];
        for h in 0..heads {
            let a = &cache.attn[(win * heads + h) * n * n..(win * heads + h + 1) * n * n];
            for i in 0..n {
                let ti = toks[i];
                let dci = &dctx[ti * d + h * hd..ti * d + (h + 1) * hd];
                let row = &a[i * n..(i + 1) * n];
                let mut s = T::zero();
                for j in 0..n {
                    let vb = toks[j] * 3 * d + 2 * d + h * hd;
                    da[j] = dot(dci, &qkv[vb..vb + hd]);
                    s = s + row[j] * da[j];
                    axpy(row[j], dci, &mut dqkv[vb..vb + hd]);
                }
                dq.iter_mut().for_each(|v| *v = T::zero());
                let qb = ti * 3 * d + h * hd;
                for j in 0..n {
                    let ds = row[j] * (da[j] - s);
                    drel[plan.rel_index[i * n + j] * heads + h] = drel[plan.rel_index[i * n + j] * heads + h] + ds;
                    let kb = toks[j] * 3 * d + d + h * hd;
                    axpy(ds * scale, &qkv[kb..kb + hd], &mut dq);
                    for c in 0..hd {
                        dqkv[kb + c] = dqkv[kb + c] + ds * scale * qkv[qb + c];
                    }
                }
                axpy(T::one(), &dq, &mut dqkv[qb..qb + hd]);
            }
        }
    }
    axpy(T::one(), &drel, &mut grads[bi.rel.range()]);

    linear_backward_weight(&cache.ln1.y, &dqkv, &mut grads[bi.qkv.w.range()], n_tok, d, 3 * d);
    bias_backward(&dqkv, &mut grads[bi.qkv.b.range()]);
    let dln1 = linear_backward_input(&dqkv, params.get(bi.qkv.w), n_tok, d, 3 * d);
    let (dg1, db1) = split_pair(grads, bi.ln1.g.range(), bi.ln1.b.range());
    let dx_attn = layer_norm_backward(&cache.ln1, params.get(bi.ln1.g), &dln1, dg1, db1);
    dx1.iter().zip(&dx_attn).map(|(&a, &b)| a + b).collect()
}

/// Two disjoint mutable ranges of the same buffer; `a` must precede `b`.
pub(crate) fn split_pair<T>(buf: &mut [T], a: std::ops::Range<usize>, b: std::ops::Range<usize>) -> (&mut [T], &mut [T]) {
    assert!(a.end <= b.start, "ranges must be ordered and disjoint");
    let (head, tail) = buf.split_at_mut(b.start);
    (&mut head[a], &mut tail[..b.end - b.start])
}
