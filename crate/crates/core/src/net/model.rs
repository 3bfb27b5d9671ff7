//! Tri-branch forward pass, loss, and exact reverse-mode gradients.
//!
//! ```text
//! image   -> patch embed -> [window block, shifted block]* -> LN -> mean pool -> h_p
//! heatmap -> conv3x3/2 + ReLU -> conv3x3/2 + ReLU -> flatten              -> h_g
//! coords  -> affine+ReLU -> affine+ReLU -> affine                         -> h_c
//! [h_p | h_g | h_c] -> LayerNorm -> linear -> softmax
//! ```

use super::attention::{block_backward, block_forward, split_pair, BlockCache};
use super::config::{NetworkConfig, CONV_STRIDE};
use super::ops::{
    bias_backward, layer_norm_backward, layer_norm_rows, linear_backward_input, linear_backward_weight,
    linear_forward, log_sum_exp, relu, softmax, LnCache, LN_EPS,
};
use super::params::{FuseIdx, LinearIdx, NetworkParams};
use super::scalar::Scalar;
use crate::error::{Error, Result};
use crate::scene::Sample;

/// Probability floor used when reporting cross-entropy.
pub const PROB_FLOOR: f64 = 1e-12;

/// Network-ready features of one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct NetInput<T> {
    /// `image_px x image_px`, already pooled to the network resolution.
    pub image: Vec<T>,
    pub heatmap: Vec<T>,
    pub coords: Vec<T>,
}

impl<T: Scalar> NetInput<T> {
    /// Average-pools the stored image down to `cfg.image_px` and checks shapes.
    pub fn from_sample(sample: &Sample, dataset_image_px: usize, cfg: &NetworkConfig) -> Result<Self> {
        if dataset_image_px % cfg.image_px != 0 {
            return Err(Error::Mismatch(format!(
                "dataset image side {dataset_image_px} is not a multiple of the network input {}",
                cfg.image_px
            )));
        }
        if sample.heatmap.len() != cfg.heat_px * cfg.heat_px {
            return Err(Error::Mismatch(format!("heatmap has {} pixels, network expects {}^2", sample.heatmap.len(), cfg.heat_px)));
        }
        if sample.coords.len() != cfg.coord_input() {
            return Err(Error::Mismatch(format!("coord vector has {} entries, network expects {}", sample.coords.len(), cfg.coord_input())));
        }
        if sample.image.len() != dataset_image_px * dataset_image_px {
            return Err(Error::Mismatch("image size does not match dataset metadata".into()));
        }
        Ok(Self {
            image: average_pool(&sample.image, dataset_image_px, cfg.image_px),
            heatmap: sample.heatmap.iter().map(|&v| T::from_f32(v)).collect(),
            coords: sample.coords.iter().map(|&v| T::from_f32(v)).collect(),
        })
    }

    fn check(&self, cfg: &NetworkConfig) -> Result<()> {
        if self.image.len() != cfg.image_px * cfg.image_px
            || self.heatmap.len() != cfg.heat_px * cfg.heat_px
            || self.coords.len() != cfg.coord_input()
        {
            return Err(Error::Mismatch("input shape does not match the network configuration".into()));
        }
        Ok(())
    }
}

/// Box-filter downsampling of a square image from side `from` to side `to`.
pub fn average_pool<T: Scalar>(image: &[f32], from: usize, to: usize) -> Vec<T> {
    let f = from / to;
    let inv = 1.0 / (f * f) as f64;
    let mut out = Vec::with_capacity(to * to);
    for oy in 0..to {
        for ox in 0..to {
            let mut s = 0.0f64;
            for y in oy * f..(oy + 1) * f {
                for x in ox * f..(ox + 1) * f {
                    s += image[y * from + x] as f64;
                }
            }
            out.push(T::c(s * inv));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhotoCache<T> {
    patches: Vec<T>,
    blocks: Vec<BlockCache<T>>,
    final_ln: LnCache<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvCache<T> {
    input: Vec<T>,
    side: usize,
    /// Post-ReLU output.
    out: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordCache<T> {
    a1: Vec<T>,
    a2: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FuseCache<T> {
    Norm(LnCache<T>),
    Relu(Vec<T>),
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace<T> {
    fingerprint: u64,
    config: NetworkConfig,
    input: NetInput<T>,
    photo: Option<PhotoCache<T>>,
    heat: Option<[ConvCache<T>; 2]>,
    coord: Option<CoordCache<T>>,
    /// Concatenated branch outputs.
    pub fused_input: Vec<T>,
    fuse: FuseCache<T>,
    pub logits: Vec<T>,
    pub probabilities: Vec<T>,
}

impl<T: Scalar> ForwardTrace<T> {
    pub fn input(&self) -> &NetInput<T> {
        &self.input
    }

    pub fn params_fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Index of the most probable class, ties to the lower index.
    pub fn predicted(&self) -> usize {
        argmax(&self.probabilities)
    }
}

pub fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn patchify<T: Scalar>(image: &[T], cfg: &NetworkConfig) -> Vec<T> {
    let (s, p, g) = (cfg.image_px, cfg.patch_px, cfg.grid());
    let mut out = Vec::with_capacity(s * s);
    for ty in 0..g {
        for tx in 0..g {
            for py in 0..p {
                let row = (ty * p + py) * s + tx * p;
                out.extend_from_slice(&image[row..row + p]);
            }
        }
    }
    out
}

fn photo_forward<T: Scalar>(params: &NetworkParams<T>, image: &[T]) -> (Vec<T>, PhotoCache<T>) {
    let cfg = &params.config;
    let idx = params.index();
    let (n_tok, d, pp) = (cfg.tokens(), cfg.embed_dim, cfg.patch_px * cfg.patch_px);
    let patches = patchify(image, cfg);
    let mut x = linear_forward(&patches, params.get(idx.patch.w), params.get(idx.patch.b), n_tok, pp, d);
    let mut blocks = Vec::with_capacity(cfg.num_blocks);
    for (i, bi) in idx.blocks.iter().enumerate() {
        let (out, cache) = block_forward(params, bi, x, i % 2 == 1);
        blocks.push(cache);
        x = out;
    }
    let final_ln = layer_norm_rows(&x, params.get(idx.photo_ln.g), params.get(idx.photo_ln.b), LN_EPS);
    let inv = T::c(1.0 / n_tok as f64);
    let mut h = vec![T::zero(); d];
    for row in final_ln.y.chunks_exact(d) {
        for (hc, &v) in h.iter_mut().zip(row) {
            *hc = *hc + v;
        }
    }
    h.iter_mut().for_each(|v| *v = *v * inv);
    (h, PhotoCache { patches, blocks, final_ln })
}

fn photo_backward<T: Scalar>(params: &NetworkParams<T>, cache: &PhotoCache<T>, dh: &[T], grads: &mut [T]) {
    let cfg = &params.config;
    let idx = params.index();
    let (n_tok, d, pp) = (cfg.tokens(), cfg.embed_dim, cfg.patch_px * cfg.patch_px);
    let inv = T::c(1.0 / n_tok as f64);
    let dy: Vec<T> = (0..n_tok).flat_map(|_| dh.iter().map(move |&v| v * inv)).collect();
    let (dg, db) = split_pair(grads, idx.photo_ln.g.range(), idx.photo_ln.b.range());
    let mut dx = layer_norm_backward(&cache.final_ln, params.get(idx.photo_ln.g), &dy, dg, db);
    for (bi, bc) in idx.blocks.iter().zip(&cache.blocks).rev() {
        dx = block_backward(params, bi, bc, &dx, grads);
    }
    linear_backward_weight(&cache.patches, &dx, &mut grads[idx.patch.w.range()], n_tok, pp, d);
    bias_backward(&dx, &mut grads[idx.patch.b.range()]);
}

/// Valid-padding 2-D convolution followed by ReLU. Weight layout `[cout, cin, k, k]`,
/// input `[cin, side, side]`. Returns the output and its side.
pub fn conv2d_relu<T: Scalar>(
    input: &[T],
    cin: usize,
    side: usize,
    weight: &[T],
    bias: &[T],
    kernel: usize,
    stride: usize,
) -> (Vec<T>, usize) {
    let cout = bias.len();
    let os = (side - kernel) / stride + 1;
    let mut out = vec![T::zero(); cout * os * os];
    for co in 0..cout {
        for oy in 0..os {
            for ox in 0..os {
                let mut acc = bias[co];
                for ci in 0..cin {
                    for ky in 0..kernel {
                        let irow = (ci * side + oy * stride + ky) * side + ox * stride;
                        let wrow = ((co * cin + ci) * kernel + ky) * kernel;
                        for kx in 0..kernel {
                            acc = acc + weight[wrow + kx] * input[irow + kx];
                        }
                    }
                }
                out[(co * os + oy) * os + ox] = relu(acc);
            }
        }
    }
    (out, os)
}

/// Gradient of [`conv2d_relu`]; returns `d input` when `want_input` is set.
#[allow(clippy::too_many_arguments)]
fn conv2d_relu_backward<T: Scalar>(
    cache: &ConvCache<T>,
    cin: usize,
    weight: &[T],
    kernel: usize,
    dout: &[T],
    dw: &mut [T],
    db: &mut [T],
    want_input: bool,
) -> Option<Vec<T>> {
    let side = cache.side;
    let cout = db.len();
    let os = (side - kernel) / CONV_STRIDE + 1;
    let mut din = want_input.then(|| vec![T::zero(); cin * side * side]);
    for co in 0..cout {
        for oy in 0..os {
            for ox in 0..os {
                let o = (co * os + oy) * os + ox;
                if cache.out[o] <= T::zero() {
                    continue;
                }
                let g = dout[o];
                db[co] = db[co] + g;
                for ci in 0..cin {
                    for ky in 0..kernel {
                        let irow = (ci * side + oy * CONV_STRIDE + ky) * side + ox * CONV_STRIDE;
                        let wrow = ((co * cin + ci) * kernel + ky) * kernel;
                        for kx in 0..kernel {
                            dw[wrow + kx] = dw[wrow + kx] + g * cache.input[irow + kx];
                            if let Some(d) = din.as_mut() {
                                d[irow + kx] = d[irow + kx] + g * weight[wrow + kx];
                            }
                        }
                    }
                }
            }
        }
    }
    din
}

fn heat_forward<T: Scalar>(params: &NetworkParams<T>, heatmap: &[T]) -> (Vec<T>, [ConvCache<T>; 2]) {
    let cfg = &params.config;
    let idx = params.index();
    let [c1, _] = cfg.cnn_channels;
    let k = cfg.cnn_kernel;
    let (a1, s1) = conv2d_relu(heatmap, 1, cfg.heat_px, params.get(idx.conv[0].w), params.get(idx.conv[0].b), k, CONV_STRIDE);
    let (a2, _) = conv2d_relu(&a1, c1, s1, params.get(idx.conv[1].w), params.get(idx.conv[1].b), k, CONV_STRIDE);
    let caches = [
        ConvCache { input: heatmap.to_vec(), side: cfg.heat_px, out: a1.clone() },
        ConvCache { input: a1, side: s1, out: a2.clone() },
    ];
    (a2, caches)
}

fn heat_backward<T: Scalar>(params: &NetworkParams<T>, caches: &[ConvCache<T>; 2], dh: &[T], grads: &mut [T]) {
    let cfg = &params.config;
    let idx = params.index();
    let [c1, _] = cfg.cnn_channels;
    let k = cfg.cnn_kernel;
    let (dw2, db2) = split_pair(grads, idx.conv[1].w.range(), idx.conv[1].b.range());
    let da1 = conv2d_relu_backward(&caches[1], c1, params.get(idx.conv[1].w), k, dh, dw2, db2, true)
        .expect("input gradient requested");
    let (dw1, db1) = split_pair(grads, idx.conv[0].w.range(), idx.conv[0].b.range());
    conv2d_relu_backward(&caches[0], 1, params.get(idx.conv[0].w), k, &da1, dw1, db1, false);
}

fn dense<T: Scalar>(params: &NetworkParams<T>, l: &LinearIdx, x: &[T], inp: usize, out: usize) -> Vec<T> {
    linear_forward(x, params.get(l.w), params.get(l.b), 1, inp, out)
}

fn coord_forward<T: Scalar>(params: &NetworkParams<T>, s: &[T]) -> (Vec<T>, CoordCache<T>) {
    let cfg = &params.config;
    let idx = params.index();
    let (ni, h) = (cfg.coord_input(), cfg.coord_hidden);
    let a1: Vec<T> = dense(params, &idx.coord[0], s, ni, h).into_iter().map(relu).collect();
    let a2: Vec<T> = dense(params, &idx.coord[1], &a1, h, h).into_iter().map(relu).collect();
    let out = dense(params, &idx.coord[2], &a2, h, h);
    (out, CoordCache { a1, a2 })
}

fn coord_backward<T: Scalar>(params: &NetworkParams<T>, input: &[T], cache: &CoordCache<T>, dh: &[T], grads: &mut [T]) {
    let cfg = &params.config;
    let idx = params.index();
    let (ni, h) = (cfg.coord_input(), cfg.coord_hidden);
    let step = |grads: &mut [T], l: &LinearIdx, x: &[T], dy: &[T], inp: usize| {
        linear_backward_weight(x, dy, &mut grads[l.w.range()], 1, inp, h);
        bias_backward(dy, &mut grads[l.b.range()]);
    };
    step(grads, &idx.coord[2], &cache.a2, dh, h);
    let mut d2 = linear_backward_input(dh, params.get(idx.coord[2].w), 1, h, h);
    mask_relu(&mut d2, &cache.a2);
    step(grads, &idx.coord[1], &cache.a1, &d2, h);
    let mut d1 = linear_backward_input(&d2, params.get(idx.coord[1].w), 1, h, h);
    mask_relu(&mut d1, &cache.a1);
    step(grads, &idx.coord[0], input, &d1, ni);
}

fn mask_relu<T: Scalar>(grad: &mut [T], post: &[T]) {
    for (g, &a) in grad.iter_mut().zip(post) {
        if a <= T::zero() {
            *g = T::zero();
        }
    }
}

fn check_config<T: Scalar>(params: &NetworkParams<T>) -> Result<()> {
    if params.values.len() != params.layout.total {
        return Err(Error::Config("parameter vector length does not match layout".into()));
    }
    Ok(())
}

/// Photometric branch output `h_p` (length `embed_dim`).
pub fn photometric_encode<T: Scalar>(params: &NetworkParams<T>, image: &[T]) -> Result<Vec<T>> {
    check_config(params)?;
    let cfg = &params.config;
    if image.len() != cfg.image_px * cfg.image_px {
        return Err(Error::Config(format!("image has {} pixels, expected {}^2", image.len(), cfg.image_px)));
    }
    Ok(photo_forward(params, image).0)
}

/// Heatmap branch output `h_g`, the flattened second convolution.
pub fn geometric_encode<T: Scalar>(params: &NetworkParams<T>, heatmap: &[T]) -> Result<Vec<T>> {
    check_config(params)?;
    let cfg = &params.config;
    if heatmap.len() != cfg.heat_px * cfg.heat_px {
        return Err(Error::Config(format!("heatmap has {} pixels, expected {}^2", heatmap.len(), cfg.heat_px)));
    }
    Ok(heat_forward(params, heatmap).0)
}

/// Coordinate branch output `h_c`.
pub fn coord_encode<T: Scalar>(params: &NetworkParams<T>, coords: &[T]) -> Result<Vec<T>> {
    check_config(params)?;
    if coords.len() != params.config.coord_input() {
        return Err(Error::Config(format!(
            "coord vector has {} entries, expected {}",
            coords.len(),
            params.config.coord_input()
        )));
    }
    Ok(coord_forward(params, coords).0)
}

/// One transformer block on a `grid x grid x embed_dim` token lattice.
pub fn window_attention<T: Scalar>(params: &NetworkParams<T>, block: usize, tokens: &[T], shifted: bool) -> Result<Vec<T>> {
    check_config(params)?;
    let cfg = &params.config;
    let bi = params
        .index()
        .blocks
        .get(block)
        .ok_or_else(|| Error::Config(format!("block {block} out of range")))?;
    if tokens.len() != cfg.tokens() * cfg.embed_dim {
        return Err(Error::Config("token lattice has the wrong size".into()));
    }
    Ok(block_forward(params, bi, tokens.to_vec(), shifted).0)
}

fn fuse<T: Scalar>(params: &NetworkParams<T>, z: &[T]) -> (Vec<T>, FuseCache<T>) {
    let cfg = &params.config;
    let idx = params.index();
    let fused = cfg.fused_dim();
    match idx.fuse {
        FuseIdx::Norm(n) => {
            let ln = layer_norm_rows(z, params.get(n.g), params.get(n.b), LN_EPS);
            let logits = dense(params, &idx.cls, &ln.y, fused, cfg.k);
            (logits, FuseCache::Norm(ln))
        }
        FuseIdx::Relu(l) => {
            let hidden: Vec<T> = dense(params, &l, z, fused, cfg.fusion_hidden).into_iter().map(relu).collect();
            let logits = dense(params, &idx.cls, &hidden, cfg.fusion_hidden, cfg.k);
            (logits, FuseCache::Relu(hidden))
        }
    }
}

/// Concatenate `(h_p, h_g, h_c)`, fuse, classify. Returns `(probabilities, logits)`.
pub fn fuse_forward<T: Scalar>(params: &NetworkParams<T>, h_p: &[T], h_g: &[T], h_c: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    check_config(params)?;
    let cfg = &params.config;
    if h_p.len() != cfg.photometric_dim() || h_g.len() != cfg.heatmap_dim() || h_c.len() != cfg.coord_dim() {
        return Err(Error::Config("branch output widths do not match the configuration".into()));
    }
    let z: Vec<T> = h_p.iter().chain(h_g).chain(h_c).copied().collect();
    let (logits, _) = fuse(params, &z);
    Ok((softmax(&logits), logits))
}

/// Full forward pass with every intermediate kept for [`backward`].
pub fn forward<T: Scalar>(params: &NetworkParams<T>, input: &NetInput<T>) -> Result<ForwardTrace<T>> {
    check_config(params)?;
    input.check(&params.config)?;
    Ok(forward_unchecked(params, params.fingerprint(), input))
}

pub(crate) fn forward_unchecked<T: Scalar>(params: &NetworkParams<T>, fingerprint: u64, input: &NetInput<T>) -> ForwardTrace<T> {
    let cfg = &params.config;
    let br = cfg.branches;
    let (photo_out, photo) = if br.photometric {
        let (h, c) = photo_forward(params, &input.image);
        (h, Some(c))
    } else {
        (vec![T::zero(); cfg.photometric_dim()], None)
    };
    let (heat_out, heat) = if br.heatmap {
        let (h, c) = heat_forward(params, &input.heatmap);
        (h, Some(c))
    } else {
        (vec![T::zero(); cfg.heatmap_dim()], None)
    };
    let (coord_out, coord) = if br.coords {
        let (h, c) = coord_forward(params, &input.coords);
        (h, Some(c))
    } else {
        (vec![T::zero(); cfg.coord_dim()], None)
    };

    let mut z = photo_out;
    z.extend_from_slice(&heat_out);
    z.extend_from_slice(&coord_out);
    let (logits, fuse_cache) = fuse(params, &z);
    let probabilities = softmax(&logits);
    ForwardTrace {
        fingerprint,
        config: *cfg,
        input: input.clone(),
        photo,
        heat,
        coord,
        fused_input: z,
        fuse: fuse_cache,
        logits,
        probabilities,
    }
}

/// Class probabilities for one input.
pub fn predict<T: Scalar>(params: &NetworkParams<T>, input: &NetInput<T>) -> Result<Vec<T>> {
    Ok(forward(params, input)?.probabilities)
}

/// Cross-entropy `-ln p_label` computed from logits via log-sum-exp, with
/// `p_label` floored at [`PROB_FLOOR`]. The flag reports whether the floor was hit.
pub fn cross_entropy_from_logits<T: Scalar>(logits: &[T], label: usize) -> (f64, bool) {
    let ce = (log_sum_exp(logits) - logits[label]).as_f64();
    let cap = -PROB_FLOOR.ln();
    if ce > cap {
        (cap, true)
    } else {
        (ce, false)
    }
}

/// Cross-entropy from an explicit probability vector.
pub fn cross_entropy_from_probabilities<T: Scalar>(probabilities: &[T], label: usize) -> f64 {
    -probabilities[label].as_f64().max(PROB_FLOOR).ln()
}

/// `-ln p_label + lambda * sum(theta^2)` over the parameters of enabled branches.
pub fn cross_entropy_loss<T: Scalar>(trace: &ForwardTrace<T>, label: usize, params: &NetworkParams<T>, lambda: f64) -> f64 {
    cross_entropy_from_logits(&trace.logits, label).0 + lambda * params.squared_norm()
}

/// Gradient of [`cross_entropy_loss`] w.r.t. every parameter, flat in layout order.
/// Parameters of disabled branches get exactly zero.
pub fn backward<T: Scalar>(params: &NetworkParams<T>, trace: &ForwardTrace<T>, label: usize, lambda: f64) -> Result<Vec<T>> {
    if trace.config != params.config || trace.fingerprint != params.fingerprint() {
        return Err(Error::StaleTrace);
    }
    if label >= params.config.k {
        return Err(Error::InvalidArgument(format!("label {label} >= k {}", params.config.k)));
    }
    let mut grads = vec![T::zero(); params.len()];
    backward_into(params, trace, label, T::one(), &mut grads);
    if lambda != 0.0 {
        add_regularizer_grad(params, lambda, T::one(), &mut grads);
    }
    Ok(grads)
}

/// `grads += 2 * lambda * theta * weight` over enabled branches.
pub(crate) fn add_regularizer_grad<T: Scalar>(params: &NetworkParams<T>, lambda: f64, weight: T, grads: &mut [T]) {
    let c = T::c(2.0 * lambda) * weight;
    for spec in &params.layout.specs {
        if params.config.branches.is_enabled(spec.branch) {
            for (g, &v) in grads[spec.seg.range()].iter_mut().zip(params.get(spec.seg)) {
                *g = *g + c * v;
            }
        }
    }
}

/// Accumulates `weight * d CE / d theta` into `grads` (no regulariser).
pub(crate) fn backward_into<T: Scalar>(params: &NetworkParams<T>, trace: &ForwardTrace<T>, label: usize, weight: T, grads: &mut [T]) {
    let cfg = &params.config;
    let idx = params.index();
    let (_, clamped) = cross_entropy_from_logits(&trace.logits, label);
    if clamped {
        return;
    }
    let dlogits: Vec<T> = trace
        .probabilities
        .iter()
        .enumerate()
        .map(|(j, &p)| (if j == label { p - T::one() } else { p }) * weight)
        .collect();

    let fused = cfg.fused_dim();
    let dz = match (&trace.fuse, idx.fuse) {
        (FuseCache::Norm(ln), FuseIdx::Norm(n)) => {
            linear_backward_weight(&ln.y, &dlogits, &mut grads[idx.cls.w.range()], 1, fused, cfg.k);
            bias_backward(&dlogits, &mut grads[idx.cls.b.range()]);
            let dy = linear_backward_input(&dlogits, params.get(idx.cls.w), 1, fused, cfg.k);
            let (dg, db) = split_pair(grads, n.g.range(), n.b.range());
            layer_norm_backward(ln, params.get(n.g), &dy, dg, db)
        }
        (FuseCache::Relu(hidden), FuseIdx::Relu(l)) => {
            let fh = cfg.fusion_hidden;
            linear_backward_weight(hidden, &dlogits, &mut grads[idx.cls.w.range()], 1, fh, cfg.k);
            bias_backward(&dlogits, &mut grads[idx.cls.b.range()]);
            let mut dh = linear_backward_input(&dlogits, params.get(idx.cls.w), 1, fh, cfg.k);
            mask_relu(&mut dh, hidden);
            linear_backward_weight(&trace.fused_input, &dh, &mut grads[l.w.range()], 1, fused, fh);
            bias_backward(&dh, &mut grads[l.b.range()]);
            linear_backward_input(&dh, params.get(l.w), 1, fused, fh)
        }
        _ => unreachable!("fusion cache and layout disagree"),
    };

    let (dp, dg) = (cfg.photometric_dim(), cfg.heatmap_dim());
    if let Some(c) = &trace.photo {
        photo_backward(params, c, &dz[..dp], grads);
    }
    if let Some(c) = &trace.heat {
        heat_backward(params, c, &dz[dp..dp + dg], grads);
    }
    if let Some(c) = &trace.coord {
        coord_backward(params, &trace.input.coords, c, &dz[dp + dg..], grads);
    }
}
