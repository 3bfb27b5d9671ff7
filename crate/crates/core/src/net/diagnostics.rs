//! Checks that use only the forward pass: central finite differences for
//! gradient verification, and a perturbation probe for cross-window flow.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::{cross_entropy_loss, forward, window_attention, NetInput};
use super::config::NetworkConfig;
use super::model::backward;
use super::params::{NetworkParams, ParamKind, ParamSpec};
use super::scalar::Scalar;
use crate::error::Result;

/// Loss of one labelled input at the current parameters.
pub fn loss_at<T: Scalar>(params: &NetworkParams<T>, input: &NetInput<T>, label: usize, lambda: f64) -> Result<f64> {
    let trace = forward(params, input)?;
    Ok(cross_entropy_loss(&trace, label, params, lambda))
}

/// Central difference `(L(theta + h) - L(theta - h)) / 2h` for one parameter.
pub fn central_difference(
    params: &mut NetworkParams<f64>,
    index: usize,
    input: &NetInput<f64>,
    label: usize,
    lambda: f64,
    h: f64,
) -> Result<f64> {
    let orig = params.values[index];
    params.values[index] = orig + h;
    let up = loss_at(params, input, label, lambda)?;
    params.values[index] = orig - h;
    let down = loss_at(params, input, label, lambda)?;
    params.values[index] = orig;
    Ok((up - down) / (2.0 * h))
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Random input matching `params.config`, values in `[0, 1)`.
pub fn random_input<T: Scalar>(params: &NetworkParams<T>, seed: u64) -> NetInput<T> {
    let cfg = &params.config;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| (0..n).map(|_| T::c(rng.random::<f64>())).collect::<Vec<T>>();
    NetInput {
        image: draw(cfg.image_px * cfg.image_px),
        heatmap: draw(cfg.heat_px * cfg.heat_px),
        coords: draw(cfg.coord_input()),
    }
}

/// Largest absolute change in token `target`'s block output when token
/// `source`'s input embedding is perturbed by `±delta` (alternating by channel).
pub fn cross_window_response<T: Scalar>(
    params: &NetworkParams<T>,
    block: usize,
    tokens: &[T],
    source: usize,
    target: usize,
    shifted: bool,
    delta: f64,
) -> Result<f64> {
    let d = params.config.embed_dim;
    let base = window_attention(params, block, tokens, shifted)?;
    let mut moved = tokens.to_vec();
    // Alternating signs: a constant offset would be removed by the pre-norm.
    for (c, v) in moved[source * d..(source + 1) * d].iter_mut().enumerate() {
        *v = *v + T::c(if c % 2 == 0 { delta } else { -delta });
    }
    let after = window_attention(params, block, &moved, shifted)?;
    Ok(base[target * d..(target + 1) * d]
        .iter()
        .zip(&after[target * d..(target + 1) * d])
        .map(|(a, b)| (a.as_f64() - b.as_f64()).abs())
        .fold(0.0, f64::max))
}

/// [`NetworkParams::init`] followed by random biases, gains and position
/// biases, so that no path through the network is trivially zero.
pub fn jittered_params(cfg: &NetworkConfig, seed: u64) -> Result<NetworkParams<f64>> {
    let mut p = NetworkParams::<f64>::init(cfg, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
    let layout = p.layout.clone();
    for spec in &layout.specs {
        if spec.kind != ParamKind::Weight {
            for v in &mut p.values[spec.seg.range()] {
                *v += rng.random_range(-0.3..0.3);
            }
        }
    }
    Ok(p)
}

/// Coarse grouping of parameter arrays used when reporting gradient checks.
pub fn layer_type(spec: &ParamSpec) -> &'static str {
    let n = spec.name.as_str();
    match spec.kind {
        ParamKind::NormGain | ParamKind::NormBias => "layer_norm",
        ParamKind::PositionBias => "relative_position_bias",
        _ if n.starts_with("patch") => "patch_embed",
        _ if n.contains("qkv") || n.contains("proj") => "attention_linear",
        _ if n.contains("mlp") => "transformer_mlp",
        _ if n.starts_with("conv") => "conv",
        _ if n.starts_with("coord") => "coord_mlp",
        _ => "fusion_classifier",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerCheck {
    pub layer: &'static str,
    pub total: usize,
    pub checked: usize,
    pub max_rel_error: f64,
    /// Description of the entry with the largest error.
    pub worst: String,
}

/// Compares [`backward`] with [`central_difference`] on up to `per_layer`
/// randomly chosen entries of every layer type (all entries when fewer).
pub fn gradient_check(
    params: &mut NetworkParams<f64>,
    input: &NetInput<f64>,
    label: usize,
    lambda: f64,
    h: f64,
    per_layer: usize,
    seed: u64,
) -> Result<Vec<LayerCheck>> {
    let trace = forward(params, input)?;
    let grads = backward(params, &trace, label, lambda)?;
    let mut groups: Vec<(&'static str, Vec<(usize, String)>)> = Vec::new();
    for spec in params.layout.specs.iter() {
        let t = layer_type(spec);
        let entries = spec.seg.range().map(|i| (i, format!("{}[{}]", spec.name, i - spec.seg.offset)));
        match groups.iter_mut().find(|(g, _)| *g == t) {
            Some((_, v)) => v.extend(entries),
            None => groups.push((t, entries.collect())),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (layer, entries) in groups {
        let mut picked: Vec<usize> = if entries.len() <= per_layer {
            (0..entries.len()).collect()
        } else {
            sample(&mut rng, entries.len(), per_layer).into_vec()
        };
        picked.sort_unstable();
        let mut check = LayerCheck { layer, total: entries.len(), checked: picked.len(), max_rel_error: 0.0, worst: String::new() };
        for j in picked {
            let (i, ref name) = entries[j];
            let numeric = central_difference(params, i, input, label, lambda, h)?;
            let rel = relative_error(grads[i], numeric, 1e-7);
            if rel > check.max_rel_error || check.worst.is_empty() {
                check.max_rel_error = rel;
                check.worst = format!("{name}: analytic {:.6e}, numeric {:.6e}", grads[i], numeric);
            }
        }
        out.push(check);
    }
    Ok(out)
}
