use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Branch, FusionMode, NetworkConfig};
use super::scalar::Scalar;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    NormGain,
    NormBias,
    /// Relative-position attention bias.
    PositionBias,
}

/// A contiguous slice of the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seg {
    pub offset: usize,
    pub len: usize,
}

impl Seg {
    #[inline]
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: ParamKind,
    pub branch: Branch,
    /// Fan-in/fan-out used by the uniform initialiser.
    pub fans: (usize, usize),
    pub seg: Seg,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LinearIdx {
    pub w: Seg,
    pub b: Seg,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct NormIdx {
    pub g: Seg,
    pub b: Seg,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BlockIdx {
    pub ln1: NormIdx,
    pub qkv: LinearIdx,
    pub rel: Seg,
    pub proj: LinearIdx,
    pub ln2: NormIdx,
    pub mlp1: LinearIdx,
    pub mlp2: LinearIdx,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum FuseIdx {
    Norm(NormIdx),
    Relu(LinearIdx),
}

#[derive(Debug, Clone)]
pub(crate) struct Index {
    pub patch: LinearIdx,
    pub blocks: Vec<BlockIdx>,
    pub photo_ln: NormIdx,
    pub conv: [LinearIdx; 2],
    pub coord: [LinearIdx; 3],
    pub fuse: FuseIdx,
    pub cls: LinearIdx,
}

/// Names, shapes and offsets of every learnable array for one configuration.
#[derive(Debug, Clone)]
pub struct Layout {
    pub specs: Vec<ParamSpec>,
    pub total: usize,
    pub(crate) index: Index,
}

struct Builder {
    specs: Vec<ParamSpec>,
    total: usize,
}

impl Builder {
    fn push(&mut self, name: String, shape: Vec<usize>, kind: ParamKind, branch: Branch, fans: (usize, usize)) -> Seg {
        let len = shape.iter().product();
        let seg = Seg { offset: self.total, len };
        self.total += len;
        self.specs.push(ParamSpec { name, shape, kind, branch, fans, seg });
        seg
    }

    fn linear(&mut self, name: &str, inp: usize, out: usize, branch: Branch) -> LinearIdx {
        LinearIdx {
            w: self.push(format!("{name}.w"), vec![inp, out], ParamKind::Weight, branch, (inp, out)),
            b: self.push(format!("{name}.b"), vec![out], ParamKind::Bias, branch, (inp, out)),
        }
    }

    fn conv(&mut self, name: &str, cin: usize, cout: usize, k: usize, branch: Branch) -> LinearIdx {
        let fans = (cin * k * k, cout * k * k);
        LinearIdx {
            w: self.push(format!("{name}.w"), vec![cout, cin, k, k], ParamKind::Weight, branch, fans),
            b: self.push(format!("{name}.b"), vec![cout], ParamKind::Bias, branch, fans),
        }
    }

    fn norm(&mut self, name: &str, d: usize, branch: Branch) -> NormIdx {
        NormIdx {
            g: self.push(format!("{name}.g"), vec![d], ParamKind::NormGain, branch, (d, d)),
            b: self.push(format!("{name}.b"), vec![d], ParamKind::NormBias, branch, (d, d)),
        }
    }
}

impl Layout {
    pub fn new(cfg: &NetworkConfig) -> Self {
        let mut b = Builder { specs: Vec::new(), total: 0 };
        let d = cfg.embed_dim;
        let p = Branch::Photometric;

        let patch = b.linear("patch", cfg.patch_px * cfg.patch_px, d, p);
        let rel_len = (2 * cfg.window - 1) * (2 * cfg.window - 1);
        let blocks = (0..cfg.num_blocks)
            .map(|i| {
                let n = |s: &str| format!("block{i}.{s}");
                BlockIdx {
                    ln1: b.norm(&n("ln1"), d, p),
                    qkv: b.linear(&n("qkv"), d, 3 * d, p),
                    rel: b.push(n("relbias"), vec![rel_len, cfg.heads], ParamKind::PositionBias, p, (rel_len, cfg.heads)),
                    proj: b.linear(&n("proj"), d, d, p),
                    ln2: b.norm(&n("ln2"), d, p),
                    mlp1: b.linear(&n("mlp1"), d, cfg.mlp_hidden, p),
                    mlp2: b.linear(&n("mlp2"), cfg.mlp_hidden, d, p),
                }
            })
            .collect();
        let photo_ln = b.norm("photo.ln", d, p);

        let h = Branch::Heatmap;
        let [c1, c2] = cfg.cnn_channels;
        let conv = [
            b.conv("conv1", 1, c1, cfg.cnn_kernel, h),
            b.conv("conv2", c1, c2, cfg.cnn_kernel, h),
        ];

        let c = Branch::Coords;
        let hc = cfg.coord_hidden;
        let coord = [
            b.linear("coord1", cfg.coord_input(), hc, c),
            b.linear("coord2", hc, hc, c),
            b.linear("coord3", hc, hc, c),
        ];

        let f = Branch::Fusion;
        let fused = cfg.fused_dim();
        let (fuse, cls) = match cfg.fusion {
            FusionMode::LayerNorm => (FuseIdx::Norm(b.norm("fuse.ln", fused, f)), b.linear("cls", fused, cfg.k, f)),
            FusionMode::Relu => (
                FuseIdx::Relu(b.linear("fuse", fused, cfg.fusion_hidden, f)),
                b.linear("cls", cfg.fusion_hidden, cfg.k, f),
            ),
        };

        Layout {
            specs: b.specs,
            total: b.total,
            index: Index { patch, blocks, photo_ln, conv, coord, fuse, cls },
        }
    }

    pub fn find(&self, name: &str) -> Option<&ParamSpec> {
        self.specs.iter().find(|s| s.name == name)
    }

    /// Per-entry mask: `true` where the parameter belongs to an enabled branch.
    pub fn trainable_mask(&self, cfg: &NetworkConfig) -> Vec<bool> {
        let mut mask = vec![false; self.total];
        for s in &self.specs {
            if cfg.branches.is_enabled(s.branch) {
                mask[s.seg.range()].iter_mut().for_each(|m| *m = true);
            }
        }
        mask
    }
}

/// All learnable arrays of the network, stored flat in layout order.
#[derive(Debug, Clone)]
pub struct NetworkParams<T> {
    pub config: NetworkConfig,
    pub layout: Arc<Layout>,
    pub values: Vec<T>,
}

impl<T: Scalar> PartialEq for NetworkParams<T> {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.values == other.values
    }
}

impl<T: Scalar> NetworkParams<T> {
    pub fn zeros(config: &NetworkConfig) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(config);
        Ok(Self {
            config: *config,
            values: vec![T::zero(); layout.total],
            layout: Arc::new(layout),
        })
    }

    /// Glorot-uniform weights, zero biases and position biases, unit norm gains.
    pub fn init(config: &NetworkConfig, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = Arc::clone(&p.layout);
        for spec in &layout.specs {
            let dst = &mut p.values[spec.seg.range()];
            match spec.kind {
                ParamKind::Weight => {
                    let bound = (6.0 / (spec.fans.0 + spec.fans.1) as f64).sqrt();
                    for v in dst.iter_mut() {
                        *v = T::c(rng.random_range(-bound..bound));
                    }
                }
                ParamKind::NormGain => dst.iter_mut().for_each(|v| *v = T::one()),
                ParamKind::Bias | ParamKind::NormBias | ParamKind::PositionBias => {}
            }
        }
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, seg: Seg) -> &[T] {
        &self.values[seg.range()]
    }

    pub fn named(&self, name: &str) -> Option<&[T]> {
        self.layout.find(name).map(|s| self.get(s.seg))
    }

    pub fn named_mut(&mut self, name: &str) -> Option<&mut [T]> {
        let seg = self.layout.find(name)?.seg;
        Some(&mut self.values[seg.range()])
    }

    pub(crate) fn index(&self) -> &Index {
        &self.layout.index
    }

    /// Hash of the configuration and every parameter bit pattern.
    pub fn fingerprint(&self) -> u64 {
        const PRIME: u64 = 0x0000_0100_0000_01B3;
        let mut h: u64 = 0xCBF2_9CE4_8422_2325;
        for (k, v) in self.config.to_pairs() {
            for byte in k.bytes().chain(v.bytes()) {
                h = (h ^ byte as u64).wrapping_mul(PRIME);
            }
        }
        for v in &self.values {
            h = (h ^ v.as_f64().to_bits()).wrapping_mul(PRIME);
        }
        h
    }

    /// `sum(theta^2)` over parameters of enabled branches.
    pub fn squared_norm(&self) -> f64 {
        let mask = self.layout.trainable_mask(&self.config);
        self.values
            .iter()
            .zip(&mask)
            .filter(|(_, &m)| m)
            .map(|(v, _)| v.as_f64() * v.as_f64())
            .sum()
    }

    pub fn cast<U: Scalar>(&self) -> NetworkParams<U> {
        NetworkParams {
            config: self.config,
            layout: Arc::clone(&self.layout),
            values: self.values.iter().map(|v| U::c(v.as_f64())).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
