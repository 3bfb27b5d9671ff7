use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// How the three branch outputs are combined before the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionMode {
    /// Concatenate, layer-normalise, linear classifier (default).
    LayerNorm,
    /// Concatenate, `ReLU(W_f z + b_f)`, linear classifier.
    Relu,
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionMode::LayerNorm => "layernorm",
            FusionMode::Relu => "relu",
        })
    }
}

impl FromStr for FusionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "layernorm" => Ok(FusionMode::LayerNorm),
            "relu" => Ok(FusionMode::Relu),
            other => Err(Error::Config(format!("unknown fusion mode {other:?}"))),
        }
    }
}

/// Which encoders contribute. A disabled branch outputs zeros of the same
/// width and its parameters receive no updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Branches {
    pub photometric: bool,
    pub heatmap: bool,
    pub coords: bool,
}

impl Default for Branches {
    fn default() -> Self {
        Self { photometric: true, heatmap: true, coords: true }
    }
}

impl Branches {
    pub fn any(&self) -> bool {
        self.photometric || self.heatmap || self.coords
    }

    pub fn is_enabled(&self, b: Branch) -> bool {
        match b {
            Branch::Photometric => self.photometric,
            Branch::Heatmap => self.heatmap,
            Branch::Coords => self.coords,
            Branch::Fusion => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Photometric,
    Heatmap,
    Coords,
    Fusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkConfig {
    /// Side of the photometric input after pooling.
    pub image_px: usize,
    pub patch_px: usize,
    pub embed_dim: usize,
    pub num_blocks: usize,
    /// Attention window side, in tokens.
    pub window: usize,
    /// Cyclic shift of odd blocks, in tokens.
    pub shift: usize,
    pub heads: usize,
    pub mlp_hidden: usize,
    pub heat_px: usize,
    pub cnn_channels: [usize; 2],
    pub cnn_kernel: usize,
    pub n_stars: usize,
    pub coord_hidden: usize,
    pub fusion: FusionMode,
    /// Width of the hidden fusion layer in [`FusionMode::Relu`].
    pub fusion_hidden: usize,
    pub k: usize,
    pub branches: Branches,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            image_px: 32,
            patch_px: 4,
            embed_dim: 32,
            num_blocks: 2,
            window: 4,
            shift: 2,
            heads: 4,
            mlp_hidden: 64,
            heat_px: 32,
            cnn_channels: [8, 16],
            cnn_kernel: 3,
            n_stars: 8,
            coord_hidden: 64,
            fusion: FusionMode::LayerNorm,
            fusion_hidden: 128,
            k: 12,
            branches: Branches::default(),
        }
    }
}

pub const CONV_STRIDE: usize = 2;

impl NetworkConfig {
    pub fn with_k(k: usize) -> Self {
        Self { k, ..Self::default() }
    }

    /// Tokens per side of the patch grid.
    pub fn grid(&self) -> usize {
        self.image_px / self.patch_px
    }

    pub fn tokens(&self) -> usize {
        self.grid() * self.grid()
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.heads
    }

    pub fn conv_out(&self, input: usize) -> usize {
        (input - self.cnn_kernel) / CONV_STRIDE + 1
    }

    /// Spatial sides after the first and second convolution.
    pub fn conv_sides(&self) -> [usize; 2] {
        let a = self.conv_out(self.heat_px);
        [a, self.conv_out(a)]
    }

    pub fn photometric_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn heatmap_dim(&self) -> usize {
        let s = self.conv_sides()[1];
        self.cnn_channels[1] * s * s
    }

    pub fn coord_input(&self) -> usize {
        3 * self.n_stars
    }

    pub fn coord_dim(&self) -> usize {
        self.coord_hidden
    }

    /// Width of the concatenated branch outputs.
    pub fn fused_dim(&self) -> usize {
        self.photometric_dim() + self.heatmap_dim() + self.coord_dim()
    }

    /// Number of learnable scalars, counted from the configuration alone.
    /// Disabled branches still own their (frozen) parameters.
    pub fn parameter_count(&self) -> usize {
        let (d, m, h) = (self.embed_dim, self.mlp_hidden, self.heads);
        let dense = |i: usize, o: usize| i * o + o;
        let patch = dense(self.patch_px * self.patch_px, d);
        let rel = (2 * self.window - 1).pow(2) * h;
        let block = 2 * d + dense(d, 3 * d) + rel + dense(d, d) + 2 * d + dense(d, m) + dense(m, d);
        let photometric = patch + self.num_blocks * block + 2 * d;
        let [c1, c2] = self.cnn_channels;
        let k2 = self.cnn_kernel * self.cnn_kernel;
        let heatmap = (c1 * k2 + c1) + (c2 * c1 * k2 + c2);
        let ch = self.coord_hidden;
        let coords = dense(self.coord_input(), ch) + 2 * dense(ch, ch);
        let f = self.fused_dim();
        let fusion = match self.fusion {
            FusionMode::LayerNorm => 2 * f + dense(f, self.k),
            FusionMode::Relu => dense(f, self.fusion_hidden) + dense(self.fusion_hidden, self.k),
        };
        photometric + heatmap + coords + fusion
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.patch_px == 0 || self.image_px % self.patch_px != 0 {
            return fail(format!("image_px {} not divisible by patch_px {}", self.image_px, self.patch_px));
        }
        if self.window == 0 || self.grid() % self.window != 0 {
            return fail(format!("token grid {} not divisible by window {}", self.grid(), self.window));
        }
        if self.shift >= self.window {
            return fail(format!("shift {} must be < window {}", self.shift, self.window));
        }
        if self.heads == 0 || self.embed_dim % self.heads != 0 {
            return fail(format!("embed_dim {} not divisible by heads {}", self.embed_dim, self.heads));
        }
        if self.num_blocks == 0 || self.mlp_hidden == 0 || self.coord_hidden == 0 || self.n_stars == 0 {
            return fail("num_blocks, mlp_hidden, coord_hidden and n_stars must be >= 1".into());
        }
        if self.cnn_kernel == 0 || self.heat_px < self.cnn_kernel || self.conv_out(self.heat_px) < self.cnn_kernel {
            return fail(format!("heat_px {} too small for two kernel-{} convolutions", self.heat_px, self.cnn_kernel));
        }
        if self.cnn_channels.contains(&0) {
            return fail("cnn_channels must be >= 1".into());
        }
        if self.fusion == FusionMode::Relu && self.fusion_hidden == 0 {
            return fail("fusion_hidden must be >= 1".into());
        }
        if self.k < 2 {
            return fail(format!("k must be >= 2, got {}", self.k));
        }
        if !self.branches.any() {
            return fail("at least one branch must be enabled".into());
        }
        Ok(())
    }

    /// `key=value` lines; parsed back by [`NetworkConfig::from_pairs`].
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("image_px", self.image_px.to_string()),
            ("patch_px", self.patch_px.to_string()),
            ("embed_dim", self.embed_dim.to_string()),
            ("num_blocks", self.num_blocks.to_string()),
            ("window", self.window.to_string()),
            ("shift", self.shift.to_string()),
            ("heads", self.heads.to_string()),
            ("mlp_hidden", self.mlp_hidden.to_string()),
            ("heat_px", self.heat_px.to_string()),
            ("cnn_channels", format!("{},{}", self.cnn_channels[0], self.cnn_channels[1])),
            ("cnn_kernel", self.cnn_kernel.to_string()),
            ("n_stars", self.n_stars.to_string()),
            ("coord_hidden", self.coord_hidden.to_string()),
            ("fusion", self.fusion.to_string()),
            ("fusion_hidden", self.fusion_hidden.to_string()),
            ("k", self.k.to_string()),
            ("use_photometric", self.branches.photometric.to_string()),
            ("use_heatmap", self.branches.heatmap.to_string()),
            ("use_coords", self.branches.coords.to_string()),
        ]
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut c = NetworkConfig::default();
        let mut seen = 0usize;
        for (key, value) in pairs {
            let bad = || Error::Config(format!("bad value {value:?} for {key}"));
            let num = || value.parse::<usize>().map_err(|_| bad());
            let flag = || value.parse::<bool>().map_err(|_| bad());
            match key {
                "image_px" => c.image_px = num()?,
                "patch_px" => c.patch_px = num()?,
                "embed_dim" => c.embed_dim = num()?,
                "num_blocks" => c.num_blocks = num()?,
                "window" => c.window = num()?,
                "shift" => c.shift = num()?,
                "heads" => c.heads = num()?,
                "mlp_hidden" => c.mlp_hidden = num()?,
                "heat_px" => c.heat_px = num()?,
                "cnn_channels" => {
                    let (a, b) = value.split_once(',').ok_or_else(bad)?;
                    c.cnn_channels = [a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?];
                }
                "cnn_kernel" => c.cnn_kernel = num()?,
                "n_stars" => c.n_stars = num()?,
                "coord_hidden" => c.coord_hidden = num()?,
                "fusion" => c.fusion = value.parse()?,
                "fusion_hidden" => c.fusion_hidden = num()?,
                "k" => c.k = num()?,
                "use_photometric" => c.branches.photometric = flag()?,
                "use_heatmap" => c.branches.heatmap = flag()?,
                "use_coords" => c.branches.coords = flag()?,
                _ => continue,
            }
            seen += 1;
        }
        if seen == 0 {
            return Err(Error::Config("no network configuration keys found".into()));
        }
        c.validate()?;
        Ok(c)
    }
}
