//! One `key=value` surface over every component's settings.
//!
//! Config files hold one `key=value` per line; `#` starts a comment. Command
//! line flags are applied after the file, so they win.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::net::NetworkConfig;
use crate::scene::SceneConfig;
use crate::sphere::KMeansParams;
use crate::train::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub kmeans: KMeansParams,
    pub scene: SceneConfig,
    /// Network shape. `k`, `heat_px` and `n_stars` are taken from the dataset at train time.
    pub net: NetworkConfig,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kmeans: KMeansParams::new(12),
            scene: SceneConfig::default(),
            net: NetworkConfig::default(),
            train: TrainConfig::default(),
            seed: 0,
        }
    }
}

/// Every key accepted by [`RunConfig::set`].
pub const KEYS: &[&str] = &[
    "seed",
    "k",
    "tol",
    "max_iter",
    "fov_deg",
    "image_px",
    "psf_sigma_px",
    "mag_zero",
    "mag_limit",
    "heat_px",
    "heat_sigma_px",
    "n_stars",
    "noise_sigma",
    "net_image_px",
    "patch_px",
    "embed_dim",
    "num_blocks",
    "window",
    "shift",
    "heads",
    "mlp_hidden",
    "cnn_channels",
    "cnn_kernel",
    "coord_hidden",
    "fusion",
    "fusion_hidden",
    "epochs",
    "batch_size",
    "learning_rate",
    "optimizer",
    "momentum",
    "beta1",
    "beta2",
    "eps",
    "lambda",
    "use_photometric",
    "use_heatmap",
    "use_coords",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

impl RunConfig {
    /// Parses config-file text on top of the defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("config line {}: expected key=value", n + 1)))?;
            c.set(key.trim(), value.trim())?;
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('-', "_");
        let key = key.as_str();
        let p = |v: &str| -> Result<usize> { parse(key, v) };
        let f = |v: &str| -> Result<f64> { parse(key, v) };
        let b = |v: &str| -> Result<bool> { parse(key, v) };
        let (scene, net, tr) = (&mut self.scene, &mut self.net, &mut self.train);
        match key {
            "seed" => {
                self.seed = parse(key, value)?;
                tr.seed = self.seed;
            }
            "k" => {
                self.kmeans.k = p(value)?;
                net.k = self.kmeans.k;
            }
            "tol" => self.kmeans.tol = f(value)?,
            "max_iter" => self.kmeans.max_iter = p(value)?,
            "fov_deg" => scene.camera.fov_deg = f(value)?,
            "image_px" => scene.camera.image_px = p(value)?,
            "psf_sigma_px" => scene.camera.psf_sigma_px = f(value)?,
            "mag_zero" => scene.camera.mag_zero = f(value)?,
            "mag_limit" => scene.camera.mag_limit = f(value)?,
            "heat_px" => {
                scene.heat_px = p(value)?;
                net.heat_px = scene.heat_px;
            }
            "heat_sigma_px" => scene.heat_sigma_px = f(value)?,
            "n_stars" => {
                scene.n_stars = p(value)?;
                net.n_stars = scene.n_stars;
            }
            "noise_sigma" => scene.noise_sigma = f(value)?,
            "net_image_px" => net.image_px = p(value)?,
            "patch_px" => net.patch_px = p(value)?,
            "embed_dim" => net.embed_dim = p(value)?,
            "num_blocks" => net.num_blocks = p(value)?,
            "window" => net.window = p(value)?,
            "shift" => net.shift = p(value)?,
            "heads" => net.heads = p(value)?,
            "mlp_hidden" => net.mlp_hidden = p(value)?,
            "cnn_channels" => {
                let (a, c) = value.split_once(',').ok_or_else(|| Error::Config("cnn_channels expects two values, e.g. 8,16".into()))?;
                net.cnn_channels = [p(a)?, p(c)?];
            }
            "cnn_kernel" => net.cnn_kernel = p(value)?,
            "coord_hidden" => net.coord_hidden = p(value)?,
            "fusion" => net.fusion = value.parse()?,
            "fusion_hidden" => net.fusion_hidden = p(value)?,
            "epochs" => tr.epochs = p(value)?,
            "batch_size" => tr.batch_size = p(value)?,
            "learning_rate" | "lr" => tr.learning_rate = f(value)?,
            "optimizer" => tr.optimizer = value.parse()?,
            "momentum" => tr.momentum = f(value)?,
            "beta1" => tr.beta1 = f(value)?,
            "beta2" => tr.beta2 = f(value)?,
            "eps" => tr.eps = f(value)?,
            "lambda" => tr.lambda = f(value)?,
            "use_photometric" => tr.branches.photometric = b(value)?,
            "use_heatmap" => tr.branches.heatmap = b(value)?,
            "use_coords" => tr.branches.coords = b(value)?,
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        net.branches = tr.branches;
        Ok(())
    }

    /// Parses `KEY=VALUE` and applies it.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair.split_once('=').ok_or_else(|| Error::InvalidArgument(format!("expected KEY=VALUE, got '{pair}'")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn to_text(&self) -> String {
        let n = &self.net;
        let t = &self.train;
        let c = &self.scene.camera;
        let mut out = vec![
            ("seed", self.seed.to_string()),
            ("k", self.kmeans.k.to_string()),
            ("tol", self.kmeans.tol.to_string()),
            ("max_iter", self.kmeans.max_iter.to_string()),
            ("fov_deg", c.fov_deg.to_string()),
            ("image_px", c.image_px.to_string()),
            ("psf_sigma_px", c.psf_sigma_px.to_string()),
            ("mag_zero", c.mag_zero.to_string()),
            ("mag_limit", c.mag_limit.to_string()),
            ("heat_px", self.scene.heat_px.to_string()),
            ("heat_sigma_px", self.scene.heat_sigma_px.to_string()),
            ("n_stars", self.scene.n_stars.to_string()),
            ("noise_sigma", self.scene.noise_sigma.to_string()),
            ("net_image_px", n.image_px.to_string()),
            ("patch_px", n.patch_px.to_string()),
            ("embed_dim", n.embed_dim.to_string()),
            ("num_blocks", n.num_blocks.to_string()),
            ("window", n.window.to_string()),
            ("shift", n.shift.to_string()),
            ("heads", n.heads.to_string()),
            ("mlp_hidden", n.mlp_hidden.to_string()),
            ("cnn_channels", format!("{},{}", n.cnn_channels[0], n.cnn_channels[1])),
            ("cnn_kernel", n.cnn_kernel.to_string()),
            ("coord_hidden", n.coord_hidden.to_string()),
            ("fusion", n.fusion.to_string()),
            ("fusion_hidden", n.fusion_hidden.to_string()),
        ];
        out.extend(t.to_pairs().into_iter().filter(|(k, _)| *k != "seed"));
        out.push(("use_photometric", t.branches.photometric.to_string()));
        out.push(("use_heatmap", t.branches.heatmap.to_string()));
        out.push(("use_coords", t.branches.coords.to_string()));
        out.into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}
