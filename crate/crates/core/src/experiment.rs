//! Desk-scale end-to-end experiment: synthetic sky, K-means labels, rendered
//! train/val sets, then the full model against each single-branch ablation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::catalog::{synthetic_catalog, SyntheticSky};
use crate::error::Result;
use crate::net::{Branch, Branches, NetworkConfig};
use crate::scene::{generate_dataset, sample_seed, SceneConfig, Split};
use crate::sphere::{spherical_kmeans, uniform_sphere_sample, ClusterModel, KMeansParams};
use crate::train::{prepare, train_examples, Example, TrainConfig, TrainOutcome};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub k: usize,
    pub cluster_points: usize,
    pub train_count: usize,
    pub val_count: usize,
    pub sky: SyntheticSky,
    pub scene: SceneConfig,
    pub net: NetworkConfig,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            k: 4,
            cluster_points: 10_000,
            train_count: 2000,
            val_count: 500,
            sky: SyntheticSky::default(),
            scene: SceneConfig::default(),
            net: NetworkConfig::with_k(4),
            train: TrainConfig::default(),
        }
    }
}

pub struct ExperimentData {
    pub model: ClusterModel,
    pub train: Vec<Example>,
    pub val: Vec<Example>,
}

/// Builds labels and both splits. Every random stream is derived from `seed`.
pub fn build_data(cfg: &ExperimentConfig, seed: u64) -> Result<ExperimentData> {
    let catalog = synthetic_catalog(&cfg.sky)?;
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed, 10));
    let points = uniform_sphere_sample(cfg.cluster_points, &mut rng);
    let model = spherical_kmeans(&points, KMeansParams::new(cfg.k), &mut rng)?;
    let net = NetworkConfig { k: cfg.k, ..cfg.net };
    let tr = generate_dataset(&catalog, &model, cfg.train_count, &cfg.scene, sample_seed(seed, 11), Split::Train)?;
    let train = prepare(&tr, &net)?;
    drop(tr);
    let va = generate_dataset(&catalog, &model, cfg.val_count, &cfg.scene, sample_seed(seed, 12), Split::Val)?;
    let val = prepare(&va, &net)?;
    Ok(ExperimentData { model, train, val })
}

/// Variants compared in the ablation: all branches, then each one disabled.
pub fn ablation_variants() -> [(&'static str, Branches); 4] {
    let all = Branches::default();
    [
        ("full", all),
        ("no_photometric", Branches { photometric: false, ..all }),
        ("no_heatmap", Branches { heatmap: false, ..all }),
        ("no_coords", Branches { coords: false, ..all }),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationResult {
    pub seed: u64,
    /// Best validation top-1 of each variant, in [`ablation_variants`] order.
    pub top1: Vec<(&'static str, f64)>,
}

impl AblationResult {
    pub fn full(&self) -> f64 {
        self.top1[0].1
    }

    pub fn best_ablation(&self) -> (&'static str, f64) {
        self.top1[1..].iter().copied().fold(("", f64::MIN), |a, b| if b.1 > a.1 { b } else { a })
    }

    /// Full model strictly above chance and above every ablation.
    pub fn full_wins(&self, k: usize) -> bool {
        self.full() > 1.0 / k as f64 && self.full() > self.best_ablation().1
    }
}

/// Trains every variant on the same data. `on_variant` sees each trained
/// variant and its best validation top-1 as it lands.
pub fn run_ablation(
    cfg: &ExperimentConfig,
    data: &ExperimentData,
    seed: u64,
    mut on_variant: impl FnMut(&str, f64, &TrainOutcome),
) -> Result<AblationResult> {
    let net = NetworkConfig { k: cfg.k, ..cfg.net };
    let mut top1 = Vec::new();
    for (name, branches) in ablation_variants() {
        let tc = TrainConfig { seed, branches, ..cfg.train };
        let out = train_examples(&data.train, &data.val, &net, &tc)?;
        let best = out.history[out.best_epoch - 1].val_top1;
        on_variant(name, best, &out);
        top1.push((name, best));
    }
    Ok(AblationResult { seed, top1 })
}

/// Branch a variant name refers to, if it disables one.
pub fn disabled_branch(name: &str) -> Option<Branch> {
    match name {
        "no_photometric" => Some(Branch::Photometric),
        "no_heatmap" => Some(Branch::Heatmap),
        "no_coords" => Some(Branch::Coords),
        _ => None,
    }
}
