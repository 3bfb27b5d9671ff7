//! Cluster the sphere, render train/val splits, write and re-read them.
//!
//! `cargo run --release --example build_dataset -- [out_dir] [train] [val]`

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use star_fusion::catalog::{synthetic_catalog, SyntheticSky};
use star_fusion::scene::{generate_dataset, Dataset, SceneConfig, Split};
use star_fusion::sphere::{spherical_kmeans, uniform_sphere_sample, KMeansParams};

fn main() -> star_fusion::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = PathBuf::from(args.first().cloned().unwrap_or_else(|| "data".into()));
    let count = |i: usize, d: usize| args.get(i).map(|s| s.parse().expect("count")).unwrap_or(d);

    let catalog = synthetic_catalog(&SyntheticSky::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let model = spherical_kmeans(&uniform_sphere_sample(10_000, &mut rng), KMeansParams::new(4), &mut rng)?;
    std::fs::create_dir_all(&out)?;
    model.save(&out.join("clusters.txt"))?;

    let scene = SceneConfig::default();
    for (split, n, seed) in [(Split::Train, count(1, 2000), 1), (Split::Val, count(2, 500), 2)] {
        let data = generate_dataset(&catalog, &model, n, &scene, seed, split)?;
        let dir = out.join(split.to_string());
        data.write_dir(&dir)?;
        let mut per_class = vec![0usize; data.k];
        data.samples.iter().for_each(|s| per_class[s.label] += 1);
        let empty = data.samples.iter().filter(|s| s.coords.iter().all(|&c| c == 0.0)).count();
        assert_eq!(Dataset::read_dir(&dir)?, data);
        println!("{split}: {n} samples -> {} | per class {per_class:?} | {empty} empty frames", dir.display());
    }
    Ok(())
}
