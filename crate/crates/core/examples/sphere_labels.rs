//! Partition the sky with spherical K-means and label a few directions.
//!
//! `cargo run --release --example sphere_labels -- [k] [points] [seed]`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use star_fusion::sphere::{geodesic_distance, spherical_kmeans, to_unit_vector, uniform_sphere_sample, KMeansParams};

fn main() -> star_fusion::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let k = args.first().copied().unwrap_or(12) as usize;
    let n = args.get(1).copied().unwrap_or(10_000) as usize;
    let seed = args.get(2).copied().unwrap_or(7);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = uniform_sphere_sample(n, &mut rng);
    let model = spherical_kmeans(&points, KMeansParams::new(k), &mut rng)?;
    println!("k={k} iterations={} converged={} inertia={:.3}", model.iterations_run, model.converged, model.inertia);
    for (i, c) in model.centroids.iter().enumerate() {
        let (ra, dec) = c.to_radec();
        println!("  c{i:<2} ra {ra:7.2}  dec {dec:+6.2}");
    }

    // Directions either side of RA 0 land in the same cluster.
    for (ra, dec) in [(0.1, 10.0), (359.9, 10.0), (83.8, -5.4), (279.2, 38.8)] {
        let v = to_unit_vector(ra, dec)?;
        let (first, second) = model.nearest_two(&v);
        let d = geodesic_distance(&v, &model.centroids[first]).to_degrees();
        println!("ra {ra:6.1} dec {dec:+5.1} -> cluster {first} ({d:.1} deg from centroid), runner-up {second}");
    }
    Ok(())
}
