//! Hand-written backward pass versus central finite differences, in f64.
//!
//! `cargo run --release --example gradient_check -- [per_layer] [seed]`

use star_fusion::net::diagnostics::{gradient_check, jittered_params, random_input};
use star_fusion::net::{Branches, FusionMode, NetworkConfig};

fn main() -> star_fusion::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let per_layer = args.first().copied().unwrap_or(200) as usize;
    let seed = args.get(1).copied().unwrap_or(1);

    for fusion in [FusionMode::LayerNorm, FusionMode::Relu] {
        let cfg = NetworkConfig {
            image_px: 8,
            patch_px: 2,
            embed_dim: 16,
            num_blocks: 2,
            window: 2,
            shift: 1,
            heads: 2,
            mlp_hidden: 16,
            heat_px: 11,
            cnn_channels: [4, 6],
            n_stars: 4,
            coord_hidden: 12,
            fusion,
            fusion_hidden: 10,
            k: 5,
            branches: Branches::default(),
            ..NetworkConfig::default()
        };
        let mut params = jittered_params(&cfg, seed)?;
        let input = random_input(&params, seed + 1);
        println!("fusion={fusion} ({} parameters), lambda=0.05, h=1e-4", params.len());
        for c in gradient_check(&mut params, &input, 2, 0.05, 1e-4, per_layer, seed)? {
            println!("  {:<24} {:>4}/{:<4} max rel err {:.2e}   {}", c.layer, c.checked, c.total, c.max_rel_error, c.worst);
        }
    }
    Ok(())
}
