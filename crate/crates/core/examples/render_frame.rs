//! Render one camera frame from a synthetic sky and dump it as PGM images.
//!
//! `cargo run --release --example render_frame -- [ra] [dec] [roll] [out_dir]`

use std::fs;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use star_fusion::catalog::{synthetic_catalog, SyntheticSky};
use star_fusion::scene::{coord_vector, project_stars, render_heatmap, render_image, Attitude, SceneConfig};

fn pgm(pixels: &[f32], side: usize) -> Vec<u8> {
    let mut out = format!("P5\n{side} {side}\n255\n").into_bytes();
    out.extend(pixels.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

fn main() -> star_fusion::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let num = |i: usize, d: f64| args.get(i).map(|s| s.parse().expect("numeric argument")).unwrap_or(d);
    let attitude = Attitude { boresight_ra_deg: num(0, 83.8), boresight_dec_deg: num(1, -5.4), roll_deg: num(2, 0.0) };
    let out = PathBuf::from(args.get(3).cloned().unwrap_or_else(|| "frame".into()));

    let scene = SceneConfig::default();
    let cam = scene.camera;
    let catalog = synthetic_catalog(&SyntheticSky::default())?.filter_by_magnitude(cam.mag_limit);
    let stars = project_stars(&catalog, &attitude, &cam);
    println!("{} catalog stars, {} projected", catalog.len(), stars.len());
    for s in stars.iter().take(5) {
        println!("  id {:5}  u {:6.1}  v {:6.1}  intensity {:.3}", s.id, s.u_px, s.v_px, s.intensity);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let image = render_image(&stars, &cam, scene.noise_sigma, &mut rng);
    let heat = render_heatmap(&stars, cam.image_px, scene.heat_px, scene.heat_sigma_px);
    let coords = coord_vector(&stars, scene.n_stars, cam.image_px);
    println!("coords {:?}", &coords[..6]);

    fs::create_dir_all(&out)?;
    fs::write(out.join("image.pgm"), pgm(&image, cam.image_px))?;
    fs::write(out.join("heatmap.pgm"), pgm(&heat, scene.heat_px))?;
    println!("wrote {}/image.pgm and heatmap.pgm", out.display());
    Ok(())
}
