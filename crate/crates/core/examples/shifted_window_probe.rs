//! Perturb one token and watch a token in the neighbouring window.
//!
//! Without the shift the two windows never exchange information; with it the
//! pair shares a window and the response becomes non-zero.

use star_fusion::net::diagnostics::{cross_window_response, jittered_params};
use star_fusion::net::{NetworkConfig, WindowPlan};

fn main() -> star_fusion::Result<()> {
    let cfg = NetworkConfig::with_k(4);
    let params = jittered_params(&cfg, 3)?;
    let side = cfg.grid();
    let tokens: Vec<f64> = (0..cfg.tokens() * cfg.embed_dim).map(|i| ((i * 37 % 101) as f64 / 50.0) - 1.0).collect();

    let plain = WindowPlan::new(side, cfg.window, 0).window_of();
    let shifted = WindowPlan::new(side, cfg.window, cfg.shift).window_of();
    let (a, b) = (cfg.window - 1, cfg.window);
    println!("grid {side}x{side}, window {}, shift {}", cfg.window, cfg.shift);
    println!("tokens (0,{a}) and (0,{b}): unshifted windows {} / {}, shifted windows {} / {}", plain[a], plain[b], shifted[a], shifted[b]);

    for (label, shift) in [("unshifted", false), ("shifted", true)] {
        let r = cross_window_response(&params, 0, &tokens, a, b, shift, 0.5)?;
        println!("{label:>9}: max |change| at target = {r:e}");
    }
    Ok(())
}
