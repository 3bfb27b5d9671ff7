//! Full model versus single-branch ablations on a desk-scale synthetic sky.
//!
//! Usage: `cargo run --release --example ablation_study -- [seeds] [epochs] [train] [val]`

use std::time::Instant;

use star_fusion::experiment::{build_data, run_ablation, ExperimentConfig};
use star_fusion::train::TrainConfig;

fn main() -> star_fusion::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let arg = |i: usize, d: u64| args.get(i).copied().unwrap_or(d);
    let base = ExperimentConfig::default();
    let cfg = ExperimentConfig {
        train_count: arg(2, base.train_count as u64) as usize,
        val_count: arg(3, base.val_count as u64) as usize,
        train: TrainConfig { epochs: arg(1, base.train.epochs as u64) as usize, ..base.train },
        ..base
    };
    let mut wins = 0;
    let seeds = arg(0, 5);
    for seed in 1..=seeds {
        let t = Instant::now();
        let data = build_data(&cfg, seed)?;
        println!("seed {seed}: data ready in {:.1}s", t.elapsed().as_secs_f64());
        let r = run_ablation(&cfg, &data, seed, |name, top1, _| {
            println!("  {name:<15} val top-1 {top1:.3}  ({:.0}s)", t.elapsed().as_secs_f64())
        })?;
        let (name, best) = r.best_ablation();
        let win = r.full_wins(cfg.k);
        wins += win as usize;
        println!("  full {:.3} vs best ablation {name} {best:.3}: {}", r.full(), if win { "win" } else { "no win" });
    }
    println!("full model wins on {wins}/{seeds} seeds");
    Ok(())
}
