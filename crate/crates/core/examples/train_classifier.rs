//! Train the fusion classifier on freshly rendered data and evaluate it.
//!
//! `cargo run --release --example train_classifier -- [epochs] [train] [val] [seed]`

use star_fusion::experiment::{build_data, ExperimentConfig};
use star_fusion::net::NetworkConfig;
use star_fusion::train::{evaluate_examples, history_text, train_examples, TrainConfig};

fn main() -> star_fusion::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let arg = |i: usize, d: usize| args.get(i).copied().unwrap_or(d);
    let base = ExperimentConfig::default();
    let cfg = ExperimentConfig {
        train_count: arg(1, 600),
        val_count: arg(2, 200),
        train: TrainConfig { epochs: arg(0, 5), ..base.train },
        ..base
    };
    let seed = arg(3, 1) as u64;
    let data = build_data(&cfg, seed)?;
    let net = NetworkConfig::with_k(cfg.k);
    println!("{} parameters, {} train / {} val samples", net.parameter_count(), data.train.len(), data.val.len());

    let out = train_examples(&data.train, &data.val, &net, &TrainConfig { seed, ..cfg.train })?;
    print!("{}", history_text(&out.history));
    let r = evaluate_examples(&out.params, &data.val, Some(&data.model), cfg.train.lambda);
    let adj = r.adjacency.unwrap();
    println!("best epoch {}: top1 {:.3} top3 {:.3} top5 {:.3}", out.best_epoch, r.top1, r.top3, r.top5);
    println!("mean CE {:.4} + regulariser {:.4}", r.mean_loss, r.regularizer);
    println!("adjacent-cluster errors {}/{} ({:.3})", adj.adjacent, adj.errors_total, adj.fraction);
    print!("confusion (rows = truth)\n{}", r.confusion_text());
    Ok(())
}
