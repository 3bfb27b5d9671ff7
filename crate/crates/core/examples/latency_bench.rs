//! Single-sample forward latency of the default network.
//!
//! `cargo run --release --example latency_bench -- [iters] [warmup]`

use star_fusion::bench::bench;
use star_fusion::net::{Branches, NetworkConfig, NetworkParams};

fn main() -> star_fusion::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let iters = args.first().copied().unwrap_or(200);
    let warmup = args.get(1).copied().unwrap_or(20);

    let all = Branches::default();
    for (name, branches) in [
        ("full", all),
        ("photometric only", Branches { heatmap: false, coords: false, ..all }),
        ("no photometric", Branches { photometric: false, ..all }),
    ] {
        let cfg = NetworkConfig { branches, ..NetworkConfig::with_k(12) };
        let params = NetworkParams::<f32>::init(&cfg, 0)?;
        let r = bench(&params, iters, warmup, 0)?;
        println!(
            "{name:<17} mean {:.3} ms  p50 {:.3}  p99 {:.3}  {:.0} fps  ({} parameters)",
            r.mean_ms, r.p50_ms, r.p99_ms, r.throughput_fps, r.parameter_count
        );
    }
    Ok(())
}
