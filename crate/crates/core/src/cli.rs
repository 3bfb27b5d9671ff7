//! `star-fusion` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or contract error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bench::bench;
use crate::catalog::{load_catalog, synthetic_catalog, SyntheticSky};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::net::{checkpoint, FusionMode, NetworkConfig, NetworkParams};
use crate::scene::{generate_dataset, Dataset, DatasetMeta, Split, META_FILE};
use crate::sphere::{spherical_kmeans, uniform_sphere_sample, ClusterModel};
use crate::train::{evaluate, train, write_history, Optimizer};

/// Environment variable read when `--threads` is absent.
pub const THREADS_ENV: &str = "STAR_FUSION_THREADS";

#[derive(Debug, Parser)]
#[command(name = "star-fusion", version, about = "Star-field attitude classification: labels, data, training, evaluation, latency")]
pub struct Cli {
    /// Worker threads for parallel stages (default: $STAR_FUSION_THREADS, else all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// key=value config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override any config key, e.g. `--set noise_sigma=0.05`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic star catalog CSV.
    SynthCatalog {
        #[arg(long, default_value_t = 3000)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Spherical K-means over boresight directions; writes a cluster model.
    #[command(group(ArgGroup::new("source").required(true).args(["uniform", "from_dataset"])))]
    Cluster {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Cluster N directions drawn uniformly on the sphere.
        #[arg(long, value_name = "N")]
        uniform: Option<usize>,
        /// Cluster the boresights stored in a dataset directory.
        #[arg(long, value_name = "PATH")]
        from_dataset: Option<PathBuf>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long, default_value = "clusters.txt")]
        out: PathBuf,
    },
    /// Render a labelled dataset directory.
    Generate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        split: Split,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Permit a seed already used by a sibling dataset of the other split.
        #[arg(long)]
        allow_seed_reuse: bool,
    },
    /// Train the classifier; writes a checkpoint and a history file.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Default: the checkpoint path with extension `history.csv`.
        #[arg(long)]
        history: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        optimizer: Option<Optimizer>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        fusion: Option<FusionMode>,
        #[arg(long)]
        disable_photometric: bool,
        #[arg(long)]
        disable_heatmap: bool,
        #[arg(long)]
        disable_coords: bool,
    },
    /// Evaluate a checkpoint: top-k, confusion matrix, adjacent-cluster errors.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Cluster model that labelled the data.
        #[arg(long)]
        model: PathBuf,
        /// Default: `report.txt` next to the checkpoint.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Default: `confusion.txt` next to the checkpoint.
        #[arg(long)]
        confusion: Option<PathBuf>,
        /// Weight of the reported regulariser (default: the value used in training).
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Single-sample forward-pass latency.
    Bench {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        #[arg(long, default_value_t = 20)]
        warmup: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Default: `bench.txt` next to the checkpoint.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn run_config(args: &ConfigArgs) -> Result<RunConfig> {
    let mut c = match &args.config {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            Error::Io(io) => Error::InvalidArgument(format!("cannot read config {}: {io}", p.display())),
            other => other,
        })?,
        None => RunConfig::default(),
    };
    for pair in &args.set {
        c.set_pair(pair)?;
    }
    Ok(c)
}

/// Adds the offending path to I/O errors.
fn at<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    })
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).join(name)
}

/// Another dataset next to `out` that was generated with `seed` for a different split.
pub fn find_seed_reuse(out: &Path, seed: u64, split: Split) -> Option<PathBuf> {
    let out_abs = fs::canonicalize(out).ok();
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut entries: Vec<PathBuf> = fs::read_dir(parent).ok()?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    entries.sort();
    entries.into_iter().find(|dir| {
        if out_abs.is_some() && fs::canonicalize(dir).ok() == out_abs {
            return false;
        }
        matches!(DatasetMeta::read(&dir.join(META_FILE)), Ok(m) if m.master_seed == seed && m.split != split)
    })
}

fn cmd_cluster(
    cfg: &ConfigArgs,
    k: Option<usize>,
    seed: Option<u64>,
    uniform: Option<usize>,
    from_dataset: Option<&Path>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    out: &Path,
) -> Result<()> {
    let mut rc = run_config(cfg)?;
    let mut params = rc.kmeans;
    params.k = k.unwrap_or(params.k);
    params.tol = tol.unwrap_or(params.tol);
    params.max_iter = max_iter.unwrap_or(params.max_iter);
    rc.seed = seed.unwrap_or(rc.seed);
    if params.k < 2 {
        return Err(Error::InvalidArgument(format!("--k must be >= 2, got {}", params.k)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rc.seed);
    let points = match (uniform, from_dataset) {
        (Some(0), _) => return Err(Error::InvalidArgument("--uniform needs N >= 1".into())),
        (Some(n), _) => uniform_sphere_sample(n, &mut rng),
        (None, Some(dir)) => at(dir, Dataset::read_dir(dir))?.samples.iter().map(|s| s.attitude.boresight()).collect(),
        (None, None) => return Err(Error::InvalidArgument("one of --uniform or --from-dataset is required".into())),
    };
    let model = spherical_kmeans(&points, params, &mut rng)?;
    model.save(out)?;
    println!(
        "k={} iterations={} inertia={} converged={} -> {}",
        model.k(),
        model.iterations_run,
        model.inertia,
        model.converged,
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_generate(
    cfg: &ConfigArgs,
    catalog: &Path,
    model: &Path,
    count: usize,
    split: Split,
    seed: u64,
    out: &Path,
    allow_seed_reuse: bool,
) -> Result<()> {
    let rc = run_config(cfg)?;
    if count == 0 {
        return Err(Error::InvalidArgument("--count must be >= 1".into()));
    }
    if !allow_seed_reuse {
        if let Some(other) = find_seed_reuse(out, seed, split) {
            return Err(Error::InvalidArgument(format!(
                "seed {seed} was already used for {} (pass --allow-seed-reuse to override)",
                other.display()
            )));
        }
    }
    let catalog = at(catalog, load_catalog(catalog))?;
    let model = at(model, ClusterModel::load(model))?;
    let data = generate_dataset(&catalog, &model, count, &rc.scene, seed, split)?;
    data.write_dir(out)?;
    println!("{} {split} samples, k={} -> {}", data.len(), data.k, out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(cli: &Command) -> Result<()> {
    let Command::Train {
        cfg,
        train: train_dir,
        val,
        out,
        history,
        epochs,
        batch_size,
        lr,
        optimizer,
        lambda,
        seed,
        fusion,
        disable_photometric,
        disable_heatmap,
        disable_coords,
    } = cli
    else {
        unreachable!()
    };
    let rc = run_config(cfg)?;
    let mut tc = rc.train;
    tc.epochs = epochs.unwrap_or(tc.epochs);
    tc.batch_size = batch_size.unwrap_or(tc.batch_size);
    tc.learning_rate = lr.unwrap_or(tc.learning_rate);
    tc.optimizer = optimizer.unwrap_or(tc.optimizer);
    tc.lambda = lambda.unwrap_or(tc.lambda);
    tc.seed = seed.unwrap_or(tc.seed);
    tc.branches.photometric &= !disable_photometric;
    tc.branches.heatmap &= !disable_heatmap;
    tc.branches.coords &= !disable_coords;
    tc.validate()?;

    let train_set = at(train_dir, Dataset::read_dir(train_dir))?;
    let val_set = at(val, Dataset::read_dir(val))?;
    let net = NetworkConfig {
        k: train_set.k,
        heat_px: train_set.scene.heat_px,
        n_stars: train_set.scene.n_stars,
        fusion: fusion.unwrap_or(rc.net.fusion),
        branches: tc.branches,
        ..rc.net
    };
    net.validate()?;
    let outcome = train(&train_set, &val_set, &net, &tc)?;
    let mut extra = tc.to_pairs();
    extra.push(("best_epoch", outcome.best_epoch.to_string()));
    checkpoint::save(&outcome.params, out, &extra)?;
    let history_path = history.clone().unwrap_or_else(|| out.with_extension("history.csv"));
    write_history(&history_path, &outcome.history)?;
    let best = &outcome.history[outcome.best_epoch - 1];
    println!(
        "best epoch {} val_top1={} val_loss={} -> {} ({})",
        best.epoch,
        best.val_top1,
        best.val_loss,
        out.display(),
        history_path.display()
    );
    Ok(())
}

fn cmd_eval(
    ckpt: &Path,
    data: &Path,
    model: &Path,
    report: Option<&Path>,
    confusion: Option<&Path>,
    lambda: Option<f64>,
) -> Result<()> {
    let bytes = at(ckpt, fs::read(ckpt).map_err(Error::from))?;
    let origin = ckpt.display().to_string();
    let header = checkpoint::read_header(&bytes, &origin)?;
    let params: NetworkParams<f32> = checkpoint::from_bytes(&bytes, &origin)?;
    let lambda = match lambda {
        Some(l) => l,
        None => header
            .iter()
            .find(|(k, _)| k == "lambda")
            .and_then(|(_, v)| v.parse().ok())
            .unwrap_or(0.0),
    };
    let dataset = at(data, Dataset::read_dir(data))?;
    let model = at(model, ClusterModel::load(model))?;
    let r = evaluate(&params, &dataset, Some(&model), lambda)?;
    let report_path = report.map(Path::to_path_buf).unwrap_or_else(|| sibling(ckpt, "report.txt"));
    let confusion_path = confusion.map(Path::to_path_buf).unwrap_or_else(|| sibling(ckpt, "confusion.txt"));
    fs::write(&report_path, r.to_text())?;
    fs::write(&confusion_path, r.confusion_text())?;
    let adj = r.adjacency.expect("model supplied");
    println!(
        "samples={} top1={} top3={} top5={} mean_loss={} regularizer={}",
        r.samples, r.top1, r.top3, r.top5, r.mean_loss, r.regularizer
    );
    println!("adjacency_error_fraction={} ({} of {} errors)", adj.fraction, adj.adjacent, adj.errors_total);
    Ok(())
}

fn cmd_bench(ckpt: &Path, iters: usize, warmup: usize, seed: u64, report: Option<&Path>) -> Result<()> {
    let params: NetworkParams<f32> = at(ckpt, checkpoint::load(ckpt))?;
    let r = bench(&params, iters, warmup, seed)?;
    let path = report.map(Path::to_path_buf).unwrap_or_else(|| sibling(ckpt, "bench.txt"));
    r.write(&path)?;
    println!(
        "mean_ms={:.4} p50_ms={:.4} p99_ms={:.4} throughput_fps={:.1} parameter_count={}",
        r.mean_ms, r.p50_ms, r.p99_ms, r.throughput_fps, r.parameter_count
    );
    Ok(())
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    let n = match threads {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.parse().map_err(|_| Error::InvalidArgument(format!("{THREADS_ENV}={v:?} is not a count")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::InvalidArgument("--threads must be >= 1".into()));
        }
        // Fails only if a pool already exists, in which case it is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    init_threads(cli.threads)?;
    match &cli.command {
        Command::SynthCatalog { count, seed, out } => {
            let cat = synthetic_catalog(&SyntheticSky { count: *count, seed: *seed, ..Default::default() })?;
            cat.write_csv(fs::File::create(out)?)?;
            println!("{} stars -> {}", cat.len(), out.display());
            Ok(())
        }
        Command::Cluster { cfg, k, seed, uniform, from_dataset, tol, max_iter, out } => {
            cmd_cluster(cfg, *k, *seed, *uniform, from_dataset.as_deref(), *tol, *max_iter, out)
        }
        Command::Generate { cfg, catalog, model, count, split, seed, out, allow_seed_reuse } => {
            cmd_generate(cfg, catalog, model, *count, *split, *seed, out, *allow_seed_reuse)
        }
        cmd @ Command::Train { .. } => cmd_train(cmd),
        Command::Eval { checkpoint, data, model, report, confusion, lambda } => {
            cmd_eval(checkpoint, data, model, report.as_deref(), confusion.as_deref(), *lambda)
        }
        Command::Bench { checkpoint, iters, warmup, seed, report } => cmd_bench(checkpoint, *iters, *warmup, *seed, report.as_deref()),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                1
            } else {
                2
            }
        }
    }
}
