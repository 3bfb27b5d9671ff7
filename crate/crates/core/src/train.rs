//! Mini-batch training, top-k evaluation and the adjacent-cluster error statistic.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::net::{
    add_regularizer_grad, backward_into, cross_entropy_from_logits, forward_unchecked, Branches, NetInput,
    NetworkConfig, NetworkParams, Scalar,
};
use crate::scene::Dataset;
use crate::sphere::{ClusterModel, UnitVector};

/// Samples per gradient work unit. Work units are summed in a fixed order, so
/// the result does not depend on how many threads ran them.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Sgd,
    SgdMomentum,
    Adam,
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Optimizer::Sgd => "sgd",
            Optimizer::SgdMomentum => "sgd_momentum",
            Optimizer::Adam => "adam",
        })
    }
}

impl FromStr for Optimizer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "sgd_momentum" | "momentum" => Ok(Optimizer::SgdMomentum),
            "adam" => Ok(Optimizer::Adam),
            other => Err(Error::Config(format!("unknown optimizer '{other}' (sgd | sgd_momentum | adam)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Weight-decay coefficient on the squared parameter norm.
    pub lambda: f64,
    pub seed: u64,
    pub branches: Branches,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: Optimizer::Adam,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lambda: 0.05,
            seed: 0,
            branches: Branches::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.epochs == 0 {
            return fail("epochs must be >= 1");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return fail("lambda must be a finite value >= 0");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be a finite value >= 0");
        }
        if !(0.0..1.0).contains(&self.momentum) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return fail("momentum and beta parameters must lie in [0, 1)");
        }
        if self.eps <= 0.0 {
            return fail("eps must be > 0");
        }
        if !self.branches.any() {
            return fail("at least one branch must be enabled");
        }
        Ok(())
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("optimizer", self.optimizer.to_string()),
            ("momentum", self.momentum.to_string()),
            ("beta1", self.beta1.to_string()),
            ("beta2", self.beta2.to_string()),
            ("eps", self.eps.to_string()),
            ("lambda", self.lambda.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }
}

/// Moment buffers carried between optimizer steps.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub step: u64,
    pub m: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(len: usize) -> Self {
        Self { step: 0, m: vec![T::zero(); len], v: vec![T::zero(); len] }
    }
}

fn check_step<T: Scalar>(params: &[T], grads: &[T]) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::InvalidArgument(format!("{} parameters but {} gradients", params.len(), grads.len())));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient);
    }
    Ok(())
}

/// `theta -= lr * g`.
pub fn sgd_step<T: Scalar>(params: &mut [T], grads: &[T], lr: f64) -> Result<()> {
    check_step(params, grads)?;
    let lr = T::c(lr);
    for (p, &g) in params.iter_mut().zip(grads) {
        *p = *p - lr * g;
    }
    Ok(())
}

/// Heavy-ball momentum: `m = mu m + g`, `theta -= lr m`.
pub fn momentum_step<T: Scalar>(params: &mut [T], grads: &[T], state: &mut OptimizerState<T>, lr: f64, mu: f64) -> Result<()> {
    check_step(params, grads)?;
    state.step += 1;
    let (lr, mu) = (T::c(lr), T::c(mu));
    for ((p, &g), m) in params.iter_mut().zip(grads).zip(&mut state.m) {
        *m = mu * *m + g;
        *p = *p - lr * *m;
    }
    Ok(())
}

/// Bias-corrected Adam.
pub fn adam_step<T: Scalar>(params: &mut [T], grads: &[T], state: &mut OptimizerState<T>, cfg: &TrainConfig) -> Result<()> {
    check_step(params, grads)?;
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::c(cfg.beta1), T::c(cfg.beta2));
    let c1 = T::c(1.0 - cfg.beta1.powi(t));
    let c2 = T::c(1.0 - cfg.beta2.powi(t));
    let (lr, eps) = (T::c(cfg.learning_rate), T::c(cfg.eps));
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = b1 * *m + (T::one() - b1) * g;
        *v = b2 * *v + (T::one() - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Applies the configured optimizer.
pub fn optimizer_step<T: Scalar>(params: &mut [T], grads: &[T], state: &mut OptimizerState<T>, cfg: &TrainConfig) -> Result<()> {
    match cfg.optimizer {
        Optimizer::Sgd => {
            sgd_step(params, grads, cfg.learning_rate)?;
            state.step += 1;
            Ok(())
        }
        Optimizer::SgdMomentum => momentum_step(params, grads, state, cfg.learning_rate, cfg.momentum),
        Optimizer::Adam => adam_step(params, grads, state, cfg),
    }
}

/// A sample converted to network inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub input: NetInput<f32>,
    pub label: usize,
    pub boresight: UnitVector,
}

/// Converts every sample of `dataset` to network inputs for `cfg`.
pub fn prepare(dataset: &Dataset, cfg: &NetworkConfig) -> Result<Vec<Example>> {
    if dataset.k != cfg.k {
        return Err(Error::Mismatch(format!("dataset has k={} but the network has k={}", dataset.k, cfg.k)));
    }
    let px = dataset.scene.camera.image_px;
    dataset
        .samples
        .par_iter()
        .map(|s| {
            Ok(Example {
                input: NetInput::from_sample(s, px, cfg)?,
                label: s.label,
                boresight: s.attitude.boresight(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's batches (regulariser excluded).
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_top1: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation top-1.
    pub params: NetworkParams<f32>,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

/// Seeds for parameter initialisation and for batch shuffling.
fn stream_seeds(seed: u64) -> (u64, u64) {
    (crate::scene::sample_seed(seed, 0), crate::scene::sample_seed(seed, 1))
}

/// Trains from a fresh initialisation derived from `cfg.seed`.
pub fn train(train_set: &Dataset, val_set: &Dataset, net: &NetworkConfig, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if train_set.k != val_set.k || train_set.scene != val_set.scene {
        return Err(Error::Mismatch("training and validation sets differ in k or scene configuration".into()));
    }
    let net = NetworkConfig { branches: cfg.branches, ..*net };
    let tr = prepare(train_set, &net)?;
    let va = prepare(val_set, &net)?;
    train_examples(&tr, &va, &net, cfg)
}

pub fn train_examples(train: &[Example], val: &[Example], net: &NetworkConfig, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let net = NetworkConfig { branches: cfg.branches, ..*net };
    let params = NetworkParams::<f32>::init(&net, stream_seeds(cfg.seed).0)?;
    train_from(params, train, val, cfg)
}

/// Trains starting from `params`. Branch flags come from `cfg`.
pub fn train_from(
    mut params: NetworkParams<f32>,
    train: &[Example],
    val: &[Example],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidArgument("training and validation sets must be non-empty".into()));
    }
    params.config.branches = cfg.branches;
    params.config.validate()?;
    if let Some(bad) = train.iter().chain(val).find(|e| e.label >= params.config.k) {
        return Err(Error::Mismatch(format!("label {} out of range for k={}", bad.label, params.config.k)));
    }
    let mask = params.layout.trainable_mask(&params.config);
    let mut state = OptimizerState::new(params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seeds(cfg.seed).1);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, NetworkParams<f32>)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let batches = order.chunks(cfg.batch_size);
        let n_batches = batches.len();
        for (bi, batch) in batches.enumerate() {
            let (ce, mut grads) = batch_gradient(&params, train, batch);
            let loss = ce + cfg.lambda * params.squared_norm();
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, batch: bi });
            }
            if cfg.lambda != 0.0 {
                add_regularizer_grad(&params, cfg.lambda, 1.0, &mut grads);
            }
            for (g, &m) in grads.iter_mut().zip(&mask) {
                if !m {
                    *g = 0.0;
                }
            }
            optimizer_step(&mut params.values, &grads, &mut state, cfg)?;
            if !params.all_finite() {
                return Err(Error::Divergence { epoch, batch: bi });
            }
            loss_sum += ce;
        }
        let report = evaluate_examples(&params, val, None, 0.0);
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / n_batches as f64,
            val_loss: report.mean_loss,
            val_top1: report.top1,
        };
        history.push(record);
        if best.as_ref().is_none_or(|(top1, _, _)| record.val_top1 >= *top1) {
            best = Some((record.val_top1, epoch, params.clone()));
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch");
    Ok(TrainOutcome { params, best_epoch, history })
}

/// Mean cross-entropy of a batch and its gradient (regulariser excluded).
fn batch_gradient(params: &NetworkParams<f32>, data: &[Example], batch: &[usize]) -> (f64, Vec<f32>) {
    let fingerprint = params.fingerprint();
    let weight = 1.0 / batch.len() as f32;
    let parts: Vec<(f64, Vec<f32>)> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut grads = vec![0.0f32; params.len()];
            let mut ce = 0.0;
            for &i in chunk {
                let ex = &data[i];
                let trace = forward_unchecked(params, fingerprint, &ex.input);
                ce += cross_entropy_from_logits(&trace.logits, ex.label).0;
                backward_into(params, &trace, ex.label, weight, &mut grads);
            }
            (ce, grads)
        })
        .collect();
    let mut iter = parts.into_iter();
    let (mut ce, mut grads) = iter.next().expect("non-empty batch");
    for (c, g) in iter {
        ce += c;
        for (a, b) in grads.iter_mut().zip(&g) {
            *a += *b;
        }
    }
    (ce / batch.len() as f64, grads)
}

/// Network output for one labelled sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probabilities: Vec<f64>,
    /// Cross-entropy from the logits, floored as in training.
    pub loss: f64,
    pub label: usize,
    pub boresight: UnitVector,
}

impl Prediction {
    /// Position of the true label when classes are sorted by decreasing
    /// probability, ties ordered by lower class index.
    pub fn rank(&self) -> usize {
        let p = self.probabilities[self.label];
        self.probabilities
            .iter()
            .enumerate()
            .filter(|&(j, &q)| q > p || (q == p && j < self.label))
            .count()
    }

    pub fn predicted(&self) -> usize {
        crate::net::argmax(&self.probabilities)
    }
}

pub fn predict_examples(params: &NetworkParams<f32>, data: &[Example]) -> Vec<Prediction> {
    let fingerprint = params.fingerprint();
    data.par_iter()
        .map(|ex| {
            let trace = forward_unchecked(params, fingerprint, &ex.input);
            Prediction {
                probabilities: trace.probabilities.iter().map(|p| p.as_f64()).collect(),
                loss: cross_entropy_from_logits(&trace.logits, ex.label).0,
                label: ex.label,
                boresight: ex.boresight,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adjacency {
    /// `adjacent / errors_total`, or 0 when there are no errors.
    pub fraction: f64,
    pub adjacent: u64,
    pub errors_total: u64,
}

/// Among misclassified predictions, the share whose predicted class is the
/// second-nearest centroid of the true boresight.
pub fn adjacency_from_predictions(preds: &[Prediction], model: &ClusterModel) -> Adjacency {
    let (mut adjacent, mut errors_total) = (0u64, 0u64);
    for p in preds {
        let guess = p.predicted();
        if guess != p.label {
            errors_total += 1;
            if model.nearest_two(&p.boresight).1 == guess {
                adjacent += 1;
            }
        }
    }
    let fraction = if errors_total == 0 { 0.0 } else { adjacent as f64 / errors_total as f64 };
    Adjacency { fraction, adjacent, errors_total }
}

pub fn adjacency_error_fraction(params: &NetworkParams<f32>, data: &[Example], model: &ClusterModel) -> Adjacency {
    adjacency_from_predictions(&predict_examples(params, data), model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub k: usize,
    pub samples: u64,
    pub top1: f64,
    pub top3: f64,
    pub top5: f64,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    pub per_class: Vec<u64>,
    /// Mean cross-entropy.
    pub mean_loss: f64,
    /// `lambda * sum(theta^2)`, reported apart from the cross-entropy.
    pub regularizer: f64,
    pub adjacency: Option<Adjacency>,
}

/// Fraction of predictions whose true label is among the `k` most probable
/// classes. `k >= K` counts every prediction as correct.
pub fn top_k_accuracy(preds: &[Prediction], k: usize) -> f64 {
    if preds.is_empty() {
        return 0.0;
    }
    preds.iter().filter(|p| p.rank() < k).count() as f64 / preds.len() as f64
}

pub fn report_from_predictions(preds: &[Prediction], k: usize, model: Option<&ClusterModel>, regularizer: f64) -> EvalReport {
    let mut confusion = vec![vec![0u64; k]; k];
    let mut per_class = vec![0u64; k];
    let mut correct = 0u64;
    for p in preds {
        let guess = p.predicted();
        confusion[p.label][guess] += 1;
        per_class[p.label] += 1;
        correct += (guess == p.label) as u64;
    }
    let n = preds.len() as u64;
    let frac = |c: u64| if n == 0 { 0.0 } else { c as f64 / n as f64 };
    EvalReport {
        k,
        samples: n,
        top1: frac(correct),
        top3: top_k_accuracy(preds, 3),
        top5: top_k_accuracy(preds, 5),
        confusion,
        per_class,
        mean_loss: if n == 0 { 0.0 } else { preds.iter().map(|p| p.loss).sum::<f64>() / n as f64 },
        regularizer,
        adjacency: model.map(|m| adjacency_from_predictions(preds, m)),
    }
}

pub fn evaluate_examples(params: &NetworkParams<f32>, data: &[Example], model: Option<&ClusterModel>, lambda: f64) -> EvalReport {
    let preds = predict_examples(params, data);
    report_from_predictions(&preds, params.config.k, model, lambda * params.squared_norm())
}

/// Evaluates `params` on a dataset; the adjacency statistic needs the cluster model.
pub fn evaluate(params: &NetworkParams<f32>, dataset: &Dataset, model: Option<&ClusterModel>, lambda: f64) -> Result<EvalReport> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate an empty dataset".into()));
    }
    if let Some(m) = model {
        if m.k() != params.config.k {
            return Err(Error::Mismatch(format!("cluster model has k={} but the network has k={}", m.k(), params.config.k)));
        }
    }
    let data = prepare(dataset, &params.config)?;
    Ok(evaluate_examples(params, &data, model, lambda))
}

impl EvalReport {
    /// `key=value` lines.
    pub fn to_text(&self) -> String {
        let join = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
        let mut s = format!(
            "k={}\nsamples={}\ntop1={}\ntop3={}\ntop5={}\nmean_loss={}\nregularizer={}\nper_class={}\n",
            self.k,
            self.samples,
            self.top1,
            self.top3,
            self.top5,
            self.mean_loss,
            self.regularizer,
            join(&self.per_class)
        );
        if let Some(a) = self.adjacency {
            s += &format!(
                "adjacency_error_fraction={}\nadjacent_errors={}\nerrors_total={}\n",
                a.fraction, a.adjacent, a.errors_total
            );
        }
        s += &format!("confusion={}\n", self.confusion.iter().map(|r| join(r)).collect::<Vec<_>>().join(";"));
        s
    }

    /// One line per true class, space-separated counts per predicted class.
    pub fn confusion_text(&self) -> String {
        self.confusion
            .iter()
            .map(|r| r.iter().map(u64::to_string).collect::<Vec<_>>().join(" ") + "\n")
            .collect()
    }
}

pub fn history_text(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,train_loss,val_loss,val_top1\n");
    for r in history {
        s += &format!("{},{},{},{}\n", r.epoch, r.train_loss, r.val_loss, r.val_top1);
    }
    s
}

pub fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    Ok(fs::write(path, history_text(history))?)
}

pub fn read_history(path: &Path) -> Result<Vec<EpochRecord>> {
    let text = fs::read_to_string(path)?;
    let bad = |m: &str| Error::format(path.display().to_string(), m);
    let mut lines = text.lines();
    if lines.next() != Some("epoch,train_loss,val_loss,val_top1") {
        return Err(bad("missing history header"));
    }
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 4 {
                return Err(bad("expected 4 fields"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
            Ok(EpochRecord {
                epoch: f[0].parse().map_err(|_| bad("bad epoch"))?,
                train_loss: num(f[1])?,
                val_loss: num(f[2])?,
                val_top1: num(f[3])?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn pred(probabilities: Vec<f64>, label: usize) -> Prediction {
        Prediction { probabilities, loss: 0.0, label, boresight: UnitVector::Z }
    }

    #[test]
    fn sgd_example() {
        let mut p = [1.0f64];
        sgd_step(&mut p, &[0.5], 0.1).unwrap();
        assert!((p[0] - 0.95).abs() < 1e-15);
        let mut q = [1.0f64, -2.0];
        sgd_step(&mut q, &[0.0, 0.0], 0.1).unwrap();
        assert_eq!(q, [1.0, -2.0]);
        assert!(matches!(sgd_step(&mut q, &[f64::NAN, 0.0], 0.1), Err(Error::NonFiniteGradient)));
        assert!(sgd_step(&mut q, &[0.0], 0.1).is_err());
    }

    #[test]
    fn adam_first_step_is_scale_free() {
        let cfg = TrainConfig { learning_rate: 1e-3, ..Default::default() };
        for g in [1e-4, 1.0, 1e4, -3.0] {
            let mut p = [0.0f64];
            let mut st = OptimizerState::new(1);
            adam_step(&mut p, &[g], &mut st, &cfg).unwrap();
            assert!((p[0].abs() - 1e-3).abs() < 1e-6, "g={g}: {}", p[0]);
        }
        let mut p = [0.5f64];
        let mut st = OptimizerState::new(1);
        adam_step(&mut p, &[0.0], &mut st, &cfg).unwrap();
        assert_eq!(p[0], 0.5);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn momentum_accumulates() {
        let mut p = [0.0f64];
        let mut st = OptimizerState::new(1);
        momentum_step(&mut p, &[1.0], &mut st, 0.1, 0.9).unwrap();
        momentum_step(&mut p, &[1.0], &mut st, 0.1, 0.9).unwrap();
        // m: 1 then 1.9; theta: -0.1 then -0.29.
        assert!((p[0] + 0.29).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { epochs: 0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { lambda: -1.0, ..Default::default() },
            TrainConfig { branches: Branches { photometric: false, heatmap: false, coords: false }, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
        assert_eq!("sgd_momentum".parse::<Optimizer>().unwrap(), Optimizer::SgdMomentum);
        assert!("rmsprop".parse::<Optimizer>().is_err());
    }

    #[test]
    fn perfect_and_uniform_predictors() {
        let k = 12;
        let perfect: Vec<Prediction> = (0..48)
            .map(|i| {
                let mut p = vec![0.0; k];
                p[i % k] = 1.0;
                pred(p, i % k)
            })
            .collect();
        let r = report_from_predictions(&perfect, k, None, 0.0);
        assert_eq!((r.top1, r.top3, r.top5), (1.0, 1.0, 1.0));
        for (i, row) in r.confusion.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                assert_eq!(c, if i == j { 4 } else { 0 });
            }
        }

        // Uniform probabilities: ties go to the lowest index, so exactly the
        // samples labelled below k are top-k correct.
        let uniform: Vec<Prediction> = (0..k).map(|l| pred(vec![1.0 / k as f64; k], l)).collect();
        let r = report_from_predictions(&uniform, k, None, 0.0);
        assert_eq!(r.top1, 1.0 / 12.0);
        assert_eq!(r.top3, 3.0 / 12.0);
        assert_eq!(r.top5, 5.0 / 12.0);
        assert_eq!(top_k_accuracy(&uniform, 12), 1.0);
    }

    #[test]
    fn report_identities_on_random_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = 7;
        let preds: Vec<Prediction> = (0..500)
            .map(|_| {
                let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0..4) as f64).collect();
                pred(raw, rng.random_range(0..k))
            })
            .collect();
        let r = report_from_predictions(&preds, k, None, 0.0);
        assert!(r.top1 <= r.top3 && r.top3 <= r.top5);
        let trace: u64 = (0..k).map(|i| r.confusion[i][i]).sum();
        assert_eq!(trace as f64 / r.samples as f64, r.top1);
        for (row, &n) in r.confusion.iter().zip(&r.per_class) {
            assert_eq!(row.iter().sum::<u64>(), n);
        }
    }

    #[test]
    fn adjacency_examples() {
        let model = ClusterModel::from_centroids(vec![UnitVector::X, UnitVector::Y, UnitVector::Z]).unwrap();
        let near_x = UnitVector::normalize(1.0, 0.3, 0.1).unwrap();
        let (first, second) = model.nearest_two(&near_x);
        assert_eq!((first, second), (0, 1));
        let one_hot = |c: usize| {
            let mut p = vec![0.0; 3];
            p[c] = 1.0;
            p
        };
        let correct = vec![Prediction { boresight: near_x, ..pred(one_hot(0), 0) }];
        assert_eq!(adjacency_from_predictions(&correct, &model), Adjacency { fraction: 0.0, adjacent: 0, errors_total: 0 });
        let adversary = vec![Prediction { boresight: near_x, ..pred(one_hot(1), 0) }; 5];
        assert_eq!(adjacency_from_predictions(&adversary, &model).fraction, 1.0);
        let far = vec![Prediction { boresight: near_x, ..pred(one_hot(2), 0) }];
        let a = adjacency_from_predictions(&far, &model);
        assert_eq!((a.fraction, a.errors_total), (0.0, 1));
    }

    fn toy_examples(cfg: &NetworkConfig, n: usize, seed: u64) -> Vec<Example> {
        let p = NetworkParams::<f32>::zeros(cfg).unwrap();
        (0..n)
            .map(|i| Example {
                input: crate::net::diagnostics::random_input(&p, seed + i as u64),
                label: i % cfg.k,
                boresight: UnitVector::Z,
            })
            .collect()
    }

    fn small_net() -> NetworkConfig {
        NetworkConfig { image_px: 8, patch_px: 2, embed_dim: 8, heads: 2, mlp_hidden: 8, window: 2, shift: 1, heat_px: 11, coord_hidden: 8, ..NetworkConfig::with_k(3) }
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_unchanged() {
        let net = small_net();
        let data = toy_examples(&net, 10, 0);
        for optimizer in [Optimizer::Sgd, Optimizer::SgdMomentum, Optimizer::Adam] {
            let cfg = TrainConfig { epochs: 2, batch_size: 4, learning_rate: 0.0, optimizer, seed: 5, ..Default::default() };
            let init = NetworkParams::<f32>::init(&net, 99).unwrap();
            let out = train_from(init.clone(), &data, &data, &cfg).unwrap();
            assert_eq!(out.params.values, init.values);
        }
    }

    #[test]
    fn single_sample_is_memorised() {
        let net = small_net();
        let data = toy_examples(&net, 1, 7);
        let cfg = TrainConfig { epochs: 200, batch_size: 1, learning_rate: 1e-2, lambda: 0.0, seed: 1, ..Default::default() };
        let out = train_examples(&data, &data, &net, &cfg).unwrap();
        let last = out.history.last().unwrap();
        assert!(last.train_loss < 0.01, "{last:?}");
        assert_eq!(evaluate_examples(&out.params, &data, None, 0.0).top1, 1.0);
    }

    #[test]
    fn training_is_deterministic_and_respects_frozen_branches() {
        let net = small_net();
        let data = toy_examples(&net, 24, 11);
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 5,
            learning_rate: 1e-2,
            seed: 3,
            branches: Branches { heatmap: false, ..Default::default() },
            ..Default::default()
        };
        let a = train_examples(&data[..18], &data[18..], &net, &cfg).unwrap();
        let b = train_examples(&data[..18], &data[18..], &net, &cfg).unwrap();
        assert_eq!(history_text(&a.history), history_text(&b.history));
        assert_eq!(a.params.values, b.params.values);
        assert_eq!(a.history.len(), 3);
        let best = a.history.iter().map(|r| r.val_top1).fold(0.0, f64::max);
        let last_best = a.history.iter().rev().find(|r| r.val_top1 == best).unwrap().epoch;
        assert_eq!(a.best_epoch, last_best);

        let init = NetworkParams::<f32>::init(&NetworkConfig { branches: cfg.branches, ..net }, stream_seeds(3).0).unwrap();
        for spec in &init.layout.specs {
            if spec.branch == crate::net::Branch::Heatmap {
                assert_eq!(a.params.get(spec.seg), init.get(spec.seg), "{}", spec.name);
            }
        }
    }

    #[test]
    fn divergence_reports_position() {
        let net = small_net();
        let data = toy_examples(&net, 8, 2);
        let mut init = NetworkParams::<f32>::init(&net, 1).unwrap();
        init.values[0] = f32::INFINITY;
        let cfg = TrainConfig { epochs: 1, batch_size: 4, ..Default::default() };
        assert!(matches!(train_from(init, &data, &data, &cfg), Err(Error::Divergence { epoch: 1, batch: 0 })));
    }

    #[test]
    fn history_round_trip() {
        let h = vec![
            EpochRecord { epoch: 1, train_loss: 1.25, val_loss: 1.5, val_top1: 0.25 },
            EpochRecord { epoch: 2, train_loss: 0.1 + 0.2, val_loss: 1.0 / 3.0, val_top1: 0.5 },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.csv");
        write_history(&path, &h).unwrap();
        assert_eq!(read_history(&path).unwrap(), h);
    }
}
