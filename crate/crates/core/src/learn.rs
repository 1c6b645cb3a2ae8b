//! Synthetic tensor-train classification: a random low-rank TT target labels
//! standard normal input tensors, TT models of several ranks are trained by
//! SGD on the logistic loss, and the 0-1 generalization gap is compared with
//! the closed-form bound for the model's structure.
//!
//! Runs use common random numbers: run `i` draws one target, one test set
//! and one training pool from its own seed, and every `(n, rank)` cell of a
//! sweep trains on the first `n` pool samples.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{generalization_bound_counts, BoundError};
use crate::tt::TensorTrain;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("training diverged in run {run_id} (seed {seed}) at step {step}")]
    Diverged { run_id: usize, seed: u64, step: usize },
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

fn default_target_shape() -> Vec<usize> {
    vec![4, 4, 4, 4]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target_shape: Vec<usize>,
    pub target_rank: usize,
    pub model_rank: usize,
    /// Training-set size `n`.
    pub train_size: usize,
    pub test_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub runs: usize,
    pub seed: u64,
    pub delta: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            target_shape: default_target_shape(),
            target_rank: 8,
            model_rank: 2,
            train_size: 1000,
            test_size: 4000,
            learning_rate: 1e-2,
            epochs: 100,
            batch_size: 32,
            runs: 20,
            seed: 0,
            delta: 0.05,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::InvalidConfig(m.to_string()));
        if self.target_shape.is_empty() || self.target_shape.contains(&0) {
            return bad("target_shape must be non-empty with positive dimensions");
        }
        if self.target_rank == 0 || self.model_rank == 0 {
            return bad("ranks must be positive");
        }
        if self.train_size == 0 || self.test_size == 0 || self.batch_size == 0 || self.runs == 0 {
            return bad("train_size, test_size, batch_size and runs must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0, 1)");
        }
        Ok(())
    }
}

/// An experiment config plus the grid of training sizes and model ranks.
/// Empty grids fall back to the config's `train_size` / `model_rank`. In
/// JSON all fields sit at the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(from = "FlatSweep")]
pub struct SweepConfig {
    #[serde(flatten)]
    pub base: ExperimentConfig,
    pub train_sizes: Vec<usize>,
    pub model_ranks: Vec<usize>,
}

// Deserialized without `flatten` so that error paths and unknown-field
// checks survive.
#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FlatSweep {
    target_shape: Vec<usize>,
    target_rank: usize,
    model_rank: usize,
    train_size: usize,
    test_size: usize,
    learning_rate: f64,
    epochs: usize,
    batch_size: usize,
    runs: usize,
    seed: u64,
    delta: f64,
    train_sizes: Vec<usize>,
    model_ranks: Vec<usize>,
}

impl Default for FlatSweep {
    fn default() -> Self {
        let b = ExperimentConfig::default();
        Self {
            target_shape: b.target_shape,
            target_rank: b.target_rank,
            model_rank: b.model_rank,
            train_size: b.train_size,
            test_size: b.test_size,
            learning_rate: b.learning_rate,
            epochs: b.epochs,
            batch_size: b.batch_size,
            runs: b.runs,
            seed: b.seed,
            delta: b.delta,
            train_sizes: Vec::new(),
            model_ranks: Vec::new(),
        }
    }
}

impl From<FlatSweep> for SweepConfig {
    fn from(f: FlatSweep) -> Self {
        Self {
            base: ExperimentConfig {
                target_shape: f.target_shape,
                target_rank: f.target_rank,
                model_rank: f.model_rank,
                train_size: f.train_size,
                test_size: f.test_size,
                learning_rate: f.learning_rate,
                epochs: f.epochs,
                batch_size: f.batch_size,
                runs: f.runs,
                seed: f.seed,
                delta: f.delta,
            },
            train_sizes: f.train_sizes,
            model_ranks: f.model_ranks,
        }
    }
}

impl SweepConfig {
    pub fn train_sizes(&self) -> Vec<usize> {
        if self.train_sizes.is_empty() {
            vec![self.base.train_size]
        } else {
            self.train_sizes.clone()
        }
    }

    pub fn model_ranks(&self) -> Vec<usize> {
        if self.model_ranks.is_empty() {
            vec![self.base.model_rank]
        } else {
            self.model_ranks.clone()
        }
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        self.base.validate()?;
        if self.train_sizes.contains(&0) || self.model_ranks.contains(&0) {
            return Err(LearnError::InvalidConfig(
                "train_sizes and model_ranks must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Labeled samples with inputs stored row-major, one flattened tensor per
/// sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dims: Vec<usize>,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn features(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        let f = self.features();
        &self.xs[i * f..(i + 1) * f]
    }

    /// The first `n` samples.
    pub fn prefix(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            dims: self.dims.clone(),
            xs: self.xs[..n * self.features()].to_vec(),
            ys: self.ys[..n].to_vec(),
        }
    }
}

/// `sign` with `sign(0) = +1`.
pub fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn uniform_ranks(shape: &[usize], rank: usize) -> Vec<usize> {
    vec![rank; shape.len().saturating_sub(1)]
}

/// Random TT target with every bond equal to `rank` and entries uniform on
/// `(-1, 1)`.
pub fn generate_target(shape: &[usize], rank: usize, seed: u64) -> TensorTrain {
    generate_target_with(shape, rank, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn generate_target_with(shape: &[usize], rank: usize, rng: &mut impl Rng) -> TensorTrain {
    TensorTrain::random_uniform(shape, &uniform_ranks(shape, rank), 1.0, rng)
}

/// `size` standard normal inputs labeled by `sign(<W, X>)`.
pub fn generate_dataset(target: &TensorTrain, size: usize, seed: u64) -> Dataset {
    generate_dataset_with(target, size, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn generate_dataset_with(target: &TensorTrain, size: usize, rng: &mut impl Rng) -> Dataset {
    let dims = target.dims();
    let f: usize = dims.iter().product();
    let xs: Vec<f64> = (0..size * f).map(|_| rng.sample(StandardNormal)).collect();
    let ys = xs.chunks(f).map(|x| sign(target.margin(x))).collect();
    Dataset { dims, xs, ys }
}

/// `ln(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss `log(1 + exp(-y <W, X>))` over `batch` (indices into
/// `data`) and its exact gradient with respect to every core entry.
pub fn loss_and_gradient(model: &TensorTrain, data: &Dataset, batch: &[usize]) -> (f64, TensorTrain) {
    let mut grad = model.zeros_like();
    let loss = accumulate_gradient(model, data, batch, &mut grad);
    (loss, grad)
}

fn accumulate_gradient(model: &TensorTrain, data: &Dataset, batch: &[usize], grad: &mut TensorTrain) -> f64 {
    let scale = 1.0 / batch.len().max(1) as f64;
    let mut loss = 0.0;
    for &i in batch {
        let y = data.ys[i];
        model.margin_and_weighted_gradient(
            data.x(i),
            |m| {
                loss += softplus(-y * m);
                -y * sigmoid(-y * m) * scale
            },
            grad,
        );
    }
    loss * scale
}

/// Fraction of samples with `sign(<W, X>) != y`.
pub fn zero_one_risk(model: &TensorTrain, data: &Dataset) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let wrong = (0..data.len())
        .filter(|&i| sign(model.margin(data.x(i))) != data.ys[i])
        .count();
    wrong as f64 / data.len() as f64
}

/// Half-width of the uniform initialization, `r^{-1/2} d^{-1/2}`.
pub fn init_scale(rank: usize, mode_dim: f64) -> f64 {
    1.0 / (rank as f64 * mode_dim).sqrt()
}

pub fn init_model(shape: &[usize], rank: usize, rng: &mut impl Rng) -> TensorTrain {
    let d = shape.iter().sum::<usize>() as f64 / shape.len() as f64;
    TensorTrain::random_uniform(shape, &uniform_ranks(shape, rank), init_scale(rank, d), rng)
}

/// Random streams of one run; each quantity has its own stream so that it
/// does not depend on the sizes of the others.
#[derive(Clone, Copy)]
enum Stream {
    Target = 1,
    Test = 2,
    Train = 3,
    Init = 4,
    Shuffle = 5,
}

fn stream(seed: u64, s: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s as u64);
    rng
}

/// Minibatch SGD on `data` from a seeded initialization: `epochs` passes,
/// each over a fresh permutation in batches of `batch_size`.
pub fn train(config: &ExperimentConfig, data: &Dataset, seed: u64) -> Result<TensorTrain, LearnError> {
    train_run(config, data, seed, 0)
}

fn train_run(config: &ExperimentConfig, data: &Dataset, seed: u64, run_id: usize) -> Result<TensorTrain, LearnError> {
    config.validate()?;
    let mut model = init_model(&config.target_shape, config.model_rank, &mut stream(seed, Stream::Init));
    sgd(&mut model, config, data, &mut stream(seed, Stream::Shuffle))
        .map_err(|step| LearnError::Diverged { run_id, seed, step })?;
    Ok(model)
}

/// Returns the failing step index on divergence.
pub fn sgd(
    model: &mut TensorTrain,
    config: &ExperimentConfig,
    data: &Dataset,
    rng: &mut impl Rng,
) -> Result<(), usize> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = model.zeros_like();
    let mut step = 0;
    for _ in 0..config.epochs {
        order.shuffle(rng);
        for batch in order.chunks(config.batch_size) {
            grad.cores_mut().iter_mut().for_each(|c| c.data_mut().fill(0.0));
            accumulate_gradient(model, data, batch, &mut grad);
            model.axpy(-config.learning_rate, &grad);
            if !model.is_finite() {
                return Err(step);
            }
            step += 1;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub run_id: usize,
    pub n: usize,
    pub model_rank: usize,
    pub train_risk: f64,
    pub test_risk: f64,
    /// `test_risk - train_risk`.
    pub gap: f64,
    /// `None` when the gap is not positive.
    pub log2_gap: Option<f64>,
    pub theoretical_bound: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAggregate {
    pub n: usize,
    pub model_rank: usize,
    pub runs: usize,
    pub param_count: usize,
    pub mean_train_risk: f64,
    pub mean_test_risk: f64,
    pub mean_gap: f64,
    pub std_gap: f64,
    /// Mean and standard deviation of `log2_gap` over runs with a positive gap.
    pub mean_log2_gap: Option<f64>,
    pub std_log2_gap: Option<f64>,
    pub positive_gaps: usize,
    pub theoretical_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Ordered by model rank, then `n`, then run.
    pub records: Vec<ExperimentRecord>,
    pub aggregates: Vec<CellAggregate>,
}

fn model_param_count(shape: &[usize], rank: usize) -> usize {
    let p = shape.len();
    (0..p)
        .map(|k| {
            let l = if k == 0 { 1 } else { rank };
            let r = if k + 1 == p { 1 } else { rank };
            l * shape[k] * r
        })
        .sum()
}

/// Closed-form bound for a uniform-rank TT model over `shape`.
pub fn model_bound(shape: &[usize], rank: usize, n: usize, delta: f64) -> Result<f64, BoundError> {
    generalization_bound_counts(model_param_count(shape, rank), shape.len(), n, delta)
}

/// Seed of run `run_id`.
pub fn run_seed(config: &ExperimentConfig, run_id: usize) -> u64 {
    config.seed.wrapping_add(run_id as u64)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Runs every `(model_rank, n)` cell for every run. Runs execute in
/// parallel; the result does not depend on the schedule.
pub fn run_sweep(sweep: &SweepConfig) -> Result<SweepResult, LearnError> {
    sweep.validate()?;
    let base = &sweep.base;
    let sizes = sweep.train_sizes();
    let ranks = sweep.model_ranks();
    let max_n = *sizes.iter().max().expect("at least one size");
    let mut bounds = Vec::new();
    for &r in &ranks {
        for &n in &sizes {
            bounds.push(model_bound(&base.target_shape, r, n, base.delta)?);
        }
    }

    let per_run: Vec<Vec<ExperimentRecord>> = (0..base.runs)
        .into_par_iter()
        .map(|run_id| {
            let seed = run_seed(base, run_id);
            let target = generate_target_with(&base.target_shape, base.target_rank, &mut stream(seed, Stream::Target));
            let test = generate_dataset_with(&target, base.test_size, &mut stream(seed, Stream::Test));
            let pool = generate_dataset_with(&target, max_n, &mut stream(seed, Stream::Train));
            let mut out = Vec::with_capacity(ranks.len() * sizes.len());
            for (ri, &r) in ranks.iter().enumerate() {
                for (ni, &n) in sizes.iter().enumerate() {
                    let cfg = ExperimentConfig { model_rank: r, train_size: n, ..base.clone() };
                    let data = pool.prefix(n);
                    let model = train_run(&cfg, &data, seed, run_id)?;
                    let train_risk = zero_one_risk(&model, &data);
                    let test_risk = zero_one_risk(&model, &test);
                    let gap = test_risk - train_risk;
                    out.push(ExperimentRecord {
                        run_id,
                        n,
                        model_rank: r,
                        train_risk,
                        test_risk,
                        gap,
                        log2_gap: (gap > 0.0).then(|| gap.log2()),
                        theoretical_bound: bounds[ri * sizes.len() + ni],
                        seed,
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<_, LearnError>>()?;

    let mut records = Vec::with_capacity(base.runs * ranks.len() * sizes.len());
    let mut aggregates = Vec::new();
    for (ri, &r) in ranks.iter().enumerate() {
        for (ni, &n) in sizes.iter().enumerate() {
            let cell: Vec<&ExperimentRecord> = per_run.iter().map(|rs| &rs[ri * sizes.len() + ni]).collect();
            let gaps: Vec<f64> = cell.iter().map(|c| c.gap).collect();
            let logs: Vec<f64> = cell.iter().filter_map(|c| c.log2_gap).collect();
            let (mean_gap, std_gap) = mean_std(&gaps);
            let (ml, sl) = if logs.is_empty() { (None, None) } else {
                let (m, s) = mean_std(&logs);
                (Some(m), Some(s))
            };
            aggregates.push(CellAggregate {
                n,
                model_rank: r,
                runs: cell.len(),
                param_count: model_param_count(&base.target_shape, r),
                mean_train_risk: mean_std(&cell.iter().map(|c| c.train_risk).collect::<Vec<_>>()).0,
                mean_test_risk: mean_std(&cell.iter().map(|c| c.test_risk).collect::<Vec<_>>()).0,
                mean_gap,
                std_gap,
                mean_log2_gap: ml,
                std_log2_gap: sl,
                positive_gaps: logs.len(),
                theoretical_bound: bounds[ri * sizes.len() + ni],
            });
            records.extend(cell.into_iter().cloned());
        }
    }
    Ok(SweepResult { records, aggregates })
}

/// A single cell: `config.train_size` samples at `config.model_rank`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<SweepResult, LearnError> {
    run_sweep(&SweepConfig { base: config.clone(), train_sizes: Vec::new(), model_ranks: Vec::new() })
}

/// `x` with 12 significant digits; plain decimal notation unless the
/// magnitude is extreme.
pub fn format_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.11e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_sig).unwrap_or_default()
}

pub fn runs_csv(result: &SweepResult) -> String {
    let mut s = String::from("run_id,n,model_rank,train_risk,test_risk,gap,log2_gap,theoretical_bound,seed\n");
    for r in &result.records {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.run_id,
            r.n,
            r.model_rank,
            format_sig(r.train_risk),
            format_sig(r.test_risk),
            format_sig(r.gap),
            opt(r.log2_gap),
            format_sig(r.theoretical_bound),
            r.seed
        ));
    }
    s
}

pub fn aggregate_csv(result: &SweepResult) -> String {
    let mut s = String::from(
        "n,model_rank,runs,param_count,mean_train_risk,mean_test_risk,mean_gap,std_gap,mean_log2_gap,std_log2_gap,positive_gaps,theoretical_bound\n",
    );
    for a in &result.aggregates {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            a.n,
            a.model_rank,
            a.runs,
            a.param_count,
            format_sig(a.mean_train_risk),
            format_sig(a.mean_test_risk),
            format_sig(a.mean_gap),
            format_sig(a.std_gap),
            opt(a.mean_log2_gap),
            opt(a.std_log2_gap),
            a.positive_gaps,
            format_sig(a.theoretical_bound)
        ));
    }
    s
}

/// The bound on the sweep grid, with its `log2` for plotting next to the
/// log gaps.
pub fn bound_curve_csv(sweep: &SweepConfig) -> Result<String, LearnError> {
    let mut s = String::from("model_rank,n,param_count,theoretical_bound,log2_bound\n");
    for &r in &sweep.model_ranks() {
        for &n in &sweep.train_sizes() {
            let b = model_bound(&sweep.base.target_shape, r, n, sweep.base.delta)?;
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r,
                n,
                model_param_count(&sweep.base.target_shape, r),
                format_sig(b),
                format_sig(b.log2())
            ));
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: SweepConfig,
    pub unix_time: u64,
    pub defaults: serde_json::Value,
    pub aggregates: Vec<CellAggregate>,
}

pub fn experiment_defaults() -> serde_json::Value {
    serde_json::json!({
        "training_loss": "logistic: log(1 + exp(-y <W, X>))",
        "risk": "0-1 loss, sign(0) = +1",
        "initialization": "uniform(-a, a) with a = (r d)^(-1/2)",
        "target_entries": "uniform(-1, 1)",
        "inputs": "standard normal",
        "rng": "ChaCha8, one stream per (run seed, quantity)",
        "run_seed": "seed + run_id",
        "bound_log_base": "e",
        "batch_size_default": 32,
        "epochs_default": 100,
    })
}

/// Writes `contents` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), LearnError> {
    let io = |e: std::io::Error| LearnError::Io { path: path.display().to_string(), message: e.to_string() };
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(contents).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

/// Writes `runs.csv`, `aggregate.csv`, `bound_curve.csv` and
/// `summary.json` into `dir`.
pub fn write_outputs(dir: &Path, sweep: &SweepConfig, result: &SweepResult) -> Result<(), LearnError> {
    fs::create_dir_all(dir).map_err(|e| LearnError::Io { path: dir.display().to_string(), message: e.to_string() })?;
    write_atomic(&dir.join("runs.csv"), runs_csv(result).as_bytes())?;
    write_atomic(&dir.join("aggregate.csv"), aggregate_csv(result).as_bytes())?;
    write_atomic(&dir.join("bound_curve.csv"), bound_curve_csv(sweep)?.as_bytes())?;
    let summary = ExperimentSummary {
        config: sweep.clone(),
        unix_time: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        defaults: experiment_defaults(),
        aggregates: result.aggregates.clone(),
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_atomic(&dir.join("summary.json"), json.as_bytes())
}
