//! Training, evaluation and data splitting.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::featurize::{featurize_raw, AtomFeatureTable, FeatureError, RawFeatures};
use crate::periodic::{mean_nearest_neighbor_distance, neighbor_list, PeriodicError};
use crate::qcomplex::{build_complex, QuotientComplex};
use crate::sformer::{CheckpointError, GraphBatch, Mode, ModelConfig, SformerError, SformerModel};
use crate::structio::{CrystalStructure, DatasetRecord};
use crate::tape::LossKind;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossChoice {
    Mse,
    Mae,
}

impl From<LossChoice> for LossKind {
    fn from(l: LossChoice) -> Self {
        match l {
            LossChoice::Mse => LossKind::Mse,
            LossChoice::Mae => LossKind::Mae,
        }
    }
}

impl fmt::Display for LossChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossChoice::Mse => "mse",
            LossChoice::Mae => "mae",
        })
    }
}

/// Shape of the one-cycle schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Schedule {
    /// Fraction of steps spent warming up.
    pub warmup_fraction: f64,
    /// Initial learning rate is `peak / div_factor`.
    pub div_factor: f64,
    /// Final learning rate is `peak / final_div_factor`.
    pub final_div_factor: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { warmup_fraction: 0.3, div_factor: 25.0, final_div_factor: 1e4 }
    }
}

fn cosine(from: f64, to: f64, t: f64) -> f64 {
    let w = 0.5 * (1.0 - (PI * t).cos());
    from * (1.0 - w) + to * w
}

/// One-cycle learning rate: cosine rise from `peak / div_factor` to `peak`
/// at step `round(warmup_fraction · (total − 1))`, then cosine decay to
/// `peak / final_div_factor` at the last step.
pub fn one_cycle_lr_with(step: usize, total_steps: usize, peak_lr: f64, s: &Schedule) -> f64 {
    assert!(step < total_steps, "step {step} outside schedule of {total_steps}");
    let start = peak_lr / s.div_factor;
    let end = peak_lr / s.final_div_factor;
    if total_steps == 1 {
        return peak_lr;
    }
    let last = (total_steps - 1) as f64;
    let boundary = (s.warmup_fraction * last).round();
    let x = step as f64;
    if x <= boundary {
        if boundary == 0.0 {
            return peak_lr;
        }
        cosine(start, peak_lr, x / boundary)
    } else {
        cosine(peak_lr, end, (x - boundary) / (last - boundary))
    }
}

pub fn one_cycle_lr(step: usize, total_steps: usize, peak_lr: f64) -> f64 {
    one_cycle_lr_with(step, total_steps, peak_lr, &Schedule::default())
}

/// AdamW with decoupled weight decay applied to every parameter.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub weight_decay: f64,
    step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl AdamW {
    pub fn new(params: &[Array2<f64>], weight_decay: f64) -> Self {
        let zeros: Vec<_> = params.iter().map(|p| Array2::zeros(p.raw_dim())).collect();
        Self { weight_decay, step: 0, m: zeros.clone(), v: zeros }
    }

    pub fn step(&mut self, params: &mut [Array2<f64>], grads: &[Array2<f64>], lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - ADAM_BETA1.powf(self.step as f64);
        let bc2 = 1.0 - ADAM_BETA2.powf(self.step as f64);
        let decay = 1.0 - lr * self.weight_decay;
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                let mhat = *m / bc1;
                let vhat = *v / bc2;
                *p = *p * decay - lr * mhat / (vhat.sqrt() + ADAM_EPS);
            });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub peak_lr: f64,
    pub weight_decay: f64,
    pub loss: LossChoice,
    pub k_neighbors: usize,
    pub seed: u64,
    #[serde(skip)]
    pub checkpoint_path: Option<PathBuf>,
    #[serde(skip)]
    pub schedule: Schedule,
    #[serde(skip)]
    pub model: ModelConfig,
    /// Extra entries for the checkpoint sidecar.
    #[serde(skip)]
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            epochs: 500,
            peak_lr: 0.005,
            weight_decay: 1e-5,
            loss: LossChoice::Mae,
            k_neighbors: 12,
            seed: 0,
            checkpoint_path: None,
            schedule: Schedule::default(),
            model: ModelConfig::default(),
            metadata: serde_json::Map::new(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.peak_lr > 0.0 && self.peak_lr.is_finite()) {
            return bad("peak_lr must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be non-negative");
        }
        if self.k_neighbors == 0 {
            return bad("k_neighbors must be at least 1");
        }
        let s = &self.schedule;
        if !(0.0..=1.0).contains(&s.warmup_fraction) || s.div_factor <= 0.0 || s.final_div_factor <= 0.0 {
            return bad("schedule needs warmup_fraction in [0, 1] and positive factors");
        }
        if self.model.hidden == 0 || self.model.head_hidden == 0 {
            return bad("model widths must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("{n} samples cannot be split into {folds} folds")]
    TooFewSamples { n: usize, folds: usize },
    #[error("non-finite loss {loss} at epoch {epoch} in batch [{}]", .batch.join(", "))]
    NonFiniteLoss { epoch: usize, batch: Vec<String>, loss: f64 },
    #[error("sample {id}: {source}")]
    Sample { id: String, source: SampleError },
    #[error(transparent)]
    Model(#[from] SformerError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, thiserror::Error)]
pub enum SampleError {
    #[error(transparent)]
    Graph(#[from] PeriodicError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// A structure lifted to its complex and raw features, with a target.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub complex: QuotientComplex,
    pub raw: RawFeatures,
    pub target: f64,
}

pub fn prepare_structure(
    s: &CrystalStructure,
    k: usize,
    table: &AtomFeatureTable,
) -> Result<(QuotientComplex, RawFeatures), SampleError> {
    let c = build_complex(neighbor_list(s, k)?);
    let raw = featurize_raw(&c, s, table)?;
    Ok((c, raw))
}

/// Build complexes and features for every record, in parallel.
pub fn prepare_samples(records: &[DatasetRecord], k: usize, table: &AtomFeatureTable) -> Result<Vec<Sample>, TrainError> {
    records
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let id = r.id().map_or_else(|| format!("#{i}"), str::to_string);
            match prepare_structure(&r.structure, k, table) {
                Ok((complex, raw)) => Ok(Sample { id, complex, raw, target: r.target }),
                Err(source) => Err(TrainError::Sample { id, source }),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub lr: f64,
}

pub fn history_jsonl(history: &[EpochRecord]) -> String {
    history.iter().map(|r| serde_json::to_string(r).expect("record serializes") + "\n").collect()
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the best selection loss seen (validation loss when a
    /// validation set is given, training loss otherwise).
    pub best: SformerModel,
    pub best_epoch: usize,
    /// Parameters after the last epoch.
    pub last: SformerModel,
    pub history: Vec<EpochRecord>,
}

fn batch_of(samples: &[Sample], idx: &[usize]) -> Result<(GraphBatch, Vec<f64>), SformerError> {
    let items: Vec<_> = idx.iter().map(|&i| (&samples[i].complex, &samples[i].raw)).collect();
    Ok((GraphBatch::new(&items)?, idx.iter().map(|&i| samples[i].target).collect()))
}

fn task_loss(pred: &[f64], targets: &[f64], loss: LossChoice) -> f64 {
    let n = pred.len() as f64;
    pred.iter()
        .zip(targets)
        .map(|(p, t)| match loss {
            LossChoice::Mse => (p - t) * (p - t),
            LossChoice::Mae => (p - t).abs(),
        })
        .sum::<f64>()
        / n
}

/// Eval-mode predictions, computed in parallel over fixed-size chunks.
pub fn predict(model: &SformerModel, samples: &[Sample]) -> Result<Vec<f64>, SformerError> {
    let mut m = model.clone();
    m.set_mode(Mode::Eval);
    let idx: Vec<usize> = (0..samples.len()).collect();
    let chunks: Vec<Vec<f64>> = idx
        .par_chunks(64)
        .map(|c| batch_of(samples, c).map(|(b, _)| m.predict_batch(&b)))
        .collect::<Result<_, _>>()?;
    Ok(chunks.concat())
}

pub fn train(config: &TrainConfig, train_set: &[Sample], val_set: &[Sample]) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let model = SformerModel::new(config.model, config.seed);
    train_from(model, config, train_set, val_set)
}

/// Continue training a pretrained model; zero epochs returns it unchanged.
pub fn finetune(
    checkpoint: &Path,
    config: &TrainConfig,
    train_set: &[Sample],
    val_set: &[Sample],
) -> Result<TrainOutcome, TrainError> {
    let model = SformerModel::load(checkpoint, Some(config.model))?;
    if config.epochs == 0 {
        return Ok(TrainOutcome { best: model.clone(), best_epoch: 0, last: model, history: Vec::new() });
    }
    config.validate()?;
    train_from(model, config, train_set, val_set)
}

pub fn train_from(
    mut model: SformerModel,
    config: &TrainConfig,
    train_set: &[Sample],
    val_set: &[Sample],
) -> Result<TrainOutcome, TrainError> {
    if train_set.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let n = train_set.len();
    let per_epoch = n.div_ceil(config.batch_size);
    let total = per_epoch * config.epochs;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5348_5546);
    let mut opt = AdamW::new(model.params(), config.weight_decay);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, SformerModel)> = None;
    let mut step = 0;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        model.set_mode(Mode::Train);
        let mut loss_sum = 0.0;
        let mut lr = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let (batch, targets) = batch_of(train_set, chunk)?;
            let result = model.loss_and_gradients(&batch, &targets, config.loss.into());
            let ids = || chunk.iter().map(|&i| train_set[i].id.clone()).collect();
            let (grads, stats) = match result {
                Ok(r) => r,
                Err(SformerError::NonFiniteLoss(loss)) => {
                    return Err(TrainError::NonFiniteLoss { epoch, batch: ids(), loss });
                }
                Err(e) => return Err(e.into()),
            };
            if grads.params.iter().any(|g| g.iter().any(|x| !x.is_finite())) {
                return Err(TrainError::NonFiniteLoss { epoch, batch: ids(), loss: grads.loss });
            }
            lr = one_cycle_lr_with(step, total, config.peak_lr, &config.schedule);
            opt.step(model.params_mut(), &grads.params, lr);
            model.apply_batch_stats(&stats);
            loss_sum += grads.loss * chunk.len() as f64;
            step += 1;
        }
        model.set_mode(Mode::Eval);
        let train_loss = loss_sum / n as f64;
        let val_loss = if val_set.is_empty() {
            None
        } else {
            let pred = predict(&model, val_set)?;
            let t: Vec<f64> = val_set.iter().map(|s| s.target).collect();
            Some(task_loss(&pred, &t, config.loss))
        };
        history.push(EpochRecord { epoch, train_loss, val_loss, lr });
        let score = val_loss.unwrap_or(train_loss);
        if best.as_ref().is_none_or(|(b, _, _)| score < *b) {
            best = Some((score, epoch, model.clone()));
            if let Some(path) = &config.checkpoint_path {
                let extra = checkpoint_extra(config, epoch, score);
                model.save(path, extra).map_err(|e| TrainError::Io(format!("{}: {e}", path.display())))?;
            }
        }
    }
    let (_, best_epoch, best) = best.expect("at least one epoch");
    Ok(TrainOutcome { best, best_epoch, last: model, history })
}

fn checkpoint_extra(config: &TrainConfig, epoch: usize, score: f64) -> serde_json::Value {
    let mut extra = config.metadata.clone();
    extra.insert("k_neighbors".into(), config.k_neighbors.into());
    extra.insert("loss".into(), config.loss.to_string().into());
    extra.insert("seed".into(), config.seed.into());
    extra.insert("epoch".into(), epoch.into());
    extra.insert("selection_loss".into(), score.into());
    serde_json::Value::Object(extra)
}

/// Whether correlation-type metrics could be computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricStatus {
    Ok,
    /// All targets equal: COD and PCC are undefined.
    ZeroVariance,
    /// All predictions equal: PCC is undefined.
    ConstantPrediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    pub cod: Option<f64>,
    pub pcc: Option<f64>,
    pub mad: f64,
    pub mad_mae_ratio: Option<f64>,
    pub status: MetricStatus,
}

/// Regression metrics of `pred` against `target`.
pub fn metrics(target: &[f64], pred: &[f64]) -> MetricsReport {
    assert_eq!(target.len(), pred.len(), "target / prediction lengths");
    assert!(!target.is_empty(), "metrics of an empty set");
    let n = target.len() as f64;
    let mean_y = target.iter().sum::<f64>() / n;
    let mean_p = pred.iter().sum::<f64>() / n;
    let mut abs = 0.0;
    let mut sq = 0.0;
    let mut ss_tot = 0.0;
    let mut ss_pred = 0.0;
    let mut cross = 0.0;
    let mut mad = 0.0;
    for (&y, &p) in target.iter().zip(pred) {
        abs += (y - p).abs();
        sq += (y - p) * (y - p);
        ss_tot += (y - mean_y) * (y - mean_y);
        ss_pred += (p - mean_p) * (p - mean_p);
        cross += (y - mean_y) * (p - mean_p);
        mad += (y - mean_y).abs();
    }
    let mae = abs / n;
    let mse = sq / n;
    let mad = mad / n;
    let (cod, pcc, status) = if ss_tot == 0.0 {
        (None, None, MetricStatus::ZeroVariance)
    } else if ss_pred == 0.0 {
        (Some(1.0 - sq / ss_tot), None, MetricStatus::ConstantPrediction)
    } else {
        let r = (cross / (ss_tot * ss_pred).sqrt()).clamp(-1.0, 1.0);
        (Some(1.0 - sq / ss_tot), Some(r), MetricStatus::Ok)
    };
    MetricsReport {
        n: target.len(),
        mae,
        mse,
        rmse: mse.sqrt(),
        cod,
        pcc,
        mad,
        mad_mae_ratio: (mae > 0.0).then(|| mad / mae),
        status,
    }
}

/// Eval-mode metrics over a prepared dataset, plus the predictions.
pub fn evaluate(model: &SformerModel, samples: &[Sample]) -> Result<(MetricsReport, Vec<f64>), TrainError> {
    if samples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let pred = predict(model, samples)?;
    let target: Vec<f64> = samples.iter().map(|s| s.target).collect();
    Ok((metrics(&target, &pred), pred))
}

/// `(train, test)` index lists of one fold.
pub type Fold = (Vec<usize>, Vec<usize>);

/// Seeded shuffle, then contiguous partition into `folds` test sets whose
/// sizes differ by at most one.
pub fn kfold_split(n: usize, folds: usize, seed: u64) -> Result<Vec<Fold>, TrainError> {
    if folds < 2 || n < folds {
        return Err(TrainError::TooFewSamples { n, folds });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / folds, n % folds);
    let mut start = 0;
    let mut out = Vec::with_capacity(folds);
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        let test = idx[start..start + len].to_vec();
        let train = idx[..start].iter().chain(&idx[start + len..]).copied().collect();
        out.push((train, test));
        start += len;
    }
    Ok(out)
}

/// Random small cells labelled with their mean nearest-neighbor distance.
///
/// Cells hold one or two atoms of light elements with lattice lengths
/// between 2.4 and 3.6 Å and angles within 15° of orthogonal.
pub fn synthetic_dataset(count: usize, seed: u64) -> Vec<DatasetRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let lengths: [f64; 3] = std::array::from_fn(|_| rng.random_range(2.4..3.6));
        let angles: [f64; 3] = std::array::from_fn(|_| (90.0 + rng.random_range(-15.0..15.0f64)).to_radians());
        let lattice = lattice_from_parameters(lengths, angles);
        let atoms = rng.random_range(1..=2usize);
        let species = (0..atoms).map(|_| rng.random_range(1..=9u32)).collect();
        let frac = (0..atoms).map(|_| std::array::from_fn(|_| rng.random_range(0.0..1.0))).collect();
        let id = format!("synthetic-{}", out.len());
        let Ok(s) = CrystalStructure::new(lattice, species, frac, Some(id)) else { continue };
        match mean_nearest_neighbor_distance(&s) {
            Ok(d) if d > 1.0 => out.push(DatasetRecord { structure: s, target: d, split: None }),
            _ => {}
        }
    }
    out
}

/// Lattice rows from lengths `(a, b, c)` and angles `(α, β, γ)` in radians.
pub fn lattice_from_parameters(len: [f64; 3], ang: [f64; 3]) -> [[f64; 3]; 3] {
    let [a, b, c] = len;
    let (ca, cb, cg) = (ang[0].cos(), ang[1].cos(), ang[2].cos());
    let sg = ang[2].sin();
    let cx = c * cb;
    let cy = c * (ca - cb * cg) / sg;
    let cz = (c * c - cx * cx - cy * cy).max(0.0).sqrt();
    [[a, 0.0, 0.0], [b * cg, b * sg, 0.0], [cx, cy, cz]]
}
