//! Dataset splitting, the mini-batch training loop, and evaluation.

mod eval;

pub use eval::{
    case_study, compare_runtimes, evaluate_methods, predict_pairs, CaseStudy, EvalOptions,
    EvalReport, ExcludedPair, Method, MethodRow, PairPrediction, RuntimeComparison,
};

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Matrix, Tape};
use crate::error::{Error, Result};
use crate::graph::{build_vocabulary, GraphPairRecord, LabeledCfg};
use crate::model::{squared_error, GraphInput, Model, ModelConfig, ParamVars, TapeEncoding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    PlainSgd,
    AdaptiveMoment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub split_ratio: f64,
    pub seed: u64,
    /// Stop after this many epochs without a new best test MSE.
    pub patience: usize,
    /// Where the best-test model is written whenever it improves.
    pub checkpoint_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: Optimizer::AdaptiveMoment,
            split_ratio: 0.8,
            seed: 0,
            patience: 20,
            checkpoint_path: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::Config(format!(
                "split_ratio must be in (0, 1), got {}",
                self.split_ratio
            )));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Shuffles with `seed` and cuts after `floor(ratio * n)` items.
pub fn split_dataset<T: Clone>(records: &[T], ratio: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if records.is_empty() {
        return Err(Error::Invalid("cannot split an empty dataset".into()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!(
            "split ratio must be in (0, 1), got {ratio}"
        )));
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = (ratio * records.len() as f64).floor() as usize;
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect::<Vec<T>>();
    Ok((pick(&order[..cut]), pick(&order[cut..])))
}

pub fn mse(preds: &[f64], targets: &[f64]) -> Result<f64> {
    if preds.len() != targets.len() {
        return Err(Error::Invalid(format!(
            "{} predictions for {} targets",
            preds.len(),
            targets.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Invalid("mse of an empty set".into()));
    }
    Ok(preds
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / preds.len() as f64)
}

/// MSE of always predicting the mean target of `records`.
pub fn target_variance(records: &[GraphPairRecord]) -> Result<f64> {
    let targets: Vec<f64> = records.iter().map(|r| r.similarity).collect();
    if targets.is_empty() {
        return Err(Error::Invalid("variance of an empty set".into()));
    }
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    mse(&vec![mean; targets.len()], &targets)
}

/// Train and test MSE after an epoch; epoch 0 is the untrained model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_mse: f64,
    pub test_mse: Option<f64>,
}

pub fn write_loss_csv(curve: &[EpochLoss], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for row in curve {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_loss_csv(path: &Path) -> Result<Vec<EpochLoss>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| csv_error(path, e)))
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Dataset {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest test MSE (or train MSE
    /// when there is no test set).
    pub model: Model,
    pub curve: Vec<EpochLoss>,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub elapsed: Duration,
}

/// Distinct graphs of a record set and each record as a pair of indices.
pub(crate) struct IndexedPairs {
    pub graphs: Vec<LabeledCfg>,
    pub pairs: Vec<(usize, usize, f64)>,
}

impl IndexedPairs {
    pub fn new<'a>(records: &'a [GraphPairRecord]) -> Self {
        let mut index: HashMap<&'a LabeledCfg, usize> = HashMap::new();
        let mut graphs = Vec::new();
        let mut pairs = Vec::with_capacity(records.len());
        for r in records {
            let mut id = |g: &'a LabeledCfg| {
                let next = graphs.len();
                *index.entry(g).or_insert_with(|| {
                    graphs.push(g.clone());
                    next
                })
            };
            let a = id(&r.graph_1);
            let b = id(&r.graph_2);
            pairs.push((a, b, r.similarity));
        }
        IndexedPairs { graphs, pairs }
    }
}

struct Adam {
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    t: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

fn step(model: &mut Model, grads: &[Matrix], config: &TrainConfig, adam: &mut Option<Adam>) {
    let lr = config.learning_rate;
    let tensors = model.params.tensors_mut();
    match config.optimizer {
        Optimizer::PlainSgd => {
            for (p, g) in tensors.into_iter().zip(grads) {
                for (x, d) in p.data_mut().iter_mut().zip(g.data()) {
                    *x -= lr * d;
                }
            }
        }
        Optimizer::AdaptiveMoment => {
            let state = adam.get_or_insert_with(|| Adam {
                m: grads
                    .iter()
                    .map(|g| Matrix::zeros(g.rows(), g.cols()))
                    .collect(),
                v: grads
                    .iter()
                    .map(|g| Matrix::zeros(g.rows(), g.cols()))
                    .collect(),
                t: 0,
            });
            state.t += 1;
            let c1 = 1.0 - BETA1.powi(state.t);
            let c2 = 1.0 - BETA2.powi(state.t);
            for (((p, g), m), v) in tensors
                .into_iter()
                .zip(grads)
                .zip(&mut state.m)
                .zip(&mut state.v)
            {
                let iter = p
                    .data_mut()
                    .iter_mut()
                    .zip(g.data())
                    .zip(m.data_mut())
                    .zip(v.data_mut());
                for (((x, &d), m), v) in iter {
                    *m = BETA1 * *m + (1.0 - BETA1) * d;
                    *v = BETA2 * *v + (1.0 - BETA2) * d * d;
                    *x -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

fn evaluate_indexed(model: &Model, data: &IndexedPairs) -> Result<f64> {
    let embeddings = data
        .graphs
        .iter()
        .map(|g| model.embed(g))
        .collect::<Result<Vec<_>>>()?;
    let mut preds = Vec::with_capacity(data.pairs.len());
    let mut targets = Vec::with_capacity(data.pairs.len());
    let scorer = model.scorer();
    for &(a, b, y) in &data.pairs {
        preds.push(scorer.score(&embeddings[a], &embeddings[b])?);
        targets.push(y);
    }
    mse(&preds, &targets)
}

/// Mini-batch MSE training; see [`train_with_progress`].
pub fn train(
    train_set: &[GraphPairRecord],
    test_set: &[GraphPairRecord],
    model_config: &ModelConfig,
    train_config: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with_progress(train_set, test_set, model_config, train_config, &mut |_| {})
}

/// Trains a fresh model whose vocabulary comes from the training graphs
/// only. Each batch records one tape: every distinct graph in the batch is
/// encoded once, the batch loss is the mean squared error over its pairs,
/// and one optimizer step follows. `progress` sees each epoch's losses.
pub fn train_with_progress(
    train_set: &[GraphPairRecord],
    test_set: &[GraphPairRecord],
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    progress: &mut dyn FnMut(&EpochLoss),
) -> Result<TrainOutcome> {
    train_config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Invalid("training set is empty".into()));
    }
    let start = Instant::now();
    let train_data = IndexedPairs::new(train_set);
    let test_data = IndexedPairs::new(test_set);
    let vocab = build_vocabulary(&train_data.graphs)?;
    let mut model = Model::new(model_config.clone(), vocab)?;
    let inputs: Vec<GraphInput> = train_data.graphs.iter().map(|g| model.input(g)).collect();

    let measure = |model: &Model| -> Result<EpochLoss> {
        Ok(EpochLoss {
            epoch: 0,
            train_mse: evaluate_indexed(model, &train_data)?,
            test_mse: if test_data.pairs.is_empty() {
                None
            } else {
                Some(evaluate_indexed(model, &test_data)?)
            },
        })
    };
    let selection = |l: &EpochLoss| l.test_mse.unwrap_or(l.train_mse);

    let first = measure(&model)?;
    progress(&first);
    let mut curve = vec![first];
    let mut best = (selection(&first), 0usize, model.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(train_config.seed);
    let mut order: Vec<usize> = (0..train_data.pairs.len()).collect();
    let mut adam = None;
    let mut stopped_early = false;

    for epoch in 1..=train_config.epochs {
        order.shuffle(&mut rng);
        for (b, batch) in order.chunks(train_config.batch_size).enumerate() {
            let diverged = |pair: usize, loss: f64| Error::Diverged {
                epoch,
                batch: b,
                pair,
                loss,
            };
            let mut tape = Tape::new();
            let vars = ParamVars::bind(&mut tape, &model.params)?;
            let mut encoded: HashMap<usize, TapeEncoding> = HashMap::new();
            let mut errors = Vec::with_capacity(batch.len());
            for &p in batch {
                let (g1, g2, y) = train_data.pairs[p];
                let result = (|| -> Result<_> {
                    for g in [g1, g2] {
                        if let Entry::Vacant(slot) = encoded.entry(g) {
                            slot.insert(vars.encode(&mut tape, &inputs[g])?);
                        }
                    }
                    let y_hat =
                        vars.forward(&mut tape, &encoded[&g1], &encoded[&g2], &model.config)?;
                    squared_error(&mut tape, y_hat, y)
                })();
                match result {
                    Ok(e) => errors.push(e),
                    Err(Error::NonFinite(_)) => return Err(diverged(p, f64::NAN)),
                    Err(e) => return Err(e),
                }
            }
            let stacked = tape.concat_rows(&errors)?;
            let total = tape.sum(stacked)?;
            let loss = tape.scale(total, 1.0 / errors.len() as f64)?;
            let value = tape.value(loss).item();
            if !value.is_finite() {
                let k = errors
                    .iter()
                    .position(|&e| !tape.value(e).item().is_finite())
                    .unwrap_or(0);
                return Err(diverged(batch[k], value));
            }
            tape.backward(loss).map_err(|_| diverged(batch[0], value))?;
            step(&mut model, &vars.grads(&tape), train_config, &mut adam);
            if !model.params.tensors().iter().all(|m| m.is_finite()) {
                return Err(diverged(batch[0], value));
            }
        }
        let mut row = measure(&model)?;
        row.epoch = epoch;
        progress(&row);
        curve.push(row);
        if selection(&row) < best.0 {
            best = (selection(&row), epoch, model.clone());
            if let Some(path) = &train_config.checkpoint_path {
                model.save(path)?;
            }
        }
        if epoch - best.1 >= train_config.patience.max(1) {
            stopped_early = epoch < train_config.epochs;
            break;
        }
    }
    if best.1 == 0 {
        if let Some(path) = &train_config.checkpoint_path {
            best.2.save(path)?;
        }
    }
    Ok(TrainOutcome {
        model: best.2,
        curve,
        best_epoch: best.1,
        stopped_early,
        elapsed: start.elapsed(),
    })
}
