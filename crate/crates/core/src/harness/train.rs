use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;

use super::config::{ExperimentConfig, TaskConfig};
use super::data::{
    gen_source_localization, ingest_edge_list, Dataset, Sample, Split, Splits, Target,
};
use super::ratings::ratings_dataset;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::nn::{Adam, GraphContext, Loss, Model, ModelSpec, Readout};
use crate::rng::{stream, streams};

pub const METRICS_HEADER: &str = "epoch,train_loss,val_loss,val_metric,seconds";

/// One row of the metrics file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Error rate for classification, RMSE for regression.
    pub val_metric: f64,
    pub seconds: f64,
}

pub fn metrics_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.epoch, r.train_loss, r.val_loss, r.val_metric, r.seconds
        );
    }
    out
}

/// Loss and metric of a model on one split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    /// Error rate for classification, RMSE over observed entries for regression.
    pub metric: f64,
    pub samples: usize,
}

/// Loss used to train on `sample`.
pub fn sample_loss(sample: &Sample, delta: f64) -> Loss {
    match &sample.target {
        Target::Class(c) => Loss::CrossEntropy(*c),
        Target::Values { values, mask } => Loss::SmoothL1 {
            target: DenseMatrix::column_vector(values),
            mask: Some(mask.clone()),
            delta,
        },
    }
}

fn argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
            if v > best.1 {
                (i, v)
            } else {
                best
            }
        })
        .0
}

/// Mean loss and metric over `indices`. An empty split evaluates to zeros.
pub fn evaluate_indices(
    model: &Model,
    ctx: &GraphContext,
    dataset: &Dataset,
    indices: &[usize],
    delta: f64,
) -> Result<Evaluation> {
    let mut loss = 0.0;
    let mut wrong = 0usize;
    let mut sq = 0.0;
    let mut observed = 0usize;
    for &i in indices {
        let sample = &dataset.samples[i];
        let (pred, l) = model.output_and_loss(ctx, &dataset.signal(i), &sample_loss(sample, delta))?;
        loss += l;
        match &sample.target {
            Target::Class(c) => wrong += usize::from(argmax(pred.as_slice()) != *c),
            Target::Values { values, mask } => {
                for ((p, t), m) in pred.as_slice().iter().zip(values).zip(mask) {
                    if *m {
                        sq += (p - t) * (p - t);
                        observed += 1;
                    }
                }
            }
        }
    }
    let count = indices.len();
    if count == 0 {
        return Ok(Evaluation {
            loss: 0.0,
            metric: 0.0,
            samples: 0,
        });
    }
    let metric = if dataset.is_regression() {
        if observed == 0 {
            0.0
        } else {
            (sq / observed as f64).sqrt()
        }
    } else {
        wrong as f64 / count as f64
    };
    Ok(Evaluation {
        loss: loss / count as f64,
        metric,
        samples: count,
    })
}

pub fn evaluate(
    model: &Model,
    ctx: &GraphContext,
    dataset: &Dataset,
    split: Split,
    delta: f64,
) -> Result<Evaluation> {
    evaluate_indices(model, ctx, dataset, dataset.splits.get(split), delta)
}

/// Network description for `dataset` under `config`.
pub fn model_spec_for(config: &ExperimentConfig, dataset: &Dataset) -> Result<ModelSpec> {
    let readout = if dataset.is_regression() {
        Readout::PerNode { outputs: 1 }
    } else {
        config
            .architecture
            .classification_readout(dataset.classes().max(1))
    };
    config.architecture.model_spec(&dataset.shift, 1, readout)
}

pub(crate) fn smooth_l1_delta(config: &ExperimentConfig) -> f64 {
    match &config.task {
        TaskConfig::RatingsRegression(r) => r.delta,
        _ => 1.0,
    }
}

/// Trained model, the best-validation-loss snapshot, and the per-epoch metrics.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub best_epoch: Option<usize>,
    pub metrics: Vec<MetricsRecord>,
}

/// Seeded initialization and mini-batch ADAM.
///
/// Each epoch shuffles the training indices with stream `SHUFFLE` and walks
/// them in batches. The returned model is the one with the lowest validation
/// loss seen after any epoch (training loss when there is no validation
/// split); with zero epochs it is the initialized model.
pub fn train(config: &ExperimentConfig, dataset: &Dataset) -> Result<TrainOutcome> {
    config.validate()?;
    dataset.splits.validate(dataset.samples.len())?;
    if dataset.splits.train.is_empty() {
        return Err(Error::InvalidArgument("training split is empty".into()));
    }
    let ctx = GraphContext::new(dataset.shift.clone())?;
    let spec = model_spec_for(config, dataset)?;
    let mut model = Model::new(spec, &ctx, &mut stream(config.seed, streams::INIT))?;
    let t = &config.training;
    let delta = smooth_l1_delta(config);
    let mut adam = Adam::new(t.learning_rate, model.params());
    let mut shuffle = stream(config.seed, streams::SHUFFLE);
    let signals: Vec<DenseMatrix> = (0..dataset.samples.len())
        .map(|i| dataset.signal(i))
        .collect();
    let losses: Vec<Loss> = dataset
        .samples
        .iter()
        .map(|s| sample_loss(s, delta))
        .collect();
    let mut best: Option<(f64, usize, Model)> = None;
    let mut metrics = Vec::with_capacity(t.epochs);
    let mut order = dataset.splits.train.clone();
    for epoch in 0..t.epochs {
        let started = Instant::now();
        order.shuffle(&mut shuffle);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(t.batch_size).enumerate() {
            let (loss, grads) = model
                .batch_gradient(&ctx, batch.iter().map(|&i| (&signals[i], &losses[i])))
                .map_err(|e| Error::Numerical(format!("epoch {epoch}, batch {b}: {e}")))?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "epoch {epoch}, batch {b}: loss is {loss}"
                )));
            }
            epoch_loss += loss * batch.len() as f64;
            adam.step(model.params_mut(), &grads)?;
            model.enforce_arma_guard(&ctx);
        }
        let train_loss = epoch_loss / order.len() as f64;
        let val = evaluate(&model, &ctx, dataset, Split::Val, delta)?;
        let score = if val.samples > 0 { val.loss } else { train_loss };
        if !score.is_finite() {
            return Err(Error::Numerical(format!(
                "epoch {epoch}: validation loss is {score}"
            )));
        }
        if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
            best = Some((score, epoch, model.clone()));
        }
        metrics.push(MetricsRecord {
            epoch,
            train_loss,
            val_loss: val.loss,
            val_metric: val.metric,
            seconds: if t.record_wall_time {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        });
        log::info!(
            "epoch {epoch}: train {train_loss:.5} val {:.5} metric {:.4}",
            val.loss,
            val.metric
        );
    }
    Ok(match best {
        Some((_, epoch, m)) => TrainOutcome {
            model: m,
            best_epoch: Some(epoch),
            metrics,
        },
        None => TrainOutcome {
            model,
            best_epoch: None,
            metrics,
        },
    })
}

/// Dataset described by the task section of `config`.
pub fn build_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    match &config.task {
        TaskConfig::SbmSourceLocalization(s) => gen_source_localization(s, config.seed),
        TaskConfig::EdgeListClassification(e) => {
            let mut d = ingest_edge_list(&e.edges, &e.signals, e.directed, e.normalization)?;
            d.assign_random_split(e.val_fraction, e.test_fraction, config.seed);
            Ok(d)
        }
        TaskConfig::RatingsRegression(r) => ratings_dataset(r, config.seed),
    }
}

/// Everything produced by one configured run.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub dataset: Dataset,
    pub train: TrainOutcome,
    pub test: Evaluation,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let dataset = build_dataset(config)?;
    let train = train(config, &dataset)?;
    let ctx = GraphContext::new(dataset.shift.clone())?;
    let test = evaluate(
        &train.model,
        &ctx,
        &dataset,
        Split::Test,
        smooth_l1_delta(config),
    )?;
    Ok(ExperimentOutcome {
        dataset,
        train,
        test,
    })
}

/// Replaces the splits of `dataset`; used by tests that need custom sizes.
pub fn with_splits(mut dataset: Dataset, splits: Splits) -> Result<Dataset> {
    splits.validate(dataset.samples.len())?;
    dataset.splits = splits;
    Ok(dataset)
}
