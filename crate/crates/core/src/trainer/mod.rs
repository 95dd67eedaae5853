//! Contrastive training of the encoder over (query, positive, negatives)
//! triples with exact hand-derived gradients.

mod checkpoint;
mod gradcheck;
mod loss;
mod optim;

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::config::Fingerprint;
use crate::corpus::{Collection, TextKind, TrainingSet};
use crate::encoder::{self, EncoderParams, Granularity, Gradients, Pipeline, PreparedText};
use crate::error::{Error, Result};
use crate::seed;

pub use checkpoint::Checkpoint;
pub use gradcheck::{grad_check, tiny_problem, GradCheckReport, TinyProblem};
pub use loss::{loss, loss_grad};
pub use optim::Optimizer;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Negatives per query.
    pub negatives: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub normalize: bool,
    pub granularity: Granularity,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            negatives: 3,
            batch_size: 16,
            epochs: 10,
            learning_rate: 1e-3,
            optimizer: Optimizer::default(),
            seed: 0,
            normalize: true,
            granularity: Granularity::Topic,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.negatives < 1 || self.batch_size < 1 || self.epochs < 1 {
            return Err(Error::Config("negatives, batch_size and epochs must be ≥ 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be a finite non-negative number".into()));
        }
        Ok(())
    }
}

/// One query with its positive (`docs[0]`) and negatives.
#[derive(Debug, Clone)]
pub struct Example<'a> {
    pub query: &'a PreparedText,
    pub docs: Vec<&'a PreparedText>,
}

/// Loss of one example; accumulates its gradient (unscaled) into `grads`.
fn example_gradient(
    params: &EncoderParams,
    ex: &Example<'_>,
    granularity: Granularity,
    normalize: bool,
    grads: Option<&mut Gradients>,
) -> f64 {
    let q = encoder::forward(params, ex.query, granularity, normalize);
    let docs: Vec<_> = ex
        .docs
        .iter()
        .map(|d| encoder::forward(params, d, granularity, normalize))
        .collect();

    let mut scores = Vec::with_capacity(docs.len());
    let mut argmaxes = Vec::with_capacity(docs.len());
    for d in &docs {
        let dvecs: Vec<&[f64]> = d.outputs().collect();
        let (s, arg) = loss::maxsim_with_argmax(q.outputs(), &dvecs);
        scores.push(s);
        argmaxes.push(arg);
    }
    let value = loss::loss(&scores);
    let Some(grads) = grads else {
        return value;
    };

    let d_scores = loss::loss_grad(&scores);
    let dim = params.shape.dim;
    let q_out: Vec<&[f64]> = q.outputs().collect();
    let mut d_query = vec![vec![0.0; dim]; q.len()];
    for ((d, arg), &g) in docs.iter().zip(&argmaxes).zip(&d_scores) {
        let d_out: Vec<&[f64]> = d.outputs().collect();
        let mut d_doc = vec![vec![0.0; dim]; d.len()];
        for (i, &j) in arg.iter().enumerate() {
            crate::linalg::axpy(g, d_out[j], &mut d_query[i]);
            crate::linalg::axpy(g, q_out[i], &mut d_doc[j]);
        }
        encoder::backward(params, d, &d_doc, grads);
    }
    encoder::backward(params, &q, &d_query, grads);
    value
}

/// Mean loss over a batch.
pub fn batch_loss(params: &EncoderParams, batch: &[Example<'_>], granularity: Granularity, normalize: bool) -> f64 {
    let total: f64 = batch
        .iter()
        .map(|ex| example_gradient(params, ex, granularity, normalize, None))
        .sum();
    total / batch.len() as f64
}

/// Mean loss and its exact gradient over a batch.
///
/// Examples run in parallel on the current rayon pool; per-example gradients
/// are summed in batch order so the result does not depend on thread count.
pub fn batch_gradient(
    params: &EncoderParams,
    batch: &[Example<'_>],
    granularity: Granularity,
    normalize: bool,
) -> Result<(f64, Gradients)> {
    let parts: Vec<(f64, Gradients)> = batch
        .par_iter()
        .map(|ex| {
            let mut g = params.zeros_like();
            let l = example_gradient(params, ex, granularity, normalize, Some(&mut g));
            (l, g)
        })
        .collect();
    let mut total = params.zeros_like();
    let mut loss_sum = 0.0;
    for (l, g) in &parts {
        loss_sum += l;
        total.add_scaled(1.0, g);
    }
    let n = batch.len() as f64;
    total.scale(1.0 / n);
    if let Some(name) = total.first_non_finite() {
        return Err(Error::Numerical(name.to_string()));
    }
    Ok((loss_sum / n, total))
}

pub struct TrainData<'a> {
    pub triples: &'a TrainingSet,
    pub queries: &'a Collection,
    pub docs: &'a Collection,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub checkpoint: Checkpoint,
    pub epoch_losses: Vec<f64>,
}

impl TrainReport {
    /// `epoch\tmean_loss` lines, epochs counted from 1.
    pub fn log_tsv(&self) -> String {
        self.epoch_losses
            .iter()
            .enumerate()
            .map(|(e, l)| format!("{}\t{l}\n", e + 1))
            .collect()
    }
}

fn prepare_all(
    pipeline: &Pipeline,
    ids: Vec<&str>,
    texts: &Collection,
    kind: TextKind,
    granularity: Granularity,
) -> Result<HashMap<String, PreparedText>> {
    ids.into_par_iter()
        .map(|id| {
            let raw = texts
                .get(id)
                .ok_or_else(|| Error::Config(format!("training triples reference unknown text `{id}`")))?;
            Ok((id.to_string(), pipeline.prepare(id, raw, kind, granularity)?))
        })
        .collect()
}

pub fn train(
    config: &TrainConfig,
    data: TrainData<'_>,
    pipeline: &Pipeline,
    init: EncoderParams,
    fingerprint: Fingerprint,
) -> Result<TrainReport> {
    config.validate()?;
    pipeline.check_params(&init)?;
    if data.triples.is_empty() {
        return Err(Error::Config("no training triples".into()));
    }
    if data.triples.negatives_per_query() != Some(config.negatives) {
        return Err(Error::Config(format!(
            "triples carry {:?} negatives, config expects {}",
            data.triples.negatives_per_query(),
            config.negatives
        )));
    }

    let granularity = config.granularity;
    let mut qids: Vec<&str> = data.triples.triples.iter().map(|t| t.query_id.as_str()).collect();
    qids.sort_unstable();
    qids.dedup();
    let mut dids: Vec<&str> = data
        .triples
        .triples
        .iter()
        .flat_map(|t| std::iter::once(t.positive.as_str()).chain(t.negatives.iter().map(String::as_str)))
        .collect();
    dids.sort_unstable();
    dids.dedup();
    let queries = prepare_all(pipeline, qids, data.queries, TextKind::Query, granularity)?;
    let docs = prepare_all(pipeline, dids, data.docs, TextKind::Document, granularity)?;

    let examples: Vec<Example<'_>> = data
        .triples
        .triples
        .iter()
        .map(|t| Example {
            query: &queries[&t.query_id],
            docs: std::iter::once(&t.positive)
                .chain(&t.negatives)
                .map(|id| &docs[id])
                .collect(),
        })
        .collect();

    let mut params = init;
    let mut state = optim::OptimizerState::new(config.optimizer, config.learning_rate, &params);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut last_good = Checkpoint {
        params: params.clone(),
        epoch: 0,
        loss: f64::NAN,
        fingerprint,
    };
    let mut order: Vec<usize> = (0..examples.len()).collect();

    for epoch in 0..config.epochs {
        let mut rng = seed::rng(seed::derive(config.seed, 0x5348_5546 + epoch as u64));
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut diverged = None;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Example<'_>> = chunk.iter().map(|&i| examples[i].clone()).collect();
            let step = batch_gradient(&params, &batch, granularity, config.normalize)
                .and_then(|(l, grads)| {
                    if !l.is_finite() {
                        return Err(Error::Numerical("loss".into()));
                    }
                    state.step(&mut params, &grads)?;
                    Ok(l)
                });
            match step {
                Ok(l) => epoch_loss += l * chunk.len() as f64,
                Err(e) => {
                    diverged = Some(e);
                    break;
                }
            }
        }
        if let Some(name) = params.first_non_finite() {
            diverged.get_or_insert(Error::Numerical(name.to_string()));
        }
        if let Some(cause) = diverged {
            log::error!("training diverged in epoch {}: {cause}", epoch + 1);
            return Err(Error::Diverged {
                epoch: epoch + 1,
                last_good: Box::new(last_good),
            });
        }
        let mean = epoch_loss / examples.len() as f64;
        log::info!("epoch {}\tmean loss {mean:.6}", epoch + 1);
        epoch_losses.push(mean);
        last_good = Checkpoint {
            params: params.clone(),
            epoch: epoch as u32 + 1,
            loss: mean,
            fingerprint,
        };
    }

    Ok(TrainReport {
        checkpoint: last_good,
        epoch_losses,
    })
}
