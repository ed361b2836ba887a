use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::{AspectKind, AspectModel, AspectParams, ModelShape, Prepared, Vocabulary};
use crate::error::{Error, Result};
use crate::features::EmbeddingTable;
use crate::math::{derive_seed, seeded_rng};
use crate::table::Table;
use crate::text::tokenize;

/// One labeled (query, table) pair.
#[derive(Debug, Clone, Copy)]
pub struct NeuralExample<'a> {
    pub query: &'a [String],
    pub table: &'a Table,
    pub label: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuralTrainConfig {
    pub shape: ModelShape,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub negatives: usize,
    pub seed: u64,
}

impl Default for NeuralTrainConfig {
    fn default() -> Self {
        Self {
            shape: ModelShape::default(),
            learning_rate: 0.05,
            epochs: 20,
            batch_size: 32,
            negatives: 4,
            seed: 7,
        }
    }
}

impl NeuralTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.batch_size == 0 {
            return Err(Error::Config("learning rate and batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Optional starting point of a model: a fixed vocabulary and pretrained
/// word vectors for its embedding rows.
#[derive(Debug, Clone, Copy, Default)]
pub struct ModelInit<'a> {
    pub vocab: Option<&'a Vocabulary>,
    pub pretrained: Option<&'a EmbeddingTable>,
}

#[derive(Debug, Clone)]
pub struct TrainedAspectModel {
    pub model: AspectModel,
    /// Mean loss of each epoch.
    pub loss_trace: Vec<f64>,
}

/// Every word of the queries and tables in `data`.
pub fn vocabulary_of(data: &[NeuralExample<'_>]) -> Vocabulary {
    let mut words = HashSet::new();
    for ex in data {
        words.extend(ex.query.iter().cloned());
        words.extend(table_words(ex.table));
    }
    Vocabulary::new(words)
}

pub(crate) fn table_words(table: &Table) -> Vec<String> {
    let mut out: Vec<String> = table.caption.as_deref().map(tokenize).unwrap_or_default();
    for text in table.headers.iter().chain(table.cells.iter().flatten()) {
        out.extend(tokenize(text));
    }
    out
}

/// Trains one aspect model with mini-batch SGD on the two-class
/// cross-entropy; pairs whose aspect is empty are skipped.
pub fn train_aspect_model(
    data: &[NeuralExample<'_>],
    kind: AspectKind,
    config: &NeuralTrainConfig,
    init: ModelInit<'_>,
) -> Result<TrainedAspectModel> {
    config.validate()?;
    let positives = data.iter().filter(|e| e.label).count();
    if positives == 0 || positives == data.len() {
        return Err(Error::Training(format!(
            "{kind} training data must contain both labels ({positives} positive of {})",
            data.len()
        )));
    }
    let vocab = init.vocab.cloned().unwrap_or_else(|| vocabulary_of(data));
    let model_seed = derive_seed(config.seed, kind.name());
    let mut model = AspectModel::new_random(kind, vocab, config.shape, model_seed, init.pretrained)?;
    let prepared: Vec<Prepared> = data
        .iter()
        .filter_map(|e| model.prepare(e.query, e.table, e.label))
        .collect();
    if prepared.is_empty() {
        return Err(Error::Training(format!("no {kind} training pair has a non-empty aspect")));
    }
    log::info!("training {kind} model on {} pairs", prepared.len());

    let mut rng = seeded_rng(derive_seed(model_seed, "shuffle"));
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut grads = AspectParams::zeros_like(&model.params);
    let mut loss_trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Prepared> = chunk.iter().map(|&i| prepared[i].clone()).collect();
            zero(&mut grads);
            let loss = model.loss(&batch, Some(&mut grads));
            total += loss * batch.len() as f64;
            model.params.sgd_update(&grads, config.learning_rate);
        }
        let mean = total / prepared.len() as f64;
        log::debug!("{kind} epoch {epoch}: loss {mean:.6}");
        loss_trace.push(mean);
    }
    Ok(TrainedAspectModel { model, loss_trace })
}

fn zero(p: &mut AspectParams) {
    for (_, t) in p.named_tensors_mut() {
        t.fill(0.0);
    }
}

/// Mean training loss of `model` on `data` without updating it.
pub fn evaluate_loss(model: &AspectModel, data: &[NeuralExample<'_>]) -> f64 {
    let prepared: Vec<Prepared> = data
        .iter()
        .filter_map(|e| model.prepare(e.query, e.table, e.label))
        .collect();
    model.loss(&prepared, None)
}

/// Draws up to `n` negative table ids: uniformly from `candidates` minus the
/// relevant ones, topped up uniformly from `corpus_ids` when too few remain.
pub fn sample_negatives(
    relevant: &[String],
    candidates: &[String],
    corpus_ids: &[String],
    n: usize,
    rng: &mut impl Rng,
) -> Vec<String> {
    let excluded: HashSet<&str> = relevant.iter().map(String::as_str).collect();
    let mut pool: Vec<&String> = candidates.iter().filter(|c| !excluded.contains(c.as_str())).collect();
    pool.dedup();
    let mut out: Vec<String> = if pool.len() >= n {
        pool.choose_multiple(rng, n).map(|s| (*s).clone()).collect()
    } else {
        pool.iter().map(|s| (*s).clone()).collect()
    };
    let taken: HashSet<String> = out.iter().cloned().collect();
    let rest: Vec<&String> = corpus_ids
        .iter()
        .filter(|c| !excluded.contains(c.as_str()) && !taken.contains(*c))
        .collect();
    let missing = n.saturating_sub(out.len()).min(rest.len());
    out.extend(rest.choose_multiple(rng, missing).map(|id| (*id).clone()));
    out
}
