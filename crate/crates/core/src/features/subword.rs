//! Convolutional sentence encoder over hashed letter trigrams.
//!
//! Each token is embedded as the sum of the embeddings of its `#token#`
//! trigrams. A width-3 convolution with tanh runs over the token sequence
//! (sequences shorter than the window are padded with zero positions), the
//! window activations are max-pooled per unit, and a tanh projection gives
//! the sentence vector. Training maximizes the softmax of smoothed cosine
//! similarities of each paraphrase pair against in-batch negatives.

use std::collections::HashMap;
use std::path::Path;

use ndarray::{s, Array1, Array2};
use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{add_outer, cosine_with_grad, seeded_rng, softmax, uniform_matrix};
use crate::tensorfile::{Tensor, TensorBundle};
use crate::text::{token_trigram_ids, DEFAULT_TRIGRAM_DIMS};

pub const WINDOW: usize = 3;
const FILE_KIND: &str = "subword-encoder";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubwordEncoderConfig {
    pub trigram_dims: usize,
    pub embed_dim: usize,
    pub conv_dim: usize,
    pub out_dim: usize,
}

impl Default for SubwordEncoderConfig {
    fn default() -> Self {
        Self {
            trigram_dims: DEFAULT_TRIGRAM_DIMS,
            embed_dim: 32,
            conv_dim: 64,
            out_dim: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubwordEncoderParams {
    pub trigram_emb: Array2<f64>,
    pub conv_w: Array2<f64>,
    pub conv_b: Array1<f64>,
    pub out_w: Array2<f64>,
    pub out_b: Array1<f64>,
}

struct EncodeCache {
    /// trigram ids per position; padding positions are empty
    trigrams: Vec<Vec<u32>>,
    windows: Vec<Array1<f64>>,
    conv: Array2<f64>,
    argmax: Vec<usize>,
    pooled: Array1<f64>,
    out: Array1<f64>,
}

#[derive(Debug, Clone)]
struct SubwordGrads {
    trigram_emb: HashMap<u32, Array1<f64>>,
    conv_w: Array2<f64>,
    conv_b: Array1<f64>,
    out_w: Array2<f64>,
    out_b: Array1<f64>,
}

impl SubwordEncoderParams {
    pub fn random(config: SubwordEncoderConfig, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let SubwordEncoderConfig {
            trigram_dims,
            embed_dim,
            conv_dim,
            out_dim,
        } = config;
        let glorot = |fan_in: usize, fan_out: usize| (6.0 / (fan_in + fan_out) as f64).sqrt();
        Self {
            trigram_emb: uniform_matrix(&mut rng, trigram_dims, embed_dim, glorot(8, embed_dim)),
            conv_w: uniform_matrix(&mut rng, conv_dim, WINDOW * embed_dim, glorot(WINDOW * embed_dim, conv_dim)),
            conv_b: Array1::zeros(conv_dim),
            out_w: uniform_matrix(&mut rng, out_dim, conv_dim, glorot(conv_dim, out_dim)),
            out_b: Array1::zeros(out_dim),
        }
    }

    pub fn config(&self) -> SubwordEncoderConfig {
        SubwordEncoderConfig {
            trigram_dims: self.trigram_emb.nrows(),
            embed_dim: self.trigram_emb.ncols(),
            conv_dim: self.conv_w.nrows(),
            out_dim: self.out_w.nrows(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.config();
        let ok = c.trigram_dims > 0
            && self.conv_w.ncols() == WINDOW * c.embed_dim
            && self.conv_b.len() == c.conv_dim
            && self.out_w.ncols() == c.conv_dim
            && self.out_b.len() == c.out_dim;
        if !ok {
            return Err(Error::Shape("sub-word encoder tensors are inconsistent".into()));
        }
        let finite = [&self.trigram_emb, &self.conv_w, &self.out_w]
            .iter()
            .all(|m| m.iter().all(|x| x.is_finite()))
            && self.conv_b.iter().chain(self.out_b.iter()).all(|x| x.is_finite());
        if !finite {
            return Err(Error::Shape("sub-word encoder has non-finite values".into()));
        }
        Ok(())
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Array1<f64> {
        self.forward(tokens).out
    }

    fn forward<S: AsRef<str>>(&self, tokens: &[S]) -> EncodeCache {
        let dims = self.trigram_emb.nrows();
        let e = self.trigram_emb.ncols();
        let mut trigrams: Vec<Vec<u32>> = tokens
            .iter()
            .map(|t| token_trigram_ids(t.as_ref(), dims))
            .collect();
        while trigrams.len() < WINDOW {
            trigrams.push(Vec::new());
        }
        let positions: Vec<Array1<f64>> = trigrams
            .iter()
            .map(|ids| {
                let mut v = Array1::zeros(e);
                for &id in ids {
                    v += &self.trigram_emb.row(id as usize);
                }
                v
            })
            .collect();
        let n_windows = positions.len() - WINDOW + 1;
        let mut windows = Vec::with_capacity(n_windows);
        let mut conv = Array2::zeros((n_windows, self.conv_w.nrows()));
        for j in 0..n_windows {
            let mut x = Array1::zeros(WINDOW * e);
            for k in 0..WINDOW {
                x.slice_mut(s![k * e..(k + 1) * e]).assign(&positions[j + k]);
            }
            let a = (self.conv_w.dot(&x) + &self.conv_b).mapv(f64::tanh);
            conv.row_mut(j).assign(&a);
            windows.push(x);
        }
        let argmax: Vec<usize> = (0..conv.ncols())
            .map(|unit| {
                let col = conv.column(unit);
                // first maximum wins
                (0..col.len()).fold(0, |best, j| if col[j] > col[best] { j } else { best })
            })
            .collect();
        let pooled = Array1::from_iter(argmax.iter().enumerate().map(|(u, &j)| conv[[j, u]]));
        let out = (self.out_w.dot(&pooled) + &self.out_b).mapv(f64::tanh);
        EncodeCache {
            trigrams,
            windows,
            conv,
            argmax,
            pooled,
            out,
        }
    }

    fn zero_grads(&self) -> SubwordGrads {
        SubwordGrads {
            trigram_emb: HashMap::new(),
            conv_w: Array2::zeros(self.conv_w.raw_dim()),
            conv_b: Array1::zeros(self.conv_b.len()),
            out_w: Array2::zeros(self.out_w.raw_dim()),
            out_b: Array1::zeros(self.out_b.len()),
        }
    }

    fn backward(&self, cache: &EncodeCache, d_out: &Array1<f64>, grads: &mut SubwordGrads) {
        let e = self.trigram_emb.ncols();
        let d_pre_out = d_out * &cache.out.mapv(|y| 1.0 - y * y);
        add_outer(&mut grads.out_w, d_pre_out.view(), cache.pooled.view());
        grads.out_b += &d_pre_out;
        let d_pooled = self.out_w.t().dot(&d_pre_out);

        let mut d_pre_conv = Array2::<f64>::zeros(cache.conv.raw_dim());
        for (unit, &j) in cache.argmax.iter().enumerate() {
            let a = cache.conv[[j, unit]];
            d_pre_conv[[j, unit]] += d_pooled[unit] * (1.0 - a * a);
        }
        for (j, x) in cache.windows.iter().enumerate() {
            let d = d_pre_conv.row(j);
            if d.iter().all(|v| *v == 0.0) {
                continue;
            }
            add_outer(&mut grads.conv_w, d, x.view());
            grads.conv_b += &d;
            let d_x = self.conv_w.t().dot(&d);
            for k in 0..WINDOW {
                let ids = &cache.trigrams[j + k];
                if ids.is_empty() {
                    continue;
                }
                let d_pos = d_x.slice(s![k * e..(k + 1) * e]);
                for &id in ids {
                    grads
                        .trigram_emb
                        .entry(id)
                        .or_insert_with(|| Array1::zeros(e))
                        .scaled_add(1.0, &d_pos);
                }
            }
        }
    }

    fn apply(&mut self, grads: &SubwordGrads, step: f64) {
        for (&id, g) in &grads.trigram_emb {
            self.trigram_emb.row_mut(id as usize).scaled_add(-step, g);
        }
        self.conv_w.scaled_add(-step, &grads.conv_w);
        self.conv_b.scaled_add(-step, &grads.conv_b);
        self.out_w.scaled_add(-step, &grads.out_w);
        self.out_b.scaled_add(-step, &grads.out_b);
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut b = TensorBundle::new(FILE_KIND, serde_json::to_value(self.config()).expect("config serializes"));
        b.push(Tensor::from_matrix("trigram_emb", &self.trigram_emb));
        b.push(Tensor::from_matrix("conv_w", &self.conv_w));
        b.push(Tensor::from_vector("conv_b", &self.conv_b));
        b.push(Tensor::from_matrix("out_w", &self.out_w));
        b.push(Tensor::from_vector("out_b", &self.out_b));
        b.save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut b = TensorBundle::load(path)?;
        b.expect_kind(FILE_KIND)?;
        let params = Self {
            trigram_emb: b.take_matrix("trigram_emb")?,
            conv_w: b.take_matrix("conv_w")?,
            conv_b: b.take_vector("conv_b")?,
            out_w: b.take_matrix("out_w")?,
            out_b: b.take_vector("out_b")?,
        };
        params.validate()?;
        Ok(params)
    }
}

/// Encodes both sides and returns their cosine similarity.
pub fn subword_similarity<S: AsRef<str>, T: AsRef<str>>(
    params: &SubwordEncoderParams,
    a: &[S],
    b: &[T],
) -> f64 {
    crate::features::embedding::cosine(
        params.encode(a).as_slice().expect("contiguous"),
        params.encode(b).as_slice().expect("contiguous"),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubwordTrainConfig {
    pub encoder: SubwordEncoderConfig,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Smoothing factor applied to cosines before the softmax.
    pub gamma: f64,
    pub seed: u64,
}

impl Default for SubwordTrainConfig {
    fn default() -> Self {
        Self {
            encoder: SubwordEncoderConfig::default(),
            negatives: 4,
            epochs: 5,
            learning_rate: 0.05,
            batch_size: 16,
            gamma: 10.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SubwordTrainOutput {
    pub params: SubwordEncoderParams,
    /// Mean batch loss per epoch.
    pub loss_trace: Vec<f64>,
}

/// Paraphrase-pair softmax loss of one batch; gradients are accumulated into
/// `grads` when provided. `negatives[i]` lists the in-batch indices whose
/// paraphrase side serves as negatives for pair `i`.
fn batch_loss(
    params: &SubwordEncoderParams,
    pairs: &[(&[String], &[String])],
    negatives: &[Vec<usize>],
    gamma: f64,
    grads: Option<&mut SubwordGrads>,
) -> f64 {
    let left: Vec<EncodeCache> = pairs.iter().map(|(a, _)| params.forward(a)).collect();
    let right: Vec<EncodeCache> = pairs.iter().map(|(_, b)| params.forward(b)).collect();
    let out_dim = params.out_w.nrows();
    let mut d_left = vec![Array1::<f64>::zeros(out_dim); pairs.len()];
    let mut d_right = vec![Array1::<f64>::zeros(out_dim); pairs.len()];
    let scale = 1.0 / pairs.len() as f64;
    let mut loss = 0.0;
    for (i, negs) in negatives.iter().enumerate() {
        let candidates: Vec<usize> = std::iter::once(i).chain(negs.iter().copied()).collect();
        let sims: Vec<(f64, Array1<f64>, Array1<f64>)> = candidates
            .iter()
            .map(|&k| cosine_with_grad(left[i].out.view(), right[k].out.view()))
            .collect();
        let logits: Vec<f64> = sims.iter().map(|(c, _, _)| gamma * c).collect();
        let p = softmax(&logits);
        loss += -p[0].max(1e-300).ln() * scale;
        for (slot, (&k, (_, ga, gb))) in candidates.iter().zip(&sims).enumerate() {
            let target = if slot == 0 { 1.0 } else { 0.0 };
            let d_cos = gamma * (p[slot] - target) * scale;
            d_left[i].scaled_add(d_cos, ga);
            d_right[k].scaled_add(d_cos, gb);
        }
    }
    if let Some(grads) = grads {
        for (cache, d) in left.iter().zip(&d_left).chain(right.iter().zip(&d_right)) {
            params.backward(cache, d, grads);
        }
    }
    loss
}

/// Trains the encoder on `(text, paraphrase)` token pairs with mini-batch SGD.
pub fn train_subword_encoder(
    pairs: &[(Vec<String>, Vec<String>)],
    config: &SubwordTrainConfig,
) -> Result<SubwordTrainOutput> {
    if pairs.is_empty() {
        return Err(Error::Training("no paraphrase pairs".into()));
    }
    if config.batch_size == 0 || config.learning_rate <= 0.0 {
        return Err(Error::Config("batch size and learning rate must be positive".into()));
    }
    let mut params = SubwordEncoderParams::random(config.encoder, config.seed);
    let mut rng = seeded_rng(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut loss_trace = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&[String], &[String])> = chunk
                .iter()
                .map(|&i| (pairs[i].0.as_slice(), pairs[i].1.as_slice()))
                .collect();
            let n_neg = config.negatives.min(batch.len() - 1);
            let negatives: Vec<Vec<usize>> = (0..batch.len())
                .map(|i| {
                    index::sample(&mut rng, batch.len() - 1, n_neg)
                        .into_iter()
                        .map(|k| if k >= i { k + 1 } else { k })
                        .collect()
                })
                .collect();
            let mut grads = params.zero_grads();
            epoch_loss += batch_loss(&params, &batch, &negatives, config.gamma, Some(&mut grads));
            params.apply(&grads, config.learning_rate);
            batches += 1;
        }
        loss_trace.push(epoch_loss / batches as f64);
        log::debug!("sub-word encoder epoch loss {:.5}", loss_trace.last().unwrap());
    }
    Ok(SubwordTrainOutput { params, loss_trace })
}

/// Reads `text<TAB>paraphrase` lines.
pub fn load_pairs(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (a, b) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(Some(i + 1), "expected `text<TAB>paraphrase`"))?;
        out.push((a.trim().to_string(), b.trim().to_string()));
    }
    Ok(out)
}

pub fn save_pairs(pairs: &[(String, String)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for (a, b) in pairs {
        text.push_str(a);
        text.push('\t');
        text.push_str(b);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
