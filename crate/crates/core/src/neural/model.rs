use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{s, Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::attention::AttentionParams;
use super::gru::GruParams;
use crate::error::{Error, Result};
use crate::features::EmbeddingTable;
use crate::math::{add_outer, concat, seeded_rng, softmax, uniform_matrix};
use crate::table::Table;
use crate::tensorfile::{Tensor, TensorBundle};
use crate::text::tokenize;

const FILE_KIND: &str = "aspect-model";
pub const UNK: &str = "<unk>";

/// The five table views matched by a neural model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AspectKind {
    Header,
    Cell,
    Row,
    Column,
    Caption,
}

impl AspectKind {
    pub const ALL: [AspectKind; 5] = [
        AspectKind::Header,
        AspectKind::Cell,
        AspectKind::Row,
        AspectKind::Column,
        AspectKind::Caption,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AspectKind::Header => "header",
            AspectKind::Cell => "cell",
            AspectKind::Row => "row",
            AspectKind::Column => "column",
            AspectKind::Caption => "caption",
        }
    }

    pub fn uses_memory(self) -> bool {
        self != AspectKind::Caption
    }
}

impl fmt::Display for AspectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AspectKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AspectKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown neural aspect `{s}`")))
    }
}

/// Word-to-row mapping; row 0 is the shared unknown-word row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut list: Vec<String> = words.into_iter().map(Into::into).filter(|w| w != UNK).collect();
        list.sort();
        list.dedup();
        list.insert(0, UNK.to_string());
        let ids = list.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        Self { words: list, ids }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.len() <= 1
    }

    pub fn id(&self, word: &str) -> u32 {
        self.ids.get(word).copied().unwrap_or(0)
    }

    pub fn ids<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// A memory vector as a weighted sum of embedding rows.
pub(crate) type Combo = Vec<(u32, f64)>;

fn phrase_combo(vocab: &Vocabulary, tokens: &[String]) -> Combo {
    let n = tokens.len() as f64;
    tokens.iter().map(|t| (vocab.id(t), 1.0 / n)).collect()
}

fn scaled(combos: &[&Combo], weight: f64) -> Combo {
    combos
        .iter()
        .flat_map(|c| c.iter().map(move |&(id, x)| (id, x * weight)))
        .collect()
}

/// Memory layouts of a table: header, cell, row and column vectors.
struct MemoryLayout {
    headers: Vec<Combo>,
    cells: Vec<Combo>,
    rows: Vec<Combo>,
    columns: Vec<Combo>,
}

impl MemoryLayout {
    fn new(table: &Table, vocab: &Vocabulary) -> Self {
        let headers = table.headers.iter().map(|h| phrase_combo(vocab, &tokenize(h))).collect();
        let grid: Vec<Vec<Combo>> = table
            .cells
            .iter()
            .map(|row| row.iter().map(|c| phrase_combo(vocab, &tokenize(c))).collect())
            .collect();
        let n_rows = grid.len();
        let n_cols = table.headers.len();
        let rows = grid
            .iter()
            .map(|row| scaled(&row.iter().collect::<Vec<_>>(), 1.0 / n_cols as f64))
            .collect();
        let columns = (0..n_cols)
            .map(|c| scaled(&grid.iter().map(|row| &row[c]).collect::<Vec<_>>(), 1.0 / n_rows as f64))
            .collect();
        let cells = grid.into_iter().flatten().collect();
        Self {
            headers,
            cells,
            rows,
            columns,
        }
    }

    fn take(self, kind: AspectKind) -> Vec<Combo> {
        match kind {
            AspectKind::Header => self.headers,
            AspectKind::Cell => self.cells,
            AspectKind::Row => self.rows,
            AspectKind::Column => self.columns,
            AspectKind::Caption => Vec::new(),
        }
    }
}

fn materialize(combos: &[Combo], emb: &Array2<f64>) -> Vec<Array1<f64>> {
    combos
        .iter()
        .map(|combo| {
            let mut v = Array1::zeros(emb.ncols());
            for &(id, x) in combo {
                v.scaled_add(x, &emb.row(id as usize));
            }
            v
        })
        .collect()
}

/// Header, cell, row and column memories of a table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableMemories {
    pub headers: Vec<Array1<f64>>,
    pub cells: Vec<Array1<f64>>,
    pub rows: Vec<Array1<f64>>,
    pub columns: Vec<Array1<f64>>,
}

impl TableMemories {
    pub fn get(&self, kind: AspectKind) -> &[Array1<f64>] {
        match kind {
            AspectKind::Header => &self.headers,
            AspectKind::Cell => &self.cells,
            AspectKind::Row => &self.rows,
            AspectKind::Column => &self.columns,
            AspectKind::Caption => &[],
        }
    }
}

/// Embeds every header and cell as the mean of its word vectors (empty text
/// gives the zero vector); rows and columns are uniform means of their cells.
pub fn build_memories(table: &Table, vocab: &Vocabulary, embeddings: &Array2<f64>) -> TableMemories {
    let layout = MemoryLayout::new(table, vocab);
    TableMemories {
        headers: materialize(&layout.headers, embeddings),
        cells: materialize(&layout.cells, embeddings),
        rows: materialize(&layout.rows, embeddings),
        columns: materialize(&layout.columns, embeddings),
    }
}

/// Aspect-specific part of the network.
#[derive(Debug, Clone, PartialEq)]
pub enum HeadParams {
    /// Attention read over a memory.
    Attention(AttentionParams),
    /// Bi-directional GRU over the caption.
    Caption { fwd: GruParams, bwd: GruParams },
}

/// Every trainable tensor of an aspect model; also used as its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct AspectParams {
    pub emb: Array2<f64>,
    pub query_fwd: GruParams,
    pub query_bwd: GruParams,
    pub head: HeadParams,
    pub out_w: Array2<f64>,
    pub out_b: Array1<f64>,
}

impl AspectParams {
    pub fn zeros_like(other: &AspectParams) -> Self {
        let gz = |g: &GruParams| GruParams::zeros(g.input_dim(), g.hidden_dim());
        Self {
            emb: Array2::zeros(other.emb.raw_dim()),
            query_fwd: gz(&other.query_fwd),
            query_bwd: gz(&other.query_bwd),
            head: match &other.head {
                HeadParams::Attention(a) => HeadParams::Attention(AttentionParams {
                    w: Array1::zeros(a.w.len()),
                    b: Array1::zeros(1),
                }),
                HeadParams::Caption { fwd, bwd } => HeadParams::Caption {
                    fwd: gz(fwd),
                    bwd: gz(bwd),
                },
            },
            out_w: Array2::zeros(other.out_w.raw_dim()),
            out_b: Array1::zeros(other.out_b.len()),
        }
    }

    pub fn embed_dim(&self) -> usize {
        self.emb.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.query_fwd.hidden_dim()
    }

    /// Named flat views of every tensor, in a fixed order.
    pub fn named_tensors(&self) -> Vec<(String, &[f64])> {
        let mut out = vec![("emb".to_string(), self.emb.as_slice().unwrap())];
        out.extend(self.query_fwd.named_tensors("query_fwd"));
        out.extend(self.query_bwd.named_tensors("query_bwd"));
        match &self.head {
            HeadParams::Attention(a) => {
                out.push(("attention.w".into(), a.w.as_slice().unwrap()));
                out.push(("attention.b".into(), a.b.as_slice().unwrap()));
            }
            HeadParams::Caption { fwd, bwd } => {
                out.extend(fwd.named_tensors("caption_fwd"));
                out.extend(bwd.named_tensors("caption_bwd"));
            }
        }
        out.push(("out.w".into(), self.out_w.as_slice().unwrap()));
        out.push(("out.b".into(), self.out_b.as_slice().unwrap()));
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = vec![("emb".to_string(), self.emb.as_slice_mut().unwrap())];
        out.extend(self.query_fwd.named_tensors_mut("query_fwd"));
        out.extend(self.query_bwd.named_tensors_mut("query_bwd"));
        match &mut self.head {
            HeadParams::Attention(a) => {
                out.push(("attention.w".into(), a.w.as_slice_mut().unwrap()));
                out.push(("attention.b".into(), a.b.as_slice_mut().unwrap()));
            }
            HeadParams::Caption { fwd, bwd } => {
                out.extend(fwd.named_tensors_mut("caption_fwd"));
                out.extend(bwd.named_tensors_mut("caption_bwd"));
            }
        }
        out.push(("out.w".into(), self.out_w.as_slice_mut().unwrap()));
        out.push(("out.b".into(), self.out_b.as_slice_mut().unwrap()));
        out
    }

    /// `self -= step * grads`.
    pub fn sgd_update(&mut self, grads: &AspectParams, step: f64) {
        let g = grads.named_tensors();
        for ((name, p), (gname, gv)) in self.named_tensors_mut().into_iter().zip(g) {
            debug_assert_eq!(name, gname);
            p.iter_mut().zip(gv).for_each(|(x, d)| *x -= step * d);
        }
    }
}

/// Sizes and initialization of a fresh model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelShape {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub init_scale: f64,
}

impl Default for ModelShape {
    fn default() -> Self {
        Self {
            embed_dim: 64,
            hidden_dim: 64,
            init_scale: 0.08,
        }
    }
}

/// Neural matcher for one table aspect.
#[derive(Debug, Clone, PartialEq)]
pub struct AspectModel {
    pub kind: AspectKind,
    pub vocab: Vocabulary,
    pub params: AspectParams,
}

/// Inputs of one (query, table) pair mapped to embedding rows.
#[derive(Debug, Clone)]
pub(crate) struct Prepared {
    pub(crate) query_ids: Vec<u32>,
    pub(crate) memory: Vec<Combo>,
    pub(crate) caption_ids: Vec<u32>,
    pub(crate) label: bool,
}

struct BiRun<'a> {
    inputs: Vec<ArrayView1<'a, f64>>,
    rev_inputs: Vec<ArrayView1<'a, f64>>,
    fwd: Vec<super::gru::StepCache>,
    bwd: Vec<super::gru::StepCache>,
    vector: Array1<f64>,
}

fn bi_run<'a>(fwd: &GruParams, bwd: &GruParams, emb: &'a Array2<f64>, ids: &[u32]) -> BiRun<'a> {
    let inputs: Vec<ArrayView1<f64>> = ids.iter().map(|&id| emb.row(id as usize)).collect();
    let rev_inputs: Vec<ArrayView1<f64>> = inputs.iter().rev().copied().collect();
    let f = fwd.run(&inputs);
    let b = bwd.run(&rev_inputs);
    let vector = concat(&[f.last().unwrap().h.view(), b.last().unwrap().h.view()]);
    BiRun {
        inputs,
        rev_inputs,
        fwd: f,
        bwd: b,
        vector,
    }
}

fn bi_backward(
    fwd: &GruParams,
    bwd: &GruParams,
    run: &BiRun<'_>,
    ids: &[u32],
    d_vector: ArrayView1<f64>,
    g_fwd: &mut GruParams,
    g_bwd: &mut GruParams,
    g_emb: &mut Array2<f64>,
) {
    let h = fwd.hidden_dim();
    let d_f = fwd.run_backward(&run.inputs, &run.fwd, d_vector.slice(s![..h]).to_owned(), g_fwd);
    let d_b = bwd.run_backward(&run.rev_inputs, &run.bwd, d_vector.slice(s![h..]).to_owned(), g_bwd);
    let n = ids.len();
    for t in 0..n {
        g_emb.row_mut(ids[t] as usize).scaled_add(1.0, &d_f[t]);
        g_emb.row_mut(ids[n - 1 - t] as usize).scaled_add(1.0, &d_b[t]);
    }
}

impl AspectModel {
    /// Fresh model with uniform weights, zero biases and, where available,
    /// embedding rows copied from `pretrained`.
    pub fn new_random(
        kind: AspectKind,
        vocab: Vocabulary,
        shape: ModelShape,
        seed: u64,
        pretrained: Option<&EmbeddingTable>,
    ) -> Result<Self> {
        let ModelShape {
            embed_dim: d,
            hidden_dim: h,
            init_scale,
        } = shape;
        if d == 0 || h == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        let mut rng = seeded_rng(seed);
        let mut emb = uniform_matrix(&mut rng, vocab.len(), d, init_scale);
        if let Some(pre) = pretrained {
            if pre.dim() != d {
                return Err(Error::Shape(format!(
                    "pretrained vectors have dimension {}, model uses {d}",
                    pre.dim()
                )));
            }
            for (i, w) in vocab.words().iter().enumerate() {
                if let Some(v) = pre.get(w) {
                    emb.row_mut(i).assign(&ArrayView1::from(v));
                }
            }
        }
        let query_fwd = GruParams::random(&mut rng, d, h, init_scale);
        let query_bwd = GruParams::random(&mut rng, d, h, init_scale);
        let (head, out_in) = if kind.uses_memory() {
            let mut a = AttentionParams::zeros(d, 2 * h);
            a.w = crate::math::uniform_vector(&mut rng, d + 2 * h, init_scale);
            (HeadParams::Attention(a), 2 * h + d)
        } else {
            let fwd = GruParams::random(&mut rng, d, h, init_scale);
            let bwd = GruParams::random(&mut rng, d, h, init_scale);
            (HeadParams::Caption { fwd, bwd }, 4 * h)
        };
        let out_w = uniform_matrix(&mut rng, 2, out_in, init_scale);
        Ok(Self {
            kind,
            vocab,
            params: AspectParams {
                emb,
                query_fwd,
                query_bwd,
                head,
                out_w,
                out_b: Array1::zeros(2),
            },
        })
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        let (d, h) = (p.embed_dim(), p.hidden_dim());
        p.query_fwd.validate()?;
        p.query_bwd.validate()?;
        let head_in = match (&p.head, self.kind.uses_memory()) {
            (HeadParams::Attention(a), true) => {
                if a.w.len() != d + 2 * h || a.b.len() != 1 {
                    return Err(Error::Shape("attention weight width".into()));
                }
                2 * h + d
            }
            (HeadParams::Caption { fwd, bwd }, false) => {
                fwd.validate()?;
                bwd.validate()?;
                4 * h
            }
            _ => return Err(Error::Shape(format!("head does not match aspect {}", self.kind))),
        };
        if p.emb.nrows() != self.vocab.len()
            || p.query_fwd.input_dim() != d
            || p.out_w.dim() != (2, head_in)
            || p.out_b.len() != 2
        {
            return Err(Error::Shape("aspect model tensors are inconsistent".into()));
        }
        Ok(())
    }

    /// Memories of a table under this model's embeddings.
    pub fn memories(&self, table: &Table) -> TableMemories {
        build_memories(table, &self.vocab, &self.params.emb)
    }

    /// `[→h_n; ←h_n]` of the query.
    pub fn encode_query<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Array1<f64>> {
        if tokens.is_empty() {
            return Err(Error::Config("cannot encode an empty query".into()));
        }
        let ids = self.vocab.ids(tokens);
        let p = &self.params;
        Ok(bi_run(&p.query_fwd, &p.query_bwd, &p.emb, &ids).vector)
    }

    fn output_probs(&self, x: &Array1<f64>) -> Vec<f64> {
        let logits = self.params.out_w.dot(x) + &self.params.out_b;
        softmax(logits.as_slice().unwrap())
    }

    /// Relevance of a memory: attention read, `[v_q; read]`, linear, softmax,
    /// first component. An empty memory scores 0.
    pub fn nn1_score(&self, memory: &[Array1<f64>], v_q: &Array1<f64>) -> Result<f64> {
        let HeadParams::Attention(att) = &self.params.head else {
            return Err(Error::Config(format!("{} model has no attention head", self.kind)));
        };
        if memory.is_empty() {
            return Ok(0.0);
        }
        let (_, read) = super::attention::attention_read(memory, v_q, att)?;
        Ok(self.output_probs(&concat(&[v_q.view(), read.view()]))[0])
    }

    /// Relevance of a caption through its own bi-directional encoder; an
    /// empty caption scores 0.
    pub fn nn2_caption_score<S: AsRef<str>, T: AsRef<str>>(
        &self,
        caption_tokens: &[S],
        query_tokens: &[T],
    ) -> Result<f64> {
        let HeadParams::Caption { fwd, bwd } = &self.params.head else {
            return Err(Error::Config(format!("{} model has no caption encoder", self.kind)));
        };
        if caption_tokens.is_empty() || query_tokens.is_empty() {
            return Ok(0.0);
        }
        let v_q = self.encode_query(query_tokens)?;
        let ids = self.vocab.ids(caption_tokens);
        let v_cap = bi_run(fwd, bwd, &self.params.emb, &ids).vector;
        Ok(self.output_probs(&concat(&[v_q.view(), v_cap.view()]))[0])
    }

    /// Score of this model's aspect for a (query, table) pair.
    pub fn score<S: AsRef<str>>(&self, query_tokens: &[S], table: &Table) -> Result<f64> {
        if query_tokens.is_empty() {
            return Ok(0.0);
        }
        match self.kind {
            AspectKind::Caption => {
                let cap = table.caption.as_deref().map(tokenize).unwrap_or_default();
                self.nn2_caption_score(&cap, query_tokens)
            }
            kind => {
                let memory = materialize(&MemoryLayout::new(table, &self.vocab).take(kind), &self.params.emb);
                let v_q = self.encode_query(query_tokens)?;
                self.nn1_score(&memory, &v_q)
            }
        }
    }

    /// Maps a pair to embedding rows; `None` when the aspect is empty and the
    /// pair therefore carries no training signal.
    pub(crate) fn prepare<S: AsRef<str>>(&self, query_tokens: &[S], table: &Table, label: bool) -> Option<Prepared> {
        if query_tokens.is_empty() {
            return None;
        }
        let query_ids = self.vocab.ids(query_tokens);
        let (memory, caption_ids) = match self.kind {
            AspectKind::Caption => {
                let cap = table.caption.as_deref().map(tokenize).unwrap_or_default();
                if cap.is_empty() {
                    return None;
                }
                (Vec::new(), self.vocab.ids(&cap))
            }
            kind => {
                let m = MemoryLayout::new(table, &self.vocab).take(kind);
                if m.is_empty() {
                    return None;
                }
                (m, Vec::new())
            }
        };
        Some(Prepared {
            query_ids,
            memory,
            caption_ids,
            label,
        })
    }

    /// Mean two-class cross-entropy over `examples` (label 1 targets the first
    /// output); accumulates parameter gradients into `grads` when given.
    pub(crate) fn loss(&self, examples: &[Prepared], mut grads: Option<&mut AspectParams>) -> f64 {
        if examples.is_empty() {
            return 0.0;
        }
        let p = &self.params;
        let h = p.hidden_dim();
        let scale = 1.0 / examples.len() as f64;
        let mut total = 0.0;
        for ex in examples {
            let q = bi_run(&p.query_fwd, &p.query_bwd, &p.emb, &ex.query_ids);
            enum HeadRun<'a> {
                Memory(Vec<Array1<f64>>, super::attention::AttentionCache),
                Caption(BiRun<'a>),
            }
            let (head_run, head_vec) = match &p.head {
                HeadParams::Attention(att) => {
                    let mem = materialize(&ex.memory, &p.emb);
                    let cache = att.forward(&mem, &q.vector);
                    let read = cache.read.clone();
                    (HeadRun::Memory(mem, cache), read)
                }
                HeadParams::Caption { fwd, bwd } => {
                    let run = bi_run(fwd, bwd, &p.emb, &ex.caption_ids);
                    let v = run.vector.clone();
                    (HeadRun::Caption(run), v)
                }
            };
            let x = concat(&[q.vector.view(), head_vec.view()]);
            let probs = self.output_probs(&x);
            let target = if ex.label { 0 } else { 1 };
            total += -probs[target].max(1e-300).ln() * scale;

            let Some(g) = grads.as_deref_mut() else {
                continue;
            };
            let mut d_logits = Array1::from(probs);
            d_logits[target] -= 1.0;
            d_logits *= scale;
            add_outer(&mut g.out_w, d_logits.view(), x.view());
            g.out_b += &d_logits;
            let d_x = p.out_w.t().dot(&d_logits);
            let mut d_vq = d_x.slice(s![..2 * h]).to_owned();
            let d_head = d_x.slice(s![2 * h..]);
            match (head_run, &p.head, &mut g.head) {
                (HeadRun::Memory(mem, cache), HeadParams::Attention(att), HeadParams::Attention(g_att)) => {
                    let (d_mem, d_vq_att) = att.backward(&mem, &q.vector, &cache, d_head, g_att);
                    d_vq += &d_vq_att;
                    for (combo, d_m) in ex.memory.iter().zip(&d_mem) {
                        for &(id, c) in combo {
                            g.emb.row_mut(id as usize).scaled_add(c, d_m);
                        }
                    }
                }
                (
                    HeadRun::Caption(run),
                    HeadParams::Caption { fwd, bwd },
                    HeadParams::Caption { fwd: gf, bwd: gb },
                ) => {
                    bi_backward(fwd, bwd, &run, &ex.caption_ids, d_head, gf, gb, &mut g.emb);
                }
                _ => unreachable!("gradient head mirrors parameter head"),
            }
            bi_backward(
                &p.query_fwd,
                &p.query_bwd,
                &q,
                &ex.query_ids,
                d_vq.view(),
                &mut g.query_fwd,
                &mut g.query_bwd,
                &mut g.emb,
            );
        }
        total
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let meta = serde_json::json!({
            "kind": self.kind,
            "embed_dim": self.params.embed_dim(),
            "hidden_dim": self.params.hidden_dim(),
            "words": self.vocab.words(),
        });
        let mut b = TensorBundle::new(FILE_KIND, meta);
        let shapes = tensor_shapes(&self.params);
        for ((name, data), shape) in self.params.named_tensors().into_iter().zip(shapes) {
            b.push(Tensor {
                name,
                shape,
                data: data.to_vec(),
            });
        }
        b.save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bundle = TensorBundle::load(path)?;
        bundle.expect_kind(FILE_KIND)?;
        #[derive(Deserialize)]
        struct Meta {
            kind: AspectKind,
            embed_dim: usize,
            hidden_dim: usize,
            words: Vec<String>,
        }
        let meta: Meta = serde_json::from_value(bundle.meta.clone())
            .map_err(|e| Error::Format(format!("model manifest: {e}")))?;
        let vocab = Vocabulary::new(meta.words);
        let shape = ModelShape {
            embed_dim: meta.embed_dim,
            hidden_dim: meta.hidden_dim,
            init_scale: 0.0,
        };
        let mut model = AspectModel::new_random(meta.kind, vocab, shape, 0, None)?;
        let by_name: HashMap<&str, &Tensor> = bundle.tensors.iter().map(|t| (t.name.as_str(), t)).collect();
        let expected = tensor_shapes(&model.params);
        for ((name, slot), shape) in model.params.named_tensors_mut().into_iter().zip(expected) {
            let t = by_name
                .get(name.as_str())
                .ok_or_else(|| Error::Format(format!("tensor `{name}` missing")))?;
            if t.shape != shape {
                return Err(Error::Shape(format!("`{name}` has shape {:?}, expected {shape:?}", t.shape)));
            }
            slot.copy_from_slice(&t.data);
        }
        model.validate()?;
        Ok(model)
    }
}

fn tensor_shapes(p: &AspectParams) -> Vec<Vec<usize>> {
    let (d, h) = (p.embed_dim(), p.hidden_dim());
    let gru = |input: usize| {
        vec![
            vec![h, input],
            vec![h, h],
            vec![h],
            vec![h, input],
            vec![h, h],
            vec![h],
            vec![h, input],
            vec![h, h],
            vec![h],
        ]
    };
    let mut shapes = vec![vec![p.emb.nrows(), d]];
    shapes.extend(gru(d));
    shapes.extend(gru(d));
    match &p.head {
        HeadParams::Attention(a) => {
            shapes.push(vec![a.w.len()]);
            shapes.push(vec![1]);
        }
        HeadParams::Caption { .. } => {
            shapes.extend(gru(d));
            shapes.extend(gru(d));
        }
    }
    shapes.push(vec![2, p.out_w.ncols()]);
    shapes.push(vec![2]);
    shapes
}

/// The five aspect models used together as neural features.
#[derive(Debug, Clone)]
pub struct NeuralModels {
    models: Vec<AspectModel>,
}

impl NeuralModels {
    pub fn new(models: Vec<AspectModel>) -> Result<Self> {
        let mut ordered = Vec::with_capacity(5);
        for kind in AspectKind::ALL {
            let mut it = models.iter().filter(|m| m.kind == kind);
            let m = it
                .next()
                .ok_or_else(|| Error::Config(format!("missing {kind} model")))?;
            if it.next().is_some() {
                return Err(Error::Config(format!("duplicate {kind} model")));
            }
            ordered.push(m.clone());
        }
        Ok(Self { models: ordered })
    }

    pub fn get(&self, kind: AspectKind) -> &AspectModel {
        &self.models[AspectKind::ALL.iter().position(|k| *k == kind).unwrap()]
    }

    pub fn iter(&self) -> impl Iterator<Item = &AspectModel> {
        self.models.iter()
    }
}

/// The five neural scores in the order header, cell, row, column, caption.
pub fn neural_feature_vector<S: AsRef<str>>(
    query_tokens: &[S],
    table: &Table,
    models: &NeuralModels,
) -> Result<[f64; 5]> {
    let mut out = [0.0; 5];
    for (slot, model) in out.iter_mut().zip(models.iter()) {
        *slot = model.score(query_tokens, table)?;
    }
    Ok(out)
}
