//! Designed query-table matching features and the feature-vector schema.
//!
//! Every designed feature is applied to each table aspect separately:
//! word overlap normalized toward the table (`wmt`) and toward the query
//! (`wmq`), the phrase-table paraphrase score (`pp`), the sub-word encoder
//! cosine (`s1`) and the averaged word-vector cosine (`s2`).

pub mod embedding;
pub mod overlap;
pub mod phrase;
pub mod subword;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{aspect_text, Aspect, AspectSet, Table};
use crate::text::CorpusStats;

pub use embedding::{avg_embedding_similarity, cosine, EmbeddingTable};
pub use overlap::{word_overlap, Direction};
pub use phrase::{f_pp, PhraseTable, DEFAULT_MAX_ORDER};
pub use subword::{
    load_pairs, save_pairs, subword_similarity, train_subword_encoder, SubwordEncoderConfig, SubwordEncoderParams,
    SubwordTrainConfig, SubwordTrainOutput,
};

/// Designed features in their per-aspect order.
pub const DESIGNED_FEATURES: [&str; 5] = ["wmt", "wmq", "pp", "s1", "s2"];
pub const NUM_DESIGNED: usize = 3 * DESIGNED_FEATURES.len();

/// Neural relevance scores in their fixed order.
pub const NEURAL_FEATURES: [&str; 5] = ["header", "cell", "row", "column", "caption"];

pub const BM25_FEATURE: &str = "bm25";

/// Which feature families feed the ranker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureFamilies {
    pub designed: bool,
    pub neural: bool,
}

impl FeatureFamilies {
    pub fn label(&self) -> &'static str {
        match (self.designed, self.neural) {
            (true, true) => "Feature + NeuralNet",
            (true, false) => "Feature",
            (false, true) => "NeuralNet",
            (false, false) => "BM25",
        }
    }
}

impl std::str::FromStr for FeatureFamilies {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut f = FeatureFamilies {
            designed: false,
            neural: false,
        };
        for part in s.split([',', '+']).map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_lowercase().as_str() {
                "designed" | "feature" | "features" => f.designed = true,
                "neural" | "nn" | "neuralnet" => f.neural = true,
                other => return Err(Error::Config(format!("unknown feature family `{other}`"))),
            }
        }
        Ok(f)
    }
}

/// Aspect a neural score belongs to.
pub fn neural_feature_aspect(name: &str) -> Aspect {
    match name {
        "header" => Aspect::Headers,
        "caption" => Aspect::Caption,
        _ => Aspect::Cells,
    }
}

/// Ordered feature names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub names: Vec<String>,
}

impl FeatureSchema {
    /// `bm25`, then designed scores `(headers: wmt,wmq,pp,s1,s2), (cells: ..),
    /// (caption: ..)`, then `nn.header, nn.cell, nn.row, nn.column, nn.caption`,
    /// keeping only enabled families and aspects.
    pub fn build(families: FeatureFamilies, aspects: AspectSet) -> Self {
        let mut names = vec![BM25_FEATURE.to_string()];
        if families.designed {
            for a in aspects.iter() {
                names.extend(DESIGNED_FEATURES.iter().map(|f| format!("{}.{f}", a.name())));
            }
        }
        if families.neural {
            names.extend(
                NEURAL_FEATURES
                    .iter()
                    .filter(|n| aspects.contains(neural_feature_aspect(n)))
                    .map(|n| format!("nn.{n}")),
            );
        }
        Self { names }
    }

    /// The widest schema: every family and every aspect.
    pub fn full() -> Self {
        Self::build(
            FeatureFamilies {
                designed: true,
                neural: true,
            },
            AspectSet::all(),
        )
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Column indices of `self` inside `wider`.
    pub fn projection_from(&self, wider: &FeatureSchema) -> Result<Vec<usize>> {
        self.names
            .iter()
            .map(|n| {
                wider
                    .position(n)
                    .ok_or_else(|| Error::Config(format!("feature `{n}` not available")))
            })
            .collect()
    }
}

/// Feature values laid out according to a [`FeatureSchema`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn project(&self, columns: &[usize]) -> FeatureVector {
        FeatureVector {
            values: columns.iter().map(|&c| self.values[c]).collect(),
        }
    }
}

/// Resources needed to compute the designed features.
#[derive(Debug, Clone, Default)]
pub struct DesignedResources {
    pub stats: Option<CorpusStats>,
    pub phrases: Option<PhraseTable>,
    pub embeddings: Option<EmbeddingTable>,
    pub encoder: Option<SubwordEncoderParams>,
    pub max_order: usize,
}

impl DesignedResources {
    fn require(&self) -> Result<(&CorpusStats, &PhraseTable, &EmbeddingTable, &SubwordEncoderParams)> {
        Ok((
            self.stats.as_ref().ok_or_else(|| missing("corpus statistics"))?,
            self.phrases.as_ref().ok_or_else(|| missing("phrase table"))?,
            self.embeddings.as_ref().ok_or_else(|| missing("embedding table"))?,
            self.encoder.as_ref().ok_or_else(|| missing("sub-word encoder"))?,
        ))
    }
}

fn missing(what: &str) -> Error {
    Error::Config(format!("missing resource: {what}"))
}

/// The five designed scores of one aspect; all zero for an empty aspect.
pub fn aspect_features<S: AsRef<str>, T: AsRef<str>>(
    aspect_tokens: &[S],
    query_tokens: &[T],
    resources: &DesignedResources,
) -> Result<[f64; 5]> {
    let (stats, phrases, emb, encoder) = resources.require()?;
    if aspect_tokens.is_empty() || query_tokens.is_empty() {
        return Ok([0.0; 5]);
    }
    let order = if resources.max_order == 0 {
        DEFAULT_MAX_ORDER
    } else {
        resources.max_order
    };
    Ok([
        word_overlap(aspect_tokens, query_tokens, stats, Direction::TowardTable),
        word_overlap(aspect_tokens, query_tokens, stats, Direction::TowardQuery),
        f_pp(aspect_tokens, query_tokens, phrases, order),
        subword_similarity(encoder, aspect_tokens, query_tokens),
        avg_embedding_similarity(aspect_tokens, query_tokens, emb),
    ])
}

/// All 15 designed scores in the order headers, cells, caption.
pub fn designed_feature_vector<S: AsRef<str>>(
    query_tokens: &[S],
    table: &Table,
    resources: &DesignedResources,
) -> Result<[f64; NUM_DESIGNED]> {
    let mut out = [0.0; NUM_DESIGNED];
    for (i, aspect) in Aspect::ALL.into_iter().enumerate() {
        let tokens = aspect_text(table, aspect);
        let f = aspect_features(&tokens, query_tokens, resources)?;
        out[i * 5..(i + 1) * 5].copy_from_slice(&f);
    }
    Ok(out)
}
