//! Feature extraction for candidate lists and the feature file format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::RankedResult;
use crate::features::{designed_feature_vector, DesignedResources, FeatureFamilies, FeatureSchema, FeatureVector};
use crate::index::Bm25Index;
use crate::neural::{neural_feature_vector, NeuralModels};
use crate::ranker::{rank_candidates, sort_ranked, Forest, QueryGroup};
use crate::table::{Corpus, LabeledQuery};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFeatures {
    pub table_id: String,
    pub label: bool,
    pub values: Vec<f64>,
}

/// Features of every candidate of one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryFeatures {
    pub query_id: String,
    pub query_text: String,
    pub relevant: Vec<String>,
    pub candidates: Vec<CandidateFeatures>,
}

impl QueryFeatures {
    /// Ranker training group over the selected feature columns.
    pub fn to_group(&self, columns: &[usize]) -> QueryGroup {
        QueryGroup {
            query_id: self.query_id.clone(),
            table_ids: self.candidates.iter().map(|c| c.table_id.clone()).collect(),
            features: self
                .candidates
                .iter()
                .map(|c| columns.iter().map(|&i| c.values[i]).collect())
                .collect(),
            labels: self.candidates.iter().map(|c| c.label).collect(),
        }
    }

    /// Candidates ordered by one feature column (ties by table id).
    pub fn rank_by_column(&self, column: usize) -> RankedResult {
        let mut list: Vec<(String, f64)> = self
            .candidates
            .iter()
            .map(|c| (c.table_id.clone(), c.values[column]))
            .collect();
        sort_ranked(&mut list);
        self.result(list)
    }

    /// Candidates ordered by the forest applied to the selected columns.
    pub fn rank_with(&self, forest: &Forest, columns: &[usize]) -> Result<RankedResult> {
        let cands: Vec<(String, FeatureVector)> = self
            .candidates
            .iter()
            .map(|c| {
                (
                    c.table_id.clone(),
                    FeatureVector {
                        values: columns.iter().map(|&i| c.values[i]).collect(),
                    },
                )
            })
            .collect();
        Ok(self.result(rank_candidates(forest, &cands)?))
    }

    fn result(&self, candidates: Vec<(String, f64)>) -> RankedResult {
        RankedResult {
            query_id: self.query_id.clone(),
            candidates,
            relevant: self.relevant.clone(),
        }
    }
}

/// Computes feature vectors from whichever resources are present.
pub struct Featurizer<'a> {
    pub corpus: &'a Corpus,
    pub index: &'a Bm25Index,
    pub designed: Option<&'a DesignedResources>,
    pub neural: Option<&'a NeuralModels>,
}

impl Featurizer<'_> {
    pub fn families(&self) -> FeatureFamilies {
        FeatureFamilies {
            designed: self.designed.is_some(),
            neural: self.neural.is_some(),
        }
    }

    pub fn schema(&self) -> FeatureSchema {
        FeatureSchema::build(self.families(), crate::table::AspectSet::all())
    }

    /// Features of the given `(table_id, bm25 score)` candidates.
    pub fn featurize(&self, query: &LabeledQuery, candidates: &[(String, f64)]) -> Result<QueryFeatures> {
        let tokens = &query.query.tokens;
        let out = candidates
            .iter()
            .map(|(id, bm25)| {
                let table = self
                    .corpus
                    .get(id)
                    .ok_or_else(|| Error::UnknownTable(id.clone()))?;
                let mut values = vec![*bm25];
                if let Some(res) = self.designed {
                    values.extend(designed_feature_vector(tokens, table, res)?);
                }
                if let Some(models) = self.neural {
                    values.extend(neural_feature_vector(tokens, table, models)?);
                }
                Ok(CandidateFeatures {
                    table_id: id.clone(),
                    label: query.relevant.contains(id),
                    values,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(QueryFeatures {
            query_id: query.query.id.clone(),
            query_text: query.query.text.clone(),
            relevant: query.relevant.clone(),
            candidates: out,
        })
    }

    /// Retrieves the top `k` candidates of every query and featurizes them;
    /// queries are processed in parallel, output order follows `queries`.
    pub fn featurize_all(&self, queries: &[LabeledQuery], k: usize) -> Result<Vec<QueryFeatures>> {
        queries
            .par_iter()
            .map(|q| self.featurize(q, &self.index.retrieve_topk(&q.query, k)))
            .collect()
    }
}

/// Header line of a feature file.
#[derive(Debug, Serialize, Deserialize)]
struct FeatureHeader {
    format: String,
    schema: Vec<String>,
}

const FEATURE_FORMAT: &str = "tabret-features-v1";

/// A schema plus per-query feature records, stored as JSON lines.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub schema: FeatureSchema,
    pub queries: Vec<QueryFeatures>,
}

impl FeatureFile {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let header = FeatureHeader {
            format: FEATURE_FORMAT.into(),
            schema: self.schema.names.clone(),
        };
        let mut write_line = |v: String| writeln!(w, "{v}").map_err(|e| Error::io(path, e));
        write_line(serde_json::to_string(&header).expect("serializable"))?;
        for q in &self.queries {
            write_line(serde_json::to_string(q).expect("serializable"))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let (_, first) = lines.next().ok_or_else(|| Error::parse(Some(1), "empty feature file"))?;
        let first = first.map_err(|e| Error::io(path, e))?;
        let header: FeatureHeader =
            serde_json::from_str(&first).map_err(|e| Error::parse(Some(1), format!("feature header: {e}")))?;
        if header.format != FEATURE_FORMAT {
            return Err(Error::Format(format!("expected {FEATURE_FORMAT}, found {}", header.format)));
        }
        let schema = FeatureSchema { names: header.schema };
        let mut queries = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let q: QueryFeatures = serde_json::from_str(&line).map_err(|e| Error::parse(Some(i + 1), e.to_string()))?;
            if q.candidates.iter().any(|c| c.values.len() != schema.len()) {
                return Err(Error::parse(Some(i + 1), "feature count does not match the schema"));
            }
            queries.push(q);
        }
        Ok(Self { schema, queries })
    }
}
