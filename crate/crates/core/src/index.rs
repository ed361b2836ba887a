//! BM25 inverted index for first-stage candidate retrieval.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{document_tokens, AspectSet, Corpus, Query};
use crate::text::{build_stats, CorpusStats};

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;
pub const DEFAULT_TOPK: usize = 50;

const INDEX_FORMAT: &str = "tabret-bm25";
const INDEX_VERSION: u32 = 1;

/// Okapi BM25 hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self {
            k1: DEFAULT_K1,
            b: DEFAULT_B,
        }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 >= 0.0) || !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Config(format!(
                "BM25 requires k1 >= 0 and 0 <= b <= 1 (got k1={}, b={})",
                self.k1, self.b
            )));
        }
        Ok(())
    }
}

/// One posting: internal document number and term frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Inverted index over table documents.
///
/// Documents are numbered in ascending table-id order, so every postings list
/// is sorted by table id. IDF and the average length are frozen at build time.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    table_ids: Vec<String>,
    doc_of: HashMap<String, u32>,
    postings: HashMap<String, Vec<Posting>>,
    doc_len: Vec<u32>,
    stats: CorpusStats,
    params: Bm25Params,
}

impl Bm25Index {
    pub fn build(corpus: &Corpus, aspects: AspectSet, params: Bm25Params) -> Result<Self> {
        params.validate()?;
        let stats = build_stats(corpus, aspects)?;
        let mut tables: Vec<_> = corpus.iter().collect();
        tables.sort_by(|a, b| a.id.cmp(&b.id));

        let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
        let mut doc_len = Vec::with_capacity(tables.len());
        let mut table_ids = Vec::with_capacity(tables.len());
        for (doc, table) in tables.iter().enumerate() {
            let tokens = document_tokens(table, aspects);
            doc_len.push(tokens.len() as u32);
            table_ids.push(table.id.clone());
            let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
            for t in &tokens {
                *tf.entry(t.as_str()).or_default() += 1;
            }
            for (word, count) in tf {
                postings.entry(word.to_string()).or_default().push(Posting {
                    doc: doc as u32,
                    tf: count,
                });
            }
        }
        let doc_of = table_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
        Ok(Self {
            table_ids,
            doc_of,
            postings,
            doc_len,
            stats,
            params,
        })
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn aspects(&self) -> AspectSet {
        self.stats.aspects
    }

    pub fn stats(&self) -> &CorpusStats {
        &self.stats
    }

    pub fn num_docs(&self) -> usize {
        self.table_ids.len()
    }

    pub fn table_ids(&self) -> &[String] {
        &self.table_ids
    }

    pub fn postings(&self, word: &str) -> &[Posting] {
        self.postings.get(word).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn doc_len(&self, table_id: &str) -> Option<u32> {
        self.doc_of.get(table_id).map(|&d| self.doc_len[d as usize])
    }

    fn term_weight(&self, tf: u32, doc: u32) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = tf as f64;
        let len_ratio = self.doc_len[doc as usize] as f64 / self.stats.avg_doc_len;
        tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len_ratio))
    }

    /// BM25 score of one table; every query position contributes, so a
    /// repeated query token counts twice.
    pub fn bm25_score<S: AsRef<str>>(&self, query_tokens: &[S], table_id: &str) -> Result<f64> {
        let doc = *self
            .doc_of
            .get(table_id)
            .ok_or_else(|| Error::UnknownTable(table_id.to_string()))?;
        let mut score = 0.0;
        for token in query_tokens {
            let list = self.postings(token.as_ref());
            if let Ok(pos) = list.binary_search_by_key(&doc, |p| p.doc) {
                score += self.stats.idf(token.as_ref()) * self.term_weight(list[pos].tf, doc);
            }
        }
        Ok(score)
    }

    /// Scores every table sharing at least one token with the query.
    pub fn score_all<S: AsRef<str>>(&self, query_tokens: &[S]) -> Vec<(u32, f64)> {
        let mut acc: HashMap<u32, f64> = HashMap::new();
        for token in query_tokens {
            let token = token.as_ref();
            let idf = self.stats.idf(token);
            for p in self.postings(token) {
                *acc.entry(p.doc).or_insert(0.0) += idf * self.term_weight(p.tf, p.doc);
            }
        }
        acc.into_iter().filter(|&(_, s)| s > 0.0).collect()
    }

    /// The `k` best tables with positive score, best first, ties by ascending id.
    pub fn retrieve_topk(&self, query: &Query, k: usize) -> Vec<(String, f64)> {
        self.retrieve_tokens(&query.tokens, k)
    }

    pub fn retrieve_tokens<S: AsRef<str>>(&self, tokens: &[S], k: usize) -> Vec<(String, f64)> {
        let mut scored = self.score_all(tokens);
        // doc numbers follow ascending table id
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(k);
        scored
            .into_iter()
            .map(|(doc, s)| (self.table_ids[doc as usize].clone(), s))
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut words: Vec<&String> = self.postings.keys().collect();
        words.sort();
        let file = IndexFile {
            format: INDEX_FORMAT.into(),
            version: INDEX_VERSION,
            params: self.params,
            aspects: self.stats.aspects,
            avg_doc_len: self.stats.avg_doc_len,
            table_ids: self.table_ids.clone(),
            doc_len: self.doc_len.clone(),
            postings: words
                .into_iter()
                .map(|w| {
                    let list = self.postings[w].iter().map(|p| (p.doc, p.tf)).collect();
                    (w.clone(), list)
                })
                .collect(),
        };
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(f), &file)
            .map_err(|e| Error::Format(format!("writing index: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let file: IndexFile = serde_json::from_reader(BufReader::new(f))
            .map_err(|e| Error::parse(None, format!("index file: {e}")))?;
        if file.format != INDEX_FORMAT || file.version != INDEX_VERSION {
            return Err(Error::Format(format!(
                "expected {INDEX_FORMAT} v{INDEX_VERSION}, found {} v{}",
                file.format, file.version
            )));
        }
        file.params.validate()?;
        let mut doc_freq = HashMap::new();
        let mut vocabulary = BTreeMap::new();
        let mut postings = HashMap::new();
        for (i, (word, list)) in file.postings.into_iter().enumerate() {
            doc_freq.insert(word.clone(), list.len() as u32);
            vocabulary.insert(word.clone(), i as u32);
            postings.insert(
                word,
                list.into_iter().map(|(doc, tf)| Posting { doc, tf }).collect(),
            );
        }
        let stats = CorpusStats {
            num_docs: file.table_ids.len(),
            doc_freq,
            avg_doc_len: file.avg_doc_len,
            vocabulary,
            aspects: file.aspects,
        };
        let doc_of = file
            .table_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
        Ok(Self {
            table_ids: file.table_ids,
            doc_of,
            postings,
            doc_len: file.doc_len,
            stats,
            params: file.params,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    format: String,
    version: u32,
    params: Bm25Params,
    aspects: AspectSet,
    avg_doc_len: f64,
    table_ids: Vec<String>,
    doc_len: Vec<u32>,
    postings: Vec<(String, Vec<(u32, u32)>)>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::Table;
    use approx::assert_abs_diff_eq;

    fn table(id: &str, caption: &str) -> Table {
        Table {
            id: id.into(),
            headers: vec!["h".into()],
            cells: vec![vec!["c".into()]],
            caption: Some(caption.into()),
        }
    }

    fn caption_index(tables: Vec<Table>) -> Bm25Index {
        let corpus = Corpus::from_tables(tables).unwrap();
        Bm25Index::build(&corpus, AspectSet::only(crate::table::Aspect::Caption), Bm25Params::default())
            .unwrap()
    }

    #[test]
    fn postings_and_lengths() {
        let idx = caption_index(vec![table("t", "a b a")]);
        assert_eq!(idx.postings("a"), &[Posting { doc: 0, tf: 2 }]);
        assert_eq!(idx.postings("b"), &[Posting { doc: 0, tf: 1 }]);
        assert_eq!(idx.doc_len("t"), Some(3));
    }

    #[test]
    fn no_overlap_scores_zero() {
        let idx = caption_index(vec![table("t", "x y")]);
        assert_eq!(idx.bm25_score(&["z"], "t").unwrap(), 0.0);
        assert!(idx.retrieve_tokens(&["z"], 5).is_empty());
    }

    #[test]
    fn unit_length_ratio_reduces_to_idf() {
        let idx = caption_index(vec![table("t", "x y")]);
        let s = idx.bm25_score(&["x"], "t").unwrap();
        assert_abs_diff_eq!(s, idx.stats().idf("x"), epsilon = 1e-12);
    }

    #[test]
    fn duplicate_query_token_counts_twice() {
        let idx = caption_index(vec![table("t", "x y"), table("u", "y z z")]);
        let once = idx.bm25_score(&["x"], "t").unwrap();
        let twice = idx.bm25_score(&["x", "x"], "t").unwrap();
        assert_abs_diff_eq!(twice, 2.0 * once, epsilon = 1e-12);
    }

    #[test]
    fn unknown_table_errors() {
        let idx = caption_index(vec![table("t", "x")]);
        assert!(matches!(idx.bm25_score(&["x"], "nope"), Err(Error::UnknownTable(_))));
    }

    #[test]
    fn topk_returns_all_matches_and_breaks_ties_by_id() {
        let idx = caption_index(vec![
            table("b", "apple pie"),
            table("a", "apple tart"),
            table("c", "pear"),
        ]);
        let hits = idx.retrieve_tokens(&["apple"], 10);
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].0, "a");
        assert_eq!(hits[1].0, "b");
        assert_eq!(hits[0].1, hits[1].1);
    }

    #[test]
    fn invalid_params_rejected() {
        let corpus = Corpus::from_tables([table("t", "x")]).unwrap();
        for p in [Bm25Params { k1: -1.0, b: 0.5 }, Bm25Params { k1: 1.0, b: 1.5 }] {
            assert!(Bm25Index::build(&corpus, AspectSet::all(), p).is_err());
        }
    }

    #[test]
    fn persisted_index_scores_identically() {
        let idx = caption_index(vec![table("b", "apple pie"), table("a", "apple tart pie")]);
        let f = tempfile::NamedTempFile::new().unwrap();
        idx.save(f.path()).unwrap();
        let back = Bm25Index::load(f.path()).unwrap();
        assert_eq!(back.retrieve_tokens(&["pie", "apple"], 5), idx.retrieve_tokens(&["pie", "apple"], 5));
        assert_eq!(back.stats().avg_doc_len, idx.stats().avg_doc_len);
    }
}
