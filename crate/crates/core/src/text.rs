//! Tokenization, corpus statistics and letter-trigram hashing.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::Add;
use std::path::Path;

use crate::error::{Error, Result};
use crate::table::{document_tokens, AspectSet, Corpus};

/// Default size of the letter-trigram hash space.
pub const DEFAULT_TRIGRAM_DIMS: usize = 16_384;

/// Lower-cases and splits on any non-alphanumeric character.
///
/// Punctuation never survives as a token; digits are kept, so `"7,115"`
/// becomes `["7", "115"]`.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Document statistics over a table corpus for one aspect configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub num_docs: usize,
    pub doc_freq: HashMap<String, u32>,
    pub avg_doc_len: f64,
    pub vocabulary: BTreeMap<String, u32>,
    pub aspects: AspectSet,
}

impl CorpusStats {
    pub fn doc_freq(&self, word: &str) -> u32 {
        self.doc_freq.get(word).copied().unwrap_or(0)
    }

    /// Smoothed inverse document frequency, `ln(1 + (N - df + 0.5) / (df + 0.5))`.
    ///
    /// Always positive; an unseen word uses `df = 0`.
    pub fn idf(&self, word: &str) -> f64 {
        idf_from_counts(self.num_docs, self.doc_freq(word))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "#tabret-stats v1").map_err(io)?;
        writeln!(w, "num_docs\t{}", self.num_docs).map_err(io)?;
        writeln!(w, "avg_doc_len\t{}", self.avg_doc_len).map_err(io)?;
        writeln!(w, "aspects\t{}", self.aspects).map_err(io)?;
        for word in self.vocabulary.keys() {
            writeln!(w, "{word}\t{}", self.doc_freq[word]).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, Ok(l))) => Ok((i + 1, l)),
                Some((_, Err(e))) => Err(Error::io(path, e)),
                None => Err(Error::parse(None, format!("stats file truncated before {what}"))),
            }
        };
        let (_, magic) = next("header")?;
        if magic.trim() != "#tabret-stats v1" {
            return Err(Error::Format(format!("stats header `{magic}`")));
        }
        let field = |(lineno, line): (usize, String), key: &str| -> Result<String> {
            let (k, v) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(Some(lineno), "expected key<TAB>value"))?;
            if k != key {
                return Err(Error::parse(Some(lineno), format!("expected `{key}`, found `{k}`")));
            }
            Ok(v.to_string())
        };
        let num_docs = field(next("num_docs")?, "num_docs")?
            .parse()
            .map_err(|e| Error::parse(Some(2), format!("num_docs: {e}")))?;
        let avg_doc_len = field(next("avg_doc_len")?, "avg_doc_len")?
            .parse()
            .map_err(|e| Error::parse(Some(3), format!("avg_doc_len: {e}")))?;
        let aspects = field(next("aspects")?, "aspects")?.parse()?;
        let mut doc_freq = HashMap::new();
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let (word, df) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::parse(Some(i + 1), "expected word<TAB>df"))?;
            let df: u32 = df
                .parse()
                .map_err(|e| Error::parse(Some(i + 1), format!("df: {e}")))?;
            doc_freq.insert(word.to_string(), df);
        }
        let vocabulary = vocabulary_of(&doc_freq);
        Ok(Self {
            num_docs,
            doc_freq,
            avg_doc_len,
            vocabulary,
            aspects,
        })
    }
}

fn vocabulary_of(doc_freq: &HashMap<String, u32>) -> BTreeMap<String, u32> {
    let mut words: Vec<&String> = doc_freq.keys().collect();
    words.sort();
    words
        .into_iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i as u32))
        .collect()
}

pub fn idf_from_counts(num_docs: usize, df: u32) -> f64 {
    let n = num_docs as f64;
    let df = df as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

/// Builds document statistics where each table is one document made of the
/// concatenated tokens of `aspects`.
pub fn build_stats(corpus: &Corpus, aspects: AspectSet) -> Result<CorpusStats> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut doc_freq: HashMap<String, u32> = HashMap::new();
    let mut total_len = 0usize;
    for table in corpus.iter() {
        let tokens = document_tokens(table, aspects);
        total_len += tokens.len();
        let types: HashSet<&String> = tokens.iter().collect();
        for w in types {
            *doc_freq.entry(w.clone()).or_default() += 1;
        }
    }
    let vocabulary = vocabulary_of(&doc_freq);
    Ok(CorpusStats {
        num_docs: corpus.len(),
        doc_freq,
        avg_doc_len: total_len as f64 / corpus.len() as f64,
        vocabulary,
        aspects,
    })
}

/// Sparse letter-trigram count vector in a fixed hash space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrigramVector {
    pub dims: usize,
    pub counts: BTreeMap<u32, u32>,
}

impl TrigramVector {
    pub fn empty(dims: usize) -> Self {
        Self {
            dims,
            counts: BTreeMap::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u32 {
        self.counts.values().sum()
    }
}

impl Add for TrigramVector {
    type Output = TrigramVector;

    fn add(mut self, rhs: TrigramVector) -> TrigramVector {
        assert_eq!(self.dims, rhs.dims, "trigram spaces differ");
        for (k, v) in rhs.counts {
            *self.counts.entry(k).or_default() += v;
        }
        self
    }
}

/// 64-bit FNV-1a; the hash behind trigram bucketing.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Hashed trigram ids of one token wrapped as `#token#`, one entry per trigram.
pub fn token_trigram_ids(token: &str, dims: usize) -> Vec<u32> {
    assert!(dims > 0, "trigram dims must be positive");
    let chars: Vec<char> = std::iter::once('#')
        .chain(token.chars())
        .chain(std::iter::once('#'))
        .collect();
    let mut buf = String::with_capacity(12);
    chars
        .windows(3)
        .map(|w| {
            buf.clear();
            buf.extend(w);
            (fnv1a(buf.as_bytes()) % dims as u64) as u32
        })
        .collect()
}

/// Sums the letter-trigram counts of all tokens.
pub fn letter_trigrams<S: AsRef<str>>(tokens: &[S], dims: usize) -> TrigramVector {
    let mut v = TrigramVector::empty(dims);
    for t in tokens {
        for id in token_trigram_ids(t.as_ref(), dims) {
            *v.counts.entry(id).or_default() += 1;
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::Table;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn t(id: &str, caption: &str, headers: &[&str], cell: &str) -> Table {
        Table {
            id: id.into(),
            headers: headers.iter().map(|s| s.to_string()).collect(),
            cells: vec![vec![cell.to_string(); headers.len()]],
            caption: Some(caption.into()),
        }
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            tokenize("Major cities of Netherlands"),
            vec!["major", "cities", "of", "netherlands"]
        );
        assert_eq!(
            tokenize("list of flights london to berlin"),
            vec!["list", "of", "flights", "london", "to", "berlin"]
        );
        assert_eq!(
            tokenize("7,115 inactive voters"),
            vec!["7", "115", "inactive", "voters"]
        );
        assert!(tokenize("").is_empty());
        assert!(tokenize(" ,;! ").is_empty());
    }

    #[test]
    fn stats_doc_freq_and_length() {
        let corpus = Corpus::from_tables([
            t("a", "city list", &["city"], "x"),
            t("b", "big city", &["name", "city"], "y"),
        ])
        .unwrap();
        let stats = build_stats(&corpus, AspectSet::caption_headers()).unwrap();
        assert_eq!(stats.doc_freq("city"), 2);
        // docs: [city, city, list] and [name, city, big, city]
        assert_abs_diff_eq!(stats.avg_doc_len, 3.5);
        assert_eq!(stats.doc_freq("x"), 0, "cells excluded from caption+headers");
        let all = build_stats(&corpus, AspectSet::all()).unwrap();
        assert_eq!(all.doc_freq("x"), 1);
    }

    #[test]
    fn stats_average_length() {
        let corpus = Corpus::from_tables([
            t("a", "w w", &["w", "w"], "c"),
            t("b", "w w w", &["w", "w", "w"], "c"),
        ])
        .unwrap();
        let stats = build_stats(&corpus, AspectSet::caption_headers()).unwrap();
        assert_abs_diff_eq!(stats.avg_doc_len, 5.0);
    }

    #[test]
    fn empty_corpus_errors() {
        assert!(matches!(
            build_stats(&Corpus::default(), AspectSet::all()),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn idf_examples() {
        assert_abs_diff_eq!(idf_from_counts(2, 1), 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(idf_from_counts(100, 0), 202f64.ln(), epsilon = 1e-12);
        for n in 1..50 {
            assert!(idf_from_counts(n, n as u32) > 0.0);
        }
    }

    #[test]
    fn trigram_examples() {
        let v = letter_trigrams(&["cat"], DEFAULT_TRIGRAM_DIMS);
        assert_eq!(v.nnz(), 3);
        assert_eq!(v.total(), 3);
        let expected: std::collections::BTreeSet<u32> = ["#ca", "cat", "at#"]
            .iter()
            .map(|s| (fnv1a(s.as_bytes()) % DEFAULT_TRIGRAM_DIMS as u64) as u32)
            .collect();
        assert_eq!(v.counts.keys().copied().collect::<std::collections::BTreeSet<_>>(), expected);

        let a = letter_trigrams(&["a"], DEFAULT_TRIGRAM_DIMS);
        assert_eq!(a.total(), 1);

        let twice = letter_trigrams(&["cat", "cat"], DEFAULT_TRIGRAM_DIMS);
        for (k, c) in &v.counts {
            assert_eq!(twice.counts[k], 2 * c);
        }
        assert!(letter_trigrams::<&str>(&[], 64).is_empty());
    }

    #[test]
    fn stats_file_round_trip() {
        let corpus = Corpus::from_tables([
            t("a", "city list", &["city"], "x"),
            t("b", "big city", &["name"], "y"),
        ])
        .unwrap();
        let stats = build_stats(&corpus, AspectSet::all()).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        stats.save(f.path()).unwrap();
        assert_eq!(CorpusStats::load(f.path()).unwrap(), stats);
    }

    proptest! {
        #[test]
        fn tokenize_is_idempotent(s in "\\PC{0,40}") {
            let once = tokenize(&s);
            prop_assert_eq!(tokenize(&once.join(" ")), once);
        }

        #[test]
        fn idf_decreases_with_df(n in 1usize..500, a in 0u32..500, b in 0u32..500) {
            let (lo, hi) = (a.min(b).min(n as u32), a.max(b).min(n as u32));
            prop_assert!(idf_from_counts(n, lo) >= idf_from_counts(n, hi));
        }

        #[test]
        fn trigrams_add_over_concatenation(
            x in proptest::collection::vec("[a-z]{1,6}", 0..5),
            y in proptest::collection::vec("[a-z]{1,6}", 0..5),
        ) {
            let dims = 97;
            let joined: Vec<String> = x.iter().chain(y.iter()).cloned().collect();
            let lhs = letter_trigrams(&joined, dims);
            let rhs = letter_trigrams(&x, dims) + letter_trigrams(&y, dims);
            prop_assert_eq!(lhs, rhs);
        }
    }
}
