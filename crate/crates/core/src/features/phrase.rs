//! Paraphrase scoring through a bilingual phrase table: two source phrases
//! aligned to the same target phrase are treated as likely paraphrases.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

/// Default maximum n-gram order for [`f_pp`].
pub const DEFAULT_MAX_ORDER: usize = 3;

/// One aligned target of a source phrase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhraseEntry {
    pub target: String,
    pub p_tgt_given_src: f64,
    pub p_src_given_tgt: f64,
}

/// Phrase table keyed by space-joined source phrase.
#[derive(Debug, Clone, Default)]
pub struct PhraseTable {
    entries: HashMap<String, Vec<PhraseEntry>>,
    // target -> source -> p(src | tgt)
    by_target: HashMap<String, HashMap<String, f64>>,
    max_phrase_len: usize,
    identity: bool,
}

impl PhraseTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Treats every phrase as aligned to itself with both probabilities 1.
    pub fn with_identity(mut self, on: bool) -> Self {
        self.identity = on;
        self
    }

    pub fn identity(&self) -> bool {
        self.identity
    }

    pub fn max_phrase_len(&self) -> usize {
        self.max_phrase_len
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty() && !self.identity
    }

    pub fn contains_source(&self, phrase: &str) -> bool {
        self.entries.contains_key(phrase)
    }

    pub fn insert(&mut self, src: &str, tgt: &str, p_tgt_given_src: f64, p_src_given_tgt: f64) -> Result<()> {
        for p in [p_tgt_given_src, p_src_given_tgt] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("probability {p} outside [0,1] for `{src}`")));
            }
        }
        let src = normalize_phrase(src);
        let tgt = normalize_phrase(tgt);
        if src.is_empty() || tgt.is_empty() {
            return Err(Error::Config("empty phrase in phrase table".into()));
        }
        self.max_phrase_len = self.max_phrase_len.max(src.split(' ').count());
        self.by_target
            .entry(tgt.clone())
            .or_default()
            .insert(src.clone(), p_src_given_tgt);
        self.entries.entry(src).or_default().push(PhraseEntry {
            target: tgt,
            p_tgt_given_src,
            p_src_given_tgt,
        });
        Ok(())
    }

    /// Reads `src ||| tgt ||| p(tgt|src) p(src|tgt)` lines; extra score
    /// columns and trailing fields are ignored.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut pt = PhraseTable::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split("|||").map(str::trim).collect();
            if fields.len() < 3 {
                return Err(Error::parse(Some(i + 1), "expected `src ||| tgt ||| probs`"));
            }
            let probs: Vec<f64> = fields[2]
                .split_whitespace()
                .take(2)
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(Some(i + 1), format!("probability: {e}")))?;
            if probs.len() != 2 {
                return Err(Error::parse(Some(i + 1), "expected two probabilities"));
            }
            pt.insert(fields[0], fields[1], probs[0], probs[1])
                .map_err(|e| Error::parse(Some(i + 1), e.to_string()))?;
        }
        Ok(pt)
    }

    /// `score(x; y) = Σ_k p(tgt_k | x) · p(y | tgt_k)` over targets shared by x and y.
    pub fn paraphrase_pair_score(&self, src_x: &str, src_y: &str) -> f64 {
        let mut score = if self.identity && src_x == src_y { 1.0 } else { 0.0 };
        if let Some(entries) = self.entries.get(src_x) {
            for e in entries {
                if let Some(p) = self.by_target.get(&e.target).and_then(|m| m.get(src_y)) {
                    score += e.p_tgt_given_src * p;
                }
            }
        }
        score
    }
}

fn normalize_phrase(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Phrase-level paraphrase feature.
///
/// `(1/N) Σ_{n=1..N} [Σ_{i,j} score(a[i..i+n], q[j..j+n])] / (|a| - n + 1)`,
/// enumerating every start position on both sides. An order for which either
/// side is shorter than `n` contributes 0 but still counts in the `1/N`.
pub fn f_pp<S: AsRef<str>, T: AsRef<str>>(
    aspect_tokens: &[S],
    query_tokens: &[T],
    pt: &PhraseTable,
    max_order: usize,
) -> f64 {
    assert!(max_order >= 1, "n-gram order must be at least 1");
    if pt.is_empty() {
        return 0.0;
    }
    let aspect: Vec<&str> = aspect_tokens.iter().map(AsRef::as_ref).collect();
    let query: Vec<&str> = query_tokens.iter().map(AsRef::as_ref).collect();
    let mut total = 0.0;
    for n in 1..=max_order {
        if aspect.len() < n || query.len() < n {
            continue;
        }
        let query_grams: Vec<String> = query.windows(n).map(|w| w.join(" ")).collect();
        let mut sum = 0.0;
        for a in aspect.windows(n) {
            let a = a.join(" ");
            if !pt.identity && !pt.contains_source(&a) {
                continue;
            }
            for q in &query_grams {
                sum += pt.paraphrase_pair_score(&a, q);
            }
        }
        total += sum / (aspect.len() - n + 1) as f64;
    }
    total / max_order as f64
}
