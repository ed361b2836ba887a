//! Fixtures and brute-force reference implementations shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::HashSet;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use tabret::features::PhraseTable;
use tabret::math::{seeded_rng, SeededRng};
use tabret::neural::{AspectKind, AspectModel, ModelShape, Vocabulary};
use tabret::ranker::QueryGroup;
use tabret::table::{document_tokens, AspectSet, Corpus, Query, Table};

pub const WORDS: [&str; 12] = [
    "alpha", "beta", "gamma", "delta", "omega", "river", "city", "year", "team", "score", "lake", "peak",
];

/// The bundled synthetic data directory.
pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn random_table(rng: &mut impl Rng, id: usize) -> Table {
    let cols = rng.random_range(1..4);
    let rows = rng.random_range(1..4);
    let word = |rng: &mut dyn rand::RngCore| WORDS[rng.random_range(0..WORDS.len())].to_string();
    Table {
        id: format!("t{id}"),
        headers: (0..cols).map(|_| word(rng)).collect(),
        cells: (0..rows)
            .map(|_| {
                (0..cols)
                    .map(|_| if rng.random_bool(0.15) { String::new() } else { format!("{} {}", word(rng), word(rng)) })
                    .collect()
            })
            .collect(),
        caption: Some(format!("{} {} {}", word(rng), word(rng), word(rng))),
    }
}

/// Rows shuffled, then columns shuffled with their headers.
pub fn permuted(t: &Table, rng: &mut impl Rng) -> Table {
    let mut cells = t.cells.clone();
    cells.shuffle(rng);
    let mut cols: Vec<usize> = (0..t.headers.len()).collect();
    cols.shuffle(rng);
    Table {
        id: t.id.clone(),
        headers: cols.iter().map(|&c| t.headers[c].clone()).collect(),
        cells: cells.iter().map(|r| cols.iter().map(|&c| r[c].clone()).collect()).collect(),
        caption: t.caption.clone(),
    }
}

/// Small random model with non-zero biases so their gradients are exercised
/// away from zero.
pub fn small_model(kind: AspectKind, seed: u64) -> AspectModel {
    let shape = ModelShape {
        embed_dim: 5,
        hidden_dim: 4,
        init_scale: 0.5,
    };
    let mut m = AspectModel::new_random(kind, Vocabulary::new(WORDS), shape, seed, None).unwrap();
    let mut rng = seeded_rng(seed ^ 0xb1a5);
    for (name, t) in m.params.named_tensors_mut() {
        if name.contains(".b_") || name.ends_with(".b") {
            t.iter_mut().for_each(|x| *x = rng.random_range(-0.3..0.3));
        }
    }
    m
}

/// Corpus over a skewed vocabulary so that shared terms, repeated terms and
/// tied scores all occur.
pub fn random_corpus(n: usize, seed: u64) -> Corpus {
    let mut rng = seeded_rng(seed);
    let vocab: Vec<String> = (0..300).map(|i| format!("w{i}")).collect();
    let word = |rng: &mut SeededRng| {
        // squaring a uniform draw favours low ids
        let u: f64 = rng.random();
        vocab[((u * u) * vocab.len() as f64) as usize].clone()
    };
    let tables = (0..n)
        .map(|i| {
            let cols = rng.random_range(1..5);
            let rows = rng.random_range(1..6);
            let headers = (0..cols).map(|_| word(&mut rng)).collect();
            let cells = (0..rows)
                .map(|_| (0..cols).map(|_| word(&mut rng)).collect())
                .collect();
            let caption = rng
                .random_bool(0.8)
                .then(|| (0..rng.random_range(1..6)).map(|_| word(&mut rng)).collect::<Vec<_>>().join(" "));
            Table {
                id: format!("doc{i:05}"),
                headers,
                cells,
                caption,
            }
        })
        .collect::<Vec<_>>();
    Corpus::from_tables(tables).unwrap()
}

pub fn random_queries(n: usize, seed: u64) -> Vec<Query> {
    let mut rng = seeded_rng(seed);
    (0..n)
        .map(|i| {
            let len = rng.random_range(1..6);
            let text: Vec<String> = (0..len)
                .map(|_| {
                    let u: f64 = rng.random();
                    // a few words never occur in the corpus
                    if u > 0.97 {
                        "unseen".to_string()
                    } else {
                        format!("w{}", ((u * u) * 300.0) as usize)
                    }
                })
                .collect();
            Query::new(format!("q{i}"), text.join(" "))
        })
        .collect()
}

/// BM25 by scanning every table, written straight from the definition.
pub fn exhaustive_bm25(corpus: &Corpus, aspects: AspectSet, k1: f64, b: f64, query: &[String]) -> Vec<(String, f64)> {
    let docs: Vec<(String, Vec<String>)> = corpus
        .iter()
        .map(|t| (t.id.clone(), document_tokens(t, aspects)))
        .collect();
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(|(_, d)| d.len()).sum::<usize>() as f64 / n;
    let df: Vec<f64> = query
        .iter()
        .map(|w| docs.iter().filter(|(_, d)| d.contains(w)).count() as f64)
        .collect();
    let mut out: Vec<(String, f64)> = docs
        .iter()
        .map(|(id, d)| {
            let mut s = 0.0;
            for (w, &f) in query.iter().zip(&df) {
                let tf = d.iter().filter(|x| *x == w).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let idf = (1.0 + (n - f + 0.5) / (f + 0.5)).ln();
                s += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * d.len() as f64 / avgdl));
            }
            (id.clone(), s)
        })
        .filter(|(_, s)| *s > 0.0)
        .collect();
    out.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
    out
}

/// Average precision from the definition: mean over relevant tables of the
/// precision at the rank where each is found, 0 for the ones never ranked.
pub fn brute_force_ap(ranked: &[String], relevant: &[String]) -> f64 {
    let rel: HashSet<&String> = relevant.iter().collect();
    let mut total = 0.0;
    for r in &rel {
        if let Some(pos) = ranked.iter().position(|x| x == *r) {
            let hits_up_to = ranked[..=pos].iter().filter(|x| rel.contains(x)).count();
            total += hits_up_to as f64 / (pos + 1) as f64;
        }
    }
    total / rel.len() as f64
}

/// Query groups whose label is decided by feature 0 alone (positives in
/// [0.6, 1), negatives in [0, 0.4)); four uniform noise features follow.
pub fn separable_groups(n: usize, seed: u64) -> Vec<QueryGroup> {
    let mut rng = seeded_rng(seed);
    (0..n)
        .map(|g| {
            let size = rng.random_range(5..15);
            let npos = rng.random_range(1..=3.min(size - 1));
            // positions shuffled so index tie-breaking carries no signal
            let mut labels: Vec<bool> = (0..size).map(|i| i < npos).collect();
            labels.shuffle(&mut rng);
            let features = labels
                .iter()
                .map(|&l| {
                    let signal = if l { rng.random_range(0.6..1.0) } else { rng.random_range(0.0..0.4) };
                    std::iter::once(signal).chain((0..4).map(|_| rng.random::<f64>())).collect()
                })
                .collect();
            QueryGroup {
                query_id: format!("g{g}"),
                table_ids: (0..size).map(|i| format!("g{g}t{i}")).collect(),
                features,
                labels,
            }
        })
        .collect()
}

/// Hand-built paraphrase triples: aspect, query, phrase table entries
/// `(src, tgt, p(tgt|src), p(src|tgt))` and the expected value at N = 3,
/// evaluated by hand as the per-order double sum.
pub struct PhraseCase {
    pub name: &'static str,
    pub aspect: Vec<&'static str>,
    pub query: Vec<&'static str>,
    pub entries: Vec<(&'static str, &'static str, f64, f64)>,
    pub expected: f64,
}

impl PhraseCase {
    pub fn table(&self) -> PhraseTable {
        let mut pt = PhraseTable::new();
        for &(s, t, a, b) in &self.entries {
            pt.insert(s, t, a, b).unwrap();
        }
        pt
    }
}

pub fn phrase_cases() -> Vec<PhraseCase> {
    let shared = vec![("x", "t", 0.5, 0.4), ("y", "t", 0.2, 0.6)];
    vec![
        PhraseCase {
            name: "single token, self paraphrase",
            aspect: vec!["x"],
            query: vec!["x"],
            entries: vec![("x", "t", 1.0, 1.0)],
            // order 1: 1*1 / 1; orders 2 and 3 empty
            expected: 1.0 / 3.0,
        },
        PhraseCase {
            name: "two aspect tokens, one shared target",
            aspect: vec!["x", "y"],
            query: vec!["y"],
            entries: shared.clone(),
            // order 1: (0.5*0.6 + 0.2*0.6) / 2
            expected: ((0.5 * 0.6 + 0.2 * 0.6) / 2.0) / 3.0,
        },
        PhraseCase {
            name: "direction matters",
            aspect: vec!["y"],
            query: vec!["x"],
            entries: shared,
            expected: (0.2 * 0.4) / 3.0,
        },
        PhraseCase {
            name: "bigram paraphrase only",
            aspect: vec!["new", "york"],
            query: vec!["big", "apple"],
            entries: vec![("new york", "nyc", 0.8, 0.7), ("big apple", "nyc", 0.6, 0.5)],
            // order 2: 0.8*0.5 / (2-2+1)
            expected: (0.8 * 0.5) / 3.0,
        },
        PhraseCase {
            name: "empty phrase table",
            aspect: vec!["a", "b"],
            query: vec!["a", "b"],
            entries: vec![],
            expected: 0.0,
        },
        PhraseCase {
            name: "repeated query positions all count",
            aspect: vec!["x"],
            query: vec!["y", "y"],
            entries: vec![("x", "t", 1.0, 0.5), ("y", "t", 0.5, 0.25)],
            // order 1: 2 * (1.0*0.25) / 1
            expected: (2.0 * 1.0 * 0.25) / 3.0,
        },
        PhraseCase {
            name: "two shared targets",
            aspect: vec!["x"],
            query: vec!["y"],
            entries: vec![("x", "t1", 0.5, 0.9), ("x", "t2", 0.5, 0.1), ("y", "t1", 0.3, 0.5), ("y", "t2", 0.7, 0.5)],
            // order 1: 0.5*0.5 + 0.5*0.5
            expected: (0.5 * 0.5 + 0.5 * 0.5) / 3.0,
        },
        PhraseCase {
            name: "trigram and unigram orders",
            aspect: vec!["a", "b", "c", "d"],
            query: vec!["a", "b", "c"],
            entries: vec![("a b c", "T", 0.9, 0.9), ("b c d", "T", 0.3, 0.2), ("a", "s", 1.0, 1.0)],
            // order 1: 1*1 / 4; order 2: 0 / 3; order 3: (0.9*0.9 + 0.3*0.9) / 2
            expected: (1.0 / 4.0 + 0.0 + (0.9 * 0.9 + 0.3 * 0.9) / 2.0) / 3.0,
        },
        PhraseCase {
            name: "unigrams and bigram both match",
            aspect: vec!["p", "q"],
            query: vec!["p", "q"],
            entries: vec![("p", "u", 0.4, 0.5), ("q", "u", 0.6, 0.5), ("p q", "v", 1.0, 1.0)],
            // order 1: (0.4*0.5 + 0.4*0.5 + 0.6*0.5 + 0.6*0.5) / 2; order 2: 1 / 1
            expected: ((0.4 * 0.5 + 0.4 * 0.5 + 0.6 * 0.5 + 0.6 * 0.5) / 2.0 + 1.0) / 3.0,
        },
        PhraseCase {
            name: "repeated aspect unigram",
            aspect: vec!["x", "x", "z"],
            query: vec!["x", "z"],
            entries: vec![("x", "t", 0.5, 0.5), ("z", "t", 0.5, 0.5), ("x z", "w", 1.0, 0.25)],
            // order 1: 6 pairs of 0.25 over 3; order 2: ("x x" absent) + 1*0.25, over 2
            expected: (6.0 * 0.25 / 3.0 + 0.25 / 2.0) / 3.0,
        },
    ]
}
