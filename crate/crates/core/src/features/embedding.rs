//! Pre-trained word vectors and the vector-average sentence similarity.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Word vectors of one shared dimension.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            vectors: HashMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Words with a vector, in no particular order.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }

    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Shape(format!(
                "embedding has {} values, expected {}",
                vector.len(),
                self.dim
            )));
        }
        self.vectors.insert(word.into(), vector);
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    /// Text format: `word v1 .. vd` per line, optionally preceded by a
    /// `vocab_size d` header line.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut table: Option<EmbeddingTable> = None;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
                let dim = fields[1].parse().expect("checked above");
                table = Some(EmbeddingTable::new(dim)?);
                continue;
            }
            let values: Vec<f64> = fields[1..]
                .iter()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(Some(i + 1), format!("embedding value: {e}")))?;
            let t = match table.as_mut() {
                Some(t) => t,
                None => table.insert(EmbeddingTable::new(values.len())?),
            };
            t.insert(fields[0], values)
                .map_err(|e| Error::parse(Some(i + 1), e.to_string()))?;
        }
        table.ok_or_else(|| Error::parse(None, "embedding file is empty"))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "{} {}", self.vectors.len(), self.dim).map_err(io)?;
        let mut words: Vec<&String> = self.vectors.keys().collect();
        words.sort();
        for word in words {
            write!(w, "{word}").map_err(io)?;
            for v in &self.vectors[word] {
                write!(w, " {v}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    /// Element-wise average of the in-vocabulary token vectors, `None` if no
    /// token is in vocabulary.
    pub fn average<S: AsRef<str>>(&self, tokens: &[S]) -> Option<Vec<f64>> {
        let mut sum = vec![0.0; self.dim];
        let mut n = 0usize;
        for t in tokens {
            if let Some(v) = self.get(t.as_ref()) {
                sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
                n += 1;
            }
        }
        (n > 0).then(|| sum.into_iter().map(|s| s / n as f64).collect())
    }
}

/// Cosine similarity; 0 if either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

/// Cosine of the averaged word vectors of both sides; out-of-vocabulary
/// tokens are skipped and an empty average gives 0.
pub fn avg_embedding_similarity<S: AsRef<str>, T: AsRef<str>>(
    aspect_tokens: &[S],
    query_tokens: &[T],
    emb: &EmbeddingTable,
) -> f64 {
    match (emb.average(aspect_tokens), emb.average(query_tokens)) {
        (Some(a), Some(q)) => cosine(&a, &q),
        _ => 0.0,
    }
}
