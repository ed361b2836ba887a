//! Python bindings: corpora, the BM25 index, metrics, forests and the
//! end-to-end pipeline.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyKeyError, PyValueError};
use pyo3::prelude::*;

use tabret::error::Error;
use tabret::eval::{self, FilterRule, RankedResult};
use tabret::features::{FeatureFamilies, FeatureVector};
use tabret::index::Bm25Params;
use tabret::pipeline::{self, PipelineConfig, PipelineMode};
use tabret::table::{self, AspectSet, Query, TableRecord};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::UnknownTable(_) => PyKeyError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn aspects(list: &str) -> PyResult<AspectSet> {
    list.parse().map_err(to_py)
}

#[pyclass(name = "Table", frozen, from_py_object)]
#[derive(Clone)]
struct PyTable {
    inner: table::Table,
}

#[pymethods]
impl PyTable {
    #[new]
    #[pyo3(signature = (id, headers, rows, caption=None))]
    fn new(id: String, headers: Vec<String>, rows: Vec<Vec<String>>, caption: Option<String>) -> PyResult<Self> {
        let inner = table::parse_table_record(TableRecord {
            id: Some(id),
            caption,
            headers: Some(headers),
            rows: Some(rows),
        })
        .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn id(&self) -> &str {
        &self.inner.id
    }

    #[getter]
    fn headers(&self) -> Vec<String> {
        self.inner.headers.clone()
    }

    #[getter]
    fn rows(&self) -> Vec<Vec<String>> {
        self.inner.cells.clone()
    }

    #[getter]
    fn caption(&self) -> Option<String> {
        self.inner.caption.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "Table(id={:?}, columns={}, rows={})",
            self.inner.id,
            self.inner.num_columns(),
            self.inner.num_rows()
        )
    }
}

#[pyclass(name = "Corpus", frozen)]
struct PyCorpus {
    inner: table::Corpus,
}

#[pymethods]
impl PyCorpus {
    #[new]
    fn new(tables: Vec<PyTable>) -> PyResult<Self> {
        let inner = table::Corpus::from_tables(tables.into_iter().map(|t| t.inner)).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Loads a JSON lines corpus; irregular tables are dropped.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let loaded = table::load_corpus(path).map_err(to_py)?;
        Ok(Self { inner: loaded.corpus })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        table::save_corpus(&self.inner, path).map_err(to_py)
    }

    fn ids(&self) -> Vec<String> {
        self.inner.iter().map(|t| t.id.clone()).collect()
    }

    fn get(&self, id: &str) -> PyResult<PyTable> {
        self.inner
            .get(id)
            .map(|t| PyTable { inner: t.clone() })
            .ok_or_else(|| to_py(Error::UnknownTable(id.to_string())))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "Bm25Index", frozen)]
struct PyBm25Index {
    inner: tabret::index::Bm25Index,
}

#[pymethods]
impl PyBm25Index {
    #[staticmethod]
    #[pyo3(signature = (corpus, aspects="headers,cells,caption", k1=tabret::index::DEFAULT_K1, b=tabret::index::DEFAULT_B))]
    fn build(corpus: &PyCorpus, aspects: &str, k1: f64, b: f64) -> PyResult<Self> {
        let inner = tabret::index::Bm25Index::build(&corpus.inner, self::aspects(aspects)?, Bm25Params { k1, b })
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: tabret::index::Bm25Index::load(path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(to_py)
    }

    /// Top `k` `(table_id, score)` pairs for a query string.
    #[pyo3(signature = (query, k=tabret::index::DEFAULT_TOPK))]
    fn retrieve(&self, query: &str, k: usize) -> Vec<(String, f64)> {
        self.inner.retrieve_topk(&Query::new("q", query), k)
    }

    fn score(&self, query: &str, table_id: &str) -> PyResult<f64> {
        self.inner.bm25_score(&tabret::text::tokenize(query), table_id).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.num_docs()
    }
}

#[pyclass(name = "Forest", frozen)]
struct PyForest {
    inner: tabret::ranker::Forest,
}

#[pymethods]
impl PyForest {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: tabret::ranker::Forest::load(path).map_err(to_py)?,
        })
    }

    #[getter]
    fn features(&self) -> Vec<String> {
        self.inner.schema.names.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.trees.len()
    }

    fn score(&self, values: Vec<f64>) -> PyResult<f64> {
        self.inner.score(&FeatureVector { values }).map_err(to_py)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }
}

#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    tabret::text::tokenize(text)
}

#[pyfunction]
fn idf(num_docs: usize, df: u32) -> f64 {
    tabret::text::idf_from_counts(num_docs, df)
}

/// Average precision of a ranked id list; relevant tables that were not
/// retrieved still count in the denominator.
#[pyfunction]
fn average_precision(ranked: Vec<String>, relevant: Vec<String>) -> PyResult<f64> {
    let result = RankedResult {
        query_id: String::new(),
        candidates: ranked.into_iter().map(|id| (id, 0.0)).collect(),
        relevant,
    };
    eval::average_precision(&result).map_err(to_py)
}

/// MAP and P@1 over `(ranked_ids, relevant_ids)` pairs; `None` when no
/// query survives the filter.
#[pyfunction]
#[pyo3(signature = (queries, filter=true))]
fn mean_average_precision(queries: Vec<(Vec<String>, Vec<String>)>, filter: bool) -> (Option<f64>, Option<f64>) {
    let results: Vec<RankedResult> = queries
        .into_iter()
        .enumerate()
        .map(|(i, (ranked, relevant))| RankedResult {
            query_id: i.to_string(),
            candidates: ranked.into_iter().map(|id| (id, 0.0)).collect(),
            relevant,
        })
        .collect();
    let report = eval::evaluate(&results, if filter { FilterRule::On } else { FilterRule::Off });
    (report.map, report.p_at_1)
}

/// Writes the synthetic corpus, queries and resources into `out_dir`.
#[pyfunction]
#[pyo3(signature = (out_dir, seed=7, tables=200, queries=60))]
fn synth(out_dir: PathBuf, seed: u64, tables: usize, queries: usize) -> PyResult<()> {
    let data = tabret::synth::generate(&tabret::synth::SynthConfig {
        num_tables: tables,
        num_queries: queries,
        seed,
        ..Default::default()
    })
    .map_err(to_py)?;
    data.write(out_dir).map_err(to_py)
}

/// Runs the pipeline on a data directory and returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (data_dir, out_dir, mode="single", features="designed,neural", aspects="headers,cells,caption", seed=7, nn_epochs=20, trees=100))]
#[allow(clippy::too_many_arguments)]
fn run_pipeline(
    py: Python<'_>,
    data_dir: PathBuf,
    out_dir: PathBuf,
    mode: &str,
    features: &str,
    aspects: &str,
    seed: u64,
    nn_epochs: usize,
    trees: usize,
) -> PyResult<String> {
    let mut cfg = PipelineConfig::with_data_dir(data_dir, out_dir);
    cfg.mode = match mode {
        "single" => PipelineMode::Single,
        "compare" => PipelineMode::Compare,
        "ablation" => PipelineMode::Ablation,
        other => return Err(PyValueError::new_err(format!("unknown mode `{other}`"))),
    };
    cfg.families = features.parse::<FeatureFamilies>().map_err(to_py)?;
    cfg.aspects = self::aspects(aspects)?;
    cfg.seed = seed;
    cfg.neural.epochs = nn_epochs;
    cfg.ranker.num_trees = trees;
    let report = py.detach(|| pipeline::run_pipeline_full(&cfg)).map_err(to_py)?;
    Ok(serde_json::to_string(&report).expect("serializable"))
}

#[pymodule]
fn tabret_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTable>()?;
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyBm25Index>()?;
    m.add_class::<PyForest>()?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(idf, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(mean_average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
