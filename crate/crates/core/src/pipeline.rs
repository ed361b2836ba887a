//! End-to-end experiment: ingest, index, train matchers, featurize, train the
//! ranker and evaluate on the held-out split. Every intermediate artifact is
//! written under the output directory.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{
    candidate_recall, default_thresholds, evaluate, length_bucket_report, passes_filter, pr_curve, split_dataset,
    EvalReport, FilterRule, RankedResult,
};
use crate::featurize::{FeatureFile, Featurizer, QueryFeatures};
use crate::features::{
    load_pairs, train_subword_encoder, DesignedResources, EmbeddingTable, FeatureFamilies, FeatureSchema,
    PhraseTable, SubwordEncoderParams, SubwordTrainConfig, DEFAULT_MAX_ORDER,
};
use crate::index::{Bm25Index, Bm25Params, DEFAULT_TOPK};
use crate::math::{derive_seed, seeded_rng};
use crate::neural::train::table_words;
use crate::neural::{
    sample_negatives, train_aspect_model, AspectKind, AspectModel, ModelInit, NeuralExample, NeuralModels,
    NeuralTrainConfig, TrainedAspectModel, Vocabulary,
};
use crate::ranker::{fit_lambdamart_traced, LambdaMartConfig, QueryGroup};
use crate::table::{load_corpus, load_queries, save_corpus, Aspect, AspectSet, Corpus, LabeledQuery};
use crate::text::{build_stats, tokenize};

/// What the pipeline evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PipelineMode {
    /// One configuration: the configured feature families and aspects.
    Single,
    /// BM25, Feature, NeuralNet and Feature + NeuralNet side by side.
    Compare,
    /// The configured families restricted to H, Cel, Cap, H+Cel, H+Cel+Cap.
    Ablation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub queries: PathBuf,
    pub phrase_table: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    /// Paraphrase pairs for training the sub-word encoder.
    pub paraphrases: Option<PathBuf>,
    /// A trained sub-word encoder; skips encoder training when set.
    pub encoder: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub topk: usize,
    pub bm25: Bm25Params,
    /// Aspects indexed for candidate retrieval.
    pub index_aspects: AspectSet,
    /// Aspects whose features reach the ranker.
    pub aspects: AspectSet,
    pub families: FeatureFamilies,
    pub ranker: LambdaMartConfig,
    pub neural: NeuralTrainConfig,
    pub subword: SubwordTrainConfig,
    pub split: [f64; 3],
    pub filter: FilterRule,
    pub mode: PipelineMode,
    pub pr_steps: usize,
    /// Root seed; stage seeds are derived from it.
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(corpus: impl Into<PathBuf>, queries: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            corpus: corpus.into(),
            queries: queries.into(),
            phrase_table: None,
            embeddings: None,
            paraphrases: None,
            encoder: None,
            out_dir: out_dir.into(),
            topk: DEFAULT_TOPK,
            bm25: Bm25Params::default(),
            index_aspects: AspectSet::all(),
            aspects: AspectSet::all(),
            families: FeatureFamilies {
                designed: true,
                neural: true,
            },
            ranker: LambdaMartConfig::default(),
            neural: NeuralTrainConfig::default(),
            subword: SubwordTrainConfig::default(),
            split: [0.7, 0.1, 0.2],
            filter: FilterRule::On,
            mode: PipelineMode::Single,
            pr_steps: 21,
            seed: 7,
        }
    }

    /// Points every resource path at the standard file names inside `dir`.
    pub fn with_data_dir(dir: impl AsRef<Path>, out_dir: impl Into<PathBuf>) -> Self {
        use crate::synth::files;
        let dir = dir.as_ref();
        let mut c = Self::new(dir.join(files::TABLES), dir.join(files::QUERIES), out_dir);
        c.phrase_table = Some(dir.join(files::PHRASES));
        c.embeddings = Some(dir.join(files::EMBEDDINGS));
        c.paraphrases = Some(dir.join(files::PARAPHRASES));
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == PipelineMode::Single && !self.families.designed && !self.families.neural {
            return Err(Error::Config("enable at least one feature family (designed, neural)".into()));
        }
        if self.aspects.is_empty() || self.index_aspects.is_empty() {
            return Err(Error::Config("aspect sets must not be empty".into()));
        }
        if self.topk == 0 {
            return Err(Error::Config("topk must be at least 1".into()));
        }
        for p in [&self.corpus, &self.queries] {
            if !p.exists() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        for p in [&self.phrase_table, &self.embeddings, &self.paraphrases, &self.encoder]
            .into_iter()
            .flatten()
        {
            if !p.exists() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        self.bm25.validate()?;
        self.ranker.validate()?;
        self.neural.validate()
    }

    fn needs(&self) -> FeatureFamilies {
        match self.mode {
            PipelineMode::Compare => FeatureFamilies {
                designed: true,
                neural: true,
            },
            _ => self.families,
        }
    }

    /// `(label, families, aspects)` of every evaluated configuration.
    fn variants(&self) -> Vec<(String, FeatureFamilies, AspectSet)> {
        let fam = |designed, neural| FeatureFamilies { designed, neural };
        match self.mode {
            PipelineMode::Single => vec![(self.families.label().to_string(), self.families, self.aspects)],
            PipelineMode::Compare => [fam(false, false), fam(true, false), fam(false, true), fam(true, true)]
                .into_iter()
                .map(|f| (f.label().to_string(), f, self.aspects))
                .collect(),
            PipelineMode::Ablation => ablation_aspect_sets()
                .into_iter()
                .map(|a| (a.label(), self.families, a))
                .collect(),
        }
    }
}

/// H, Cel, Cap, H+Cel, H+Cel+Cap.
pub fn ablation_aspect_sets() -> Vec<AspectSet> {
    vec![
        AspectSet::only(Aspect::Headers),
        AspectSet::only(Aspect::Cells),
        AspectSet::only(Aspect::Caption),
        AspectSet {
            headers: true,
            cells: true,
            caption: false,
        },
        AspectSet::all(),
    ]
}

/// One evaluated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub features: String,
    pub aspects: String,
    pub train_map: Option<f64>,
    pub validation_map: Option<f64>,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub mode: PipelineMode,
    pub primary: String,
    pub num_tables: usize,
    pub num_queries: [usize; 3],
    pub topk: usize,
    pub test_candidate_recall: f64,
    pub rows: Vec<ReportRow>,
}

impl PipelineReport {
    pub fn row(&self, label: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn primary_row(&self) -> &ReportRow {
        self.row(&self.primary).expect("primary row exists")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "tables: {}  queries train/validation/test: {}/{}/{}",
            self.num_tables, self.num_queries[0], self.num_queries[1], self.num_queries[2]
        );
        let _ = writeln!(s, "candidate recall@{} (test): {:.4}", self.topk, self.test_candidate_recall);
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<22} {:<20} {:>8} {:>8} {:>6} {:>6}", "configuration", "aspects", "MAP", "P@1", "eval", "filt");
        for r in &self.rows {
            let m = |v: Option<f64>| v.map_or_else(|| "undef".to_string(), |x| format!("{x:.4}"));
            let _ = writeln!(
                s,
                "{:<22} {:<20} {:>8} {:>8} {:>6} {:>6}",
                r.label,
                r.aspects,
                m(r.report.map),
                m(r.report.p_at_1),
                r.report.num_queries_evaluated,
                r.report.num_queries_filtered
            );
        }
        let _ = writeln!(s);
        s.push_str(&self.primary_row().report.to_text());
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("configuration,features,aspects,map,p_at_1,evaluated,filtered\n");
        for r in &self.rows {
            let m = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| x.to_string());
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.label,
                r.features,
                r.aspects,
                m(r.report.map),
                m(r.report.p_at_1),
                r.report.num_queries_evaluated,
                r.report.num_queries_filtered
            );
        }
        s
    }

    /// Writes `report.json`, `report.txt`, `summary.csv` and per-row
    /// precision/recall and query-length CSV files into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: String, text: String| {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        put("report.json".into(), serde_json::to_string_pretty(self).expect("serializable") + "\n")?;
        put("report.txt".into(), self.to_text())?;
        put("summary.csv".into(), self.summary_csv())?;
        for r in &self.rows {
            let slug = slug(&r.label);
            put(format!("pr_curve.{slug}.csv"), r.report.pr_csv())?;
            put(format!("length_buckets.{slug}.csv"), r.report.buckets_csv())?;
        }
        let p = self.primary_row();
        put("pr_curve.csv".into(), p.report.pr_csv())?;
        put("length_buckets.csv".into(), p.report.buckets_csv())
    }
}

fn slug(label: &str) -> String {
    label
        .chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a PathBuf> {
    p.as_ref()
        .ok_or_else(|| Error::Config(format!("a {what} file is required for the enabled features")))
}

/// Evaluates the test split and fills in the threshold curve and length buckets.
pub fn evaluate_results(label: &str, results: &[RankedResult], lengths: &[usize], filter: FilterRule, pr_steps: usize) -> Result<EvalReport> {
    let mut report = evaluate(results, filter);
    report.label = label.to_string();
    let kept: Vec<(RankedResult, usize)> = results
        .iter()
        .zip(lengths)
        .filter(|(r, _)| passes_filter(r, filter))
        .map(|(r, &l)| (r.clone(), l))
        .collect();
    let (kept, lens): (Vec<RankedResult>, Vec<usize>) = kept.into_iter().unzip();
    report.pr_points = pr_curve(&kept, &default_thresholds(&kept, pr_steps))?;
    report.length_buckets = length_bucket_report(&kept, &lens);
    Ok(report)
}

/// Trained resources shared by every evaluated configuration.
struct Trained {
    designed: Option<DesignedResources>,
    neural: Option<NeuralModels>,
}

fn train_encoder(cfg: &PipelineConfig, models_dir: &Path) -> Result<SubwordEncoderParams> {
    if let Some(p) = &cfg.encoder {
        return SubwordEncoderParams::load(p);
    }
    let pairs: Vec<(Vec<String>, Vec<String>)> = load_pairs(required(&cfg.paraphrases, "paraphrase")?)?
        .into_iter()
        .map(|(a, b)| (tokenize(&a), tokenize(&b)))
        .collect();
    let config = SubwordTrainConfig {
        seed: derive_seed(cfg.seed, "train-cdssm"),
        ..cfg.subword
    };
    let out = train_subword_encoder(&pairs, &config)?;
    log::info!("sub-word encoder loss trace {:?}", out.loss_trace);
    out.params.save(models_dir.join("subword.bin"))?;
    write_json(&models_dir.join("subword.loss.json"), &out.loss_trace)?;
    Ok(out.params)
}

/// Labeled training pairs: every relevant table plus sampled negatives.
pub fn neural_training_pairs(
    queries: &[LabeledQuery],
    candidates: &[Vec<(String, f64)>],
    corpus: &Corpus,
    negatives: usize,
    seed: u64,
) -> Vec<(usize, String, bool)> {
    let mut rng = seeded_rng(seed);
    let corpus_ids: Vec<String> = corpus.iter().map(|t| t.id.clone()).collect();
    let mut out = Vec::new();
    for (qi, (q, cands)) in queries.iter().zip(candidates).enumerate() {
        let relevant: Vec<String> = q.relevant.iter().filter(|id| corpus.get(id).is_some()).cloned().collect();
        if relevant.is_empty() {
            continue;
        }
        let cand_ids: Vec<String> = cands.iter().map(|(id, _)| id.clone()).collect();
        for r in &relevant {
            out.push((qi, r.clone(), true));
            for n in sample_negatives(&q.relevant, &cand_ids, &corpus_ids, negatives, &mut rng) {
                out.push((qi, n, false));
            }
        }
    }
    out
}

/// Trains the requested aspect models on the given queries. Negatives come
/// from each query's candidates; the vocabulary covers the corpus, the
/// training queries and any pretrained word vectors of matching dimension.
pub fn train_neural_models(
    corpus: &Corpus,
    queries: &[LabeledQuery],
    candidates: &[Vec<(String, f64)>],
    embeddings: Option<&EmbeddingTable>,
    config: &NeuralTrainConfig,
    kinds: &[AspectKind],
) -> Result<Vec<TrainedAspectModel>> {
    let pairs = neural_training_pairs(
        queries,
        candidates,
        corpus,
        config.negatives,
        derive_seed(config.seed, "negatives"),
    );
    let data: Vec<NeuralExample> = pairs
        .iter()
        .map(|(qi, id, label)| NeuralExample {
            query: &queries[*qi].query.tokens,
            table: corpus.get(id).expect("sampled from corpus"),
            label: *label,
        })
        .collect();
    let mut words: BTreeSet<String> = corpus.iter().flat_map(table_words).collect();
    words.extend(queries.iter().flat_map(|q| q.query.tokens.iter().cloned()));
    let pretrained = embeddings.filter(|e| {
        let ok = e.dim() == config.shape.embed_dim;
        if !ok {
            log::warn!(
                "word vectors have dimension {}, neural models use {}; embeddings start random",
                e.dim(),
                config.shape.embed_dim
            );
        }
        ok
    });
    if let Some(e) = pretrained {
        words.extend(e.words().map(str::to_string));
    }
    let vocab = Vocabulary::new(words);
    let init = ModelInit {
        vocab: Some(&vocab),
        pretrained,
    };
    kinds
        .par_iter()
        .map(|&kind| train_aspect_model(&data, kind, config, init))
        .collect()
}

pub fn model_path(dir: &Path, kind: AspectKind) -> PathBuf {
    dir.join(format!("nn_{kind}.bin"))
}

/// Loads `nn_<aspect>.bin` for every aspect from `dir`.
pub fn load_neural_models(dir: &Path) -> Result<NeuralModels> {
    NeuralModels::new(
        AspectKind::ALL
            .iter()
            .map(|&k| AspectModel::load(model_path(dir, k)))
            .collect::<Result<Vec<_>>>()?,
    )
}

/// Saves the models and a JSON file of their loss traces.
pub fn save_neural_models(trained: &[TrainedAspectModel], dir: &Path) -> Result<()> {
    let mut traces = serde_json::Map::new();
    for t in trained {
        t.model.save(model_path(dir, t.model.kind))?;
        traces.insert(t.model.kind.to_string(), serde_json::json!(t.loss_trace));
    }
    write_json(&dir.join("nn.loss.json"), &traces)
}

/// Runs the whole pipeline and returns the report of the primary
/// configuration.
pub fn run_pipeline(config: &PipelineConfig) -> Result<EvalReport> {
    Ok(run_pipeline_full(config)?.primary_row().report.clone())
}

/// Runs the whole pipeline and returns every evaluated configuration.
pub fn run_pipeline_full(cfg: &PipelineConfig) -> Result<PipelineReport> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let out = &cfg.out_dir;
    let index_dir = out.join("index");
    let models_dir = out.join("models");
    let ranker_dir = out.join("ranker");
    for d in [out, &index_dir, &models_dir, &ranker_dir] {
        mkdir(d)?;
    }
    write_json(&out.join("config.json"), cfg)?;

    let stage = |name: &'static str| move |e: Error| e.in_stage(name);

    // ingest
    let loaded = load_corpus(&cfg.corpus).map_err(stage("ingest"))?;
    if !loaded.rejected.is_empty() {
        log::warn!("{} irregular tables rejected", loaded.rejected.len());
    }
    let corpus = loaded.corpus;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus.in_stage("ingest"));
    }
    save_corpus(&corpus, out.join("corpus.jsonl")).map_err(stage("ingest"))?;
    let queries = load_queries(&cfg.queries).map_err(stage("ingest"))?;

    // statistics and index
    let stats = build_stats(&corpus, AspectSet::all()).map_err(stage("stats"))?;
    stats.save(index_dir.join("stats.txt")).map_err(stage("stats"))?;
    let index = Bm25Index::build(&corpus, cfg.index_aspects, cfg.bm25).map_err(stage("build-index"))?;
    index.save(index_dir.join("bm25.json")).map_err(stage("build-index"))?;

    // split and candidates
    let (train, validation, test) =
        split_dataset(&queries, cfg.split, derive_seed(cfg.seed, "split")).map_err(stage("split"))?;
    let ids = |qs: &[LabeledQuery]| qs.iter().map(|q| q.query.id.clone()).collect::<Vec<_>>();
    write_json(
        &out.join("splits.json"),
        &serde_json::json!({"train": ids(&train), "validation": ids(&validation), "test": ids(&test)}),
    )?;
    let train_candidates: Vec<Vec<(String, f64)>> = train.iter().map(|q| index.retrieve_topk(&q.query, cfg.topk)).collect();

    // matchers
    let needs = cfg.needs();
    let designed = if needs.designed {
        let encoder = train_encoder(cfg, &models_dir).map_err(stage("train-cdssm"))?;
        let phrases = PhraseTable::load(required(&cfg.phrase_table, "phrase table").map_err(stage("featurize"))?)
            .map_err(stage("featurize"))?;
        let embeddings = EmbeddingTable::load(required(&cfg.embeddings, "embedding").map_err(stage("featurize"))?)
            .map_err(stage("featurize"))?;
        Some(DesignedResources {
            stats: Some(stats.clone()),
            phrases: Some(phrases),
            embeddings: Some(embeddings),
            encoder: Some(encoder),
            max_order: DEFAULT_MAX_ORDER,
        })
    } else {
        None
    };
    let neural = if needs.neural {
        let loaded_emb;
        let emb = match (&designed, &cfg.embeddings) {
            (Some(d), _) => d.embeddings.as_ref(),
            (None, Some(p)) => {
                loaded_emb = EmbeddingTable::load(p).map_err(stage("train-nn"))?;
                Some(&loaded_emb)
            }
            (None, None) => None,
        };
        let config = NeuralTrainConfig {
            seed: derive_seed(cfg.seed, "train-nn"),
            ..cfg.neural
        };
        let trained = train_neural_models(&corpus, &train, &train_candidates, emb, &config, &AspectKind::ALL)
            .map_err(stage("train-nn"))?;
        save_neural_models(&trained, &models_dir).map_err(stage("train-nn"))?;
        Some(NeuralModels::new(trained.into_iter().map(|t| t.model).collect()).map_err(stage("train-nn"))?)
    } else {
        None
    };
    let trained = Trained { designed, neural };

    // featurize every split
    let featurizer = Featurizer {
        corpus: &corpus,
        index: &index,
        designed: trained.designed.as_ref(),
        neural: trained.neural.as_ref(),
    };
    let schema = featurizer.schema();
    let featurize = |qs: &[LabeledQuery]| featurizer.featurize_all(qs, cfg.topk).map_err(stage("featurize"));
    let (f_train, f_val, f_test) = (featurize(&train)?, featurize(&validation)?, featurize(&test)?);
    FeatureFile {
        schema: schema.clone(),
        queries: f_train.iter().chain(&f_val).chain(&f_test).cloned().collect(),
    }
    .save(out.join("features.jsonl"))
    .map_err(stage("featurize"))?;

    // rank and evaluate
    let lengths: Vec<usize> = test.iter().map(|q| q.query.tokens.len()).collect();
    let mut rows = Vec::new();
    for (label, families, aspects) in cfg.variants() {
        let row = evaluate_variant(cfg, &label, families, aspects, &schema, [&f_train, &f_val, &f_test], &lengths, &ranker_dir)?;
        rows.push(row);
    }
    let primary = match cfg.mode {
        PipelineMode::Single => rows[0].label.clone(),
        PipelineMode::Compare => FeatureFamilies {
            designed: true,
            neural: true,
        }
        .label()
        .to_string(),
        PipelineMode::Ablation => AspectSet::all().label(),
    };
    let report = PipelineReport {
        mode: cfg.mode,
        primary,
        num_tables: corpus.len(),
        num_queries: [train.len(), validation.len(), test.len()],
        topk: cfg.topk,
        test_candidate_recall: candidate_recall(&index, &test, cfg.topk).map_err(stage("evaluate"))?,
        rows,
    };
    report.write(&out.join("report")).map_err(stage("report"))?;
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn evaluate_variant(
    cfg: &PipelineConfig,
    label: &str,
    families: FeatureFamilies,
    aspects: AspectSet,
    schema: &FeatureSchema,
    [f_train, f_val, f_test]: [&Vec<QueryFeatures>; 3],
    lengths: &[usize],
    ranker_dir: &Path,
) -> Result<ReportRow> {
    let stage = |name: &'static str| move |e: Error| e.in_stage(name);
    let (results, train_map, validation_map) = if !families.designed && !families.neural {
        let col = schema.position(crate::features::BM25_FEATURE).expect("bm25 column");
        (f_test.iter().map(|q| q.rank_by_column(col)).collect::<Vec<_>>(), None, None)
    } else {
        let sub = FeatureSchema::build(families, aspects);
        let cols = sub.projection_from(schema).map_err(stage("train-ranker"))?;
        let groups = |fs: &[QueryFeatures]| -> Vec<QueryGroup> {
            fs.iter().map(|q| q.to_group(&cols)).filter(|g| !g.is_empty()).collect()
        };
        let (g_train, g_val) = (groups(f_train), groups(f_val));
        let ranker = LambdaMartConfig {
            seed: derive_seed(cfg.seed, "train-ranker"),
            ..cfg.ranker
        };
        let fit = fit_lambdamart_traced(&g_train, Some(&g_val), sub, &ranker).map_err(stage("train-ranker"))?;
        fit.forest
            .save(ranker_dir.join(format!("{}.forest", slug(label))))
            .map_err(stage("train-ranker"))?;
        let results = f_test
            .iter()
            .map(|q| q.rank_with(&fit.forest, &cols))
            .collect::<Result<Vec<_>>>()
            .map_err(stage("evaluate"))?;
        (results, fit.train_map.last().copied(), fit.validation_map.last().copied())
    };
    let report = evaluate_results(label, &results, lengths, cfg.filter, cfg.pr_steps).map_err(stage("evaluate"))?;
    Ok(ReportRow {
        label: label.to_string(),
        features: families.label().to_string(),
        aspects: aspects.label(),
        train_map,
        validation_map,
        report,
    })
}
