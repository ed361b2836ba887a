use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tabret::error::{Error, Result};
use tabret::eval::{default_thresholds, pr_csv, pr_curve, FilterRule, RankedResult};
use tabret::featurize::{FeatureFile, Featurizer};
use tabret::features::{
    load_pairs, train_subword_encoder, DesignedResources, EmbeddingTable, FeatureFamilies, FeatureSchema,
    PhraseTable, SubwordEncoderParams, SubwordTrainConfig, BM25_FEATURE, DEFAULT_MAX_ORDER,
};
use tabret::index::{Bm25Index, Bm25Params};
use tabret::math::derive_seed;
use tabret::neural::{AspectKind, ModelShape, NeuralTrainConfig};
use tabret::pipeline::{
    evaluate_results, load_neural_models, run_pipeline_full, save_neural_models, train_neural_models,
    PipelineConfig, PipelineMode,
};
use tabret::ranker::{fit_lambdamart_traced, Forest, LambdaMartConfig, QueryGroup};
use tabret::synth::{generate, SynthConfig};
use tabret::table::{load_corpus, load_queries, save_corpus, AspectSet, Corpus};
use tabret::text::{build_stats, tokenize, CorpusStats};

#[derive(Parser)]
#[command(name = "tabret", version, about = "Two-stage table retrieval: BM25 candidates, learned re-ranking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus, queries and resources.
    Synth(SynthArgs),
    /// Validate a corpus and write the regular tables.
    Ingest(IngestArgs),
    /// Build corpus statistics and the BM25 index.
    BuildIndex(BuildIndexArgs),
    /// Retrieve top-k candidates for each query.
    Retrieve(RetrieveArgs),
    /// Train the sub-word sentence encoder on paraphrase pairs.
    TrainCdssm(TrainCdssmArgs),
    /// Train the neural aspect models.
    TrainNn(TrainNnArgs),
    /// Compute candidate feature vectors.
    Featurize(FeaturizeArgs),
    /// Train a LambdaMART forest on a feature file.
    TrainRanker(TrainRankerArgs),
    /// Rank a feature file and report MAP, P@1 and the CSV sidecars.
    Evaluate(EvaluateArgs),
    /// Precision and recall of answered queries over score thresholds.
    PrCurve(PrCurveArgs),
    /// Run every stage end to end.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 200)]
    tables: usize,
    #[arg(long, default_value_t = 60)]
    queries: usize,
    #[arg(long, default_value_t = 64)]
    embedding_dim: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Where to write the regular tables.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone, Copy)]
struct Bm25Args {
    #[arg(long, default_value_t = tabret::index::DEFAULT_K1)]
    k1: f64,
    #[arg(long, default_value_t = tabret::index::DEFAULT_B)]
    b: f64,
}

impl Bm25Args {
    fn params(self) -> Bm25Params {
        Bm25Params { k1: self.k1, b: self.b }
    }
}

#[derive(Args)]
struct BuildIndexArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Aspects indexed, e.g. `caption,headers`.
    #[arg(long, default_value = "headers,cells,caption")]
    aspects: AspectSet,
    #[command(flatten)]
    bm25: Bm25Args,
    /// Directory receiving `bm25.json` and `stats.txt`.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RetrieveArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, default_value_t = tabret::index::DEFAULT_TOPK)]
    topk: usize,
    /// JSON lines output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainCdssmArgs {
    /// Tab separated `text<TAB>paraphrase` lines.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    #[arg(long, default_value_t = 4)]
    negatives: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args, Clone, Copy)]
struct NeuralArgs {
    #[arg(long, default_value_t = 20)]
    nn_epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    nn_learning_rate: f64,
    /// Negatives sampled per relevant table.
    #[arg(long, default_value_t = 4)]
    nn_negatives: usize,
    #[arg(long, default_value_t = 64)]
    nn_embed_dim: usize,
    #[arg(long, default_value_t = 64)]
    nn_hidden_dim: usize,
}

impl NeuralArgs {
    fn config(self, seed: u64) -> NeuralTrainConfig {
        NeuralTrainConfig {
            shape: ModelShape {
                embed_dim: self.nn_embed_dim,
                hidden_dim: self.nn_hidden_dim,
                ..ModelShape::default()
            },
            learning_rate: self.nn_learning_rate,
            epochs: self.nn_epochs,
            negatives: self.nn_negatives,
            seed,
            ..NeuralTrainConfig::default()
        }
    }
}

#[derive(Args)]
struct TrainNnArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Training queries with relevance labels.
    #[arg(long)]
    queries: PathBuf,
    /// BM25 index used to draw negatives.
    #[arg(long)]
    index: PathBuf,
    #[arg(long, default_value_t = tabret::index::DEFAULT_TOPK)]
    topk: usize,
    /// Aspect models to train; all when absent.
    #[arg(long, value_delimiter = ',')]
    aspect: Vec<AspectKind>,
    /// Pretrained word vectors used to initialize embeddings.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[command(flatten)]
    nn: NeuralArgs,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct FeaturizeArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    index: PathBuf,
    #[arg(long, default_value_t = tabret::index::DEFAULT_TOPK)]
    topk: usize,
    /// Feature families, e.g. `designed,neural`.
    #[arg(long, default_value = "designed,neural")]
    features: FeatureFamilies,
    #[arg(long)]
    phrase_table: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Trained sub-word encoder.
    #[arg(long)]
    encoder: Option<PathBuf>,
    /// Directory holding `nn_<aspect>.bin`.
    #[arg(long)]
    models_dir: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone, Copy)]
struct RankerArgs {
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long, default_value_t = 16)]
    leaves: usize,
    #[arg(long, default_value_t = 0.1)]
    shrinkage: f64,
    #[arg(long, default_value_t = 1)]
    min_leaf: usize,
    #[arg(long, default_value_t = 1.0)]
    subsample: f64,
}

impl RankerArgs {
    fn config(self, seed: u64) -> LambdaMartConfig {
        LambdaMartConfig {
            num_trees: self.trees,
            max_leaves: self.leaves,
            learning_rate: self.shrinkage,
            min_instances_per_leaf: self.min_leaf,
            subsample: self.subsample,
            seed,
        }
    }
}

#[derive(Args)]
struct TrainRankerArgs {
    #[arg(long)]
    feature_file: PathBuf,
    /// Feature file used to trace validation MAP.
    #[arg(long)]
    validation: Option<PathBuf>,
    /// Feature families given to the ranker.
    #[arg(long, default_value = "designed,neural")]
    features: FeatureFamilies,
    #[arg(long, default_value = "headers,cells,caption")]
    aspects: AspectSet,
    #[command(flatten)]
    ranker: RankerArgs,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterArg {
    On,
    Off,
}

impl From<FilterArg> for FilterRule {
    fn from(f: FilterArg) -> Self {
        match f {
            FilterArg::On => FilterRule::On,
            FilterArg::Off => FilterRule::Off,
        }
    }
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    feature_file: PathBuf,
    /// Forest to rank with; candidates keep their BM25 order when absent.
    #[arg(long)]
    forest: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FilterArg::On)]
    filter: FilterArg,
    #[arg(long, default_value_t = 21)]
    pr_steps: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PrCurveArgs {
    #[arg(long)]
    feature_file: PathBuf,
    #[arg(long)]
    forest: Option<PathBuf>,
    /// Explicit ascending thresholds; evenly spaced over the top scores when absent.
    #[arg(long, value_delimiter = ',')]
    thresholds: Vec<f64>,
    #[arg(long, default_value_t = 21)]
    steps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Single,
    Compare,
    Ablation,
}

#[derive(Args)]
struct PipelineArgs {
    /// Directory with the standard resource file names; individual flags override it.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long)]
    phrase_table: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    paraphrases: Option<PathBuf>,
    #[arg(long)]
    encoder: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = tabret::index::DEFAULT_TOPK)]
    topk: usize,
    #[command(flatten)]
    bm25: Bm25Args,
    /// Aspects indexed for candidate retrieval.
    #[arg(long, default_value = "headers,cells,caption")]
    index_aspects: AspectSet,
    /// Aspects whose features reach the ranker.
    #[arg(long, default_value = "headers,cells,caption")]
    aspects: AspectSet,
    #[arg(long, default_value = "designed,neural")]
    features: FeatureFamilies,
    #[arg(long, value_enum, default_value_t = ModeArg::Single)]
    mode: ModeArg,
    #[command(flatten)]
    ranker: RankerArgs,
    #[command(flatten)]
    nn: NeuralArgs,
    #[arg(long, default_value_t = 5)]
    cdssm_epochs: usize,
    #[arg(long, value_enum, default_value_t = FilterArg::On)]
    filter: FilterArg,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a).map_err(|e| e.in_stage("synth")),
        Command::Ingest(a) => ingest(a).map_err(|e| e.in_stage("ingest")),
        Command::BuildIndex(a) => build_index(a).map_err(|e| e.in_stage("build-index")),
        Command::Retrieve(a) => retrieve(a).map_err(|e| e.in_stage("retrieve")),
        Command::TrainCdssm(a) => train_cdssm(a).map_err(|e| e.in_stage("train-cdssm")),
        Command::TrainNn(a) => train_nn(a).map_err(|e| e.in_stage("train-nn")),
        Command::Featurize(a) => featurize(a).map_err(|e| e.in_stage("featurize")),
        Command::TrainRanker(a) => train_ranker(a).map_err(|e| e.in_stage("train-ranker")),
        Command::Evaluate(a) => evaluate_cmd(a).map_err(|e| e.in_stage("evaluate")),
        Command::PrCurve(a) => pr_curve_cmd(a).map_err(|e| e.in_stage("pr-curve")),
        Command::Pipeline(a) => pipeline(a),
    }
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::Io {
        path: p.to_path_buf(),
        source: e,
    })
}

fn write_file(p: &Path, text: &str) -> Result<()> {
    fs::write(p, text).map_err(|e| Error::Io {
        path: p.to_path_buf(),
        source: e,
    })
}

fn synth(a: SynthArgs) -> Result<()> {
    let data = generate(&SynthConfig {
        num_tables: a.tables,
        num_queries: a.queries,
        embedding_dim: a.embedding_dim,
        seed: a.seed,
        ..SynthConfig::default()
    })?;
    data.write(&a.out_dir)?;
    println!("wrote {} tables and {} queries to {}", data.corpus.len(), data.queries.len(), a.out_dir.display());
    Ok(())
}

fn load_regular(path: &Path) -> Result<Corpus> {
    let loaded = load_corpus(path)?;
    for r in &loaded.rejected {
        log::warn!("table {} rejected: {}", r.table_id, r.violations.join("; "));
    }
    if loaded.corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(loaded.corpus)
}

fn ingest(a: IngestArgs) -> Result<()> {
    let loaded = load_corpus(&a.corpus)?;
    save_corpus(&loaded.corpus, &a.out)?;
    println!("{} regular tables kept, {} rejected", loaded.corpus.len(), loaded.rejected.len());
    for r in &loaded.rejected {
        println!("  {}: {}", r.table_id, r.violations.join("; "));
    }
    Ok(())
}

fn build_index(a: BuildIndexArgs) -> Result<()> {
    let corpus = load_regular(&a.corpus)?;
    mkdir(&a.out_dir)?;
    build_stats(&corpus, AspectSet::all())?.save(a.out_dir.join("stats.txt"))?;
    let index = Bm25Index::build(&corpus, a.aspects, a.bm25.params())?;
    index.save(a.out_dir.join("bm25.json"))?;
    println!("indexed {} tables over {}", index.num_docs(), a.aspects);
    Ok(())
}

fn retrieve(a: RetrieveArgs) -> Result<()> {
    let index = Bm25Index::load(&a.index)?;
    let queries = load_queries(&a.queries)?;
    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(BufWriter::new(fs::File::create(p).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        })?)),
        None => Box::new(std::io::stdout().lock()),
    };
    let path = a.out.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    for q in &queries {
        let line = serde_json::json!({
            "query_id": q.query.id,
            "candidates": index.retrieve_topk(&q.query, a.topk),
        });
        match writeln!(out, "{line}") {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => return Ok(()),
            Err(e) => return Err(Error::Io { path, source: e }),
        }
    }
    out.flush().map_err(|e| Error::Io { path, source: e })
}

fn train_cdssm(a: TrainCdssmArgs) -> Result<()> {
    let pairs: Vec<(Vec<String>, Vec<String>)> = load_pairs(&a.pairs)?
        .into_iter()
        .map(|(x, y)| (tokenize(&x), tokenize(&y)))
        .collect();
    let config = SubwordTrainConfig {
        epochs: a.epochs,
        learning_rate: a.learning_rate,
        negatives: a.negatives,
        seed: a.seed,
        ..SubwordTrainConfig::default()
    };
    let out = train_subword_encoder(&pairs, &config)?;
    out.params.save(&a.out)?;
    println!("loss per epoch: {:?}", out.loss_trace);
    Ok(())
}

fn train_nn(a: TrainNnArgs) -> Result<()> {
    let corpus = load_regular(&a.corpus)?;
    let queries = load_queries(&a.queries)?;
    let index = Bm25Index::load(&a.index)?;
    let candidates: Vec<_> = queries.iter().map(|q| index.retrieve_topk(&q.query, a.topk)).collect();
    let embeddings = a.embeddings.as_ref().map(EmbeddingTable::load).transpose()?;
    let kinds = if a.aspect.is_empty() { AspectKind::ALL.to_vec() } else { a.aspect.clone() };
    let config = a.nn.config(a.seed);
    let trained = train_neural_models(&corpus, &queries, &candidates, embeddings.as_ref(), &config, &kinds)?;
    mkdir(&a.out_dir)?;
    save_neural_models(&trained, &a.out_dir)?;
    for t in &trained {
        println!("{}: final loss {:.6}", t.model.kind, t.loss_trace.last().copied().unwrap_or(f64::NAN));
    }
    Ok(())
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a PathBuf> {
    p.as_ref()
        .ok_or_else(|| Error::Config(format!("--{flag} is required for the selected features")))
}

fn featurize(a: FeaturizeArgs) -> Result<()> {
    if !a.features.designed && !a.features.neural {
        log::info!("no learned features selected; only the BM25 column is written");
    }
    let corpus = load_regular(&a.corpus)?;
    let queries = load_queries(&a.queries)?;
    let index = Bm25Index::load(&a.index)?;
    let designed = if a.features.designed {
        let stats: CorpusStats = build_stats(&corpus, AspectSet::all())?;
        Some(DesignedResources {
            stats: Some(stats),
            phrases: Some(PhraseTable::load(required(&a.phrase_table, "phrase-table")?)?),
            embeddings: Some(EmbeddingTable::load(required(&a.embeddings, "embeddings")?)?),
            encoder: Some(SubwordEncoderParams::load(required(&a.encoder, "encoder")?)?),
            max_order: DEFAULT_MAX_ORDER,
        })
    } else {
        None
    };
    let neural = if a.features.neural {
        Some(load_neural_models(required(&a.models_dir, "models-dir")?)?)
    } else {
        None
    };
    let featurizer = Featurizer {
        corpus: &corpus,
        index: &index,
        designed: designed.as_ref(),
        neural: neural.as_ref(),
    };
    let file = FeatureFile {
        schema: featurizer.schema(),
        queries: featurizer.featurize_all(&queries, a.topk)?,
    };
    file.save(&a.out)?;
    println!("{} queries, {} features each", file.queries.len(), file.schema.len());
    Ok(())
}

fn groups_of(file: &FeatureFile, columns: &[usize]) -> Vec<QueryGroup> {
    file.queries
        .iter()
        .map(|q| q.to_group(columns))
        .filter(|g| !g.is_empty())
        .collect()
}

fn train_ranker(a: TrainRankerArgs) -> Result<()> {
    if !a.features.designed && !a.features.neural {
        return Err(Error::Config("enable at least one feature family (designed, neural)".into()));
    }
    let train = FeatureFile::load(&a.feature_file)?;
    let schema = FeatureSchema::build(a.features, a.aspects);
    let cols = schema.projection_from(&train.schema)?;
    let validation = a
        .validation
        .as_ref()
        .map(|p| -> Result<_> {
            let f = FeatureFile::load(p)?;
            Ok(groups_of(&f, &schema.projection_from(&f.schema)?))
        })
        .transpose()?;
    let fit = fit_lambdamart_traced(&groups_of(&train, &cols), validation.as_deref(), schema, &a.ranker.config(a.seed))?;
    fit.forest.save(&a.out)?;
    if let Some(m) = fit.train_map.last() {
        println!("train MAP {m:.4}");
    }
    if let Some(m) = fit.validation_map.last() {
        println!("validation MAP {m:.4}");
    }
    Ok(())
}

/// Ranks every query of a feature file, by the forest or by BM25.
fn rank_file(file: &FeatureFile, forest: Option<&Path>) -> Result<Vec<RankedResult>> {
    match forest {
        Some(p) => {
            let forest = Forest::load(p)?;
            let cols = forest.schema.projection_from(&file.schema)?;
            file.queries.iter().map(|q| q.rank_with(&forest, &cols)).collect()
        }
        None => {
            let col = file
                .schema
                .position(BM25_FEATURE)
                .ok_or_else(|| Error::Format("feature file has no bm25 column".into()))?;
            Ok(file.queries.iter().map(|q| q.rank_by_column(col)).collect())
        }
    }
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<()> {
    let file = FeatureFile::load(&a.feature_file)?;
    let results = rank_file(&file, a.forest.as_deref())?;
    let lengths: Vec<usize> = file.queries.iter().map(|q| tokenize(&q.query_text).len()).collect();
    let label = match &a.forest {
        Some(_) => "forest",
        None => "BM25",
    };
    let report = evaluate_results(label, &results, &lengths, a.filter.into(), a.pr_steps)?;
    mkdir(&a.out_dir)?;
    let json = serde_json::to_string_pretty(&report).expect("serializable") + "\n";
    write_file(&a.out_dir.join("report.json"), &json)?;
    write_file(&a.out_dir.join("report.txt"), &report.to_text())?;
    write_file(&a.out_dir.join("pr_curve.csv"), &report.pr_csv())?;
    write_file(&a.out_dir.join("length_buckets.csv"), &report.buckets_csv())?;
    print!("{}", report.to_text());
    Ok(())
}

fn pr_curve_cmd(a: PrCurveArgs) -> Result<()> {
    let file = FeatureFile::load(&a.feature_file)?;
    let results = rank_file(&file, a.forest.as_deref())?;
    let kept: Vec<RankedResult> = results
        .into_iter()
        .filter(|r| tabret::eval::passes_filter(r, FilterRule::On))
        .collect();
    let thresholds = if a.thresholds.is_empty() {
        default_thresholds(&kept, a.steps)
    } else {
        a.thresholds.clone()
    };
    let csv = pr_csv(&pr_curve(&kept, &thresholds)?);
    match &a.out {
        Some(p) => write_file(p, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn pipeline(a: PipelineArgs) -> Result<()> {
    let mut cfg = match &a.data_dir {
        Some(d) => PipelineConfig::with_data_dir(d, &a.out_dir),
        None => {
            let corpus = a
                .corpus
                .clone()
                .ok_or_else(|| Error::Config("--corpus or --data-dir is required".into()).in_stage("config"))?;
            let queries = a
                .queries
                .clone()
                .ok_or_else(|| Error::Config("--queries or --data-dir is required".into()).in_stage("config"))?;
            PipelineConfig::new(corpus, queries, &a.out_dir)
        }
    };
    if let Some(p) = a.corpus {
        cfg.corpus = p;
    }
    if let Some(p) = a.queries {
        cfg.queries = p;
    }
    for (slot, value) in [
        (&mut cfg.phrase_table, a.phrase_table),
        (&mut cfg.embeddings, a.embeddings),
        (&mut cfg.paraphrases, a.paraphrases),
        (&mut cfg.encoder, a.encoder),
    ] {
        if value.is_some() {
            *slot = value;
        }
    }
    cfg.topk = a.topk;
    cfg.bm25 = a.bm25.params();
    cfg.index_aspects = a.index_aspects;
    cfg.aspects = a.aspects;
    cfg.families = a.features;
    cfg.mode = match a.mode {
        ModeArg::Single => PipelineMode::Single,
        ModeArg::Compare => PipelineMode::Compare,
        ModeArg::Ablation => PipelineMode::Ablation,
    };
    cfg.ranker = a.ranker.config(derive_seed(a.seed, "train-ranker"));
    cfg.neural = a.nn.config(derive_seed(a.seed, "train-nn"));
    cfg.subword.epochs = a.cdssm_epochs;
    cfg.filter = a.filter.into();
    cfg.seed = a.seed;
    let report = run_pipeline_full(&cfg)?;
    print!("{}", report.to_text());
    println!("report written to {}", cfg.out_dir.join("report").display());
    Ok(())
}
