mod common;

use std::fs;
use std::path::Path;

use tabret::features::FeatureFamilies;
use tabret::pipeline::{run_pipeline, run_pipeline_full, PipelineConfig, PipelineMode};
use tabret::ranker::Forest;
use tabret::synth::{generate, SynthConfig};
use tabret::table::{Aspect, AspectSet};

fn small_data(dir: &Path) {
    generate(&SynthConfig {
        num_tables: 60,
        num_queries: 20,
        embedding_dim: 16,
        seed: 4,
        ..Default::default()
    })
    .unwrap()
    .write(dir)
    .unwrap();
}

fn quick_config(data: &Path, out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::with_data_dir(data, out);
    cfg.neural.epochs = 2;
    cfg.neural.shape.embed_dim = 16;
    cfg.neural.shape.hidden_dim = 8;
    cfg.subword.epochs = 1;
    cfg.ranker.num_trees = 15;
    cfg
}

fn report_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir.join("report"))
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn full_run_writes_every_artifact_and_repeats_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_data(&data);
    let a = tmp.path().join("a");
    let report = run_pipeline(&quick_config(&data, &a)).unwrap();
    assert_eq!(report.label, "Feature + NeuralNet");
    for f in [
        "config.json",
        "corpus.jsonl",
        "splits.json",
        "features.jsonl",
        "index/bm25.json",
        "index/stats.txt",
        "models/subword.bin",
        "models/nn_header.bin",
        "models/nn_caption.bin",
        "ranker/feature_neuralnet.forest",
        "report/report.json",
        "report/report.txt",
        "report/pr_curve.csv",
        "report/length_buckets.csv",
        "report/summary.csv",
    ] {
        assert!(a.join(f).exists(), "{f} missing");
    }

    let b = tmp.path().join("b");
    run_pipeline(&quick_config(&data, &b)).unwrap();
    assert_eq!(report_files(&a), report_files(&b));
    assert_eq!(fs::read(a.join("features.jsonl")).unwrap(), fs::read(b.join("features.jsonl")).unwrap());
}

#[test]
fn designed_only_run_is_labelled_feature() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_data(&data);
    let mut cfg = quick_config(&data, &tmp.path().join("out"));
    cfg.families = FeatureFamilies {
        designed: true,
        neural: false,
    };
    let report = run_pipeline(&cfg).unwrap();
    assert_eq!(report.label, "Feature");
    assert!(!tmp.path().join("out/models/nn_header.bin").exists());
}

#[test]
fn header_only_aspects_restrict_the_ranker_features() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_data(&data);
    let mut cfg = quick_config(&data, &tmp.path().join("out"));
    cfg.aspects = AspectSet::only(Aspect::Headers);
    run_pipeline(&cfg).unwrap();
    let forest = Forest::load(tmp.path().join("out/ranker/feature_neuralnet.forest")).unwrap();
    assert_eq!(
        forest.schema.names,
        ["bm25", "headers.wmt", "headers.wmq", "headers.pp", "headers.s1", "headers.s2", "nn.header"]
    );
}

#[test]
fn compare_and_ablation_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_data(&data);
    let mut cfg = quick_config(&data, &tmp.path().join("cmp"));
    cfg.mode = PipelineMode::Compare;
    let cmp = run_pipeline_full(&cfg).unwrap();
    let labels: Vec<&str> = cmp.rows.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels, ["BM25", "Feature", "NeuralNet", "Feature + NeuralNet"]);
    assert_eq!(cmp.primary, "Feature + NeuralNet");
    assert!(cmp.rows[0].train_map.is_none());

    cfg.out_dir = tmp.path().join("abl");
    cfg.mode = PipelineMode::Ablation;
    let abl = run_pipeline_full(&cfg).unwrap();
    let labels: Vec<&str> = abl.rows.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels, ["H", "Cel", "Cap", "H+Cel", "H+Cel+Cap"]);
    let csv = fs::read_to_string(tmp.path().join("abl/report/summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn failures_name_their_stage_and_keep_earlier_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_data(&data);
    fs::write(data.join("phrase_table.txt"), "a ||| b ||| not-a-number 1\n").unwrap();
    let out = tmp.path().join("out");
    let err = run_pipeline(&quick_config(&data, &out)).unwrap_err();
    assert!(err.to_string().starts_with("stage `featurize` failed"), "{err}");
    assert!(out.join("index/bm25.json").exists());
    assert!(out.join("models/subword.bin").exists());

    let mut cfg = quick_config(&data, &out);
    cfg.corpus = tmp.path().join("missing.jsonl");
    assert!(run_pipeline(&cfg).unwrap_err().to_string().starts_with("stage `config` failed"));

    let mut cfg = quick_config(&data, &out);
    cfg.families = FeatureFamilies {
        designed: false,
        neural: false,
    };
    assert!(run_pipeline(&cfg).is_err());
}
