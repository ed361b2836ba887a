mod common;

use common::phrase_cases;
use proptest::prelude::*;
use tabret::features::*;
use tabret::table::{AspectSet, Corpus, Table};
use tabret::text::{build_stats, CorpusStats};

/// Statistics in which `a` and `b` always co-occur, so their IDF is equal.
fn stats() -> CorpusStats {
    let t = |id: &str, caption: &str| Table {
        id: id.into(),
        headers: vec!["h".into()],
        cells: vec![vec!["v".into()]],
        caption: Some(caption.into()),
    };
    let corpus = Corpus::from_tables([t("1", "a b"), t("2", "a b c"), t("3", "c d"), t("4", "d e")]).unwrap();
    build_stats(&corpus, AspectSet::all()).unwrap()
}

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

#[test]
fn overlap_identity_and_disjoint_cases() {
    let s = stats();
    for dir in [Direction::TowardTable, Direction::TowardQuery] {
        assert_eq!(word_overlap(&toks("a c"), &toks("c a"), &s, dir), 1.0);
        assert_eq!(word_overlap(&toks("a b"), &toks("d e"), &s, dir), 0.0);
    }
    // aspect words all inside the query
    assert_eq!(word_overlap(&toks("a"), &toks("a b c d"), &s, Direction::TowardTable), 1.0);
}

#[test]
fn overlap_half_and_full() {
    let s = stats();
    assert!((s.idf("a") - s.idf("b")).abs() < 1e-15);
    let half = word_overlap(&toks("a b"), &toks("a"), &s, Direction::TowardTable);
    let full = word_overlap(&toks("a b"), &toks("a"), &s, Direction::TowardQuery);
    assert!((half - 0.5).abs() < 1e-12);
    assert!((full - 1.0).abs() < 1e-12);
}

#[test]
fn paraphrase_feature_matches_hand_sums() {
    for case in phrase_cases() {
        let got = f_pp(&case.aspect, &case.query, &case.table(), 3);
        assert!((got - case.expected).abs() < 1e-12, "{}: {got} vs {}", case.name, case.expected);
    }
}

#[test]
fn embedding_average_cosine() {
    let mut emb = EmbeddingTable::new(2).unwrap();
    emb.insert("x", vec![1.0, 0.0]).unwrap();
    emb.insert("y", vec![0.0, 1.0]).unwrap();
    let v = avg_embedding_similarity(&toks("x y"), &toks("x"), &emb);
    assert!((v - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    assert!((avg_embedding_similarity(&toks("x y"), &toks("x y"), &emb) - 1.0).abs() < 1e-12);
    assert_eq!(avg_embedding_similarity(&toks("x"), &toks("oov"), &emb), 0.0);
}

#[test]
fn missing_caption_gives_zero_caption_features() {
    let table = Table {
        id: "t".into(),
        headers: vec!["a".into()],
        cells: vec![vec!["b".into()]],
        caption: None,
    };
    let mut pt = PhraseTable::new();
    pt.insert("a", "t", 1.0, 1.0).unwrap();
    let mut emb = EmbeddingTable::new(2).unwrap();
    emb.insert("a", vec![1.0, 0.5]).unwrap();
    let res = DesignedResources {
        stats: Some(stats()),
        phrases: Some(pt),
        embeddings: Some(emb),
        encoder: Some(SubwordEncoderParams::random(SubwordEncoderConfig::default(), 1)),
        max_order: 3,
    };
    let v = designed_feature_vector(&toks("a"), &table, &res).unwrap();
    assert_eq!(&v[10..15], &[0.0; 5]);
    // header "a" matches the query exactly
    assert_eq!(v[0], 1.0);
    assert_eq!(v[1], 1.0);
    assert!((v[2] - 1.0 / 3.0).abs() < 1e-12);
    assert!((v[4] - 1.0).abs() < 1e-12);

    let incomplete = DesignedResources {
        phrases: None,
        ..res
    };
    let err = designed_feature_vector(&toks("a"), &table, &incomplete).unwrap_err();
    assert!(err.to_string().contains("phrase table"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn overlap_is_bounded_and_swaps_with_direction(
        a in proptest::collection::vec("[a-e]", 0..6),
        q in proptest::collection::vec("[a-e]", 0..6),
    ) {
        let s = stats();
        let wmt = word_overlap(&a, &q, &s, Direction::TowardTable);
        let wmq = word_overlap(&a, &q, &s, Direction::TowardQuery);
        prop_assert!((0.0..=1.0).contains(&wmt) && (0.0..=1.0).contains(&wmq));
        prop_assert!((wmt - word_overlap(&q, &a, &s, Direction::TowardQuery)).abs() < 1e-12);
    }

    #[test]
    fn paraphrase_feature_is_non_negative_and_zero_without_table(
        a in proptest::collection::vec("[a-c]", 0..6),
        q in proptest::collection::vec("[a-c]", 0..6),
        probs in proptest::collection::vec(0.0f64..1.0, 6),
    ) {
        let mut pt = PhraseTable::new();
        for (i, (src, tgt)) in [("a", "t"), ("b", "t"), ("c", "u"), ("a b", "v"), ("b c", "v"), ("a b c", "w")].iter().enumerate() {
            pt.insert(src, tgt, probs[i], probs[(i + 1) % 6]).unwrap();
        }
        prop_assert!(f_pp(&a, &q, &pt, 3) >= 0.0);
        prop_assert_eq!(f_pp(&a, &q, &PhraseTable::new(), 3), 0.0);
    }
}
