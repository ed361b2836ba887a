//! Neural query-table matching: a bi-directional GRU query encoder read
//! against attention memories (headers, cells, rows, columns) or against a
//! second encoder over the caption.

pub mod attention;
pub mod gradcheck;
pub mod gru;
pub mod model;
pub mod train;

pub use attention::{attention_read, AttentionParams};
pub use gradcheck::{gradient_check, gradient_check_with, relative_error, GradCheckReport, TensorCheck};
pub use gru::{gru_step, GruParams};
pub use model::{
    build_memories, neural_feature_vector, AspectKind, AspectModel, AspectParams, HeadParams, ModelShape,
    NeuralModels, TableMemories, Vocabulary, UNK,
};
pub use train::{
    evaluate_loss, sample_negatives, train_aspect_model, vocabulary_of, ModelInit, NeuralExample,
    NeuralTrainConfig, TrainedAspectModel,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::Table;
    use crate::text::tokenize;
    use ndarray::{array, Array2};

    fn grid_table() -> Table {
        Table {
            id: "t".into(),
            headers: vec!["city".into(), "country".into()],
            cells: vec![
                vec!["paris".into(), "france".into()],
                vec!["".into(), "spain".into()],
            ],
            caption: Some("european capitals".into()),
        }
    }

    fn shape() -> ModelShape {
        ModelShape {
            embed_dim: 4,
            hidden_dim: 3,
            init_scale: 0.5,
        }
    }

    fn model(kind: AspectKind, seed: u64) -> AspectModel {
        let t = grid_table();
        let mut words = crate::neural::train::table_words(&t);
        words.extend(tokenize("list of flights london to berlin"));
        AspectModel::new_random(kind, Vocabulary::new(words), shape(), seed, None).unwrap()
    }

    #[test]
    fn vocabulary_reserves_unknown_row() {
        let v = Vocabulary::new(["b", "a", "a", UNK]);
        assert_eq!(v.words(), &[UNK, "a", "b"]);
        assert_eq!(v.id("zzz"), 0);
        assert_eq!(v.id("b"), 2);
    }

    #[test]
    fn memories_of_two_by_two() {
        let t = grid_table();
        let vocab = Vocabulary::new(["paris", "france", "spain", "city", "country"]);
        let mut emb = Array2::zeros((vocab.len(), 2));
        for (w, v) in [("paris", [1.0, 0.0]), ("france", [0.0, 1.0]), ("spain", [2.0, 2.0])] {
            emb.row_mut(vocab.id(w) as usize).assign(&array![v[0], v[1]]);
        }
        let m = build_memories(&t, &vocab, &emb);
        assert_eq!((m.headers.len(), m.cells.len(), m.rows.len(), m.columns.len()), (2, 4, 2, 2));
        assert_eq!(m.cells[2], array![0.0, 0.0]);
        assert_eq!(m.rows[0], array![0.5, 0.5]);
        assert_eq!(m.rows[1], array![1.0, 1.0]);
        assert_eq!(m.columns[0], array![0.5, 0.0]);
        assert_eq!(m.columns[1], array![1.0, 1.5]);
    }

    #[test]
    fn single_cell_table_has_one_vector_per_memory() {
        let t = Table {
            id: "x".into(),
            headers: vec!["a".into()],
            cells: vec![vec!["b".into()]],
            caption: None,
        };
        let vocab = Vocabulary::new(["a", "b"]);
        let m = build_memories(&t, &vocab, &Array2::ones((3, 2)));
        assert_eq!((m.headers.len(), m.cells.len(), m.rows.len(), m.columns.len()), (1, 1, 1, 1));
    }

    #[test]
    fn query_encoding_is_order_sensitive() {
        let m = model(AspectKind::Header, 3);
        let q = tokenize("list of flights london to berlin");
        let mut r = q.clone();
        r.reverse();
        let a = m.encode_query(&q).unwrap();
        let b = m.encode_query(&r).unwrap();
        assert_eq!(a.len(), 6);
        assert!((&a - &b).iter().any(|d| d.abs() > 1e-6));
        assert_eq!(a, m.encode_query(&q).unwrap());
        assert!(m.encode_query::<String>(&[]).is_err());
    }

    #[test]
    fn zero_output_layer_gives_half() {
        let t = grid_table();
        let mut models = Vec::new();
        for kind in AspectKind::ALL {
            let mut m = model(kind, 11);
            m.params.out_w.fill(0.0);
            models.push(m);
        }
        let models = NeuralModels::new(models).unwrap();
        let f = neural_feature_vector(&tokenize("paris city"), &t, &models).unwrap();
        assert_eq!(f, [0.5; 5]);

        let mut no_caption = t.clone();
        no_caption.caption = None;
        let f = neural_feature_vector(&tokenize("paris city"), &no_caption, &models).unwrap();
        assert_eq!(f[4], 0.0);
    }

    #[test]
    fn scores_are_probabilities_and_empty_memory_is_zero() {
        let m = model(AspectKind::Cell, 5);
        let v_q = m.encode_query(&tokenize("paris")).unwrap();
        assert_eq!(m.nn1_score(&[], &v_q).unwrap(), 0.0);
        let s = m.score(&tokenize("paris france"), &grid_table()).unwrap();
        assert!(s > 0.0 && s < 1.0);
        let cap = model(AspectKind::Caption, 5);
        assert_eq!(cap.nn2_caption_score::<String, _>(&[], &tokenize("paris")).unwrap(), 0.0);
        assert!(cap.nn1_score(&[], &v_q).is_err());
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        for kind in [AspectKind::Row, AspectKind::Caption] {
            let m = model(kind, 21);
            let path = dir.path().join(format!("{kind}.bin"));
            m.save(&path).unwrap();
            let back = AspectModel::load(&path).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn negatives_prefer_candidates_then_corpus() {
        let ids: Vec<String> = (0..10).map(|i| format!("t{i}")).collect();
        let mut rng = crate::math::seeded_rng(1);
        let rel = vec!["t0".to_string()];
        let cands = vec!["t0".to_string(), "t1".to_string(), "t2".to_string()];
        let neg = sample_negatives(&rel, &cands, &ids, 4, &mut rng);
        assert_eq!(neg.len(), 4);
        assert!(neg.contains(&"t1".to_string()) && neg.contains(&"t2".to_string()));
        assert!(!neg.contains(&"t0".to_string()));
        let uniq: std::collections::HashSet<_> = neg.iter().collect();
        assert_eq!(uniq.len(), 4);
    }
}
