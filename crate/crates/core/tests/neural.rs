mod common;

use common::{permuted, random_table, small_model, WORDS};
use rand::seq::SliceRandom;
use rand::Rng;
use tabret::math::seeded_rng;
use tabret::neural::*;
use tabret::table::Table;
use tabret::text::tokenize;

#[test]
fn gradients_match_finite_differences_for_every_aspect() {
    let mut rng = seeded_rng(5);
    let tables: Vec<Table> = (0..3).map(|i| random_table(&mut rng, i)).collect();
    let queries: Vec<Vec<String>> = vec![tokenize("alpha river city"), tokenize("team score"), tokenize("peak")];
    let examples: Vec<NeuralExample> = (0..3)
        .map(|i| NeuralExample {
            query: &queries[i],
            table: &tables[i],
            label: i % 2 == 0,
        })
        .collect();
    for (k, kind) in AspectKind::ALL.into_iter().enumerate() {
        let model = small_model(kind, 100 + k as u64);
        let report = gradient_check(&model, &examples, 1e-5).unwrap();
        for t in &report.tensors {
            assert!(t.coordinates >= 1);
            assert!(t.max_rel_error < 1e-4, "{kind} {} rel error {}", t.name, t.max_rel_error);
        }
    }
}

#[test]
fn corrupted_reset_gradient_is_detected() {
    let mut rng = seeded_rng(6);
    let table = random_table(&mut rng, 0);
    let q = tokenize("alpha beta gamma");
    let ex = [NeuralExample {
        query: &q,
        table: &table,
        label: true,
    }];
    let model = small_model(AspectKind::Header, 3);
    let report = gradient_check_with(&model, &ex, 1e-5, |g| {
        g.query_fwd.u_r.mapv_inplace(|x| x * 1.5 + 1e-3);
    })
    .unwrap();
    let u_r = report.tensors.iter().find(|t| t.name == "query_fwd.u_r").unwrap();
    assert!(u_r.max_rel_error > 1e-2);
}

#[test]
fn zero_parameters_do_not_blow_up() {
    let mut rng = seeded_rng(7);
    let table = random_table(&mut rng, 0);
    let q = tokenize("alpha");
    let ex = [
        NeuralExample {
            query: &q,
            table: &table,
            label: true,
        },
        NeuralExample {
            query: &q,
            table: &table,
            label: false,
        },
    ];
    let mut model = small_model(AspectKind::Cell, 1);
    for (_, t) in model.params.named_tensors_mut() {
        t.fill(0.0);
    }
    let report = gradient_check(&model, &ex, 1e-5).unwrap();
    assert!(report.max_rel_error.is_finite());
    assert!(report.max_rel_error < 1e-4);
}

fn marker_data(rng: &mut impl Rng, n: usize) -> (Vec<Table>, Vec<Vec<String>>, Vec<bool>) {
    let mut tables = Vec::new();
    let mut queries = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let mut t = random_table(rng, i);
        let positive = i % 4 == 0;
        let marker = ["zeta", "kappa", "sigma"][rng.random_range(0..3)];
        if positive {
            let c = rng.random_range(0..t.headers.len());
            t.headers[c] = marker.to_string();
            t.cells[0][c] = marker.to_string();
            t.caption = Some(format!("{marker} {}", t.caption.unwrap()));
        }
        let mut q = vec![marker.to_string(), WORDS[rng.random_range(0..WORDS.len())].to_string()];
        q.shuffle(rng);
        tables.push(t);
        queries.push(q);
        labels.push(positive);
    }
    (tables, queries, labels)
}

#[test]
fn training_reduces_loss_and_separates_markers() {
    let mut rng = seeded_rng(8);
    let (tables, queries, labels) = marker_data(&mut rng, 200);
    let (held_t, held_q, held_l) = marker_data(&mut rng, 80);
    let data: Vec<NeuralExample> = (0..tables.len())
        .map(|i| NeuralExample {
            query: &queries[i],
            table: &tables[i],
            label: labels[i],
        })
        .collect();
    let vocab = Vocabulary::new(WORDS.iter().copied().chain(["zeta", "kappa", "sigma"]));
    let config = NeuralTrainConfig {
        shape: ModelShape {
            embed_dim: 16,
            hidden_dim: 16,
            init_scale: 0.08,
        },
        epochs: 20,
        learning_rate: 0.2,
        batch_size: 16,
        ..Default::default()
    };
    for kind in [AspectKind::Header, AspectKind::Caption] {
        let init = ModelInit {
            vocab: Some(&vocab),
            pretrained: None,
        };
        let a = train_aspect_model(&data, kind, &config, init).unwrap();
        let b = train_aspect_model(&data, kind, &config, init).unwrap();
        assert_eq!(a.loss_trace, b.loss_trace);
        assert!(a.loss_trace.last().unwrap() < &a.loss_trace[0], "{kind}: {:?}", a.loss_trace);

        let score = |i: usize| a.model.score(&held_q[i], &held_t[i]).unwrap();
        let pos: Vec<f64> = (0..held_t.len()).filter(|&i| held_l[i]).map(score).collect();
        let neg: Vec<f64> = (0..held_t.len()).filter(|&i| !held_l[i]).map(score).collect();
        let mut wins = 0;
        for p in &pos {
            wins += neg.iter().filter(|n| p > n).count();
        }
        let frac = wins as f64 / (pos.len() * neg.len()) as f64;
        assert!(frac >= 0.9, "{kind}: held-out pairwise accuracy {frac}");
    }
}

#[test]
fn single_class_data_is_rejected() {
    let mut rng = seeded_rng(9);
    let t = random_table(&mut rng, 0);
    let q = tokenize("alpha");
    let data = [NeuralExample {
        query: &q,
        table: &t,
        label: true,
    }];
    assert!(train_aspect_model(&data, AspectKind::Row, &NeuralTrainConfig::default(), ModelInit::default()).is_err());
}

#[test]
fn memory_scores_ignore_row_and_column_order() {
    let mut rng = seeded_rng(10);
    for i in 0..20 {
        let t = random_table(&mut rng, i);
        let perm = permuted(&t, &mut rng);
        let q = tokenize("alpha city team");
        for kind in [AspectKind::Header, AspectKind::Cell, AspectKind::Row, AspectKind::Column] {
            let m = small_model(kind, i as u64);
            let a = m.score(&q, &t).unwrap();
            let b = m.score(&q, &perm).unwrap();
            assert!((a - b).abs() < 1e-9, "{kind}: {a} vs {b}");
        }
    }
}
