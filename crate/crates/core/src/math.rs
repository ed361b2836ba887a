//! Small numeric helpers shared by the trainable encoders.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stage seed from a root seed and a label.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    crate::text::fnv1a(label.as_bytes()) ^ root.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

pub fn uniform_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-scale..=scale))
}

pub fn uniform_vector(rng: &mut impl Rng, len: usize, scale: f64) -> Array1<f64> {
    Array1::from_shape_simple_fn(len, || rng.random_range(-scale..=scale))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax of a slice, computed with the max shift.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// `m += a ⊗ b`.
pub fn add_outer(m: &mut Array2<f64>, a: ArrayView1<f64>, b: ArrayView1<f64>) {
    for (mut row, &ai) in m.rows_mut().into_iter().zip(a.iter()) {
        if ai != 0.0 {
            row.scaled_add(ai, &b);
        }
    }
}

pub fn concat(parts: &[ArrayView1<f64>]) -> Array1<f64> {
    let mut out = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
    for p in parts {
        out.extend(p.iter().copied());
    }
    Array1::from(out)
}

pub fn norm(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

/// Cosine similarity and its gradients with respect to both arguments.
/// Zero-norm inputs give similarity 0 and zero gradients.
pub fn cosine_with_grad(a: ArrayView1<f64>, b: ArrayView1<f64>) -> (f64, Array1<f64>, Array1<f64>) {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return (0.0, Array1::zeros(a.len()), Array1::zeros(b.len()));
    }
    let c = a.dot(&b) / (na * nb);
    let ga = &b / (na * nb) - &a * (c / (na * na));
    let gb = &a / (na * nb) - &b * (c / (nb * nb));
    (c, ga, gb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!((sigmoid(800.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1000.0, 1000.0, 999.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((p[0] - p[1]).abs() < 1e-15);
    }

    #[test]
    fn cosine_grad_matches_finite_difference() {
        let a = array![0.3, -1.2, 0.7];
        let b = array![1.1, 0.4, -0.5];
        let (_, ga, gb) = cosine_with_grad(a.view(), b.view());
        let eps = 1e-6;
        for i in 0..3 {
            let mut ap = a.clone();
            ap[i] += eps;
            let mut am = a.clone();
            am[i] -= eps;
            let fd = (cosine_with_grad(ap.view(), b.view()).0 - cosine_with_grad(am.view(), b.view()).0) / (2.0 * eps);
            assert!((fd - ga[i]).abs() < 1e-8);
            let mut bp = b.clone();
            bp[i] += eps;
            let mut bm = b.clone();
            bm[i] -= eps;
            let fd = (cosine_with_grad(a.view(), bp.view()).0 - cosine_with_grad(a.view(), bm.view()).0) / (2.0 * eps);
            assert!((fd - gb[i]).abs() < 1e-8);
        }
    }
}
