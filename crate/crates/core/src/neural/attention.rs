use ndarray::{s, Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::math::softmax;

/// Concat-tanh attention scorer: `α_i ∝ exp(tanh(w · [m_i; v_q] + b))`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub w: Array1<f64>,
    /// Stored as a one-element vector so every parameter is a tensor.
    pub b: Array1<f64>,
}

pub(crate) struct AttentionCache {
    pub(crate) scores: Vec<f64>,
    pub(crate) weights: Vec<f64>,
    pub(crate) read: Array1<f64>,
}

impl AttentionParams {
    pub fn zeros(memory_dim: usize, query_dim: usize) -> Self {
        Self {
            w: Array1::zeros(memory_dim + query_dim),
            b: Array1::zeros(1),
        }
    }

    pub(crate) fn forward(&self, memory: &[Array1<f64>], v_q: &Array1<f64>) -> AttentionCache {
        let mem_dim = memory[0].len();
        let w_m = self.w.slice(s![..mem_dim]);
        let w_q = self.w.slice(s![mem_dim..]);
        let q_part = w_q.dot(v_q) + self.b[0];
        let scores: Vec<f64> = memory.iter().map(|m| (w_m.dot(m) + q_part).tanh()).collect();
        let weights = softmax(&scores);
        let mut read = Array1::zeros(mem_dim);
        for (m, &a) in memory.iter().zip(&weights) {
            read.scaled_add(a, m);
        }
        AttentionCache {
            scores,
            weights,
            read,
        }
    }

    /// Returns gradients of each memory vector and of the query vector.
    pub(crate) fn backward(
        &self,
        memory: &[Array1<f64>],
        v_q: &Array1<f64>,
        cache: &AttentionCache,
        d_read: ArrayView1<f64>,
        grads: &mut AttentionParams,
    ) -> (Vec<Array1<f64>>, Array1<f64>) {
        let mem_dim = memory[0].len();
        let w_m = self.w.slice(s![..mem_dim]);
        let w_q = self.w.slice(s![mem_dim..]);
        let d_alpha: Vec<f64> = memory.iter().map(|m| d_read.dot(m)).collect();
        let mean: f64 = cache.weights.iter().zip(&d_alpha).map(|(a, d)| a * d).sum();
        let mut d_memory = Vec::with_capacity(memory.len());
        let mut d_vq = Array1::zeros(v_q.len());
        for (i, m) in memory.iter().enumerate() {
            let a = cache.weights[i];
            let d_score = a * (d_alpha[i] - mean);
            let d_pre = d_score * (1.0 - cache.scores[i] * cache.scores[i]);
            grads.w.slice_mut(s![..mem_dim]).scaled_add(d_pre, m);
            grads.w.slice_mut(s![mem_dim..]).scaled_add(d_pre, v_q);
            grads.b[0] += d_pre;
            let mut d_m = d_read.to_owned() * a;
            d_m.scaled_add(d_pre, &w_m);
            d_memory.push(d_m);
            d_vq.scaled_add(d_pre, &w_q);
        }
        (d_memory, d_vq)
    }
}

/// Attention weights over the memory and the weighted read vector.
pub fn attention_read(
    memory: &[Array1<f64>],
    v_q: &Array1<f64>,
    params: &AttentionParams,
) -> Result<(Vec<f64>, Array1<f64>)> {
    if memory.is_empty() {
        return Err(Error::Shape("attention over an empty memory".into()));
    }
    let mem_dim = memory[0].len();
    if memory.iter().any(|m| m.len() != mem_dim) || params.w.len() != mem_dim + v_q.len() {
        return Err(Error::Shape(format!(
            "attention expects [{mem_dim} + {}] inputs, weight has {}",
            v_q.len(),
            params.w.len()
        )));
    }
    let c = params.forward(memory, v_q);
    Ok((c.weights, c.read))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{seeded_rng, uniform_vector};
    use ndarray::array;

    fn params(seed: u64, mem: usize, q: usize) -> AttentionParams {
        let mut rng = seeded_rng(seed);
        AttentionParams {
            w: uniform_vector(&mut rng, mem + q, 1.0),
            b: array![0.1],
        }
    }

    #[test]
    fn singleton_memory() {
        let m = vec![array![0.5, -1.0]];
        let (w, read) = attention_read(&m, &array![1.0], &params(1, 2, 1)).unwrap();
        assert_eq!(w, vec![1.0]);
        assert_eq!(read, m[0]);
    }

    #[test]
    fn identical_cells_share_weight() {
        let m = vec![array![0.5, -1.0], array![0.5, -1.0]];
        let (w, _) = attention_read(&m, &array![1.0], &params(2, 2, 1)).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn permutation_equivariance() {
        let mut rng = seeded_rng(9);
        let m: Vec<_> = (0..5).map(|_| uniform_vector(&mut rng, 3, 1.0)).collect();
        let q = uniform_vector(&mut rng, 2, 1.0);
        let p = params(3, 3, 2);
        let (w, read) = attention_read(&m, &q, &p).unwrap();
        let perm = [3, 0, 4, 1, 2];
        let mp: Vec<_> = perm.iter().map(|&i| m[i].clone()).collect();
        let (wp, readp) = attention_read(&mp, &q, &p).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            assert!((wp[k] - w[i]).abs() < 1e-15);
        }
        assert!((&read - &readp).iter().all(|d| d.abs() < 1e-12));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|a| (0.0..=1.0).contains(a)));
    }

    #[test]
    fn empty_memory_errors() {
        assert!(attention_read(&[], &array![1.0], &params(1, 2, 1)).is_err());
    }
}
