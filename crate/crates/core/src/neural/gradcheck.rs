//! Finite-difference verification of the analytic gradients.

use std::collections::BTreeSet;

use rand::seq::index::sample;

use super::model::{AspectModel, AspectParams, Prepared};
use super::train::NeuralExample;
use crate::error::{Error, Result};
use crate::math::seeded_rng;

/// Coordinates checked per tensor when it is too large to check exhaustively.
pub const SAMPLED_COORDINATES: usize = 48;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub coordinates: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub tensors: Vec<TensorCheck>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares backpropagated gradients of the mean loss on `examples` with
/// central differences `(f(θ+ε) - f(θ-ε)) / 2ε`.
pub fn gradient_check(model: &AspectModel, examples: &[NeuralExample<'_>], epsilon: f64) -> Result<GradCheckReport> {
    gradient_check_with(model, examples, epsilon, |_| {})
}

/// Like [`gradient_check`], but `tamper` may alter the analytic gradient
/// before comparison; used to confirm that the check catches broken gradients.
#[doc(hidden)]
pub fn gradient_check_with(
    model: &AspectModel,
    examples: &[NeuralExample<'_>],
    epsilon: f64,
    tamper: impl FnOnce(&mut AspectParams),
) -> Result<GradCheckReport> {
    if !(epsilon > 0.0) {
        return Err(Error::Config("epsilon must be positive".into()));
    }
    let prepared: Vec<Prepared> = examples
        .iter()
        .filter_map(|e| model.prepare(e.query, e.table, e.label))
        .collect();
    let mut grads = AspectParams::zeros_like(&model.params);
    model.loss(&prepared, Some(&mut grads));
    tamper(&mut grads);

    let used_rows: BTreeSet<u32> = prepared
        .iter()
        .flat_map(|p| {
            p.query_ids
                .iter()
                .chain(&p.caption_ids)
                .copied()
                .chain(p.memory.iter().flatten().map(|&(id, _)| id))
        })
        .collect();
    let d = model.params.embed_dim();

    let mut probe = model.clone();
    let mut rng = seeded_rng(0x6772_6164);
    let analytic = grads.named_tensors();
    let mut tensors = Vec::with_capacity(analytic.len());
    for (t, (name, g)) in analytic.iter().enumerate() {
        let candidates: Vec<usize> = if name == "emb" {
            used_rows
                .iter()
                .flat_map(|&r| (0..d).map(move |c| r as usize * d + c))
                .collect()
        } else {
            (0..g.len()).collect()
        };
        let chosen: Vec<usize> = if candidates.len() <= SAMPLED_COORDINATES {
            candidates
        } else {
            let mut idx: Vec<usize> = sample(&mut rng, candidates.len(), SAMPLED_COORDINATES)
                .into_iter()
                .map(|i| candidates[i])
                .collect();
            idx.sort_unstable();
            idx
        };
        let mut worst: f64 = 0.0;
        for &i in &chosen {
            let original = probe.params.named_tensors()[t].1[i];
            let mut loss_at = |x: f64| {
                probe.params.named_tensors_mut()[t].1[i] = x;
                probe.loss(&prepared, None)
            };
            let up = loss_at(original + epsilon);
            let down = loss_at(original - epsilon);
            loss_at(original);
            let numeric = (up - down) / (2.0 * epsilon);
            worst = worst.max(relative_error(g[i], numeric));
        }
        tensors.push(TensorCheck {
            name: name.clone(),
            coordinates: chosen.len(),
            max_rel_error: worst,
        });
    }
    let max_rel_error = tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport { max_rel_error, tensors })
}
