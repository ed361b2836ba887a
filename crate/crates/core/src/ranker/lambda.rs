//! Lambda gradients driven by the change in average precision.

/// Candidate order under `scores`: descending, ties by position.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Average precision of a ranked label list over the positives it contains;
/// 0 when there are none.
pub fn list_average_precision(ranked_labels: impl IntoIterator<Item = bool>) -> f64 {
    let (mut hits, mut sum, mut n) = (0usize, 0.0, 0usize);
    for label in ranked_labels {
        n += 1;
        if label {
            hits += 1;
            sum += hits as f64 / n as f64;
        }
    }
    if hits == 0 {
        0.0
    } else {
        sum / hits as f64
    }
}

/// Lambdas and the matching second-order weights.
///
/// For every positive `p` and negative `n`, with `ρ = 1 / (1 + e^(s_p - s_n))`
/// (the logistic of `s_n - s_p`) and `Δ` the exact change of average precision
/// when the two swap ranks, `λ = |Δ|·ρ` is added to `p` and subtracted from
/// `n`; the weight `|Δ|·ρ·(1-ρ)` is added to both. The weights are the
/// Newton denominators used for leaf values.
pub fn lambdas_and_weights(scores: &[f64], labels: &[bool]) -> (Vec<f64>, Vec<f64>) {
    let n = scores.len();
    let mut lambdas = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == n {
        return (lambdas, weights);
    }
    let order = ranking(scores);
    let mut ranked: Vec<bool> = order.iter().map(|&i| labels[i]).collect();
    let base = list_average_precision(ranked.iter().copied());
    for rp in 0..n {
        if !ranked[rp] {
            continue;
        }
        for rn in 0..n {
            if ranked[rn] {
                continue;
            }
            let (p, q) = (order[rp], order[rn]);
            ranked.swap(rp, rn);
            let delta = (list_average_precision(ranked.iter().copied()) - base).abs();
            ranked.swap(rp, rn);
            let rho = 1.0 / (1.0 + (scores[p] - scores[q]).exp());
            let lambda = delta * rho;
            lambdas[p] += lambda;
            lambdas[q] -= lambda;
            let w = delta * rho * (1.0 - rho);
            weights[p] += w;
            weights[q] += w;
        }
    }
    (lambdas, weights)
}

/// Per-candidate lambda gradients; zero for a list with a single label value.
pub fn compute_lambdas(scores: &[f64], labels: &[bool]) -> Vec<f64> {
    lambdas_and_weights(scores, labels).0
}
