//! Ranking metrics, the evaluation filter, precision/recall threshold
//! curves, query-length buckets and dataset splitting.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::Bm25Index;
use crate::math::seeded_rng;
use crate::table::LabeledQuery;

/// Queries with fewer occurrences of a length than this share a bucket.
pub const MIN_BUCKET_QUERIES: usize = 5;

/// Ranked candidates of one query with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    pub query_id: String,
    /// `(table_id, score)`, best first.
    pub candidates: Vec<(String, f64)>,
    pub relevant: Vec<String>,
}

impl RankedResult {
    pub fn top_is_relevant(&self) -> bool {
        self.candidates
            .first()
            .is_some_and(|(id, _)| self.relevant.contains(id))
    }

    fn any_relevant_retrieved(&self) -> bool {
        self.candidates.iter().any(|(id, _)| self.relevant.contains(id))
    }
}

/// Mean of precision at the rank of each relevant table; relevant tables
/// missing from the list count as 0 but stay in the denominator.
pub fn average_precision(result: &RankedResult) -> Result<f64> {
    let relevant: HashSet<&str> = result.relevant.iter().map(String::as_str).collect();
    if relevant.is_empty() {
        return Err(Error::Config(format!("query {} has no relevant tables", result.query_id)));
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, (id, _)) in result.candidates.iter().enumerate() {
        if relevant.contains(id.as_str()) {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / relevant.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterRule {
    /// Drop queries with at most one candidate or no retrieved relevant table.
    On,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    /// `None` when no query is answered at this threshold.
    pub precision: Option<f64>,
    pub recall: f64,
    pub answered: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthBucket {
    /// `"3"` for an exact length, `"8-11"` for merged rare lengths.
    pub label: String,
    pub min_len: usize,
    pub max_len: usize,
    pub queries: usize,
    pub p_at_1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub label: String,
    /// `None` when every query was filtered.
    pub map: Option<f64>,
    pub p_at_1: Option<f64>,
    pub num_queries_evaluated: usize,
    pub num_queries_filtered: usize,
    pub per_query_ap: Vec<(String, f64)>,
    pub length_buckets: Vec<LengthBucket>,
    pub pr_points: Vec<PrPoint>,
}

fn fmt_metric(m: Option<f64>) -> String {
    m.map_or_else(|| "undefined".to_string(), |v| format!("{:.4}", v))
}

impl EvalReport {
    pub fn num_queries_total(&self) -> usize {
        self.num_queries_evaluated + self.num_queries_filtered
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "configuration: {}", self.label);
        let _ = writeln!(s, "MAP:  {}", fmt_metric(self.map));
        let _ = writeln!(s, "P@1:  {}", fmt_metric(self.p_at_1));
        let _ = writeln!(
            s,
            "queries: {} evaluated, {} filtered",
            self.num_queries_evaluated, self.num_queries_filtered
        );
        if !self.length_buckets.is_empty() {
            let _ = writeln!(s, "P@1 by query length:");
            for b in &self.length_buckets {
                let _ = writeln!(s, "  {:>6}  n={:<4} {:.4}", b.label, b.queries, b.p_at_1);
            }
        }
        s
    }

    pub fn pr_csv(&self) -> String {
        pr_csv(&self.pr_points)
    }

    pub fn buckets_csv(&self) -> String {
        let mut s = String::from("length,min_len,max_len,queries,p_at_1\n");
        for b in &self.length_buckets {
            let _ = writeln!(s, "{},{},{},{},{}", b.label, b.min_len, b.max_len, b.queries, b.p_at_1);
        }
        s
    }
}

pub fn pr_csv(points: &[PrPoint]) -> String {
    let mut s = String::from("threshold,precision,recall,answered\n");
    for p in points {
        let prec = p.precision.map_or_else(|| "undefined".to_string(), |v| v.to_string());
        let _ = writeln!(s, "{},{},{},{}", p.threshold, prec, p.recall, p.answered);
    }
    s
}

/// Whether the filter keeps a result.
pub fn passes_filter(result: &RankedResult, rule: FilterRule) -> bool {
    if result.relevant.is_empty() {
        return false;
    }
    match rule {
        FilterRule::Off => true,
        FilterRule::On => result.candidates.len() > 1 && result.any_relevant_retrieved(),
    }
}

/// MAP and P@1 over the results kept by `filter`. Queries without any
/// relevant table are always counted as filtered.
pub fn evaluate(results: &[RankedResult], filter: FilterRule) -> EvalReport {
    let kept: Vec<&RankedResult> = results.iter().filter(|r| passes_filter(r, filter)).collect();
    let per_query_ap: Vec<(String, f64)> = kept
        .iter()
        .map(|r| (r.query_id.clone(), average_precision(r).unwrap_or(0.0)))
        .collect();
    let n = kept.len();
    let (map, p_at_1) = if n == 0 {
        (None, None)
    } else {
        let map = per_query_ap.iter().map(|(_, ap)| ap).sum::<f64>() / n as f64;
        let p1 = kept.iter().filter(|r| r.top_is_relevant()).count() as f64 / n as f64;
        (Some(map), Some(p1))
    };
    EvalReport {
        label: String::new(),
        map,
        p_at_1,
        num_queries_evaluated: n,
        num_queries_filtered: results.len() - n,
        per_query_ap,
        length_buckets: Vec::new(),
        pr_points: Vec::new(),
    }
}

/// Fraction of queries with a relevant table among the first-stage top `k`.
pub fn candidate_recall(index: &Bm25Index, queries: &[LabeledQuery], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if queries.is_empty() {
        return Ok(0.0);
    }
    let found = queries
        .iter()
        .filter(|q| {
            index
                .retrieve_topk(&q.query, k)
                .iter()
                .any(|(id, _)| q.relevant.contains(id))
        })
        .count();
    Ok(found as f64 / queries.len() as f64)
}

/// A query is answered at `τ` when its top score exceeds `τ`, and correct when
/// that top table is relevant. Precision is over answered queries, recall over
/// all queries.
pub fn pr_curve(results: &[RankedResult], thresholds: &[f64]) -> Result<Vec<PrPoint>> {
    if thresholds.windows(2).any(|w| w[0] > w[1]) || thresholds.iter().any(|t| t.is_nan()) {
        return Err(Error::Config("thresholds must be sorted ascending".into()));
    }
    let total = results.len();
    Ok(thresholds
        .iter()
        .map(|&threshold| {
            let answered: Vec<&RankedResult> = results
                .iter()
                .filter(|r| r.candidates.first().is_some_and(|(_, s)| *s > threshold))
                .collect();
            let correct = answered.iter().filter(|r| r.top_is_relevant()).count();
            PrPoint {
                threshold,
                precision: (!answered.is_empty()).then(|| correct as f64 / answered.len() as f64),
                recall: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
                answered: answered.len(),
            }
        })
        .collect())
}

/// `n` evenly spaced thresholds spanning the top scores of `results`.
pub fn default_thresholds(results: &[RankedResult], n: usize) -> Vec<f64> {
    let tops: Vec<f64> = results.iter().filter_map(|r| r.candidates.first().map(|c| c.1)).collect();
    if tops.is_empty() || n == 0 {
        return Vec::new();
    }
    let lo = tops.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = tops.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let start = lo - 1e-6 * (1.0 + lo.abs());
    if n == 1 || hi <= start {
        return vec![start];
    }
    (0..n)
        .map(|i| start + (hi - start) * i as f64 / (n - 1) as f64)
        .collect()
}

/// P@1 per exact query length; lengths with fewer than five queries are
/// merged into one bucket labelled by their range.
pub fn length_bucket_report(results: &[RankedResult], lengths: &[usize]) -> Vec<LengthBucket> {
    let mut by_len: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (r, &len) in results.iter().zip(lengths) {
        let e = by_len.entry(len).or_default();
        e.0 += 1;
        e.1 += usize::from(r.top_is_relevant());
    }
    let mut out = Vec::new();
    let mut tail: Option<(usize, usize, usize, usize)> = None;
    for (&len, &(n, correct)) in &by_len {
        if n >= MIN_BUCKET_QUERIES {
            out.push(LengthBucket {
                label: len.to_string(),
                min_len: len,
                max_len: len,
                queries: n,
                p_at_1: correct as f64 / n as f64,
            });
        } else {
            let t = tail.get_or_insert((len, len, 0, 0));
            t.1 = len;
            t.2 += n;
            t.3 += correct;
        }
    }
    if let Some((lo, hi, n, correct)) = tail {
        out.push(LengthBucket {
            label: if lo == hi { lo.to_string() } else { format!("{lo}-{hi}") },
            min_len: lo,
            max_len: hi,
            queries: n,
            p_at_1: correct as f64 / n as f64,
        });
    }
    out.sort_by_key(|b| b.min_len);
    out
}

/// Seeded split into train, validation and test. Validation and test sizes
/// are `floor(ratio · n)`, the remainder goes to train; each part keeps the
/// input order.
pub fn split_dataset<T: Clone>(items: &[T], ratios: [f64; 3], seed: u64) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios {ratios:?} must be non-negative and sum to 1")));
    }
    let n = items.len();
    let n_val = (ratios[1] * n as f64 + 1e-9).floor() as usize;
    let n_test = (ratios[2] * n as f64 + 1e-9).floor() as usize;
    let n_train = n - n_val - n_test;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(seed));
    let part = |range: std::ops::Range<usize>| {
        let mut idx = order[range].to_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| items[i].clone()).collect::<Vec<T>>()
    };
    Ok((
        part(0..n_train),
        part(n_train..n_train + n_val),
        part(n_train + n_val..n),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(ids: &[&str], relevant: &[&str]) -> RankedResult {
        RankedResult {
            query_id: "q".into(),
            candidates: ids
                .iter()
                .enumerate()
                .map(|(i, id)| (id.to_string(), (ids.len() - i) as f64))
                .collect(),
            relevant: relevant.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(&result(&["a", "b"], &["a"])).unwrap(), 1.0);
        assert_eq!(average_precision(&result(&["b", "a"], &["a"])).unwrap(), 0.5);
        let ap = average_precision(&result(&["a", "x", "b"], &["a", "b"])).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(average_precision(&result(&["a"], &["a", "z"])).unwrap(), 0.5);
        assert!(average_precision(&result(&["a"], &[])).is_err());
    }

    #[test]
    fn evaluate_examples() {
        let r = vec![result(&["a", "b"], &["a"]), result(&["b", "a"], &["a"])];
        let rep = evaluate(&r, FilterRule::On);
        assert_eq!(rep.map, Some(0.75));
        assert_eq!(rep.p_at_1, Some(0.5));

        let missed = vec![result(&["a", "b"], &["a"]), result(&["b", "c"], &["a"]), result(&["a"], &["a"])];
        let rep = evaluate(&missed, FilterRule::On);
        assert_eq!((rep.num_queries_evaluated, rep.num_queries_filtered), (1, 2));
        assert_eq!(rep.map, Some(1.0));
        let rep = evaluate(&missed, FilterRule::Off);
        assert_eq!(rep.num_queries_evaluated, 3);
        assert!((rep.map.unwrap() - 2.0 / 3.0).abs() < 1e-15);

        let rep = evaluate(&[result(&["b"], &["a"])], FilterRule::On);
        assert_eq!(rep.map, None);
        assert!(rep.to_text().contains("undefined"));
    }

    #[test]
    fn pr_curve_examples() {
        let r = vec![result(&["a", "b"], &["a"]), result(&["b", "a"], &["a"])];
        let pts = pr_curve(&r, &[0.0, 5.0]).unwrap();
        assert_eq!(pts[0].recall, 0.5);
        assert_eq!(pts[0].precision, Some(0.5));
        assert_eq!(pts[1].recall, 0.0);
        assert_eq!(pts[1].precision, None);
        assert!(pr_curve(&r, &[1.0, 0.0]).is_err());
        assert!(pr_csv(&pts).contains("undefined"));
    }

    #[test]
    fn buckets() {
        let r: Vec<RankedResult> = (0..3).map(|_| result(&["a", "b"], &["a"])).collect();
        let b = length_bucket_report(&r, &[3, 3, 3]);
        assert_eq!(b.len(), 1);
        assert_eq!((b[0].label.as_str(), b[0].p_at_1), ("3", 1.0));

        let r: Vec<RankedResult> = (0..8).map(|i| result(if i % 2 == 0 { &["a"] } else { &["b"] }, &["a"])).collect();
        let b = length_bucket_report(&r, &[2, 2, 2, 2, 2, 7, 9, 9]);
        assert_eq!(b.len(), 2);
        assert_eq!((b[0].label.as_str(), b[0].queries), ("2", 5));
        assert_eq!((b[1].label.as_str(), b[1].queries), ("7-9", 3));
        assert!(b.iter().all(|x| x.queries > 0));
    }

    #[test]
    fn split_examples() {
        let items: Vec<u32> = (0..10).collect();
        let (a, b, c) = split_dataset(&items, [0.7, 0.1, 0.2], 3).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (7, 1, 2));
        assert_eq!(split_dataset(&items, [0.7, 0.1, 0.2], 3).unwrap(), (a.clone(), b.clone(), c.clone()));
        let mut all: Vec<u32> = a.into_iter().chain(b).chain(c).collect();
        all.sort();
        assert_eq!(all, items);
        assert!(split_dataset(&items, [0.5, 0.1, 0.2], 3).is_err());
    }
}
