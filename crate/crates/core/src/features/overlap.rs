use std::collections::BTreeSet;

use crate::text::CorpusStats;

/// Which side's IDF mass normalizes the shared-word score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Normalize by the aspect's words (`f_wmt`).
    TowardTable,
    /// Normalize by the query's words (`f_wmq`).
    TowardQuery,
}

/// IDF-weighted word overlap between an aspect and a query, over token types.
///
/// Returns 0 when the normalizing side is empty.
pub fn word_overlap<S: AsRef<str>, T: AsRef<str>>(
    aspect_tokens: &[S],
    query_tokens: &[T],
    stats: &CorpusStats,
    direction: Direction,
) -> f64 {
    let aspect: BTreeSet<&str> = aspect_tokens.iter().map(AsRef::as_ref).collect();
    let query: BTreeSet<&str> = query_tokens.iter().map(AsRef::as_ref).collect();
    let shared: f64 = aspect
        .intersection(&query)
        .map(|w| stats.idf(w))
        .sum();
    let norm_side = match direction {
        Direction::TowardTable => &aspect,
        Direction::TowardQuery => &query,
    };
    let norm: f64 = norm_side.iter().map(|w| stats.idf(w)).sum();
    if norm > 0.0 {
        shared / norm
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::AspectSet;
    use proptest::prelude::*;
    use std::collections::{BTreeMap, HashMap};

    /// Stats in which every word listed has the same document frequency.
    fn flat_stats(words: &[&str]) -> CorpusStats {
        CorpusStats {
            num_docs: 4,
            doc_freq: words.iter().map(|w| (w.to_string(), 2)).collect::<HashMap<_, _>>(),
            avg_doc_len: 3.0,
            vocabulary: BTreeMap::new(),
            aspects: AspectSet::all(),
        }
    }

    #[test]
    fn subset_aspect_is_one_toward_table() {
        let stats = flat_stats(&["a", "b", "c"]);
        let s = word_overlap(&["a", "b"], &["a", "b", "c"], &stats, Direction::TowardTable);
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_is_zero() {
        let stats = flat_stats(&["a", "b"]);
        for d in [Direction::TowardTable, Direction::TowardQuery] {
            assert_eq!(word_overlap(&["a"], &["b"], &stats, d), 0.0);
        }
    }

    #[test]
    fn half_overlap_hand_evaluated() {
        let stats = flat_stats(&["a", "b"]);
        let t = word_overlap(&["a", "b"], &["a"], &stats, Direction::TowardTable);
        let q = word_overlap(&["a", "b"], &["a"], &stats, Direction::TowardQuery);
        assert!((t - 0.5).abs() < 1e-12);
        assert!((q - 1.0).abs() < 1e-12);
    }

    #[test]
    fn repeated_words_count_once() {
        let stats = flat_stats(&["a", "b"]);
        let s = word_overlap(&["a", "a", "a", "b"], &["a"], &stats, Direction::TowardTable);
        assert!((s - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_side_is_zero() {
        let stats = flat_stats(&["a"]);
        let empty: [&str; 0] = [];
        assert_eq!(word_overlap(&empty, &["a"], &stats, Direction::TowardTable), 0.0);
        assert_eq!(word_overlap(&["a"], &empty, &stats, Direction::TowardQuery), 0.0);
    }

    proptest! {
        #[test]
        fn bounded_and_swap_symmetric(
            a in proptest::collection::vec("[a-e]", 0..6),
            q in proptest::collection::vec("[a-e]", 0..6),
            dfs in proptest::collection::vec(1u32..10, 5),
        ) {
            let stats = CorpusStats {
                num_docs: 10,
                doc_freq: ["a", "b", "c", "d", "e"].iter().zip(dfs).map(|(w, d)| (w.to_string(), d)).collect(),
                avg_doc_len: 1.0,
                vocabulary: BTreeMap::new(),
                aspects: AspectSet::all(),
            };
            for d in [Direction::TowardTable, Direction::TowardQuery] {
                let s = word_overlap(&a, &q, &stats, d);
                prop_assert!((0.0..=1.0 + 1e-12).contains(&s));
            }
            let lhs = word_overlap(&a, &q, &stats, Direction::TowardTable);
            let rhs = word_overlap(&q, &a, &stats, Direction::TowardQuery);
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
