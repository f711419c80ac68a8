use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// Predicted toxic character offsets for one post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanPrediction {
    pub post_id: String,
    pub offsets: BTreeSet<usize>,
}

/// Precision `|S∩G| / |S|` and recall `|S∩G| / |G|`. Both sets must be
/// non-empty.
pub fn precision_recall(predicted: &BTreeSet<usize>, gold: &BTreeSet<usize>) -> (f64, f64) {
    assert!(
        !predicted.is_empty() && !gold.is_empty(),
        "precision and recall need non-empty sets"
    );
    let hits = predicted.intersection(gold).count() as f64;
    (hits / predicted.len() as f64, hits / gold.len() as f64)
}

/// Per-post span F1.
///
/// Both sets empty scores 1, exactly one empty scores 0, otherwise the
/// harmonic mean of [`precision_recall`] (0 when nothing overlaps).
pub fn span_f1(predicted: &BTreeSet<usize>, gold: &BTreeSet<usize>) -> f64 {
    match (predicted.is_empty(), gold.is_empty()) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        (false, false) => {
            let (p, r) = precision_recall(predicted, gold);
            if p + r == 0.0 {
                0.0
            } else {
                2.0 * p * r / (p + r)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::collection::btree_set;
    use proptest::prelude::*;

    /// Character-by-character count over the text positions, no set algebra.
    fn oracle(s: &BTreeSet<usize>, g: &BTreeSet<usize>, text_len: usize) -> f64 {
        let (mut tp, mut ns, mut ng) = (0usize, 0usize, 0usize);
        for c in 0..text_len {
            let in_s = s.contains(&c);
            let in_g = g.contains(&c);
            ns += in_s as usize;
            ng += in_g as usize;
            tp += (in_s && in_g) as usize;
        }
        if ns == 0 && ng == 0 {
            return 1.0;
        }
        if ns == 0 || ng == 0 {
            return 0.0;
        }
        let p = tp as f64 / ns as f64;
        let r = tp as f64 / ng as f64;
        if tp == 0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn edge_cases() {
        assert_eq!(span_f1(&set(&[]), &set(&[])), 1.0);
        assert_eq!(span_f1(&set(&[]), &set(&[1, 2])), 0.0);
        assert_eq!(span_f1(&set(&[1, 2]), &set(&[])), 0.0);
        assert_eq!(span_f1(&set(&[3, 4]), &set(&[3, 4])), 1.0);
        assert_eq!(span_f1(&set(&[0, 1]), &set(&[1, 2])), 0.5);
        assert_eq!(span_f1(&set(&[0]), &set(&[1])), 0.0);
    }

    #[test]
    fn recall_is_bounded_by_one() {
        // a union-over-prediction recall would give 4 / 1 here
        let (p, r) = precision_recall(&set(&[0]), &set(&[0, 1, 2, 3]));
        assert_eq!((p, r), (1.0, 0.25));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn matches_oracle(s in btree_set(0usize..30, 0..30), g in btree_set(0usize..30, 0..30)) {
            prop_assert!((span_f1(&s, &g) - oracle(&s, &g, 30)).abs() < 1e-12);
        }

        #[test]
        fn in_unit_range_and_reflexive(s in btree_set(0usize..30, 0..30), g in btree_set(0usize..30, 0..30)) {
            let f = span_f1(&s, &g);
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert_eq!(span_f1(&s, &s), 1.0);
            prop_assert_eq!(f, span_f1(&g, &s));
        }

        #[test]
        fn precision_is_dual_to_recall(s in btree_set(0usize..30, 1..30), g in btree_set(0usize..30, 1..30)) {
            prop_assert_eq!(precision_recall(&s, &g).0, precision_recall(&g, &s).1);
        }

        #[test]
        fn growing_a_subset_of_gold_never_hurts(g in btree_set(0usize..30, 1..30), keep in any::<u32>(), pick in any::<usize>()) {
            let s: BTreeSet<usize> = g.iter().copied().enumerate().filter(|(i, _)| keep >> (i % 32) & 1 == 1).map(|(_, x)| x).collect();
            let missing: Vec<usize> = g.difference(&s).copied().collect();
            prop_assume!(!missing.is_empty());
            let mut bigger = s.clone();
            bigger.insert(missing[pick % missing.len()]);
            prop_assert!(span_f1(&bigger, &g) >= span_f1(&s, &g));
        }
    }
}
