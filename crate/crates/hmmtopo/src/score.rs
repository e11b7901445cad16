//! Transcript alignment and word error rate.
//!
//! Alignment is minimum edit distance with unit substitution, deletion,
//! and insertion costs. Ties in the dynamic program are resolved
//! preferring substitution over insertion over deletion, so alignments
//! (not just counts) are reproducible.

use crate::error::{Error, Result};

/// Counts from aligning one hypothesis against one reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AlignmentCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    /// Reference length N.
    pub ref_len: usize,
}

impl AlignmentCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    pub fn add(&mut self, other: &AlignmentCounts) {
        self.substitutions += other.substitutions;
        self.deletions += other.deletions;
        self.insertions += other.insertions;
        self.ref_len += other.ref_len;
    }

    /// An utterance that failed to decode: every reference word deleted.
    pub fn full_error(ref_len: usize) -> AlignmentCounts {
        AlignmentCounts {
            substitutions: 0,
            deletions: ref_len,
            insertions: 0,
            ref_len,
        }
    }
}

/// Align `hyp` against `ref`, minimizing S + D + I.
pub fn align<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> AlignmentCounts {
    let n = reference.len();
    let m = hypothesis.len();
    // cell = (cost, S, D, I); moves chosen with the documented preference.
    let mut table = vec![(0usize, 0usize, 0usize, 0usize); (n + 1) * (m + 1)];
    let idx = |i: usize, j: usize| i * (m + 1) + j;
    for i in 1..=n {
        table[idx(i, 0)] = (i, 0, i, 0); // delete everything
    }
    for j in 1..=m {
        table[idx(0, j)] = (j, 0, 0, j); // insert everything
    }
    for i in 1..=n {
        for j in 1..=m {
            let hit = reference[i - 1] == hypothesis[j - 1];
            let diag = table[idx(i - 1, j - 1)];
            let diag_cost = diag.0 + usize::from(!hit);
            let ins = table[idx(i, j - 1)];
            let ins_cost = ins.0 + 1;
            let del = table[idx(i - 1, j)];
            let del_cost = del.0 + 1;

            // Preference on ties: substitution (diagonal), insertion, deletion.
            let cell = if diag_cost <= ins_cost && diag_cost <= del_cost {
                (
                    diag_cost,
                    diag.1 + usize::from(!hit),
                    diag.2,
                    diag.3,
                )
            } else if ins_cost <= del_cost {
                (ins_cost, ins.1, ins.2, ins.3 + 1)
            } else {
                (del_cost, del.1, del.2 + 1, del.3)
            };
            table[idx(i, j)] = cell;
        }
    }
    let (_, s, d, i) = table[idx(n, m)];
    AlignmentCounts {
        substitutions: s,
        deletions: d,
        insertions: i,
        ref_len: n,
    }
}

/// Corpus-level word error rate: pooled `(S + D + I) / N`.
pub fn wer(counts: &AlignmentCounts) -> Result<f64> {
    if counts.ref_len == 0 {
        return Err(Error::Usage("word error rate over an empty reference".into()));
    }
    Ok(counts.errors() as f64 / counts.ref_len as f64)
}

/// Pool per-utterance counts before dividing.
pub fn pool<'a>(counts: impl IntoIterator<Item = &'a AlignmentCounts>) -> AlignmentCounts {
    let mut total = AlignmentCounts::default();
    for c in counts {
        total.add(c);
    }
    total
}

/// Human- and machine-readable scoring summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreReport {
    pub counts: AlignmentCounts,
    pub wer: f64,
}

impl ScoreReport {
    pub fn new(counts: AlignmentCounts) -> Result<ScoreReport> {
        let wer = wer(&counts)?;
        Ok(ScoreReport { counts, wer })
    }

    pub fn accuracy(&self) -> f64 {
        1.0 - self.wer
    }

    pub fn to_text(&self) -> String {
        format!(
            "substitutions {}\ndeletions     {}\ninsertions    {}\nreference     {}\nWER           {:.6}\naccuracy      {:.6}\n",
            self.counts.substitutions,
            self.counts.deletions,
            self.counts.insertions,
            self.counts.ref_len,
            self.wer,
            self.accuracy(),
        )
    }

    pub fn to_csv(&self) -> String {
        format!(
            "substitutions,deletions,insertions,reference_length,wer,accuracy\n{},{},{},{},{:.6},{:.6}\n",
            self.counts.substitutions,
            self.counts.deletions,
            self.counts.insertions,
            self.counts.ref_len,
            self.wer,
            self.accuracy(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn tokens(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn identity_alignment_has_no_errors() {
        let r = tokens("a b c d");
        let c = align(&r, &r);
        assert_eq!(
            c,
            AlignmentCounts {
                substitutions: 0,
                deletions: 0,
                insertions: 0,
                ref_len: 4
            }
        );
    }

    #[test]
    fn dropped_middle_token_is_one_deletion() {
        let c = align(&tokens("a b c"), &tokens("a c"));
        assert_eq!(c.substitutions, 0);
        assert_eq!(c.deletions, 1);
        assert_eq!(c.insertions, 0);
        assert_eq!(c.ref_len, 3);
    }

    #[test]
    fn extra_tokens_are_insertions() {
        let c = align(&tokens("a"), &tokens("a b b"));
        assert_eq!(c.substitutions, 0);
        assert_eq!(c.deletions, 0);
        assert_eq!(c.insertions, 2);
        assert_eq!(c.ref_len, 1);
    }

    #[test]
    fn wer_values_match_hand_computation() {
        let perfect = align(&tokens("x y z"), &tokens("x y z"));
        assert_eq!(wer(&perfect).unwrap(), 0.0);

        let one_del = align(&tokens("a b c"), &tokens("a c"));
        assert!((wer(&one_del).unwrap() - 1.0 / 3.0).abs() < 1e-12);

        let many_ins = align(&tokens("a"), &tokens("a b b"));
        assert_eq!(wer(&many_ins).unwrap(), 2.0, "WER can exceed 1");
    }

    #[test]
    fn empty_reference_is_a_usage_error() {
        let c = align(&tokens(""), &tokens("a"));
        assert!(wer(&c).is_err());
    }

    #[test]
    fn pooling_sums_counts_before_dividing() {
        let a = align(&tokens("a b"), &tokens("a b"));
        let b = align(&tokens("c d"), &tokens("c x"));
        let pooled = pool([&a, &b]);
        assert_eq!(pooled.ref_len, 4);
        assert_eq!(pooled.errors(), 1);
        assert!((wer(&pooled).unwrap() - 0.25).abs() < 1e-12);
    }

    /// Memoized recursive edit distance, independent of the DP table.
    fn recursive_distance(
        r: &[u8],
        h: &[u8],
        memo: &mut HashMap<(usize, usize), usize>,
    ) -> usize {
        let key = (r.len(), h.len());
        if let Some(&v) = memo.get(&key) {
            return v;
        }
        let v = if r.is_empty() {
            h.len()
        } else if h.is_empty() {
            r.len()
        } else {
            let sub = recursive_distance(&r[1..], &h[1..], memo)
                + usize::from(r[0] != h[0]);
            let del = recursive_distance(&r[1..], h, memo) + 1;
            let ins = recursive_distance(r, &h[1..], memo) + 1;
            sub.min(del).min(ins)
        };
        memo.insert(key, v);
        v
    }

    #[test]
    fn matches_recursive_oracle_on_short_pairs() {
        // All pairs over a 2-symbol alphabet up to length 4.
        let mut seqs: Vec<Vec<u8>> = vec![vec![]];
        for len in 1..=4usize {
            for code in 0..(1u32 << len) {
                seqs.push((0..len).map(|b| ((code >> b) & 1) as u8).collect());
            }
        }
        for r in &seqs {
            for h in &seqs {
                let counts = align(r, h);
                let mut memo = HashMap::new();
                let oracle = recursive_distance(r, h, &mut memo);
                assert_eq!(counts.errors(), oracle, "r={r:?} h={h:?}");
                assert!(counts.substitutions + counts.deletions <= counts.ref_len);
            }
        }
    }

    proptest! {
        #[test]
        fn swapping_arguments_preserves_cost_with_roles_exchanged(
            r in proptest::collection::vec(0u8..3, 0..7),
            h in proptest::collection::vec(0u8..3, 0..7),
        ) {
            // Total cost is symmetric, with deletions and insertions
            // trading roles. The individual counts can differ between
            // directions when ties admit several optimal alignments (the
            // tie preference is stated for one direction only), but each
            // side must satisfy the structural identities.
            let fwd = align(&r, &h);
            let rev = align(&h, &r);
            prop_assert_eq!(
                fwd.substitutions + fwd.deletions + fwd.insertions,
                rev.substitutions + rev.insertions + rev.deletions
            );
            prop_assert_eq!(
                fwd.deletions as isize - fwd.insertions as isize,
                r.len() as isize - h.len() as isize
            );
            prop_assert_eq!(
                rev.deletions as isize - rev.insertions as isize,
                h.len() as isize - r.len() as isize
            );
            prop_assert!(fwd.substitutions + fwd.deletions <= fwd.ref_len);
        }

        #[test]
        fn self_alignment_is_clean(r in proptest::collection::vec(0u8..4, 0..10)) {
            let c = align(&r, &r);
            prop_assert_eq!(c.errors(), 0);
            prop_assert_eq!(c.ref_len, r.len());
        }
    }
}
