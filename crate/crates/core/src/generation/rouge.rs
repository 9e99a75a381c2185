use std::collections::HashMap;

/// ROUGE-1 F1 between two token sequences using clipped unigram overlap.
/// Zero when either side is empty or nothing overlaps.
pub fn rouge1_f(candidate: &[String], reference: &[String]) -> f64 {
    let cand = unigram_counts(candidate);
    let refc = unigram_counts(reference);
    let overlap: u32 = cand
        .iter()
        .map(|(tok, n)| refc.get(tok).map_or(0, |m| (*n).min(*m)))
        .sum();
    f1_from_overlap(overlap, candidate.len(), reference.len())
}

pub(crate) fn unigram_counts(tokens: &[String]) -> HashMap<&str, u32> {
    let mut counts = HashMap::with_capacity(tokens.len());
    for t in tokens {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    counts
}

pub(crate) fn f1_from_overlap(overlap: u32, cand_len: usize, ref_len: usize) -> f64 {
    if overlap == 0 || cand_len == 0 || ref_len == 0 {
        return 0.0;
    }
    let p = f64::from(overlap) / cand_len as f64;
    let r = f64::from(overlap) / ref_len as f64;
    2.0 * p * r / (p + r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn identical_is_one() {
        assert_eq!(rouge1_f(&toks("a b c a"), &toks("a b c a")), 1.0);
    }

    #[test]
    fn disjoint_is_zero() {
        assert_eq!(rouge1_f(&toks("a b"), &toks("c d")), 0.0);
        assert_eq!(rouge1_f(&[], &toks("c d")), 0.0);
        assert_eq!(rouge1_f(&[], &[]), 0.0);
    }

    #[test]
    fn the_cat_the_dog() {
        // overlap {the}: P = 1/2, R = 1/2
        assert_eq!(rouge1_f(&toks("the cat"), &toks("the dog")), 0.5);
    }

    #[test]
    fn overlap_is_clipped() {
        // cand has "a" three times, ref once: overlap 1, P = 1/3, R = 1/1
        let f = rouge1_f(&toks("a a a"), &toks("a"));
        assert!((f - 0.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(a in prop::collection::vec("[a-e]", 0..12), b in prop::collection::vec("[a-e]", 0..12)) {
            let f = rouge1_f(&a, &b);
            prop_assert_eq!(f, rouge1_f(&b, &a));
            prop_assert!((0.0..=1.0).contains(&f));
            if !a.is_empty() {
                prop_assert_eq!(rouge1_f(&a, &a), 1.0);
            }
        }
    }
}
