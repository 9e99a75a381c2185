use std::collections::HashMap;

use super::rouge::{f1_from_overlap, unigram_counts};
use crate::normalize::normalized_tokens;

struct Member {
    id: String,
    counts: HashMap<String, u32>,
    len: usize,
}

/// Unigram profiles of the paragraphs accepted so far, with an inverted
/// index so candidates are only scored against members sharing a token.
#[derive(Default)]
pub struct AcceptedPool {
    members: Vec<Member>,
    postings: HashMap<String, Vec<u32>>,
}

impl AcceptedPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn insert_text(&mut self, id: impl Into<String>, text: &str) {
        self.insert_tokens(id, &normalized_tokens(text));
    }

    pub fn insert_tokens(&mut self, id: impl Into<String>, tokens: &[String]) {
        let idx = self.members.len() as u32;
        let counts: HashMap<String, u32> = unigram_counts(tokens)
            .into_iter()
            .map(|(k, v)| (k.to_owned(), v))
            .collect();
        for tok in counts.keys() {
            self.postings.entry(tok.clone()).or_default().push(idx);
        }
        self.members.push(Member {
            id: id.into(),
            counts,
            len: tokens.len(),
        });
    }

    /// Highest ROUGE-1 F1 of `candidate` against any member, with the id of
    /// the earliest member reaching it. `(0.0, None)` when nothing overlaps.
    pub fn max_pool_overlap(&self, candidate: &str) -> (f64, Option<&str>) {
        self.max_overlap_tokens(&normalized_tokens(candidate))
    }

    pub fn max_overlap_tokens(&self, tokens: &[String]) -> (f64, Option<&str>) {
        let cand = unigram_counts(tokens);
        let mut overlap: HashMap<u32, u32> = HashMap::new();
        for (tok, n) in &cand {
            let Some(list) = self.postings.get(*tok) else { continue };
            for &m in list {
                let shared = self.members[m as usize].counts[*tok].min(*n);
                *overlap.entry(m).or_insert(0) += shared;
            }
        }
        let mut best: Option<(f64, u32)> = None;
        for (m, o) in overlap {
            let score = f1_from_overlap(o, tokens.len(), self.members[m as usize].len);
            let better = match best {
                None => score > 0.0,
                Some((s, i)) => score > s || (score == s && m < i),
            };
            if better {
                best = Some((score, m));
            }
        }
        match best {
            Some((s, m)) => (s, Some(self.members[m as usize].id.as_str())),
            None => (0.0, None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_pool() {
        assert_eq!(AcceptedPool::new().max_pool_overlap("anything at all"), (0.0, None));
    }

    #[test]
    fn exact_member_scores_one() {
        let mut pool = AcceptedPool::new();
        pool.insert_text("p0", "The river floods every spring.");
        pool.insert_text("p1", "Markets open early in Kano.");
        assert_eq!(pool.max_pool_overlap("markets OPEN early, in Kano!"), (1.0, Some("p1")));
    }

    #[test]
    fn ties_go_to_the_earliest_member() {
        let mut pool = AcceptedPool::new();
        pool.insert_text("first", "a b");
        pool.insert_text("second", "a c");
        let (s, id) = pool.max_pool_overlap("a d");
        assert_eq!(s, 0.5);
        assert_eq!(id, Some("first"));
    }

    #[test]
    fn disjoint_candidate_has_no_argmax() {
        let mut pool = AcceptedPool::new();
        pool.insert_text("p0", "alpha beta");
        assert_eq!(pool.max_pool_overlap("gamma"), (0.0, None));
    }
}
