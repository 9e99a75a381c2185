use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{CorpusMetric, MetricError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChrfParams {
    pub char_order: usize,
    pub word_order: usize,
    pub beta: f64,
    pub whitespace_in_chars: bool,
}

impl Default for ChrfParams {
    fn default() -> Self {
        Self {
            char_order: 6,
            word_order: 2,
            beta: 2.0,
            whitespace_in_chars: false,
        }
    }
}

const ASCII_PUNCT: &str = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";

/// Whitespace tokens with one leading or trailing ASCII punctuation mark
/// split off.
fn word_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for tok in text.split_whitespace() {
        let chars: Vec<char> = tok.chars().collect();
        let last = *chars.last().expect("non-empty token");
        if chars.len() == 1 {
            out.push(tok.to_owned());
        } else if ASCII_PUNCT.contains(last) {
            out.push(chars[..chars.len() - 1].iter().collect());
            out.push(last.to_string());
        } else if ASCII_PUNCT.contains(chars[0]) {
            out.push(chars[0].to_string());
            out.push(chars[1..].iter().collect());
        } else {
            out.push(tok.to_owned());
        }
    }
    out
}

fn counts<T: std::hash::Hash + Eq + Clone>(items: &[T], n: usize) -> HashMap<&[T], u64> {
    let mut m = HashMap::new();
    for w in items.windows(n) {
        *m.entry(w).or_insert(0) += 1;
    }
    m
}

fn order_stats<T: std::hash::Hash + Eq + Clone>(hyp: &[T], refr: &[T], n: usize) -> [u64; 3] {
    let h = counts(hyp, n);
    let r = counts(refr, n);
    let matched = h.iter().map(|(g, c)| (*c).min(r.get(g).copied().unwrap_or(0))).sum();
    [
        hyp.len().saturating_sub(n - 1) as u64,
        refr.len().saturating_sub(n - 1) as u64,
        matched,
    ]
}

/// chrF with optional word n-grams (chrF++ when `word_order` is 2).
/// Statistics layout: `[hyp, ref, match]` per character order, then per
/// word order.
#[derive(Clone, Copy, Debug, Default)]
pub struct Chrf {
    pub params: ChrfParams,
}

impl CorpusMetric for Chrf {
    fn name(&self) -> &'static str {
        "chrf"
    }

    fn stats_len(&self) -> usize {
        3 * (self.params.char_order + self.params.word_order)
    }

    fn segment_stats(&self, hypothesis: &str, reference: &str) -> Vec<u64> {
        let chars_of = |s: &str| -> Vec<char> {
            if self.params.whitespace_in_chars {
                s.chars().collect()
            } else {
                s.chars().filter(|c| !c.is_whitespace()).collect()
            }
        };
        let (hc, rc) = (chars_of(hypothesis), chars_of(reference));
        let (hw, rw) = (word_tokens(hypothesis), word_tokens(reference));
        let mut stats = Vec::with_capacity(self.stats_len());
        for n in 1..=self.params.char_order {
            stats.extend(order_stats(&hc, &rc, n));
        }
        for n in 1..=self.params.word_order {
            stats.extend(order_stats(&hw, &rw, n));
        }
        stats
    }

    /// F-beta of precision and recall averaged over the orders that have
    /// n-grams on both sides, on a 0-100 scale.
    fn score_from_stats(&self, stats: &[u64]) -> f64 {
        let factor = self.params.beta * self.params.beta;
        let (mut prec, mut rec, mut effective) = (0.0, 0.0, 0usize);
        for s in stats.chunks_exact(3) {
            let (h, r, m) = (s[0], s[1], s[2]);
            if h == 0 || r == 0 {
                continue;
            }
            prec += m as f64 / h as f64;
            rec += m as f64 / r as f64;
            effective += 1;
        }
        if effective == 0 {
            return 0.0;
        }
        prec /= effective as f64;
        rec /= effective as f64;
        if prec + rec == 0.0 {
            return 0.0;
        }
        100.0 * (1.0 + factor) * prec * rec / (factor * prec + rec)
    }
}

pub fn chrf_pp<H: AsRef<str>, R: AsRef<str>>(hyps: &[H], refs: &[R], params: &ChrfParams) -> Result<f64, MetricError> {
    if params.char_order == 0 || params.beta.is_nan() || params.beta <= 0.0 {
        return Err(MetricError::Params("char_order must be >= 1 and beta > 0".into()));
    }
    Chrf { params: *params }.corpus_score(hyps, refs)
}
