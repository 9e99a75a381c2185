use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use super::{CorpusMetric, MetricError};
use crate::normalize::is_punctuation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    Exp,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuParams {
    pub max_order: usize,
    pub smoothing: Smoothing,
}

impl Default for BleuParams {
    fn default() -> Self {
        Self {
            max_order: 4,
            smoothing: Smoothing::Exp,
        }
    }
}

/// NFC, lowercase, split on whitespace; every punctuation character is a
/// token of its own.
pub fn bleu_tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for c in text.nfc().flat_map(char::to_lowercase) {
        if c.is_whitespace() || is_punctuation(c) {
            if !cur.is_empty() {
                tokens.push(std::mem::take(&mut cur));
            }
            if !c.is_whitespace() {
                tokens.push(c.to_string());
            }
        } else {
            cur.push(c);
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    for w in tokens.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

/// Corpus BLEU. Statistics layout: `[hyp_len, ref_len, correct_1..N, total_1..N]`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Bleu {
    pub params: BleuParams,
}

impl CorpusMetric for Bleu {
    fn name(&self) -> &'static str {
        "bleu"
    }

    fn stats_len(&self) -> usize {
        2 + 2 * self.params.max_order
    }

    fn segment_stats(&self, hypothesis: &str, reference: &str) -> Vec<u64> {
        let n_max = self.params.max_order;
        let hyp = bleu_tokenize(hypothesis);
        let refr = bleu_tokenize(reference);
        let mut stats = vec![0u64; self.stats_len()];
        stats[0] = hyp.len() as u64;
        stats[1] = refr.len() as u64;
        for n in 1..=n_max {
            let h = ngram_counts(&hyp, n);
            let r = ngram_counts(&refr, n);
            stats[1 + n] = h.iter().map(|(g, c)| (*c).min(r.get(g).copied().unwrap_or(0))).sum();
            stats[1 + n_max + n] = hyp.len().saturating_sub(n - 1) as u64;
        }
        stats
    }

    /// Geometric mean of the modified precisions times the brevity penalty,
    /// on a 0-100 scale. Orders for which the hypotheses contain no n-grams
    /// at all are left out of the mean.
    fn score_from_stats(&self, stats: &[u64]) -> f64 {
        let n_max = self.params.max_order;
        let (hyp_len, ref_len) = (stats[0], stats[1]);
        let correct = &stats[2..2 + n_max];
        let total = &stats[2 + n_max..2 + 2 * n_max];
        if hyp_len == 0 || correct[0] == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        let mut orders = 0usize;
        let mut smooth = 1.0f64;
        for n in 0..n_max {
            if total[n] == 0 {
                continue;
            }
            orders += 1;
            let p = if correct[n] > 0 {
                correct[n] as f64 / total[n] as f64
            } else {
                match self.params.smoothing {
                    Smoothing::Exp => {
                        smooth *= 2.0;
                        1.0 / (smooth * total[n] as f64)
                    }
                    Smoothing::None => return 0.0,
                }
            };
            log_sum += p.ln();
        }
        let bp = if hyp_len < ref_len {
            (1.0 - ref_len as f64 / hyp_len as f64).exp()
        } else {
            1.0
        };
        100.0 * bp * (log_sum / orders as f64).exp()
    }
}

pub fn bleu<H: AsRef<str>, R: AsRef<str>>(hyps: &[H], refs: &[R], params: &BleuParams) -> Result<f64, MetricError> {
    if params.max_order == 0 {
        return Err(MetricError::Params("max_order must be >= 1".into()));
    }
    Bleu { params: *params }.corpus_score(hyps, refs)
}
