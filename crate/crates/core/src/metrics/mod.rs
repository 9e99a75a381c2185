//! Corpus-level MT metrics, significance testing, corpus statistics and the
//! Vendi diversity score.
//!
//! BLEU and chrF++ are computed from per-segment sufficient statistics that
//! add up over a corpus, which lets the bootstrap resample cheaply.

mod bleu;
mod bootstrap;
mod chrf;
mod external;
mod stats;
mod vendi;

pub use bleu::{bleu, bleu_tokenize, Bleu, BleuParams, Smoothing};
pub use bootstrap::{paired_bootstrap, BootstrapParams, BootstrapResult};
pub use chrf::{chrf_pp, Chrf, ChrfParams};
pub use external::{external_score, ScoreRange};
pub use stats::{corpus_stats, CorpusStats, StatsAccumulator};
pub use vendi::{vendi_score, vendi_score_embeddings, VENDI_TOLERANCE};

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("{what}: {left} vs {right} segments")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("matrix contract violated: {0}")]
    Matrix(String),
    #[error("external hook: {0}")]
    Integration(String),
}

/// A metric whose corpus score is a function of summed segment statistics.
pub trait CorpusMetric: Sync {
    fn name(&self) -> &'static str;
    /// Number of statistics per segment.
    fn stats_len(&self) -> usize;
    fn segment_stats(&self, hypothesis: &str, reference: &str) -> Vec<u64>;
    fn score_from_stats(&self, stats: &[u64]) -> f64;

    fn corpus_score<H: AsRef<str>, R: AsRef<str>>(&self, hyps: &[H], refs: &[R]) -> Result<f64, MetricError>
    where
        Self: Sized,
    {
        check_lengths("hypotheses vs references", hyps.len(), refs.len())?;
        if hyps.is_empty() {
            return Err(MetricError::Empty("corpus has no segments"));
        }
        let mut total = vec![0u64; self.stats_len()];
        for (h, r) in hyps.iter().zip(refs) {
            add_stats(&mut total, &self.segment_stats(h.as_ref(), r.as_ref()));
        }
        Ok(self.score_from_stats(&total))
    }
}

pub(crate) fn add_stats(acc: &mut [u64], s: &[u64]) {
    for (a, b) in acc.iter_mut().zip(s) {
        *a += b;
    }
}

pub(crate) fn check_lengths(what: &'static str, left: usize, right: usize) -> Result<(), MetricError> {
    if left != right {
        return Err(MetricError::LengthMismatch { what, left, right });
    }
    Ok(())
}
