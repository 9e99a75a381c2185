use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{add_stats, check_lengths, CorpusMetric, MetricError};
use crate::corpus_model::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapParams {
    pub n_samples: usize,
    pub sample_size: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for BootstrapParams {
    fn default() -> Self {
        Self {
            n_samples: 300,
            sample_size: 500,
            alpha: 0.05,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub score_a: f64,
    pub score_b: f64,
    /// Share of samples in which the system scoring lower on the full
    /// corpus ties or beats the other one.
    pub p_value: f64,
    pub wins_a: usize,
    pub wins_b: usize,
    pub ties: usize,
    pub significant: bool,
}

/// Paired bootstrap resampling with replacement. Sample `i` draws its
/// indices from a generator seeded by `(params.seed, i)`.
pub fn paired_bootstrap<M: CorpusMetric>(
    hyps_a: &[&str],
    hyps_b: &[&str],
    refs: &[&str],
    metric: &M,
    params: &BootstrapParams,
) -> Result<BootstrapResult, MetricError> {
    check_lengths("system A vs references", hyps_a.len(), refs.len())?;
    check_lengths("system B vs references", hyps_b.len(), refs.len())?;
    if refs.is_empty() {
        return Err(MetricError::Empty("corpus has no segments"));
    }
    if params.n_samples == 0 || params.sample_size == 0 {
        return Err(MetricError::Params("n_samples and sample_size must be >= 1".into()));
    }
    let seg = |hyps: &[&str]| -> Vec<Vec<u64>> {
        hyps.par_iter()
            .zip(refs.par_iter())
            .map(|(h, r)| metric.segment_stats(h, r))
            .collect()
    };
    let (sa, sb) = (seg(hyps_a), seg(hyps_b));
    let total = |stats: &[Vec<u64>], idx: &mut dyn Iterator<Item = usize>| {
        let mut acc = vec![0u64; metric.stats_len()];
        for i in idx {
            add_stats(&mut acc, &stats[i]);
        }
        metric.score_from_stats(&acc)
    };
    let score_a = total(&sa, &mut (0..refs.len()));
    let score_b = total(&sb, &mut (0..refs.len()));

    let outcomes: Vec<std::cmp::Ordering> = (0..params.n_samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, "bootstrap", s as u64));
            let idx: Vec<usize> = (0..params.sample_size).map(|_| rng.gen_range(0..refs.len())).collect();
            let a = total(&sa, &mut idx.iter().copied());
            let b = total(&sb, &mut idx.iter().copied());
            a.total_cmp(&b)
        })
        .collect();
    let wins_a = outcomes.iter().filter(|o| o.is_gt()).count();
    let wins_b = outcomes.iter().filter(|o| o.is_lt()).count();
    let ties = params.n_samples - wins_a - wins_b;
    let loser_holds = if score_a > score_b {
        wins_b + ties
    } else if score_b > score_a {
        wins_a + ties
    } else {
        params.n_samples
    };
    let p_value = loser_holds as f64 / params.n_samples as f64;
    Ok(BootstrapResult {
        score_a,
        score_b,
        p_value,
        wins_a,
        wins_b,
        ties,
        significant: p_value < params.alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{Bleu, Chrf};

    #[test]
    fn identical_systems() {
        let refs = ["a b c", "d e f", "g h"];
        let r = paired_bootstrap(&refs, &refs, &refs, &Bleu::default(), &BootstrapParams::default()).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.ties, 300);
    }

    #[test]
    fn dominant_system_and_symmetry() {
        let refs = ["the cat sat on the mat", "a dog ran far away", "rain fell all day long"];
        let weak = ["the dog sat", "a cat ran", "sun fell"];
        let p = BootstrapParams {
            seed: 11,
            ..BootstrapParams::default()
        };
        let ab = paired_bootstrap(&refs, &weak, &refs, &Chrf::default(), &p).unwrap();
        assert_eq!(ab.p_value, 0.0);
        assert!(ab.significant);
        let ba = paired_bootstrap(&weak, &refs, &refs, &Chrf::default(), &p).unwrap();
        assert_eq!(ab.p_value, ba.p_value);
        assert_eq!(ab.wins_a, ba.wins_b);
    }
}
