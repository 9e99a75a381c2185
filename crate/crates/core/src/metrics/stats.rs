use serde::{Deserialize, Serialize};

use crate::corpus_model::ParallelPair;
use crate::hooks::{one_line, run_line_hook};

/// Length statistics in the shape source words / target words / source
/// tokens / target tokens. The source side is the high-resource text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub pairs: u64,
    pub source_mean_words: f64,
    pub target_mean_words: f64,
    pub source_mean_tokens: Option<f64>,
    pub target_mean_tokens: Option<f64>,
    /// Set when a token counter was configured but failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_hook_error: Option<String>,
}

/// Streaming sums for mean word counts.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StatsAccumulator {
    pub pairs: u64,
    pub source_words: u64,
    pub target_words: u64,
}

impl StatsAccumulator {
    pub fn push(&mut self, pair: &ParallelPair) {
        self.pairs += 1;
        self.source_words += pair.hrl_text.split_whitespace().count() as u64;
        self.target_words += pair.lrl_text.split_whitespace().count() as u64;
    }

    pub fn finish(&self) -> CorpusStats {
        let n = self.pairs.max(1) as f64;
        CorpusStats {
            pairs: self.pairs,
            source_mean_words: self.source_words as f64 / n,
            target_mean_words: self.target_words as f64 / n,
            source_mean_tokens: None,
            target_mean_tokens: None,
            token_hook_error: None,
        }
    }
}

/// Mean word counts per side and, when `token_counter` is given, mean
/// subword counts from an external command printing one count per line.
pub fn corpus_stats(pairs: &[ParallelPair], token_counter: Option<&str>) -> CorpusStats {
    let mut acc = StatsAccumulator::default();
    pairs.iter().for_each(|p| acc.push(p));
    let mut stats = acc.finish();
    if let Some(cmd) = token_counter {
        match mean_tokens(cmd, pairs) {
            Ok((s, t)) => {
                stats.source_mean_tokens = Some(s);
                stats.target_mean_tokens = Some(t);
            }
            Err(e) => {
                tracing::warn!(error = %e, "token counter failed; token means omitted");
                stats.token_hook_error = Some(e);
            }
        }
    }
    stats
}

fn mean_tokens(cmd: &str, pairs: &[ParallelPair]) -> Result<(f64, f64), String> {
    let count = |texts: Vec<String>| -> Result<f64, String> {
        let out = run_line_hook(cmd, &texts).map_err(|e| e.to_string())?;
        let mut sum = 0u64;
        for (i, line) in out.iter().enumerate() {
            sum += line
                .trim()
                .parse::<u64>()
                .map_err(|_| format!("line {}: expected a count, got {line:?}", i + 1))?;
        }
        Ok(sum as f64 / texts.len().max(1) as f64)
    };
    let src = count(pairs.iter().map(|p| one_line(&p.hrl_text)).collect())?;
    let tgt = count(pairs.iter().map(|p| one_line(&p.lrl_text)).collect())?;
    Ok((src, tgt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus_model::{BtMode, Direction, LangCode};

    fn pair(hrl: &str, lrl: &str) -> ParallelPair {
        ParallelPair {
            lrl_text: lrl.into(),
            hrl_text: hrl.into(),
            direction: Direction::new(LangCode::new("eng_Latn").unwrap(), LangCode::new("hau_Latn").unwrap()).unwrap(),
            sentence_ref: "p:0".into(),
            bt_backend_id: "mock".into(),
            bt_mode: BtMode::SupervisedMt,
        }
    }

    #[test]
    fn word_means() {
        let s = corpus_stats(&[pair("a b c d", "x"), pair("a b c d e f", "x y y")], None);
        assert_eq!(s.source_mean_words, 5.0);
        assert_eq!(s.target_mean_words, 2.0);
        assert_eq!(s.source_mean_tokens, None);
    }

    #[test]
    fn token_hook() {
        let pairs = [pair("a b c d", "x"), pair("a b", "x y")];
        let s = corpus_stats(&pairs, Some("awk '{print NF * 2}'"));
        assert_eq!(s.source_mean_tokens, Some(6.0));
        assert_eq!(s.target_mean_tokens, Some(3.0));
        let failed = corpus_stats(&pairs, Some("exit 1"));
        assert!(failed.token_hook_error.is_some());
        assert_eq!(failed.source_mean_words, 3.0);
    }
}
