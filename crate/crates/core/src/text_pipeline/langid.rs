use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus_model::LangCode;
use crate::hooks::{one_line, run_line_hook};
use crate::normalize::normalized_tokens;

pub const MAX_ORDER: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum LangIdError {
    #[error("no training sentences for {0}")]
    NoSeeds(LangCode),
    #[error("no languages to train on")]
    NoLanguages,
    #[error("cannot classify an empty sentence")]
    EmptyInput,
    #[error("external classifier: {0}")]
    External(String),
}

/// Result of classifying one sentence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LangVerdict {
    pub label: LangCode,
    pub confidence: f64,
    /// Number of n-gram features that were seen in training. Zero means the
    /// posterior is the prior.
    pub evidence: usize,
}

impl LangVerdict {
    pub fn is_low_confidence(&self) -> bool {
        self.evidence == 0
    }
}

/// Anything that assigns language labels to sentences.
pub trait LanguageIdentifier: Sync {
    fn classify_batch(&self, sentences: &[&str]) -> Result<Vec<LangVerdict>, LangIdError>;
}

/// Character n-gram features of padded words, orders 1 to [`MAX_ORDER`].
fn features(text: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    for word in normalized_tokens(text) {
        let padded: Vec<char> = std::iter::once(' ').chain(word.chars()).chain(std::iter::once(' ')).collect();
        for n in 1..=MAX_ORDER {
            for w in padded.windows(n) {
                if n == 1 && w[0] == ' ' {
                    continue;
                }
                out.push((n, w.iter().collect()));
            }
        }
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct LangTable {
    /// Per order: n-gram counts and their total.
    counts: Vec<HashMap<String, u64>>,
    totals: Vec<u64>,
}

/// Multinomial naive Bayes over character n-grams with additive smoothing.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LangIdModel {
    tables: BTreeMap<LangCode, LangTable>,
    /// Number of distinct n-grams per order across all languages.
    vocab_sizes: Vec<u64>,
    vocab: Vec<HashSet<String>>,
    pub smoothing: f64,
}

pub fn train_langid(seeds: &BTreeMap<LangCode, Vec<String>>) -> Result<LangIdModel, LangIdError> {
    if seeds.is_empty() {
        return Err(LangIdError::NoLanguages);
    }
    let mut tables = BTreeMap::new();
    let mut vocab = vec![HashSet::new(); MAX_ORDER + 1];
    for (lang, sentences) in seeds {
        if sentences.iter().all(|s| s.trim().is_empty()) {
            return Err(LangIdError::NoSeeds(lang.clone()));
        }
        let mut table = LangTable {
            counts: vec![HashMap::new(); MAX_ORDER + 1],
            totals: vec![0; MAX_ORDER + 1],
        };
        for s in sentences {
            for (n, g) in features(s) {
                vocab[n].insert(g.clone());
                *table.counts[n].entry(g).or_insert(0) += 1;
                table.totals[n] += 1;
            }
        }
        tables.insert(lang.clone(), table);
    }
    Ok(LangIdModel {
        tables,
        vocab_sizes: vocab.iter().map(|v| v.len() as u64).collect(),
        vocab,
        smoothing: 0.5,
    })
}

impl LangIdModel {
    pub fn languages(&self) -> impl Iterator<Item = &LangCode> {
        self.tables.keys()
    }

    /// Arg-max posterior under uniform priors. Ties go to the smallest code.
    pub fn classify(&self, sentence: &str) -> Result<LangVerdict, LangIdError> {
        if sentence.trim().is_empty() {
            return Err(LangIdError::EmptyInput);
        }
        let feats: Vec<(usize, String)> = features(sentence)
            .into_iter()
            .filter(|(n, g)| self.vocab[*n].contains(g))
            .collect();
        let scores: Vec<(&LangCode, f64)> = self
            .tables
            .iter()
            .map(|(lang, t)| {
                let ll: f64 = feats
                    .iter()
                    .map(|(n, g)| {
                        let c = t.counts[*n].get(g).copied().unwrap_or(0) as f64;
                        let denom = t.totals[*n] as f64 + self.smoothing * self.vocab_sizes[*n] as f64;
                        ((c + self.smoothing) / denom).ln()
                    })
                    .sum();
                (lang, ll)
            })
            .collect();
        let (best_lang, best) = scores
            .iter()
            .fold(None::<(&LangCode, f64)>, |acc, &(l, s)| match acc {
                Some((_, b)) if s <= b => acc,
                _ => Some((l, s)),
            })
            .expect("model has at least one language");
        let z: f64 = scores.iter().map(|(_, s)| (s - best).exp()).sum();
        Ok(LangVerdict {
            label: best_lang.clone(),
            confidence: 1.0 / z,
            evidence: feats.len(),
        })
    }
}

impl LanguageIdentifier for LangIdModel {
    fn classify_batch(&self, sentences: &[&str]) -> Result<Vec<LangVerdict>, LangIdError> {
        use rayon::prelude::*;
        sentences.par_iter().map(|s| self.classify(s)).collect()
    }
}

/// Labeler run as `sh -c <command>`: one sentence per stdin line, one
/// `label<TAB>confidence` line per sentence on stdout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalClassifier {
    pub command: String,
}

impl LanguageIdentifier for ExternalClassifier {
    fn classify_batch(&self, sentences: &[&str]) -> Result<Vec<LangVerdict>, LangIdError> {
        let lines: Vec<String> = sentences.iter().map(|s| one_line(s)).collect();
        run_line_hook(&self.command, &lines)
            .map_err(|e| LangIdError::External(e.to_string()))?
            .iter()
            .enumerate()
            .map(|(i, line)| {
                parse_external_line(line).map_err(|m| LangIdError::External(format!("line {}: {m}", i + 1)))
            })
            .collect()
    }
}

fn parse_external_line(line: &str) -> Result<LangVerdict, String> {
    let (label, conf) = line.split_once('\t').ok_or("missing tab separator")?;
    let label = LangCode::new(label.trim().trim_start_matches("__label__")).map_err(|e| e.to_string())?;
    let confidence: f64 = conf.trim().parse().map_err(|_| format!("bad confidence {conf:?}"))?;
    if !(0.0..=1.0).contains(&confidence) {
        return Err(format!("confidence {confidence} outside [0, 1]"));
    }
    Ok(LangVerdict {
        label,
        confidence,
        evidence: 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(s: &str) -> LangCode {
        LangCode::new(s).unwrap()
    }

    fn seeds() -> BTreeMap<LangCode, Vec<String>> {
        [
            (
                code("eng_Latn"),
                vec!["the cat sat on the mat".to_string(), "a dog ran in the park".to_string()],
            ),
            (code("hin_Deva"), vec!["यह एक वाक्य है".to_string(), "वह घर गया".to_string()]),
        ]
        .into()
    }

    #[test]
    fn single_language_is_certain() {
        let m = train_langid(&[(code("hau_Latn"), vec!["ina kwana".to_string()])].into()).unwrap();
        let v = m.classify("something else entirely").unwrap();
        assert_eq!(v.label, code("hau_Latn"));
        assert_eq!(v.confidence, 1.0);
    }

    #[test]
    fn separates_scripts() {
        let m = train_langid(&seeds()).unwrap();
        assert_eq!(m.classify("the park").unwrap().label, code("eng_Latn"));
        assert_eq!(m.classify("घर है").unwrap().label, code("hin_Deva"));
    }

    #[test]
    fn unseen_characters_give_the_prior() {
        let m = train_langid(&seeds()).unwrap();
        let v = m.classify("12345 678").unwrap();
        assert!(v.is_low_confidence());
        assert!((v.confidence - 0.5).abs() < 1e-12);
        // uniform tie resolves to the smallest code
        assert_eq!(v.label, code("eng_Latn"));
    }

    #[test]
    fn errors() {
        assert!(matches!(train_langid(&BTreeMap::new()), Err(LangIdError::NoLanguages)));
        assert!(matches!(
            train_langid(&[(code("eng_Latn"), vec![])].into()),
            Err(LangIdError::NoSeeds(_))
        ));
        let m = train_langid(&seeds()).unwrap();
        assert!(matches!(m.classify("  "), Err(LangIdError::EmptyInput)));
    }

    #[test]
    fn external_hook_round_trip() {
        let c = ExternalClassifier {
            command: "while IFS= read -r l; do printf 'hau_Latn\\t0.9\\n'; done".into(),
        };
        let v = c.classify_batch(&["a", "b\nc"]).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].label, code("hau_Latn"));
        assert_eq!(v[1].confidence, 0.9);
        let bad = ExternalClassifier { command: "echo nope".into() };
        assert!(bad.classify_batch(&["a"]).is_err());
    }
}
