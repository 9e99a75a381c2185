//! Back-translation of filtered sentences into the high-resource language,
//! pair assembly, and the self-improvement loop.

mod selfloop;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus_model::{BtMode, Direction, LangCode, ParallelPair, SentenceRecord};
use crate::gateway::{BackendProfile, DecodeParams, Gateway, GatewayError};
use crate::normalize::nfc;
use crate::prompting::{build_few_shot_mt_prompt, LanguageNames, PromptError};
use crate::retrieval::{ExamplePool, KeySide, RetrievalError};
use crate::text_pipeline::NgramBlocklist;

pub use selfloop::{self_improve, RoundScores, RoundState, SelfImproveConfig, TrainerInvocation};

/// Share of failed sentences above which a back-translation run fails.
pub const MAX_FAILURE_RATE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BtStrategy {
    /// Dedicated MT backend with beam search.
    SupervisedMt,
    /// The generator itself, prompted with retrieved few-shot examples.
    FewshotGenerator,
    /// A (fine-tuned) student model, prompted like the generator.
    Student,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BtConfig {
    pub mode: BtStrategy,
    #[serde(default = "default_decode")]
    pub decode: DecodeParams,
    #[serde(default = "default_shots")]
    pub shots: usize,
}

fn default_decode() -> DecodeParams {
    DecodeParams::beam(5)
}

fn default_shots() -> usize {
    5
}

impl BtConfig {
    pub fn new(mode: BtStrategy) -> Self {
        Self {
            mode,
            decode: default_decode(),
            shots: default_shots(),
        }
    }

    pub fn validate(&self) -> Result<(), TranslateError> {
        if self.mode != BtStrategy::SupervisedMt && self.shots == 0 {
            return Err(TranslateError::Config("shots must be >= 1 for prompted back-translation".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TranslateError {
    #[error("invalid back-translation config: {0}")]
    Config(String),
    #[error("sentence {0} is not kept and cannot be back-translated")]
    NotKept(String),
    #[error("{failed} of {total} sentences failed to back-translate")]
    TooManyFailures {
        failed: usize,
        total: usize,
        output: Box<BtOutput>,
    },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Corpus(#[from] crate::corpus_model::CorpusError),
    #[error("trainer: {0}")]
    Trainer(String),
    #[error(transparent)]
    Metric(#[from] crate::metrics::MetricError),
}

/// A sentence that could not be back-translated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BtFailure {
    pub sentence_ref: String,
    pub lrl_text: String,
    pub bt_backend_id: String,
    pub error: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BtOutput {
    pub pairs: Vec<ParallelPair>,
    pub failures: Vec<BtFailure>,
}

/// What a back-translation call runs against.
pub struct BtContext<'a> {
    pub gateway: &'a Gateway,
    pub profile: &'a BackendProfile,
    pub names: &'a LanguageNames,
    /// Required for prompted modes; keyed on the low-resource side.
    pub pool: Option<&'a ExamplePool>,
    pub lrl: &'a LangCode,
    pub hrl: &'a LangCode,
}

/// One pair or one failure per input sentence, in input order.
pub fn backtranslate(
    sentences: &[SentenceRecord],
    cfg: &BtConfig,
    ctx: &BtContext<'_>,
    bt_mode: BtMode,
) -> Result<BtOutput, TranslateError> {
    cfg.validate()?;
    if let Some(s) = sentences.iter().find(|s| !s.is_kept()) {
        return Err(TranslateError::NotKept(s.reference()));
    }
    if sentences.is_empty() {
        return Ok(BtOutput::default());
    }
    let translations: Vec<Result<String, String>> = match cfg.mode {
        BtStrategy::SupervisedMt => {
            let direction = Direction::new(ctx.lrl.clone(), ctx.hrl.clone())?;
            let texts: Vec<String> = sentences.iter().map(|s| s.text.clone()).collect();
            ctx.gateway
                .translate_batch(ctx.profile, &texts, &direction, &cfg.decode)?
                .into_iter()
                .map(|r| r.map_err(|e| e.to_string()))
                .collect()
        }
        BtStrategy::FewshotGenerator | BtStrategy::Student => {
            let prompts = fewshot_prompts(sentences, cfg, ctx)?;
            let params = DecodeParams {
                max_new_tokens: 256,
                ..DecodeParams::greedy()
            };
            prompts
                .par_iter()
                .map(|p| {
                    ctx.gateway
                        .complete(ctx.profile, p, &params)
                        .map(|c| first_line(&c.text))
                        .map_err(|e| e.to_string())
                })
                .collect()
        }
    };

    let mut out = BtOutput::default();
    let direction = Direction::new(ctx.hrl.clone(), ctx.lrl.clone())?;
    for (s, t) in sentences.iter().zip(translations) {
        match t.map(|t| nfc(t.trim())) {
            Ok(hrl) if !hrl.is_empty() => out.pairs.push(ParallelPair {
                lrl_text: s.text.clone(),
                hrl_text: hrl,
                direction: direction.clone(),
                sentence_ref: s.reference(),
                bt_backend_id: ctx.profile.backend_id.clone(),
                bt_mode,
            }),
            other => out.failures.push(BtFailure {
                sentence_ref: s.reference(),
                lrl_text: s.text.clone(),
                bt_backend_id: ctx.profile.backend_id.clone(),
                error: other.err().unwrap_or_else(|| "empty translation".into()),
            }),
        }
    }
    if out.failures.len() as f64 > MAX_FAILURE_RATE * sentences.len() as f64 {
        return Err(TranslateError::TooManyFailures {
            failed: out.failures.len(),
            total: sentences.len(),
            output: Box::new(out),
        });
    }
    Ok(out)
}

/// Few-shot prompts with the top `cfg.shots` retrieved examples, best
/// first. Without a pool the prompts are zero-shot.
pub fn fewshot_prompts(
    sentences: &[SentenceRecord],
    cfg: &BtConfig,
    ctx: &BtContext<'_>,
) -> Result<Vec<String>, TranslateError> {
    if let Some(pool) = ctx.pool {
        if pool.side() != KeySide::Lrl {
            return Err(TranslateError::Config(
                "back-translation retrieval must be keyed on the low-resource side".into(),
            ));
        }
    } else if cfg.mode == BtStrategy::FewshotGenerator {
        return Err(TranslateError::Config("few-shot back-translation needs an example pool".into()));
    }
    sentences
        .par_iter()
        .map(|s| {
            let examples = match ctx.pool {
                Some(pool) => pool.select(&s.text, cfg.shots)?,
                None => Vec::new(),
            };
            Ok(build_few_shot_mt_prompt(ctx.names, &examples, ctx.lrl, ctx.hrl, &s.text)?)
        })
        .collect()
}

fn first_line(text: &str) -> String {
    text.trim_start().lines().next().unwrap_or("").trim().to_owned()
}

/// Drops pairs whose high-resource side shares a verified n-gram with the
/// blocklist. Returns the kept pairs and the number dropped.
pub fn assemble(pairs: Vec<ParallelPair>, hrl_blocklist: &NgramBlocklist) -> (Vec<ParallelPair>, usize) {
    let before = pairs.len();
    let kept: Vec<ParallelPair> = pairs
        .into_iter()
        .filter(|p| !hrl_blocklist.contains_overlap(&p.hrl_text))
        .collect();
    let dropped = before - kept.len();
    (kept, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus_model::{PoolEntry, SentenceStatus};
    use crate::gateway::mock;

    fn code(s: &str) -> LangCode {
        LangCode::new(s).unwrap()
    }

    fn sentence(i: usize, text: &str) -> SentenceRecord {
        SentenceRecord {
            paragraph_id: format!("p{}", i / 3),
            position: (i % 3) as u32,
            text: text.into(),
            langid_label: code("hau_Latn"),
            langid_confidence: 1.0,
            status: SentenceStatus::Kept,
        }
    }

    fn names() -> LanguageNames {
        [(code("hau_Latn"), "Hausa".to_string()), (code("eng_Latn"), "English".to_string())]
            .into_iter()
            .collect()
    }

    #[test]
    fn supervised_mock_round_trips() {
        let gateway = Gateway::new();
        let profile = BackendProfile::mock("nllb");
        let names = names();
        let (lrl, hrl) = (code("hau_Latn"), code("eng_Latn"));
        let ctx = BtContext {
            gateway: &gateway,
            profile: &profile,
            names: &names,
            pool: None,
            lrl: &lrl,
            hrl: &hrl,
        };
        let input: Vec<_> = (0..20).map(|i| sentence(i, &format!("jimla ta {i} ce."))).collect();
        let out = backtranslate(&input, &BtConfig::new(BtStrategy::SupervisedMt), &ctx, BtMode::SupervisedMt).unwrap();
        assert_eq!(out.pairs.len(), 20);
        for (p, s) in out.pairs.iter().zip(&input) {
            assert_eq!(mock::invert_translation(&p.hrl_text).unwrap().1, s.text);
            assert_eq!(p.sentence_ref, s.reference());
            assert_eq!(p.direction.source(), &hrl);
        }
    }

    #[test]
    fn fewshot_uses_retrieved_examples_in_rank_order() {
        let gateway = Gateway::new();
        let profile = BackendProfile::mock("gen");
        let names = names();
        let (lrl, hrl) = (code("hau_Latn"), code("eng_Latn"));
        let entries: Vec<PoolEntry> = (0..30)
            .map(|i| PoolEntry {
                hrl_text: format!("english {i}"),
                lrl_text: format!("hausa kalma{} kalma{}", i % 7, i % 5),
                direction: Direction::new(hrl.clone(), lrl.clone()).unwrap(),
            })
            .collect();
        let pool = ExamplePool::new(entries, KeySide::Lrl).unwrap();
        let ctx = BtContext {
            gateway: &gateway,
            profile: &profile,
            names: &names,
            pool: Some(&pool),
            lrl: &lrl,
            hrl: &hrl,
        };
        let input = vec![sentence(0, "kalma3 kalma4 ne")];
        let cfg = BtConfig::new(BtStrategy::FewshotGenerator);
        let prompt = &fewshot_prompts(&input, &cfg, &ctx).unwrap()[0];
        let hits = pool.select("kalma3 kalma4 ne", 5).unwrap();
        let expected = build_few_shot_mt_prompt(&names, &hits, &lrl, &hrl, "kalma3 kalma4 ne").unwrap();
        assert_eq!(prompt, &expected);
        let out = backtranslate(&input, &cfg, &ctx, BtMode::FewshotGenerator).unwrap();
        assert_eq!(mock::invert_translation(&out.pairs[0].hrl_text).unwrap().1, "kalma3 kalma4 ne");
    }

    #[test]
    fn failures_are_marked_and_thresholded() {
        let gateway = Gateway::new();
        let mut profile = BackendProfile::mock("gen");
        profile.mock_response = Some("   ".into());
        let names = names();
        let (lrl, hrl) = (code("hau_Latn"), code("eng_Latn"));
        let ctx = BtContext {
            gateway: &gateway,
            profile: &profile,
            names: &names,
            pool: None,
            lrl: &lrl,
            hrl: &hrl,
        };
        let input: Vec<_> = (0..4).map(|i| sentence(i, "wani abu")).collect();
        let err = backtranslate(&input, &BtConfig::new(BtStrategy::Student), &ctx, BtMode::StudentRound(0)).unwrap_err();
        match err {
            TranslateError::TooManyFailures { failed, total, output } => {
                assert_eq!((failed, total), (4, 4));
                assert_eq!(output.failures.len() + output.pairs.len(), 4);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn dropped_sentences_are_rejected() {
        let gateway = Gateway::new();
        let profile = BackendProfile::mock("nllb");
        let names = names();
        let (lrl, hrl) = (code("hau_Latn"), code("eng_Latn"));
        let ctx = BtContext {
            gateway: &gateway,
            profile: &profile,
            names: &names,
            pool: None,
            lrl: &lrl,
            hrl: &hrl,
        };
        let mut s = sentence(0, "x y z");
        s.status = SentenceStatus::DroppedLength;
        assert!(matches!(
            backtranslate(&[s], &BtConfig::new(BtStrategy::SupervisedMt), &ctx, BtMode::SupervisedMt),
            Err(TranslateError::NotKept(_))
        ));
    }

    #[test]
    fn assemble_drops_hrl_overlap() {
        let dir = Direction::new(code("eng_Latn"), code("hau_Latn")).unwrap();
        let mk = |h: &str| ParallelPair {
            lrl_text: "l".into(),
            hrl_text: h.into(),
            direction: dir.clone(),
            sentence_ref: "p:0".into(),
            bt_backend_id: "m".into(),
            bt_mode: BtMode::SupervisedMt,
        };
        let seed = "one two three four five six seven eight nine ten eleven";
        let list = NgramBlocklist::build([seed]);
        let (kept, dropped) = assemble(vec![mk(seed), mk("short text")], &list);
        assert_eq!((kept.len(), dropped), (1, 1));
    }
}
