//! Paragraph generation with near-duplicate rejection.
//!
//! Backend calls for one wave of attempts run concurrently. Acceptance is
//! decided afterwards in attempt order, so the accepted sequence depends
//! only on the seed and the backend's outputs.

mod judge;
mod pool;
mod rouge;

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus_model::{
    derive_seed, fingerprint, read_json, read_jsonl_lenient, stable_id, write_json, write_jsonl,
    CorpusError, GeneratedParagraph, JsonlAppender, LangCode, RunLayout, SeedPools,
};
use crate::gateway::{BackendKind, BackendProfile, CompletionResult, DecodeParams, Gateway, GatewayError};
use crate::normalize::{nfc, normalized_tokens};
use crate::prompting::{build_generation_prompt, GenerationTemplate, LanguageNames, PromptError, PromptSpec};

pub use judge::{judge_prompt, judge_topic_alignment, parse_verdict, TopicVerdict};
pub use pool::AcceptedPool;
pub use rouge::rouge1_f;

/// Temperatures above this are accepted but logged as likely to degrade output.
pub const TEMPERATURE_WARN_ABOVE: f64 = 1.2;

#[derive(Debug, thiserror::Error)]
pub enum GenerationError {
    #[error("invalid generation config: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub target_lang: LangCode,
    pub n_target_paragraphs: usize,
    #[serde(default = "default_threshold")]
    pub rouge_threshold: f64,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_attempts")]
    pub max_attempts_per_slot: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_k")]
    pub k_seed_paragraphs: usize,
    #[serde(default = "default_m")]
    pub m_seed_sentences: usize,
    #[serde(default = "default_max_new_tokens")]
    pub max_new_tokens: u32,
}

fn default_threshold() -> f64 {
    0.7
}
fn default_temperature() -> f64 {
    1.0
}
fn default_attempts() -> usize {
    5
}
fn default_k() -> usize {
    2
}
fn default_m() -> usize {
    5
}
fn default_max_new_tokens() -> u32 {
    512
}

impl GenerationConfig {
    pub fn new(target_lang: LangCode, n_target_paragraphs: usize, seed: u64) -> Self {
        Self {
            target_lang,
            n_target_paragraphs,
            rouge_threshold: default_threshold(),
            temperature: default_temperature(),
            max_attempts_per_slot: default_attempts(),
            seed,
            k_seed_paragraphs: default_k(),
            m_seed_sentences: default_m(),
            max_new_tokens: default_max_new_tokens(),
        }
    }

    pub fn validate(&self) -> Result<(), GenerationError> {
        if self.n_target_paragraphs == 0 {
            return Err(GenerationError::Config("n_target_paragraphs must be >= 1".into()));
        }
        if !(self.rouge_threshold > 0.0 && self.rouge_threshold <= 1.0) {
            return Err(GenerationError::Config(format!(
                "rouge_threshold {} is outside (0, 1]",
                self.rouge_threshold
            )));
        }
        if self.max_attempts_per_slot == 0 {
            return Err(GenerationError::Config("max_attempts_per_slot must be >= 1".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(GenerationError::Config(format!("temperature {} must be >= 0", self.temperature)));
        }
        if self.temperature > TEMPERATURE_WARN_ABOVE {
            tracing::warn!(
                temperature = self.temperature,
                "generation temperature above {TEMPERATURE_WARN_ABOVE}; expect degenerate output"
            );
        }
        Ok(())
    }

    /// Total number of backend calls a run may spend.
    pub fn attempt_budget(&self) -> usize {
        self.n_target_paragraphs * self.max_attempts_per_slot
    }
}

/// Resumption point, persisted after every wave.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationState {
    pub next_attempt: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationOutcome {
    pub lang: LangCode,
    pub accepted: usize,
    pub attempts: usize,
    pub rejected: usize,
    pub failed: usize,
    /// Paragraphs still missing when the budget ran out.
    pub shortfall: usize,
}

/// Everything a generation run reads besides its config.
pub struct GenerationContext<'a> {
    pub pools: &'a SeedPools,
    pub names: &'a LanguageNames,
    pub template: &'a GenerationTemplate,
    pub gateway: &'a Gateway,
    pub profile: &'a BackendProfile,
    pub run_id: &'a str,
}

struct Attempt {
    index: usize,
    topic: crate::corpus_model::Topic,
    prompt: String,
}

pub fn run_generation(
    config: &GenerationConfig,
    ctx: &GenerationContext<'_>,
    layout: &RunLayout,
) -> Result<GenerationOutcome, GenerationError> {
    config.validate()?;
    ctx.pools.check_for(&config.target_lang)?;
    if !matches!(ctx.profile.kind, BackendKind::ChatLlm | BackendKind::Mock) {
        return Err(GatewayError::WrongKind {
            backend_id: ctx.profile.backend_id.clone(),
            kind: ctx.profile.kind,
            operation: "generation",
        }
        .into());
    }
    std::fs::create_dir_all(layout.dir()).map_err(|e| CorpusError::io(layout.dir(), e))?;

    let lang = &config.target_lang;
    let state_path = layout.generation_state(lang);
    let mut state: GenerationState = if state_path.exists() {
        read_json(&state_path)?
    } else {
        GenerationState::default()
    };
    let mut pool = restore_pool(&layout.paragraphs(), lang, state.accepted)?;
    let budget = config.attempt_budget();
    let mut out = JsonlAppender::open(&layout.paragraphs())?;
    let wave = ctx.profile.max_parallel_requests.max(1);

    while state.accepted < config.n_target_paragraphs && state.next_attempt < budget {
        let end = (state.next_attempt + wave).min(budget);
        let attempts = (state.next_attempt..end)
            .map(|i| prepare_attempt(config, ctx, i))
            .collect::<Result<Vec<_>, _>>()?;
        let replies = call_concurrently(ctx, config, &attempts);

        for (attempt, reply) in attempts.into_iter().zip(replies) {
            if state.accepted == config.n_target_paragraphs {
                break;
            }
            state.next_attempt = attempt.index + 1;
            let text = match reply {
                Ok(r) => nfc(r.text.trim()),
                Err(err) => {
                    tracing::warn!(attempt = attempt.index, error = %err, "generation attempt failed");
                    state.failed += 1;
                    continue;
                }
            };
            let tokens = normalized_tokens(&text);
            if tokens.is_empty() {
                state.rejected += 1;
                continue;
            }
            let (score, _) = pool.max_overlap_tokens(&tokens);
            if score >= config.rouge_threshold {
                state.rejected += 1;
                continue;
            }
            let id = paragraph_id(ctx.run_id, lang, attempt.index);
            let record = GeneratedParagraph {
                id: id.clone(),
                topic: attempt.topic,
                target_lang: lang.clone(),
                text,
                prompt_fingerprint: fingerprint(&attempt.prompt),
                backend_id: ctx.profile.backend_id.clone(),
                temperature: config.temperature,
                max_pool_overlap: score,
            };
            out.append(&record)?;
            pool.insert_tokens(id, &tokens);
            state.accepted += 1;
        }
        write_json(&state_path, &state)?;
    }
    write_json(&state_path, &state)?;

    let outcome = GenerationOutcome {
        lang: lang.clone(),
        accepted: state.accepted,
        attempts: state.next_attempt,
        rejected: state.rejected,
        failed: state.failed,
        shortfall: config.n_target_paragraphs - state.accepted,
    };
    if outcome.shortfall > 0 {
        tracing::warn!(lang = %lang, shortfall = outcome.shortfall, "attempt budget exhausted before target");
    }
    Ok(outcome)
}

pub fn paragraph_id(run_id: &str, lang: &LangCode, attempt: usize) -> String {
    stable_id(&[run_id.as_bytes(), lang.as_str().as_bytes(), &(attempt as u64).to_le_bytes()])
}

fn prepare_attempt(
    config: &GenerationConfig,
    ctx: &GenerationContext<'_>,
    index: usize,
) -> Result<Attempt, GenerationError> {
    let stage = format!("generate/{}", config.target_lang);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &stage, index as u64));
    let topic = ctx.pools.topics[rng.gen_range(0..ctx.pools.topics.len())].clone();
    let spec = PromptSpec {
        k_seed_paragraphs: config.k_seed_paragraphs,
        m_seed_sentences: config.m_seed_sentences,
        ..PromptSpec::generation(config.target_lang.clone(), topic.clone())
    };
    let prompt = build_generation_prompt(&spec, ctx.pools, ctx.names, ctx.template, &mut rng)?;
    Ok(Attempt { index, topic, prompt })
}

fn call_concurrently(
    ctx: &GenerationContext<'_>,
    config: &GenerationConfig,
    attempts: &[Attempt],
) -> Vec<Result<CompletionResult, GatewayError>> {
    let stage = format!("generate-decode/{}", config.target_lang);
    std::thread::scope(|s| {
        let handles: Vec<_> = attempts
            .iter()
            .map(|a| {
                let params = DecodeParams {
                    max_new_tokens: config.max_new_tokens,
                    ..DecodeParams::sampling(config.temperature)
                }
                .with_seed(derive_seed(config.seed, &stage, a.index as u64));
                s.spawn(move || ctx.gateway.complete(ctx.profile, &a.prompt, &params))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("backend call thread panicked"))
            .collect()
    })
}

/// Rebuilds the pool from paragraphs already on disk. Records beyond the
/// persisted acceptance count were written by an interrupted wave and are
/// dropped so the run replays them deterministically.
fn restore_pool(path: &Path, lang: &LangCode, accepted: usize) -> Result<AcceptedPool, GenerationError> {
    let mut pool = AcceptedPool::new();
    if !path.exists() {
        return Ok(pool);
    }
    let all: Vec<GeneratedParagraph> = read_jsonl_lenient(path)?;
    let mut kept = Vec::with_capacity(all.len());
    let mut seen = 0usize;
    let mut truncated = false;
    for p in all {
        if &p.target_lang == lang {
            if seen == accepted {
                truncated = true;
                continue;
            }
            seen += 1;
            pool.insert_text(p.id.clone(), &p.text);
        }
        kept.push(p);
    }
    if seen < accepted {
        return Err(CorpusError::Invalid(format!(
            "{}: state records {accepted} accepted {lang} paragraphs but only {seen} are present",
            path.display()
        ))
        .into());
    }
    let torn = !std::fs::read(path)
        .map_err(|e| CorpusError::io(path, e))?
        .ends_with(b"\n");
    if truncated || torn {
        tracing::info!(lang = %lang, "dropping paragraphs written after the last saved state");
        write_jsonl(path, &kept)?;
    }
    Ok(pool)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus_model::{SeedParagraph, Topic};

    fn code(s: &str) -> LangCode {
        LangCode::new(s).unwrap()
    }

    fn fixture() -> (SeedPools, LanguageNames) {
        let hau = code("hau_Latn");
        let pools = SeedPools {
            topics: (0..20)
                .map(|i| Topic {
                    id: i,
                    label: format!("topic {i}"),
                })
                .collect(),
            seed_paragraphs: (0..4)
                .map(|i| SeedParagraph {
                    lang: code("eng_Latn"),
                    text: format!("An example paragraph number {i}."),
                })
                .collect(),
            seed_sentences: [(hau.clone(), (0..10).map(|i| format!("jimla ta {i}.")).collect())].into(),
        };
        let names = [(hau, "Hausa".to_string()), (code("eng_Latn"), "English".to_string())]
            .into_iter()
            .collect();
        (pools, names)
    }

    fn run(config: &GenerationConfig, profile: &BackendProfile, dir: &Path) -> GenerationOutcome {
        let (pools, names) = fixture();
        let template = GenerationTemplate::default();
        let gateway = Gateway::new();
        let ctx = GenerationContext {
            pools: &pools,
            names: &names,
            template: &template,
            gateway: &gateway,
            profile,
            run_id: "test-run",
        };
        run_generation(config, &ctx, &RunLayout::at(dir)).unwrap()
    }

    #[test]
    fn deterministic_across_runs() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let config = GenerationConfig::new(code("hau_Latn"), 50, 7);
        let profile = BackendProfile::mock("gen");
        let oa = run(&config, &profile, a.path());
        let ob = run(&config, &profile, b.path());
        assert_eq!(oa, ob);
        assert_eq!(oa.accepted, 50);
        let pa = std::fs::read(RunLayout::at(a.path()).paragraphs()).unwrap();
        let pb = std::fs::read(RunLayout::at(b.path()).paragraphs()).unwrap();
        assert_eq!(pa, pb);
    }

    #[test]
    fn repeated_output_accepts_once() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = GenerationConfig::new(code("hau_Latn"), 4, 1);
        config.max_attempts_per_slot = 3;
        let mut profile = BackendProfile::mock("gen");
        profile.mock_response = Some("Kullum dai abu daya ne.".into());
        let out = run(&config, &profile, dir.path());
        assert_eq!(out.accepted, 1);
        assert_eq!(out.attempts, 12);
        assert_eq!(out.rejected, 11);
        assert_eq!(out.shortfall, 3);
    }

    #[test]
    fn accepted_paragraphs_stay_below_threshold_against_their_prefix() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = GenerationConfig::new(code("hau_Latn"), 30, 3);
        config.rouge_threshold = 0.35;
        run(&config, &BackendProfile::mock("gen"), dir.path());
        let paras: Vec<GeneratedParagraph> = crate::corpus_model::read_jsonl(&RunLayout::at(dir.path()).paragraphs()).unwrap();
        for (i, p) in paras.iter().enumerate() {
            let cand = normalized_tokens(&p.text);
            let best = paras[..i]
                .iter()
                .map(|q| rouge1_f(&cand, &normalized_tokens(&q.text)))
                .fold(0.0, f64::max);
            assert!(best < config.rouge_threshold);
            assert_eq!(best, p.max_pool_overlap);
        }
    }

    #[test]
    fn resume_after_completion_makes_no_calls() {
        let dir = tempfile::tempdir().unwrap();
        let config = GenerationConfig::new(code("hau_Latn"), 10, 5);
        let profile = BackendProfile::mock("gen");
        let first = run(&config, &profile, dir.path());
        let before = std::fs::read(RunLayout::at(dir.path()).paragraphs()).unwrap();

        let (pools, names) = fixture();
        let template = GenerationTemplate::default();
        let gateway = Gateway::new();
        let ctx = GenerationContext {
            pools: &pools,
            names: &names,
            template: &template,
            gateway: &gateway,
            profile: &profile,
            run_id: "test-run",
        };
        let again = run_generation(&config, &ctx, &RunLayout::at(dir.path())).unwrap();
        assert_eq!(first, again);
        assert_eq!(gateway.call_count(), 0);
        assert_eq!(before, std::fs::read(RunLayout::at(dir.path()).paragraphs()).unwrap());
    }

    #[test]
    fn interrupted_run_resumes_to_the_same_output() {
        let full = tempfile::tempdir().unwrap();
        let config = GenerationConfig::new(code("hau_Latn"), 12, 9);
        let profile = BackendProfile::mock("gen");
        run(&config, &profile, full.path());

        let part = tempfile::tempdir().unwrap();
        let mut short = config.clone();
        short.n_target_paragraphs = 5;
        run(&short, &profile, part.path());
        // Simulate a crash mid-wave: one extra record beyond the saved state.
        let layout = RunLayout::at(part.path());
        let extra: Vec<GeneratedParagraph> = crate::corpus_model::read_jsonl(&RunLayout::at(full.path()).paragraphs()).unwrap();
        let mut app = JsonlAppender::open(&layout.paragraphs()).unwrap();
        app.append(&extra[7]).unwrap();
        drop(app);
        run(&config, &profile, part.path());
        assert_eq!(
            std::fs::read(RunLayout::at(full.path()).paragraphs()).unwrap(),
            std::fs::read(layout.paragraphs()).unwrap()
        );
    }

    #[test]
    fn config_validation() {
        let mut c = GenerationConfig::new(code("hau_Latn"), 1, 0);
        c.rouge_threshold = 0.0;
        assert!(c.validate().is_err());
        c.rouge_threshold = 1.0;
        assert!(c.validate().is_ok());
        c.temperature = 1.5;
        assert!(c.validate().is_ok());
        c.n_target_paragraphs = 0;
        assert!(c.validate().is_err());
    }
}
