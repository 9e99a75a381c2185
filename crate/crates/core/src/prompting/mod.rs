//! Prompt and training-record construction.
//!
//! Every builder is a pure function of its inputs and, for generation
//! prompts, of the random generator handed in.

mod finetune;
mod mt;
mod template;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus_model::{LangCode, SeedPools, Topic};
pub use finetune::{emit_finetune_records, TrainingRecord};
pub use mt::{build_few_shot_mt_prompt, build_zero_shot_mt_prompt};
pub use template::{render, GenerationTemplate};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PromptError {
    #[error("{pool} pool has {available} item(s), {requested} requested")]
    PoolExhausted {
        pool: String,
        requested: usize,
        available: usize,
    },
    #[error("no display name configured for language {0}")]
    UnknownLanguage(LangCode),
    #[error("{0}")]
    Contract(String),
    #[error("template: {0}")]
    Template(String),
}

/// Display names used inside prompts ("Hausa" for `hau_Latn`).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LanguageNames(BTreeMap<LangCode, String>);

impl LanguageNames {
    pub fn name(&self, code: &LangCode) -> Result<&str, PromptError> {
        self.0
            .get(code)
            .map(String::as_str)
            .ok_or_else(|| PromptError::UnknownLanguage(code.clone()))
    }

    pub fn insert(&mut self, code: LangCode, name: impl Into<String>) {
        self.0.insert(code, name.into());
    }
}

impl<S: Into<String>> FromIterator<(LangCode, S)> for LanguageNames {
    fn from_iter<I: IntoIterator<Item = (LangCode, S)>>(iter: I) -> Self {
        Self(iter.into_iter().map(|(k, v)| (k, v.into())).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Generation,
    MtZeroShot,
    MtFewShot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub kind: PromptKind,
    pub target_lang: LangCode,
    pub topic: Option<Topic>,
    pub k_seed_paragraphs: usize,
    pub m_seed_sentences: usize,
    pub shots: usize,
}

impl PromptSpec {
    /// Generation prompt with the default two seed paragraphs and five seed
    /// sentences.
    pub fn generation(target_lang: LangCode, topic: Topic) -> Self {
        Self {
            kind: PromptKind::Generation,
            target_lang,
            topic: Some(topic),
            k_seed_paragraphs: 2,
            m_seed_sentences: 5,
            shots: 0,
        }
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        match self.kind {
            PromptKind::Generation if self.topic.is_none() => {
                Err(PromptError::Contract("generation prompts need a topic".into()))
            }
            PromptKind::MtFewShot if self.shots == 0 => {
                Err(PromptError::Contract("few-shot prompts need at least one shot".into()))
            }
            _ => Ok(()),
        }
    }
}

/// `k` distinct indices from `0..n` by partial Fisher-Yates: for slot `i`,
/// swap in a uniform pick from `i..n`.
pub fn sample_indices(rng: &mut impl Rng, n: usize, k: usize) -> Vec<usize> {
    debug_assert!(k <= n);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.gen_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}

/// Topic-guided paragraph generation prompt.
///
/// Sections, in order: instruction (target language and topic), `k`
/// high-resource seed paragraphs labelled with their language, `m`
/// target-language seed sentences, and the closing cue. Seed paragraphs in
/// the target language itself are never used. Paragraphs are sampled before
/// sentences, both without replacement.
pub fn build_generation_prompt(
    spec: &PromptSpec,
    pools: &SeedPools,
    names: &LanguageNames,
    template: &GenerationTemplate,
    rng: &mut impl Rng,
) -> Result<String, PromptError> {
    spec.validate()?;
    if spec.kind != PromptKind::Generation {
        return Err(PromptError::Contract(format!("{:?} is not a generation prompt", spec.kind)));
    }
    let topic = spec.topic.as_ref().expect("validated");
    let lang_name = names.name(&spec.target_lang)?;
    let code = spec.target_lang.as_str();
    let base = [("lang_name", lang_name), ("lang_code", code), ("topic", topic.label.as_str())];

    let demos: Vec<_> = pools
        .seed_paragraphs
        .iter()
        .filter(|p| p.lang != spec.target_lang)
        .collect();
    if spec.k_seed_paragraphs > demos.len() {
        return Err(PromptError::PoolExhausted {
            pool: "seed paragraph".into(),
            requested: spec.k_seed_paragraphs,
            available: demos.len(),
        });
    }
    let sentences: &[String] = pools
        .seed_sentences
        .get(&spec.target_lang)
        .map(Vec::as_slice)
        .unwrap_or_default();
    if spec.m_seed_sentences > sentences.len() {
        return Err(PromptError::PoolExhausted {
            pool: format!("{} seed sentence", spec.target_lang),
            requested: spec.m_seed_sentences,
            available: sentences.len(),
        });
    }

    let mut sections = vec![render(&template.instruction, &base)];
    if spec.k_seed_paragraphs > 0 {
        let mut block = render(&template.paragraphs_header, &base);
        for i in sample_indices(rng, demos.len(), spec.k_seed_paragraphs) {
            let p = demos[i];
            let name = names.name(&p.lang).unwrap_or(p.lang.as_str());
            block.push_str("\n\n");
            block.push_str(&render(&template.paragraph_item, &[("lang_name", name), ("text", p.text.trim())]));
        }
        sections.push(block);
    }
    if spec.m_seed_sentences > 0 {
        let mut block = render(&template.sentences_header, &base);
        for i in sample_indices(rng, sentences.len(), spec.m_seed_sentences) {
            block.push('\n');
            block.push_str(&render(&template.sentence_item, &[("text", sentences[i].trim())]));
        }
        sections.push(block);
    }
    sections.push(render(&template.cue, &base));
    Ok(sections.join("\n\n"))
}
