use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{CorpusError, Direction, LangCode};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub id: u64,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedParagraph {
    pub lang: LangCode,
    pub text: String,
}

/// Inputs for prompt construction: topic list, high-resource demonstration
/// paragraphs and target-language seed sentences.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeedPools {
    pub topics: Vec<Topic>,
    pub seed_paragraphs: Vec<SeedParagraph>,
    pub seed_sentences: BTreeMap<LangCode, Vec<String>>,
}

impl SeedPools {
    /// Checks the pools a generation run for `target` depends on.
    pub fn check_for(&self, target: &LangCode) -> Result<(), CorpusError> {
        if self.topics.is_empty() {
            return Err(CorpusError::Invalid("topic pool is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for topic in &self.topics {
            if topic.label.trim().is_empty() {
                return Err(CorpusError::Invalid(format!("topic {} has an empty label", topic.id)));
            }
            if !seen.insert(topic.id) {
                return Err(CorpusError::Invalid(format!("duplicate topic id {}", topic.id)));
            }
        }
        if !self.seed_paragraphs.iter().any(|p| &p.lang != target) {
            return Err(CorpusError::Invalid(format!(
                "no seed paragraphs in a language other than {target}"
            )));
        }
        match self.seed_sentences.get(target) {
            Some(s) if !s.is_empty() => Ok(()),
            _ => Err(CorpusError::Invalid(format!("no seed sentences for {target}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedParagraph {
    pub id: String,
    pub topic: Topic,
    pub target_lang: LangCode,
    pub text: String,
    pub prompt_fingerprint: String,
    pub backend_id: String,
    pub temperature: f64,
    pub max_pool_overlap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SentenceStatus {
    Kept,
    DroppedLangid,
    DroppedDecontaminated,
    DroppedLength,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub paragraph_id: String,
    pub position: u32,
    pub text: String,
    pub langid_label: LangCode,
    pub langid_confidence: f64,
    pub status: SentenceStatus,
}

impl SentenceRecord {
    /// Reference used by [`ParallelPair::sentence_ref`]: `<paragraph_id>:<position>`.
    pub fn reference(&self) -> String {
        format!("{}:{}", self.paragraph_id, self.position)
    }

    pub fn is_kept(&self) -> bool {
        self.status == SentenceStatus::Kept
    }
}

/// Which back-translator produced the high-resource side of a pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BtMode {
    SupervisedMt,
    FewshotGenerator,
    /// Student model of self-improvement round `k`.
    StudentRound(u32),
}

impl fmt::Display for BtMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BtMode::SupervisedMt => f.write_str("supervised_mt"),
            BtMode::FewshotGenerator => f.write_str("fewshot_generator"),
            BtMode::StudentRound(k) => write!(f, "student_round_{k}"),
        }
    }
}

impl std::str::FromStr for BtMode {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "supervised_mt" => Ok(BtMode::SupervisedMt),
            "fewshot_generator" => Ok(BtMode::FewshotGenerator),
            other => other
                .strip_prefix("student_round_")
                .and_then(|k| k.parse().ok())
                .map(BtMode::StudentRound)
                .ok_or_else(|| CorpusError::Invalid(format!("unknown bt_mode {other:?}"))),
        }
    }
}

impl Serialize for BtMode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BtMode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A synthetic sentence pair. `direction` is the training direction
/// `(hrl, lrl)`: the back-translated high-resource side is the source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParallelPair {
    pub lrl_text: String,
    pub hrl_text: String,
    pub direction: Direction,
    pub sentence_ref: String,
    pub bt_backend_id: String,
    pub bt_mode: BtMode,
}

impl ParallelPair {
    pub fn check(&self) -> Result<(), CorpusError> {
        if self.lrl_text.trim().is_empty() || self.hrl_text.trim().is_empty() {
            return Err(CorpusError::Invalid(format!(
                "pair {} has an empty side",
                self.sentence_ref
            )));
        }
        Ok(())
    }
}

/// Anything that carries the two sides of a translation example.
pub trait Bitext {
    /// `(hrl, lrl)` languages of the example.
    fn direction(&self) -> &Direction;
    fn hrl_text(&self) -> &str;
    fn lrl_text(&self) -> &str;

    /// The side written in `lang`, if the example covers it.
    fn text_in(&self, lang: &LangCode) -> Option<&str> {
        if lang == self.direction().source() {
            Some(self.hrl_text())
        } else if lang == self.direction().target() {
            Some(self.lrl_text())
        } else {
            None
        }
    }
}

impl<B: Bitext + ?Sized> Bitext for &B {
    fn direction(&self) -> &Direction {
        (**self).direction()
    }
    fn hrl_text(&self) -> &str {
        (**self).hrl_text()
    }
    fn lrl_text(&self) -> &str {
        (**self).lrl_text()
    }
}

impl Bitext for ParallelPair {
    fn direction(&self) -> &Direction {
        &self.direction
    }
    fn hrl_text(&self) -> &str {
        &self.hrl_text
    }
    fn lrl_text(&self) -> &str {
        &self.lrl_text
    }
}

/// A human-translated example used as a few-shot demonstration. Every
/// `pairs.jsonl` line also parses as a `PoolEntry`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub hrl_text: String,
    pub lrl_text: String,
    pub direction: Direction,
}

impl Bitext for PoolEntry {
    fn direction(&self) -> &Direction {
        &self.direction
    }
    fn hrl_text(&self) -> &str {
        &self.hrl_text
    }
    fn lrl_text(&self) -> &str {
        &self.lrl_text
    }
}

impl From<&ParallelPair> for PoolEntry {
    fn from(p: &ParallelPair) -> Self {
        Self {
            hrl_text: p.hrl_text.clone(),
            lrl_text: p.lrl_text.clone(),
            direction: p.direction.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalSegment {
    pub source: String,
    pub reference: String,
}

/// An evaluation set such as a devtest split, stored as JSONL of
/// `{source, reference}` lines.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalSegmentSet {
    pub name: String,
    pub segments: Vec<EvalSegment>,
}

impl EvalSegmentSet {
    pub fn new(name: impl Into<String>, segments: Vec<EvalSegment>) -> Result<Self, CorpusError> {
        let name = name.into();
        if segments.is_empty() {
            return Err(CorpusError::Invalid(format!("evaluation set {name} is empty")));
        }
        Ok(Self { name, segments })
    }

    pub fn from_parallel(
        name: impl Into<String>,
        sources: Vec<String>,
        references: Vec<String>,
    ) -> Result<Self, CorpusError> {
        if sources.len() != references.len() {
            return Err(CorpusError::Invalid(format!(
                "{} sources but {} references",
                sources.len(),
                references.len()
            )));
        }
        let segments = sources
            .into_iter()
            .zip(references)
            .map(|(source, reference)| EvalSegment { source, reference })
            .collect();
        Self::new(name, segments)
    }

    pub fn sources(&self) -> Vec<&str> {
        self.segments.iter().map(|s| s.source.as_str()).collect()
    }

    pub fn references(&self) -> Vec<&str> {
        self.segments.iter().map(|s| s.reference.as_str()).collect()
    }
}
