use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::jsonl::{read_json, read_jsonl};
use super::{CorpusError, GeneratedParagraph, LangCode, ParallelPair, SentenceRecord, SentenceStatus};

/// Per-language record counts after each stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub paragraphs: u64,
    pub sentences_raw: u64,
    pub sentences_after_langid: u64,
    pub sentences_after_decon: u64,
    pub pairs: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timestamps {
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    /// Completion time of each finished stage.
    #[serde(default)]
    pub stages: BTreeMap<String, DateTime<Utc>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config_fingerprint: String,
    pub counts: BTreeMap<LangCode, StageCounts>,
    /// Paragraphs still missing when a generation budget ran out.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub shortfall: BTreeMap<LangCode, u64>,
    pub timestamps: Timestamps,
}

impl RunManifest {
    pub fn new(run_id: impl Into<String>, config_fingerprint: impl Into<String>) -> Self {
        let now = Utc::now();
        Self {
            run_id: run_id.into(),
            config_fingerprint: config_fingerprint.into(),
            counts: BTreeMap::new(),
            shortfall: BTreeMap::new(),
            timestamps: Timestamps {
                created_at: now,
                updated_at: now,
                stages: BTreeMap::new(),
            },
        }
    }

    pub fn counts_mut(&mut self, lang: &LangCode) -> &mut StageCounts {
        self.counts.entry(lang.clone()).or_default()
    }

    pub fn mark_stage(&mut self, stage: &str) {
        let now = Utc::now();
        self.timestamps.stages.insert(stage.to_owned(), now);
        self.timestamps.updated_at = now;
    }

    pub fn stage_done(&self, stage: &str) -> bool {
        self.timestamps.stages.contains_key(stage)
    }
}

/// One broken manifest invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub lang: Option<LangCode>,
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.lang {
            Some(l) => write!(f, "[{l}] {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

pub fn load_manifest(path: &Path) -> Result<RunManifest, CorpusError> {
    read_json(path)
}

/// Internal consistency of the manifest. Empty iff every invariant holds.
pub fn validate_manifest(manifest: &RunManifest) -> Vec<Violation> {
    let mut out = Vec::new();
    if manifest.run_id.trim().is_empty() {
        out.push(Violation {
            lang: None,
            field: "run_id".into(),
            message: "empty".into(),
        });
    }
    for (lang, c) in &manifest.counts {
        let mut push = |field: &str, message: String| {
            out.push(Violation {
                lang: Some(lang.clone()),
                field: field.into(),
                message,
            })
        };
        if c.sentences_after_langid > c.sentences_raw {
            push(
                "sentences_after_langid",
                format!("{} exceeds sentences_raw {}", c.sentences_after_langid, c.sentences_raw),
            );
        }
        if c.sentences_after_decon > c.sentences_after_langid {
            push(
                "sentences_after_decon",
                format!(
                    "{} exceeds sentences_after_langid {}",
                    c.sentences_after_decon, c.sentences_after_langid
                ),
            );
        }
        if c.pairs > c.sentences_after_decon {
            push(
                "pairs",
                format!("{} exceeds sentences_after_decon {}", c.pairs, c.sentences_after_decon),
            );
        }
    }
    out
}

/// Fixed file names inside `<runs_dir>/<run_id>/`.
#[derive(Clone, Debug)]
pub struct RunLayout {
    dir: PathBuf,
}

impl RunLayout {
    pub fn new(runs_dir: &Path, run_id: &str) -> Self {
        Self {
            dir: runs_dir.join(run_id),
        }
    }

    pub fn at(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
    pub fn paragraphs(&self) -> PathBuf {
        self.dir.join("paragraphs.jsonl")
    }
    pub fn sentences(&self) -> PathBuf {
        self.dir.join("sentences.jsonl")
    }
    pub fn pairs(&self) -> PathBuf {
        self.dir.join("pairs.jsonl")
    }
    pub fn manifest(&self) -> PathBuf {
        self.dir.join("manifest.json")
    }
    pub fn generation_state(&self, lang: &LangCode) -> PathBuf {
        self.dir.join(format!("generation_state.{lang}.json"))
    }
    /// Raw back-translations before high-resource-side decontamination.
    pub fn bt_pairs(&self) -> PathBuf {
        self.dir.join("bt_pairs.jsonl")
    }
    pub fn bt_failures(&self) -> PathBuf {
        self.dir.join("bt_failures.jsonl")
    }
    pub fn stats(&self) -> PathBuf {
        self.dir.join("stats.json")
    }
    pub fn selfloop_dir(&self) -> PathBuf {
        self.dir.join("selfloop")
    }
}

/// Checks the manifest against the records actually on disk: counts must
/// match and every reference must resolve.
pub fn validate_against_data(layout: &RunLayout, manifest: &RunManifest) -> Result<Vec<Violation>, CorpusError> {
    let mut out = validate_manifest(manifest);

    let paragraphs: Vec<GeneratedParagraph> = read_if_exists(&layout.paragraphs())?;
    let sentences: Vec<SentenceRecord> = read_if_exists(&layout.sentences())?;
    let pairs: Vec<ParallelPair> = read_if_exists(&layout.pairs())?;

    let mut actual: BTreeMap<LangCode, StageCounts> = BTreeMap::new();
    let mut para_lang: HashMap<&str, &LangCode> = HashMap::new();
    for p in &paragraphs {
        para_lang.insert(&p.id, &p.target_lang);
        actual.entry(p.target_lang.clone()).or_default().paragraphs += 1;
    }

    let mut positions: HashMap<&str, Vec<u32>> = HashMap::new();
    let mut kept_refs: HashMap<String, &LangCode> = HashMap::new();
    for s in &sentences {
        let Some(lang) = para_lang.get(s.paragraph_id.as_str()) else {
            out.push(Violation {
                lang: None,
                field: "sentences".into(),
                message: format!("sentence references unknown paragraph {}", s.paragraph_id),
            });
            continue;
        };
        positions.entry(&s.paragraph_id).or_default().push(s.position);
        let c = actual.entry((*lang).clone()).or_default();
        c.sentences_raw += 1;
        if s.status != SentenceStatus::DroppedLangid {
            c.sentences_after_langid += 1;
        }
        if s.is_kept() {
            c.sentences_after_decon += 1;
            kept_refs.insert(s.reference(), lang);
        }
    }
    for (pid, mut pos) in positions {
        pos.sort_unstable();
        if pos.iter().enumerate().any(|(i, p)| *p as usize != i) {
            out.push(Violation {
                lang: None,
                field: "sentences".into(),
                message: format!("positions of paragraph {pid} are not consecutive from 0"),
            });
        }
    }
    for p in &pairs {
        match kept_refs.get(&p.sentence_ref) {
            Some(lang) => actual.entry((*lang).clone()).or_default().pairs += 1,
            None => out.push(Violation {
                lang: None,
                field: "pairs".into(),
                message: format!("pair references missing or dropped sentence {}", p.sentence_ref),
            }),
        }
    }

    let langs: std::collections::BTreeSet<&LangCode> =
        manifest.counts.keys().chain(actual.keys()).collect();
    for lang in langs {
        let claimed = manifest.counts.get(lang).copied().unwrap_or_default();
        let found = actual.get(lang).copied().unwrap_or_default();
        let fields = [
            ("paragraphs", claimed.paragraphs, found.paragraphs),
            ("sentences_raw", claimed.sentences_raw, found.sentences_raw),
            ("sentences_after_langid", claimed.sentences_after_langid, found.sentences_after_langid),
            ("sentences_after_decon", claimed.sentences_after_decon, found.sentences_after_decon),
            ("pairs", claimed.pairs, found.pairs),
        ];
        for (field, c, f) in fields {
            if c != f {
                out.push(Violation {
                    lang: Some(lang.clone()),
                    field: field.into(),
                    message: format!("manifest says {c}, data has {f}"),
                });
            }
        }
    }
    Ok(out)
}

fn read_if_exists<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    if path.exists() {
        read_jsonl(path)
    } else {
        Ok(Vec::new())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest_with(c: StageCounts) -> RunManifest {
        let mut m = RunManifest::new("run", "fp");
        *m.counts_mut(&"hau_Latn".parse().unwrap()) = c;
        m
    }

    fn counts(v: [u64; 5]) -> StageCounts {
        StageCounts {
            paragraphs: v[0],
            sentences_raw: v[1],
            sentences_after_langid: v[2],
            sentences_after_decon: v[3],
            pairs: v[4],
        }
    }

    #[test]
    fn monotone_chain_is_valid() {
        assert!(validate_manifest(&manifest_with(counts([100, 800, 780, 779, 779]))).is_empty());
    }

    #[test]
    fn decon_above_langid_is_one_violation() {
        let v = validate_manifest(&manifest_with(counts([100, 800, 780, 790, 700])));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "sentences_after_decon");
    }

    #[test]
    fn pairs_above_decon_names_pairs() {
        let v = validate_manifest(&manifest_with(counts([100, 800, 780, 779, 800])));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "pairs");
    }

    #[test]
    fn ill_formed_file_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        std::fs::write(&path, "{ not json").unwrap();
        assert!(matches!(load_manifest(&path), Err(CorpusError::Parse { .. })));
        assert!(matches!(
            load_manifest(&dir.path().join("absent.json")),
            Err(CorpusError::Io { .. })
        ));
    }

    #[test]
    fn manifest_round_trips() {
        let m = manifest_with(counts([1, 2, 2, 2, 1]));
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<RunManifest>(&json).unwrap(), m);
    }
}
