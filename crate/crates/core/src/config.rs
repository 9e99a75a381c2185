//! Run configuration: one TOML file that fixes every parameter of a run.
//! Relative paths are resolved against the file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus_model::{fingerprint, LangCode};
use crate::gateway::BackendProfile;
use crate::metrics::{BleuParams, BootstrapParams, ChrfParams};
use crate::prompting::LanguageNames;
use crate::text_pipeline::{SplitterRules, DEFAULT_CONFIDENCE_THRESHOLD};
use crate::translate::BtConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub run_id: Option<String>,
    pub master_seed: u64,
    #[serde(default = "default_runs_dir")]
    pub runs_dir: PathBuf,
    /// The high-resource language every pair is back-translated into.
    pub hrl: LangCode,
    /// Low-resource languages to generate.
    pub languages: Vec<LangCode>,
    #[serde(default)]
    pub language_names: LanguageNames,
    pub paths: Paths,
    pub backends: Vec<BackendProfile>,
    pub roles: Roles,
    #[serde(default)]
    pub generation: GenerationSettings,
    #[serde(default)]
    pub splitter: SplitterRules,
    #[serde(default)]
    pub filters: FilterConfig,
    #[serde(default = "default_bt")]
    pub bt: BtConfig,
    #[serde(default)]
    pub metrics: MetricSettings,
    #[serde(default)]
    pub selfloop: Option<SelfLoopSettings>,
}

fn default_runs_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_bt() -> BtConfig {
    BtConfig::new(crate::translate::BtStrategy::SupervisedMt)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// JSONL of `{id, label}`.
    pub topics: PathBuf,
    /// JSONL of `{lang, text}`.
    pub seed_paragraphs: PathBuf,
    /// JSONL of `{lang, text}`.
    pub seed_sentences: PathBuf,
    #[serde(default)]
    pub eval_sets: Vec<EvalSetRef>,
    /// Parallel examples for prompted back-translation, JSONL of
    /// `{hrl_text, lrl_text, direction}`.
    #[serde(default)]
    pub bt_pool: Option<PathBuf>,
    #[serde(default)]
    pub generation_template: Option<PathBuf>,
}

/// An evaluation set file of `{source, reference}` lines whose sources are
/// in the high-resource language and references in `lang`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSetRef {
    pub name: String,
    pub lang: LangCode,
    pub path: PathBuf,
}

/// Which backend profile serves which role.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Roles {
    pub generator: String,
    pub back_translator: String,
    #[serde(default)]
    pub student: Option<String>,
    #[serde(default)]
    pub judge: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationSettings {
    pub n_target_paragraphs: usize,
    pub rouge_threshold: f64,
    pub temperature: f64,
    pub max_attempts_per_slot: usize,
    pub k_seed_paragraphs: usize,
    pub m_seed_sentences: usize,
    pub max_new_tokens: u32,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        let g = crate::generation::GenerationConfig::new(LangCode::new("und_Latn").expect("valid"), 100, 0);
        Self {
            n_target_paragraphs: g.n_target_paragraphs,
            rouge_threshold: g.rouge_threshold,
            temperature: g.temperature,
            max_attempts_per_slot: g.max_attempts_per_slot,
            k_seed_paragraphs: g.k_seed_paragraphs,
            m_seed_sentences: g.m_seed_sentences,
            max_new_tokens: g.max_new_tokens,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    pub confidence_threshold: f64,
    /// Replaces the built-in language identifier when set.
    pub external_classifier: Option<String>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            external_classifier: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricSettings {
    pub bleu: BleuParams,
    pub chrf: ChrfParams,
    pub bootstrap: BootstrapParams,
    /// External subword counter for corpus statistics.
    pub token_counter: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfLoopSettings {
    pub rounds: u32,
    pub trainer_cmd: String,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })?;
        // Canonical base so the fingerprint does not depend on the caller's cwd.
        let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let base = parent.canonicalize().map_err(|source| ConfigError::Read {
            path: parent.to_path_buf(),
            source,
        })?;
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: PathBuf::new(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.runs_dir);
        fix(&mut self.paths.topics);
        fix(&mut self.paths.seed_paragraphs);
        fix(&mut self.paths.seed_sentences);
        self.paths.eval_sets.iter_mut().for_each(|e| fix(&mut e.path));
        if let Some(p) = self.paths.bt_pool.as_mut() {
            fix(p);
        }
        if let Some(p) = self.paths.generation_template.as_mut() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.languages.is_empty() {
            return invalid("no languages configured".into());
        }
        if self.languages.contains(&self.hrl) {
            return invalid(format!("{} is both the high-resource language and a target", self.hrl));
        }
        let mut ids = std::collections::BTreeSet::new();
        for b in &self.backends {
            b.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
            if !ids.insert(b.backend_id.as_str()) {
                return invalid(format!("duplicate backend id {}", b.backend_id));
            }
        }
        for (role, id) in self.role_bindings() {
            if !ids.contains(id) {
                return invalid(format!("role {role} refers to unknown backend {id:?}"));
            }
        }
        for lang in self.languages.iter().chain([&self.hrl]) {
            if self.language_names.name(lang).is_err() {
                return invalid(format!("no display name for {lang} in [language_names]"));
            }
        }
        self.bt.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.splitter.validate().map_err(ConfigError::Invalid)?;
        if let Some(s) = &self.selfloop {
            if s.rounds == 0 {
                return invalid("selfloop.rounds must be >= 1".into());
            }
        }
        Ok(())
    }

    fn role_bindings(&self) -> Vec<(&'static str, &str)> {
        let mut out = vec![
            ("generator", self.roles.generator.as_str()),
            ("back_translator", self.roles.back_translator.as_str()),
        ];
        if let Some(s) = &self.roles.student {
            out.push(("student", s));
        }
        if let Some(j) = &self.roles.judge {
            out.push(("judge", j));
        }
        out
    }

    pub fn backend(&self, id: &str) -> Result<&BackendProfile, ConfigError> {
        self.backends
            .iter()
            .find(|b| b.backend_id == id)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown backend {id:?}")))
    }

    /// Swaps the profile bound to `role` for the backend `backend_id`.
    pub fn override_role(&mut self, role: &str, backend_id: &str) -> Result<(), ConfigError> {
        let slot = match role {
            "generator" => &mut self.roles.generator,
            "back_translator" => &mut self.roles.back_translator,
            "student" => self.roles.student.get_or_insert_with(String::new),
            "judge" => self.roles.judge.get_or_insert_with(String::new),
            other => return Err(ConfigError::Invalid(format!("unknown role {other:?}"))),
        };
        *slot = backend_id.to_owned();
        self.validate()
    }

    /// Hash of the canonical JSON form; recorded in the run manifest. The
    /// run id and the self-improvement settings do not take part: the loop
    /// runs on top of a finished run without changing its stages.
    pub fn fingerprint(&self) -> String {
        let mut canonical = self.clone();
        canonical.run_id = None;
        canonical.selfloop = None;
        fingerprint(&serde_json::to_string(&canonical).expect("config serializes"))
    }

    pub fn names(&self) -> &LanguageNames {
        &self.language_names
    }

    pub fn eval_sets_for(&self, lang: &LangCode) -> impl Iterator<Item = &EvalSetRef> {
        let lang = lang.clone();
        self.paths.eval_sets.iter().filter(move |e| e.lang == lang)
    }
}

/// Sorted language codes with their display names, for reports.
pub fn display_names(cfg: &RunConfig) -> BTreeMap<LangCode, String> {
    cfg.languages
        .iter()
        .map(|l| (l.clone(), cfg.language_names.name(l).unwrap_or(l.as_str()).to_owned()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"
master_seed = 42
hrl = "eng_Latn"
languages = ["hau_Latn"]

[language_names]
eng_Latn = "English"
hau_Latn = "Hausa"

[paths]
topics = "topics.jsonl"
seed_paragraphs = "seed_paragraphs.jsonl"
seed_sentences = "seed_sentences.jsonl"

[[backends]]
backend_id = "gen"
kind = "mock"
model_name = "mock-gen"

[[backends]]
backend_id = "mt"
kind = "mock"
model_name = "mock-mt"

[roles]
generator = "gen"
back_translator = "mt"
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.generation.rouge_threshold, 0.7);
        assert_eq!(cfg.bt.decode.beam_size, 5);
        assert_eq!(cfg.filters.confidence_threshold, 0.5);
        assert_eq!(cfg.metrics.bootstrap.n_samples, 300);
        assert_eq!(cfg.metrics.bootstrap.sample_size, 500);
        assert_eq!(cfg.splitter.min_tokens, 3);
    }

    #[test]
    fn rejects_dangling_roles_and_unknown_keys() {
        let bad = MINIMAL.replace("back_translator = \"mt\"", "back_translator = \"nllb\"");
        assert!(matches!(RunConfig::parse(&bad), Err(ConfigError::Invalid(_))));
        let typo = MINIMAL.replace("master_seed", "master_sed");
        assert!(matches!(RunConfig::parse(&typo), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn fingerprint_ignores_run_id() {
        let a = RunConfig::parse(MINIMAL).unwrap();
        let mut b = a.clone();
        b.run_id = Some("x".into());
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.master_seed = 1;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn role_override() {
        let mut cfg = RunConfig::parse(MINIMAL).unwrap();
        cfg.override_role("back_translator", "gen").unwrap();
        assert_eq!(cfg.roles.back_translator, "gen");
        assert!(cfg.override_role("generator", "missing").is_err());
    }
}
