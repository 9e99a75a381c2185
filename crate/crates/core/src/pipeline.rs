//! Stage orchestration over a run directory.
//!
//! Stages run in the fixed order generate, process, backtranslate,
//! assemble, evaluate. Each one reads the previous stage's artifact, writes
//! its own and records counts and a completion time in the manifest.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::config::{ConfigError, RunConfig};
use crate::corpus_model::{
    read_jsonl, write_json, write_jsonl, BtMode, CorpusError, Direction, EvalSegment, EvalSegmentSet,
    GeneratedParagraph, LangCode, ParallelPair, PoolEntry, RunLayout, RunManifest, SeedParagraph, SeedPools,
    SentenceRecord, Topic,
};
use crate::gateway::Gateway;
use crate::generation::{run_generation, GenerationConfig, GenerationContext, GenerationError};
use crate::metrics::{corpus_stats, CorpusStats};
use crate::prompting::GenerationTemplate;
use crate::retrieval::{ExamplePool, KeySide, RetrievalError};
use crate::text_pipeline::{
    apply_filters, train_langid, ExternalClassifier, FilterSettings, LangIdError, LanguageIdentifier, NgramBlocklist,
};
use crate::translate::{assemble, backtranslate, BtContext, BtFailure, BtOutput, BtStrategy, TranslateError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Generate,
    Process,
    Backtranslate,
    Assemble,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Generate,
        Stage::Process,
        Stage::Backtranslate,
        Stage::Assemble,
        Stage::Evaluate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::Process => "process",
            Stage::Backtranslate => "backtranslate",
            Stage::Assemble => "assemble",
            Stage::Evaluate => "evaluate",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("stage {stage}: missing prerequisite {missing}")]
    Precondition { stage: Stage, missing: String },
    #[error("stage {0} is already complete for this run; pass --resume to skip it")]
    StageDone(Stage),
    #[error("run {0} was created with a different configuration")]
    ConfigMismatch(String),
    #[error("stage {stage}: {message}")]
    Stage { stage: Stage, message: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    LangId(#[from] LangIdError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineReport {
    pub manifest: RunManifest,
    pub ran: Vec<Stage>,
    pub skipped: Vec<Stage>,
}

impl PipelineReport {
    /// True when some language fell short of its paragraph target.
    pub fn has_shortfall(&self) -> bool {
        self.manifest.shortfall.values().any(|&n| n > 0)
    }
}

pub struct Pipeline<'a> {
    cfg: &'a RunConfig,
    gateway: &'a Gateway,
    layout: RunLayout,
    run_id: String,
    resume: bool,
}

impl<'a> Pipeline<'a> {
    pub fn new(cfg: &'a RunConfig, gateway: &'a Gateway, run_id: &str, resume: bool) -> Self {
        Self {
            cfg,
            gateway,
            layout: RunLayout::new(&cfg.runs_dir, run_id),
            run_id: run_id.to_owned(),
            resume,
        }
    }

    pub fn layout(&self) -> &RunLayout {
        &self.layout
    }

    fn load_or_create_manifest(&self) -> Result<RunManifest, PipelineError> {
        let fp = self.cfg.fingerprint();
        let path = self.layout.manifest();
        if path.exists() {
            let m = crate::corpus_model::load_manifest(&path)?;
            if m.config_fingerprint != fp {
                return Err(PipelineError::ConfigMismatch(self.run_id.clone()));
            }
            Ok(m)
        } else {
            std::fs::create_dir_all(self.layout.dir()).map_err(|e| CorpusError::io(self.layout.dir(), e))?;
            Ok(RunManifest::new(&self.run_id, fp))
        }
    }

    /// Runs `stages` in pipeline order.
    pub fn run(&self, stages: &[Stage]) -> Result<PipelineReport, PipelineError> {
        let mut wanted = stages.to_vec();
        wanted.sort();
        wanted.dedup();
        let mut manifest = self.load_or_create_manifest()?;
        let mut report = PipelineReport {
            manifest: manifest.clone(),
            ran: Vec::new(),
            skipped: Vec::new(),
        };
        for stage in wanted {
            if manifest.stage_done(stage.name()) {
                if self.resume {
                    tracing::info!(stage = %stage, "stage already complete; skipping");
                    report.skipped.push(stage);
                    continue;
                }
                return Err(PipelineError::StageDone(stage));
            }
            tracing::info!(stage = %stage, run_id = %self.run_id, "stage started");
            match stage {
                Stage::Generate => self.generate(&mut manifest)?,
                Stage::Process => self.process(&mut manifest)?,
                Stage::Backtranslate => self.backtranslate(&mut manifest)?,
                Stage::Assemble => self.assemble(&mut manifest)?,
                Stage::Evaluate => self.evaluate(&mut manifest)?,
            }
            manifest.mark_stage(stage.name());
            write_json(&self.layout.manifest(), &manifest)?;
            for v in crate::corpus_model::validate_manifest(&manifest) {
                tracing::warn!(lang = ?v.lang, field = %v.field, "{}", v.message);
            }
            tracing::info!(stage = %stage, "stage finished");
            report.ran.push(stage);
        }
        report.manifest = manifest;
        Ok(report)
    }

    fn require(&self, stage: Stage, path: &std::path::Path, from: Stage) -> Result<(), PipelineError> {
        if path.exists() {
            Ok(())
        } else {
            Err(PipelineError::Precondition {
                stage,
                missing: format!("{} (run `{from}` first)", path.display()),
            })
        }
    }

    pub fn load_pools(&self) -> Result<SeedPools, PipelineError> {
        let p = &self.cfg.paths;
        let topics: Vec<Topic> = read_jsonl(&p.topics)?;
        let seed_paragraphs: Vec<SeedParagraph> = read_jsonl(&p.seed_paragraphs)?;
        let mut seed_sentences: BTreeMap<LangCode, Vec<String>> = BTreeMap::new();
        for s in read_jsonl::<SeedParagraph>(&p.seed_sentences)? {
            seed_sentences.entry(s.lang).or_default().push(s.text);
        }
        Ok(SeedPools {
            topics,
            seed_paragraphs,
            seed_sentences,
        })
    }

    fn generate(&self, manifest: &mut RunManifest) -> Result<(), PipelineError> {
        let pools = self.load_pools()?;
        let template = match &self.cfg.paths.generation_template {
            Some(p) => GenerationTemplate::load(p).map_err(|e| PipelineError::Stage {
                stage: Stage::Generate,
                message: e.to_string(),
            })?,
            None => GenerationTemplate::default(),
        };
        let profile = self.cfg.backend(&self.cfg.roles.generator)?;
        let ctx = GenerationContext {
            pools: &pools,
            names: self.cfg.names(),
            template: &template,
            gateway: self.gateway,
            profile,
            run_id: &self.run_id,
        };
        let g = &self.cfg.generation;
        for lang in &self.cfg.languages {
            let config = GenerationConfig {
                target_lang: lang.clone(),
                n_target_paragraphs: g.n_target_paragraphs,
                rouge_threshold: g.rouge_threshold,
                temperature: g.temperature,
                max_attempts_per_slot: g.max_attempts_per_slot,
                seed: self.cfg.master_seed,
                k_seed_paragraphs: g.k_seed_paragraphs,
                m_seed_sentences: g.m_seed_sentences,
                max_new_tokens: g.max_new_tokens,
            };
            let outcome = run_generation(&config, &ctx, &self.layout)?;
            manifest.counts_mut(lang).paragraphs = outcome.accepted as u64;
            if outcome.shortfall > 0 {
                manifest.shortfall.insert(lang.clone(), outcome.shortfall as u64);
            } else {
                manifest.shortfall.remove(lang);
            }
        }
        Ok(())
    }

    fn identifier(&self, pools: &SeedPools) -> Result<Box<dyn LanguageIdentifier>, PipelineError> {
        if let Some(cmd) = &self.cfg.filters.external_classifier {
            return Ok(Box::new(ExternalClassifier { command: cmd.clone() }));
        }
        let mut seeds = BTreeMap::new();
        for lang in &self.cfg.languages {
            let s = pools.seed_sentences.get(lang).filter(|s| !s.is_empty()).ok_or_else(|| {
                PipelineError::Precondition {
                    stage: Stage::Process,
                    missing: format!("seed sentences for {lang} (language identification)"),
                }
            })?;
            seeds.insert(lang.clone(), s.clone());
        }
        if let Some(s) = pools.seed_sentences.get(&self.cfg.hrl) {
            seeds.insert(self.cfg.hrl.clone(), s.clone());
        }
        Ok(Box::new(train_langid(&seeds)?))
    }

    /// Blocklist over both sides of every configured evaluation set.
    pub fn eval_blocklist(&self) -> Result<NgramBlocklist, PipelineError> {
        let mut texts = Vec::new();
        for e in &self.cfg.paths.eval_sets {
            for seg in read_jsonl::<EvalSegment>(&e.path)? {
                texts.push(seg.source);
                texts.push(seg.reference);
            }
        }
        Ok(NgramBlocklist::build(texts.iter().map(String::as_str)))
    }

    fn process(&self, manifest: &mut RunManifest) -> Result<(), PipelineError> {
        self.require(Stage::Process, &self.layout.paragraphs(), Stage::Generate)?;
        let paragraphs: Vec<GeneratedParagraph> = read_jsonl(&self.layout.paragraphs())?;
        let pools = self.load_pools()?;
        let identifier = self.identifier(&pools)?;
        let blocklist = self.eval_blocklist()?;
        blocklist.save(&self.layout.dir().join("eval.ngrams"))?;
        let mut all = Vec::new();
        for lang in &self.cfg.languages {
            let settings = FilterSettings {
                rules: &self.cfg.splitter,
                blocklist: &blocklist,
                expected_lang: lang,
                confidence_threshold: self.cfg.filters.confidence_threshold,
            };
            let out = apply_filters(&paragraphs, identifier.as_ref(), &settings)?;
            let c = manifest.counts_mut(lang);
            c.paragraphs = out.counts.paragraphs;
            c.sentences_raw = out.counts.sentences_raw;
            c.sentences_after_langid = out.counts.sentences_after_langid;
            c.sentences_after_decon = out.counts.sentences_after_decon;
            all.extend(out.records);
        }
        write_jsonl(&self.layout.sentences(), &all)?;
        Ok(())
    }

    /// Kept sentences grouped by the language of their paragraph.
    pub fn kept_by_language(&self) -> Result<BTreeMap<LangCode, Vec<SentenceRecord>>, PipelineError> {
        let paragraphs: Vec<GeneratedParagraph> = read_jsonl(&self.layout.paragraphs())?;
        let lang_of: BTreeMap<&str, &LangCode> = paragraphs.iter().map(|p| (p.id.as_str(), &p.target_lang)).collect();
        let mut out: BTreeMap<LangCode, Vec<SentenceRecord>> = BTreeMap::new();
        for s in read_jsonl::<SentenceRecord>(&self.layout.sentences())? {
            if !s.is_kept() {
                continue;
            }
            let lang = lang_of.get(s.paragraph_id.as_str()).ok_or_else(|| {
                CorpusError::Invalid(format!("sentence {} refers to an unknown paragraph", s.reference()))
            })?;
            out.entry((*lang).clone()).or_default().push(s);
        }
        Ok(out)
    }

    /// The configured example pool for `lang`, keyed on the low-resource side.
    pub fn load_pool(&self, lang: &LangCode) -> Result<Option<ExamplePool>, PipelineError> {
        let Some(path) = &self.cfg.paths.bt_pool else { return Ok(None) };
        let wanted = Direction::new(self.cfg.hrl.clone(), lang.clone())?;
        let entries: Vec<PoolEntry> = read_jsonl::<PoolEntry>(path)?
            .into_iter()
            .filter(|e| e.direction == wanted)
            .collect();
        if entries.is_empty() {
            return Ok(None);
        }
        Ok(Some(ExamplePool::new(entries, KeySide::Lrl)?))
    }

    fn backtranslate(&self, _manifest: &mut RunManifest) -> Result<(), PipelineError> {
        self.require(Stage::Backtranslate, &self.layout.sentences(), Stage::Process)?;
        let (role, bt_mode) = match self.cfg.bt.mode {
            BtStrategy::SupervisedMt => (self.cfg.roles.back_translator.as_str(), BtMode::SupervisedMt),
            BtStrategy::FewshotGenerator => (self.cfg.roles.generator.as_str(), BtMode::FewshotGenerator),
            BtStrategy::Student => (
                self.cfg.roles.student.as_deref().ok_or_else(|| PipelineError::Precondition {
                    stage: Stage::Backtranslate,
                    missing: "a backend bound to the student role".into(),
                })?,
                BtMode::StudentRound(0),
            ),
        };
        let profile = self.cfg.backend(role)?;
        let by_lang = self.kept_by_language()?;
        let mut all = BtOutput::default();
        let mut fatal = None;
        for lang in &self.cfg.languages {
            let Some(sentences) = by_lang.get(lang) else { continue };
            let pool = self.load_pool(lang)?;
            let ctx = BtContext {
                gateway: self.gateway,
                profile,
                names: self.cfg.names(),
                pool: pool.as_ref(),
                lrl: lang,
                hrl: &self.cfg.hrl,
            };
            match backtranslate(sentences, &self.cfg.bt, &ctx, bt_mode) {
                Ok(out) => merge(&mut all, out),
                Err(TranslateError::TooManyFailures { failed, total, output }) => {
                    merge(&mut all, *output);
                    fatal = Some(TranslateError::TooManyFailures {
                        failed,
                        total,
                        output: Box::default(),
                    });
                    break;
                }
                Err(e) => return Err(e.into()),
            }
        }
        write_jsonl(&self.layout.bt_pairs(), &all.pairs)?;
        write_jsonl::<BtFailure, _>(&self.layout.bt_failures(), &all.failures)?;
        if let Some(e) = fatal {
            return Err(e.into());
        }
        Ok(())
    }

    /// Blocklist over the seed paragraphs, applied to the high-resource side.
    pub fn seed_blocklist(&self) -> Result<NgramBlocklist, PipelineError> {
        let seeds: Vec<SeedParagraph> = read_jsonl(&self.cfg.paths.seed_paragraphs)?;
        Ok(NgramBlocklist::build(seeds.iter().map(|s| s.text.as_str())))
    }

    fn assemble(&self, manifest: &mut RunManifest) -> Result<(), PipelineError> {
        self.require(Stage::Assemble, &self.layout.bt_pairs(), Stage::Backtranslate)?;
        let raw: Vec<ParallelPair> = read_jsonl(&self.layout.bt_pairs())?;
        let (kept, dropped) = assemble(raw, &self.seed_blocklist()?);
        tracing::info!(kept = kept.len(), dropped, "high-resource side decontaminated");
        for lang in &self.cfg.languages {
            manifest.counts_mut(lang).pairs = kept.iter().filter(|p| p.direction.target() == lang).count() as u64;
        }
        write_jsonl(&self.layout.pairs(), &kept)?;
        Ok(())
    }

    fn evaluate(&self, _manifest: &mut RunManifest) -> Result<(), PipelineError> {
        self.require(Stage::Evaluate, &self.layout.pairs(), Stage::Assemble)?;
        let pairs: Vec<ParallelPair> = read_jsonl(&self.layout.pairs())?;
        let mut stats: BTreeMap<LangCode, CorpusStats> = BTreeMap::new();
        for lang in &self.cfg.languages {
            let mine: Vec<ParallelPair> = pairs.iter().filter(|p| p.direction.target() == lang).cloned().collect();
            if mine.is_empty() {
                continue;
            }
            stats.insert(lang.clone(), corpus_stats(&mine, self.cfg.metrics.token_counter.as_deref()));
        }
        write_json(&self.layout.stats(), &stats)?;
        Ok(())
    }

    /// Evaluation sets configured for `lang`.
    pub fn eval_sets(&self, lang: &LangCode) -> Result<Vec<EvalSegmentSet>, PipelineError> {
        self.cfg
            .eval_sets_for(lang)
            .map(|e| Ok(EvalSegmentSet::new(&e.name, read_jsonl(&e.path)?)?))
            .collect()
    }
}

fn merge(into: &mut BtOutput, from: BtOutput) {
    into.pairs.extend(from.pairs);
    into.failures.extend(from.failures);
}
