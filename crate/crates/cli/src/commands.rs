use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use parasynth::config::{EvalSetRef, RunConfig, SelfLoopSettings};
use parasynth::corpus_model::{
    load_manifest, read_jsonl, validate_against_data, EvalSegment, EvalSegmentSet, LangCode,
    PoolEntry, RunLayout, RunManifest,
};
use parasynth::demo::{write_demo, DemoSpec};
use parasynth::gateway::Gateway;
use parasynth::metrics::{bleu, chrf_pp, paired_bootstrap, Bleu, Chrf};
use parasynth::pipeline::{Pipeline, PipelineError, Stage};
use parasynth::prompting::LanguageNames;
use parasynth::retrieval::{ExamplePool, KeySide};
use parasynth::stats::render_stats_table;
use parasynth::translate::{self_improve, BtConfig, BtContext, BtStrategy, SelfImproveConfig};
use serde_json::json;

use crate::{BtModeArg, Cli, Command, Global, KeyArg, MetricArg};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    Error = 1,
    Shortfall = 2,
}

pub fn dispatch(cli: Cli) -> Result<Status> {
    let g = cli.global;
    match cli.command {
        Command::Run { stages } => {
            let stages = if stages.is_empty() {
                Stage::ALL.to_vec()
            } else {
                stages
                    .iter()
                    .map(|s| s.parse::<Stage>().map_err(|e| anyhow!(e)))
                    .collect::<Result<_>>()?
            };
            let cfg = load_config(&g)?;
            run_stages(&g, &cfg, &stages)
        }
        Command::Generate { langs, n } => {
            let mut cfg = load_config(&g)?;
            if !langs.is_empty() {
                cfg.languages = parse_langs(&langs)?;
            }
            if let Some(n) = n {
                cfg.generation.n_target_paragraphs = n;
            }
            cfg.validate()?;
            run_stages(&g, &cfg, &[Stage::Generate])
        }
        Command::Process { eval_sets, langs } => {
            let mut cfg = load_config(&g)?;
            if !langs.is_empty() {
                cfg.languages = parse_langs(&langs)?;
            }
            if !eval_sets.is_empty() {
                cfg.paths.eval_sets = eval_sets.iter().map(|s| parse_eval_set(s)).collect::<Result<_>>()?;
            }
            cfg.validate()?;
            run_stages(&g, &cfg, &[Stage::Process])
        }
        Command::Backtranslate { mode, pool } => {
            let mut cfg = load_config(&g)?;
            if let Some(mode) = mode {
                cfg.bt.mode = match mode {
                    BtModeArg::Mt => BtStrategy::SupervisedMt,
                    BtModeArg::Fewshot => BtStrategy::FewshotGenerator,
                    BtModeArg::Student => BtStrategy::Student,
                };
            }
            if let Some(pool) = pool {
                cfg.paths.bt_pool = Some(pool);
            }
            cfg.validate()?;
            run_stages(&g, &cfg, &[Stage::Backtranslate])
        }
        Command::Assemble => run_stages(&g, &load_config(&g)?, &[Stage::Assemble]),
        Command::Select {
            pool,
            queries,
            k,
            key,
            save_index,
        } => select(&pool, &queries, k, key, save_index.as_deref()),
        Command::Evaluate {
            hyp: Some(hyp),
            reference,
            hyp_b,
            significance,
            metric,
        } => {
            let reference = reference.ok_or_else(|| anyhow!("--hyp needs --ref"))?;
            let cfg = g.config.as_ref().map(|_| load_config(&g)).transpose()?;
            evaluate_files(cfg.as_ref(), &g, &hyp, &reference, hyp_b.as_deref(), significance, &metric)
        }
        Command::Evaluate { hyp: None, .. } => run_stages(&g, &load_config(&g)?, &[Stage::Evaluate]),
        Command::Selfloop {
            rounds,
            trainer_cmd,
            eval,
            lang,
        } => {
            let mut cfg = load_config(&g)?;
            let base = cfg.selfloop.clone();
            let rounds = rounds.or(base.as_ref().map(|s| s.rounds));
            let trainer_cmd = trainer_cmd.or(base.map(|s| s.trainer_cmd));
            let (Some(rounds), Some(trainer_cmd)) = (rounds, trainer_cmd) else {
                bail!("selfloop needs --rounds and --trainer-cmd, or a [selfloop] table in the config");
            };
            cfg.selfloop = Some(SelfLoopSettings { rounds, trainer_cmd });
            cfg.validate()?;
            selfloop(&g, &cfg, eval.as_deref(), lang.as_deref())
        }
        Command::Stats { manifest } => stats(&g, manifest.as_deref()),
        Command::Validate => validate(&g),
        Command::Demo { dir, langs, n, run } => {
            let spec = DemoSpec::new(parse_langs(&langs)?, n, g.seed.unwrap_or(42));
            let path = write_demo(&dir, &spec)?;
            println!("{}", path.display());
            if !run {
                return Ok(Status::Ok);
            }
            let g = Global {
                config: Some(path),
                ..g
            };
            let cfg = load_config(&g)?;
            let status = run_stages(&g, &cfg, &Stage::ALL)?;
            let manifest = load_manifest(&layout(&g, &cfg).manifest())?;
            print!("{}", render_stats_table(&manifest, cfg.names()));
            Ok(status)
        }
    }
}

fn load_config(g: &Global) -> Result<RunConfig> {
    let path = g
        .config
        .as_ref()
        .ok_or_else(|| anyhow!("no configuration given; pass --config or set PARASYNTH_CONFIG"))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = g.seed {
        cfg.master_seed = seed;
    }
    for binding in &g.backends {
        let (role, id) = binding
            .split_once('=')
            .ok_or_else(|| anyhow!("--backend expects ROLE=BACKEND_ID, got {binding:?}"))?;
        cfg.override_role(role, id)?;
    }
    Ok(cfg)
}

fn run_id(g: &Global, cfg: &RunConfig) -> String {
    g.run_id
        .clone()
        .or_else(|| cfg.run_id.clone())
        .unwrap_or_else(|| format!("run-{}", &cfg.fingerprint()[..12]))
}

fn layout(g: &Global, cfg: &RunConfig) -> RunLayout {
    RunLayout::new(&cfg.runs_dir, &run_id(g, cfg))
}

fn parse_langs(codes: &[String]) -> Result<Vec<LangCode>> {
    codes.iter().map(|c| Ok(LangCode::new(c.as_str())?)).collect()
}

fn parse_eval_set(spec: &str) -> Result<EvalSetRef> {
    let (lang, path) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("--eval-sets expects LANG=FILE, got {spec:?}"))?;
    let path = PathBuf::from(path);
    let name = path
        .file_stem()
        .map_or_else(|| "eval".to_owned(), |s| s.to_string_lossy().into_owned());
    Ok(EvalSetRef {
        name,
        lang: LangCode::new(lang)?,
        path,
    })
}

fn run_stages(g: &Global, cfg: &RunConfig, stages: &[Stage]) -> Result<Status> {
    let gateway = Gateway::new();
    let id = run_id(g, cfg);
    let report = match Pipeline::new(cfg, &gateway, &id, g.resume).run(stages) {
        Ok(r) => r,
        Err(e @ PipelineError::StageDone(_)) => return Err(e.into()),
        Err(e) => return Err(anyhow::Error::new(e).context(format!("run {id}"))),
    };
    tracing::info!(
        run_id = %id,
        ran = ?report.ran.iter().map(|s| s.name()).collect::<Vec<_>>(),
        skipped = ?report.skipped.iter().map(|s| s.name()).collect::<Vec<_>>(),
        backend_calls = gateway.call_count(),
        "run finished"
    );
    if report.has_shortfall() {
        for (lang, n) in &report.manifest.shortfall {
            tracing::warn!(lang = %lang, missing = n, "paragraph target not reached");
        }
        return Ok(Status::Shortfall);
    }
    Ok(Status::Ok)
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(str::to_owned).collect())
}

fn select(pool: &Path, queries: &Path, k: usize, key: KeyArg, save_index: Option<&Path>) -> Result<Status> {
    let entries: Vec<PoolEntry> = read_jsonl(pool)?;
    let side = match key {
        KeyArg::Hrl => KeySide::Hrl,
        KeyArg::Lrl => KeySide::Lrl,
    };
    let pool = ExamplePool::new(entries, side)?;
    if let Some(path) = save_index {
        pool.index().save(path)?;
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for query in read_lines(queries)? {
        let hits: Vec<_> = pool
            .index()
            .query(&query, k)?
            .into_iter()
            .map(|(id, score)| {
                let e = &pool.entries()[id];
                json!({"id": id, "score": score, "hrl_text": e.hrl_text, "lrl_text": e.lrl_text})
            })
            .collect();
        writeln!(out, "{}", json!({"query": query, "hits": hits}))?;
    }
    Ok(Status::Ok)
}

fn evaluate_files(
    cfg: Option<&RunConfig>,
    g: &Global,
    hyp: &Path,
    reference: &Path,
    hyp_b: Option<&Path>,
    significance: bool,
    metrics: &[MetricArg],
) -> Result<Status> {
    let settings = cfg.map(|c| c.metrics.clone()).unwrap_or_default();
    let metrics = if metrics.is_empty() {
        vec![MetricArg::Bleu, MetricArg::Chrf]
    } else {
        metrics.to_vec()
    };
    let refs = read_lines(reference)?;
    let hyps = read_lines(hyp)?;
    let hyps_b = hyp_b.map(read_lines).transpose()?;
    let mut result = serde_json::Map::new();
    for m in &metrics {
        let (name, a, b) = match m {
            MetricArg::Bleu => (
                "bleu",
                bleu(&hyps, &refs, &settings.bleu)?,
                hyps_b.as_ref().map(|h| bleu(h, &refs, &settings.bleu)).transpose()?,
            ),
            MetricArg::Chrf => (
                "chrf",
                chrf_pp(&hyps, &refs, &settings.chrf)?,
                hyps_b.as_ref().map(|h| chrf_pp(h, &refs, &settings.chrf)).transpose()?,
            ),
        };
        let mut entry = json!({"a": a});
        if let Some(b) = b {
            entry["b"] = json!(b);
        }
        if significance {
            let hb = hyps_b.as_ref().expect("clap requires --hyp-b");
            let mut params = settings.bootstrap;
            if let Some(seed) = g.seed {
                params.seed = seed;
            }
            let r = match m {
                MetricArg::Bleu => paired_bootstrap(
                    &as_refs(&hyps),
                    &as_refs(hb),
                    &as_refs(&refs),
                    &Bleu {
                        params: settings.bleu,
                    },
                    &params,
                )?,
                MetricArg::Chrf => paired_bootstrap(
                    &as_refs(&hyps),
                    &as_refs(hb),
                    &as_refs(&refs),
                    &Chrf {
                        params: settings.chrf,
                    },
                    &params,
                )?,
            };
            entry["bootstrap"] = serde_json::to_value(&r)?;
        }
        result.insert(name.to_owned(), entry);
    }
    println!("{}", serde_json::Value::Object(result));
    Ok(Status::Ok)
}

fn as_refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn selfloop(g: &Global, cfg: &RunConfig, eval: Option<&Path>, lang: Option<&str>) -> Result<Status> {
    let lang = match lang {
        Some(l) => LangCode::new(l)?,
        None => match cfg.languages.as_slice() {
            [only] => only.clone(),
            _ => bail!("several languages are configured; choose one with --lang"),
        },
    };
    let eval_set = match eval {
        Some(path) => EvalSegmentSet::new(
            path.file_stem().map_or("eval".into(), |s| s.to_string_lossy().into_owned()),
            read_jsonl::<EvalSegment>(path)?,
        )?,
        None => {
            let e = cfg
                .eval_sets_for(&lang)
                .next()
                .ok_or_else(|| anyhow!("no evaluation set configured for {lang}; pass --eval"))?;
            EvalSegmentSet::new(&e.name, read_jsonl(&e.path)?)?
        }
    };
    let student = cfg
        .roles
        .student
        .as_deref()
        .ok_or_else(|| anyhow!("the selfloop needs a backend bound to the student role"))?;
    let profile = cfg.backend(student)?;
    let gateway = Gateway::new();
    let id = run_id(g, cfg);
    let pipeline = Pipeline::new(cfg, &gateway, &id, g.resume);
    let layout = pipeline.layout().clone();
    if !layout.sentences().exists() {
        bail!("selfloop needs {} (run `process` first)", layout.sentences().display());
    }
    let mut by_lang = pipeline.kept_by_language()?;
    let y = by_lang.remove(&lang).unwrap_or_default();
    if y.is_empty() {
        bail!("run {id} has no kept sentences for {lang}");
    }
    let pool = pipeline.load_pool(&lang)?;
    let sl = cfg.selfloop.as_ref().expect("set by the caller");
    let sic = SelfImproveConfig {
        rounds: sl.rounds,
        trainer_cmd: sl.trainer_cmd.clone(),
        bt: BtConfig {
            mode: BtStrategy::Student,
            ..cfg.bt.clone()
        },
    };
    let ctx = BtContext {
        gateway: &gateway,
        profile,
        names: cfg.names(),
        pool: pool.as_ref(),
        lrl: &lang,
        hrl: &cfg.hrl,
    };
    let dir = layout.selfloop_dir().join(lang.as_str());
    let rounds = self_improve(&y, &sic, &ctx, &eval_set, &dir)?;
    for r in &rounds {
        println!("{}", serde_json::to_string(r)?);
    }
    Ok(Status::Ok)
}

fn stats(g: &Global, manifest: Option<&Path>) -> Result<Status> {
    let (path, names) = match manifest {
        Some(p) => {
            let names = match &g.config {
                Some(_) => load_config(g)?.language_names,
                None => LanguageNames::default(),
            };
            (p.to_path_buf(), names)
        }
        None => {
            let cfg = load_config(g)?;
            (layout(g, &cfg).manifest(), cfg.language_names)
        }
    };
    if !path.exists() {
        bail!("manifest not found: {}", path.display());
    }
    let manifest: RunManifest = load_manifest(&path)?;
    print!("{}", render_stats_table(&manifest, &names));
    Ok(Status::Ok)
}

fn validate(g: &Global) -> Result<Status> {
    let cfg = load_config(g)?;
    let layout = layout(g, &cfg);
    let mut report = BTreeMap::new();
    report.insert("config", json!("ok"));
    if layout.manifest().exists() {
        let manifest = load_manifest(&layout.manifest())?;
        if manifest.config_fingerprint != cfg.fingerprint() {
            bail!("run {} was created with a different configuration", manifest.run_id);
        }
        let violations = validate_against_data(&layout, &manifest)?;
        for v in &violations {
            tracing::error!(lang = ?v.lang, field = %v.field, "{}", v.message);
        }
        report.insert("violations", json!(violations.len()));
        println!("{}", json!(report));
        if !violations.is_empty() {
            bail!("{} manifest violation(s)", violations.len());
        }
    } else {
        println!("{}", json!(report));
    }
    Ok(Status::Ok)
}
