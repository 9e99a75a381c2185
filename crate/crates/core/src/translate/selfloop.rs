use std::path::{Path, PathBuf};
use std::process::Command;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{backtranslate, first_line, BtConfig, BtContext, TranslateError};
use crate::corpus_model::{read_json, write_json, write_jsonl, BtMode, EvalSegmentSet, JsonlAppender, LangCode, SentenceRecord};
use crate::gateway::{BackendProfile, DecodeParams};
use crate::metrics::{bleu, chrf_pp, BleuParams, ChrfParams};
use crate::prompting::{build_zero_shot_mt_prompt, emit_finetune_records};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfImproveConfig {
    /// Number of re-fine-tuning rounds after round 0.
    pub rounds: u32,
    /// Run with `sh -c`; receives the fine-tune file as `$1` and the base
    /// model handle as `$2` and prints the new handle as its last line.
    pub trainer_cmd: String,
    pub bt: BtConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundScores {
    pub hrl_to_lrl_bleu: f64,
    pub hrl_to_lrl_chrf: f64,
    pub lrl_to_hrl_bleu: f64,
    pub lrl_to_hrl_chrf: f64,
}

/// Artifacts of round `k`: `X_k` back-translated by `M_k`, and `M_{k+1}`
/// fine-tuned from the base model on `X_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundState {
    pub round_index: u32,
    pub student_model_ref: String,
    pub trained_model_ref: String,
    pub pairs_path: PathBuf,
    pub finetune_path: PathBuf,
    pub trainer_log: PathBuf,
    pub pairs: usize,
    pub failures: usize,
    /// Scores of `trained_model_ref` on the evaluation set.
    pub scores: RoundScores,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainerInvocation {
    pub round: u32,
    pub finetune_file: PathBuf,
    pub base_model: String,
    pub output_model: Option<String>,
    pub exit_code: Option<i32>,
}

const STATE_FILE: &str = "rounds.json";
const TRAINER_LOG: &str = "trainer_invocations.jsonl";

/// Runs rounds `0..=cfg.rounds`, resuming after the last completed round
/// recorded in `dir`. `ctx.profile` is the base student; its model name is
/// the base handle `M_0`. The evaluation set's sources are in `ctx.hrl`
/// and its references in `ctx.lrl`.
pub fn self_improve(
    y: &[SentenceRecord],
    cfg: &SelfImproveConfig,
    ctx: &BtContext<'_>,
    eval: &EvalSegmentSet,
    dir: &Path,
) -> Result<Vec<RoundState>, TranslateError> {
    if cfg.rounds == 0 {
        return Err(TranslateError::Config("self-improvement needs at least one round".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| crate::corpus_model::CorpusError::io(dir, e))?;
    let state_path = dir.join(STATE_FILE);
    let mut states: Vec<RoundState> = if state_path.exists() {
        read_json(&state_path)?
    } else {
        Vec::new()
    };
    let base = ctx.profile.model_name.clone();
    let log_path = dir.join(TRAINER_LOG);

    for k in states.len() as u32..=cfg.rounds {
        let student = match k {
            0 => base.clone(),
            _ => states[k as usize - 1].trained_model_ref.clone(),
        };
        let student_profile = with_model(ctx.profile, &student);
        let round_ctx = BtContext {
            profile: &student_profile,
            ..*ctx
        };
        let bt = backtranslate(y, &cfg.bt, &round_ctx, BtMode::StudentRound(k))?;

        let round_dir = dir.join(format!("round_{k}"));
        std::fs::create_dir_all(&round_dir).map_err(|e| crate::corpus_model::CorpusError::io(&round_dir, e))?;
        let pairs_path = round_dir.join("pairs.jsonl");
        let finetune_path = round_dir.join("finetune.jsonl");
        write_jsonl(&pairs_path, &bt.pairs)?;
        write_jsonl(&round_dir.join("failures.jsonl"), &bt.failures)?;
        write_jsonl(&finetune_path, &emit_finetune_records(ctx.names, &bt.pairs)?)?;

        let trained = run_trainer(&cfg.trainer_cmd, k, &finetune_path, &base, &log_path)?;
        let scores = evaluate(&with_model(ctx.profile, &trained), ctx, eval)?;
        tracing::info!(round = k, student = %student, trained = %trained, ?scores, "self-improvement round done");
        states.push(RoundState {
            round_index: k,
            student_model_ref: student,
            trained_model_ref: trained,
            pairs_path,
            finetune_path,
            trainer_log: log_path.clone(),
            pairs: bt.pairs.len(),
            failures: bt.failures.len(),
            scores,
        });
        write_json(&state_path, &states)?;
    }
    Ok(states)
}

fn with_model(profile: &BackendProfile, handle: &str) -> BackendProfile {
    BackendProfile {
        model_name: handle.to_owned(),
        ..profile.clone()
    }
}

fn run_trainer(cmd: &str, round: u32, finetune: &Path, base: &str, log: &Path) -> Result<String, TranslateError> {
    let output = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .arg("trainer")
        .arg(finetune)
        .arg(base)
        .env("PARASYNTH_FINETUNE_FILE", finetune)
        .env("PARASYNTH_BASE_MODEL", base)
        .stderr(std::process::Stdio::inherit())
        .output()
        .map_err(|e| TranslateError::Trainer(format!("cannot start `{cmd}`: {e}")))?;
    let handle = String::from_utf8_lossy(&output.stdout)
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .map(str::to_owned);
    let ok = output.status.success() && handle.is_some();
    let mut appender = JsonlAppender::open(log)?;
    appender.append(&TrainerInvocation {
        round,
        finetune_file: finetune.to_path_buf(),
        base_model: base.to_owned(),
        output_model: handle.clone().filter(|_| ok),
        exit_code: output.status.code(),
    })?;
    match handle {
        Some(h) if ok => Ok(h),
        _ => Err(TranslateError::Trainer(format!(
            "round {round}: `{cmd}` exited with {} and printed no model handle",
            output.status
        ))),
    }
}

fn evaluate(model: &BackendProfile, ctx: &BtContext<'_>, eval: &EvalSegmentSet) -> Result<RoundScores, TranslateError> {
    let hrl_side = eval.sources();
    let lrl_side = eval.references();
    let forward = translate_zero_shot(model, ctx, ctx.hrl, ctx.lrl, &hrl_side)?;
    let backward = translate_zero_shot(model, ctx, ctx.lrl, ctx.hrl, &lrl_side)?;
    Ok(RoundScores {
        hrl_to_lrl_bleu: bleu(&forward, &lrl_side, &BleuParams::default())?,
        hrl_to_lrl_chrf: chrf_pp(&forward, &lrl_side, &ChrfParams::default())?,
        lrl_to_hrl_bleu: bleu(&backward, &hrl_side, &BleuParams::default())?,
        lrl_to_hrl_chrf: chrf_pp(&backward, &hrl_side, &ChrfParams::default())?,
    })
}

/// Failed segments count as empty hypotheses.
fn translate_zero_shot(
    model: &BackendProfile,
    ctx: &BtContext<'_>,
    src: &LangCode,
    tgt: &LangCode,
    texts: &[&str],
) -> Result<Vec<String>, TranslateError> {
    let prompts = texts
        .iter()
        .map(|t| build_zero_shot_mt_prompt(ctx.names, src, tgt, t))
        .collect::<Result<Vec<_>, _>>()?;
    let params = DecodeParams {
        max_new_tokens: 256,
        ..DecodeParams::greedy()
    };
    Ok(prompts
        .par_iter()
        .map(|p| {
            ctx.gateway
                .complete(model, p, &params)
                .map(|c| first_line(&c.text))
                .unwrap_or_default()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus_model::{read_jsonl, ParallelPair, SentenceStatus};
    use crate::gateway::Gateway;
    use crate::prompting::LanguageNames;
    use crate::translate::BtStrategy;

    fn code(s: &str) -> LangCode {
        LangCode::new(s).unwrap()
    }

    #[test]
    fn identity_trainer_is_a_fixed_point() {
        let dir = tempfile::tempdir().unwrap();
        let gateway = Gateway::new();
        let profile = BackendProfile::mock("student");
        let names: LanguageNames = [(code("hau_Latn"), "Hausa".to_string()), (code("eng_Latn"), "English".to_string())]
            .into_iter()
            .collect();
        let (lrl, hrl) = (code("hau_Latn"), code("eng_Latn"));
        let ctx = BtContext {
            gateway: &gateway,
            profile: &profile,
            names: &names,
            pool: None,
            lrl: &lrl,
            hrl: &hrl,
        };
        let y: Vec<SentenceRecord> = (0..6)
            .map(|i| SentenceRecord {
                paragraph_id: "p".into(),
                position: i,
                text: format!("jimla {i} a nan"),
                langid_label: lrl.clone(),
                langid_confidence: 1.0,
                status: SentenceStatus::Kept,
            })
            .collect();
        let eval = EvalSegmentSet::from_parallel("dev", vec!["hello there".into()], vec!["sannu da zuwa".into()]).unwrap();
        let cfg = SelfImproveConfig {
            rounds: 2,
            trainer_cmd: "echo training on \"$1\" >&2; echo \"$2\"".into(),
            bt: BtConfig::new(BtStrategy::Student),
        };
        let states = self_improve(&y, &cfg, &ctx, &eval, dir.path()).unwrap();
        assert_eq!(states.len(), 3);
        let x0: Vec<ParallelPair> = read_jsonl(&states[0].pairs_path).unwrap();
        let x1: Vec<ParallelPair> = read_jsonl(&states[1].pairs_path).unwrap();
        let strip = |v: &[ParallelPair]| v.iter().map(|p| (p.hrl_text.clone(), p.lrl_text.clone())).collect::<Vec<_>>();
        assert_eq!(strip(&x0), strip(&x1));
        let log: Vec<TrainerInvocation> = read_jsonl(&dir.path().join(TRAINER_LOG)).unwrap();
        assert_eq!(log.len(), 3);
        assert!(log.iter().all(|i| i.base_model == "student"));
        let ft: Vec<serde_json::Value> = read_jsonl(&states[2].finetune_path).unwrap();
        assert_eq!(ft.len(), 2 * y.len());

        // A completed loop resumes without any backend calls.
        let before = gateway.call_count();
        let again = self_improve(&y, &cfg, &ctx, &eval, dir.path()).unwrap();
        assert_eq!(again, states);
        assert_eq!(gateway.call_count(), before);
    }

    #[test]
    fn failing_trainer_preserves_completed_rounds() {
        let dir = tempfile::tempdir().unwrap();
        let gateway = Gateway::new();
        let profile = BackendProfile::mock("student");
        let names: LanguageNames = [(code("hau_Latn"), "Hausa".to_string()), (code("eng_Latn"), "English".to_string())]
            .into_iter()
            .collect();
        let (lrl, hrl) = (code("hau_Latn"), code("eng_Latn"));
        let ctx = BtContext {
            gateway: &gateway,
            profile: &profile,
            names: &names,
            pool: None,
            lrl: &lrl,
            hrl: &hrl,
        };
        let y = vec![SentenceRecord {
            paragraph_id: "p".into(),
            position: 0,
            text: "jimla a nan".into(),
            langid_label: lrl.clone(),
            langid_confidence: 1.0,
            status: SentenceStatus::Kept,
        }];
        let eval = EvalSegmentSet::from_parallel("dev", vec!["hi".into()], vec!["sannu".into()]).unwrap();
        let cfg = SelfImproveConfig {
            rounds: 1,
            trainer_cmd: "exit 4".into(),
            bt: BtConfig::new(BtStrategy::Student),
        };
        assert!(matches!(self_improve(&y, &cfg, &ctx, &eval, dir.path()), Err(TranslateError::Trainer(_))));
        let log: Vec<TrainerInvocation> = read_jsonl(&dir.path().join(TRAINER_LOG)).unwrap();
        assert_eq!(log[0].exit_code, Some(4));
        assert_eq!(log[0].output_model, None);
    }
}
