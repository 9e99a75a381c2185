//! A self-contained offline workspace: a config over mock backends plus
//! topic, seed, evaluation and example-pool files in the mock vocabularies.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus_model::{
    derive_seed, write_jsonl, CorpusError, Direction, EvalSegment, LangCode, PoolEntry, SeedParagraph, Topic,
};
use crate::gateway::mock;

#[derive(Clone, Debug)]
pub struct DemoSpec {
    pub languages: Vec<LangCode>,
    pub hrl: LangCode,
    pub n_paragraphs: usize,
    pub seed: u64,
    pub topics: usize,
    pub seed_paragraphs: usize,
    pub seed_sentences: usize,
    pub eval_segments: usize,
    pub pool_entries: usize,
}

impl DemoSpec {
    pub fn new(languages: Vec<LangCode>, n_paragraphs: usize, seed: u64) -> Self {
        Self {
            languages,
            hrl: LangCode::new("eng_Latn").expect("valid"),
            n_paragraphs,
            seed,
            topics: 200,
            seed_paragraphs: 12,
            seed_sentences: 300,
            eval_segments: 40,
            pool_entries: 60,
        }
    }
}

const TOPIC_WORDS: &[&str] = &[
    "agriculture", "astronomy", "bridges", "climate", "cooking", "dance", "education", "festivals", "fishing",
    "football", "forests", "geology", "harvest", "history", "libraries", "markets", "medicine", "migration",
    "mountains", "music", "pottery", "railways", "rivers", "trade", "weaving", "wildlife",
];

fn display_name(code: &LangCode) -> String {
    match code.as_str() {
        "eng_Latn" => "English".into(),
        "hau_Latn" => "Hausa".into(),
        "npi_Deva" => "Nepali".into(),
        "swh_Latn" => "Swahili".into(),
        "arz_Arab" => "Egyptian Arabic".into(),
        "bak_Cyrl" => "Bashkir".into(),
        other => other.to_owned(),
    }
}

fn sentences(lang: &LangCode, n: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let vocab = mock::vocabulary(lang);
    (0..n).map(|_| mock::sentence(lang, &vocab, rng)).collect()
}

/// Writes the workspace into `dir` and returns the config path.
pub fn write_demo(dir: &Path, spec: &DemoSpec) -> Result<PathBuf, CorpusError> {
    std::fs::create_dir_all(dir).map_err(|e| CorpusError::io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "demo", 0));

    let topics: Vec<Topic> = (0..spec.topics as u64)
        .map(|id| {
            let a = TOPIC_WORDS[rng.gen_range(0..TOPIC_WORDS.len())];
            let b = TOPIC_WORDS[rng.gen_range(0..TOPIC_WORDS.len())];
            Topic {
                id,
                label: format!("{a} and {b} {id}"),
            }
        })
        .collect();
    write_jsonl(&dir.join("topics.jsonl"), &topics)?;

    let seed_paragraphs: Vec<SeedParagraph> = (0..spec.seed_paragraphs)
        .map(|_| SeedParagraph {
            lang: spec.hrl.clone(),
            text: mock::paragraph(&spec.hrl, &mut rng),
        })
        .collect();
    write_jsonl(&dir.join("seed_paragraphs.jsonl"), &seed_paragraphs)?;

    let mut seed_sentences = Vec::new();
    for lang in spec.languages.iter().chain([&spec.hrl]) {
        for text in sentences(lang, spec.seed_sentences, &mut rng) {
            seed_sentences.push(SeedParagraph { lang: lang.clone(), text });
        }
    }
    write_jsonl(&dir.join("seed_sentences.jsonl"), &seed_sentences)?;

    let mut pool = Vec::new();
    let mut eval_toml = String::new();
    for lang in &spec.languages {
        let segments: Vec<EvalSegment> = sentences(&spec.hrl, spec.eval_segments, &mut rng)
            .into_iter()
            .zip(sentences(lang, spec.eval_segments, &mut rng))
            .map(|(source, reference)| EvalSegment { source, reference })
            .collect();
        let file = format!("eval.{lang}.jsonl");
        write_jsonl(&dir.join(&file), &segments)?;
        eval_toml.push_str(&format!(
            "\n[[paths.eval_sets]]\nname = \"devtest\"\nlang = \"{lang}\"\npath = \"{file}\"\n"
        ));
        let direction = Direction::new(spec.hrl.clone(), lang.clone())?;
        let hrl = sentences(&spec.hrl, spec.pool_entries, &mut rng);
        let lrl = sentences(lang, spec.pool_entries, &mut rng);
        pool.extend(hrl.into_iter().zip(lrl).map(|(hrl_text, lrl_text)| PoolEntry {
            hrl_text,
            lrl_text,
            direction: direction.clone(),
        }));
    }
    write_jsonl(&dir.join("bt_pool.jsonl"), &pool)?;

    let langs = spec
        .languages
        .iter()
        .map(|l| format!("\"{l}\""))
        .collect::<Vec<_>>()
        .join(", ");
    let names: String = spec
        .languages
        .iter()
        .chain([&spec.hrl])
        .map(|l| format!("{l} = \"{}\"\n", display_name(l)))
        .collect();
    let config = format!(
        r#"master_seed = {seed}
hrl = "{hrl}"
languages = [{langs}]
runs_dir = "runs"

[language_names]
{names}
[paths]
topics = "topics.jsonl"
seed_paragraphs = "seed_paragraphs.jsonl"
seed_sentences = "seed_sentences.jsonl"
bt_pool = "bt_pool.jsonl"
{eval_toml}
[[backends]]
backend_id = "generator"
kind = "mock"
model_name = "mock-generator"

[[backends]]
backend_id = "mt"
kind = "mock"
model_name = "mock-mt"

[[backends]]
backend_id = "student"
kind = "mock"
model_name = "mock-student"

[roles]
generator = "generator"
back_translator = "mt"
student = "student"
judge = "generator"

[generation]
n_target_paragraphs = {n}

[selfloop]
rounds = 2
trainer_cmd = 'echo "$2"'
"#,
        seed = spec.seed,
        hrl = spec.hrl,
        n = spec.n_paragraphs,
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, config).map_err(|e| CorpusError::io(&path, e))?;
    Ok(path)
}
