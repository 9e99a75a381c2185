//! Offline stand-in for generator and translator backends.
//!
//! Completions are pseudo-text drawn from a synthetic per-language
//! vocabulary, keyed by the request seed, the model name and the prompt
//! fingerprint. Translations are a tagged, exactly invertible rewrite of the
//! input so round trips can be checked.

use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;

use super::{BackendProfile, DecodeParams};
use crate::corpus_model::{derive_seed, fingerprint, LangCode};

const TAG_OPEN: char = '⟦';
const TAG_CLOSE: char = '⟧';
const VOCAB_SIZE: usize = 400;

struct Script {
    onsets: &'static [&'static str],
    nuclei: &'static [&'static str],
    cased: bool,
    terminator: char,
}

const LATIN: Script = Script {
    onsets: &["b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "y", "z", "sh", "ts", "kw", "ng"],
    nuclei: &["a", "e", "i", "o", "u", "aa", "ei", "ou"],
    cased: true,
    terminator: '.',
};
const DEVANAGARI: Script = Script {
    onsets: &["क", "ख", "ग", "घ", "च", "छ", "ज", "ट", "ड", "त", "थ", "द", "ध", "न", "प", "फ", "ब", "भ", "म", "य", "र", "ल", "व", "श", "स", "ह"],
    nuclei: &["", "ा", "ि", "ी", "ु", "ू", "े", "ै", "ो", "ौ"],
    cased: false,
    terminator: '।',
};
const ARABIC: Script = Script {
    onsets: &["ب", "ت", "ث", "ج", "ح", "خ", "د", "ذ", "ر", "ز", "س", "ش", "ص", "ض", "ط", "ع", "غ", "ف", "ق", "ك", "ل", "م", "ن", "ه"],
    nuclei: &["", "ا", "و", "ي"],
    cased: false,
    terminator: '.',
};
const CYRILLIC: Script = Script {
    onsets: &["б", "в", "г", "д", "ж", "з", "к", "л", "м", "н", "п", "р", "с", "т", "ф", "х", "ц", "ч", "ш"],
    nuclei: &["а", "е", "и", "о", "у", "ы", "я", "ю"],
    cased: true,
    terminator: '.',
};

fn script_for(lang: &LangCode) -> &'static Script {
    match lang.script() {
        "Deva" => &DEVANAGARI,
        "Arab" => &ARABIC,
        "Cyrl" => &CYRILLIC,
        _ => &LATIN,
    }
}

/// The synthetic vocabulary of `lang`. Languages sharing a script use
/// different subsets of its syllable inventory, so character n-gram
/// statistics differ between them.
pub fn vocabulary(lang: &LangCode) -> Vec<String> {
    let script = script_for(lang);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(0, "mock-vocab", 0) ^ seed_of(lang.as_str()));
    let mut onsets: Vec<&str> = script.onsets.to_vec();
    onsets.shuffle(&mut rng);
    onsets.truncate((onsets.len() * 2 / 3).max(4));
    let mut nuclei: Vec<&str> = script.nuclei.to_vec();
    nuclei.shuffle(&mut rng);
    nuclei.truncate((nuclei.len() * 2 / 3).max(2));

    let mut words = Vec::with_capacity(VOCAB_SIZE);
    let mut seen = std::collections::HashSet::new();
    while words.len() < VOCAB_SIZE {
        let syllables = rng.gen_range(1..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(onsets[rng.gen_range(0..onsets.len())]);
            w.push_str(nuclei[rng.gen_range(0..nuclei.len())]);
        }
        if seen.insert(w.clone()) {
            words.push(w);
        }
    }
    words
}

fn seed_of(text: &str) -> u64 {
    u64::from_str_radix(&fingerprint(text)[..16], 16).expect("hex digest")
}

/// One pseudo-sentence in `lang`, starting with a capital where the script
/// has case and ending with the script's full stop.
pub fn sentence(lang: &LangCode, vocab: &[String], rng: &mut impl Rng) -> String {
    let script = script_for(lang);
    let n = rng.gen_range(6..=16);
    let mut words: Vec<String> = (0..n)
        .map(|_| vocab[rng.gen_range(0..vocab.len())].clone())
        .collect();
    if script.cased {
        let first = &words[0];
        let mut chars = first.chars();
        let head: String = chars.next().map(|c| c.to_uppercase().collect()).unwrap_or_default();
        words[0] = head + chars.as_str();
    }
    let mut s = words.join(" ");
    s.push(script.terminator);
    s
}

pub fn paragraph(lang: &LangCode, rng: &mut impl Rng) -> String {
    let vocab = vocabulary(lang);
    let n = rng.gen_range(4..=9);
    (0..n)
        .map(|_| sentence(lang, &vocab, rng))
        .collect::<Vec<_>>()
        .join(" ")
}

fn lang_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b[a-z]{3}_[A-Z][a-z]{3}\b").expect("valid regex"))
}

/// Deterministic completion for a mock profile.
pub fn complete(profile: &BackendProfile, prompt: &str, params: &DecodeParams) -> String {
    if let Some(fixed) = &profile.mock_response {
        return fixed.clone();
    }
    if let Some((target, sentence)) = parse_mt_request(prompt) {
        return translate_text(sentence, &format!("{}:{target}", profile.model_name));
    }
    let seed = derive_seed(
        params.seed.unwrap_or(0),
        &profile.model_name,
        seed_of(prompt),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lang = lang_pattern()
        .find(prompt)
        .and_then(|m| LangCode::new(m.as_str()).ok())
        .unwrap_or_else(|| LangCode::new("und_Latn").expect("valid code"));
    paragraph(&lang, &mut rng)
}

/// Recognizes a prompt whose last block is an open translation request
/// (`Translate this from A to B:` / `A: text` / `B:`) and returns `(B, text)`.
fn parse_mt_request(prompt: &str) -> Option<(&str, &str)> {
    let lines: Vec<&str> = prompt.trim_end().lines().collect();
    let [.., header, source, cue] = lines.as_slice() else {
        return None;
    };
    let pair = header.strip_prefix("Translate this from ")?.strip_suffix(':')?;
    let (src, tgt) = pair.split_once(" to ")?;
    let text = source.strip_prefix(src)?.strip_prefix(": ")?;
    (cue.strip_suffix(':')? == tgt).then_some((tgt, text))
}

/// Tagged rewrite used as the mock translation: every whitespace-delimited
/// run of characters is reversed, spacing is kept as is.
pub fn translate_text(text: &str, tag: &str) -> String {
    format!("{TAG_OPEN}{tag}{TAG_CLOSE} {}", reverse_runs(text))
}

/// Inverse of [`translate_text`]: returns `(tag, original text)`.
pub fn invert_translation(translated: &str) -> Option<(String, String)> {
    let rest = translated.strip_prefix(TAG_OPEN)?;
    let (tag, body) = rest.split_once(TAG_CLOSE)?;
    let body = body.strip_prefix(' ')?;
    Some((tag.to_owned(), reverse_runs(body)))
}

fn reverse_runs(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut run: Vec<char> = Vec::new();
    for c in text.chars() {
        if c.is_whitespace() {
            out.extend(run.drain(..).rev());
            out.push(c);
        } else {
            run.push(c);
        }
    }
    out.extend(run.drain(..).rev());
    out
}
