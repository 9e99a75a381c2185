use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus_model::LangCode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitterRules {
    #[serde(default = "default_terminators")]
    pub terminators: BTreeSet<char>,
    /// Abbreviations that never end a sentence, in every language.
    #[serde(default = "default_abbreviations")]
    pub abbreviations: BTreeSet<String>,
    #[serde(default)]
    pub language_abbreviations: BTreeMap<LangCode, BTreeSet<String>>,
    #[serde(default = "default_min_tokens")]
    pub min_tokens: usize,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: usize,
}

fn default_terminators() -> BTreeSet<char> {
    ['.', '!', '?', '।', '؟'].into_iter().collect()
}

fn default_abbreviations() -> BTreeSet<String> {
    ["Dr.", "Mr.", "Mrs.", "Ms.", "Prof.", "St.", "Jr.", "Sr.", "e.g.", "i.e.", "vs."]
        .into_iter()
        .map(String::from)
        .collect()
}

fn default_min_tokens() -> usize {
    3
}

fn default_max_tokens() -> usize {
    150
}

impl Default for SplitterRules {
    fn default() -> Self {
        Self {
            terminators: default_terminators(),
            abbreviations: default_abbreviations(),
            language_abbreviations: BTreeMap::new(),
            min_tokens: default_min_tokens(),
            max_tokens: default_max_tokens(),
        }
    }
}

impl SplitterRules {
    pub fn validate(&self) -> Result<(), String> {
        if self.terminators.is_empty() {
            return Err("terminator set is empty".into());
        }
        if self.min_tokens == 0 || self.max_tokens < self.min_tokens {
            return Err(format!(
                "token bounds {}..={} are invalid",
                self.min_tokens, self.max_tokens
            ));
        }
        Ok(())
    }

    fn is_abbreviation(&self, word: &str, lang: &LangCode) -> bool {
        self.abbreviations.contains(word)
            || self
                .language_abbreviations
                .get(lang)
                .is_some_and(|set| set.contains(word))
    }
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | '”' | '’' | '»' | ')' | ']' | '}')
}

/// Splits after a terminator run (plus closing quotes or brackets) when it
/// is followed by whitespace and a character that is not lowercase.
/// Non-whitespace characters are preserved in order.
pub fn split_sentences(paragraph: &str, rules: &SplitterRules, lang: &LangCode) -> Vec<String> {
    let chars: Vec<(usize, char)> = paragraph.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        if !rules.terminators.contains(&chars[i].1) {
            i += 1;
            continue;
        }
        let term_at = i;
        let mut j = i + 1;
        while j < chars.len() && (rules.terminators.contains(&chars[j].1) || is_closer(chars[j].1)) {
            j += 1;
        }
        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let boundary = k > j && k < chars.len() && !chars[k].1.is_lowercase();
        if boundary && !ends_with_abbreviation(paragraph, &chars, start, term_at, j, rules, lang) {
            let end = chars[j].0;
            push_trimmed(&mut out, &paragraph[start..end]);
            start = end;
        }
        i = j;
    }
    push_trimmed(&mut out, &paragraph[start..]);
    out
}

fn ends_with_abbreviation(
    text: &str,
    chars: &[(usize, char)],
    start: usize,
    term_at: usize,
    run_end: usize,
    rules: &SplitterRules,
    lang: &LangCode,
) -> bool {
    // Only a single period can close an abbreviation.
    if run_end != term_at + 1 || chars[term_at].1 != '.' {
        return false;
    }
    let end = chars[term_at].0 + 1;
    let last = text[start..end].rsplit(char::is_whitespace).next().unwrap_or("");
    let word = last.trim_start_matches(['(', '"', '\'', '“', '‘', '«']);
    rules.is_abbreviation(word, lang)
}

fn push_trimmed(out: &mut Vec<String>, segment: &str) {
    let s = segment.trim();
    if !s.is_empty() {
        out.push(s.to_owned());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eng() -> LangCode {
        LangCode::new("eng_Latn").unwrap()
    }

    fn split(s: &str) -> Vec<String> {
        split_sentences(s, &SplitterRules::default(), &eng())
    }

    #[test]
    fn unambiguous_terminators() {
        assert_eq!(split("Hello world. How are you?"), ["Hello world.", "How are you?"]);
    }

    #[test]
    fn abbreviation_is_not_a_boundary() {
        assert_eq!(split("Dr. Smith arrived."), ["Dr. Smith arrived."]);
        assert_eq!(split("He met (Dr. Smith) today. Then left."), ["He met (Dr. Smith) today.", "Then left."]);
    }

    #[test]
    fn language_specific_abbreviations() {
        let hau = LangCode::new("hau_Latn").unwrap();
        let mut rules = SplitterRules::default();
        rules.language_abbreviations.insert(hau.clone(), ["Malam.".to_string()].into());
        assert_eq!(split_sentences("Malam. Musa ya zo.", &rules, &hau).len(), 1);
        assert_eq!(split_sentences("Malam. Musa ya zo.", &rules, &eng()).len(), 2);
    }

    #[test]
    fn lowercase_continuation_and_closers() {
        assert_eq!(split("It costs 3.5 dollars. ok then"), ["It costs 3.5 dollars. ok then"]);
        assert_eq!(split("He said \"stop!\" Then he ran."), ["He said \"stop!\"", "Then he ran."]);
        assert_eq!(split("Really?! Yes."), ["Really?!", "Yes."]);
    }

    #[test]
    fn non_latin_terminators() {
        let hin = LangCode::new("hin_Deva").unwrap();
        let out = split_sentences("यह एक वाक्य है। यह दूसरा है।", &SplitterRules::default(), &hin);
        assert_eq!(out, ["यह एक वाक्य है।", "यह दूसरा है।"]);
        let arb = LangCode::new("arb_Arab").unwrap();
        assert_eq!(split_sentences("كيف حالك؟ أنا بخير.", &SplitterRules::default(), &arb).len(), 2);
    }

    #[test]
    fn digits_start_a_new_sentence() {
        assert_eq!(split("Done. 42 remain."), ["Done.", "42 remain."]);
    }

    fn strip_ws(s: &str) -> String {
        s.chars().filter(|c| !c.is_whitespace()).collect()
    }

    proptest! {
        #[test]
        fn conserves_characters(text in "[a-zA-Z .!?,\"\n]{0,80}") {
            let parts = split(&text);
            prop_assert_eq!(strip_ws(&parts.concat()), strip_ws(&text));
            if text.chars().any(|c| !c.is_whitespace()) {
                prop_assert!(!parts.is_empty());
            }
            for p in &parts {
                prop_assert_eq!(p.trim(), p.as_str());
                prop_assert!(!p.is_empty());
            }
        }
    }
}
