use super::{LanguageNames, PromptError};
use crate::corpus_model::{Bitext, Direction, LangCode};

/// Zero-shot translation prompt, three lines:
///
/// ```text
/// Translate this from English to Hausa:
/// English: <sentence>
/// Hausa:
/// ```
pub fn build_zero_shot_mt_prompt(
    names: &LanguageNames,
    src: &LangCode,
    tgt: &LangCode,
    sentence: &str,
) -> Result<String, PromptError> {
    if sentence.trim().is_empty() {
        return Err(PromptError::Contract("sentence to translate is empty".into()));
    }
    let src_name = names.name(src)?;
    let tgt_name = names.name(tgt)?;
    Ok(format!(
        "Translate this from {src_name} to {tgt_name}:\n{src_name}: {}\n{tgt_name}:",
        single_line(sentence)
    ))
}

/// Completed demonstrations followed by the open request for `sentence`.
/// Examples keep the order they are given in. With no examples this is
/// exactly the zero-shot prompt.
pub fn build_few_shot_mt_prompt<B: Bitext>(
    names: &LanguageNames,
    examples: &[B],
    src: &LangCode,
    tgt: &LangCode,
    sentence: &str,
) -> Result<String, PromptError> {
    let wanted = Direction::new(src.clone(), tgt.clone())
        .map_err(|e| PromptError::Contract(e.to_string()))?;
    let mut blocks = Vec::with_capacity(examples.len() + 1);
    for (i, ex) in examples.iter().enumerate() {
        if !ex.direction().same_languages(&wanted) {
            return Err(PromptError::Contract(format!(
                "example {i} is {} but the request is {wanted}",
                ex.direction()
            )));
        }
        let source = ex.text_in(src).expect("direction checked");
        let target = ex.text_in(tgt).expect("direction checked");
        let open = build_zero_shot_mt_prompt(names, src, tgt, source)?;
        blocks.push(format!("{open} {}", single_line(target)));
    }
    blocks.push(build_zero_shot_mt_prompt(names, src, tgt, sentence)?);
    Ok(blocks.join("\n\n"))
}

fn single_line(text: &str) -> String {
    if text.contains(['\n', '\r']) {
        text.split_whitespace().collect::<Vec<_>>().join(" ")
    } else {
        text.trim().to_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus_model::PoolEntry;

    fn code(s: &str) -> LangCode {
        s.parse().unwrap()
    }

    fn names() -> LanguageNames {
        LanguageNames::from_iter([
            (code("eng_Latn"), "English"),
            (code("hau_Latn"), "Hausa"),
            (code("sun_Latn"), "Sundanese"),
        ])
    }

    fn entry(hrl: &str, lrl: &str) -> PoolEntry {
        PoolEntry {
            hrl_text: hrl.into(),
            lrl_text: lrl.into(),
            direction: Direction::new(code("eng_Latn"), code("hau_Latn")).unwrap(),
        }
    }

    #[test]
    fn zero_shot_template_is_verbatim() {
        let p = build_zero_shot_mt_prompt(
            &names(),
            &code("eng_Latn"),
            &code("hau_Latn"),
            "\"We now have 4-month-old mice that are non-diabetic that used to be diabetic,\" he added.",
        )
        .unwrap();
        assert_eq!(
            p,
            "Translate this from English to Hausa:\n\
             English: \"We now have 4-month-old mice that are non-diabetic that used to be diabetic,\" he added.\n\
             Hausa:"
        );
    }

    #[test]
    fn target_name_comes_from_the_table() {
        let p = build_zero_shot_mt_prompt(&names(), &code("eng_Latn"), &code("sun_Latn"), "Hello.")
            .unwrap();
        assert_eq!(p, "Translate this from English to Sundanese:\nEnglish: Hello.\nSundanese:");
        assert!(matches!(
            build_zero_shot_mt_prompt(&names(), &code("eng_Latn"), &code("som_Latn"), "Hello."),
            Err(PromptError::UnknownLanguage(_))
        ));
        assert!(build_zero_shot_mt_prompt(&names(), &code("eng_Latn"), &code("sun_Latn"), " ").is_err());
    }

    #[test]
    fn one_example_gives_two_blocks() {
        let p = build_few_shot_mt_prompt(
            &names(),
            &[entry("Good morning.", "Barka da safiya.")],
            &code("eng_Latn"),
            &code("hau_Latn"),
            "Thank you.",
        )
        .unwrap();
        assert_eq!(
            p,
            "Translate this from English to Hausa:\nEnglish: Good morning.\nHausa: Barka da safiya.\n\n\
             Translate this from English to Hausa:\nEnglish: Thank you.\nHausa:"
        );
    }

    #[test]
    fn examples_may_be_used_in_reverse() {
        let p = build_few_shot_mt_prompt(
            &names(),
            &[entry("Good morning.", "Barka da safiya.")],
            &code("hau_Latn"),
            &code("eng_Latn"),
            "Na gode.",
        )
        .unwrap();
        assert!(p.starts_with("Translate this from Hausa to English:\nHausa: Barka da safiya.\nEnglish: Good morning."));
    }

    #[test]
    fn mismatched_example_is_named_by_index() {
        let mut bad = entry("a", "b");
        bad.direction = Direction::new(code("eng_Latn"), code("sun_Latn")).unwrap();
        let err = build_few_shot_mt_prompt(
            &names(),
            &[entry("x", "y"), bad],
            &code("eng_Latn"),
            &code("hau_Latn"),
            "q",
        )
        .unwrap_err();
        assert!(err.to_string().contains("example 1"), "{err}");
    }

    #[test]
    fn no_examples_equals_zero_shot() {
        let few = build_few_shot_mt_prompt::<PoolEntry>(&names(), &[], &code("eng_Latn"), &code("hau_Latn"), "Hi.")
            .unwrap();
        let zero = build_zero_shot_mt_prompt(&names(), &code("eng_Latn"), &code("hau_Latn"), "Hi.").unwrap();
        assert_eq!(few, zero);
    }

    #[test]
    fn embedded_newlines_keep_three_lines() {
        let p = build_zero_shot_mt_prompt(&names(), &code("eng_Latn"), &code("hau_Latn"), "a\nb").unwrap();
        assert_eq!(p.lines().count(), 3);
    }
}
