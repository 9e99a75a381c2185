use serde::{Deserialize, Serialize};

use crate::corpus_model::GeneratedParagraph;
use crate::gateway::{BackendKind, BackendProfile, DecodeParams, Gateway, GatewayError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopicVerdict {
    Yes,
    No,
    Unparseable,
}

pub fn judge_prompt(topic: &str, paragraph: &str) -> String {
    format!(
        "Does the following paragraph accurately address the topic \"{topic}\"? \
         Answer with a single word: Yes or No.\n\nParagraph:\n{}\n\nAnswer:",
        paragraph.trim()
    )
}

/// Reads the first word of a judge reply, ignoring case and surrounding
/// punctuation.
pub fn parse_verdict(reply: &str) -> TopicVerdict {
    let first = reply
        .split_whitespace()
        .next()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase());
    match first.as_deref() {
        Some("yes") => TopicVerdict::Yes,
        Some("no") => TopicVerdict::No,
        _ => TopicVerdict::Unparseable,
    }
}

pub fn judge_topic_alignment(
    paragraph: &GeneratedParagraph,
    gateway: &Gateway,
    judge: &BackendProfile,
) -> Result<TopicVerdict, GatewayError> {
    if !matches!(judge.kind, BackendKind::ChatLlm | BackendKind::Mock) {
        return Err(GatewayError::WrongKind {
            backend_id: judge.backend_id.clone(),
            kind: judge.kind,
            operation: "judge_topic_alignment",
        });
    }
    let params = DecodeParams {
        max_new_tokens: 8,
        ..DecodeParams::greedy()
    };
    let reply = gateway.complete(judge, &judge_prompt(&paragraph.topic.label, &paragraph.text), &params)?;
    Ok(parse_verdict(&reply.text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_first_word_only() {
        assert_eq!(parse_verdict("Yes"), TopicVerdict::Yes);
        assert_eq!(parse_verdict("  yes, it does."), TopicVerdict::Yes);
        assert_eq!(parse_verdict("NO."), TopicVerdict::No);
        assert_eq!(parse_verdict("**No**"), TopicVerdict::No);
        assert_eq!(parse_verdict("Maybe so"), TopicVerdict::Unparseable);
        assert_eq!(parse_verdict("The answer is yes"), TopicVerdict::Unparseable);
        assert_eq!(parse_verdict(""), TopicVerdict::Unparseable);
    }

    #[test]
    fn prompt_names_topic_and_paragraph() {
        let p = judge_prompt("Lake Chad", "Some text.");
        assert!(p.contains("\"Lake Chad\"") && p.contains("Some text."));
    }
}
