use serde::{Deserialize, Serialize};

use super::PromptError;

/// Versioned wording of the paragraph-generation prompt.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationTemplate {
    pub version: String,
    pub instruction: String,
    pub paragraphs_header: String,
    pub paragraph_item: String,
    pub sentences_header: String,
    pub sentence_item: String,
    pub cue: String,
}

const BUILTIN: &str = include_str!("../../templates/generation_v1.toml");

impl Default for GenerationTemplate {
    fn default() -> Self {
        Self::parse(BUILTIN).expect("built-in template parses")
    }
}

impl GenerationTemplate {
    pub fn parse(text: &str) -> Result<Self, PromptError> {
        toml::from_str(text).map_err(|e| PromptError::Template(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PromptError::Template(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Substitutes `{key}` placeholders in one left-to-right pass; substituted
/// values are never re-scanned. Unknown placeholders are left as written.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 64);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| {
            let key = &after[..close];
            vars.iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| (*v, close))
        });
        match hit {
            Some((value, close)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}
