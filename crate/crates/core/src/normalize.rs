//! Text normalization shared by overlap rejection, decontamination and BM25.
//!
//! The pipeline is: Unicode NFC, lowercase, delete every character in a
//! Unicode punctuation category, split on whitespace. The version string is
//! written into blocklist and index headers so that stored artifacts can be
//! rejected when the normalizer changes.

use unicode_normalization::UnicodeNormalization;
use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

/// Identifier recorded alongside artifacts built with [`normalized_tokens`].
pub const NORMALIZATION_SPEC: &str = "nfc+lower+strip-punct+ws-split/v1";

pub fn is_punctuation(c: char) -> bool {
    c.general_category_group() == GeneralCategoryGroup::Punctuation
}

/// NFC-normalized, lowercased text with punctuation removed and runs of
/// whitespace collapsed to one ASCII space.
pub fn normalize_text(text: &str) -> String {
    normalized_tokens(text).join(" ")
}

pub fn normalized_tokens(text: &str) -> Vec<String> {
    let cleaned: String = text
        .nfc()
        .flat_map(char::to_lowercase)
        .filter(|c| !is_punctuation(*c))
        .collect();
    cleaned.split_whitespace().map(str::to_owned).collect()
}

/// NFC form of `text`. Stored records go through this before serialization.
pub fn nfc(text: &str) -> String {
    text.nfc().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_punctuation_and_case() {
        assert_eq!(
            normalized_tokens("Hello, World!  It's  «fine»."),
            vec!["hello", "world", "its", "fine"]
        );
    }

    #[test]
    fn composes_to_nfc() {
        // "e" + combining acute accent
        let decomposed = "caf\u{0065}\u{0301}";
        assert_eq!(normalize_text(decomposed), "caf\u{00e9}");
        assert_eq!(nfc(decomposed), "caf\u{00e9}");
    }

    #[test]
    fn punctuation_only_is_empty() {
        assert!(normalized_tokens(" ... !? ").is_empty());
    }

    #[test]
    fn non_latin_scripts_survive() {
        assert_eq!(normalized_tokens("नमस्ते दुनिया।"), vec!["नमस्ते", "दुनिया"]);
        assert_eq!(normalized_tokens("مرحبا؟ بك"), vec!["مرحبا", "بك"]);
    }
}
