//! From accepted paragraphs to a filtered sentence set: splitting, language
//! identification, length bounds and n-gram decontamination.
//!
//! Filters only change a record's status. Text is never rewritten after
//! splitting, and every split sentence is kept in the output with the reason
//! it was dropped, if any.

mod blocklist;
mod langid;
mod splitter;

use rayon::prelude::*;

use crate::corpus_model::{GeneratedParagraph, LangCode, SentenceRecord, SentenceStatus, StageCounts};
use crate::normalize::{nfc, normalized_tokens};

pub use blocklist::{NgramBlocklist, NGRAM_ORDER};
pub use langid::{train_langid, ExternalClassifier, LangIdError, LangIdModel, LangVerdict, LanguageIdentifier};
pub use splitter::{split_sentences, SplitterRules};

pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.5;

/// Marks kept records whose text shares a verified n-gram with the
/// blocklist. Records already dropped for another reason are left alone.
pub fn decontaminate(mut records: Vec<SentenceRecord>, blocklist: &NgramBlocklist) -> Vec<SentenceRecord> {
    records.par_iter_mut().for_each(|r| {
        if r.is_kept() && blocklist.contains_overlap(&r.text) {
            r.status = SentenceStatus::DroppedDecontaminated;
        }
    });
    records
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterOutput {
    pub records: Vec<SentenceRecord>,
    pub counts: StageCounts,
}

#[derive(Clone, Debug)]
pub struct FilterSettings<'a> {
    pub rules: &'a SplitterRules,
    pub blocklist: &'a NgramBlocklist,
    pub expected_lang: &'a LangCode,
    pub confidence_threshold: f64,
}

/// Splits every paragraph of `expected_lang`, then applies language
/// identification, the length bounds and decontamination in that order.
pub fn apply_filters(
    paragraphs: &[GeneratedParagraph],
    identifier: &dyn LanguageIdentifier,
    settings: &FilterSettings<'_>,
) -> Result<FilterOutput, LangIdError> {
    let lang = settings.expected_lang;
    let ours: Vec<&GeneratedParagraph> = paragraphs.iter().filter(|p| &p.target_lang == lang).collect();
    let split: Vec<(String, u32, String)> = ours
        .par_iter()
        .map(|p| {
            split_sentences(&nfc(&p.text), settings.rules, lang)
                .into_iter()
                .enumerate()
                .map(|(i, s)| (p.id.clone(), i as u32, s))
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    let texts: Vec<&str> = split.iter().map(|(_, _, s)| s.as_str()).collect();
    let verdicts = identifier.classify_batch(&texts)?;
    let mut records: Vec<SentenceRecord> = split
        .into_iter()
        .zip(verdicts)
        .map(|((paragraph_id, position, text), v)| {
            let lang_ok = &v.label == lang
                && v.confidence >= settings.confidence_threshold
                && !v.is_low_confidence();
            let status = if !lang_ok {
                SentenceStatus::DroppedLangid
            } else {
                let n = normalized_tokens(&text).len();
                if n < settings.rules.min_tokens || n > settings.rules.max_tokens {
                    SentenceStatus::DroppedLength
                } else {
                    SentenceStatus::Kept
                }
            };
            SentenceRecord {
                paragraph_id,
                position,
                text,
                langid_label: v.label,
                langid_confidence: v.confidence,
                status,
            }
        })
        .collect();
    records = decontaminate(records, settings.blocklist);

    let counts = StageCounts {
        paragraphs: ours.len() as u64,
        sentences_raw: records.len() as u64,
        sentences_after_langid: records
            .iter()
            .filter(|r| r.status != SentenceStatus::DroppedLangid)
            .count() as u64,
        sentences_after_decon: records.iter().filter(|r| r.is_kept()).count() as u64,
        pairs: 0,
    };
    Ok(FilterOutput { records, counts })
}
