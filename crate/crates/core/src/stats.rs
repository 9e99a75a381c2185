//! Per-language dataset statistics in the paragraphs / sentences /
//! sentences-after-decontamination layout.

use std::fmt::Write;

use num_format::{Locale, ToFormattedString};

use crate::corpus_model::RunManifest;
use crate::prompting::LanguageNames;

pub const STATS_HEADER: [&str; 4] = ["Language", "Paragraphs", "Sentences", "Sentences (after decon.)"];

pub fn thousands(n: u64) -> String {
    n.to_formatted_string(&Locale::en)
}

/// One row per language, sorted by code. Languages are shown by display
/// name when one is known.
pub fn render_stats_table(manifest: &RunManifest, names: &LanguageNames) -> String {
    let rows: Vec<[String; 4]> = manifest
        .counts
        .iter()
        .map(|(lang, c)| {
            [
                names.name(lang).map_or_else(|_| lang.to_string(), str::to_owned),
                thousands(c.paragraphs),
                thousands(c.sentences_raw),
                thousands(c.sentences_after_decon),
            ]
        })
        .collect();
    let mut widths = STATS_HEADER.map(str::len);
    for r in &rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: [&str; 4]| {
        let _ = writeln!(
            out,
            "| {:<w0$} | {:>w1$} | {:>w2$} | {:>w3$} |",
            cells[0],
            cells[1],
            cells[2],
            cells[3],
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2],
            w3 = widths[3]
        );
    };
    line(&mut out, STATS_HEADER);
    let _ = writeln!(
        out,
        "|{}|{}:|{}:|{}:|",
        "-".repeat(widths[0] + 2),
        "-".repeat(widths[1] + 1),
        "-".repeat(widths[2] + 1),
        "-".repeat(widths[3] + 1)
    );
    for r in &rows {
        line(&mut out, [&r[0], &r[1], &r[2], &r[3]]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus_model::{LangCode, StageCounts};

    #[test]
    fn separators() {
        assert_eq!(thousands(0), "0");
        assert_eq!(thousands(999), "999");
        assert_eq!(thousands(101488), "101,488");
        assert_eq!(thousands(1_000_000), "1,000,000");
    }

    #[test]
    fn rows_sorted_by_code() {
        let mut m = RunManifest::new("r", "f");
        for (code, p) in [("swh_Latn", 3), ("eus_Latn", 1)] {
            *m.counts_mut(&LangCode::new(code).unwrap()) = StageCounts {
                paragraphs: p,
                ..StageCounts::default()
            };
        }
        let table = render_stats_table(&m, &LanguageNames::default());
        let lines: Vec<&str> = table.lines().collect();
        assert!(lines[2].starts_with("| eus_Latn"));
        assert!(lines[3].starts_with("| swh_Latn"));
    }
}
