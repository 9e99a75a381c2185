use serde::{Deserialize, Serialize};

use super::{check_lengths, MetricError};
use crate::hooks::{one_line, run_line_hook};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRange {
    pub min: f64,
    pub max: f64,
}

/// Sends `source<TAB>hypothesis<TAB>reference` lines to `command` and reads
/// back one score per line, in input order.
pub fn external_score(
    sources: &[&str],
    hypotheses: &[&str],
    references: &[&str],
    command: &str,
    range: Option<ScoreRange>,
) -> Result<Vec<f64>, MetricError> {
    check_lengths("sources vs hypotheses", sources.len(), hypotheses.len())?;
    check_lengths("hypotheses vs references", hypotheses.len(), references.len())?;
    let lines: Vec<String> = sources
        .iter()
        .zip(hypotheses)
        .zip(references)
        .map(|((s, h), r)| format!("{}\t{}\t{}", one_line(s), one_line(h), one_line(r)))
        .collect();
    let out = run_line_hook(command, &lines).map_err(|e| MetricError::Integration(e.to_string()))?;
    out.iter()
        .enumerate()
        .map(|(i, line)| {
            let v: f64 = line
                .trim()
                .parse()
                .map_err(|_| MetricError::Integration(format!("line {}: not a number: {line:?}", i + 1)))?;
            if let Some(r) = range {
                if !(r.min..=r.max).contains(&v) {
                    return Err(MetricError::Integration(format!(
                        "line {}: score {v} outside [{}, {}]",
                        i + 1,
                        r.min,
                        r.max
                    )));
                }
            }
            Ok(v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_hook() {
        let s = external_score(&["a", "b"], &["c", "d"], &["e", "f"], "while read -r l; do echo 0.0; done", None).unwrap();
        assert_eq!(s, [0.0, 0.0]);
    }

    #[test]
    fn short_output_is_an_error() {
        let err = external_score(&["a", "b"], &["c", "d"], &["e", "f"], "head -n 1 | sed 's/.*/1/'", None);
        assert!(matches!(err, Err(MetricError::Integration(_))));
    }

    #[test]
    fn range_is_enforced() {
        let r = Some(ScoreRange { min: 0.0, max: 25.0 });
        assert!(external_score(&["a"], &["b"], &["c"], "read -r l; echo 30", r).is_err());
        assert_eq!(external_score(&["a"], &["b"], &["c"], "read -r l; echo 12.5", r).unwrap(), [12.5]);
    }
}
