use serde::{Deserialize, Serialize};

use super::{build_zero_shot_mt_prompt, LanguageNames, PromptError};
use crate::corpus_model::ParallelPair;

/// One supervised sample: loss is computed on `completion` only.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub prompt: String,
    pub completion: String,
    pub direction: crate::corpus_model::Direction,
}

/// Two records per pair, one per direction, using the zero-shot template.
/// Records come in pair order, high-to-low-resource direction first.
pub fn emit_finetune_records(
    names: &LanguageNames,
    pairs: &[ParallelPair],
) -> Result<Vec<TrainingRecord>, PromptError> {
    if pairs.is_empty() {
        return Err(PromptError::Contract("no pairs to emit".into()));
    }
    let mut out = Vec::with_capacity(pairs.len() * 2);
    for pair in pairs {
        pair.check().map_err(|e| PromptError::Contract(e.to_string()))?;
        let forward = pair.direction.clone();
        let backward = forward.reversed();
        out.push(TrainingRecord {
            prompt: build_zero_shot_mt_prompt(names, forward.source(), forward.target(), &pair.hrl_text)?,
            completion: pair.lrl_text.clone(),
            direction: forward,
        });
        out.push(TrainingRecord {
            prompt: build_zero_shot_mt_prompt(names, backward.source(), backward.target(), &pair.lrl_text)?,
            completion: pair.hrl_text.clone(),
            direction: backward,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus_model::{BtMode, Direction, LangCode};

    fn code(s: &str) -> LangCode {
        s.parse().unwrap()
    }

    fn names() -> LanguageNames {
        LanguageNames::from_iter([(code("eng_Latn"), "English"), (code("hau_Latn"), "Hausa")])
    }

    fn pair(i: usize) -> ParallelPair {
        ParallelPair {
            lrl_text: format!("Jimla ta {i}."),
            hrl_text: format!("Sentence number {i}."),
            direction: Direction::new(code("eng_Latn"), code("hau_Latn")).unwrap(),
            sentence_ref: format!("p:{i}"),
            bt_backend_id: "mt".into(),
            bt_mode: BtMode::SupervisedMt,
        }
    }

    #[test]
    fn ten_pairs_give_twenty_records() {
        let pairs: Vec<_> = (0..10).map(pair).collect();
        let recs = emit_finetune_records(&names(), &pairs).unwrap();
        assert_eq!(recs.len(), 20);
        for r in &recs {
            assert!(!r.prompt.contains(&r.completion));
            let header = format!("{}:", names().name(r.direction.target()).unwrap());
            assert!(r.prompt.ends_with(&header));
        }
        assert_eq!(recs[0].completion, "Jimla ta 0.");
        assert_eq!(recs[1].completion, "Sentence number 0.");
    }

    #[test]
    fn empty_side_is_rejected() {
        let mut p = pair(0);
        p.hrl_text = " ".into();
        assert!(emit_finetune_records(&names(), &[p]).is_err());
        assert!(emit_finetune_records(&names(), &[]).is_err());
    }

    #[test]
    fn records_serialize_with_three_fields() {
        let recs = emit_finetune_records(&names(), &[pair(1)]).unwrap();
        let v: serde_json::Value = serde_json::to_value(&recs[0]).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys, ["completion", "direction", "prompt"]);
    }
}
