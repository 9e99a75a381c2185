use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Language tag of the form `xxx_Yyyy`: an ISO 639-3 code plus an ISO 15924
/// script, e.g. `hau_Latn`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LangCode(String);

impl LangCode {
    pub fn new(code: impl Into<String>) -> Result<Self, CorpusError> {
        let code = code.into();
        if is_valid_code(&code) {
            Ok(Self(code))
        } else {
            Err(CorpusError::Invalid(format!(
                "language code {code:?} does not match xxx_Yyyy"
            )))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The four-letter script suffix (`Latn`, `Deva`, ...).
    pub fn script(&self) -> &str {
        &self.0[4..]
    }
}

fn is_valid_code(code: &str) -> bool {
    let bytes = code.as_bytes();
    bytes.len() == 8
        && bytes[..3].iter().all(u8::is_ascii_lowercase)
        && bytes[3] == b'_'
        && bytes[4..].iter().all(u8::is_ascii_alphabetic)
}

impl TryFrom<String> for LangCode {
    type Error = CorpusError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<LangCode> for String {
    fn from(value: LangCode) -> Self {
        value.0
    }
}

impl FromStr for LangCode {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl fmt::Display for LangCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An ordered language pair `(source, target)`; the two sides always differ.
///
/// Serialized as a two-element array, `["eng_Latn", "hau_Latn"]`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "(LangCode, LangCode)", into = "(LangCode, LangCode)")]
pub struct Direction {
    source: LangCode,
    target: LangCode,
}

impl Direction {
    pub fn new(source: LangCode, target: LangCode) -> Result<Self, CorpusError> {
        if source == target {
            return Err(CorpusError::Invalid(format!(
                "direction {source}->{target} has identical languages"
            )));
        }
        Ok(Self { source, target })
    }

    pub fn source(&self) -> &LangCode {
        &self.source
    }

    pub fn target(&self) -> &LangCode {
        &self.target
    }

    pub fn reversed(&self) -> Self {
        Self {
            source: self.target.clone(),
            target: self.source.clone(),
        }
    }

    /// True when `other` covers the same two languages in either order.
    pub fn same_languages(&self, other: &Direction) -> bool {
        self == other || self.reversed() == *other
    }
}

impl TryFrom<(LangCode, LangCode)> for Direction {
    type Error = CorpusError;

    fn try_from((source, target): (LangCode, LangCode)) -> Result<Self, Self::Error> {
        Self::new(source, target)
    }
}

impl From<Direction> for (LangCode, LangCode) {
    fn from(value: Direction) -> Self {
        (value.source, value.target)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.source, self.target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_well_formed_codes() {
        for code in ["eng_Latn", "hau_Latn", "npi_Deva", "urd_Arab"] {
            assert_eq!(LangCode::new(code).unwrap().as_str(), code);
        }
        assert_eq!(LangCode::new("npi_Deva").unwrap().script(), "Deva");
    }

    #[test]
    fn rejects_malformed_codes() {
        for code in ["", "en", "eng", "ENG_Latn", "eng-Latn", "eng_Lat", "eng_Latn1", "en1_Latn"] {
            assert!(LangCode::new(code).is_err(), "{code}");
        }
    }

    #[test]
    fn direction_requires_distinct_sides() {
        let eng = LangCode::new("eng_Latn").unwrap();
        assert!(Direction::new(eng.clone(), eng.clone()).is_err());
        let json = r#"["eng_Latn","eng_Latn"]"#;
        assert!(serde_json::from_str::<Direction>(json).is_err());
    }

    #[test]
    fn direction_serializes_as_pair() {
        let d = Direction::new("eng_Latn".parse().unwrap(), "hau_Latn".parse().unwrap()).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(json, r#"["eng_Latn","hau_Latn"]"#);
        assert_eq!(serde_json::from_str::<Direction>(&json).unwrap(), d);
        assert!(d.same_languages(&d.reversed()));
    }
}
