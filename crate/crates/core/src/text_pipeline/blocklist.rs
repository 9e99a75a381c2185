use std::collections::HashMap;
use std::hash::Hasher;
use std::io::{Read, Write};
use std::path::Path;

use fnv::FnvHasher;

use crate::corpus_model::CorpusError;
use crate::normalize::{normalized_tokens, NORMALIZATION_SPEC};

pub const NGRAM_ORDER: usize = 10;
const MAGIC: &[u8; 8] = b"PSNGRAM\0";
const FORMAT_VERSION: u32 = 1;
const SEP: char = '\u{1f}';

/// Hashed word n-grams of evaluation text. Hash hits are confirmed against
/// the stored literal n-gram, so collisions never cause a drop.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NgramBlocklist {
    n: usize,
    entries: HashMap<u64, Vec<String>>,
}

fn hash_literal(literal: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write(literal.as_bytes());
    h.finish()
}

fn literals(text: &str, n: usize) -> impl Iterator<Item = String> {
    let sep = SEP.to_string();
    let tokens = normalized_tokens(text);
    (0..tokens.len().saturating_sub(n - 1)).map(move |i| tokens[i..i + n].join(&sep))
}

impl NgramBlocklist {
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        Self::build_with_order(texts, NGRAM_ORDER)
    }

    pub fn build_with_order<'a>(texts: impl IntoIterator<Item = &'a str>, n: usize) -> Self {
        assert!(n >= 1, "n-gram order must be positive");
        let mut list = Self {
            n,
            entries: HashMap::new(),
        };
        for text in texts {
            for lit in literals(text, n) {
                let bucket = list.entries.entry(hash_literal(&lit)).or_default();
                if !bucket.contains(&lit) {
                    bucket.push(lit);
                }
            }
        }
        list
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of the text's n-gram windows that occur in the blocklist.
    pub fn matches(&self, text: &str) -> usize {
        literals(text, self.n)
            .filter(|lit| {
                self.entries
                    .get(&hash_literal(lit))
                    .is_some_and(|bucket| bucket.contains(lit))
            })
            .count()
    }

    pub fn contains_overlap(&self, text: &str) -> bool {
        !self.entries.is_empty()
            && literals(text, self.n).any(|lit| {
                self.entries
                    .get(&hash_literal(&lit))
                    .is_some_and(|bucket| bucket.contains(&lit))
            })
    }

    /// Layout (little-endian): magic, format version u32, order u32,
    /// normalization spec (u32 length + UTF-8), entry count u64, then per
    /// entry: hash u64, literal (u32 length + UTF-8). Entries are sorted.
    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let mut items: Vec<(u64, &str)> = self
            .entries
            .iter()
            .flat_map(|(h, lits)| lits.iter().map(move |l| (*h, l.as_str())))
            .collect();
        items.sort_unstable();
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.n as u32).to_le_bytes());
        put_str(&mut buf, NORMALIZATION_SPEC);
        buf.extend_from_slice(&(items.len() as u64).to_le_bytes());
        for (h, lit) in items {
            buf.extend_from_slice(&h.to_le_bytes());
            put_str(&mut buf, lit);
        }
        let tmp = path.with_extension("tmp");
        std::fs::File::create(&tmp)
            .and_then(|mut f| f.write_all(&buf).and_then(|_| f.sync_all()))
            .and_then(|_| std::fs::rename(&tmp, path))
            .map_err(|e| CorpusError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| CorpusError::io(path, e))?;
        let bad = |m: &str| CorpusError::Invalid(format!("{}: {m}", path.display()));
        let mut r = Reader { bytes: &bytes, at: 0 };
        if r.take(8).ok_or_else(|| bad("truncated header"))? != MAGIC {
            return Err(bad("not an n-gram blocklist"));
        }
        let version = r.u32().ok_or_else(|| bad("truncated header"))?;
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported format version {version}")));
        }
        let n = r.u32().ok_or_else(|| bad("truncated header"))? as usize;
        let spec = r.string().ok_or_else(|| bad("truncated header"))?;
        if spec != NORMALIZATION_SPEC {
            return Err(bad(&format!(
                "built with normalization {spec:?}, current is {NORMALIZATION_SPEC:?}"
            )));
        }
        let count = r.u64().ok_or_else(|| bad("truncated header"))?;
        let mut entries: HashMap<u64, Vec<String>> = HashMap::new();
        for _ in 0..count {
            let h = r.u64().ok_or_else(|| bad("truncated entry"))?;
            let lit = r.string().ok_or_else(|| bad("truncated entry"))?;
            if hash_literal(&lit) != h {
                return Err(bad("entry hash does not match its literal"));
            }
            entries.entry(h).or_default().push(lit);
        }
        if r.at != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(Self { n, entries })
    }
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.bytes.get(self.at..self.at.checked_add(n)?)?;
        self.at += n;
        Some(s)
    }
    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }
    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
    fn string(&mut self) -> Option<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EVAL: &str = "one two three four five six seven eight nine ten eleven twelve";

    #[test]
    fn twelve_token_segment_has_three_windows() {
        let list = NgramBlocklist::build([EVAL]);
        assert_eq!(list.len(), 3);
        assert_eq!(list.matches(EVAL), 3);
        assert_eq!(list.matches("One, TWO three four five six seven eight nine ten!"), 1);
    }

    #[test]
    fn short_sentences_never_match() {
        let list = NgramBlocklist::build([EVAL]);
        assert!(!list.contains_overlap("one two three four five six seven eight nine"));
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("eval.ngrams");
        let list = NgramBlocklist::build([EVAL, "a b c d e f g h i j"]);
        list.save(&path).unwrap();
        assert_eq!(NgramBlocklist::load(&path).unwrap(), list);

        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(NgramBlocklist::load(&path).is_err());
    }
}
