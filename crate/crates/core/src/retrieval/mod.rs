//! BM25 retrieval of few-shot examples from a parallel pool.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::corpus_model::{Bitext, CorpusError, PoolEntry};
use crate::normalize::{normalized_tokens, NORMALIZATION_SPEC};

pub const DEFAULT_K1: f64 = 1.5;
pub const DEFAULT_B: f64 = 0.75;

const MAGIC: &[u8; 8] = b"PSBM25\0\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("cannot index an empty corpus")]
    EmptyCorpus,
    #[error("k must be at least 1")]
    ZeroK,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bm25Index {
    /// Term to `(doc id, term frequency)`, doc ids ascending.
    postings: HashMap<String, Vec<(u32, u32)>>,
    doc_lengths: Vec<u32>,
    avg_doc_length: f64,
    pub k1: f64,
    pub b: f64,
}

pub fn tokenizer_hash() -> u64 {
    let digest = Sha256::digest(NORMALIZATION_SPEC.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

impl Bm25Index {
    pub fn build<S: AsRef<str>>(corpus: &[S]) -> Result<Self, RetrievalError> {
        Self::build_with(corpus, DEFAULT_K1, DEFAULT_B)
    }

    pub fn build_with<S: AsRef<str>>(corpus: &[S], k1: f64, b: f64) -> Result<Self, RetrievalError> {
        if corpus.is_empty() {
            return Err(RetrievalError::EmptyCorpus);
        }
        let mut postings: HashMap<String, Vec<(u32, u32)>> = HashMap::new();
        let mut doc_lengths = Vec::with_capacity(corpus.len());
        for (id, doc) in corpus.iter().enumerate() {
            let tokens = normalized_tokens(doc.as_ref());
            doc_lengths.push(tokens.len() as u32);
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in tokens {
                *tf.entry(t).or_insert(0) += 1;
            }
            for (t, n) in tf {
                postings.entry(t).or_default().push((id as u32, n));
            }
        }
        let total: u64 = doc_lengths.iter().map(|&l| u64::from(l)).sum();
        Ok(Self {
            postings,
            avg_doc_length: total as f64 / doc_lengths.len() as f64,
            doc_lengths,
            k1,
            b,
        })
    }

    pub fn len(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_lengths.is_empty()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_length(&self, id: usize) -> u32 {
        self.doc_lengths[id]
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.len() as f64;
        let df = self.document_frequency(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// Top `k` documents by BM25 score, descending, ties by ascending id.
    /// Documents sharing no term with the query are never returned.
    pub fn query(&self, text: &str, k: usize) -> Result<Vec<(usize, f64)>, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::ZeroK);
        }
        let mut scores: HashMap<u32, f64> = HashMap::new();
        for term in unique_terms(text) {
            let Some(list) = self.postings.get(&term) else { continue };
            let idf = self.idf(&term);
            for &(doc, tf) in list {
                let tf = f64::from(tf);
                let len = f64::from(self.doc_lengths[doc as usize]);
                let norm = self.k1 * (1.0 - self.b + self.b * len / self.avg_doc_length);
                *scores.entry(doc).or_insert(0.0) += idf * tf * (self.k1 + 1.0) / (tf + norm);
            }
        }
        let mut ranked: Vec<(usize, f64)> = scores
            .into_iter()
            .filter(|(_, s)| *s > 0.0)
            .map(|(d, s)| (d as usize, s))
            .collect();
        ranked.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        Ok(ranked)
    }

    /// Layout (little-endian): magic, version u32, N u64, k1 f64, b f64,
    /// tokenizer hash u64, term count u64, then per term in byte order:
    /// term (u32 length + UTF-8), posting count u32, `(doc u32, tf u32)`
    /// pairs; finally N doc lengths as u32.
    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.len() as u64).to_le_bytes());
        buf.extend_from_slice(&self.k1.to_le_bytes());
        buf.extend_from_slice(&self.b.to_le_bytes());
        buf.extend_from_slice(&tokenizer_hash().to_le_bytes());
        let mut terms: Vec<&String> = self.postings.keys().collect();
        terms.sort_unstable();
        buf.extend_from_slice(&(terms.len() as u64).to_le_bytes());
        for t in terms {
            let list = &self.postings[t];
            buf.extend_from_slice(&(t.len() as u32).to_le_bytes());
            buf.extend_from_slice(t.as_bytes());
            buf.extend_from_slice(&(list.len() as u32).to_le_bytes());
            for &(d, tf) in list {
                buf.extend_from_slice(&d.to_le_bytes());
                buf.extend_from_slice(&tf.to_le_bytes());
            }
        }
        for &l in &self.doc_lengths {
            buf.extend_from_slice(&l.to_le_bytes());
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
        let truncated = || bad("truncated index");
        let mut r = Cursor { bytes: &bytes, at: 0 };
        if r.take(8).ok_or_else(truncated)? != MAGIC {
            return Err(bad("not a BM25 index"));
        }
        let version = r.u32().ok_or_else(truncated)?;
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported index version {version}")));
        }
        let n = r.u64().ok_or_else(truncated)? as usize;
        let k1 = f64::from_bits(r.u64().ok_or_else(truncated)?);
        let b = f64::from_bits(r.u64().ok_or_else(truncated)?);
        if r.u64().ok_or_else(truncated)? != tokenizer_hash() {
            return Err(bad("index was built with a different tokenizer"));
        }
        let n_terms = r.u64().ok_or_else(truncated)?;
        let mut postings = HashMap::new();
        for _ in 0..n_terms {
            let len = r.u32().ok_or_else(truncated)? as usize;
            let term = String::from_utf8(r.take(len).ok_or_else(truncated)?.to_vec()).map_err(|_| bad("term is not UTF-8"))?;
            let count = r.u32().ok_or_else(truncated)?;
            let mut list = Vec::with_capacity(count as usize);
            for _ in 0..count {
                let d = r.u32().ok_or_else(truncated)?;
                let tf = r.u32().ok_or_else(truncated)?;
                if d as usize >= n {
                    return Err(bad("posting references a missing document"));
                }
                list.push((d, tf));
            }
            postings.insert(term, list);
        }
        let mut doc_lengths = Vec::with_capacity(n);
        for _ in 0..n {
            doc_lengths.push(r.u32().ok_or_else(truncated)?);
        }
        if r.at != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        if n == 0 {
            return Err(bad("index has no documents"));
        }
        let total: u64 = doc_lengths.iter().map(|&l| u64::from(l)).sum();
        Ok(Self {
            postings,
            avg_doc_length: total as f64 / n as f64,
            doc_lengths,
            k1,
            b,
        })
    }
}

/// Query terms without repeats, in order of first occurrence.
pub fn unique_terms(text: &str) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    normalized_tokens(text)
        .into_iter()
        .filter(|t| seen.insert(t.clone()))
        .collect()
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
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
}

/// Which side of the pool the index is keyed on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeySide {
    Hrl,
    Lrl,
}

/// A parallel pool with a BM25 index over one of its sides.
pub struct ExamplePool {
    entries: Vec<PoolEntry>,
    side: KeySide,
    index: Bm25Index,
}

impl ExamplePool {
    pub fn new(entries: Vec<PoolEntry>, side: KeySide) -> Result<Self, RetrievalError> {
        let keys: Vec<&str> = entries
            .iter()
            .map(|e| match side {
                KeySide::Hrl => e.hrl_text(),
                KeySide::Lrl => e.lrl_text(),
            })
            .collect();
        let index = Bm25Index::build(&keys)?;
        Ok(Self { entries, side, index })
    }

    pub fn side(&self) -> KeySide {
        self.side
    }

    pub fn index(&self) -> &Bm25Index {
        &self.index
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    /// Up to `k` entries most similar to `query`, best first.
    pub fn select(&self, query: &str, k: usize) -> Result<Vec<&PoolEntry>, RetrievalError> {
        Ok(self
            .index
            .query(query, k)?
            .into_iter()
            .map(|(d, _)| &self.entries[d])
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_document() {
        let idx = Bm25Index::build(&["a b c"]).unwrap();
        assert_eq!(idx.len(), 1);
        assert_eq!(idx.avg_doc_length(), 3.0);
    }

    #[test]
    fn empty_corpus_and_zero_k() {
        assert!(matches!(Bm25Index::build::<&str>(&[]), Err(RetrievalError::EmptyCorpus)));
        let idx = Bm25Index::build(&["a"]).unwrap();
        assert!(matches!(idx.query("a", 0), Err(RetrievalError::ZeroK)));
    }

    #[test]
    fn no_shared_terms_gives_nothing() {
        let idx = Bm25Index::build(&["a b", "c d"]).unwrap();
        assert!(idx.query("zzz", 5).unwrap().is_empty());
        assert!(idx.query("...", 5).unwrap().is_empty());
    }

    #[test]
    fn b_zero_ignores_length() {
        let idx = Bm25Index::build_with(&["x y", "x y z z z z"], 1.5, 0.0).unwrap();
        let r = idx.query("x", 2).unwrap();
        assert_eq!(r[0].1, r[1].1);
        assert_eq!((r[0].0, r[1].0), (0, 1));
    }

    #[test]
    fn exact_document_ranks_first() {
        let corpus = ["the river is wide", "markets open at dawn", "the market by the river"];
        let idx = Bm25Index::build(&corpus).unwrap();
        assert_eq!(idx.query("markets open at dawn", 3).unwrap()[0].0, 1);
    }

    #[test]
    fn persistence_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.bm25");
        let idx = Bm25Index::build(&["a b c", "b c d", "ç é"]).unwrap();
        idx.save(&path).unwrap();
        let back = Bm25Index::load(&path).unwrap();
        assert_eq!(back, idx);
        assert_eq!(back.query("b d", 3).unwrap(), idx.query("b d", 3).unwrap());
    }

    proptest! {
        #[test]
        fn results_are_sorted_and_complete(
            docs in prop::collection::vec(prop::collection::vec("[a-f]", 1..8), 1..30),
            q in prop::collection::vec("[a-h]", 1..6),
        ) {
            let corpus: Vec<String> = docs.iter().map(|d| d.join(" ")).collect();
            let idx = Bm25Index::build(&corpus).unwrap();
            let res = idx.query(&q.join(" "), corpus.len() + 3).unwrap();
            for w in res.windows(2) {
                prop_assert!(w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0));
            }
            let expected = corpus
                .iter()
                .filter(|d| d.split(' ').any(|t| q.contains(&t.to_string())))
                .count();
            prop_assert_eq!(res.len(), expected);
        }
    }
}
