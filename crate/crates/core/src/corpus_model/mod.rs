//! Persistent record types, their JSONL forms and run manifests.

mod ids;
pub mod jsonl;
mod lang;
mod manifest;
mod records;

use std::path::{Path, PathBuf};

pub use ids::{derive_seed, fingerprint, stable_id};
pub use jsonl::{read_json, read_jsonl, read_jsonl_lenient, write_json, write_jsonl, JsonlAppender};
pub use lang::{Direction, LangCode};
pub use manifest::{
    load_manifest, validate_against_data, validate_manifest, RunLayout, RunManifest, StageCounts,
    Timestamps, Violation,
};
pub use records::{
    Bitext, BtMode, EvalSegment, EvalSegmentSet, GeneratedParagraph, ParallelPair, PoolEntry,
    SeedParagraph, SeedPools, SentenceRecord, SentenceStatus, Topic,
};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
