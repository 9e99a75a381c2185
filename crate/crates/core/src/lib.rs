//! Synthetic parallel corpora for low-resource languages.
//!
//! A generator writes paragraphs in the target language, the paragraphs
//! are split and filtered into sentences, and the sentences are
//! back-translated into a high-resource language. [`pipeline::Pipeline`]
//! runs those stages over a run directory; each module also works on its
//! own:
//!
//! - [`corpus_model`]: records, language codes, ids, seeds, the manifest.
//! - [`gateway`]: generation and translation backends, including an
//!   offline mock.
//! - [`prompting`]: generation, translation and fine-tuning prompts.
//! - [`generation`]: paragraph generation with ROUGE-1 rejection.
//! - [`text_pipeline`]: sentence splitting, language identification,
//!   n-gram decontamination.
//! - [`retrieval`]: BM25 example selection.
//! - [`translate`]: back-translation and the self-improvement loop.
//! - [`metrics`]: BLEU, chrF++, paired bootstrap, Vendi score.
//!
//! The guide in `book/` walks through each stage; its code samples are
//! compiled as doctests of this crate.

pub mod config;
pub mod corpus_model;
pub mod demo;
pub mod gateway;
pub mod generation;
pub mod hooks;
pub mod metrics;
pub mod normalize;
pub mod pipeline;
pub mod prompting;
pub mod retrieval;
pub mod stats;
pub mod text_pipeline;
pub mod translate;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/quickstart.md")]
    mod quickstart {}
    #[doc = include_str!("../../../book/src/data-model.md")]
    mod data_model {}
    #[doc = include_str!("../../../book/src/backends.md")]
    mod backends {}
    #[doc = include_str!("../../../book/src/generation.md")]
    mod generation {}
    #[doc = include_str!("../../../book/src/text-pipeline.md")]
    mod text_pipeline {}
    #[doc = include_str!("../../../book/src/retrieval.md")]
    mod retrieval {}
    #[doc = include_str!("../../../book/src/backtranslation.md")]
    mod backtranslation {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/configuration.md")]
    mod configuration {}
}
