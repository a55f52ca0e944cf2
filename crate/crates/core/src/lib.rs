//! Parallel-corpus construction and evaluation toolkit.
//!
//! The crate is organised around the stages of building an English-Vietnamese
//! training corpus from heterogeneous sources:
//!
//! - [`corpus`]: data model, JSONL/TSV/line-pair ingestion and export, stats, test-set sampling
//! - [`bleu`]: sentence and corpus BLEU
//! - [`translate`]: translation backends plus the shared translation cache
//! - [`align`]: dynamic-programming alignment of weakly-aligned document pairs
//! - [`filter`]: quality scoring, top-K selection and K tuning
//! - [`dedup`]: normalized exact deduplication within and across corpora
//! - [`report`]: multi-domain BLEU matrices, data-budget ratios, per-tier time accounting
//! - [`pipeline`]: config-driven stage runner shared by the CLI

pub mod align;
pub mod bleu;
pub mod corpus;
pub mod dedup;
pub mod filter;
pub mod pipeline;
pub mod report;
pub mod translate;

pub use align::{align_batch, align_documents, AlignConfig, AlignmentResult};
pub use bleu::{corpus_bleu, sentence_bleu, BleuBreakdown, BleuConfig, Smoothing, TokenizerKind};
pub use corpus::{Corpus, Document, DocumentPair, DomainTag, Format, Lang, Sentence, SentencePair};
pub use translate::{Direction, TranslationCache, Translator, TranslatorGateway};
