//! Document-level cynical data selection.
//!
//! Given a small *representative* corpus from a target domain and a large
//! general corpus, greedily pick the general-corpus documents that most
//! reduce the cross-entropy of the selected text against the representative
//! unigram distribution.
//!
//! ```
//! use cynds::{build_rep_model, select_documents, Document, SelectionConfig};
//!
//! let rep = build_rep_model([Document::from_text(0, None, "the court ruled. the judge spoke.", true)], 1)?;
//! let corpus = vec![
//!     Document::from_text(0, None, "stock prices fell sharply", true),
//!     Document::from_text(1, None, "the judge ruled on the case", true),
//!     Document::from_text(2, None, "a recipe for bread", true),
//! ];
//! let manifest = select_documents(&corpus, &rep, &SelectionConfig::top_fraction(0.3))?;
//! assert_eq!(manifest.doc_ids(), [1]);
//! # Ok::<(), cynds::Error>(())
//! ```
//!
//! Module map:
//!
//! * [`corpus`]: tokenization, sentence splitting, streaming readers.
//! * [`rep`]: the representative unigram model and cross-entropy.
//! * [`select`]: selection state, sentence deltas, greedy selection.
//! * [`manifest`]: the JSONL selection record.
//! * [`shard`]: shard-parallel selection and merging.
//! * [`eval`]: proxy perplexity, domain mix and size reports.
//! * [`random`]: the random baseline.
//! * [`synthetic`]: seeded two-domain corpora.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod manifest;
pub mod random;
pub mod rep;
pub mod select;
pub mod shard;
pub mod synthetic;

pub use corpus::{
    load_corpus, split_sentences, tokenize, CorpusFormat, CorpusReader, DocSummary, Document, IngestConfig, Sentence,
};
pub use error::{Error, Result};
pub use eval::{domain_distribution, evaluate, size_stats, unigram_ppl, EvalReport, SizeStats};
pub use manifest::{ManifestEntry, ManifestHeader, ManifestKind, SelectionManifest};
pub use random::random_select;
pub use rep::{build_rep_model, cross_entropy, RepModel, VocabCounts};
pub use select::{
    seed_state, select_compiled, select_documents, select_sentences, Budget, CompiledCorpus, DocumentScore, Mode,
    SelectionConfig, SelectionState, SentenceDelta,
};
pub use shard::{plan_shards, run_sharded, ShardPlan};
