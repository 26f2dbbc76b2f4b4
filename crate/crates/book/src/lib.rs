//! The guide's chapters as doc-tests, so every snippet in `book/` is compiled
//! and run by `cargo test`.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}

#[doc = include_str!("../../../book/src/ingestion.md")]
pub mod ingestion {}

#[doc = include_str!("../../../book/src/representative.md")]
pub mod representative {}

#[doc = include_str!("../../../book/src/scoring.md")]
pub mod scoring {}

#[doc = include_str!("../../../book/src/documents.md")]
pub mod documents {}

#[doc = include_str!("../../../book/src/lazy.md")]
pub mod lazy {}

#[doc = include_str!("../../../book/src/sharding.md")]
pub mod sharding {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
