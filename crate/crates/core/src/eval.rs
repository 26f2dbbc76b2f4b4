//! Selection reports: unigram proxy perplexity on target text, domain mix
//! and size statistics.

use std::borrow::Borrow;
use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::manifest::SelectionManifest;
use crate::rep::VocabCounts;

pub const PPL_LABEL: &str = "unigram proxy perplexity";
pub const UNTAGGED: &str = "untagged";

/// Perplexity of `target` under an add-one smoothed unigram model of
/// `selected`. The model's vocabulary is the selected vocabulary plus one
/// UNK bucket that absorbs every unseen target token.
pub fn unigram_ppl<I>(selected: &VocabCounts, target: I) -> Result<f64>
where
    I: IntoIterator,
    I::Item: Borrow<Document>,
{
    if selected.total() == 0 {
        return Err(Error::InvalidConfig("selected counts are empty".into()));
    }
    let denom = (selected.total() + selected.len() as u64 + 1) as f64;
    let log_denom = denom.ln();
    let mut nll = 0.0;
    let mut tokens = 0u64;
    for doc in target {
        for s in &doc.borrow().sentences {
            for t in &s.tokens {
                let c = selected.get(t) as f64;
                nll += log_denom - (c + 1.0).ln();
                tokens += 1;
            }
        }
    }
    if tokens == 0 {
        return Err(Error::EmptyTarget);
    }
    Ok((nll / tokens as f64).exp())
}

/// Fraction of selected documents per domain; untagged documents are
/// grouped under [`UNTAGGED`].
pub fn domain_distribution(manifest: &SelectionManifest) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for e in &manifest.entries {
        *counts
            .entry(e.domain.clone().unwrap_or_else(|| UNTAGGED.into()))
            .or_default() += 1;
    }
    let n = manifest.len() as f64;
    counts.into_iter().map(|(d, c)| (d, c as f64 / n)).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SizeStats {
    pub total_bytes: u64,
    pub mean_doc_tokens: f64,
    pub doc_count: u64,
    pub token_count: u64,
}

/// Walks the corpus once, collecting the documents named by `manifest`.
fn collect_selected<I, F>(manifest: &SelectionManifest, corpus: I, mut visit: F) -> Result<()>
where
    I: IntoIterator,
    I::Item: Borrow<Document>,
    F: FnMut(&Document),
{
    let mut wanted: HashMap<u64, bool> = manifest.entries.iter().map(|e| (e.doc_id, false)).collect();
    for doc in corpus {
        let doc = doc.borrow();
        if let Some(seen) = wanted.get_mut(&doc.doc_id) {
            if !*seen {
                *seen = true;
                visit(doc);
            }
        }
    }
    if let Some(doc_id) = manifest.entries.iter().map(|e| e.doc_id).find(|id| !wanted[id]) {
        return Err(Error::DanglingDocId { doc_id });
    }
    Ok(())
}

/// Sizes of the selected documents, measured from the corpus itself.
pub fn size_stats<I>(manifest: &SelectionManifest, corpus: I) -> Result<SizeStats>
where
    I: IntoIterator,
    I::Item: Borrow<Document>,
{
    let mut stats = SizeStats::default();
    collect_selected(manifest, corpus, |doc| {
        stats.total_bytes += doc.byte_size;
        stats.token_count += doc.token_count();
        stats.doc_count += 1;
    })?;
    if stats.doc_count > 0 {
        stats.mean_doc_tokens = stats.token_count as f64 / stats.doc_count as f64;
    }
    Ok(stats)
}

/// Token counts of every selected document.
pub fn selected_counts<I>(manifest: &SelectionManifest, corpus: I) -> Result<VocabCounts>
where
    I: IntoIterator,
    I::Item: Borrow<Document>,
{
    let mut counts = VocabCounts::new();
    collect_selected(manifest, corpus, |doc| counts.add_document(doc))?;
    Ok(counts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ppl_label: String,
    pub target_ppl: f64,
    pub domain_fractions: BTreeMap<String, f64>,
    pub total_bytes: u64,
    pub mean_doc_tokens: f64,
    pub doc_count: u64,
    pub token_count: u64,
}

/// Full report for one manifest: one pass over the corpus, one over the
/// target.
pub fn evaluate<C, T>(manifest: &SelectionManifest, corpus: C, target: T) -> Result<EvalReport>
where
    C: IntoIterator,
    C::Item: Borrow<Document>,
    T: IntoIterator,
    T::Item: Borrow<Document>,
{
    if manifest.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let mut counts = VocabCounts::new();
    let mut stats = SizeStats::default();
    collect_selected(manifest, corpus, |doc| {
        counts.add_document(doc);
        stats.total_bytes += doc.byte_size;
        stats.token_count += doc.token_count();
        stats.doc_count += 1;
    })?;
    stats.mean_doc_tokens = stats.token_count as f64 / stats.doc_count as f64;
    let target_ppl = unigram_ppl(&counts, target)?;
    Ok(EvalReport {
        ppl_label: PPL_LABEL.into(),
        target_ppl,
        domain_fractions: domain_distribution(manifest),
        total_bytes: stats.total_bytes,
        mean_doc_tokens: stats.mean_doc_tokens,
        doc_count: stats.doc_count,
        token_count: stats.token_count,
    })
}

impl EvalReport {
    /// `domain<TAB>fraction` lines, sorted by domain.
    pub fn write_domain_tsv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "domain\tfraction")?;
        for (d, f) in &self.domain_fractions {
            writeln!(out, "{d}\t{f}")?;
        }
        out.flush()
    }
}
