use std::borrow::Borrow;
use std::collections::HashSet;

use crate::corpus::{DocSummary, Document, Sentence};
use crate::error::{Error, Result};
use crate::rep::RepModel;

/// A sentence reduced to what scoring needs: its length and the
/// representative words it contains as `(index, count)` pairs, sorted by
/// index (which is lexicographic word order).
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct CompiledSentence {
    pub len: u64,
    pub terms: Vec<(u32, u32)>,
}

impl CompiledSentence {
    pub fn new(rep: &RepModel, sentence: &Sentence) -> Self {
        let mut ids: Vec<u32> = sentence.tokens.iter().filter_map(|t| rep.index_of(t)).collect();
        ids.sort_unstable();
        let mut terms: Vec<(u32, u32)> = Vec::new();
        for id in ids {
            match terms.last_mut() {
                Some((last, c)) if *last == id => *c += 1,
                _ => terms.push((id, 1)),
            }
        }
        CompiledSentence {
            len: sentence.len() as u64,
            terms,
        }
    }
}

/// A document prepared for repeated scoring against one [`RepModel`].
#[derive(Clone, Debug)]
pub struct CompiledDoc {
    pub summary: DocSummary,
    sent_lens: Vec<u32>,
    term_ends: Vec<u32>,
    terms: Vec<(u32, u32)>,
}

impl CompiledDoc {
    pub fn new(rep: &RepModel, doc: &Document) -> Self {
        let mut sent_lens = Vec::with_capacity(doc.sentences.len());
        let mut term_ends = Vec::with_capacity(doc.sentences.len());
        let mut terms = Vec::new();
        for s in &doc.sentences {
            let c = CompiledSentence::new(rep, s);
            sent_lens.push(c.len as u32);
            terms.extend_from_slice(&c.terms);
            term_ends.push(terms.len() as u32);
        }
        terms.shrink_to_fit();
        CompiledDoc {
            summary: doc.summary(),
            sent_lens,
            term_ends,
            terms,
        }
    }

    pub fn doc_id(&self) -> u64 {
        self.summary.doc_id
    }

    pub fn sentence_count(&self) -> usize {
        self.sent_lens.len()
    }

    /// `(length, terms)` per sentence, in document order.
    pub(crate) fn sentences(&self) -> impl Iterator<Item = (u64, &[(u32, u32)])> + '_ {
        let mut start = 0usize;
        self.sent_lens.iter().zip(&self.term_ends).map(move |(&len, &end)| {
            let terms = &self.terms[start..end as usize];
            start = end as usize;
            (len as u64, terms)
        })
    }

    pub(crate) fn all_terms(&self) -> &[(u32, u32)] {
        &self.terms
    }

    pub(crate) fn sentence_lens(&self) -> &[u32] {
        &self.sent_lens
    }
}

/// Documents compiled against a representative model, ready for selection.
///
/// Only representative-word counts and sentence lengths are kept, so memory
/// is far below that of the tokenized corpus.
#[derive(Clone, Debug, Default)]
pub struct CompiledCorpus {
    docs: Vec<CompiledDoc>,
    ids: HashSet<u64>,
    vocab_size: usize,
}

impl CompiledCorpus {
    pub fn new(rep: &RepModel) -> Self {
        CompiledCorpus {
            docs: Vec::new(),
            ids: HashSet::new(),
            vocab_size: rep.vocab_size(),
        }
    }

    pub fn compile<I>(rep: &RepModel, docs: I) -> Result<Self>
    where
        I: IntoIterator,
        I::Item: Borrow<Document>,
    {
        let mut corpus = CompiledCorpus::new(rep);
        for d in docs {
            corpus.push(rep, d.borrow())?;
        }
        Ok(corpus)
    }

    pub fn push(&mut self, rep: &RepModel, doc: &Document) -> Result<()> {
        debug_assert_eq!(rep.vocab_size(), self.vocab_size);
        if doc.sentences.is_empty() {
            return Err(Error::EmptyDocument { doc_id: doc.doc_id });
        }
        if !self.ids.insert(doc.doc_id) {
            return Err(Error::DuplicateDocId { doc_id: doc.doc_id });
        }
        self.docs.push(CompiledDoc::new(rep, doc));
        Ok(())
    }

    pub fn docs(&self) -> &[CompiledDoc] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn summaries(&self) -> impl Iterator<Item = &DocSummary> {
        self.docs.iter().map(|d| &d.summary)
    }

    /// A corpus holding a contiguous slice of this one.
    pub fn slice(&self, range: std::ops::Range<usize>) -> CompiledCorpus {
        let docs = self.docs[range].to_vec();
        let ids = docs.iter().map(|d| d.doc_id()).collect();
        CompiledCorpus {
            docs,
            ids,
            vocab_size: self.vocab_size,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn terms_are_sorted_and_merged() {
        let rep = RepModel::from_counts(&[("b", 1), ("a", 1), ("c", 1)].into_iter().collect(), 1).unwrap();
        let s: Sentence = ["c", "x", "a", "c", "b", "a", "c"].into_iter().collect();
        let c = CompiledSentence::new(&rep, &s);
        assert_eq!(c.len, 7);
        assert_eq!(c.terms, [(0, 2), (1, 1), (2, 3)]);
    }

    #[test]
    fn duplicate_and_empty_documents_rejected() {
        let rep = RepModel::from_counts(&[("a", 1)].into_iter().collect(), 1).unwrap();
        let d = Document::from_text(3, None, "a b", true);
        let err = CompiledCorpus::compile(&rep, [&d, &d]).unwrap_err();
        assert!(matches!(err, Error::DuplicateDocId { doc_id: 3 }));
        let empty = Document { sentences: vec![], ..d };
        assert!(CompiledCorpus::compile(&rep, [&empty]).is_err());
    }
}
