//! Unigram model of the representative corpus and cross-entropy against it.

use std::borrow::Borrow;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::{Document, Sentence};
use crate::error::{Error, Result};

/// Key under which [`crate::SelectionState::to_vocab_counts`] reports tokens
/// outside the representative vocabulary. No token produced by
/// [`crate::tokenize`] can start with punctuation, so it never collides.
pub const OOV_BUCKET: &str = "[oov]";

/// Word counts with their total. Words with zero count are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VocabCounts {
    counts: HashMap<String, u64>,
    total: u64,
}

impl VocabCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, word: &str, n: u64) {
        if n == 0 {
            return;
        }
        match self.counts.get_mut(word) {
            Some(c) => *c += n,
            None => {
                self.counts.insert(word.to_owned(), n);
            }
        }
        self.total += n;
    }

    pub fn add_sentence(&mut self, sentence: &Sentence) {
        for t in &sentence.tokens {
            self.add(t, 1);
        }
    }

    pub fn add_document(&mut self, doc: &Document) {
        for s in &doc.sentences {
            self.add_sentence(s);
        }
    }

    pub fn get(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of distinct words.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(w, &c)| (w.as_str(), c))
    }

    /// Entries in ascending lexicographic order.
    pub fn sorted(&self) -> Vec<(&str, u64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_unstable_by(|a, b| a.0.cmp(b.0));
        v
    }
}

impl<'a> FromIterator<(&'a str, u64)> for VocabCounts {
    fn from_iter<I: IntoIterator<Item = (&'a str, u64)>>(iter: I) -> Self {
        let mut vc = VocabCounts::new();
        for (w, n) in iter {
            vc.add(w, n);
        }
        vc
    }
}

/// Relative unigram frequencies of the representative corpus.
///
/// Words are kept in ascending lexicographic order; a word's position is its
/// index everywhere else in the crate, so iterating by index is iterating in
/// sorted order.
#[derive(Clone, Debug, PartialEq)]
pub struct RepModel {
    words: Vec<String>,
    counts: Vec<u64>,
    probs: Vec<f64>,
    index: HashMap<String, u32>,
    total: u64,
}

impl RepModel {
    /// Builds a model from raw counts, dropping words seen fewer than
    /// `min_count` times and renormalizing over the survivors.
    pub fn from_counts(counts: &VocabCounts, min_count: u64) -> Result<Self> {
        let min_count = min_count.max(1);
        let kept: Vec<(&str, u64)> = counts.sorted().into_iter().filter(|&(_, c)| c >= min_count).collect();
        if kept.is_empty() {
            return Err(Error::RepTooSmall);
        }
        if kept.len() > u32::MAX as usize {
            return Err(Error::InvalidConfig(
                "representative vocabulary exceeds u32 range".into(),
            ));
        }
        let total: u64 = kept.iter().map(|&(_, c)| c).sum();
        let words: Vec<String> = kept.iter().map(|&(w, _)| w.to_owned()).collect();
        let counts: Vec<u64> = kept.iter().map(|&(_, c)| c).collect();
        let probs = counts.iter().map(|&c| c as f64 / total as f64).collect();
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        Ok(RepModel {
            words,
            counts,
            probs,
            index,
            total,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.words.len()
    }

    /// W_REP after pruning.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn index_of(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn prob(&self, word: &str) -> Option<f64> {
        self.index_of(word).map(|i| self.probs[i as usize])
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Unigram entropy of the model itself, in nats.
    pub fn entropy(&self) -> f64 {
        -self.probs.iter().map(|&p| p * p.ln()).sum::<f64>()
    }

    /// Writes the flat text form: a header line followed by one
    /// `word<TAB>count` line per word in sorted order.
    pub fn write_to(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(
            out,
            "#cynds-rep-model\tvocab={}\ttotal={}\ttool={}\tversion={}",
            self.words.len(),
            self.total,
            crate::manifest::TOOL_NAME,
            crate::manifest::TOOL_VERSION
        )?;
        for (w, c) in self.words.iter().zip(&self.counts) {
            writeln!(out, "{w}\t{c}")?;
        }
        out.flush()
    }

    pub fn read_from(input: impl BufRead) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let parse_err = |line: usize, message: &str| Error::Parse {
            line: line + 1,
            message: message.to_owned(),
        };
        let (_, header) = lines.next().ok_or_else(|| parse_err(0, "missing header"))?;
        let header = header.map_err(|e| parse_err(0, &e.to_string()))?;
        let mut fields = header.split('\t');
        if fields.next() != Some("#cynds-rep-model") {
            return Err(parse_err(0, "not a representative model file"));
        }
        let mut vocab = None;
        let mut total = None;
        for f in fields {
            match f.split_once('=') {
                Some(("vocab", v)) => vocab = v.parse::<usize>().ok(),
                Some(("total", v)) => total = v.parse::<u64>().ok(),
                _ => {}
            }
        }
        let (vocab, total) = vocab
            .zip(total)
            .ok_or_else(|| parse_err(0, "header lacks vocab/total"))?;

        let mut counts = VocabCounts::new();
        let mut prev: Option<String> = None;
        for (i, line) in lines {
            let line = line.map_err(|e| parse_err(i, &e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let (w, c) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(i, "expected word<TAB>count"))?;
            let c: u64 = c.parse().map_err(|_| parse_err(i, "bad count"))?;
            if c == 0 {
                return Err(parse_err(i, "zero count"));
            }
            if prev.as_deref().is_some_and(|p| p >= w) {
                return Err(parse_err(i, "words not in strictly ascending order"));
            }
            counts.add(w, c);
            prev = Some(w.to_owned());
        }
        if counts.len() != vocab || counts.total() != total {
            return Err(parse_err(0, "header does not match entries"));
        }
        RepModel::from_counts(&counts, 1)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file))
    }
}

/// Counts every token of the representative corpus and builds a [`RepModel`].
pub fn build_rep_model<I>(rep_corpus: I, min_count: u64) -> Result<RepModel>
where
    I: IntoIterator,
    I::Item: Borrow<Document>,
{
    let mut counts = VocabCounts::new();
    for doc in rep_corpus {
        counts.add_document(doc.borrow());
    }
    RepModel::from_counts(&counts, min_count)
}

/// Cross-entropy of `counts` against the representative distribution, in
/// nats: `-Σ_v p_REP(v) · ln(C(v) / W)` over the representative vocabulary.
pub fn cross_entropy(rep: &RepModel, counts: &VocabCounts) -> Result<f64> {
    let total = counts.total() as f64;
    let mut h = 0.0;
    for (word, &p) in rep.words().iter().zip(rep.probs()) {
        let c = counts.get(word);
        if c == 0 {
            return Err(Error::Unseeded { word: word.clone() });
        }
        h -= p * (c as f64 / total).ln();
    }
    Ok(h)
}
