//! Corpus ingestion: tokenization, sentence splitting, and streaming readers
//! for Pile-style JSONL and blank-line separated plain text.
//!
//! Readers are single-pass and hold one record in memory at a time. Documents
//! get sequential ids in the order they are emitted, so the same file read
//! with the same [`IngestConfig`] always yields the same id assignment.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

use crate::error::{Error, Result};

/// A tokenized sentence.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<String>,
}

impl Sentence {
    pub fn new(tokens: Vec<String>) -> Self {
        Sentence { tokens }
    }

    /// Tokenizes `text` as a single sentence.
    pub fn from_text(text: &str, lowercase: bool) -> Self {
        Sentence {
            tokens: tokenize(text, lowercase),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for Sentence {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Sentence {
            tokens: iter.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: u64,
    pub domain: Option<String>,
    pub sentences: Vec<Sentence>,
    /// Size of the raw text in bytes.
    pub byte_size: u64,
}

impl Document {
    /// Splits and tokenizes raw text. Empty sentences are dropped.
    pub fn from_text(doc_id: u64, domain: Option<String>, text: &str, lowercase: bool) -> Self {
        let sentences = split_sentences(text)
            .into_iter()
            .map(|s| Sentence::from_text(s, lowercase))
            .filter(|s| !s.is_empty())
            .collect();
        Document {
            doc_id,
            domain,
            sentences,
            byte_size: text.len() as u64,
        }
    }

    pub fn token_count(&self) -> u64 {
        self.sentences.iter().map(|s| s.len() as u64).sum()
    }

    pub fn summary(&self) -> DocSummary {
        DocSummary {
            doc_id: self.doc_id,
            domain: self.domain.clone(),
            sentence_count: self.sentences.len(),
            token_count: self.token_count(),
            byte_size: self.byte_size,
        }
    }
}

/// Size and provenance of a document without its tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DocSummary {
    pub doc_id: u64,
    pub domain: Option<String>,
    pub sentence_count: usize,
    pub token_count: u64,
    pub byte_size: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IngestConfig {
    pub excluded_domains: BTreeSet<String>,
    pub lowercase: bool,
    pub min_doc_sentences: usize,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            excluded_domains: BTreeSet::new(),
            lowercase: true,
            min_doc_sentences: 1,
        }
    }
}

impl IngestConfig {
    pub fn exclude(mut self, domain: impl Into<String>) -> Self {
        self.excluded_domains.insert(domain.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_doc_sentences == 0 {
            return Err(Error::InvalidConfig("min_doc_sentences must be at least 1".into()));
        }
        Ok(())
    }
}

fn is_punctuation(c: char) -> bool {
    c.general_category_group() == GeneralCategoryGroup::Punctuation
}

/// Splits on Unicode whitespace, strips leading and trailing punctuation from
/// each token and drops tokens that end up empty.
pub fn tokenize(text: &str, lowercase: bool) -> Vec<String> {
    text.split_whitespace()
        .map(|raw| raw.trim_matches(is_punctuation))
        .filter(|t| !t.is_empty())
        .map(|t| if lowercase { t.to_lowercase() } else { t.to_owned() })
        .collect()
}

/// Rule-based sentence splitter: breaks at newlines and after `.`, `!` or `?`
/// when the next character is whitespace. Segments are trimmed and empty
/// segments dropped; splits only ever happen at whitespace.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut prev = None;
    for (i, c) in text.char_indices() {
        let boundary = c == '\n' || (c.is_whitespace() && matches!(prev, Some('.' | '!' | '?')));
        if boundary {
            push_segment(&mut out, &text[start..i]);
            start = i + c.len_utf8();
        }
        prev = Some(c);
    }
    push_segment(&mut out, &text[start..]);
    out
}

fn push_segment<'a>(out: &mut Vec<&'a str>, segment: &'a str) {
    let segment = segment.trim();
    if !segment.is_empty() {
        out.push(segment);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    /// One JSON object per line with a `text` field and optional
    /// `meta.pile_set_name` domain tag.
    Jsonl,
    /// One document per blank-line separated block, untagged.
    Text,
}

impl CorpusFormat {
    /// `.jsonl`/`.json` files are read as JSONL, anything else as plain text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "json") => CorpusFormat::Jsonl,
            _ => CorpusFormat::Text,
        }
    }
}

#[derive(Deserialize)]
struct PileRecord {
    text: String,
    #[serde(default)]
    meta: Option<PileMeta>,
}

#[derive(Deserialize)]
struct PileMeta {
    #[serde(default)]
    pile_set_name: Option<String>,
}

/// Counters for one pass over a corpus file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub records: u64,
    pub emitted: u64,
    pub excluded: u64,
    pub too_short: u64,
    pub malformed: u64,
}

const MAX_KEPT_RECORD_ERRORS: usize = 64;

/// Streaming document reader.
///
/// Malformed records are logged, counted in [`IngestStats::malformed`] and
/// skipped; the iterator only yields `Err` for unrecoverable read failures,
/// after which it is exhausted.
pub struct CorpusReader<R> {
    input: R,
    source: PathBuf,
    format: CorpusFormat,
    config: IngestConfig,
    line_no: usize,
    next_id: u64,
    stats: IngestStats,
    record_errors: Vec<(usize, String)>,
    buf: Vec<u8>,
    done: bool,
}

/// Opens `path` for streaming, guessing the format from its extension.
pub fn load_corpus(path: impl AsRef<Path>, config: &IngestConfig) -> Result<CorpusReader<BufReader<File>>> {
    let path = path.as_ref();
    let format = CorpusFormat::from_path(path);
    load_corpus_as(path, format, config)
}

pub fn load_corpus_as(
    path: impl AsRef<Path>,
    format: CorpusFormat,
    config: &IngestConfig,
) -> Result<CorpusReader<BufReader<File>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    CorpusReader::new(BufReader::new(file), format, config.clone(), path)
}

impl<R: BufRead> CorpusReader<R> {
    pub fn new(input: R, format: CorpusFormat, config: IngestConfig, source: impl Into<PathBuf>) -> Result<Self> {
        config.validate()?;
        Ok(CorpusReader {
            input,
            source: source.into(),
            format,
            config,
            line_no: 0,
            next_id: 0,
            stats: IngestStats::default(),
            record_errors: Vec::new(),
            buf: Vec::new(),
            done: false,
        })
    }

    pub fn stats(&self) -> &IngestStats {
        &self.stats
    }

    /// The first few malformed records as `(line, message)`.
    pub fn record_errors(&self) -> &[(usize, String)] {
        &self.record_errors
    }

    fn read_line(&mut self) -> Result<Option<()>> {
        self.buf.clear();
        let n = self
            .input
            .read_until(b'\n', &mut self.buf)
            .map_err(|e| Error::io(&self.source, e))?;
        if n == 0 {
            return Ok(None);
        }
        self.line_no += 1;
        while matches!(self.buf.last(), Some(b'\n' | b'\r')) {
            self.buf.pop();
        }
        Ok(Some(()))
    }

    fn malformed(&mut self, line: usize, message: String) {
        log::warn!("{}:{line}: skipping malformed record: {message}", self.source.display());
        self.stats.malformed += 1;
        if self.record_errors.len() < MAX_KEPT_RECORD_ERRORS {
            self.record_errors.push((line, message));
        }
    }

    /// Next raw `(domain, text)` record, or `None` at end of input.
    fn next_record(&mut self) -> Result<Option<(Option<String>, String)>> {
        match self.format {
            CorpusFormat::Jsonl => loop {
                if self.read_line()?.is_none() {
                    return Ok(None);
                }
                if self.buf.iter().all(u8::is_ascii_whitespace) {
                    continue;
                }
                self.stats.records += 1;
                match serde_json::from_slice::<PileRecord>(&self.buf) {
                    Ok(rec) => {
                        let domain = rec.meta.and_then(|m| m.pile_set_name);
                        return Ok(Some((domain, rec.text)));
                    }
                    Err(e) => self.malformed(self.line_no, e.to_string()),
                }
            },
            CorpusFormat::Text => {
                let mut block = String::new();
                let mut block_start = 0;
                let mut bad_utf8 = false;
                loop {
                    if self.read_line()?.is_none() {
                        break;
                    }
                    let blank = self.buf.iter().all(u8::is_ascii_whitespace);
                    if blank {
                        if block.is_empty() && !bad_utf8 {
                            continue;
                        }
                        break;
                    }
                    if block.is_empty() && !bad_utf8 {
                        block_start = self.line_no;
                    }
                    match std::str::from_utf8(&self.buf) {
                        Ok(line) => {
                            if !block.is_empty() {
                                block.push('\n');
                            }
                            block.push_str(line);
                        }
                        Err(_) => bad_utf8 = true,
                    }
                }
                if block.is_empty() && !bad_utf8 {
                    return Ok(None);
                }
                self.stats.records += 1;
                if bad_utf8 {
                    self.malformed(block_start, "invalid UTF-8".into());
                    return self.next_record();
                }
                Ok(Some((None, block)))
            }
        }
    }
}

impl<R: BufRead> Iterator for CorpusReader<R> {
    type Item = Result<Document>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            let (domain, text) = match self.next_record() {
                Ok(Some(rec)) => rec,
                Ok(None) => {
                    self.done = true;
                    return None;
                }
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            };
            if let Some(d) = &domain {
                if self.config.excluded_domains.contains(d) {
                    self.stats.excluded += 1;
                    continue;
                }
            }
            let doc = Document::from_text(self.next_id, domain, &text, self.config.lowercase);
            if doc.sentences.len() < self.config.min_doc_sentences {
                self.stats.too_short += 1;
                continue;
            }
            self.next_id += 1;
            self.stats.emitted += 1;
            return Some(Ok(doc));
        }
    }
}
