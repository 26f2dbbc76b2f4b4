//! Greedy cynical selection.
//!
//! Every candidate is scored against the current [`SelectionState`] by the
//! mean of its sentences' entropy deltas; the lowest score wins (ties go to
//! the lower document id), its sentences are folded into the state, and the
//! loop repeats until the budget is spent.
//!
//! Two strategies produce the same manifest:
//!
//! * [`Mode::Exact`] rescores every remaining document at every step.
//! * [`Mode::Lazy`] keeps documents in a priority queue keyed by a lower
//!   bound on their score. Gains only grow (less negative) as counts grow and
//!   the penalty term is bounded below using the largest total the selection
//!   can reach, so a document whose bound already exceeds the best rescored
//!   candidate can be skipped without rescoring it.

mod compiled;
mod state;

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Sentence};
use crate::error::{Error, Result};
use crate::manifest::{config_hash, ManifestEntry, ManifestHeader, ManifestKind, SelectionManifest, SEED_MASS_NOTE};
use crate::rep::RepModel;

pub use compiled::{CompiledCorpus, CompiledDoc};
pub use state::{seed_state, DocumentScore, SelectionState, SentenceDelta};

pub(crate) use state::ScoreAccumulator;

/// How much to select.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    /// Top fraction `k ∈ (0, 1]` of the documents, rounded up.
    TopFraction(f64),
    /// Keep selecting while fewer than this many tokens are selected.
    Tokens(u64),
}

impl Budget {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Budget::TopFraction(k) if !(k > 0.0 && k <= 1.0) => {
                Err(Error::InvalidConfig(format!("fraction {k} is outside (0, 1]")))
            }
            Budget::Tokens(0) => Err(Error::InvalidConfig("token budget must be positive".into())),
            _ => Ok(()),
        }
    }
}

/// `⌈k·n⌉`, tolerant of representation error in `k` (`0.1 · 200` is 20, not 21).
pub fn fraction_quota(k: f64, n: usize) -> usize {
    let exact = k * n as f64;
    let rounded = exact.round();
    let q = if (exact - rounded).abs() <= 1e-9 * exact.max(1.0) {
        rounded
    } else {
        exact.ceil()
    };
    (q.max(0.0) as usize).min(n)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Exact,
    Lazy,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Mode::Exact),
            "lazy" => Ok(Mode::Lazy),
            other => Err(Error::InvalidConfig(format!(
                "unknown mode {other:?}, expected exact|lazy"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub budget: Budget,
    pub mode: Mode,
}

impl SelectionConfig {
    pub fn top_fraction(k: f64) -> Self {
        SelectionConfig {
            budget: Budget::TopFraction(k),
            mode: Mode::Exact,
        }
    }

    pub fn tokens(tokens: u64) -> Self {
        SelectionConfig {
            budget: Budget::Tokens(tokens),
            mode: Mode::Exact,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }
}

/// Budget resolved against a concrete corpus.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Quota {
    Docs(usize),
    Tokens(u64),
}

impl Quota {
    pub(crate) fn resolve(budget: Budget, corpus: &CompiledCorpus) -> Quota {
        match budget {
            Budget::TopFraction(k) => Quota::Docs(fraction_quota(k, corpus.len())),
            Budget::Tokens(t) => Quota::Tokens(t),
        }
    }
}

/// One accepted document, as seen by a selection observer.
pub struct StepRecord<'a> {
    pub rank: usize,
    pub doc: &'a CompiledDoc,
    pub score: DocumentScore,
    pub cumulative_entropy: f64,
}

/// Greedy document selection over tokenized documents.
pub fn select_documents(corpus: &[Document], rep: &RepModel, config: &SelectionConfig) -> Result<SelectionManifest> {
    let compiled = CompiledCorpus::compile(rep, corpus)?;
    select_compiled(&compiled, rep, config)
}

pub fn select_compiled(corpus: &CompiledCorpus, rep: &RepModel, config: &SelectionConfig) -> Result<SelectionManifest> {
    select_compiled_with(corpus, rep, config, |_, _| {})
}

/// Like [`select_compiled`], calling `observer` after every accepted document
/// with the updated state.
pub fn select_compiled_with<F>(
    corpus: &CompiledCorpus,
    rep: &RepModel,
    config: &SelectionConfig,
    observer: F,
) -> Result<SelectionManifest>
where
    F: FnMut(&StepRecord<'_>, &SelectionState),
{
    config.budget.validate()?;
    let quota = Quota::resolve(config.budget, corpus);
    run_greedy(corpus, rep, config, quota, observer)
}

pub(crate) fn run_greedy<F>(
    corpus: &CompiledCorpus,
    rep: &RepModel,
    config: &SelectionConfig,
    quota: Quota,
    mut observer: F,
) -> Result<SelectionManifest>
where
    F: FnMut(&StepRecord<'_>, &SelectionState),
{
    if corpus.is_empty() {
        return Err(Error::InvalidConfig("cannot select from an empty corpus".into()));
    }
    let total_tokens: u64 = corpus.summaries().map(|s| s.token_count).sum();
    if let Quota::Tokens(t) = quota {
        if t > total_tokens {
            log::warn!("token budget {t} exceeds the corpus ({total_tokens} tokens); selecting everything");
        }
    }

    let mut state = seed_state(rep);
    let header = selection_header(corpus, rep, config, &state);
    let mut strategy = match config.mode {
        Mode::Exact => Strategy::Exact(ExactScan::new(corpus)),
        Mode::Lazy => Strategy::Lazy(LazyQueue::new(corpus, rep, &state, quota)),
    };

    let probs = rep.probs();
    let mut entries = Vec::new();
    loop {
        let done = match quota {
            Quota::Docs(q) => entries.len() >= q,
            Quota::Tokens(t) => state.selected_tokens() >= t,
        };
        if done {
            break;
        }
        let Some((score, idx)) = strategy.next_best(corpus, probs, &state) else {
            break;
        };
        let doc = &corpus.docs()[idx];
        for (len, terms) in doc.sentences() {
            state.accept_terms(probs, len, terms);
        }
        let summary = &doc.summary;
        let rank = entries.len();
        entries.push(ManifestEntry {
            rank,
            doc_id: summary.doc_id,
            domain: summary.domain.clone(),
            score: Some(score.score),
            penalty_sum: Some(score.penalty_sum),
            gain_sum: Some(score.gain_sum),
            sentence_count: summary.sentence_count,
            token_count: summary.token_count,
            byte_size: summary.byte_size,
            cumulative_entropy: Some(state.running_entropy()),
            shard: None,
            shard_rank: None,
        });
        let record = StepRecord {
            rank,
            doc,
            score,
            cumulative_entropy: state.running_entropy(),
        };
        observer(&record, &state);
    }
    Ok(SelectionManifest { header, entries })
}

fn selection_header(
    corpus: &CompiledCorpus,
    rep: &RepModel,
    config: &SelectionConfig,
    seeded: &SelectionState,
) -> ManifestHeader {
    let mut header = ManifestHeader::new(ManifestKind::Cynical, config.budget, corpus.len());
    header.mode = Some(config.mode);
    header.rep_vocab = Some(rep.vocab_size());
    header.rep_total = Some(rep.total());
    header.seed_mass = Some(seeded.seed_mass());
    header.seed_entropy = Some(seeded.running_entropy());
    let canonical = serde_json::json!({
        "budget": config.budget,
        "mode": config.mode,
        "rep_vocab": rep.vocab_size(),
        "rep_total": rep.total(),
        "corpus_docs": corpus.len(),
    });
    header.config_hash = config_hash(&canonical.to_string());
    header.notes.push(SEED_MASS_NOTE.into());
    header
}

pub(crate) fn score_compiled(state: &SelectionState, probs: &[f64], doc: &CompiledDoc) -> DocumentScore {
    let mut acc = ScoreAccumulator::default();
    for (len, terms) in doc.sentences() {
        acc.push(state.delta_terms(probs, len, terms));
    }
    acc.finish(doc.doc_id())
}

/// Strict "a ranks before b": lower score, then lower id.
#[inline]
fn ranks_before(a: &DocumentScore, b: &DocumentScore) -> bool {
    a.score < b.score || (a.score == b.score && a.doc_id < b.doc_id)
}

enum Strategy {
    Exact(ExactScan),
    Lazy(LazyQueue),
}

impl Strategy {
    fn next_best(
        &mut self,
        corpus: &CompiledCorpus,
        probs: &[f64],
        state: &SelectionState,
    ) -> Option<(DocumentScore, usize)> {
        match self {
            Strategy::Exact(s) => s.next_best(corpus, probs, state),
            Strategy::Lazy(q) => q.next_best(corpus, probs, state),
        }
    }
}

const PARALLEL_MIN_DOCS: usize = 512;

struct ExactScan {
    remaining: Vec<usize>,
}

impl ExactScan {
    fn new(corpus: &CompiledCorpus) -> Self {
        ExactScan {
            remaining: (0..corpus.len()).collect(),
        }
    }

    fn next_best(
        &mut self,
        corpus: &CompiledCorpus,
        probs: &[f64],
        state: &SelectionState,
    ) -> Option<(DocumentScore, usize)> {
        let docs = corpus.docs();
        let pick = |a: (DocumentScore, usize), b: (DocumentScore, usize)| if ranks_before(&b.0, &a.0) { b } else { a };
        let best = if self.remaining.len() >= PARALLEL_MIN_DOCS {
            self.remaining
                .par_iter()
                .enumerate()
                .map(|(pos, &idx)| (score_compiled(state, probs, &docs[idx]), pos))
                .reduce_with(pick)
        } else {
            self.remaining
                .iter()
                .enumerate()
                .map(|(pos, &idx)| (score_compiled(state, probs, &docs[idx]), pos))
                .reduce(pick)
        };
        best.map(|(score, pos)| (score, self.remaining.swap_remove(pos)))
    }
}

#[derive(Clone, Copy, Debug)]
struct Keyed {
    key: f64,
    doc_id: u64,
    idx: usize,
}

impl PartialEq for Keyed {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Keyed {}

impl PartialOrd for Keyed {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Keyed {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key).then(self.doc_id.cmp(&other.doc_id))
    }
}

/// Lower-bound priority queue.
///
/// The key of a document is `(G + P_min) / |D| - slack`, where `G` is its
/// gain sum at the time it was last scored and `P_min` its penalty sum at the
/// largest selected total the run can reach. Neither term can exceed the
/// document's true score at any later step.
struct LazyQueue {
    heap: BinaryHeap<Reverse<Keyed>>,
    penalty_floor: Vec<f64>,
    /// Gain sum from the last time each document was scored.
    stale_gain: Vec<f64>,
    /// Penalty floors hold while W_n stays at or below this.
    w_cap: u64,
    w_max: u64,
    evaluated: Vec<(usize, f64)>,
}

/// Growth allowed in W_n before the penalty floors are tightened again.
const CAP_GROWTH: f64 = 1.05;

impl LazyQueue {
    fn new(corpus: &CompiledCorpus, rep: &RepModel, seeded: &SelectionState, quota: Quota) -> Self {
        let docs = corpus.docs();
        let probs = rep.probs();
        let stale_gain: Vec<f64> = docs
            .par_iter()
            .map(|d| seeded.gain_terms(probs, d.all_terms()))
            .collect();
        let mut queue = LazyQueue {
            heap: BinaryHeap::with_capacity(docs.len()),
            penalty_floor: vec![0.0; docs.len()],
            stale_gain,
            w_cap: 0,
            w_max: max_selected_total(corpus, seeded.selected_total(), quota),
            evaluated: Vec::new(),
        };
        queue.rebuild(corpus, seeded.selected_total(), 0..docs.len());
        queue
    }

    /// Recomputes every key against a cap just above the current W_n.
    fn rebuild(&mut self, corpus: &CompiledCorpus, w_now: u64, remaining: impl Iterator<Item = usize>) {
        let grown = ((w_now as f64) * CAP_GROWTH).ceil() as u64;
        self.w_cap = grown.max(w_now + 1).min(self.w_max.max(w_now));
        let cap = self.w_cap as f64;
        let docs = corpus.docs();
        let remaining: Vec<usize> = remaining.collect();
        let floors: Vec<f64> = remaining
            .par_iter()
            .map(|&idx| {
                docs[idx]
                    .sentence_lens()
                    .iter()
                    .map(|&w| (w as f64 / cap).ln_1p())
                    .sum()
            })
            .collect();
        for (&idx, f) in remaining.iter().zip(floors) {
            self.penalty_floor[idx] = f;
        }
        let keys: Vec<Reverse<Keyed>> = remaining.iter().map(|&idx| Reverse(self.keyed(corpus, idx))).collect();
        self.heap = BinaryHeap::from(keys);
    }

    fn keyed(&self, corpus: &CompiledCorpus, idx: usize) -> Keyed {
        let doc = &corpus.docs()[idx];
        let gain_sum = self.stale_gain[idx];
        let n = doc.sentence_count() as f64;
        let floor = self.penalty_floor[idx];
        let bound = (gain_sum + floor) / n;
        let slack = 1e-9 * (gain_sum.abs() + floor) / n;
        Keyed {
            key: bound - slack,
            doc_id: doc.doc_id(),
            idx,
        }
    }

    fn next_best(
        &mut self,
        corpus: &CompiledCorpus,
        probs: &[f64],
        state: &SelectionState,
    ) -> Option<(DocumentScore, usize)> {
        let docs = corpus.docs();
        if state.selected_total() > self.w_cap {
            let remaining: Vec<usize> = self.heap.drain().map(|Reverse(k)| k.idx).collect();
            self.rebuild(corpus, state.selected_total(), remaining.into_iter());
        }
        let mut best: Option<(DocumentScore, usize)> = None;
        self.evaluated.clear();
        while let Some(Reverse(top)) = self.heap.peek() {
            if let Some((b, _)) = &best {
                if top.key > b.score || (top.key == b.score && top.doc_id > b.doc_id) {
                    break;
                }
            }
            let idx = top.idx;
            self.heap.pop();
            let s = score_compiled(state, probs, &docs[idx]);
            self.evaluated.push((idx, s.gain_sum));
            if best.as_ref().is_none_or(|(b, _)| ranks_before(&s, b)) {
                best = Some((s, idx));
            }
        }
        let (_, chosen) = best?;
        let evaluated = std::mem::take(&mut self.evaluated);
        for &(idx, gain) in &evaluated {
            if idx != chosen {
                self.stale_gain[idx] = gain;
                let k = self.keyed(corpus, idx);
                self.heap.push(Reverse(k));
            }
        }
        self.evaluated = evaluated;
        best
    }
}

/// Upper bound on W_n over the whole run.
fn max_selected_total(corpus: &CompiledCorpus, seed_mass: u64, quota: Quota) -> u64 {
    let mut sizes: Vec<u64> = corpus.summaries().map(|s| s.token_count).collect();
    let total: u64 = sizes.iter().sum();
    let reachable = match quota {
        Quota::Docs(q) => {
            sizes.sort_unstable_by(|a, b| b.cmp(a));
            sizes.iter().take(q).sum()
        }
        Quota::Tokens(t) => {
            let largest = sizes.iter().copied().max().unwrap_or(0);
            total.min(t.saturating_sub(1).saturating_add(largest))
        }
    };
    seed_mass + reachable
}

/// Result of sentence-level selection.
#[derive(Clone, Debug)]
pub struct SentenceSelection {
    /// Indices into the input, in selection order.
    pub order: Vec<usize>,
    pub deltas: Vec<SentenceDelta>,
    /// Seed entropy followed by the entropy after each accepted sentence.
    pub entropy_trace: Vec<f64>,
    pub manifest: SelectionManifest,
}

/// The original sentence-level algorithm: every sentence is its own unit.
pub fn select_sentences(sentences: &[Sentence], rep: &RepModel, config: &SelectionConfig) -> Result<SentenceSelection> {
    let docs: Vec<Document> = sentences
        .iter()
        .enumerate()
        .map(|(i, s)| Document {
            doc_id: i as u64,
            domain: None,
            byte_size: sentence_bytes(s),
            sentences: vec![s.clone()],
        })
        .collect();
    let manifest = select_documents(&docs, rep, config)?;
    let order = manifest.entries.iter().map(|e| e.doc_id as usize).collect();
    let deltas = manifest
        .entries
        .iter()
        .map(|e| SentenceDelta {
            delta: e.score.unwrap_or_default(),
            penalty: e.penalty_sum.unwrap_or_default(),
            gain: e.gain_sum.unwrap_or_default(),
        })
        .collect();
    let entropy_trace = manifest.entropy_trace();
    Ok(SentenceSelection {
        order,
        deltas,
        entropy_trace,
        manifest,
    })
}

fn sentence_bytes(s: &Sentence) -> u64 {
    let words: usize = s.tokens.iter().map(String::len).sum();
    (words + s.len().saturating_sub(1)).max(1) as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rep(pairs: &[(&str, u64)]) -> RepModel {
        RepModel::from_counts(&pairs.iter().copied().collect(), 1).unwrap()
    }

    fn doc(id: u64, text: &str) -> Document {
        Document::from_text(id, None, text, true)
    }

    #[test]
    fn quota_rounding() {
        assert_eq!(fraction_quota(0.1, 200), 20);
        assert_eq!(fraction_quota(0.005, 10_000), 50);
        assert_eq!(fraction_quota(0.07, 100), 7);
        assert_eq!(fraction_quota(0.2, 50), 10);
        assert_eq!(fraction_quota(0.01, 7), 1);
        assert_eq!(fraction_quota(1.0, 7), 7);
        assert_eq!(fraction_quota(0.34, 10), 4);
    }

    #[test]
    fn invalid_budgets() {
        for b in [
            Budget::TopFraction(0.0),
            Budget::TopFraction(1.5),
            Budget::TopFraction(f64::NAN),
            Budget::Tokens(0),
        ] {
            assert!(b.validate().is_err(), "{b:?}");
        }
        let r = rep(&[("a", 1)]);
        assert!(select_documents(&[doc(0, "a")], &r, &SelectionConfig::top_fraction(2.0)).is_err());
        assert!(select_documents(&[], &r, &SelectionConfig::top_fraction(1.0)).is_err());
    }

    #[test]
    fn single_document() {
        let r = rep(&[("a", 1), ("b", 1)]);
        for mode in [Mode::Exact, Mode::Lazy] {
            let m = select_documents(
                &[doc(7, "x y z")],
                &r,
                &SelectionConfig::top_fraction(0.5).with_mode(mode),
            )
            .unwrap();
            assert_eq!(m.doc_ids(), [7]);
            assert_eq!(m.entries[0].rank, 0);
        }
    }

    #[test]
    fn identical_documents_tie_break_on_id() {
        let r = rep(&[("a", 1), ("b", 1)]);
        let corpus = [doc(5, "a b. a"), doc(2, "a b. a"), doc(9, "x")];
        for mode in [Mode::Exact, Mode::Lazy] {
            let m = select_documents(&corpus, &r, &SelectionConfig::top_fraction(1.0).with_mode(mode)).unwrap();
            assert_eq!(m.doc_ids()[0], 2);
        }
    }

    #[test]
    fn token_budget_stops_after_crossing() {
        let r = rep(&[("a", 1), ("b", 1)]);
        let corpus = [doc(0, "a b a"), doc(1, "b a b"), doc(2, "a a a a"), doc(3, "x")];
        let m = select_documents(&corpus, &r, &SelectionConfig::tokens(4)).unwrap();
        assert_eq!(m.len(), 2);
        assert!(m.token_count() >= 4);
        let m = select_documents(&corpus, &r, &SelectionConfig::tokens(1000)).unwrap();
        assert_eq!(m.len(), 4);
    }

    #[test]
    fn header_describes_the_run() {
        let r = rep(&[("a", 1), ("b", 3)]);
        let m = select_documents(
            &[doc(0, "a"), doc(1, "b")],
            &r,
            &SelectionConfig::top_fraction(0.5).with_mode(Mode::Lazy),
        )
        .unwrap();
        assert_eq!(m.header.kind, ManifestKind::Cynical);
        assert_eq!(m.header.mode, Some(Mode::Lazy));
        assert_eq!(m.header.seed_mass, Some(2));
        assert_eq!(m.header.corpus_docs, 2);
        assert_eq!(m.header.config_hash.len(), 64);
        assert!(!m.header.approximate);
    }

    #[test]
    fn shorter_sentence_wins_when_gains_match() {
        let r = rep(&[("a", 1), ("b", 1)]);
        let long: Sentence = ["a", "b", "x", "y", "z"].into_iter().collect();
        let short: Sentence = ["a", "b", "x"].into_iter().collect();
        let sel = select_sentences(&[long, short], &r, &SelectionConfig::top_fraction(0.5)).unwrap();
        assert_eq!(sel.order, [1]);
        assert_eq!(sel.entropy_trace.len(), 2);
    }

    #[test]
    fn observer_sees_every_step() {
        let r = rep(&[("a", 1), ("b", 2), ("c", 1)]);
        let corpus: Vec<_> = (0..6)
            .map(|i| doc(i, ["a b", "c c x", "b", "x y", "a a c", "b c"][i as usize]))
            .collect();
        let compiled = CompiledCorpus::compile(&r, &corpus).unwrap();
        let mut ranks = Vec::new();
        let m = select_compiled_with(&compiled, &r, &SelectionConfig::top_fraction(1.0), |step, state| {
            ranks.push(step.rank);
            assert_eq!(step.cumulative_entropy, state.running_entropy());
        })
        .unwrap();
        assert_eq!(ranks, (0..6).collect::<Vec<_>>());
        assert_eq!(m.len(), 6);
    }
}
