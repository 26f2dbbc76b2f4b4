use crate::corpus::{Document, Sentence};
use crate::error::{Error, Result};
use crate::rep::{RepModel, VocabCounts, OOV_BUCKET};

use super::compiled::CompiledSentence;

/// Effect of accepting one sentence on the selected set's cross-entropy.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SentenceDelta {
    /// `penalty + gain`; negative means the sentence pulls the selection
    /// towards the representative distribution.
    pub delta: f64,
    /// `ln((W_n + w) / W_n)`, always `>= 0`.
    pub penalty: f64,
    /// `Σ_v p_REP(v) · ln(C_n(v) / (C_n(v) + c(v)))`, always `<= 0`.
    pub gain: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DocumentScore {
    pub doc_id: u64,
    /// Mean of the member sentence deltas.
    pub score: f64,
    pub sentence_count: usize,
    pub penalty_sum: f64,
    pub gain_sum: f64,
}

/// Running statistics of the selected set.
///
/// Counts start at one for every representative word (add-one seeding) so
/// every log argument is finite from the first step. The seed mass is part of
/// `selected_total` but excluded from [`SelectionState::selected_tokens`].
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionState {
    counts: Vec<u64>,
    selected_total: u64,
    seed_mass: u64,
    oov_tokens: u64,
    running_entropy: f64,
    steps: u64,
}

/// Seeds a state with one count per representative word.
pub fn seed_state(rep: &RepModel) -> SelectionState {
    let v = rep.vocab_size();
    let per_word = (1.0 / v as f64).ln();
    let running_entropy = -rep.probs().iter().map(|&p| p * per_word).sum::<f64>();
    SelectionState {
        counts: vec![1; v],
        selected_total: v as u64,
        seed_mass: v as u64,
        oov_tokens: 0,
        running_entropy,
        steps: 0,
    }
}

impl SelectionState {
    /// W_n, including the seed mass.
    pub fn selected_total(&self) -> u64 {
        self.selected_total
    }

    /// Tokens accepted so far, excluding the seed mass.
    pub fn selected_tokens(&self) -> u64 {
        self.selected_total - self.seed_mass
    }

    pub fn seed_mass(&self) -> u64 {
        self.seed_mass
    }

    /// Accepted tokens outside the representative vocabulary.
    pub fn oov_tokens(&self) -> u64 {
        self.oov_tokens
    }

    /// C_n(v) by representative word index.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, rep: &RepModel, word: &str) -> Option<u64> {
        rep.index_of(word).map(|i| self.counts[i as usize])
    }

    /// H_n maintained incrementally.
    pub fn running_entropy(&self) -> f64 {
        self.running_entropy
    }

    /// Number of accepted sentences.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// The state as plain counts; off-vocabulary mass is lumped under
    /// [`OOV_BUCKET`].
    pub fn to_vocab_counts(&self, rep: &RepModel) -> VocabCounts {
        rep.words()
            .iter()
            .map(String::as_str)
            .zip(self.counts.iter().copied())
            .chain([(OOV_BUCKET, self.oov_tokens)])
            .collect()
    }

    pub fn penalty(&self, sentence_length: u64) -> f64 {
        (sentence_length as f64 / self.selected_total as f64).ln_1p()
    }

    pub fn gain(&self, rep: &RepModel, sentence: &Sentence) -> f64 {
        self.delta_h(rep, sentence).gain
    }

    pub fn delta_h(&self, rep: &RepModel, sentence: &Sentence) -> SentenceDelta {
        let compiled = CompiledSentence::new(rep, sentence);
        self.delta_terms(rep.probs(), compiled.len, &compiled.terms)
    }

    /// Accepts `sentence`, returning the delta it was accepted with.
    pub fn update(&mut self, rep: &RepModel, sentence: &Sentence) -> SentenceDelta {
        let compiled = CompiledSentence::new(rep, sentence);
        self.accept_terms(rep.probs(), compiled.len, &compiled.terms)
    }

    /// Scores every sentence of `doc` against this state, without
    /// intermediate updates, and averages the deltas.
    pub fn score_document(&self, rep: &RepModel, doc: &Document) -> Result<DocumentScore> {
        if doc.sentences.is_empty() {
            return Err(Error::EmptyDocument { doc_id: doc.doc_id });
        }
        let mut acc = ScoreAccumulator::default();
        for s in &doc.sentences {
            acc.push(self.delta_h(rep, s));
        }
        Ok(acc.finish(doc.doc_id))
    }

    /// `terms` are `(rep index, count)` pairs in ascending index order.
    #[inline]
    pub(crate) fn delta_terms(&self, probs: &[f64], len: u64, terms: &[(u32, u32)]) -> SentenceDelta {
        let penalty = self.penalty(len);
        let mut gain = 0.0;
        for &(i, c) in terms {
            let i = i as usize;
            gain -= probs[i] * (c as f64 / self.counts[i] as f64).ln_1p();
        }
        SentenceDelta {
            delta: penalty + gain,
            penalty,
            gain,
        }
    }

    /// Gain part only; used for cheap lower bounds.
    #[inline]
    pub(crate) fn gain_terms(&self, probs: &[f64], terms: &[(u32, u32)]) -> f64 {
        let mut gain = 0.0;
        for &(i, c) in terms {
            let i = i as usize;
            gain -= probs[i] * (c as f64 / self.counts[i] as f64).ln_1p();
        }
        gain
    }

    pub(crate) fn accept_terms(&mut self, probs: &[f64], len: u64, terms: &[(u32, u32)]) -> SentenceDelta {
        let d = self.delta_terms(probs, len, terms);
        let mut in_vocab = 0u64;
        for &(i, c) in terms {
            self.counts[i as usize] += c as u64;
            in_vocab += c as u64;
        }
        self.selected_total += len;
        self.oov_tokens += len - in_vocab;
        self.running_entropy += d.delta;
        self.steps += 1;
        d
    }
}

#[derive(Default)]
pub(crate) struct ScoreAccumulator {
    delta: f64,
    penalty: f64,
    gain: f64,
    n: usize,
}

impl ScoreAccumulator {
    #[inline]
    pub(crate) fn push(&mut self, d: SentenceDelta) {
        self.delta += d.delta;
        self.penalty += d.penalty;
        self.gain += d.gain;
        self.n += 1;
    }

    pub(crate) fn finish(self, doc_id: u64) -> DocumentScore {
        DocumentScore {
            doc_id,
            score: self.delta / self.n as f64,
            sentence_count: self.n,
            penalty_sum: self.penalty,
            gain_sum: self.gain,
        }
    }
}
