//! Test-only reference implementations.
//!
//! The oracle below never touches the crate's scoring code: it keeps plain
//! string-keyed counts and evaluates every sentence delta as the difference
//! of two from-scratch cross-entropies, `H(counts + s) - H(counts)`.

#![allow(dead_code)]

use std::collections::BTreeMap;

use cynds::{Document, RepModel, Sentence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TIE_EPS: f64 = 1e-10;

pub struct OracleStep {
    pub doc_id: u64,
    pub score: f64,
    pub cumulative_entropy: f64,
}

pub struct BruteForce {
    probs: BTreeMap<String, f64>,
    counts: BTreeMap<String, u64>,
    total: u64,
}

impl BruteForce {
    pub fn new(rep: &RepModel) -> Self {
        // relative frequencies recomputed from raw counts
        let total_rep: u64 = rep.counts().iter().sum();
        let probs: BTreeMap<String, f64> = rep
            .words()
            .iter()
            .zip(rep.counts())
            .map(|(w, &c)| (w.clone(), c as f64 / total_rep as f64))
            .collect();
        let counts: BTreeMap<String, u64> = probs.keys().map(|w| (w.clone(), 1)).collect();
        let total = counts.len() as u64;
        BruteForce { probs, counts, total }
    }

    fn entropy_with(&self, extra: &BTreeMap<&str, u64>, extra_total: u64) -> f64 {
        let w = (self.total + extra_total) as f64;
        let mut h = 0.0;
        for (v, p) in &self.probs {
            let c = self.counts[v] + extra.get(v.as_str()).copied().unwrap_or(0);
            h -= p * (c as f64 / w).ln();
        }
        h
    }

    pub fn entropy(&self) -> f64 {
        self.entropy_with(&BTreeMap::new(), 0)
    }

    pub fn sentence_delta(&self, s: &Sentence) -> f64 {
        self.delta_from(self.entropy(), s)
    }

    fn delta_from(&self, base: f64, s: &Sentence) -> f64 {
        let mut extra: BTreeMap<&str, u64> = BTreeMap::new();
        for t in &s.tokens {
            *extra.entry(t.as_str()).or_default() += 1;
        }
        self.entropy_with(&extra, s.len() as u64) - base
    }

    pub fn doc_score(&self, d: &Document) -> f64 {
        let base = self.entropy();
        let sum: f64 = d.sentences.iter().map(|s| self.delta_from(base, s)).sum();
        sum / d.sentences.len() as f64
    }

    pub fn add(&mut self, d: &Document) {
        for t in d.sentences.iter().flat_map(|s| &s.tokens) {
            *self.counts.entry(t.clone()).or_default() += 1;
            self.total += 1;
        }
    }

    /// Greedy selection of `quota` documents, recomputing everything each step.
    pub fn select(rep: &RepModel, corpus: &[Document], quota: usize) -> Vec<OracleStep> {
        let mut oracle = BruteForce::new(rep);
        let mut remaining: Vec<&Document> = corpus.iter().collect();
        let mut out = Vec::new();
        while out.len() < quota && !remaining.is_empty() {
            let base = oracle.entropy();
            let scores: Vec<f64> = remaining
                .iter()
                .map(|d| d.sentences.iter().map(|s| oracle.delta_from(base, s)).sum::<f64>() / d.sentences.len() as f64)
                .collect();
            // the entropy-difference route carries ~1e-15 of rounding noise, so
            // anything this close to the minimum is a tie, broken by doc id
            let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
            let (pos, score) = scores
                .iter()
                .enumerate()
                .filter(|(_, &s)| s - min <= TIE_EPS)
                .min_by_key(|(p, _)| remaining[*p].doc_id)
                .map(|(p, &s)| (p, s))
                .unwrap();
            let d = remaining.remove(pos);
            oracle.add(d);
            out.push(OracleStep {
                doc_id: d.doc_id,
                score,
                cumulative_entropy: oracle.entropy(),
            });
        }
        out
    }
}

/// `⌈k·n⌉` computed in exact rational arithmetic for `k = num / den`.
pub fn quota(num: u64, den: u64, n: usize) -> usize {
    ((num * n as u64).div_ceil(den)) as usize
}

/// A random corpus over a small vocabulary, some of it outside the
/// representative set. Returns `(rep documents, corpus)`.
pub fn random_instance(seed: u64, max_docs: usize, max_vocab: usize) -> (Vec<Document>, Vec<Document>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = rng.random_range(10..=max_vocab);
    let rep_vocab = rng.random_range(3..=vocab);
    let word = |rng: &mut ChaCha8Rng, limit: usize| {
        // skewed towards low indices
        let u: f64 = rng.random();
        format!("w{}", ((u * u) * limit as f64) as usize)
    };
    let rep_docs = (0..rng.random_range(1..=20))
        .map(|i| {
            let text: Vec<String> = (0..rng.random_range(5..=60))
                .map(|_| word(&mut rng, rep_vocab))
                .collect();
            Document::from_text(i, None, &text.join(" "), true)
        })
        .collect();
    let n_docs = rng.random_range(2..=max_docs);
    let corpus = (0..n_docs)
        .map(|i| {
            let sentences = rng.random_range(1..=6);
            let text: Vec<String> = (0..sentences)
                .map(|_| {
                    let len = rng.random_range(1..=15);
                    let words: Vec<String> = (0..len).map(|_| word(&mut rng, vocab)).collect();
                    format!("{}.", words.join(" "))
                })
                .collect();
            let domain = if rng.random_bool(0.5) { "A" } else { "B" };
            Document::from_text(i as u64, Some(domain.into()), &text.join(" "), true)
        })
        .collect();
    (rep_docs, corpus)
}
