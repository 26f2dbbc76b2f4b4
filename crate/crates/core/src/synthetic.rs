//! Seeded synthetic corpora with a known target domain, for experiments,
//! benchmarks and tests.
//!
//! Target-like text draws from a Zipfian vocabulary `t0, t1, …`, off-domain
//! text from a disjoint `o0, o1, …`, and both sprinkle in shared function
//! words `s0, s1, …`. The representative and held-out sets are fresh
//! target-like documents drawn from independent random streams.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::RangeInclusive;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use serde::Serialize;

use crate::corpus::Document;
use crate::error::{Error, Result};

pub const TARGET_DOMAIN: &str = "target";
pub const OFF_DOMAIN: &str = "other";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    /// Target-like documents at uniformly random positions.
    Shuffled,
    /// Target-like documents spread at an even stride.
    Interleaved,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub docs: usize,
    /// Share of target-like documents in the general corpus.
    pub target_fraction: f64,
    /// Vocabulary size of each domain.
    pub vocab_size: usize,
    pub shared_vocab: usize,
    /// Probability that a token is a shared function word.
    pub shared_rate: f64,
    pub zipf_exponent: f64,
    pub sentences_per_doc: RangeInclusive<usize>,
    pub sentence_len: RangeInclusive<usize>,
    /// When set, every document draws a purity `q ~ U(0, 1)` and each of its
    /// sentences is target-like with probability `q`; the domain tag follows
    /// the majority. Otherwise documents are pure.
    pub mixed_sentences: bool,
    pub layout: Layout,
    pub rep_docs: usize,
    pub heldout_docs: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            docs: 1000,
            target_fraction: 0.5,
            vocab_size: 400,
            shared_vocab: 20,
            shared_rate: 0.2,
            zipf_exponent: 1.1,
            sentences_per_doc: 1..=8,
            sentence_len: 4..=16,
            mixed_sentences: false,
            layout: Layout::Shuffled,
            rep_docs: 200,
            heldout_docs: 100,
            seed: 0,
        }
    }
}

/// Raw text record as it would appear in a JSONL corpus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawDoc {
    pub domain: Option<String>,
    pub text: String,
}

#[derive(Serialize)]
struct JsonlRecord<'a> {
    text: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    meta: Option<JsonlMeta<'a>>,
}

#[derive(Serialize)]
struct JsonlMeta<'a> {
    pile_set_name: &'a str,
}

impl RawDoc {
    pub fn write_jsonl_line(&self, mut out: impl Write) -> std::io::Result<()> {
        let rec = JsonlRecord {
            text: &self.text,
            meta: self.domain.as_deref().map(|d| JsonlMeta { pile_set_name: d }),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")
    }
}

/// Writes records as Pile-style JSONL.
pub fn write_jsonl<'a>(path: impl AsRef<Path>, docs: impl IntoIterator<Item = &'a RawDoc>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for d in docs {
        d.write_jsonl_line(&mut out).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Tokenized documents with sequential ids, as [`crate::load_corpus`] would
/// produce them.
pub fn to_documents(raw: &[RawDoc]) -> Vec<Document> {
    raw.iter()
        .enumerate()
        .map(|(i, r)| Document::from_text(i as u64, r.domain.clone(), &r.text, true))
        .collect()
}

struct TextSampler {
    target: Zipf<f64>,
    off: Zipf<f64>,
    shared: Zipf<f64>,
    shared_rate: f64,
    sentence_len: RangeInclusive<usize>,
}

impl TextSampler {
    fn new(c: &SyntheticConfig) -> Self {
        let zipf = |n: usize| Zipf::new(n.max(1) as f64, c.zipf_exponent).expect("valid zipf parameters");
        TextSampler {
            target: zipf(c.vocab_size),
            off: zipf(c.vocab_size),
            shared: zipf(c.shared_vocab),
            shared_rate: if c.shared_vocab == 0 { 0.0 } else { c.shared_rate },
            sentence_len: c.sentence_len.clone(),
        }
    }

    fn sentence(&self, rng: &mut ChaCha8Rng, target_like: bool, out: &mut String) {
        let len = rng.random_range(self.sentence_len.clone());
        for i in 0..len {
            if i > 0 {
                out.push(' ');
            }
            let (prefix, dist) = if rng.random_bool(self.shared_rate) {
                ('s', &self.shared)
            } else if target_like {
                ('t', &self.target)
            } else {
                ('o', &self.off)
            };
            let rank = dist.sample(rng) as usize - 1;
            out.push(prefix);
            out.push_str(&rank.to_string());
        }
        out.push('.');
    }

    fn document(&self, rng: &mut ChaCha8Rng, sentences: usize, purity: f64) -> (String, bool) {
        let mut text = String::new();
        let mut target_sentences = 0;
        for i in 0..sentences {
            if i > 0 {
                text.push(' ');
            }
            let target_like = purity >= 1.0 || (purity > 0.0 && rng.random_bool(purity));
            target_sentences += usize::from(target_like);
            self.sentence(rng, target_like, &mut text);
        }
        (text, 2 * target_sentences >= sentences)
    }
}

impl SyntheticConfig {
    fn stream(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt)
    }

    /// Which positions of the general corpus hold target-like documents.
    pub fn target_positions(&self) -> Vec<bool> {
        let n_target = ((self.docs as f64) * self.target_fraction).round() as usize;
        match self.layout {
            Layout::Interleaved => (0..self.docs)
                .map(|i| (i + 1) * n_target / self.docs.max(1) > i * n_target / self.docs.max(1))
                .collect(),
            Layout::Shuffled => {
                let mut v: Vec<bool> = (0..self.docs).map(|i| i < n_target).collect();
                v.shuffle(&mut self.stream(1));
                v
            }
        }
    }

    /// Streams the general corpus.
    pub fn corpus(&self) -> impl Iterator<Item = RawDoc> + '_ {
        let sampler = TextSampler::new(self);
        let mut rng = self.stream(2);
        self.target_positions().into_iter().map(move |is_target| {
            let sentences = rng.random_range(self.sentences_per_doc.clone());
            let purity = match (self.mixed_sentences, is_target) {
                (true, _) => rng.random::<f64>(),
                (false, true) => 1.0,
                (false, false) => 0.0,
            };
            let (text, majority_target) = sampler.document(&mut rng, sentences, purity);
            let domain = if majority_target { TARGET_DOMAIN } else { OFF_DOMAIN };
            RawDoc {
                domain: Some(domain.into()),
                text,
            }
        })
    }

    fn target_docs(&self, n: usize, salt: u64) -> Vec<RawDoc> {
        let sampler = TextSampler::new(self);
        let mut rng = self.stream(salt);
        (0..n)
            .map(|_| {
                let sentences = rng.random_range(self.sentences_per_doc.clone());
                RawDoc {
                    domain: Some(TARGET_DOMAIN.into()),
                    text: sampler.document(&mut rng, sentences, 1.0).0,
                }
            })
            .collect()
    }

    /// Representative sample of the target domain.
    pub fn representative(&self) -> Vec<RawDoc> {
        self.target_docs(self.rep_docs, 3)
    }

    /// Held-out target text, disjoint from the representative sample.
    pub fn heldout(&self) -> Vec<RawDoc> {
        self.target_docs(self.heldout_docs, 4)
    }

    pub fn generate(&self) -> SyntheticCorpus {
        SyntheticCorpus {
            corpus: to_documents(&self.corpus().collect::<Vec<_>>()),
            rep: to_documents(&self.representative()),
            heldout: to_documents(&self.heldout()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub corpus: Vec<Document>,
    pub rep: Vec<Document>,
    pub heldout: Vec<Document>,
}
