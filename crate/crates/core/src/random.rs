//! Seeded random-selection baseline with the same manifest schema.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::DocSummary;
use crate::error::{Error, Result};
use crate::manifest::{config_hash, ManifestEntry, ManifestHeader, ManifestKind, SelectionManifest};
use crate::select::{fraction_quota, Budget};

/// Uniform sample without replacement: `⌈k·N⌉` documents for a fraction
/// budget, or documents in shuffled order until the token budget is reached.
/// Score fields are left empty.
pub fn random_select(corpus: &[DocSummary], budget: Budget, seed: u64) -> Result<SelectionManifest> {
    budget.validate()?;
    if corpus.is_empty() {
        return Err(Error::InvalidConfig("cannot select from an empty corpus".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked: Vec<usize> = match budget {
        Budget::TopFraction(k) => {
            let m = fraction_quota(k, corpus.len());
            rand::seq::index::sample(&mut rng, corpus.len(), m).into_vec()
        }
        Budget::Tokens(t) => {
            let mut order: Vec<usize> = (0..corpus.len()).collect();
            order.shuffle(&mut rng);
            let mut tokens = 0u64;
            order
                .into_iter()
                .take_while(|&i| {
                    let more = tokens < t;
                    tokens += corpus[i].token_count;
                    more
                })
                .collect()
        }
    };

    let mut header = ManifestHeader::new(ManifestKind::Random, budget, corpus.len());
    header.seed = Some(seed);
    let canonical = serde_json::json!({"budget": budget, "seed": seed, "corpus_docs": corpus.len()});
    header.config_hash = config_hash(&canonical.to_string());
    let entries = picked
        .into_iter()
        .enumerate()
        .map(|(rank, i)| {
            let d = &corpus[i];
            ManifestEntry {
                rank,
                doc_id: d.doc_id,
                domain: d.domain.clone(),
                score: None,
                penalty_sum: None,
                gain_sum: None,
                sentence_count: d.sentence_count,
                token_count: d.token_count,
                byte_size: d.byte_size,
                cumulative_entropy: None,
                shard: None,
                shard_rank: None,
            }
        })
        .collect();
    Ok(SelectionManifest { header, entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(n: u64) -> Vec<DocSummary> {
        (0..n)
            .map(|i| DocSummary {
                doc_id: i,
                domain: Some(if i % 2 == 0 { "A" } else { "B" }.into()),
                sentence_count: 1,
                token_count: 10,
                byte_size: 50,
            })
            .collect()
    }

    #[test]
    fn full_fraction_takes_everything() {
        let m = random_select(&corpus(17), Budget::TopFraction(1.0), 3).unwrap();
        let mut ids = m.doc_ids();
        ids.sort();
        assert_eq!(ids, (0..17).collect::<Vec<_>>());
        assert!(m.entries.iter().all(|e| e.score.is_none()));
    }

    #[test]
    fn seeded_and_without_replacement() {
        let c = corpus(100);
        let a = random_select(&c, Budget::TopFraction(0.3), 42).unwrap();
        let b = random_select(&c, Budget::TopFraction(0.3), 42).unwrap();
        let other = random_select(&c, Budget::TopFraction(0.3), 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.doc_ids(), other.doc_ids());
        assert_eq!(a.len(), 30);
        assert_eq!(a.doc_id_set().len(), 30);
    }

    #[test]
    fn token_budget() {
        let m = random_select(&corpus(100), Budget::Tokens(95), 1).unwrap();
        assert_eq!(m.len(), 10);
        assert_eq!(m.token_count(), 100);
    }
}
