//! Selection manifests: the ordered record of what was selected, written as
//! JSONL with one header line followed by one line per document.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::select::{Budget, Mode};

pub const TOOL_NAME: &str = "cynds";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const SEED_MASS_NOTE: &str = "selection counts are seeded with one occurrence of every representative word; \
     the seed mass enters the entropy but is excluded from token_count";
pub const MERGE_NOTE: &str = "merged across shards and ordered by score; scores from different shards were computed \
     against different selection states and are not strictly comparable";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifestKind {
    Cynical,
    Random,
    Merged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub tool: String,
    pub version: String,
    pub kind: ManifestKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    pub approximate: bool,
    pub budget: Budget,
    pub config_hash: String,
    /// Documents available to the selection.
    pub corpus_docs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rep_vocab: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rep_total: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_mass: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_entropy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_shards: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shard_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ManifestHeader {
    pub fn new(kind: ManifestKind, budget: Budget, corpus_docs: usize) -> Self {
        ManifestHeader {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            kind,
            mode: None,
            approximate: false,
            budget,
            config_hash: String::new(),
            corpus_docs,
            rep_vocab: None,
            rep_total: None,
            seed_mass: None,
            seed_entropy: None,
            seed: None,
            num_shards: None,
            shard_index: None,
            notes: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub rank: usize,
    pub doc_id: u64,
    pub domain: Option<String>,
    /// Document score at the time of acceptance; `null` for random baselines.
    pub score: Option<f64>,
    pub penalty_sum: Option<f64>,
    pub gain_sum: Option<f64>,
    pub sentence_count: usize,
    pub token_count: u64,
    pub byte_size: u64,
    /// H after accepting this document.
    pub cumulative_entropy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shard: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shard_rank: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: ManifestHeader,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionManifest {
    pub header: ManifestHeader,
    pub entries: Vec<ManifestEntry>,
}

impl SelectionManifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn doc_ids(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.doc_id).collect()
    }

    pub fn doc_id_set(&self) -> HashSet<u64> {
        self.entries.iter().map(|e| e.doc_id).collect()
    }

    pub fn token_count(&self) -> u64 {
        self.entries.iter().map(|e| e.token_count).sum()
    }

    pub fn byte_size(&self) -> u64 {
        self.entries.iter().map(|e| e.byte_size).sum()
    }

    /// Entropy after the last accepted document, or the seed entropy for an
    /// empty selection.
    pub fn final_entropy(&self) -> Option<f64> {
        match self.entries.last() {
            Some(e) => e.cumulative_entropy,
            None => self.header.seed_entropy,
        }
    }

    /// Seed entropy followed by the entropy after each accepted document.
    pub fn entropy_trace(&self) -> Vec<f64> {
        self.header
            .seed_entropy
            .into_iter()
            .chain(self.entries.iter().filter_map(|e| e.cumulative_entropy))
            .collect()
    }

    pub fn write_to(&self, mut out: impl Write) -> std::io::Result<()> {
        let header = HeaderLine {
            header: self.header.clone(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for e in &self.entries {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn read_from(input: impl BufRead) -> Result<Self> {
        let mut header = None;
        let mut entries = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |e: serde_json::Error| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            };
            if header.is_none() {
                let h: HeaderLine = serde_json::from_str(&line).map_err(parse_err)?;
                header = Some(h.header);
            } else {
                entries.push(serde_json::from_str(&line).map_err(parse_err)?);
            }
        }
        let header = header.ok_or(Error::Parse {
            line: 1,
            message: "missing manifest header".into(),
        })?;
        Ok(SelectionManifest { header, entries })
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

/// Hex SHA-256 of a canonical configuration string.
pub fn config_hash(canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SelectionManifest {
        let mut header = ManifestHeader::new(ManifestKind::Cynical, Budget::TopFraction(0.25), 8);
        header.mode = Some(Mode::Exact);
        header.seed_entropy = Some(1.5);
        header.notes.push(SEED_MASS_NOTE.into());
        let entry = |rank: usize, doc_id: u64, h: f64| ManifestEntry {
            rank,
            doc_id,
            domain: Some("Pile-CC".into()),
            score: Some(-0.125),
            penalty_sum: Some(0.5),
            gain_sum: Some(-0.75),
            sentence_count: 2,
            token_count: 11,
            byte_size: 64,
            cumulative_entropy: Some(h),
            shard: None,
            shard_rank: None,
        };
        SelectionManifest {
            header,
            entries: vec![entry(0, 4, 1.25), entry(1, 2, 1.0 / 3.0)],
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let m = sample();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("{\"header\":{\"tool\":\"cynds\""));
        assert!(!text.contains("shard"));
        assert_eq!(SelectionManifest::read_from(buf.as_slice()).unwrap(), m);
        assert_eq!(m.entropy_trace(), [1.5, 1.25, 1.0 / 3.0]);
    }

    #[test]
    fn null_scores_serialize() {
        let mut m = sample();
        m.entries[0].score = None;
        let line = serde_json::to_string(&m.entries[0]).unwrap();
        assert!(line.contains("\"score\":null"));
    }

    #[test]
    fn missing_header_is_an_error() {
        assert!(SelectionManifest::read_from("".as_bytes()).is_err());
        assert!(SelectionManifest::read_from("{\"rank\": 0}\n".as_bytes()).is_err());
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(
            config_hash("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
