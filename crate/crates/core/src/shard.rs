//! Shard-parallel selection.
//!
//! The corpus is cut into contiguous ranges, each range runs its own greedy
//! selection with the same fraction of its own documents, and the per-shard
//! manifests are concatenated. Shards share nothing but the representative
//! model, so they can run on separate threads, processes or machines; the
//! per-shard manifests are plain files (`shard-NNNN.jsonl`) that a later
//! merge step picks up.

use std::ops::Range;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::manifest::{ManifestKind, SelectionManifest, MERGE_NOTE};
use crate::rep::RepModel;
use crate::select::{self, Budget, CompiledCorpus, Quota, SelectionConfig};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShardPlan {
    ranges: Vec<Range<usize>>,
}

/// Splits `corpus_size` positions into `num_shards` contiguous ranges whose
/// sizes differ by at most one; earlier shards take the larger size.
pub fn plan_shards(corpus_size: usize, num_shards: usize) -> Result<ShardPlan> {
    if num_shards == 0 {
        return Err(Error::InvalidConfig("num_shards must be at least 1".into()));
    }
    if num_shards > corpus_size {
        return Err(Error::InvalidConfig(format!(
            "{num_shards} shards requested for {corpus_size} documents"
        )));
    }
    let base = corpus_size / num_shards;
    let extra = corpus_size % num_shards;
    let mut start = 0;
    let ranges = (0..num_shards)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect();
    Ok(ShardPlan { ranges })
}

impl ShardPlan {
    pub fn num_shards(&self) -> usize {
        self.ranges.len()
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.ranges.iter().map(|r| r.len()).collect()
    }

    pub fn corpus_size(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }

    /// Shard owning corpus position `pos`.
    pub fn shard_of(&self, pos: usize) -> Option<usize> {
        if pos >= self.corpus_size() {
            return None;
        }
        Some(self.ranges.partition_point(|r| r.end <= pos))
    }
}

/// Per-shard budgets. A fraction `k` becomes `⌊k·n_i⌋` documents per shard,
/// with the remainder up to the global `⌈k·N⌉` handed to the lowest-index
/// shards; a token budget is split in proportion to shard token counts.
pub(crate) fn shard_quotas(plan: &ShardPlan, budget: Budget, corpus: &CompiledCorpus) -> Vec<Quota> {
    match budget {
        Budget::TopFraction(k) => {
            let sizes = plan.sizes();
            let target = select::fraction_quota(k, plan.corpus_size());
            let mut quotas: Vec<usize> = sizes
                .iter()
                .map(|&n| ((k * n as f64) + 1e-9).floor() as usize)
                .map(|q| q.min(target))
                .collect();
            for (q, &n) in quotas.iter_mut().zip(&sizes) {
                *q = (*q).min(n);
            }
            let mut assigned: usize = quotas.iter().sum();
            while assigned < target {
                let before = assigned;
                for (q, &n) in quotas.iter_mut().zip(&sizes) {
                    if assigned < target && *q < n {
                        *q += 1;
                        assigned += 1;
                    }
                }
                if assigned == before {
                    break;
                }
            }
            quotas.into_iter().map(Quota::Docs).collect()
        }
        Budget::Tokens(t) => {
            let shard_tokens: Vec<u64> = plan
                .ranges()
                .iter()
                .map(|r| corpus.docs()[r.clone()].iter().map(|d| d.summary.token_count).sum())
                .collect();
            let total: u64 = shard_tokens.iter().sum::<u64>().max(1);
            shard_tokens
                .iter()
                .map(|&ti| Quota::Tokens((t as u128 * ti as u128).div_ceil(total as u128).max(1) as u64))
                .collect()
        }
    }
}

/// Runs selection on one shard only.
pub fn run_shard(
    corpus: &CompiledCorpus,
    rep: &RepModel,
    config: &SelectionConfig,
    plan: &ShardPlan,
    index: usize,
) -> Result<SelectionManifest> {
    check_plan(corpus, plan)?;
    config.budget.validate()?;
    let range = plan
        .ranges()
        .get(index)
        .cloned()
        .ok_or_else(|| Error::InvalidConfig(format!("shard {index} out of range")))?;
    let quota = shard_quotas(plan, config.budget, corpus)[index];
    let shard = corpus.slice(range);
    let mut m = select::run_greedy(&shard, rep, config, quota, |_, _| {}).map_err(|e| Error::Shard {
        index,
        source: Box::new(e),
    })?;
    m.header.num_shards = Some(plan.num_shards());
    m.header.shard_index = Some(index);
    for e in &mut m.entries {
        e.shard = Some(index);
        e.shard_rank = Some(e.rank);
    }
    Ok(m)
}

fn check_plan(corpus: &CompiledCorpus, plan: &ShardPlan) -> Result<()> {
    if plan.corpus_size() != corpus.len() {
        return Err(Error::InvalidConfig(format!(
            "shard plan covers {} documents but the corpus has {}",
            plan.corpus_size(),
            corpus.len()
        )));
    }
    Ok(())
}

pub fn run_sharded(
    corpus: &[Document],
    rep: &RepModel,
    config: &SelectionConfig,
    plan: &ShardPlan,
) -> Result<SelectionManifest> {
    let compiled = CompiledCorpus::compile(rep, corpus)?;
    run_sharded_compiled(&compiled, rep, config, plan)
}

/// Selects every shard in parallel and merges. A single-shard plan is
/// exactly the unsharded selection.
pub fn run_sharded_compiled(
    corpus: &CompiledCorpus,
    rep: &RepModel,
    config: &SelectionConfig,
    plan: &ShardPlan,
) -> Result<SelectionManifest> {
    check_plan(corpus, plan)?;
    if plan.num_shards() == 1 {
        return select::select_compiled(corpus, rep, config);
    }
    let shards = (0..plan.num_shards())
        .into_par_iter()
        .map(|i| run_shard(corpus, rep, config, plan, i))
        .collect::<Result<Vec<_>>>()?;
    merge_shards(shards)
}

/// Concatenates per-shard manifests and orders them by score, then doc id.
pub fn merge_shards(mut shards: Vec<SelectionManifest>) -> Result<SelectionManifest> {
    shards.sort_by_key(|m| m.header.shard_index);
    let first = shards
        .first()
        .ok_or_else(|| Error::InvalidConfig("no shard manifests to merge".into()))?;
    let num_shards = first.header.num_shards.unwrap_or(shards.len());
    for (i, m) in shards.iter().enumerate() {
        if m.header.shard_index != Some(i) || m.header.num_shards != Some(num_shards) {
            return Err(Error::InvalidConfig(format!(
                "shard manifests do not form a complete set of {num_shards} (position {i} holds shard {:?})",
                m.header.shard_index
            )));
        }
        if m.header.budget != first.header.budget
            || m.header.mode != first.header.mode
            || m.header.kind != ManifestKind::Cynical
        {
            return Err(Error::InvalidConfig(format!(
                "shard {i} was produced with a different configuration"
            )));
        }
    }
    if shards.len() != num_shards {
        return Err(Error::InvalidConfig(format!(
            "expected {num_shards} shard manifests, got {}",
            shards.len()
        )));
    }

    let mut header = first.header.clone();
    header.kind = ManifestKind::Merged;
    header.shard_index = None;
    header.seed_entropy = None;
    header.corpus_docs = shards.iter().map(|m| m.header.corpus_docs).sum();
    header.notes.push(MERGE_NOTE.into());

    let mut entries: Vec<_> = shards.into_iter().flat_map(|m| m.entries).collect();
    entries.sort_by(|a, b| {
        let (sa, sb) = (a.score.unwrap_or(f64::INFINITY), b.score.unwrap_or(f64::INFINITY));
        sa.total_cmp(&sb).then(a.doc_id.cmp(&b.doc_id))
    });
    for (rank, e) in entries.iter_mut().enumerate() {
        e.rank = rank;
    }
    Ok(SelectionManifest { header, entries })
}

pub fn shard_file_name(index: usize) -> String {
    format!("shard-{index:04}.jsonl")
}

pub fn shard_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(shard_file_name(index))
}

/// Whether `dir` already holds a finished manifest for shard `index` of this
/// plan and configuration.
pub fn shard_is_complete(dir: &Path, index: usize, plan: &ShardPlan, config: &SelectionConfig) -> bool {
    match SelectionManifest::load(shard_path(dir, index)) {
        Ok(m) => {
            m.header.shard_index == Some(index)
                && m.header.num_shards == Some(plan.num_shards())
                && m.header.budget == config.budget
                && m.header.mode == Some(config.mode)
                && m.header.corpus_docs == plan.sizes()[index]
        }
        Err(_) => false,
    }
}

/// Runs the shards that have no finished manifest in `dir` (all of them
/// unless `resume`), writing one file per shard. Returns the indices run.
pub fn run_shards_to_dir(
    corpus: &CompiledCorpus,
    rep: &RepModel,
    config: &SelectionConfig,
    plan: &ShardPlan,
    dir: &Path,
    only: Option<usize>,
    resume: bool,
) -> Result<Vec<usize>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let todo: Vec<usize> = (0..plan.num_shards())
        .filter(|&i| only.is_none_or(|o| o == i))
        .filter(|&i| !(resume && shard_is_complete(dir, i, plan, config)))
        .collect();
    todo.par_iter()
        .map(|&i| {
            let m = run_shard(corpus, rep, config, plan, i)?;
            // write to a temporary name first so an interrupted run never
            // leaves a truncated shard behind
            let tmp = dir.join(format!(".{}.tmp", shard_file_name(i)));
            m.save(&tmp)?;
            let dest = shard_path(dir, i);
            std::fs::rename(&tmp, &dest).map_err(|e| Error::io(&dest, e))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(todo)
}

/// Loads `shard-0000.jsonl … shard-{n-1}.jsonl` from `dir` and merges them.
pub fn merge_shard_files(dir: &Path, num_shards: usize) -> Result<SelectionManifest> {
    let shards = (0..num_shards)
        .map(|i| SelectionManifest::load(shard_path(dir, i)))
        .collect::<Result<Vec<_>>>()?;
    merge_shards(shards)
}
