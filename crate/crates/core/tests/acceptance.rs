//! Acceptance suite. Every criterion prints one `PASS`/`FAIL` line and the
//! binary exits nonzero if any criterion fails. It runs without the libtest
//! harness so the report is always shown: `cargo test -p cynds --test acceptance`.

mod common;

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::time::{Duration, Instant};

use common::{quota, random_instance, BruteForce};
use cynds::eval::evaluate;
use cynds::select::select_compiled_with;
use cynds::synthetic::{Layout, SyntheticConfig, TARGET_DOMAIN};
use cynds::{
    build_rep_model, cross_entropy, load_corpus, plan_shards, random_select, run_sharded, seed_state, select_compiled,
    select_documents, CompiledCorpus, Document, IngestConfig, Mode, SelectionConfig, SelectionManifest, Sentence,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn target_fraction(m: &SelectionManifest) -> f64 {
    let hits = m
        .entries
        .iter()
        .filter(|e| e.domain.as_deref() == Some(TARGET_DOMAIN))
        .count();
    hits as f64 / m.len() as f64
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn c1_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let fractions = [(1, 10), (1, 4), (1, 2), (1, 1)];
    let mut worst = 0.0f64;
    let mut steps = 0;
    for seed in 0..25u64 {
        let (rep_docs, corpus) = random_instance(1000 + seed, 200, 500);
        let rep = build_rep_model(&rep_docs, 1).unwrap();
        let (num, den) = fractions[seed as usize % fractions.len()];
        let q = quota(num, den, corpus.len());
        let config = SelectionConfig::top_fraction(num as f64 / den as f64);
        let m = select_documents(&corpus, &rep, &config).unwrap();
        let oracle = BruteForce::select(&rep, &corpus, q);
        if m.doc_ids() != oracle.iter().map(|s| s.doc_id).collect::<Vec<_>>() {
            return outcome(false, format!("order differs on corpus {seed}"));
        }
        for (e, o) in m.entries.iter().zip(&oracle) {
            worst = worst.max((e.score.unwrap() - o.score).abs());
            worst = worst.max((e.cumulative_entropy.unwrap() - o.cumulative_entropy).abs());
        }
        steps += q;
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-9 && elapsed < Duration::from_secs(60),
        format!(
            "25 corpora, {steps} steps, max abs diff {worst:.2e}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn c2_bookkeeping() -> Outcome {
    let g = SyntheticConfig {
        docs: 2000,
        seed: 2,
        ..Default::default()
    }
    .generate();
    let rep = build_rep_model(&g.rep, 1).unwrap();
    let corpus = CompiledCorpus::compile(&rep, &g.corpus).unwrap();
    let mut worst = 0.0f64;
    let mut steps = 0;
    select_compiled_with(&corpus, &rep, &SelectionConfig::top_fraction(0.5), |_, state| {
        let h = cross_entropy(&rep, &state.to_vocab_counts(&rep)).unwrap();
        worst = worst.max(rel_err(state.running_entropy(), h));
        steps += 1;
    })
    .unwrap();
    outcome(
        worst <= 1e-9 && steps == 1000,
        format!("{steps} steps, max rel err {worst:.2e}"),
    )
}

fn c3_sign_and_decomposition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut failures = 0;
    let mut empties = 0;
    for _ in 0..10_000 {
        let vocab = rng.random_range(1..60);
        let words: Vec<String> = (0..vocab).map(|i| format!("w{i}")).collect();
        let counts = words
            .iter()
            .map(|w| (w.as_str(), rng.random_range(1..200u64)))
            .collect();
        let rep = cynds::RepModel::from_counts(&counts, 1).unwrap();
        let mut state = seed_state(&rep);
        let warm = rng.random_range(0..300);
        let warmup: Sentence = (0..warm)
            .map(|_| format!("w{}", rng.random_range(0..vocab + 20)))
            .collect();
        state.update(&rep, &warmup);
        let len = if rng.random_bool(0.05) {
            0
        } else {
            rng.random_range(1..40)
        };
        let s: Sentence = (0..len)
            .map(|_| format!("w{}", rng.random_range(0..vocab + 5)))
            .collect();
        let d = state.delta_h(&rep, &s);
        let ok = d.penalty >= 0.0 && d.gain <= 0.0 && d.delta == d.penalty + d.gain && (len > 0 || d.delta == 0.0);
        failures += usize::from(!ok);
        empties += usize::from(len == 0);
    }
    outcome(
        failures == 0,
        format!("10000 pairs ({empties} empty), {failures} violations"),
    )
}

fn c4_prefix() -> Outcome {
    let g = SyntheticConfig {
        docs: 10_000,
        seed: 4,
        ..Default::default()
    }
    .generate();
    let rep = build_rep_model(&g.rep, 1).unwrap();
    let corpus = CompiledCorpus::compile(&rep, &g.corpus).unwrap();
    let ks = [0.005, 0.01, 0.02, 0.05];
    let runs: Vec<SelectionManifest> = ks
        .iter()
        .map(|&k| select_compiled(&corpus, &rep, &SelectionConfig::top_fraction(k)).unwrap())
        .collect();
    let sizes: Vec<usize> = runs.iter().map(|m| m.len()).collect();
    let mut pass = sizes == [50, 100, 200, 500];
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            pass &= runs[i].entries[..] == runs[j].entries[..runs[i].len()];
        }
    }
    outcome(pass, format!("sizes {sizes:?}"))
}

fn c5_domain_pull() -> Outcome {
    let g = SyntheticConfig {
        docs: 2000,
        seed: 5,
        ..Default::default()
    }
    .generate();
    let rep = build_rep_model(&g.rep, 1).unwrap();
    let config = SelectionConfig::top_fraction(0.1);
    let cyn = target_fraction(&select_documents(&g.corpus, &rep, &config).unwrap());
    let summaries: Vec<_> = g.corpus.iter().map(Document::summary).collect();
    let rnd = target_fraction(&random_select(&summaries, config.budget, 5).unwrap());
    outcome(
        cyn >= 0.9 && (rnd - 0.5).abs() <= 0.1,
        format!("cynical target fraction {cyn:.3}, random {rnd:.3}"),
    )
}

fn c6_perplexity() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for seed in 0..5u64 {
        let g = SyntheticConfig {
            docs: 2000,
            seed: 60 + seed,
            ..Default::default()
        }
        .generate();
        let rep = build_rep_model(&g.rep, 1).unwrap();
        let cyn = select_documents(&g.corpus, &rep, &SelectionConfig::top_fraction(0.1)).unwrap();
        let summaries: Vec<_> = g.corpus.iter().map(Document::summary).collect();
        let rnd = random_select(&summaries, cynds::Budget::Tokens(cyn.token_count()), seed).unwrap();
        let a = evaluate(&cyn, &g.corpus, &g.heldout).unwrap();
        let b = evaluate(&rnd, &g.corpus, &g.heldout).unwrap();
        pass &= a.target_ppl < b.target_ppl;
        detail.push(format!(
            "{:.1}/{:.1} ({}/{} tok)",
            a.target_ppl, b.target_ppl, a.token_count, b.token_count
        ));
    }
    outcome(pass, format!("ppl cynical/random: {}", detail.join(", ")))
}

fn c7_short_documents() -> Outcome {
    let g = SyntheticConfig {
        docs: 5000,
        mixed_sentences: true,
        sentences_per_doc: 1..=30,
        seed: 7,
        ..Default::default()
    }
    .generate();
    let rep = build_rep_model(&g.rep, 1).unwrap();
    let corpus = CompiledCorpus::compile(&rep, &g.corpus).unwrap();
    let corpus_mean = g.corpus.iter().map(|d| d.token_count()).sum::<u64>() as f64 / g.corpus.len() as f64;
    let mut gaps = Vec::new();
    let mut traces = Vec::new();
    for k in [0.01, 0.02, 0.05] {
        let m = select_compiled(&corpus, &rep, &SelectionConfig::top_fraction(k)).unwrap();
        let mean = m.token_count() as f64 / m.len() as f64;
        gaps.push(corpus_mean - mean);
        traces.push(m.entropy_trace());
    }
    let below = gaps[0] >= 0.0;
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0]);
    let mut detail = format!(
        "corpus mean {corpus_mean:.1} tokens, gap at 1/2/5% = {:.1}/{:.1}/{:.1}",
        gaps[0], gaps[1], gaps[2]
    );
    if !monotone {
        let trace: Vec<String> = traces[2].iter().map(|h| format!("{h:.4}")).collect();
        detail.push_str(&format!(
            "; gap not monotone in k, H trace at 5%: [{}]",
            trace.join(", ")
        ));
    }
    outcome(below, detail)
}

fn c8_sharding() -> Outcome {
    let config = SelectionConfig::top_fraction(0.1);
    let g = SyntheticConfig {
        docs: 200,
        target_fraction: 0.1,
        layout: Layout::Interleaved,
        seed: 8,
        ..Default::default()
    }
    .generate();
    let rep = build_rep_model(&g.rep, 1).unwrap();
    let plain = select_documents(&g.corpus, &rep, &config).unwrap();
    let one = run_sharded(&g.corpus, &rep, &config, &plan_shards(200, 1).unwrap()).unwrap();
    let mut a = Vec::new();
    let mut b = Vec::new();
    plain.write_to(&mut a).unwrap();
    one.write_to(&mut b).unwrap();
    let identical = a == b;
    let four = run_sharded(&g.corpus, &rep, &config, &plan_shards(200, 4).unwrap()).unwrap();
    let base: HashSet<u64> = plain.doc_id_set();
    let overlap = four.doc_ids().iter().filter(|id| base.contains(id)).count() as f64 / plain.len() as f64;
    let purity_gap = (target_fraction(&four) - target_fraction(&plain)).abs();

    // not gated: the same check on a half-target corpus in random order
    let mixed = SyntheticConfig {
        docs: 200,
        seed: 8,
        ..Default::default()
    }
    .generate();
    let rep_mixed = build_rep_model(&mixed.rep, 1).unwrap();
    let whole = select_documents(&mixed.corpus, &rep_mixed, &config).unwrap();
    let split = run_sharded(&mixed.corpus, &rep_mixed, &config, &plan_shards(200, 4).unwrap()).unwrap();
    let mixed_overlap = split.doc_id_set().intersection(&whole.doc_id_set()).count() as f64 / whole.len() as f64;

    outcome(
        identical && four.len() == plain.len() && overlap >= 0.9 && purity_gap <= 0.05,
        format!(
            "1 shard identical: {identical}; 4 shards overlap {:.0}%, purity {:.2} vs {:.2} \
             (half-target shuffled corpus: overlap {:.0}%, purity {:.2} vs {:.2})",
            overlap * 100.0,
            target_fraction(&four),
            target_fraction(&plain),
            mixed_overlap * 100.0,
            target_fraction(&split),
            target_fraction(&whole)
        ),
    )
}

fn peak_rss_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

fn c9_throughput() -> Outcome {
    let synth = SyntheticConfig {
        docs: 100_000,
        vocab_size: 5000,
        sentences_per_doc: 2..=15,
        sentence_len: 6..=20,
        rep_docs: 500,
        seed: 9,
        ..Default::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = dir.path().join("corpus.jsonl");
    let mut out = BufWriter::new(File::create(&corpus_path).unwrap());
    for doc in synth.corpus() {
        doc.write_jsonl_line(&mut out).unwrap();
    }
    out.flush().unwrap();
    drop(out);
    let bytes = std::fs::metadata(&corpus_path).unwrap().len();
    let rep_docs = cynds::synthetic::to_documents(&synth.representative());

    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let manifest = pool.install(|| {
        let rep = build_rep_model(&rep_docs, 1).unwrap();
        let mut corpus = CompiledCorpus::new(&rep);
        for doc in load_corpus(&corpus_path, &IngestConfig::default()).unwrap() {
            corpus.push(&rep, &doc.unwrap()).unwrap();
        }
        let m = select_compiled(
            &corpus,
            &rep,
            &SelectionConfig::top_fraction(0.01).with_mode(Mode::Lazy),
        )
        .unwrap();
        m.save(dir.path().join("manifest.jsonl")).unwrap();
        m
    });
    let elapsed = start.elapsed();
    let peak = peak_rss_kib();
    let mem_ok = peak.is_some_and(|kib| kib < 2 * 1024 * 1024);
    outcome(
        manifest.len() == 1000 && elapsed <= Duration::from_secs(600) && mem_ok,
        format!(
            "{} docs, {:.1} MB, selected {} in {:.1}s on 1 thread, peak RSS {}",
            synth.docs,
            bytes as f64 / 1e6,
            manifest.len(),
            elapsed.as_secs_f64(),
            peak.map_or("unknown".into(), |k| format!("{:.0} MB", k as f64 / 1024.0))
        ),
    )
}

fn main() {
    // the throughput run goes first so the peak-memory reading is its own
    let c9 = c9_throughput();
    let results = [
        ("1 oracle equivalence", c1_oracle_equivalence()),
        ("2 entropy bookkeeping", c2_bookkeeping()),
        ("3 sign and decomposition", c3_sign_and_decomposition()),
        ("4 prefix property", c4_prefix()),
        ("5 domain pull", c5_domain_pull()),
        ("6 perplexity direction", c6_perplexity()),
        ("7 short-document preference", c7_short_documents()),
        ("8 sharding fidelity", c8_sharding()),
        ("9 throughput", c9),
    ];
    for (name, o) in &results {
        println!(
            "{} criterion {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    let failed: Vec<&str> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
