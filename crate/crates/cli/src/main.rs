use std::collections::HashSet;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cynds::eval::{selected_counts, EvalReport};
use cynds::manifest::{config_hash, SelectionManifest, TOOL_NAME, TOOL_VERSION};
use cynds::shard::{merge_shard_files, run_sharded_compiled, run_shards_to_dir, shard_is_complete};
use cynds::{
    build_rep_model, evaluate, load_corpus, plan_shards, random_select, select_compiled, select_documents,
    select_sentences, unigram_ppl, Budget, CompiledCorpus, Document, IngestConfig, RepModel, Sentence, VocabCounts,
};
use serde::Serialize;

mod config;

use config::RunConfig;

/// An error with its exit code: 2 for invalid input or configuration, 1 for
/// everything else.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    pub fn input(msg: impl Into<String>) -> Self {
        Failure {
            code: 2,
            msg: msg.into(),
        }
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        Failure {
            code: 1,
            msg: msg.into(),
        }
    }
}

impl From<cynds::Error> for Failure {
    fn from(e: cynds::Error) -> Self {
        let code = if e.is_input_error() { 2 } else { 1 };
        Failure {
            code,
            msg: e.to_string(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

#[derive(Parser, Debug)]
#[command(name = "cynds", version, about = "Document-level cynical data selection")]
struct Cli {
    /// Flat `key = value` run configuration; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Fraction of documents to select, as `0.01` or `1%`.
    #[arg(long, global = true, value_name = "FRACTION")]
    k: Option<String>,
    /// Token budget; replaces `--k`.
    #[arg(long, global = true)]
    tokens: Option<u64>,
    #[arg(long, global = true)]
    shards: Option<usize>,
    #[arg(long, global = true, value_parser = ["exact", "lazy"])]
    mode: Option<String>,
    /// Seed for the random baseline.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Skip documents from this domain; repeatable.
    #[arg(long = "exclude-domain", global = true, value_name = "DOMAIN")]
    exclude_domain: Vec<String>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// General corpus (`.jsonl` or plain text).
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Representative corpus.
    #[arg(long, global = true)]
    rep: Option<PathBuf>,
    /// Model file from `build-rep`, used instead of `--rep`.
    #[arg(long = "rep-model", global = true)]
    rep_model: Option<PathBuf>,
    /// Target text for evaluation; defaults to the representative corpus.
    #[arg(long, global = true)]
    target: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the representative unigram model.
    BuildRep,
    /// Cynical document selection.
    Select,
    /// Uniform random baseline with the same budget.
    RandomSelect,
    /// Per-shard selection written to one file per shard, then merged.
    ShardSelect {
        /// Run only this shard.
        #[arg(long)]
        only_shard: Option<usize>,
        /// Skip shards whose output is already complete.
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        no_merge: bool,
    },
    /// Report perplexity, domain mix and size of a selection.
    Eval {
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Sentence-level vs document-level vs random at matched token counts.
    Compare,
}

fn resolve(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut c = match &cli.config {
        Some(p) => {
            if !p.exists() {
                return Err(Failure::input(format!("config {} does not exist", p.display())));
            }
            RunConfig::load(p)?
        }
        None => RunConfig::default(),
    };
    if let Some(k) = &cli.k {
        c.k = config::parse_fraction(k)?;
        c.tokens = None;
    }
    if let Some(t) = cli.tokens {
        c.tokens = Some(t);
    }
    if let Some(s) = cli.shards {
        c.shards = s;
    }
    if let Some(m) = &cli.mode {
        c.mode = m.parse()?;
    }
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    for d in &cli.exclude_domain {
        c.ingest.excluded_domains.insert(d.clone());
    }
    let paths = [
        (&cli.corpus, &mut c.corpus),
        (&cli.rep, &mut c.rep),
        (&cli.rep_model, &mut c.rep_model),
        (&cli.target, &mut c.target),
    ];
    for (flag, slot) in paths {
        if let Some(p) = flag {
            *slot = Some(p.clone());
        }
    }
    if let Some(o) = &cli.out {
        c.out = o.clone();
    }
    c.validate()?;
    Ok(c)
}

/// Streams a corpus through `f`, surfacing read errors after the fact.
fn with_docs<T>(
    path: &Path,
    ingest: &IngestConfig,
    f: impl FnOnce(&mut dyn Iterator<Item = Document>) -> Result<T, Failure>,
) -> Result<T, Failure> {
    let mut reader = load_corpus(path, ingest)?;
    let mut err = None;
    let out = {
        let mut docs = reader.by_ref().map_while(|r| r.map_err(|e| err = Some(e)).ok());
        f(&mut docs)
    };
    if let Some(e) = err {
        return Err(e.into());
    }
    let s = reader.stats();
    if s.malformed > 0 {
        log::warn!("{}: skipped {} malformed records", path.display(), s.malformed);
    }
    log::info!(
        "{}: {} records, {} kept, {} excluded by domain, {} too short",
        path.display(),
        s.records,
        s.emitted,
        s.excluded,
        s.too_short
    );
    out
}

/// Ingestion settings for representative and target text: no domain
/// filtering, same case handling as the corpus.
fn plain_ingest(c: &RunConfig) -> IngestConfig {
    IngestConfig {
        lowercase: c.ingest.lowercase,
        ..IngestConfig::default()
    }
}

fn load_rep(c: &RunConfig) -> Result<RepModel, Failure> {
    if let Some(p) = &c.rep_model {
        let p = c.input("rep-model", Some(p))?;
        return Ok(RepModel::load(p)?);
    }
    let p = c.input("rep", c.rep.as_ref())?;
    with_docs(p, &plain_ingest(c), |docs| Ok(build_rep_model(docs, c.min_count)?))
}

fn compile(c: &RunConfig, rep: &RepModel) -> Result<CompiledCorpus, Failure> {
    let p = c.input("corpus", c.corpus.as_ref())?;
    with_docs(p, &c.ingest, |docs| {
        let mut corpus = CompiledCorpus::new(rep);
        for d in docs {
            corpus.push(rep, &d)?;
        }
        Ok(corpus)
    })
}

fn out_dir(c: &RunConfig) -> Result<&Path, Failure> {
    fs::create_dir_all(&c.out).map_err(|e| Failure::runtime(format!("{}: {e}", c.out.display())))?;
    Ok(&c.out)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))
}

fn write_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::runtime(format!("{}: {e}", path.display()))
}

fn stamp(m: &mut SelectionManifest, c: &RunConfig) {
    m.header
        .notes
        .push(format!("run config sha256 {}", config_hash(&c.canonical())));
}

fn save_manifest(m: &SelectionManifest, path: &Path) -> Result<(), Failure> {
    m.save(path)?;
    Ok(())
}

fn write_trace(m: &SelectionManifest, path: &Path) -> Result<(), Failure> {
    let mut out = create(path)?;
    let err = write_err(path);
    writeln!(out, "rank\tdoc_id\tscore\tcumulative_entropy").map_err(&err)?;
    for e in &m.entries {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.12}")).unwrap_or_default();
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            e.rank,
            e.doc_id,
            opt(e.score),
            opt(e.cumulative_entropy)
        )
        .map_err(&err)?;
    }
    out.flush().map_err(&err)
}

fn summarize(what: &str, m: &SelectionManifest, path: &Path) {
    let h = m
        .final_entropy()
        .map(|h| format!(", final H {h:.6}"))
        .unwrap_or_default();
    println!(
        "{what}: {} of {} documents, {} tokens{h} -> {}",
        m.len(),
        m.header.corpus_docs,
        m.token_count(),
        path.display()
    );
}

fn cmd_build_rep(c: &RunConfig) -> Result<(), Failure> {
    let p = c.input("rep", c.rep.as_ref())?;
    let rep = with_docs(p, &plain_ingest(c), |docs| Ok(build_rep_model(docs, c.min_count)?))?;
    let path = match &c.rep_model {
        Some(p) => p.clone(),
        None => out_dir(c)?.join("rep.model"),
    };
    rep.save(&path)?;
    println!("vocab={} total={} -> {}", rep.vocab_size(), rep.total(), path.display());
    Ok(())
}

fn cmd_select(c: &RunConfig) -> Result<(), Failure> {
    let rep = load_rep(c)?;
    let corpus = compile(c, &rep)?;
    let config = c.selection();
    let mut m = if c.shards > 1 {
        let plan = plan_shards(corpus.len(), c.shards)?;
        run_sharded_compiled(&corpus, &rep, &config, &plan)?
    } else {
        select_compiled(&corpus, &rep, &config)?
    };
    stamp(&mut m, c);
    let dir = out_dir(c)?;
    let path = c.manifest.clone().unwrap_or_else(|| dir.join("manifest.jsonl"));
    save_manifest(&m, &path)?;
    if c.trace {
        write_trace(&m, &dir.join("trace.tsv"))?;
    }
    summarize("selected", &m, &path);
    Ok(())
}

fn cmd_random_select(c: &RunConfig) -> Result<(), Failure> {
    let p = c.input("corpus", c.corpus.as_ref())?;
    let summaries = with_docs(p, &c.ingest, |docs| Ok(docs.map(|d| d.summary()).collect::<Vec<_>>()))?;
    let mut m = random_select(&summaries, c.budget(), c.seed)?;
    stamp(&mut m, c);
    let path = c.manifest.clone().unwrap_or_else(|| c.out.join("random.jsonl"));
    out_dir(c)?;
    save_manifest(&m, &path)?;
    summarize("random", &m, &path);
    Ok(())
}

fn cmd_shard_select(c: &RunConfig, only: Option<usize>, resume: bool, no_merge: bool) -> Result<(), Failure> {
    let rep = load_rep(c)?;
    let corpus = compile(c, &rep)?;
    let config = c.selection();
    let plan = plan_shards(corpus.len(), c.shards)?;
    if let Some(i) = only {
        if i >= plan.num_shards() {
            return Err(Failure::input(format!(
                "--only-shard {i} but there are {} shards",
                plan.num_shards()
            )));
        }
    }
    let dir = out_dir(c)?.join("shards");
    let ran = run_shards_to_dir(&corpus, &rep, &config, &plan, &dir, only, resume)?;
    let complete = (0..plan.num_shards())
        .filter(|&i| shard_is_complete(&dir, i, &plan, &config))
        .count();
    println!(
        "ran {} shard(s); {complete} of {} complete in {}",
        ran.len(),
        plan.num_shards(),
        dir.display()
    );
    if no_merge || complete < plan.num_shards() {
        return Ok(());
    }
    let mut m = merge_shard_files(&dir, plan.num_shards())?;
    stamp(&mut m, c);
    let path = c.manifest.clone().unwrap_or_else(|| c.out.join("manifest.jsonl"));
    save_manifest(&m, &path)?;
    if c.trace {
        write_trace(&m, &c.out.join("trace.tsv"))?;
    }
    summarize("merged", &m, &path);
    Ok(())
}

#[derive(Serialize)]
struct EvalFile<'a> {
    tool: &'a str,
    version: &'a str,
    manifest: String,
    manifest_config_hash: &'a str,
    run_config_hash: String,
    #[serde(flatten)]
    report: &'a EvalReport,
}

fn cmd_eval(c: &RunConfig, manifest: Option<&PathBuf>) -> Result<(), Failure> {
    let default = c.out.join("manifest.jsonl");
    let mpath = c.input("manifest", Some(manifest.or(c.manifest.as_ref()).unwrap_or(&default)))?;
    let corpus_path = c.input("corpus", c.corpus.as_ref())?;
    let target_path = c.input("target", c.target.as_ref().or(c.rep.as_ref()))?;
    let m = SelectionManifest::load(mpath)?;
    let mut seen = 0usize;
    let report = with_docs(corpus_path, &c.ingest, |docs| {
        let docs = docs.inspect(|_| seen += 1);
        with_docs(target_path, &plain_ingest(c), |target| Ok(evaluate(&m, docs, target)?))
    })?;
    if seen != m.header.corpus_docs {
        log::warn!(
            "manifest was built over {} documents but the corpus yields {seen}; check that ingestion settings match",
            m.header.corpus_docs
        );
    }
    let dir = out_dir(c)?;
    let stem = mpath.file_stem().and_then(|s| s.to_str()).unwrap_or("manifest");
    let json_path = dir.join(format!("{stem}.eval.json"));
    let file = EvalFile {
        tool: TOOL_NAME,
        version: TOOL_VERSION,
        manifest: mpath.display().to_string(),
        manifest_config_hash: &m.header.config_hash,
        run_config_hash: config_hash(&c.canonical()),
        report: &report,
    };
    let mut out = create(&json_path)?;
    let err = write_err(&json_path);
    serde_json::to_writer_pretty(&mut out, &file).map_err(|e| Failure::runtime(e.to_string()))?;
    writeln!(out).map_err(&err)?;
    out.flush().map_err(&err)?;
    if c.domain_tsv {
        let tsv = dir.join(format!("{stem}.domains.tsv"));
        let mut out = create(&tsv)?;
        report.write_domain_tsv(&mut out).map_err(write_err(&tsv))?;
        out.flush().map_err(write_err(&tsv))?;
    }
    println!(
        "{}: {:.4} over {} documents, {} tokens, {} bytes -> {}",
        report.ppl_label,
        report.target_ppl,
        report.doc_count,
        report.token_count,
        report.total_bytes,
        json_path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct CompareRow {
    method: &'static str,
    units: usize,
    documents: usize,
    tokens: u64,
    target_ppl: f64,
}

#[derive(Serialize)]
struct CompareFile {
    tool: &'static str,
    version: &'static str,
    run_config_hash: String,
    budget: Budget,
    corpus_docs: usize,
    rows: Vec<CompareRow>,
}

fn cmd_compare(c: &RunConfig) -> Result<(), Failure> {
    let rep = load_rep(c)?;
    let corpus_path = c.input("corpus", c.corpus.as_ref())?;
    let target_path = c.input("target", c.target.as_ref().or(c.rep.as_ref()))?;
    let docs: Vec<Document> = with_docs(corpus_path, &c.ingest, |d| Ok(d.collect()))?;
    let target: Vec<Document> = with_docs(target_path, &plain_ingest(c), |d| Ok(d.collect()))?;
    let config = c.selection();

    let by_doc = select_documents(&docs, &rep, &config)?;
    let matched = Budget::Tokens(by_doc.token_count().max(1));

    let mut sentences: Vec<Sentence> = Vec::new();
    let mut owner: Vec<u64> = Vec::new();
    for d in &docs {
        for s in &d.sentences {
            sentences.push(s.clone());
            owner.push(d.doc_id);
        }
    }
    let by_sentence = select_sentences(
        &sentences,
        &rep,
        &cynds::SelectionConfig {
            budget: matched,
            mode: c.mode,
        },
    )?;
    let mut sentence_counts = VocabCounts::new();
    for &i in &by_sentence.order {
        sentence_counts.add_sentence(&sentences[i]);
    }
    let touched: HashSet<u64> = by_sentence.order.iter().map(|&i| owner[i]).collect();

    let summaries: Vec<_> = docs.iter().map(Document::summary).collect();
    let random = random_select(&summaries, matched, c.seed)?;

    let rows = vec![
        CompareRow {
            method: "sentence",
            units: by_sentence.order.len(),
            documents: touched.len(),
            tokens: sentence_counts.total(),
            target_ppl: unigram_ppl(&sentence_counts, &target)?,
        },
        CompareRow {
            method: "document",
            units: by_doc.len(),
            documents: by_doc.len(),
            tokens: by_doc.token_count(),
            target_ppl: unigram_ppl(&selected_counts(&by_doc, &docs)?, &target)?,
        },
        CompareRow {
            method: "random",
            units: random.len(),
            documents: random.len(),
            tokens: random.token_count(),
            target_ppl: unigram_ppl(&selected_counts(&random, &docs)?, &target)?,
        },
    ];
    println!(
        "{:<10}{:>10}{:>12}{:>12}{:>14}",
        "method", "units", "documents", "tokens", "target_ppl"
    );
    for r in &rows {
        println!(
            "{:<10}{:>10}{:>12}{:>12}{:>14.4}",
            r.method, r.units, r.documents, r.tokens, r.target_ppl
        );
    }
    let file = CompareFile {
        tool: TOOL_NAME,
        version: TOOL_VERSION,
        run_config_hash: config_hash(&c.canonical()),
        budget: config.budget,
        corpus_docs: docs.len(),
        rows,
    };
    let path = out_dir(c)?.join("compare.json");
    let mut out = create(&path)?;
    serde_json::to_writer_pretty(&mut out, &file).map_err(|e| Failure::runtime(e.to_string()))?;
    writeln!(out).map_err(write_err(&path))?;
    out.flush().map_err(write_err(&path))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let c = resolve(&cli)?;
    match cli.command {
        Command::BuildRep => cmd_build_rep(&c),
        Command::Select => cmd_select(&c),
        Command::RandomSelect => cmd_random_select(&c),
        Command::ShardSelect {
            only_shard,
            resume,
            no_merge,
        } => cmd_shard_select(&c, only_shard, resume, no_merge),
        Command::Eval { manifest } => cmd_eval(&c, manifest.as_ref()),
        Command::Compare => cmd_compare(&c),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("cynds: error: {f}");
            ExitCode::from(f.code)
        }
    }
}
