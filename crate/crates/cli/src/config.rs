//! The run configuration: a flat `key = value` file plus flag overrides.
//!
//! ```text
//! # lines starting with '#' are comments
//! corpus = data/general.jsonl
//! rep = data/target.txt
//! out = runs/legal
//! k = 0.01
//! mode = lazy
//! exclude_domain = Github
//! exclude_domain = Enron Emails
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use cynds::{Budget, IngestConfig, Mode, SelectionConfig};

use crate::Failure;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub rep: Option<PathBuf>,
    /// A model written by `build-rep`; used instead of `rep` when set.
    pub rep_model: Option<PathBuf>,
    /// Target text for evaluation; defaults to `rep`.
    pub target: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub out: PathBuf,
    pub k: f64,
    pub tokens: Option<u64>,
    pub mode: Mode,
    pub shards: usize,
    pub seed: u64,
    pub min_count: u64,
    pub ingest: IngestConfig,
    pub trace: bool,
    pub domain_tsv: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: None,
            rep: None,
            rep_model: None,
            target: None,
            manifest: None,
            out: PathBuf::from("."),
            k: 0.01,
            tokens: None,
            mode: Mode::Exact,
            shards: 1,
            seed: 0,
            min_count: 1,
            ingest: IngestConfig::default(),
            trace: true,
            domain_tsv: true,
        }
    }
}

pub const KEYS: &[&str] = &[
    "corpus",
    "rep",
    "rep_model",
    "target",
    "manifest",
    "out",
    "k",
    "tokens",
    "mode",
    "shards",
    "seed",
    "min_count",
    "exclude_domain",
    "lowercase",
    "min_doc_sentences",
    "trace",
    "domain_tsv",
];

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::input(msg)
}

fn parse_bool(key: &str, v: &str) -> Result<bool, Failure> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(invalid(format!("{key}: expected a boolean, got {v:?}"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, Failure> {
    v.parse().map_err(|_| invalid(format!("{key}: cannot parse {v:?}")))
}

/// Accepts `0.01` or `1%`.
pub fn parse_fraction(v: &str) -> Result<f64, Failure> {
    let v = v.trim();
    let k = match v.strip_suffix('%') {
        Some(p) => parse_num::<f64>("k", p.trim())? / 100.0,
        None => parse_num::<f64>("k", v)?,
    };
    if !(k > 0.0 && k <= 1.0) {
        return Err(invalid(format!("k must be in (0, 1], got {v}")));
    }
    Ok(k)
}

impl RunConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self, Failure> {
        let mut c = RunConfig::default();
        let path = |v: &str| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| invalid(format!("config line {}: expected key = value", i + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "corpus" => c.corpus = Some(path(value)),
                "rep" => c.rep = Some(path(value)),
                "rep_model" => c.rep_model = Some(path(value)),
                "target" => c.target = Some(path(value)),
                "manifest" => c.manifest = Some(path(value)),
                "out" => c.out = path(value),
                "k" => c.k = parse_fraction(value)?,
                "tokens" => c.tokens = Some(parse_num(key, value)?),
                "mode" => c.mode = value.parse().map_err(|e: cynds::Error| invalid(e.to_string()))?,
                "shards" => c.shards = parse_num(key, value)?,
                "seed" => c.seed = parse_num(key, value)?,
                "min_count" => c.min_count = parse_num(key, value)?,
                "exclude_domain" => {
                    c.ingest.excluded_domains.insert(value.to_owned());
                }
                "lowercase" => c.ingest.lowercase = parse_bool(key, value)?,
                "min_doc_sentences" => c.ingest.min_doc_sentences = parse_num(key, value)?,
                "trace" => c.trace = parse_bool(key, value)?,
                "domain_tsv" => c.domain_tsv = parse_bool(key, value)?,
                _ => {
                    return Err(invalid(format!(
                        "config line {}: unknown key {key:?} (known: {})",
                        i + 1,
                        KEYS.join(", ")
                    )))
                }
            }
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::parse(&text, base)
    }

    pub fn budget(&self) -> Budget {
        match self.tokens {
            Some(t) => Budget::Tokens(t),
            None => Budget::TopFraction(self.k),
        }
    }

    pub fn selection(&self) -> SelectionConfig {
        SelectionConfig {
            budget: self.budget(),
            mode: self.mode,
        }
    }

    pub fn validate(&self) -> Result<(), Failure> {
        self.budget().validate()?;
        self.ingest.validate()?;
        if self.shards == 0 {
            return Err(invalid("shards must be at least 1"));
        }
        if self.min_count == 0 {
            return Err(invalid("min_count must be at least 1"));
        }
        Ok(())
    }

    /// A path that must be configured and must exist.
    pub fn input<'a>(&self, name: &str, p: Option<&'a PathBuf>) -> Result<&'a Path, Failure> {
        let p = p.ok_or_else(|| {
            invalid(format!(
                "no {name} configured (set `{name}` in the config or pass --{name})"
            ))
        })?;
        if !p.exists() {
            return Err(invalid(format!("{name} {} does not exist", p.display())));
        }
        Ok(p)
    }

    /// Canonical rendering, hashed into run artifacts.
    pub fn canonical(&self) -> String {
        let opt = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let excluded: Vec<&str> = self.ingest.excluded_domains.iter().map(String::as_str).collect();
        format!(
            "corpus={}\nrep={}\nrep_model={}\nk={}\ntokens={:?}\nmode={:?}\nshards={}\nseed={}\nmin_count={}\nexclude_domain={}\nlowercase={}\nmin_doc_sentences={}\n",
            opt(&self.corpus),
            opt(&self.rep),
            opt(&self.rep_model),
            self.k,
            self.tokens,
            self.mode,
            self.shards,
            self.seed,
            self.min_count,
            excluded.join(","),
            self.ingest.lowercase,
            self.ingest.min_doc_sentences
        )
    }
}
