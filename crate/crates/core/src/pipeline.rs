//! Corpus cleaning and the sharded corpus driver.
//!
//! Lines are processed in fixed-size shards. Inside a shard the per-line work
//! runs in parallel; results are written back in line order, and every random
//! draw comes from a per-line stream, so the output bytes do not depend on
//! the number of workers or on the shard size.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use xxhash_rust::xxh3::{xxh3_128, xxh3_64_with_seed};

use crate::annotate::{annotate, AnnotationConfig, Scheme};
use crate::error::{Error, Result};
use crate::lemma::{Lemmatizer, LemmatizerSpec};
use crate::model::{
    detokenize, format_sidecar_line, ConstraintSpec, Mode, SentencePair, Tokenizer,
};
use crate::sampler::{sample_sentence, NgramPool, NgramPoolBuilder, SamplerConfig, TriangularLengths};
use crate::termbase::{matches_to_constraints, TermBase, VariantPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub max_ratio: f64,
    pub dedup: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_tokens: 1,
            max_tokens: 100,
            max_ratio: 9.0,
            dedup: true,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_tokens > self.max_tokens {
            return Err(Error::Invalid(format!(
                "min_tokens {} exceeds max_tokens {}",
                self.min_tokens, self.max_tokens
            )));
        }
        if self.max_ratio.is_nan() || self.max_ratio < 1.0 {
            return Err(Error::Invalid(format!("max_ratio {} below 1", self.max_ratio)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanStats {
    pub total: u64,
    pub kept: u64,
    pub dropped_length: u64,
    pub dropped_ratio: u64,
    pub dropped_duplicate: u64,
    pub dropped_predicate: u64,
    /// Pairs whose 128-bit hash matched an earlier pair but whose check hash
    /// did not; they are kept.
    pub hash_collisions: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Keep,
    Length,
    Ratio,
    Duplicate,
    Predicate,
}

/// Extra keep/drop predicate, e.g. a language identifier.
pub type PairPredicate = Box<dyn Fn(&SentencePair) -> bool + Send + Sync>;

/// Length, ratio and predicate checks; no state, safe to run in parallel.
fn filter_verdict(pair: &SentencePair, cfg: &FilterConfig, predicate: Option<&PairPredicate>) -> Verdict {
    let (s, t) = (pair.source.len(), pair.target.len());
    let bounds = cfg.min_tokens..=cfg.max_tokens;
    if !bounds.contains(&s) || !bounds.contains(&t) {
        return Verdict::Length;
    }
    let (short, long) = (s.min(t), s.max(t));
    if short == 0 || long as f64 > cfg.max_ratio * short as f64 {
        return Verdict::Ratio;
    }
    if let Some(p) = predicate {
        if !p(pair) {
            return Verdict::Predicate;
        }
    }
    Verdict::Keep
}

const CHECK_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

/// Hash key of a normalized pair: (128-bit primary, 64-bit check).
fn pair_key(pair: &SentencePair) -> (u128, u64) {
    let mut bytes = detokenize(&pair.source).into_bytes();
    bytes.push(b'\t');
    bytes.extend_from_slice(detokenize(&pair.target).as_bytes());
    (xxh3_128(&bytes), xxh3_64_with_seed(&bytes, CHECK_SEED))
}

/// Stateful cleaner. Feed pairs in corpus order.
pub struct Cleaner {
    cfg: FilterConfig,
    seen: HashMap<u128, u64>,
    predicate: Option<PairPredicate>,
    stats: CleanStats,
}

impl Cleaner {
    pub fn new(cfg: FilterConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            seen: HashMap::new(),
            predicate: None,
            stats: CleanStats::default(),
        })
    }

    pub fn with_predicate(mut self, predicate: PairPredicate) -> Self {
        self.predicate = Some(predicate);
        self
    }

    pub fn stats(&self) -> CleanStats {
        self.stats
    }

    pub fn check(&mut self, pair: &SentencePair) -> Verdict {
        let verdict = filter_verdict(pair, &self.cfg, self.predicate.as_ref());
        let key = (verdict == Verdict::Keep && self.cfg.dedup).then(|| pair_key(pair));
        self.record(verdict, key)
    }

    fn record(&mut self, mut verdict: Verdict, key: Option<(u128, u64)>) -> Verdict {
        if let (Verdict::Keep, Some((primary, check))) = (verdict, key) {
            match self.seen.get(&primary) {
                Some(&stored) if stored == check => verdict = Verdict::Duplicate,
                Some(_) => {
                    log::warn!("128-bit pair hash collision; keeping both pairs");
                    self.stats.hash_collisions += 1;
                }
                None => {
                    self.seen.insert(primary, check);
                }
            }
        }
        self.stats.total += 1;
        match verdict {
            Verdict::Keep => self.stats.kept += 1,
            Verdict::Length => self.stats.dropped_length += 1,
            Verdict::Ratio => self.stats.dropped_ratio += 1,
            Verdict::Duplicate => self.stats.dropped_duplicate += 1,
            Verdict::Predicate => self.stats.dropped_predicate += 1,
        }
        verdict
    }

    /// Checks a shard: stateless checks in parallel, dedup in order.
    pub fn check_shard(&mut self, pairs: &[SentencePair]) -> Vec<Verdict> {
        let cfg = &self.cfg;
        let predicate = self.predicate.as_ref();
        let prepared: Vec<(Verdict, Option<(u128, u64)>)> = pairs
            .par_iter()
            .map(|pair| {
                let verdict = filter_verdict(pair, cfg, predicate);
                let key = (verdict == Verdict::Keep && cfg.dedup).then(|| pair_key(pair));
                (verdict, key)
            })
            .collect();
        prepared
            .into_iter()
            .map(|(verdict, key)| self.record(verdict, key))
            .collect()
    }
}

/// Filters and deduplicates pairs, keeping first occurrences.
pub fn clean(
    pairs: impl IntoIterator<Item = SentencePair>,
    cfg: &FilterConfig,
) -> Result<(Vec<SentencePair>, CleanStats)> {
    let mut cleaner = Cleaner::new(cfg.clone())?;
    let kept = pairs
        .into_iter()
        .filter(|pair| cleaner.check(pair) == Verdict::Keep)
        .collect();
    Ok((kept, cleaner.stats()))
}

/// Reads raw lines in shards of `shard_size`, maps each shard in parallel
/// with `f` and hands results to `sink` in line order.
pub fn for_each_shard<T, R, F, S>(
    items: impl Iterator<Item = Result<T>>,
    shard_size: usize,
    f: F,
    mut sink: S,
) -> Result<()>
where
    T: Send + Sync,
    R: Send,
    F: Fn(u64, &T) -> Result<R> + Sync,
    S: FnMut(&[T], Vec<R>) -> Result<()>,
{
    let shard_size = shard_size.max(1);
    let mut items = items.peekable();
    let mut first: u64 = 0;
    let mut shard_no = 0;
    while items.peek().is_some() {
        let shard: Vec<T> = items.by_ref().take(shard_size).collect::<Result<_>>()?;
        let last = first + shard.len() as u64;
        let results: Vec<R> = shard
            .par_iter()
            .enumerate()
            .map(|(i, item)| f(first + i as u64, item))
            .collect::<Result<_>>()
            .map_err(|e| Error::Stage {
                stage: "map",
                shard: shard_no,
                first,
                last,
                source: Box::new(e),
            })?;
        sink(&shard, results)?;
        first = last;
        shard_no += 1;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub source: Option<PathBuf>,
    pub target: Option<PathBuf>,
    pub tsv: Option<PathBuf>,
    #[serde(default)]
    pub tokenizer: Tokenizer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolConfig {
    pub max_len: usize,
    pub reservoir_size: usize,
    pub seed: u64,
    /// Prebuilt pool; when set the pool is loaded instead of built.
    pub path: Option<PathBuf>,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self {
            max_len: 9,
            reservoir_size: 10_000,
            seed: 0,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmaConfig {
    /// `identity` or `dict:<path>`.
    pub lemmatizer: String,
    pub case_sensitive: bool,
}

impl Default for LemmaConfig {
    fn default() -> Self {
        Self {
            lemmatizer: "identity".into(),
            case_sensitive: false,
        }
    }
}

impl LemmaConfig {
    pub fn spec(&self) -> Result<LemmatizerSpec> {
        let spec = LemmatizerSpec::parse(&self.lemmatizer)?;
        Ok(if self.case_sensitive { spec.case_sensitive() } else { spec })
    }
}

/// Term-base matching on the source side instead of target sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermBaseConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub all_variants: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputConfig,
    pub output: OutputConfig,
    #[serde(default = "default_shard_size")]
    pub shard_size: usize,
    #[serde(default)]
    pub clean: FilterConfig,
    #[serde(default)]
    pub pool: PoolConfig,
    #[serde(default)]
    pub sample: SamplerConfig,
    #[serde(default)]
    pub annotate: AnnotationConfig,
    #[serde(default)]
    pub lemma: LemmaConfig,
    pub termbase: Option<TermBaseConfig>,
}

fn default_shard_size() -> usize {
    10_000
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Invalid(format!("pipeline config: {e}")))
    }

    /// Checks values and that every referenced input exists.
    pub fn validate(&self) -> Result<()> {
        self.clean.validate()?;
        self.sample.validate()?;
        self.annotate.validate()?;
        let spec = self.lemma.spec()?;
        if self.pool.max_len == 0 {
            return Err(Error::Invalid("pool.max_len must be at least 1".into()));
        }
        if self.annotate.scheme != Scheme::Suffix && self.termbase.is_none() {
            return Err(Error::Invalid(
                "factored and replace annotation need a [termbase] section".into(),
            ));
        }
        let mut required: Vec<&Path> = Vec::new();
        match (&self.input.source, &self.input.target, &self.input.tsv) {
            (Some(s), Some(t), None) => required.extend([s.as_path(), t.as_path()]),
            (None, None, Some(tsv)) => required.push(tsv),
            _ => {
                return Err(Error::Invalid(
                    "input needs either source and target, or tsv".into(),
                ))
            }
        }
        if let crate::lemma::LemmatizerKind::Dictionary(path) = &spec.kind {
            required.push(path);
        }
        if let Some(path) = &self.pool.path {
            required.push(path);
        }
        if let Some(tb) = &self.termbase {
            required.push(&tb.path);
        }
        for path in required {
            if !path.exists() {
                return Err(Error::Invalid(format!("input path {} does not exist", path.display())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoolStats {
    pub lengths: Vec<(usize, u64, usize)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AnnotateStats {
    pub sentences: u64,
    pub with_constraints: u64,
    pub constraints: u64,
    pub variants: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub sampler_seed: u64,
    pub pool_seed: u64,
    pub clean: CleanStats,
    pub pool: Option<PoolStats>,
    pub annotate: AnnotateStats,
    pub outputs: Vec<String>,
}

pub const CLEAN_SOURCE: &str = "clean.src";
pub const CLEAN_TARGET: &str = "clean.tgt";
pub const POOL_FILE: &str = "pool.tsv";
pub const CONSTRAINTS_FILE: &str = "constraints.tsv";
pub const ANNOTATED_SOURCE: &str = "train.src";
pub const MANIFEST_FILE: &str = "manifest.json";

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(|f| BufWriter::with_capacity(1 << 20, f))
        .map_err(|e| Error::io(path, e))
}

fn lines_of(path: &Path) -> Result<impl Iterator<Item = Result<String>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let owned = path.to_path_buf();
    Ok(BufReader::with_capacity(1 << 20, file)
        .lines()
        .map(move |l| l.map_err(|e| Error::io(&owned, e))))
}

/// Raw `(source, target)` line pairs of the configured input.
type RawPairs = Box<dyn Iterator<Item = Result<(String, String)>>>;

fn raw_pairs(input: &InputConfig) -> Result<RawPairs> {
    match (&input.source, &input.target, &input.tsv) {
        (Some(s), Some(t), None) => {
            let mut src = lines_of(s)?;
            let mut tgt = lines_of(t)?;
            let name = s.clone();
            let mut line = 0usize;
            Ok(Box::new(std::iter::from_fn(move || {
                line += 1;
                match (src.next(), tgt.next()) {
                    (None, None) => None,
                    (Some(Ok(a)), Some(Ok(b))) => Some(Ok((a, b))),
                    (Some(Err(e)), _) | (_, Some(Err(e))) => Some(Err(e)),
                    _ => Some(Err(Error::parse(
                        &name,
                        line,
                        "source and target files have different line counts",
                    ))),
                }
            })))
        }
        (None, None, Some(tsv)) => {
            let name = tsv.clone();
            Ok(Box::new(lines_of(tsv)?.enumerate().map(move |(no, line)| {
                let line = line?;
                match line.split_once('\t') {
                    Some((a, b)) if !b.contains('\t') => Ok((a.to_owned(), b.to_owned())),
                    _ => Err(Error::parse(&name, no + 1, "expected exactly two tab-separated columns")),
                }
            })))
        }
        _ => Err(Error::Invalid("input needs either source and target, or tsv".into())),
    }
}

/// Converts sampled constraints to lemma form.
pub fn lemmatize_constraints(constraints: &[ConstraintSpec], lemmatizer: &Lemmatizer) -> Result<Vec<ConstraintSpec>> {
    constraints
        .iter()
        .map(|c| c.map_tokens(Mode::Lemma, |t| lemmatizer.lemmatize_word(t)))
        .collect()
}

/// Source of constraints for the annotation stage.
pub enum ConstraintSource<'a> {
    Sampled {
        cfg: &'a SamplerConfig,
        lengths: &'a TriangularLengths,
        pool: &'a NgramPool,
    },
    TermBase {
        tb: &'a TermBase,
        policy: VariantPolicy,
    },
}

/// Constraints and annotated source line of one pair.
pub fn prepare_line(
    pair: &SentencePair,
    constraints: &ConstraintSource<'_>,
    annotation: &AnnotationConfig,
    lemmatizer: &Lemmatizer,
) -> Result<(Vec<ConstraintSpec>, String)> {
    let constraints = match constraints {
        ConstraintSource::Sampled { cfg, lengths, pool } => {
            let sampled = sample_sentence(pair.target.surface(), pair.line_index, cfg, lengths, pool)?;
            match annotation.mode {
                Mode::Surface => sampled,
                Mode::Lemma => lemmatize_constraints(&sampled, lemmatizer)?,
            }
        }
        ConstraintSource::TermBase { tb, policy } => {
            let matches = tb.find_matches(&pair.source, lemmatizer);
            matches_to_constraints(&matches, tb, annotation.mode, *policy)?
        }
    };
    let annotated = annotate(&pair.source, &constraints, annotation, pair.line_index)?;
    Ok((constraints, annotated.to_line()))
}

fn stage_error(stage: &'static str, shard: usize, first: u64, last: u64) -> impl FnOnce(Error) -> Error {
    move |e| Error::Stage {
        stage,
        shard,
        first,
        last,
        source: Box::new(e),
    }
}

/// Runs clean, pool, sample and annotate as configured. `config_bytes` is
/// hashed into the manifest. Parallelism comes from the ambient rayon pool.
pub fn run_pipeline(cfg: &PipelineConfig, config_bytes: &[u8]) -> Result<Manifest> {
    cfg.validate()?;
    let lemmatizer = Lemmatizer::load(&cfg.lemma.spec()?)?;
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let shard_size = cfg.shard_size.max(1);
    let tokenizer = cfg.input.tokenizer;

    // Clean, writing the kept corpus and feeding the n-gram pool in order.
    let build_pool = cfg.termbase.is_none() && cfg.pool.path.is_none();
    let mut pool_builder = build_pool
        .then(|| NgramPoolBuilder::new(cfg.pool.max_len, cfg.pool.reservoir_size, cfg.pool.seed))
        .transpose()?;
    let mut cleaner = Cleaner::new(cfg.clean.clone())?;
    {
        let mut src_out = create(&dir.join(CLEAN_SOURCE))?;
        let mut tgt_out = create(&dir.join(CLEAN_TARGET))?;
        let mut raw = raw_pairs(&cfg.input)?.peekable();
        let mut first = 0u64;
        let mut shard_no = 0usize;
        while raw.peek().is_some() {
            let lines: Vec<(String, String)> = raw.by_ref().take(shard_size).collect::<Result<_>>()?;
            let last = first + lines.len() as u64;
            let pairs: Vec<SentencePair> = lines
                .par_iter()
                .enumerate()
                .map(|(i, (s, t))| SentencePair {
                    source: tokenizer.tokenize(s),
                    target: tokenizer.tokenize(t),
                    line_index: first + i as u64,
                })
                .collect();
            let verdicts = cleaner.check_shard(&pairs);
            let write = || -> Result<()> {
                for (pair, verdict) in pairs.iter().zip(verdicts) {
                    if verdict != Verdict::Keep {
                        continue;
                    }
                    writeln!(src_out, "{}", detokenize(&pair.source))?;
                    writeln!(tgt_out, "{}", detokenize(&pair.target))?;
                    if let Some(builder) = pool_builder.as_mut() {
                        builder.push(pair.target.surface());
                    }
                }
                Ok(())
            };
            write().map_err(stage_error("clean", shard_no, first, last))?;
            first = last;
            shard_no += 1;
        }
        src_out.flush()?;
        tgt_out.flush()?;
    }

    let mut outputs = vec![CLEAN_SOURCE.to_owned(), CLEAN_TARGET.to_owned()];
    let pool = match (&cfg.pool.path, pool_builder) {
        (Some(path), _) => Some(NgramPool::load(path)?),
        (None, Some(builder)) => {
            let pool = builder.finish();
            pool.save(&dir.join(POOL_FILE))?;
            outputs.push(POOL_FILE.to_owned());
            Some(pool)
        }
        (None, None) => None,
    };
    let termbase = cfg
        .termbase
        .as_ref()
        .map(|t| TermBase::load(&t.path, &lemmatizer))
        .transpose()?;
    let lengths = cfg.sample.decoy_lengths();
    let source = match (&termbase, &pool) {
        (Some(tb), _) => ConstraintSource::TermBase {
            tb,
            policy: if cfg.termbase.as_ref().is_some_and(|t| t.all_variants) {
                VariantPolicy::All
            } else {
                VariantPolicy::FirstOnly
            },
        },
        (None, Some(pool)) => ConstraintSource::Sampled {
            cfg: &cfg.sample,
            lengths: &lengths,
            pool,
        },
        (None, None) => unreachable!("pool is built whenever no term base is configured"),
    };

    // Sample (or match) and annotate the cleaned corpus.
    let mut stats = AnnotateStats::default();
    {
        let mut constraints_out = create(&dir.join(CONSTRAINTS_FILE))?;
        let mut annotated_out = create(&dir.join(ANNOTATED_SOURCE))?;
        let cleaned = lines_of(&dir.join(CLEAN_SOURCE))?
            .zip(lines_of(&dir.join(CLEAN_TARGET))?)
            .map(|(s, t)| Ok((s?, t?)));
        for_each_shard(
            cleaned,
            shard_size,
            |index, (s, t)| {
                let pair = SentencePair {
                    source: crate::model::tokenize(s),
                    target: crate::model::tokenize(t),
                    line_index: index,
                };
                let (constraints, line) = prepare_line(&pair, &source, &cfg.annotate, &lemmatizer)?;
                let sidecar = format_sidecar_line(index, &constraints)?;
                let variants = constraints.iter().map(|c| c.variants().len() as u64).sum::<u64>();
                Ok((sidecar, line, constraints.len() as u64, variants))
            },
            |_, results| {
                for (sidecar, line, count, variants) in results {
                    writeln!(constraints_out, "{sidecar}")?;
                    writeln!(annotated_out, "{line}")?;
                    stats.sentences += 1;
                    stats.with_constraints += u64::from(count > 0);
                    stats.constraints += count;
                    stats.variants += variants;
                }
                Ok(())
            },
        )?;
        constraints_out.flush()?;
        annotated_out.flush()?;
    }
    outputs.extend([CONSTRAINTS_FILE.to_owned(), ANNOTATED_SOURCE.to_owned()]);

    let manifest = Manifest {
        config_sha256: Sha256::digest(config_bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect(),
        sampler_seed: cfg.sample.seed,
        pool_seed: cfg.pool.seed,
        clean: cleaner.stats(),
        pool: pool.as_ref().map(|p| PoolStats {
            lengths: p.lengths().map(|len| (len, p.count(len), p.get(len).len())).collect(),
        }),
        annotate: stats,
        outputs,
    };
    let path = dir.join(MANIFEST_FILE);
    let mut out = create(&path)?;
    serde_json::to_writer_pretty(&mut out, &manifest).map_err(|e| Error::Invalid(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(manifest)
}

/// Loads and runs a pipeline config file. Relative paths in the config are
/// resolved against the config file's directory.
pub fn run_pipeline_file(path: &Path) -> Result<Manifest> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Error::parse(path, 0, "config is not UTF-8"))?;
    let mut cfg = PipelineConfig::parse(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    for p in [&mut cfg.input.source, &mut cfg.input.target, &mut cfg.input.tsv, &mut cfg.pool.path]
        .into_iter()
        .flatten()
    {
        resolve(p);
    }
    resolve(&mut cfg.output.dir);
    if let Some(tb) = cfg.termbase.as_mut() {
        resolve(&mut tb.path);
    }
    if let Some(dict) = cfg.lemma.lemmatizer.strip_prefix("dict:") {
        let mut p = PathBuf::from(dict);
        resolve(&mut p);
        cfg.lemma.lemmatizer = format!("dict:{}", p.display());
    }
    run_pipeline(&cfg, text.as_bytes())
}

/// Tokenized sentence pairs of a cleaned corpus, for callers that want the
/// in-memory form.
pub fn read_pairs(source: &Path, target: &Path) -> Result<Vec<SentencePair>> {
    crate::model::PairReader::open_split(source, target)?.collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tokenize;

    fn pair(i: u64, s: &str, t: &str) -> SentencePair {
        SentencePair {
            source: tokenize(s),
            target: tokenize(t),
            line_index: i,
        }
    }

    #[test]
    fn drops_duplicates_keeping_the_first() {
        let pairs = vec![pair(0, "a b", "c d"), pair(1, "x", "y"), pair(2, "a  b", "c d")];
        let (kept, stats) = clean(pairs, &FilterConfig::default()).unwrap();
        assert_eq!(kept.iter().map(|p| p.line_index).collect::<Vec<_>>(), [0, 1]);
        assert_eq!(stats.dropped_duplicate, 1);
        assert_eq!(stats.total, 3);
    }

    #[test]
    fn drops_length_and_ratio_violations() {
        let long = vec!["w"; 20].join(" ");
        let huge = vec!["w"; 101].join(" ");
        let pairs = vec![
            pair(0, "one", &long),
            pair(1, "", "x"),
            pair(2, &huge, &huge),
            pair(3, "a b", "c d e"),
        ];
        let (kept, stats) = clean(pairs, &FilterConfig::default()).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!((stats.dropped_ratio, stats.dropped_length, stats.kept), (1, 2, 1));
    }

    #[test]
    fn dedup_can_be_disabled_and_predicate_applies() {
        let cfg = FilterConfig {
            dedup: false,
            ..Default::default()
        };
        let pairs = || vec![pair(0, "a", "b"), pair(1, "a", "b"), pair(2, "skip", "me")];
        let (kept, _) = clean(pairs(), &cfg).unwrap();
        assert_eq!(kept.len(), 3);
        let mut cleaner = Cleaner::new(cfg)
            .unwrap()
            .with_predicate(Box::new(|p: &SentencePair| p.source.surface()[0] != "skip"));
        let verdicts = cleaner.check_shard(&pairs());
        assert_eq!(verdicts, [Verdict::Keep, Verdict::Keep, Verdict::Predicate]);
        assert_eq!(cleaner.stats().dropped_predicate, 1);
    }

    #[test]
    fn clean_is_idempotent() {
        let pairs: Vec<SentencePair> = (0..300)
            .map(|i| pair(i, &"s ".repeat((i % 13) as usize), &"t ".repeat((i % 7) as usize * 3 + (i % 2) as usize)))
            .collect();
        let cfg = FilterConfig {
            max_ratio: 3.0,
            max_tokens: 10,
            ..Default::default()
        };
        let (once, _) = clean(pairs, &cfg).unwrap();
        let (twice, stats) = clean(once.clone(), &cfg).unwrap();
        assert_eq!(once, twice);
        assert_eq!(stats.kept, stats.total);
    }

    #[test]
    fn invalid_filter_config() {
        assert!(FilterConfig { min_tokens: 5, max_tokens: 2, ..Default::default() }.validate().is_err());
        assert!(FilterConfig { max_ratio: 0.5, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn shards_preserve_order() {
        let items = (0..1000u64).map(Ok);
        let mut seen = Vec::new();
        for_each_shard(items, 7, |i, x| Ok(i * 1000 + x), |_, r| {
            seen.extend(r);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, (0..1000).map(|i| i * 1001).collect::<Vec<_>>());
    }

    #[test]
    fn shard_failure_names_the_range() {
        let items = (0..25u64).map(Ok);
        let err = for_each_shard(
            items,
            10,
            |i, _| if i == 13 { Err(Error::Invalid("boom".into())) } else { Ok(()) },
            |_, _| Ok(()),
        )
        .unwrap_err();
        assert_eq!(
            err.to_string(),
            "pipeline stage map failed on shard 1 (lines 10..20): invalid value: boom"
        );
    }

    #[test]
    fn config_parsing_and_validation() {
        let cfg = PipelineConfig::parse(
            r#"
            shard_size = 500
            [input]
            tsv = "/definitely/missing.tsv"
            [output]
            dir = "/tmp/out"
            [sample]
            s = 0.2
            seed = 7
            [annotate]
            scheme = "suffix"
            mode = "lemma"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.sample.s, 0.2);
        assert_eq!(cfg.sample.e, 0.75);
        assert_eq!(cfg.annotate.mode, Mode::Lemma);
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("does not exist"), "{err}");
        assert!(PipelineConfig::parse("[input]\nbogus = 1\n[output]\ndir='x'").is_err());
    }
}
