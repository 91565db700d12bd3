use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use termprep::annotate::{annotate, AnnotationConfig, Scheme};
use termprep::combine::{combine, parse_system_spec, Fallback, SystemOutput};
use termprep::lemma::{Lemmatizer, LemmatizerSpec};
use termprep::metrics::{evaluate, EmCounting, EvalConfig, EvalInstance, MetricReport, WindowNorm};
use termprep::model::{
    detokenize, format_sidecar_line, read_sidecar_path, ConstraintSpec, Mode, SentencePair, Tokenizer,
};
use termprep::pipeline::{for_each_shard, lemmatize_constraints, run_pipeline_file, Cleaner, FilterConfig, Verdict};
use termprep::sampler::{build_ngram_pool, sample_sentence, NgramPool, SamplerConfig};
use termprep::termbase::{matches_to_constraints, TermBase, VariantPolicy};

const SHARD: usize = 10_000;

#[derive(Parser)]
#[command(name = "termprep", version, about = "Terminology-constrained MT data preparation and evaluation")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// `identity` or `dict:<path>` (TSV word<TAB>lemma).
    #[arg(long, global = true, default_value = "identity")]
    lemmatizer: String,
    /// Do not lowercase words before lemma lookup.
    #[arg(long, global = true)]
    case_sensitive_lemmas: bool,
    /// `whitespace` or `split-punct`.
    #[arg(long, global = true, default_value = "whitespace")]
    tokenizer: Tokenizer,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Length/ratio filtering and deduplication of a parallel corpus.
    Clean(CleanArgs),
    /// Builds the reservoir-sampled n-gram pool used for decoy variants.
    NgramPool(PoolArgs),
    /// Samples constraints from target sentences into a sidecar file.
    Sample(SampleArgs),
    /// Annotates source sentences with constraints.
    Annotate(AnnotateArgs),
    /// Finds term-base matches in source sentences.
    Match(MatchArgs),
    /// Scores hypotheses with BLEU, exact match, window overlap and 1-TERm.
    Evaluate(EvaluateArgs),
    /// Picks, per line, the best-ranked system output containing all terms.
    Combine(CombineArgs),
    /// Runs clean, pool, sample and annotate from a TOML config.
    Pipeline { config: PathBuf },
}

#[derive(Args)]
struct CleanArgs {
    #[arg(long, requires = "tgt")]
    src: Option<PathBuf>,
    #[arg(long, requires = "src")]
    tgt: Option<PathBuf>,
    /// Tab-separated source/target input (stdin when no input is given).
    #[arg(long, conflicts_with_all = ["src", "tgt"])]
    tsv: Option<PathBuf>,
    #[arg(long, requires = "out_tgt")]
    out_src: Option<PathBuf>,
    #[arg(long, requires = "out_src")]
    out_tgt: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    min_tokens: usize,
    #[arg(long, default_value_t = 100)]
    max_tokens: usize,
    #[arg(long, default_value_t = 9.0)]
    max_ratio: f64,
    #[arg(long)]
    no_dedup: bool,
}

#[derive(Args)]
struct PoolArgs {
    /// Target sentences (stdin when omitted).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 9)]
    max_len: usize,
    #[arg(long, default_value_t = 10_000)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SampleArgs {
    /// Target sentences (stdin when omitted).
    #[arg(long)]
    tgt: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    pool: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    s: f64,
    #[arg(long, default_value_t = 0.75)]
    e: f64,
    #[arg(long, default_value_t = 0.1)]
    n: f64,
    #[arg(long, default_value_t = 0.1)]
    v: f64,
    #[arg(long, default_value_t = 0.9)]
    l: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    shuffle_variants: bool,
    /// Write lemmatized constraints.
    #[arg(long, default_value = "surface")]
    mode: Mode,
}

#[derive(Args)]
struct AnnotateArgs {
    /// Source sentences (stdin when omitted).
    #[arg(long)]
    src: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Constraint sidecar from `sample`.
    #[arg(long, conflicts_with = "termbase", required_unless_present = "termbase")]
    constraints: Option<PathBuf>,
    /// Match this term base inline instead of reading a sidecar.
    #[arg(long)]
    termbase: Option<PathBuf>,
    #[arg(long, default_value = "first")]
    variants: VariantPolicy,
    #[arg(long, default_value = "suffix")]
    scheme: Scheme,
    #[arg(long, default_value = "surface")]
    mode: Mode,
    #[arg(long, default_value = "<sep>")]
    sep: String,
    #[arg(long, default_value = "<c>")]
    cdelim: String,
    #[arg(long, default_value = "<v>")]
    vdelim: String,
}

#[derive(Args)]
struct MatchArgs {
    #[arg(long)]
    termbase: PathBuf,
    /// Source sentences (stdin when omitted).
    #[arg(long)]
    src: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CountingArg {
    PerOccurrence,
    PerUniqueTerm,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    Reference,
    Larger,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    hyp: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Per-line expected terms sidecar.
    #[arg(long)]
    terms: PathBuf,
    /// JSON report path (stdout when omitted).
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "per-occurrence")]
    em_counting: CountingArg,
    #[arg(long, value_enum, default_value = "reference")]
    window_norm: NormArg,
    #[arg(long, default_value_t = 2.0)]
    term_weight: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum FallbackArg {
    Baseline,
    MostTerms,
}

#[derive(Args)]
struct CombineArgs {
    /// `id=path:bleu`, comma-separated or repeated.
    #[arg(long, value_delimiter = ',', required = true)]
    systems: Vec<String>,
    #[arg(long)]
    baseline: String,
    #[arg(long)]
    terms: PathBuf,
    /// Chosen translations (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    /// `line<TAB>system_id` file.
    #[arg(long)]
    provenance: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "baseline")]
    fallback: FallbackArg,
}

fn reader(path: Option<&Path>) -> Result<Box<dyn BufRead + Send>> {
    Ok(match path {
        Some(p) => Box::new(BufReader::with_capacity(
            1 << 20,
            File::open(p).with_context(|| format!("opening {}", p.display()))?,
        )),
        None => Box::new(BufReader::new(io::stdin())),
    })
}

fn writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::with_capacity(
            1 << 20,
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Maps input lines to output lines in parallel, preserving order.
fn map_lines<F>(input: Box<dyn BufRead + Send>, out: &mut dyn Write, f: F) -> Result<()>
where
    F: Fn(u64, &str) -> termprep::Result<String> + Sync,
{
    let lines = input.lines().map(|l| l.map_err(termprep::Error::from));
    for_each_shard(lines, SHARD, |i, line: &String| f(i, line), |_, results| {
        for r in results {
            writeln!(out, "{r}")?;
        }
        Ok(())
    })?;
    out.flush()?;
    Ok(())
}

fn lemmatizer(cli: &Cli) -> Result<Lemmatizer> {
    let mut spec = LemmatizerSpec::parse(&cli.lemmatizer)?;
    if cli.case_sensitive_lemmas {
        spec = spec.case_sensitive();
    }
    Ok(Lemmatizer::load(&spec)?)
}

fn read_lines(path: &Path, tokenizer: Tokenizer) -> Result<Vec<termprep::model::TokenizedSentence>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(|l| tokenizer.tokenize(l)).collect())
}

fn run_clean(cli: &Cli, args: &CleanArgs) -> Result<()> {
    let cfg = FilterConfig {
        min_tokens: args.min_tokens,
        max_tokens: args.max_tokens,
        max_ratio: args.max_ratio,
        dedup: !args.no_dedup,
    };
    let mut cleaner = Cleaner::new(cfg)?;
    let raw: Box<dyn Iterator<Item = termprep::Result<(String, String)>>> = match (&args.src, &args.tgt) {
        (Some(s), Some(t)) => {
            let src = reader(Some(s))?.lines();
            let mut tgt = reader(Some(t))?.lines();
            let mut src = src.fuse();
            Box::new(std::iter::from_fn(move || match (src.next(), tgt.next()) {
                (None, None) => None,
                (Some(Ok(a)), Some(Ok(b))) => Some(Ok((a, b))),
                (Some(Err(e)), _) | (_, Some(Err(e))) => Some(Err(e.into())),
                _ => Some(Err(termprep::Error::LengthMismatch(
                    "source and target have different line counts".into(),
                ))),
            }))
        }
        _ => Box::new(reader(args.tsv.as_deref())?.lines().enumerate().map(|(no, l)| {
            let l = l?;
            match l.split_once('\t') {
                Some((a, b)) if !b.contains('\t') => Ok((a.to_owned(), b.to_owned())),
                _ => Err(termprep::Error::Invalid(format!(
                    "line {}: expected exactly two tab-separated columns",
                    no + 1
                ))),
            }
        })),
    };
    let mut split_out = match (&args.out_src, &args.out_tgt) {
        (Some(s), Some(t)) => Some((writer(Some(s))?, writer(Some(t))?)),
        _ => None,
    };
    let mut tsv_out = if split_out.is_none() { Some(writer(None)?) } else { None };
    let tokenizer = cli.tokenizer;
    for_each_shard(
        raw.enumerate().map(|(i, r)| r.map(|p| (i as u64, p))),
        SHARD,
        |_, (i, (s, t))| {
            Ok(SentencePair {
                source: tokenizer.tokenize(s),
                target: tokenizer.tokenize(t),
                line_index: *i,
            })
        },
        |_, pairs| {
            let verdicts = cleaner.check_shard(&pairs);
            for (pair, verdict) in pairs.iter().zip(verdicts) {
                if verdict != Verdict::Keep {
                    continue;
                }
                let (s, t) = (detokenize(&pair.source), detokenize(&pair.target));
                match (&mut split_out, &mut tsv_out) {
                    (Some((so, to)), _) => {
                        writeln!(so, "{s}")?;
                        writeln!(to, "{t}")?;
                    }
                    (None, Some(out)) => writeln!(out, "{s}\t{t}")?,
                    (None, None) => unreachable!(),
                }
            }
            Ok(())
        },
    )?;
    if let Some((mut s, mut t)) = split_out {
        s.flush()?;
        t.flush()?;
    }
    if let Some(mut out) = tsv_out {
        out.flush()?;
    }
    eprintln!("{}", serde_json::to_string(&cleaner.stats())?);
    Ok(())
}

fn run_pool(cli: &Cli, args: &PoolArgs) -> Result<()> {
    let sentences: Vec<_> = reader(args.input.as_deref())?
        .lines()
        .map(|l| l.map(|l| cli.tokenizer.tokenize(&l).into_surface()))
        .collect::<io::Result<_>>()?;
    let pool = build_ngram_pool(sentences.iter().map(Vec::as_slice), args.max_len, args.size, args.seed)?;
    let mut out = writer(args.output.as_deref())?;
    pool.write(&mut out)?;
    out.flush()?;
    Ok(())
}

fn run_sample(cli: &Cli, args: &SampleArgs) -> Result<()> {
    let cfg = SamplerConfig {
        s: args.s,
        e: args.e,
        n: args.n,
        v: args.v,
        l: args.l,
        seed: args.seed,
        shuffle_variants: args.shuffle_variants,
        ..SamplerConfig::default()
    };
    cfg.validate()?;
    let lengths = cfg.decoy_lengths();
    let pool = NgramPool::load(&args.pool)?;
    let lem = lemmatizer(cli)?;
    let mut out = writer(args.output.as_deref())?;
    map_lines(reader(args.tgt.as_deref())?, &mut out, |i, line| {
        let target = cli.tokenizer.tokenize(line);
        let mut constraints = sample_sentence(target.surface(), i, &cfg, &lengths, &pool)?;
        if args.mode == Mode::Lemma {
            constraints = lemmatize_constraints(&constraints, &lem)?;
        }
        format_sidecar_line(i, &constraints)
    })
}

fn run_annotate(cli: &Cli, args: &AnnotateArgs) -> Result<()> {
    let cfg = AnnotationConfig {
        scheme: args.scheme,
        sep_token: args.sep.clone(),
        constraint_delim: args.cdelim.clone(),
        variant_delim: args.vdelim.clone(),
        mode: args.mode,
    };
    cfg.validate()?;
    let lem = lemmatizer(cli)?;
    let sidecar: BTreeMap<u64, Vec<ConstraintSpec>> = match &args.constraints {
        Some(path) => read_sidecar_path(path, args.mode)?,
        None => BTreeMap::new(),
    };
    let termbase = args.termbase.as_deref().map(|p| TermBase::load(p, &lem)).transpose()?;
    let none = Vec::new();
    let mut out = writer(args.output.as_deref())?;
    map_lines(reader(args.src.as_deref())?, &mut out, |i, line| {
        let source = cli.tokenizer.tokenize(line);
        let matched;
        let constraints = match &termbase {
            Some(tb) => {
                matched = matches_to_constraints(&tb.find_matches(&source, &lem), tb, args.mode, args.variants)?;
                &matched
            }
            None => sidecar.get(&i).unwrap_or(&none),
        };
        Ok(annotate(&source, constraints, &cfg, i)?.to_line())
    })
}

fn run_match(cli: &Cli, args: &MatchArgs) -> Result<()> {
    let lem = lemmatizer(cli)?;
    let tb = TermBase::load(&args.termbase, &lem)?;
    let mut out = writer(args.output.as_deref())?;
    let input = reader(args.src.as_deref())?;
    let lines = input.lines().map(|l| l.map_err(termprep::Error::from));
    for_each_shard(
        lines,
        SHARD,
        |i, line: &String| Ok((i, tb.find_matches(&cli.tokenizer.tokenize(line), &lem))),
        |_, results| {
            for (i, matches) in results {
                for m in matches {
                    let span = format!("{}:{}", m.span.start, m.span.end);
                    writeln!(out, "{i}\t{}\t{span}\t{}", m.entry_index, m.level)?;
                }
            }
            Ok(())
        },
    )?;
    out.flush()?;
    Ok(())
}

fn run_evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<()> {
    let lem = lemmatizer(cli)?;
    let sources = read_lines(&args.src, cli.tokenizer)?;
    let hyps = read_lines(&args.hyp, cli.tokenizer)?;
    let refs = read_lines(&args.reference, cli.tokenizer)?;
    if sources.len() != hyps.len() || hyps.len() != refs.len() {
        bail!(
            "line counts differ: src {}, hyp {}, ref {}",
            sources.len(),
            hyps.len(),
            refs.len()
        );
    }
    let mut terms = read_sidecar_path(&args.terms, Mode::Surface)?;
    if let Some((&line, _)) = terms.range(hyps.len() as u64..).next() {
        bail!("terms given for line {line} but the corpus has {} lines", hyps.len());
    }
    let instances: Vec<EvalInstance> = sources
        .into_iter()
        .zip(hyps)
        .zip(refs)
        .enumerate()
        .map(|(i, ((source, hypothesis), reference))| EvalInstance {
            source,
            hypothesis,
            reference,
            expected_terms: terms.remove(&(i as u64)).unwrap_or_default(),
        })
        .collect();
    let mut cfg = EvalConfig::default();
    cfg.weights.term_weight = args.term_weight;
    cfg.em_counting = match args.em_counting {
        CountingArg::PerOccurrence => EmCounting::PerOccurrence,
        CountingArg::PerUniqueTerm => EmCounting::PerUniqueTerm,
    };
    cfg.window_norm = match args.window_norm {
        NormArg::Reference => WindowNorm::Reference,
        NormArg::Larger => WindowNorm::Larger,
    };
    let report = evaluate(&instances, &cfg, &lem)?;
    let mut out = writer(args.report.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    out.flush()?;
    if args.report.is_some() {
        println!("{}\n{}", MetricReport::TABLE_HEADER, report.table_row());
    }
    Ok(())
}

fn run_combine(cli: &Cli, args: &CombineArgs) -> Result<()> {
    let lem = lemmatizer(cli)?;
    let systems = args
        .systems
        .iter()
        .map(|spec| {
            let (system_id, path, validation_bleu) = parse_system_spec(spec)?;
            Ok(SystemOutput {
                system_id,
                validation_bleu,
                translations: read_lines(&path, cli.tokenizer)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let terms = read_sidecar_path(&args.terms, Mode::Surface)?;
    let fallback = match args.fallback {
        FallbackArg::Baseline => Fallback::Baseline,
        FallbackArg::MostTerms => Fallback::MostTermsCovered,
    };
    let choices = combine(&systems, &args.baseline, &terms, &lem, fallback)?;
    let mut out = writer(args.output.as_deref())?;
    for c in &choices {
        writeln!(out, "{}", detokenize(&c.translation))?;
    }
    out.flush()?;
    if let Some(path) = &args.provenance {
        let mut prov = writer(Some(path))?;
        for (line, c) in choices.iter().enumerate() {
            writeln!(prov, "{line}\t{}", c.system_id)?;
        }
        prov.flush()?;
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    match &cli.command {
        Command::Clean(args) => run_clean(&cli, args),
        Command::NgramPool(args) => run_pool(&cli, args),
        Command::Sample(args) => run_sample(&cli, args),
        Command::Annotate(args) => run_annotate(&cli, args),
        Command::Match(args) => run_match(&cli, args),
        Command::Evaluate(args) => run_evaluate(&cli, args),
        Command::Combine(args) => run_combine(&cli, args),
        Command::Pipeline { config } => {
            let manifest = run_pipeline_file(config)?;
            eprintln!("{}", serde_json::to_string(&manifest.clean)?);
            Ok(())
        }
    }
}
