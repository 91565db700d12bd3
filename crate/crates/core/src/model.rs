//! Shared domain types, whitespace tokenization and corpus readers.
//!
//! Everything downstream works on whitespace tokens. Input text is NFC
//! normalized when it is tokenized so that accented French forms compare
//! equal regardless of how they were encoded.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Lines, Read};
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// A token sequence.
pub type Tokens = Vec<String>;

/// Surface tokens with an optional parallel lemma sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TokenizedSentence {
    surface: Tokens,
    lemmas: Option<Tokens>,
}

impl TokenizedSentence {
    /// Builds a sentence from pre-split tokens, rejecting empty tokens and
    /// tokens with internal whitespace.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let surface: Tokens = tokens.into_iter().map(Into::into).collect();
        check_tokens(&surface)?;
        Ok(Self {
            surface,
            lemmas: None,
        })
    }

    pub fn with_lemmas(self, lemmas: Tokens) -> Result<Self> {
        if lemmas.len() != self.surface.len() {
            return Err(Error::Invalid(format!(
                "{} lemmas for {} tokens",
                lemmas.len(),
                self.surface.len()
            )));
        }
        check_tokens(&lemmas)?;
        Ok(Self {
            surface: self.surface,
            lemmas: Some(lemmas),
        })
    }

    pub fn surface(&self) -> &[String] {
        &self.surface
    }

    pub fn lemmas(&self) -> Option<&[String]> {
        self.lemmas.as_deref()
    }

    pub fn len(&self) -> usize {
        self.surface.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surface.is_empty()
    }

    pub fn into_surface(self) -> Tokens {
        self.surface
    }
}

fn check_tokens(tokens: &[String]) -> Result<()> {
    for token in tokens {
        if token.is_empty() {
            return Err(Error::Invalid("empty token".into()));
        }
        if token.chars().any(char::is_whitespace) {
            return Err(Error::Invalid(format!("token {token:?} contains whitespace")));
        }
    }
    Ok(())
}

/// Splits one line on unicode whitespace after NFC normalization.
pub fn tokenize(text: &str) -> TokenizedSentence {
    let normalized: String = text.nfc().collect();
    TokenizedSentence {
        surface: normalized.split_whitespace().map(str::to_owned).collect(),
        lemmas: None,
    }
}

/// Whitespace split followed by peeling punctuation and symbols off both ends
/// of every token, so `fever?` becomes `fever ?`. Inner punctuation stays
/// (`SARS-CoV`, `2018-2019`).
pub fn tokenize_split_punct(text: &str) -> TokenizedSentence {
    let normalized: String = text.nfc().collect();
    let mut surface = Vec::new();
    for word in normalized.split_whitespace() {
        let is_punct = |c: char| !c.is_alphanumeric();
        let core_start = word.find(|c: char| !is_punct(c));
        let Some(start) = core_start else {
            surface.extend(word.chars().map(String::from));
            continue;
        };
        let end = word
            .char_indices()
            .rev()
            .find(|(_, c)| !is_punct(*c))
            .map(|(i, c)| i + c.len_utf8())
            .expect("word has a non-punctuation char");
        surface.extend(word[..start].chars().map(String::from));
        surface.push(word[start..end].to_owned());
        surface.extend(word[end..].chars().map(String::from));
    }
    TokenizedSentence {
        surface,
        lemmas: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tokenizer {
    #[default]
    Whitespace,
    SplitPunct,
}

impl Tokenizer {
    pub fn tokenize(self, text: &str) -> TokenizedSentence {
        match self {
            Tokenizer::Whitespace => tokenize(text),
            Tokenizer::SplitPunct => tokenize_split_punct(text),
        }
    }
}

impl std::str::FromStr for Tokenizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whitespace" => Ok(Tokenizer::Whitespace),
            "split-punct" => Ok(Tokenizer::SplitPunct),
            other => Err(Error::Invalid(format!("unknown tokenizer {other:?}"))),
        }
    }
}

pub fn detokenize(sentence: &TokenizedSentence) -> String {
    sentence.surface.join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    pub source: TokenizedSentence,
    pub target: TokenizedSentence,
    pub line_index: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    SampledFromTarget,
    TermBaseMatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Surface,
    Lemma,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "surface" => Ok(Mode::Surface),
            "lemma" => Ok(Mode::Lemma),
            other => Err(Error::Invalid(format!("unknown mode {other:?}"))),
        }
    }
}

/// One constraint attached to a sentence. The first variant is the preferred
/// (or true) one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintSpec {
    variants: Vec<Tokens>,
    origin: Origin,
    mode: Mode,
    source_span: Option<Range<usize>>,
}

impl ConstraintSpec {
    pub fn new(
        variants: Vec<Tokens>,
        origin: Origin,
        mode: Mode,
        source_span: Option<Range<usize>>,
    ) -> Result<Self> {
        if variants.is_empty() {
            return Err(Error::Invalid("constraint without variants".into()));
        }
        let mut seen = HashSet::new();
        for variant in &variants {
            if variant.is_empty() {
                return Err(Error::Invalid("empty constraint variant".into()));
            }
            check_tokens(variant)?;
            if !seen.insert(variant) {
                return Err(Error::Invalid(format!(
                    "duplicate constraint variant {:?}",
                    variant.join(" ")
                )));
            }
        }
        match (&source_span, origin) {
            (Some(span), Origin::TermBaseMatch) if span.start < span.end => {}
            (Some(_), Origin::TermBaseMatch) => {
                return Err(Error::Invalid("empty source span".into()));
            }
            (None, Origin::SampledFromTarget) => {}
            (None, Origin::TermBaseMatch) => return Err(Error::MissingSpan),
            (Some(_), Origin::SampledFromTarget) => {
                return Err(Error::Invalid("sampled constraint with a source span".into()));
            }
        }
        Ok(Self {
            variants,
            origin,
            mode,
            source_span,
        })
    }

    /// A sampled constraint with a single variant.
    pub fn sampled(tokens: Tokens) -> Result<Self> {
        Self::new(vec![tokens], Origin::SampledFromTarget, Mode::Surface, None)
    }

    pub fn variants(&self) -> &[Tokens] {
        &self.variants
    }

    pub fn first_variant(&self) -> &[String] {
        &self.variants[0]
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn source_span(&self) -> Option<Range<usize>> {
        self.source_span.clone()
    }

    /// Appends a variant unless an identical one is already present.
    /// Returns whether it was added.
    pub fn push_variant(&mut self, variant: Tokens) -> Result<bool> {
        if variant.is_empty() {
            return Err(Error::Invalid("empty constraint variant".into()));
        }
        check_tokens(&variant)?;
        if self.variants.contains(&variant) {
            return Ok(false);
        }
        self.variants.push(variant);
        Ok(true)
    }

    pub(crate) fn variants_mut(&mut self) -> &mut [Tokens] {
        &mut self.variants
    }

    /// Maps every token of every variant, keeping the structure. Variants that
    /// collapse onto an earlier one are dropped.
    pub fn map_tokens(&self, mode: Mode, mut f: impl FnMut(&str) -> String) -> Result<Self> {
        let mut variants: Vec<Tokens> = Vec::with_capacity(self.variants.len());
        for variant in &self.variants {
            let mapped: Tokens = variant.iter().map(|t| f(t)).collect();
            if !variants.contains(&mapped) {
                variants.push(mapped);
            }
        }
        Self::new(variants, self.origin, mode, self.source_span.clone())
    }
}

/// A source sentence rewritten to carry its constraints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedSentence {
    pub source: TokenizedSentence,
    pub constraints: Vec<ConstraintSpec>,
    pub factors: Option<Vec<u8>>,
}

impl AnnotatedSentence {
    /// Plain-text form. Factored output is written as `token|factor`.
    pub fn to_line(&self) -> String {
        match &self.factors {
            None => detokenize(&self.source),
            Some(factors) => self
                .source
                .surface()
                .iter()
                .zip(factors)
                .map(|(token, factor)| format!("{token}|{factor}"))
                .collect::<Vec<_>>()
                .join(" "),
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

enum PairLines {
    Split {
        source: Lines<Box<dyn BufRead + Send>>,
        target: Lines<Box<dyn BufRead + Send>>,
    },
    Tsv(Lines<Box<dyn BufRead + Send>>),
}

/// Streams sentence pairs from two aligned files or one `source<TAB>target`
/// file. Line indices start at 0.
pub struct PairReader {
    lines: PairLines,
    name: PathBuf,
    next_index: u64,
}

impl PairReader {
    pub fn open_split(source: &Path, target: &Path) -> Result<Self> {
        Ok(Self::from_split(
            Box::new(open(source)?),
            Box::new(open(target)?),
            source.to_path_buf(),
        ))
    }

    pub fn open_tsv(path: &Path) -> Result<Self> {
        Ok(Self::from_tsv(Box::new(open(path)?), path.to_path_buf()))
    }

    pub fn from_split(
        source: Box<dyn BufRead + Send>,
        target: Box<dyn BufRead + Send>,
        name: PathBuf,
    ) -> Self {
        Self {
            lines: PairLines::Split {
                source: source.lines(),
                target: target.lines(),
            },
            name,
            next_index: 0,
        }
    }

    pub fn from_tsv(reader: Box<dyn BufRead + Send>, name: PathBuf) -> Self {
        Self {
            lines: PairLines::Tsv(reader.lines()),
            name,
            next_index: 0,
        }
    }

    fn line_no(&self) -> usize {
        self.next_index as usize + 1
    }
}

impl Iterator for PairReader {
    type Item = Result<SentencePair>;

    fn next(&mut self) -> Option<Self::Item> {
        let (source, target) = match &mut self.lines {
            PairLines::Split { source, target } => match (source.next(), target.next()) {
                (None, None) => return None,
                (Some(Err(e)), _) | (_, Some(Err(e))) => return Some(Err(Error::Stream(e))),
                (Some(Ok(s)), Some(Ok(t))) => (s, t),
                _ => {
                    let line = self.line_no();
                    return Some(Err(Error::parse(
                        &self.name,
                        line,
                        "source and target files have different line counts",
                    )));
                }
            },
            PairLines::Tsv(lines) => match lines.next()? {
                Err(e) => return Some(Err(Error::Stream(e))),
                Ok(line) => match line.split_once('\t') {
                    Some((s, t)) if !t.contains('\t') => (s.to_owned(), t.to_owned()),
                    _ => {
                        let line = self.line_no();
                        return Some(Err(Error::parse(
                            &self.name,
                            line,
                            "expected exactly two tab-separated columns",
                        )));
                    }
                },
            },
        };
        let pair = SentencePair {
            source: tokenize(&source),
            target: tokenize(&target),
            line_index: self.next_index,
        };
        self.next_index += 1;
        Some(Ok(pair))
    }
}

/// Reads a one-sentence-per-line file.
pub fn read_sentences(reader: impl Read) -> Result<Vec<TokenizedSentence>> {
    BufReader::new(reader)
        .lines()
        .map(|line| Ok(tokenize(&line?)))
        .collect()
}

pub fn read_sentences_path(path: &Path) -> Result<Vec<TokenizedSentence>> {
    read_sentences(File::open(path).map_err(|e| Error::io(path, e))?)
}

/// Per-line constraint sidecar: `line_index<TAB>v1|v2<TAB>...`, one column
/// per constraint, variants separated by `|`, tokens by spaces.
pub fn format_sidecar_line(line_index: u64, constraints: &[ConstraintSpec]) -> Result<String> {
    let mut out = line_index.to_string();
    for constraint in constraints {
        out.push('\t');
        for (i, variant) in constraint.variants().iter().enumerate() {
            if i > 0 {
                out.push('|');
            }
            if variant.iter().any(|t| t.contains('|')) {
                return Err(Error::Invalid(format!(
                    "line {line_index}: token containing '|' cannot be written to a sidecar"
                )));
            }
            out.push_str(&variant.join(" "));
        }
    }
    Ok(out)
}

/// Parses one sidecar line into its index and constraint variant groups.
pub fn parse_sidecar_line(line: &str) -> std::result::Result<(u64, Vec<Vec<Tokens>>), String> {
    let mut columns = line.split('\t');
    let index = columns
        .next()
        .unwrap_or_default()
        .trim()
        .parse::<u64>()
        .map_err(|e| format!("bad line index: {e}"))?;
    let mut groups = Vec::new();
    for column in columns {
        let variants: Vec<Tokens> = column
            .split('|')
            .map(|v| tokenize(v).into_surface())
            .collect();
        if variants.iter().any(Vec::is_empty) {
            return Err("empty variant".into());
        }
        groups.push(variants);
    }
    Ok((index, groups))
}

/// Reads a sidecar into a map from line index to constraints. Sidecar
/// constraints carry no source span, so they are typed as target-side.
pub fn read_sidecar(
    reader: impl Read,
    name: &Path,
    mode: Mode,
) -> Result<BTreeMap<u64, Vec<ConstraintSpec>>> {
    let mut out: BTreeMap<u64, Vec<ConstraintSpec>> = BTreeMap::new();
    for (no, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (index, groups) =
            parse_sidecar_line(&line).map_err(|m| Error::parse(name, no + 1, m))?;
        let entry = out.entry(index).or_default();
        for variants in groups {
            let spec = ConstraintSpec::new(variants, Origin::SampledFromTarget, mode, None)
                .map_err(|e| Error::parse(name, no + 1, e.to_string()))?;
            entry.push(spec);
        }
    }
    Ok(out)
}

pub fn read_sidecar_path(path: &Path, mode: Mode) -> Result<BTreeMap<u64, Vec<ConstraintSpec>>> {
    read_sidecar(File::open(path).map_err(|e| Error::io(path, e))?, path, mode)
}
