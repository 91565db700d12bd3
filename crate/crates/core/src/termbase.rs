//! Terminology database loading and source-side term spotting.
//!
//! Terms are found greedily left to right. At every position the longest
//! entry wins; at equal length a surface hit beats a lemma hit, and ties
//! after that go to the earlier entry in the file. Surface comparison is
//! exact (case-sensitive); lemma comparison uses the lemmatizer's
//! normalization, which lowercases by default.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::ops::Range;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lemma::Lemmatizer;
use crate::model::{tokenize, ConstraintSpec, Mode, Origin, TokenizedSentence, Tokens};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermEntry {
    pub source_term: Tokens,
    pub source_lemmas: Tokens,
    /// Target variants in term-base order.
    pub variants: Vec<Tokens>,
    pub variant_lemmas: Vec<Tokens>,
}

impl TermEntry {
    pub fn new(source_term: Tokens, variants: Vec<Tokens>, lemmatizer: &Lemmatizer) -> Result<Self> {
        if source_term.is_empty() {
            return Err(Error::Invalid("empty source term".into()));
        }
        if variants.is_empty() || variants.iter().any(Vec::is_empty) {
            return Err(Error::Invalid("term entry needs non-empty target variants".into()));
        }
        let mut unique: Vec<Tokens> = Vec::with_capacity(variants.len());
        for variant in variants {
            if !unique.contains(&variant) {
                unique.push(variant);
            }
        }
        Ok(Self {
            source_lemmas: lemmatizer.lemmatize_tokens(&source_term),
            variant_lemmas: unique.iter().map(|v| lemmatizer.lemmatize_tokens(v)).collect(),
            source_term,
            variants: unique,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct TermBase {
    entries: Vec<TermEntry>,
    index: HashMap<String, Vec<usize>>,
}

impl TermBase {
    pub fn from_entries(entries: Vec<TermEntry>) -> Self {
        let mut index: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, entry) in entries.iter().enumerate() {
            index.entry(entry.source_lemmas[0].clone()).or_default().push(i);
        }
        Self { entries, index }
    }

    /// Parses the TSV format: column 1 is the source term, columns 2.. are
    /// target variants in priority order.
    pub fn parse(reader: impl Read, name: &Path, lemmatizer: &Lemmatizer) -> Result<Self> {
        let mut entries = Vec::new();
        for (no, line) in BufReader::new(reader).lines().enumerate() {
            let line = line.map_err(|e| Error::io(name, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut columns = line.split('\t');
            let source = tokenize(columns.next().unwrap_or_default()).into_surface();
            let variants: Vec<Tokens> = columns.map(|c| tokenize(c).into_surface()).collect();
            if source.is_empty() {
                return Err(Error::parse(name, no + 1, "empty source term"));
            }
            if variants.is_empty() {
                return Err(Error::parse(name, no + 1, "missing target column"));
            }
            if variants.iter().any(Vec::is_empty) {
                return Err(Error::parse(name, no + 1, "empty target variant"));
            }
            entries.push(
                TermEntry::new(source, variants, lemmatizer)
                    .map_err(|e| Error::parse(name, no + 1, e.to_string()))?,
            );
        }
        Ok(Self::from_entries(entries))
    }

    pub fn load(path: &Path, lemmatizer: &Lemmatizer) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(file, path, lemmatizer)
    }

    pub fn entries(&self) -> &[TermEntry] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> Option<&TermEntry> {
        self.entries.get(index)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry indices whose source term starts with `lemma`.
    pub fn candidates(&self, lemma: &str) -> &[usize] {
        self.index.get(lemma).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Finds non-overlapping term occurrences. Missing sentence lemmas are
    /// computed with `lemmatizer`, which must be the one the term base was
    /// loaded with.
    pub fn find_matches(&self, sentence: &TokenizedSentence, lemmatizer: &Lemmatizer) -> Vec<TermMatch> {
        let computed;
        let lemmas = match sentence.lemmas() {
            Some(lemmas) => lemmas,
            None => {
                computed = lemmatizer.lemmatize_tokens(sentence.surface());
                &computed
            }
        };
        let surface = sentence.surface();
        let mut matches = Vec::new();
        let mut pos = 0;
        while pos < surface.len() {
            let mut best: Option<(usize, MatchLevel, usize)> = None;
            for &entry_index in self.candidates(&lemmas[pos]) {
                let entry = &self.entries[entry_index];
                let len = entry.source_term.len();
                if pos + len > surface.len() {
                    continue;
                }
                let level = if surface[pos..pos + len] == entry.source_term[..] {
                    MatchLevel::Surface
                } else if lemmas[pos..pos + len] == entry.source_lemmas[..] {
                    MatchLevel::Lemma
                } else {
                    continue;
                };
                let better = match best {
                    None => true,
                    Some((best_len, best_level, _)) => {
                        len > best_len
                            || (len == best_len
                                && level == MatchLevel::Surface
                                && best_level == MatchLevel::Lemma)
                    }
                };
                if better {
                    best = Some((len, level, entry_index));
                }
            }
            match best {
                Some((len, level, entry_index)) => {
                    matches.push(TermMatch {
                        entry_index,
                        span: pos..pos + len,
                        level,
                    });
                    pos += len;
                }
                None => pos += 1,
            }
        }
        matches
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatchLevel {
    Surface,
    Lemma,
}

impl fmt::Display for MatchLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchLevel::Surface => "surface",
            MatchLevel::Lemma => "lemma",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermMatch {
    pub entry_index: usize,
    pub span: Range<usize>,
    pub level: MatchLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VariantPolicy {
    #[default]
    FirstOnly,
    All,
}

impl std::str::FromStr for VariantPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" => Ok(VariantPolicy::FirstOnly),
            "all" => Ok(VariantPolicy::All),
            other => Err(Error::Invalid(format!("unknown variant policy {other:?}"))),
        }
    }
}

/// Turns matches into constraints carrying the matched source span.
///
/// In lemma mode a surface-level match keeps the term-base casing of any
/// target token whose lemma is only its lowercased form, so `SARS-CoV` is not
/// turned into `sars-cov` when the source had the exact surface term.
pub fn matches_to_constraints(
    matches: &[TermMatch],
    tb: &TermBase,
    mode: Mode,
    policy: VariantPolicy,
) -> Result<Vec<ConstraintSpec>> {
    let mut out = Vec::with_capacity(matches.len());
    for m in matches {
        let entry = tb.get(m.entry_index).ok_or_else(|| {
            Error::Invalid(format!(
                "match refers to entry {} but the term base has {}",
                m.entry_index,
                tb.len()
            ))
        })?;
        let take = match policy {
            VariantPolicy::FirstOnly => 1,
            VariantPolicy::All => entry.variants.len(),
        };
        let mut variants: Vec<Tokens> = Vec::with_capacity(take);
        for (surface, lemmas) in entry.variants.iter().zip(&entry.variant_lemmas).take(take) {
            let variant = match mode {
                Mode::Surface => surface.clone(),
                Mode::Lemma if m.level == MatchLevel::Surface => surface
                    .iter()
                    .zip(lemmas)
                    .map(|(s, l)| if *l == s.to_lowercase() { s.clone() } else { l.clone() })
                    .collect(),
                Mode::Lemma => lemmas.clone(),
            };
            if !variants.contains(&variant) {
                variants.push(variant);
            }
        }
        out.push(ConstraintSpec::new(
            variants,
            Origin::TermBaseMatch,
            mode,
            Some(m.span.clone()),
        )?);
    }
    Ok(out)
}
