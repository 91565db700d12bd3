//! Source-side annotation schemes.
//!
//! * Suffix: `source <sep> c1 <c> c2 ...`, variants of one constraint joined
//!   by `<v>`.
//! * Factored: each matched source span is followed by its translation and
//!   every token carries a factor (0 plain, 1 source term, 2 translation).
//! * Replace: each matched source span is replaced by its translation.
//!
//! Factored and replace need constraints that carry a source span, i.e. ones
//! produced by term-base matching. Both use the first variant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AnnotatedSentence, ConstraintSpec, Mode, TokenizedSentence, Tokens};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Suffix,
    Factored,
    Replace,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "suffix" => Ok(Scheme::Suffix),
            "factored" => Ok(Scheme::Factored),
            "replace" => Ok(Scheme::Replace),
            other => Err(Error::Invalid(format!("unknown annotation scheme {other:?}"))),
        }
    }
}

pub const FACTOR_PLAIN: u8 = 0;
pub const FACTOR_SOURCE_TERM: u8 = 1;
pub const FACTOR_TRANSLATION: u8 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotationConfig {
    pub scheme: Scheme,
    pub sep_token: String,
    pub constraint_delim: String,
    pub variant_delim: String,
    pub mode: Mode,
}

impl Default for AnnotationConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Suffix,
            sep_token: "<sep>".into(),
            constraint_delim: "<c>".into(),
            variant_delim: "<v>".into(),
            mode: Mode::Surface,
        }
    }
}

impl AnnotationConfig {
    pub fn validate(&self) -> Result<()> {
        let specials = self.specials();
        for token in specials {
            if token.is_empty() || token.chars().any(char::is_whitespace) {
                return Err(Error::Invalid(format!(
                    "special token {token:?} must be non-empty without whitespace"
                )));
            }
        }
        if specials[0] == specials[1] || specials[0] == specials[2] || specials[1] == specials[2] {
            return Err(Error::Invalid("special tokens must be distinct".into()));
        }
        Ok(())
    }

    fn specials(&self) -> [&str; 3] {
        [&self.sep_token, &self.constraint_delim, &self.variant_delim]
    }

    fn is_special(&self, token: &str) -> bool {
        self.specials().contains(&token)
    }
}

fn check_collisions<'a>(
    tokens: impl IntoIterator<Item = &'a String>,
    cfg: &AnnotationConfig,
    line: u64,
) -> Result<()> {
    match tokens.into_iter().find(|t| cfg.is_special(t)) {
        Some(token) => Err(Error::SpecialTokenCollision {
            line,
            token: token.clone(),
        }),
        None => Ok(()),
    }
}

/// Appends constraints as a suffix. `line` only labels collision errors.
pub fn annotate_suffix(
    sentence: &TokenizedSentence,
    constraints: &[ConstraintSpec],
    cfg: &AnnotationConfig,
    line: u64,
) -> Result<AnnotatedSentence> {
    check_collisions(sentence.surface(), cfg, line)?;
    check_collisions(constraints.iter().flat_map(|c| c.variants().iter().flatten()), cfg, line)?;

    let mut tokens: Tokens = sentence.surface().to_vec();
    if !constraints.is_empty() {
        tokens.push(cfg.sep_token.clone());
        for (i, constraint) in constraints.iter().enumerate() {
            if i > 0 {
                tokens.push(cfg.constraint_delim.clone());
            }
            for (j, variant) in constraint.variants().iter().enumerate() {
                if j > 0 {
                    tokens.push(cfg.variant_delim.clone());
                }
                tokens.extend(variant.iter().cloned());
            }
        }
    }
    Ok(AnnotatedSentence {
        source: TokenizedSentence::from_tokens(tokens)?,
        constraints: constraints.to_vec(),
        factors: None,
    })
}

fn spans_in_order(
    sentence: &TokenizedSentence,
    constraints: &[ConstraintSpec],
) -> Result<Vec<(std::ops::Range<usize>, usize)>> {
    let mut spans = Vec::with_capacity(constraints.len());
    for (i, c) in constraints.iter().enumerate() {
        let span = c.source_span().ok_or(Error::MissingSpan)?;
        if span.end > sentence.len() {
            return Err(Error::Invalid(format!(
                "span {span:?} outside a {}-token sentence",
                sentence.len()
            )));
        }
        spans.push((span, i));
    }
    spans.sort_by_key(|(span, _)| span.start);
    for pair in spans.windows(2) {
        if pair[0].0.end > pair[1].0.start {
            return Err(Error::Invalid("overlapping constraint spans".into()));
        }
    }
    Ok(spans)
}

/// Inserts each translation right after its source span and labels tokens.
pub fn annotate_factored(
    sentence: &TokenizedSentence,
    constraints: &[ConstraintSpec],
) -> Result<AnnotatedSentence> {
    let spans = spans_in_order(sentence, constraints)?;
    let surface = sentence.surface();
    let mut tokens: Tokens = Vec::with_capacity(surface.len());
    let mut factors = Vec::with_capacity(surface.len());
    let mut pos = 0;
    for (span, i) in &spans {
        tokens.extend_from_slice(&surface[pos..span.start]);
        factors.resize(tokens.len(), FACTOR_PLAIN);
        tokens.extend_from_slice(&surface[span.clone()]);
        factors.resize(tokens.len(), FACTOR_SOURCE_TERM);
        tokens.extend_from_slice(constraints[*i].first_variant());
        factors.resize(tokens.len(), FACTOR_TRANSLATION);
        pos = span.end;
    }
    tokens.extend_from_slice(&surface[pos..]);
    factors.resize(tokens.len(), FACTOR_PLAIN);
    Ok(AnnotatedSentence {
        source: TokenizedSentence::from_tokens(tokens)?,
        constraints: sorted(constraints, &spans),
        factors: Some(factors),
    })
}

/// Replaces each matched span with its translation.
pub fn annotate_replace(
    sentence: &TokenizedSentence,
    constraints: &[ConstraintSpec],
) -> Result<AnnotatedSentence> {
    let spans = spans_in_order(sentence, constraints)?;
    let surface = sentence.surface();
    let mut tokens: Tokens = Vec::with_capacity(surface.len());
    let mut pos = 0;
    for (span, i) in &spans {
        tokens.extend_from_slice(&surface[pos..span.start]);
        tokens.extend_from_slice(constraints[*i].first_variant());
        pos = span.end;
    }
    tokens.extend_from_slice(&surface[pos..]);
    Ok(AnnotatedSentence {
        source: TokenizedSentence::from_tokens(tokens)?,
        constraints: sorted(constraints, &spans),
        factors: None,
    })
}

fn sorted(constraints: &[ConstraintSpec], spans: &[(std::ops::Range<usize>, usize)]) -> Vec<ConstraintSpec> {
    spans.iter().map(|(_, i)| constraints[*i].clone()).collect()
}

/// Dispatches on `cfg.scheme`.
pub fn annotate(
    sentence: &TokenizedSentence,
    constraints: &[ConstraintSpec],
    cfg: &AnnotationConfig,
    line: u64,
) -> Result<AnnotatedSentence> {
    match cfg.scheme {
        Scheme::Suffix => annotate_suffix(sentence, constraints, cfg, line),
        Scheme::Factored => annotate_factored(sentence, constraints),
        Scheme::Replace => annotate_replace(sentence, constraints),
    }
}

/// Constraint groups recovered from a suffix annotation: one entry per
/// constraint, each a list of variants.
pub type ConstraintGroups = Vec<Vec<Tokens>>;

/// Splits a suffix-annotated token sequence back into the sentence and its
/// constraint groups.
pub fn strip_annotation(tokens: &[String], cfg: &AnnotationConfig) -> Result<(Tokens, ConstraintGroups)> {
    let Some(sep) = tokens.iter().position(|t| *t == cfg.sep_token) else {
        return Ok((tokens.to_vec(), Vec::new()));
    };
    let sentence = tokens[..sep].to_vec();
    let mut groups: ConstraintGroups = vec![vec![Vec::new()]];
    let dangling = |position: usize, message: &str| Error::Annotation {
        position,
        message: message.to_owned(),
    };
    for (offset, token) in tokens[sep + 1..].iter().enumerate() {
        let position = sep + 1 + offset;
        let group = groups.last_mut().expect("at least one group");
        let variant = group.last_mut().expect("at least one variant");
        if *token == cfg.constraint_delim || *token == cfg.variant_delim {
            if variant.is_empty() {
                return Err(dangling(position, "delimiter without a preceding variant"));
            }
            if *token == cfg.constraint_delim {
                groups.push(vec![Vec::new()]);
            } else {
                group.push(Vec::new());
            }
        } else if *token == cfg.sep_token {
            return Err(dangling(position, "repeated separator"));
        } else {
            variant.push(token.clone());
        }
    }
    if groups.last().and_then(|g| g.last()).is_some_and(Vec::is_empty) {
        return Err(dangling(tokens.len(), "annotation ends without a variant"));
    }
    Ok((sentence, groups))
}

/// Parses a `token|factor` line produced by the factored scheme.
pub fn parse_factored_line(line: &str) -> Result<(Tokens, Vec<u8>)> {
    let mut tokens = Vec::new();
    let mut factors = Vec::new();
    for (position, field) in line.split_whitespace().enumerate() {
        let parsed = field
            .rsplit_once('|')
            .and_then(|(t, f)| Some((t, f.parse::<u8>().ok().filter(|f| *f <= 2)?)))
            .filter(|(t, _)| !t.is_empty());
        let (token, factor) = parsed.ok_or_else(|| Error::Annotation {
            position,
            message: format!("expected token|factor, got {field:?}"),
        })?;
        tokens.push(token.to_owned());
        factors.push(factor);
    }
    Ok((tokens, factors))
}
