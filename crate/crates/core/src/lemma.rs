//! Context-free, word-by-word lemmatization.
//!
//! Every word is lemmatized on its own, so a term in the term base and the
//! same word in running text always receive the same lemma. Two backends are
//! provided: identity (optionally lowercasing) and a dictionary lookup loaded
//! from a `surface<TAB>lemma` file. Unknown words fall back to their
//! lowercased surface form.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::TokenizedSentence;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LemmatizerKind {
    Identity,
    Dictionary(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LemmatizerSpec {
    pub kind: LemmatizerKind,
    pub lowercase_before_lookup: bool,
}

impl Default for LemmatizerSpec {
    fn default() -> Self {
        Self {
            kind: LemmatizerKind::Identity,
            lowercase_before_lookup: true,
        }
    }
}

impl LemmatizerSpec {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn dictionary(path: impl Into<PathBuf>) -> Self {
        Self {
            kind: LemmatizerKind::Dictionary(path.into()),
            lowercase_before_lookup: true,
        }
    }

    pub fn case_sensitive(mut self) -> Self {
        self.lowercase_before_lookup = false;
        self
    }

    /// Parses the `identity` / `dict:<path>` flag syntax.
    pub fn parse(flag: &str) -> Result<Self> {
        match flag {
            "identity" => Ok(Self::identity()),
            _ => match flag.strip_prefix("dict:") {
                Some(path) if !path.is_empty() => Ok(Self::dictionary(path)),
                _ => Err(Error::Invalid(format!(
                    "lemmatizer must be `identity` or `dict:<path>`, got {flag:?}"
                ))),
            },
        }
    }
}

/// Surface form to lemma mapping.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LemmaDictionary {
    entries: HashMap<String, String>,
}

impl LemmaDictionary {
    /// Parses `surface<TAB>lemma` lines. The first binding of a key wins.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn parse(reader: impl Read, name: &Path, lowercase: bool) -> Result<Self> {
        let mut entries = HashMap::new();
        for (no, line) in BufReader::new(reader).lines().enumerate() {
            let line = line.map_err(|e| Error::io(name, e))?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            let (surface, lemma) = match fields.as_slice() {
                [s, l] if is_single_token(s) && is_single_token(l) => (*s, *l),
                _ => {
                    return Err(Error::parse(
                        name,
                        no + 1,
                        "expected `surface<TAB>lemma` with single-token fields",
                    ))
                }
            };
            let (key, value) = if lowercase {
                (surface.to_lowercase(), lemma.to_lowercase())
            } else {
                (surface.to_owned(), lemma.to_owned())
            };
            entries.entry(key).or_insert(value);
        }
        Ok(Self { entries })
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>, lowercase: bool) -> Self {
        let mut entries = HashMap::new();
        for (s, l) in pairs {
            let (key, value) = if lowercase {
                (s.to_lowercase(), l.to_lowercase())
            } else {
                (s.to_owned(), l.to_owned())
            };
            entries.entry(key).or_insert(value);
        }
        Self { entries }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn is_single_token(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(char::is_whitespace)
}

#[derive(Debug, Clone)]
enum Backend {
    Identity,
    Dictionary(Arc<LemmaDictionary>),
}

/// A loaded lemmatizer. Cheap to clone and safe to share between threads.
#[derive(Debug, Clone)]
pub struct Lemmatizer {
    backend: Backend,
    lowercase: bool,
}

impl Default for Lemmatizer {
    fn default() -> Self {
        Self::identity(true)
    }
}

impl Lemmatizer {
    pub fn load(spec: &LemmatizerSpec) -> Result<Self> {
        let backend = match &spec.kind {
            LemmatizerKind::Identity => Backend::Identity,
            LemmatizerKind::Dictionary(path) => {
                let file = File::open(path).map_err(|e| Error::io(path, e))?;
                Backend::Dictionary(Arc::new(LemmaDictionary::parse(
                    file,
                    path,
                    spec.lowercase_before_lookup,
                )?))
            }
        };
        Ok(Self {
            backend,
            lowercase: spec.lowercase_before_lookup,
        })
    }

    pub fn identity(lowercase: bool) -> Self {
        Self {
            backend: Backend::Identity,
            lowercase,
        }
    }

    /// Wraps an in-memory dictionary. Its keys must already be normalized
    /// for `lowercase`.
    pub fn with_dictionary(dictionary: LemmaDictionary, lowercase: bool) -> Self {
        Self {
            backend: Backend::Dictionary(Arc::new(dictionary)),
            lowercase,
        }
    }

    pub fn lowercases(&self) -> bool {
        self.lowercase
    }

    pub fn lemmatize_word(&self, word: &str) -> String {
        let key = if self.lowercase {
            word.to_lowercase()
        } else {
            word.to_owned()
        };
        match &self.backend {
            Backend::Identity => key,
            Backend::Dictionary(dict) => match dict.get(&key) {
                Some(lemma) => lemma.to_owned(),
                None => key,
            },
        }
    }

    pub fn lemmatize_tokens(&self, tokens: &[String]) -> Vec<String> {
        tokens.iter().map(|t| self.lemmatize_word(t)).collect()
    }

    /// Fills in lemmas; surface tokens are left untouched.
    pub fn lemmatize_sentence(&self, sentence: TokenizedSentence) -> TokenizedSentence {
        let lemmas = self.lemmatize_tokens(sentence.surface());
        sentence
            .with_lemmas(lemmas)
            .expect("one non-empty lemma per non-empty token")
    }
}
