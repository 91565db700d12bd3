//! Per-sentence system combination.
//!
//! Systems are ranked by validation BLEU (descending, ties by id). For every
//! line the best-ranked system whose translation contains all expected terms
//! (any variant, surface or lemma level) is chosen; when no system covers
//! them, the baseline's translation is used.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lemma::Lemmatizer;
use crate::metrics::locate_term;
use crate::model::{ConstraintSpec, TokenizedSentence};

#[derive(Debug, Clone)]
pub struct SystemOutput {
    pub system_id: String,
    pub validation_bleu: f64,
    pub translations: Vec<TokenizedSentence>,
}

/// What to do when no system covers every term of a line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fallback {
    /// Use the baseline.
    #[default]
    Baseline,
    /// Prefer the system covering the most terms; baseline if none covers any.
    MostTermsCovered,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Choice {
    pub system_id: String,
    pub translation: TokenizedSentence,
    /// True when no system qualified and the fallback rule picked this line.
    pub fell_back: bool,
}

fn ranked(systems: &[SystemOutput]) -> Vec<&SystemOutput> {
    let mut order: Vec<&SystemOutput> = systems.iter().collect();
    order.sort_by(|a, b| {
        b.validation_bleu
            .total_cmp(&a.validation_bleu)
            .then_with(|| a.system_id.cmp(&b.system_id))
    });
    order
}

pub fn combine(
    systems: &[SystemOutput],
    baseline_id: &str,
    per_line_terms: &BTreeMap<u64, Vec<ConstraintSpec>>,
    lemmatizer: &Lemmatizer,
    fallback: Fallback,
) -> Result<Vec<Choice>> {
    let first = systems.first().ok_or(Error::EmptyCorpus)?;
    let lines = first.translations.len();
    for system in systems {
        if system.translations.len() != lines {
            return Err(Error::LengthMismatch(format!(
                "system {} has {} lines, {} has {lines}",
                system.system_id,
                system.translations.len(),
                first.system_id
            )));
        }
    }
    let mut ids: Vec<&str> = systems.iter().map(|s| s.system_id.as_str()).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Invalid("duplicate system id".into()));
    }
    let baseline = systems
        .iter()
        .find(|s| s.system_id == baseline_id)
        .ok_or_else(|| Error::UnknownSystem(baseline_id.to_owned()))?;
    if let Some((&line, _)) = per_line_terms.range(lines as u64..).next() {
        return Err(Error::LengthMismatch(format!(
            "terms given for line {line} but systems have {lines} lines"
        )));
    }
    let order = ranked(systems);
    let no_terms = Vec::new();

    Ok((0..lines)
        .into_par_iter()
        .map(|line| {
            let terms = per_line_terms.get(&(line as u64)).unwrap_or(&no_terms);
            let coverage = |system: &SystemOutput| {
                let sentence = &system.translations[line];
                terms
                    .iter()
                    .filter(|t| locate_term(sentence, t, lemmatizer).is_some())
                    .count()
            };
            let pick = |system: &SystemOutput, fell_back| Choice {
                system_id: system.system_id.clone(),
                translation: system.translations[line].clone(),
                fell_back,
            };
            let counts: Vec<usize> = order.iter().map(|s| coverage(s)).collect();
            if let Some(i) = counts.iter().position(|c| *c == terms.len()) {
                return pick(order[i], false);
            }
            if fallback == Fallback::MostTermsCovered {
                let best = counts.iter().copied().max().unwrap_or(0);
                if best > 0 {
                    let i = counts.iter().position(|c| *c == best).expect("max is present");
                    return pick(order[i], true);
                }
            }
            pick(baseline, true)
        })
        .collect())
}

/// Parses `id=path:bleu` system specifications.
pub fn parse_system_spec(spec: &str) -> Result<(String, std::path::PathBuf, f64)> {
    let bad = || Error::Invalid(format!("system spec must be id=path:bleu, got {spec:?}"));
    let (id, rest) = spec.split_once('=').ok_or_else(bad)?;
    let (path, bleu) = rest.rsplit_once(':').ok_or_else(bad)?;
    if id.is_empty() || path.is_empty() {
        return Err(bad());
    }
    let bleu: f64 = bleu.parse().map_err(|_| bad())?;
    if !bleu.is_finite() {
        return Err(bad());
    }
    Ok((id.to_owned(), path.into(), bleu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{tokenize, Mode, Origin};

    fn system(id: &str, bleu: f64, lines: &[&str]) -> SystemOutput {
        SystemOutput {
            system_id: id.into(),
            validation_bleu: bleu,
            translations: lines.iter().map(|l| tokenize(l)).collect(),
        }
    }

    fn terms(lines: &[(u64, &[&str])]) -> BTreeMap<u64, Vec<ConstraintSpec>> {
        let mut out: BTreeMap<u64, Vec<ConstraintSpec>> = BTreeMap::new();
        for (line, ts) in lines {
            for t in *ts {
                out.entry(*line).or_default().push(
                    ConstraintSpec::new(vec![tokenize(t).into_surface()], Origin::SampledFromTarget, Mode::Surface, None)
                        .unwrap(),
                );
            }
        }
        out
    }

    fn ids(choices: &[Choice]) -> Vec<&str> {
        choices.iter().map(|c| c.system_id.as_str()).collect()
    }

    #[test]
    fn picks_best_qualifying_system() {
        let systems = [
            system("base", 44.0, &["la maladie", "x", "la saison"]),
            system("lemm", 45.0, &["la maladie", "y", "la saison"]),
            system("sf", 43.0, &["la grippe", "z", "la saison grippale"]),
        ];
        let t = terms(&[(0, &["grippe"]), (2, &["épidémie"])]);
        let out = combine(&systems, "base", &t, &Lemmatizer::default(), Fallback::Baseline).unwrap();
        // Line 0: only the third-ranked system has the term. Line 1: no
        // terms, top system. Line 2: nobody has it, baseline.
        assert_eq!(ids(&out), ["sf", "lemm", "base"]);
        assert_eq!(out.iter().map(|c| c.fell_back).collect::<Vec<_>>(), [false, false, true]);
    }

    #[test]
    fn most_terms_fallback() {
        let systems = [system("a", 2.0, &["t1"]), system("b", 1.0, &["t1 t2"]), system("base", 0.0, &["none"])];
        let t = terms(&[(0, &["t1", "t2", "t3"])]);
        let lem = Lemmatizer::default();
        assert_eq!(ids(&combine(&systems, "base", &t, &lem, Fallback::Baseline).unwrap()), ["base"]);
        assert_eq!(ids(&combine(&systems, "base", &t, &lem, Fallback::MostTermsCovered).unwrap()), ["b"]);
    }

    #[test]
    fn ties_break_by_id_and_order_does_not_matter() {
        let a = system("a", 1.0, &["q"]);
        let b = system("b", 1.0, &["q"]);
        let lem = Lemmatizer::default();
        let t = BTreeMap::new();
        let forward = combine(&[a.clone(), b.clone()], "b", &t, &lem, Fallback::Baseline).unwrap();
        let backward = combine(&[b, a], "b", &t, &lem, Fallback::Baseline).unwrap();
        assert_eq!(forward, backward);
        assert_eq!(ids(&forward), ["a"]);
    }

    #[test]
    fn input_errors() {
        let lem = Lemmatizer::default();
        let t = BTreeMap::new();
        let uneven = [system("a", 1.0, &["x"]), system("b", 1.0, &["x", "y"])];
        assert!(matches!(combine(&uneven, "a", &t, &lem, Fallback::Baseline), Err(Error::LengthMismatch(_))));
        let ok = [system("a", 1.0, &["x"])];
        assert!(matches!(combine(&ok, "zz", &t, &lem, Fallback::Baseline), Err(Error::UnknownSystem(_))));
        let far = terms(&[(5, &["x"])]);
        assert!(combine(&ok, "a", &far, &lem, Fallback::Baseline).is_err());
        let dup = [system("a", 1.0, &["x"]), system("a", 2.0, &["x"])];
        assert!(combine(&dup, "a", &t, &lem, Fallback::Baseline).is_err());
    }

    #[test]
    fn system_spec_parsing() {
        assert_eq!(
            parse_system_spec("lemm=/out/c:lemm.txt:44.959").unwrap(),
            ("lemm".into(), "/out/c:lemm.txt".into(), 44.959)
        );
        assert!(parse_system_spec("nobleu=/x").is_err());
        assert!(parse_system_spec("=/x:1").is_err());
        assert!(parse_system_spec("a=/x:NaN").is_err());
    }
}
