//! Terminology-aware evaluation.
//!
//! * Exact match: share of expected term instances whose variants occur in
//!   the hypothesis, at surface level (case-sensitive) or lemma level.
//! * Window overlap: for terms found in the reference, how much of the
//!   `n`-token context left and right of the term agrees between hypothesis
//!   and reference.
//! * TERm: TER with per-token weights, term tokens weighted higher.
//! * BLEU: corpus BLEU-4 with brevity penalty.
//!
//! All per-sentence statistics are integer counts or sums that are reduced
//! in input order, so results do not depend on how work is split.

use std::collections::HashMap;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lemma::Lemmatizer;
use crate::model::{ConstraintSpec, TokenizedSentence, Tokens};

/// BLEU smoothing constant for n-gram orders without matches.
pub const BLEU_EPSILON: f64 = 1e-9;

/// Lower bound on the TER denominator for an empty reference.
pub const TER_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct EvalInstance {
    pub source: TokenizedSentence,
    pub hypothesis: TokenizedSentence,
    pub reference: TokenizedSentence,
    pub expected_terms: Vec<ConstraintSpec>,
}

impl EvalInstance {
    /// Fills in missing hypothesis and reference lemmas.
    pub fn with_lemmas(mut self, lemmatizer: &Lemmatizer) -> Self {
        self.hypothesis = ensure_lemmas(self.hypothesis, lemmatizer);
        self.reference = ensure_lemmas(self.reference, lemmatizer);
        self
    }
}

fn ensure_lemmas(sentence: TokenizedSentence, lemmatizer: &Lemmatizer) -> TokenizedSentence {
    if sentence.lemmas().is_some() {
        sentence
    } else {
        lemmatizer.lemmatize_sentence(sentence)
    }
}

/// A sentence view with lemmas, computing them when absent.
struct Lemmatized<'a> {
    surface: &'a [String],
    lemmas: std::borrow::Cow<'a, [String]>,
}

impl<'a> Lemmatized<'a> {
    fn new(sentence: &'a TokenizedSentence, lemmatizer: &Lemmatizer) -> Self {
        let lemmas = match sentence.lemmas() {
            Some(l) => std::borrow::Cow::Borrowed(l),
            None => std::borrow::Cow::Owned(lemmatizer.lemmatize_tokens(sentence.surface())),
        };
        Self {
            surface: sentence.surface(),
            lemmas,
        }
    }
}

/// One expected term with its variants pre-lemmatized.
struct TermPattern<'a> {
    variants: Vec<(&'a [String], Tokens)>,
}

impl<'a> TermPattern<'a> {
    fn new(term: &'a ConstraintSpec, lemmatizer: &Lemmatizer) -> Self {
        Self {
            variants: term
                .variants()
                .iter()
                .map(|v| (v.as_slice(), lemmatizer.lemmatize_tokens(v)))
                .collect(),
        }
    }

    fn occurrences<'s>(&'s self, sentence: &'s Lemmatized<'_>) -> impl Iterator<Item = Range<usize>> + 's {
        self.variants.iter().flat_map(move |(surface, lemmas)| {
            let len = surface.len();
            (0..(sentence.surface.len() + 1).saturating_sub(len)).filter_map(move |start| {
                let end = start + len;
                let hit = sentence.surface[start..end] == **surface
                    || sentence.lemmas[start..end] == lemmas[..];
                hit.then_some(start..end)
            })
        })
    }

    /// Earliest occurrence of any variant, longest first at equal start.
    fn locate(&self, sentence: &Lemmatized<'_>) -> Option<Range<usize>> {
        self.occurrences(sentence)
            .min_by_key(|r| (r.start, std::cmp::Reverse(r.end)))
    }
}

/// Position of the first occurrence of any variant of `term`, at surface or
/// lemma level.
pub fn locate_term(
    sentence: &TokenizedSentence,
    term: &ConstraintSpec,
    lemmatizer: &Lemmatizer,
) -> Option<Range<usize>> {
    TermPattern::new(term, lemmatizer).locate(&Lemmatized::new(sentence, lemmatizer))
}

/// How repeated identical terms within one sentence are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmCounting {
    #[default]
    PerOccurrence,
    PerUniqueTerm,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactMatch {
    pub fraction: f64,
    pub covered: usize,
    pub total: usize,
    /// No expected terms at all; the fraction is reported as 1.
    pub vacuous: bool,
    /// `(covered, total)` per instance.
    pub per_instance: Vec<(usize, usize)>,
}

fn counted_terms(terms: &[ConstraintSpec], counting: EmCounting) -> Vec<&ConstraintSpec> {
    match counting {
        EmCounting::PerOccurrence => terms.iter().collect(),
        EmCounting::PerUniqueTerm => {
            let mut seen: Vec<&[Tokens]> = Vec::new();
            terms
                .iter()
                .filter(|t| {
                    let fresh = !seen.contains(&t.variants());
                    if fresh {
                        seen.push(t.variants());
                    }
                    fresh
                })
                .collect()
        }
    }
}

fn instance_em(
    instance: &EvalInstance,
    lemmatizer: &Lemmatizer,
    counting: EmCounting,
) -> (usize, usize) {
    let hyp = Lemmatized::new(&instance.hypothesis, lemmatizer);
    let terms = counted_terms(&instance.expected_terms, counting);
    let covered = terms
        .iter()
        .filter(|t| TermPattern::new(t, lemmatizer).locate(&hyp).is_some())
        .count();
    (covered, terms.len())
}

pub fn exact_match(
    instances: &[EvalInstance],
    lemmatizer: &Lemmatizer,
    counting: EmCounting,
) -> ExactMatch {
    let per_instance: Vec<(usize, usize)> = instances
        .par_iter()
        .map(|i| instance_em(i, lemmatizer, counting))
        .collect();
    let covered = per_instance.iter().map(|c| c.0).sum();
    let total = per_instance.iter().map(|c| c.1).sum();
    em_from_counts(covered, total, per_instance)
}

fn em_from_counts(covered: usize, total: usize, per_instance: Vec<(usize, usize)>) -> ExactMatch {
    let vacuous = total == 0;
    if vacuous {
        log::warn!("no expected terms; exact match reported as 1.0");
    }
    ExactMatch {
        fraction: if vacuous { 1.0 } else { covered as f64 / total as f64 },
        covered,
        total,
        vacuous,
        per_instance,
    }
}

/// Denominator of one term's window score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowNorm {
    /// Size of the reference window.
    #[default]
    Reference,
    /// Size of the larger of the two windows.
    Larger,
}

fn context(lemmas: &[String], span: &Range<usize>, size: usize) -> Vec<String> {
    let left = span.start.saturating_sub(size);
    let right = (span.end + size).min(lemmas.len());
    lemmas[left..span.start]
        .iter()
        .chain(&lemmas[span.end..right])
        .cloned()
        .collect()
}

fn window_score(hyp_window: &[String], ref_window: &[String], norm: WindowNorm) -> f64 {
    if ref_window.is_empty() && hyp_window.is_empty() {
        return 1.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for token in ref_window {
        *counts.entry(token).or_default() += 1;
    }
    let mut common = 0usize;
    for token in hyp_window {
        if let Some(c) = counts.get_mut(token.as_str()) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    let denominator = match norm {
        WindowNorm::Reference => ref_window.len(),
        WindowNorm::Larger => ref_window.len().max(hyp_window.len()),
    };
    common as f64 / denominator.max(1) as f64
}

/// Window scores of every term found in the reference; terms absent from the
/// reference are skipped.
fn instance_windows(
    instance: &EvalInstance,
    size: usize,
    norm: WindowNorm,
    lemmatizer: &Lemmatizer,
) -> Vec<f64> {
    let hyp = Lemmatized::new(&instance.hypothesis, lemmatizer);
    let reference = Lemmatized::new(&instance.reference, lemmatizer);
    let mut scores = Vec::new();
    for term in &instance.expected_terms {
        let pattern = TermPattern::new(term, lemmatizer);
        let Some(ref_span) = pattern.locate(&reference) else {
            continue;
        };
        let score = match pattern.locate(&hyp) {
            None => 0.0,
            Some(hyp_span) => window_score(
                &context(&hyp.lemmas, &hyp_span, size),
                &context(&reference.lemmas, &ref_span, size),
                norm,
            ),
        };
        scores.push(score);
    }
    scores
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowOverlap {
    pub score: f64,
    /// Number of term instances located in the reference.
    pub scored: usize,
    pub per_instance: Vec<Vec<f64>>,
}

fn mean_windows(per_instance: Vec<Vec<f64>>) -> WindowOverlap {
    let scored: usize = per_instance.iter().map(Vec::len).sum();
    let sum: f64 = per_instance.iter().flatten().sum();
    WindowOverlap {
        score: if scored == 0 { 1.0 } else { sum / scored as f64 },
        scored,
        per_instance,
    }
}

pub fn window_overlap(
    instances: &[EvalInstance],
    size: usize,
    norm: WindowNorm,
    lemmatizer: &Lemmatizer,
) -> Result<WindowOverlap> {
    if size == 0 {
        return Err(Error::Invalid("window size must be at least 1".into()));
    }
    Ok(mean_windows(
        instances
            .par_iter()
            .map(|i| instance_windows(i, size, norm, lemmatizer))
            .collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TermWeights {
    pub base_weight: f64,
    pub term_weight: f64,
}

impl Default for TermWeights {
    fn default() -> Self {
        Self {
            base_weight: 1.0,
            term_weight: 2.0,
        }
    }
}

impl TermWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_weight > 0.0 && self.term_weight >= self.base_weight) {
            return Err(Error::Invalid(format!(
                "term weights need 0 < base ({}) <= term ({})",
                self.base_weight, self.term_weight
            )));
        }
        Ok(())
    }
}

/// `term_weight` on every token covered by any occurrence of any expected
/// term, `base_weight` elsewhere.
pub fn term_weights_for(
    sentence: &TokenizedSentence,
    expected_terms: &[ConstraintSpec],
    weights: TermWeights,
    lemmatizer: &Lemmatizer,
) -> Vec<f64> {
    let view = Lemmatized::new(sentence, lemmatizer);
    let mut out = vec![weights.base_weight; sentence.len()];
    for term in expected_terms {
        let pattern = TermPattern::new(term, lemmatizer);
        for span in pattern.occurrences(&view) {
            out[span].fill(weights.term_weight);
        }
    }
    out
}

/// Cost of substituting one token for another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubstitutionCost {
    #[default]
    MaxWeight,
    MeanWeight,
}

impl SubstitutionCost {
    fn cost(self, hyp: f64, reference: f64) -> f64 {
        match self {
            SubstitutionCost::MaxWeight => hyp.max(reference),
            SubstitutionCost::MeanWeight => 0.5 * (hyp + reference),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerConfig {
    /// Cost of one block shift.
    pub shift_cost: f64,
    pub substitution: SubstitutionCost,
    /// Longest block considered for a shift.
    pub max_shift_size: usize,
    /// Furthest a block may move, in tokens.
    pub max_shift_distance: usize,
}

impl Default for TerConfig {
    fn default() -> Self {
        Self {
            shift_cost: 1.0,
            substitution: SubstitutionCost::MaxWeight,
            max_shift_size: 10,
            max_shift_distance: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TerScore {
    /// Total weighted edit cost, shifts included.
    pub cost: f64,
    pub ref_weight: f64,
    pub shifts: usize,
    /// Empty reference with a non-empty hypothesis.
    pub degenerate: bool,
}

impl TerScore {
    pub fn score(&self) -> f64 {
        if self.cost == 0.0 {
            0.0
        } else {
            self.cost / self.ref_weight.max(TER_EPSILON)
        }
    }
}

/// Weighted edit distance between `hyp` (a permutation given by `order`) and
/// `reference`. Returns the cost and which hypothesis positions (in `order`
/// coordinates) are aligned to an identical reference token.
fn edit_distance(
    hyp: &[&str],
    hyp_weights: &[f64],
    order: &[usize],
    reference: &[&str],
    ref_weights: &[f64],
    substitution: SubstitutionCost,
    want_alignment: bool,
) -> (f64, Vec<bool>) {
    let (n, m) = (order.len(), reference.len());
    let width = m + 1;
    let mut table = vec![0.0f64; (n + 1) * width];
    for j in 1..=m {
        table[j] = table[j - 1] + ref_weights[j - 1];
    }
    for i in 1..=n {
        let h = order[i - 1];
        let hw = hyp_weights[h];
        table[i * width] = table[(i - 1) * width] + hw;
        for j in 1..=m {
            let diagonal = table[(i - 1) * width + j - 1]
                + if hyp[h] == reference[j - 1] {
                    0.0
                } else {
                    substitution.cost(hw, ref_weights[j - 1])
                };
            let skip_hyp = table[(i - 1) * width + j] + hw;
            let skip_ref = table[i * width + j - 1] + ref_weights[j - 1];
            table[i * width + j] = diagonal.min(skip_hyp).min(skip_ref);
        }
    }
    let cost = table[n * width + m];
    let mut matched = Vec::new();
    if want_alignment {
        matched = vec![false; n];
        let (mut i, mut j) = (n, m);
        while i > 0 && j > 0 {
            let h = order[i - 1];
            let here = table[i * width + j];
            let same = hyp[h] == reference[j - 1];
            let diagonal = table[(i - 1) * width + j - 1]
                + if same { 0.0 } else { substitution.cost(hyp_weights[h], ref_weights[j - 1]) };
            if (here - diagonal).abs() < 1e-9 {
                matched[i - 1] = same;
                i -= 1;
                j -= 1;
            } else if (here - (table[(i - 1) * width + j] + hyp_weights[h])).abs() < 1e-9 {
                i -= 1;
            } else {
                j -= 1;
            }
        }
    }
    (cost, matched)
}

fn contains_block(haystack: &[&str], needle: &[&str]) -> bool {
    haystack.windows(needle.len()).any(|w| w == needle)
}

/// Weighted TER with greedy block shifts.
///
/// Each round tries every block of the hypothesis that occurs verbatim in the
/// reference and is not already fully aligned, at every destination within
/// `max_shift_distance`, and applies the shift that lowers the total cost the
/// most. Rounds stop when no shift lowers the cost.
pub fn ter(
    hypothesis: &[String],
    hyp_weights: &[f64],
    reference: &[String],
    ref_weights: &[f64],
    cfg: &TerConfig,
) -> Result<TerScore> {
    if hyp_weights.len() != hypothesis.len() || ref_weights.len() != reference.len() {
        return Err(Error::LengthMismatch("TER weights must match token counts".into()));
    }
    if hyp_weights.iter().chain(ref_weights).any(|w| w.is_nan() || *w <= 0.0) {
        return Err(Error::Invalid("TER weights must be positive".into()));
    }
    let hyp: Vec<&str> = hypothesis.iter().map(String::as_str).collect();
    let reference_str: Vec<&str> = reference.iter().map(String::as_str).collect();
    let ref_weight: f64 = ref_weights.iter().sum();
    let degenerate = reference.is_empty() && !hypothesis.is_empty();
    if degenerate {
        log::warn!("empty reference with a non-empty hypothesis");
    }

    let mut order: Vec<usize> = (0..hyp.len()).collect();
    let mut shifts = 0usize;
    let (mut edit, mut matched) =
        edit_distance(&hyp, hyp_weights, &order, &reference_str, ref_weights, cfg.substitution, true);

    loop {
        let mut best: Option<(f64, Vec<usize>)> = None;
        let n = order.len();
        for start in 0..n {
            for len in 1..=cfg.max_shift_size.min(n - start) {
                let block: Vec<&str> = order[start..start + len].iter().map(|&h| hyp[h]).collect();
                if !contains_block(&reference_str, &block) {
                    break;
                }
                if matched[start..start + len].iter().all(|m| *m) {
                    continue;
                }
                let mut rest: Vec<usize> = order[..start].to_vec();
                rest.extend_from_slice(&order[start + len..]);
                for dest in 0..=rest.len() {
                    if dest == start || dest.abs_diff(start) > cfg.max_shift_distance {
                        continue;
                    }
                    let mut candidate = Vec::with_capacity(n);
                    candidate.extend_from_slice(&rest[..dest]);
                    candidate.extend_from_slice(&order[start..start + len]);
                    candidate.extend_from_slice(&rest[dest..]);
                    let (cost, _) = edit_distance(
                        &hyp,
                        hyp_weights,
                        &candidate,
                        &reference_str,
                        ref_weights,
                        cfg.substitution,
                        false,
                    );
                    let total = cost + cfg.shift_cost;
                    let improves = total < edit - 1e-9;
                    let beats_best = best.as_ref().is_none_or(|(b, _)| total < *b - 1e-12);
                    if improves && beats_best {
                        best = Some((total, candidate));
                    }
                }
            }
        }
        match best {
            None => break,
            Some((_, candidate)) => {
                order = candidate;
                shifts += 1;
                (edit, matched) = edit_distance(
                    &hyp,
                    hyp_weights,
                    &order,
                    &reference_str,
                    ref_weights,
                    cfg.substitution,
                    true,
                );
            }
        }
    }
    Ok(TerScore {
        cost: edit + shifts as f64 * cfg.shift_cost,
        ref_weight,
        shifts,
        degenerate,
    })
}

/// Unweighted TER score (edits per reference token).
pub fn ter_unit(hypothesis: &[String], reference: &[String]) -> Result<f64> {
    let score = ter(
        hypothesis,
        &vec![1.0; hypothesis.len()],
        reference,
        &vec![1.0; reference.len()],
        &TerConfig::default(),
    )?;
    Ok(score.score())
}

const BLEU_ORDER: usize = 4;

/// Sufficient statistics of one sentence for corpus BLEU.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BleuStats {
    pub matches: [u64; BLEU_ORDER],
    pub hyp_ngrams: [u64; BLEU_ORDER],
    pub ref_ngrams: [u64; BLEU_ORDER],
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl std::ops::AddAssign for BleuStats {
    fn add_assign(&mut self, other: Self) {
        for n in 0..BLEU_ORDER {
            self.matches[n] += other.matches[n];
            self.hyp_ngrams[n] += other.hyp_ngrams[n];
            self.ref_ngrams[n] += other.ref_ngrams[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

pub fn bleu_stats(hypothesis: &[String], reference: &[String]) -> BleuStats {
    let mut stats = BleuStats {
        hyp_len: hypothesis.len() as u64,
        ref_len: reference.len() as u64,
        ..Default::default()
    };
    for n in 1..=BLEU_ORDER {
        let hyp_counts = ngram_counts(hypothesis, n);
        let ref_counts = ngram_counts(reference, n);
        stats.matches[n - 1] = hyp_counts
            .iter()
            .map(|(gram, c)| (*c).min(ref_counts.get(gram).copied().unwrap_or(0)))
            .sum();
        stats.hyp_ngrams[n - 1] = hypothesis.len().saturating_sub(n - 1) as u64;
        stats.ref_ngrams[n - 1] = reference.len().saturating_sub(n - 1) as u64;
    }
    stats
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bleu {
    /// In `[0, 100]`.
    pub score: f64,
    pub precisions: [f64; BLEU_ORDER],
    pub brevity_penalty: f64,
    pub stats: BleuStats,
}

impl BleuStats {
    /// Corpus BLEU from accumulated statistics.
    ///
    /// An order with no matches gets precision `ε / max(total, 1)`. An order
    /// for which neither side has any n-gram counts as perfect, so identical
    /// corpora of short sentences still score 100.
    pub fn bleu(&self) -> Bleu {
        let precisions: [f64; BLEU_ORDER] = std::array::from_fn(|n| {
            if self.hyp_ngrams[n] == 0 && self.ref_ngrams[n] == 0 {
                1.0
            } else if self.matches[n] == 0 {
                BLEU_EPSILON / self.hyp_ngrams[n].max(1) as f64
            } else {
                self.matches[n] as f64 / self.hyp_ngrams[n] as f64
            }
        });
        let brevity_penalty = if self.hyp_len == 0 {
            0.0
        } else if self.hyp_len >= self.ref_len {
            1.0
        } else {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        };
        let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / BLEU_ORDER as f64;
        Bleu {
            score: 100.0 * brevity_penalty * log_mean.exp(),
            precisions,
            brevity_penalty,
            stats: *self,
        }
    }
}

pub fn corpus_bleu<H, R>(hypotheses: &[H], references: &[R]) -> Result<Bleu>
where
    H: AsRef<[String]> + Sync,
    R: AsRef<[String]> + Sync,
{
    if hypotheses.len() != references.len() {
        return Err(Error::LengthMismatch(format!(
            "{} hypotheses vs {} references",
            hypotheses.len(),
            references.len()
        )));
    }
    if hypotheses.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let per_sentence: Vec<BleuStats> = hypotheses
        .par_iter()
        .zip(references)
        .map(|(h, r)| bleu_stats(h.as_ref(), r.as_ref()))
        .collect();
    let mut total = BleuStats::default();
    for stats in per_sentence {
        total += stats;
    }
    Ok(total.bleu())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub weights: TermWeights,
    pub ter: TerConfig,
    pub window_norm: WindowNorm,
    pub em_counting: EmCounting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TermCounts {
    pub terms_total: usize,
    pub terms_covered: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SentenceReport {
    pub line: usize,
    pub terms_total: usize,
    pub terms_covered: usize,
    pub window2: Vec<f64>,
    pub window3: Vec<f64>,
    pub ter_cost: f64,
    pub ref_weight: f64,
    pub shifts: usize,
    pub sentence_bleu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub bleu: f64,
    pub exact_match: f64,
    pub window2: f64,
    pub window3: f64,
    pub one_minus_term: f64,
    pub counts: TermCounts,
    /// Set when no expected terms were given and EM defaulted to 1.
    pub exact_match_vacuous: bool,
    pub per_sentence: Vec<SentenceReport>,
}

impl MetricReport {
    /// One row in the column order BLEU, EM, window 2, window 3, 1-TERm.
    pub fn table_row(&self) -> String {
        format!(
            "{:.3}\t{:.3}\t{:.3}\t{:.3}\t{:.3}",
            self.bleu, self.exact_match, self.window2, self.window3, self.one_minus_term
        )
    }

    pub const TABLE_HEADER: &'static str = "BLEU\tEM\twindow 2\twindow 3\t1-TERm";
}

/// Computes every metric over the corpus.
pub fn evaluate(instances: &[EvalInstance], cfg: &EvalConfig, lemmatizer: &Lemmatizer) -> Result<MetricReport> {
    cfg.weights.validate()?;
    if instances.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let per_sentence: Vec<(SentenceReport, BleuStats)> = instances
        .par_iter()
        .enumerate()
        .map(|(line, instance)| -> Result<(SentenceReport, BleuStats)> {
            let (terms_covered, terms_total) = instance_em(instance, lemmatizer, cfg.em_counting);
            let hyp = instance.hypothesis.surface();
            let reference = instance.reference.surface();
            let hyp_weights =
                term_weights_for(&instance.hypothesis, &instance.expected_terms, cfg.weights, lemmatizer);
            let ref_weights =
                term_weights_for(&instance.reference, &instance.expected_terms, cfg.weights, lemmatizer);
            let ter = ter(hyp, &hyp_weights, reference, &ref_weights, &cfg.ter)?;
            let stats = bleu_stats(hyp, reference);
            Ok((
                SentenceReport {
                    line,
                    terms_total,
                    terms_covered,
                    window2: instance_windows(instance, 2, cfg.window_norm, lemmatizer),
                    window3: instance_windows(instance, 3, cfg.window_norm, lemmatizer),
                    ter_cost: ter.cost,
                    ref_weight: ter.ref_weight,
                    shifts: ter.shifts,
                    sentence_bleu: stats.bleu().score,
                },
                stats,
            ))
        })
        .collect::<Result<_>>()?;

    let mut bleu = BleuStats::default();
    let (mut cost, mut ref_weight) = (0.0, 0.0);
    for (report, stats) in &per_sentence {
        bleu += *stats;
        cost += report.ter_cost;
        ref_weight += report.ref_weight;
    }
    let counts: Vec<(usize, usize)> = per_sentence
        .iter()
        .map(|(r, _)| (r.terms_covered, r.terms_total))
        .collect();
    let em = em_from_counts(
        counts.iter().map(|c| c.0).sum(),
        counts.iter().map(|c| c.1).sum(),
        counts,
    );
    let window2 = mean_windows(per_sentence.iter().map(|(r, _)| r.window2.clone()).collect());
    let window3 = mean_windows(per_sentence.iter().map(|(r, _)| r.window3.clone()).collect());
    let one_minus_term = if cost == 0.0 {
        1.0
    } else {
        1.0 - cost / ref_weight.max(TER_EPSILON)
    };
    Ok(MetricReport {
        bleu: bleu.bleu().score,
        exact_match: em.fraction,
        window2: window2.score,
        window3: window3.score,
        one_minus_term,
        counts: TermCounts {
            terms_total: em.total,
            terms_covered: em.covered,
        },
        exact_match_vacuous: em.vacuous,
        per_sentence: per_sentence.into_iter().map(|(r, _)| r).collect(),
    })
}
