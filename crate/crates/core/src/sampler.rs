//! Synthetic training constraints.
//!
//! Constraints are random contiguous spans of the target sentence. A span
//! opens on a token with probability `s`; every following token closes it
//! with probability `e` (the closing token is not part of the span) and is
//! otherwise appended. A whole sentence is skipped with probability `n`.
//! With probability `v` a constraint also gets a decoy variant drawn from a
//! pool of target-corpus n-grams, of the same length with probability `l`
//! and otherwise of a length drawn from a discrete triangular distribution.
//!
//! Every sentence draws from its own ChaCha stream keyed by
//! `(seed, line_index)`, so results do not depend on corpus order or on how
//! the corpus is split between workers.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ConstraintSpec, Tokens};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Probability that a token opens a constraint.
    pub s: f64,
    /// Probability that a token closes the open constraint.
    pub e: f64,
    /// Probability that a sentence gets no constraints at all.
    pub n: f64,
    /// Probability that a constraint gets a decoy variant.
    pub v: f64,
    /// Probability that a decoy has the same length as its constraint.
    pub l: f64,
    pub tri_min: usize,
    pub tri_max: usize,
    pub tri_mode: usize,
    pub seed: u64,
    /// Randomize variant order inside each constraint.
    pub shuffle_variants: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            s: 0.1,
            e: 0.75,
            n: 0.1,
            v: 0.1,
            l: 0.9,
            tri_min: 1,
            tri_max: 9,
            tri_mode: 2,
            seed: 0,
            shuffle_variants: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("s", self.s), ("e", self.e), ("n", self.n), ("v", self.v), ("l", self.l)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Invalid(format!("probability {name}={p} outside [0, 1]")));
            }
        }
        if !(1 <= self.tri_min && self.tri_min <= self.tri_mode && self.tri_mode <= self.tri_max) {
            return Err(Error::Invalid(format!(
                "triangular lengths need 1 <= min <= mode <= max, got {}/{}/{}",
                self.tri_min, self.tri_mode, self.tri_max
            )));
        }
        Ok(())
    }

    pub fn decoy_lengths(&self) -> TriangularLengths {
        TriangularLengths::new(self.tri_min, self.tri_mode, self.tri_max)
    }
}

/// Integer lengths with probability proportional to the continuous
/// triangular density evaluated at each integer of `min..=max`.
#[derive(Debug, Clone)]
pub struct TriangularLengths {
    min: usize,
    pmf: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl TriangularLengths {
    pub fn new(min: usize, mode: usize, max: usize) -> Self {
        assert!(min <= mode && mode <= max, "min <= mode <= max");
        let (a, c, b) = (min as f64, mode as f64, max as f64);
        let density = |x: f64| -> f64 {
            if a == b {
                1.0
            } else if x < c {
                2.0 * (x - a) / ((b - a) * (c - a))
            } else if x == c {
                2.0 / (b - a)
            } else {
                2.0 * (b - x) / ((b - a) * (b - c))
            }
        };
        let weights: Vec<f64> = (min..=max).map(|k| density(k as f64)).collect();
        let total: f64 = weights.iter().sum();
        let pmf = weights.iter().map(|w| w / total).collect();
        Self {
            min,
            pmf,
            index: WeightedIndex::new(&weights).expect("the mode has positive density"),
        }
    }

    /// `(length, probability)` pairs over the whole support range.
    pub fn pmf(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.pmf.iter().enumerate().map(|(i, p)| (self.min + i, *p))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.min + self.index.sample(rng)
    }
}

/// The random stream of one sentence.
pub fn sentence_rng(seed: u64, line_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(line_index);
    rng
}

/// Samples constraints from one target sentence.
pub fn sample_constraints<R: Rng + ?Sized>(
    target: &[String],
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Vec<ConstraintSpec> {
    let mut out: Vec<Tokens> = Vec::new();
    if rng.gen::<f64>() <= cfg.n {
        return Vec::new();
    }
    let mut open = false;
    let mut current: Tokens = Vec::new();
    for token in target {
        let r = rng.gen::<f64>();
        if open {
            if r < cfg.e {
                out.push(std::mem::take(&mut current));
                open = false;
            } else {
                current.push(token.clone());
            }
        } else if r < cfg.s {
            current.push(token.clone());
            open = true;
        }
    }
    if open {
        out.push(current);
    }
    out.into_iter()
        .map(|tokens| ConstraintSpec::sampled(tokens).expect("target tokens are valid"))
        .collect()
}

/// Decoy attempts per constraint before giving up on a variant that
/// duplicates an existing one.
const DECOY_ATTEMPTS: usize = 4;

/// Gives each constraint a decoy variant with probability `v`. The true
/// variant stays first unless `shuffle_variants` is set.
pub fn attach_variants<R: Rng + ?Sized>(
    constraints: Vec<ConstraintSpec>,
    cfg: &SamplerConfig,
    lengths: &TriangularLengths,
    pool: &NgramPool,
    rng: &mut R,
) -> Result<Vec<ConstraintSpec>> {
    let mut out = Vec::with_capacity(constraints.len());
    for mut constraint in constraints {
        if rng.gen::<f64>() < cfg.v {
            let len = if rng.gen::<f64>() < cfg.l {
                constraint.first_variant().len()
            } else {
                lengths.sample(rng)
            };
            for _ in 0..DECOY_ATTEMPTS {
                let decoy = pool.draw(len, rng)?.to_vec();
                if constraint.push_variant(decoy)? {
                    break;
                }
            }
        }
        if cfg.shuffle_variants {
            constraint.variants_mut().shuffle(rng);
        }
        out.push(constraint);
    }
    Ok(out)
}

/// Samples the full constraint list of one target sentence, decoys included.
pub fn sample_sentence(
    target: &[String],
    line_index: u64,
    cfg: &SamplerConfig,
    lengths: &TriangularLengths,
    pool: &NgramPool,
) -> Result<Vec<ConstraintSpec>> {
    let mut rng = sentence_rng(cfg.seed, line_index);
    let constraints = sample_constraints(target, cfg, &mut rng);
    attach_variants(constraints, cfg, lengths, pool, &mut rng)
}

/// Uniform reservoir samples of target-corpus n-grams, one per length.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NgramPool {
    by_length: BTreeMap<usize, Vec<Tokens>>,
    counts: BTreeMap<usize, u64>,
}

impl NgramPool {
    pub fn is_empty(&self) -> bool {
        self.by_length.values().all(Vec::is_empty)
    }

    pub fn get(&self, len: usize) -> &[Tokens] {
        self.by_length.get(&len).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Total n-grams of this length seen in the corpus.
    pub fn count(&self, len: usize) -> u64 {
        self.counts.get(&len).copied().unwrap_or(0)
    }

    pub fn lengths(&self) -> impl Iterator<Item = usize> + '_ {
        self.by_length
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(len, _)| *len)
    }

    /// Nearest non-empty length, preferring the shorter one on ties.
    fn resolve(&self, len: usize) -> Option<usize> {
        self.lengths()
            .min_by_key(|&have| (have.abs_diff(len), have))
    }

    /// Draws an n-gram of `len` tokens uniformly, falling back to the nearest
    /// available length.
    pub fn draw<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Result<&[String]> {
        let have = self.resolve(len).ok_or(Error::EmptyPool)?;
        if have != len {
            log::warn!("no {len}-grams in the pool, drawing a {have}-gram instead");
        }
        let bucket = &self.by_length[&have];
        Ok(&bucket[rng.gen_range(0..bucket.len())])
    }

    pub fn write(&self, writer: impl Write) -> Result<()> {
        let mut w = BufWriter::new(writer);
        for (len, count) in &self.counts {
            writeln!(w, "# count\t{len}\t{count}")?;
        }
        for (len, grams) in &self.by_length {
            for gram in grams {
                writeln!(w, "{len}\t{}", gram.join(" "))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(File::create(path).map_err(|e| Error::io(path, e))?)
    }

    /// Reads the `len<TAB>tok1 tok2 ...` format. `# count` lines restore the
    /// corpus totals; without them the totals are the stored counts.
    pub fn read(reader: impl Read, name: &Path) -> Result<Self> {
        let mut pool = NgramPool::default();
        let mut counted = false;
        for (no, line) in BufReader::new(reader).lines().enumerate() {
            let line = line.map_err(|e| Error::io(name, e))?;
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# count\t") {
                let parsed = rest
                    .split_once('\t')
                    .and_then(|(l, c)| Some((l.parse::<usize>().ok()?, c.parse::<u64>().ok()?)));
                let (len, count) =
                    parsed.ok_or_else(|| Error::parse(name, no + 1, "bad count line"))?;
                pool.counts.insert(len, count);
                counted = true;
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let (len, text) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(name, no + 1, "expected `len<TAB>tokens`"))?;
            let len: usize = len
                .parse()
                .map_err(|_| Error::parse(name, no + 1, "bad n-gram length"))?;
            let tokens: Tokens = text.split_whitespace().map(str::to_owned).collect();
            if tokens.len() != len || len == 0 {
                return Err(Error::parse(
                    name,
                    no + 1,
                    format!("n-gram has {} tokens, expected {len}", tokens.len()),
                ));
            }
            pool.by_length.entry(len).or_default().push(tokens);
        }
        if !counted {
            pool.counts = pool
                .by_length
                .iter()
                .map(|(len, v)| (*len, v.len() as u64))
                .collect();
        }
        Ok(pool)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(File::open(path).map_err(|e| Error::io(path, e))?, path)
    }
}

/// Incremental reservoir builder. Feeding sentences in the same order with the
/// same seed yields the same pool.
pub struct NgramPoolBuilder {
    max_len: usize,
    reservoir_size: usize,
    rng: ChaCha8Rng,
    reservoirs: Vec<Vec<Tokens>>,
    seen: Vec<u64>,
}

impl NgramPoolBuilder {
    pub fn new(max_len: usize, reservoir_size: usize, seed: u64) -> Result<Self> {
        if max_len == 0 {
            return Err(Error::Invalid("n-gram pool needs max_len >= 1".into()));
        }
        Ok(Self {
            max_len,
            reservoir_size,
            rng: ChaCha8Rng::seed_from_u64(seed),
            reservoirs: vec![Vec::new(); max_len],
            seen: vec![0; max_len],
        })
    }

    pub fn push(&mut self, tokens: &[String]) {
        for len in 1..=self.max_len.min(tokens.len()) {
            let slot = len - 1;
            for window in tokens.windows(len) {
                let seen = self.seen[slot];
                self.seen[slot] += 1;
                let reservoir = &mut self.reservoirs[slot];
                if reservoir.len() < self.reservoir_size {
                    reservoir.push(window.to_vec());
                } else {
                    let j = self.rng.gen_range(0..=seen);
                    if (j as usize) < self.reservoir_size {
                        reservoir[j as usize] = window.to_vec();
                    }
                }
            }
        }
    }

    pub fn finish(self) -> NgramPool {
        let mut pool = NgramPool::default();
        for (slot, (reservoir, seen)) in self.reservoirs.into_iter().zip(self.seen).enumerate() {
            if seen > 0 {
                pool.by_length.insert(slot + 1, reservoir);
                pool.counts.insert(slot + 1, seen);
            }
        }
        pool
    }
}

pub fn build_ngram_pool<'a, I>(corpus: I, max_len: usize, reservoir_size: usize, seed: u64) -> Result<NgramPool>
where
    I: IntoIterator<Item = &'a [String]>,
{
    let mut builder = NgramPoolBuilder::new(max_len, reservoir_size, seed)?;
    for sentence in corpus {
        builder.push(sentence);
    }
    Ok(builder.finish())
}
