//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL line
//! for each and exits non-zero if any failed.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use termprep::annotate::{annotate, parse_factored_line, AnnotationConfig, Scheme};
use termprep::combine::{combine, Choice, Fallback, SystemOutput};
use termprep::lemma::{LemmaDictionary, Lemmatizer};
use termprep::metrics::{
    evaluate, exact_match, ter, EmCounting, EvalConfig, EvalInstance, TerConfig,
};
use termprep::model::{
    format_sidecar_line, tokenize, tokenize_split_punct, ConstraintSpec, Mode, Origin, TokenizedSentence,
};
use termprep::pipeline::{run_pipeline, PipelineConfig};
use termprep::sampler::{build_ngram_pool, sample_sentence, NgramPool, SamplerConfig};
use termprep::termbase::{matches_to_constraints, MatchLevel, TermBase, TermEntry, VariantPolicy};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_owned).collect()
}

fn term(s: &str) -> ConstraintSpec {
    ConstraintSpec::new(vec![toks(s)], Origin::SampledFromTarget, Mode::Surface, None).unwrap()
}

// Annotation fidelity

fn annotation_fidelity() -> Outcome {
    let start = Instant::now();
    let lem = Lemmatizer::default();
    let tb = TermBase::from_entries(vec![
        TermEntry::new(toks("runny nose"), vec![toks("nez qui coule")], &lem).unwrap(),
        TermEntry::new(toks("fever"), vec![toks("fièvre")], &lem).unwrap(),
    ]);
    let source = tokenize_split_punct("And are you having a runny nose or fever?");
    let matches = tb.find_matches(&source, &lem);
    let constraints = matches_to_constraints(&matches, &tb, Mode::Surface, VariantPolicy::FirstOnly).unwrap();
    let run = |scheme| {
        let cfg = AnnotationConfig {
            scheme,
            ..AnnotationConfig::default()
        };
        annotate(&source, &constraints, &cfg, 0).unwrap().to_line()
    };
    let suffix = run(Scheme::Suffix);
    let factored = run(Scheme::Factored);
    let replaced = run(Scheme::Replace);
    let (_, factors) = parse_factored_line(&factored).unwrap();
    let elapsed = start.elapsed();

    let mut problems = Vec::new();
    if !suffix.ends_with("<sep> nez qui coule <c> fièvre") {
        problems.push(format!("suffix {suffix:?}"));
    }
    if factors != [0, 0, 0, 0, 0, 1, 1, 2, 2, 2, 0, 1, 2, 0] {
        problems.push(format!("factors {factors:?}"));
    }
    if replaced != "And are you having a nez qui coule or fièvre ?" {
        problems.push(format!("replace {replaced:?}"));
    }
    if elapsed >= Duration::from_secs(1) {
        problems.push(format!("took {elapsed:?}"));
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!("suffix, factored and replace outputs exact in {elapsed:?}")
        } else {
            problems.join("; ")
        },
    )
}

// Sampler statistics

const SAMPLER_SENTENCES: usize = 100_000;

fn synthetic_sentences(count: usize, len: usize, vocab: usize, seed: u64) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..len).map(|_| format!("w{}", rng.gen_range(0..vocab))).collect())
        .collect()
}

fn sample_all(sentences: &[Vec<String>], cfg: &SamplerConfig, pool: &NgramPool, jobs: usize) -> Vec<Vec<ConstraintSpec>> {
    let lengths = cfg.decoy_lengths();
    let threads = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().unwrap();
    threads.install(|| {
        sentences
            .par_iter()
            .enumerate()
            .map(|(i, s)| sample_sentence(s, i as u64, cfg, &lengths, pool).unwrap())
            .collect()
    })
}

fn sidecar_bytes(sampled: &[Vec<ConstraintSpec>]) -> Vec<u8> {
    let mut out = Vec::new();
    for (i, constraints) in sampled.iter().enumerate() {
        writeln!(out, "{}", format_sidecar_line(i as u64, constraints).unwrap()).unwrap();
    }
    out
}

fn sampler_statistics() -> Vec<(&'static str, Outcome)> {
    let start = Instant::now();
    let sentences = synthetic_sentences(SAMPLER_SENTENCES, 20, 5000, 11);
    let pool = build_ngram_pool(sentences.iter().map(Vec::as_slice), 20, 20_000, 3).unwrap();
    let cfg = SamplerConfig {
        seed: 2024,
        ..SamplerConfig::default()
    };
    let sampled = sample_all(&sentences, &cfg, &pool, 8);
    let mut results = Vec::new();

    let zero = sampled.iter().filter(|c| c.is_empty()).count() as f64 / SAMPLER_SENTENCES as f64;
    let expected_zero = cfg.n + (1.0 - cfg.n) * (1.0 - cfg.s).powi(20);
    results.push((
        "sampler (a) zero-constraint fraction",
        outcome(
            (zero - expected_zero).abs() <= 0.005,
            format!("observed {zero:.5}, expected {expected_zero:.5}, tolerance 0.005"),
        ),
    ));

    let all: Vec<&ConstraintSpec> = sampled.iter().flatten().collect();
    let with_decoy = all.iter().filter(|c| c.variants().len() > 1).count() as f64 / all.len() as f64;
    results.push((
        "sampler (b) decoy-variant rate",
        outcome(
            (with_decoy - cfg.v).abs() <= 0.005,
            format!("observed {with_decoy:.5} over {} constraints, expected {}, tolerance 0.005", all.len(), cfg.v),
        ),
    ));

    let forced = SamplerConfig {
        v: 1.0,
        l: 0.0,
        ..cfg.clone()
    };
    let decoyed = sample_all(&sentences, &forced, &pool, 8);
    let mut histogram = [0u64; 10];
    for c in decoyed.iter().flatten() {
        histogram[c.variants()[1].len().min(9)] += 1;
    }
    let total: u64 = histogram.iter().sum();
    let pmf: Vec<(usize, f64)> = forced.decoy_lengths().pmf().collect();
    let mut statistic = 0.0;
    let mut cells = 0;
    let mut empty_cells_hit = 0;
    for &(k, p) in &pmf {
        let observed = histogram[k] as f64;
        if p > 0.0 {
            let expected = p * total as f64;
            statistic += (observed - expected).powi(2) / expected;
            cells += 1;
        } else {
            empty_cells_hit += histogram[k];
        }
    }
    let p_value = 1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(statistic);
    results.push((
        "sampler (c) decoy length chi-square",
        outcome(
            p_value > 0.01 && empty_cells_hit == 0 && histogram[0] == 0,
            format!(
                "chi2 {statistic:.3} on {} df, p = {p_value:.4}, {total} decoys, histogram {:?}",
                cells - 1,
                &histogram[1..]
            ),
        ),
    ));

    let one = sidecar_bytes(&sample_all(&sentences, &cfg, &pool, 1));
    let eight = sidecar_bytes(&sampled);
    let elapsed = start.elapsed();
    results.push((
        "sampler (d) 1 vs 8 workers",
        outcome(
            one == eight && elapsed < Duration::from_secs(120),
            format!(
                "{} bytes, identical: {}, sampler criteria took {elapsed:.1?}",
                one.len(),
                one == eight
            ),
        ),
    ));
    results
}

// TER against exhaustive search

fn edit_distance(a: &[u8], b: &[u8]) -> usize {
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for i in 1..=a.len() {
        let mut diag = row[0];
        row[0] = i;
        for j in 1..=b.len() {
            let up = row[j];
            row[j] = (row[j] + 1).min(row[j - 1] + 1).min(diag + usize::from(a[i - 1] != b[j - 1]));
            diag = up;
        }
    }
    row[b.len()]
}

/// Minimum of (number of block moves + edit distance) over every sequence
/// of block moves, by breadth-first search.
fn ter_oracle(hyp: &[u8], reference: &[u8]) -> usize {
    let mut best = edit_distance(hyp, reference);
    let mut depth: HashMap<Vec<u8>, usize> = HashMap::from([(hyp.to_vec(), 0)]);
    let mut queue = VecDeque::from([hyp.to_vec()]);
    while let Some(state) = queue.pop_front() {
        let d = depth[&state];
        best = best.min(d + edit_distance(&state, reference));
        if d + 1 >= best {
            continue;
        }
        let n = state.len();
        for i in 0..n {
            for j in i + 1..=n {
                let block = &state[i..j];
                let rest: Vec<u8> = state[..i].iter().chain(&state[j..]).copied().collect();
                for k in 0..=rest.len() {
                    if k == i {
                        continue;
                    }
                    let mut next = rest[..k].to_vec();
                    next.extend_from_slice(block);
                    next.extend_from_slice(&rest[k..]);
                    if !depth.contains_key(&next) {
                        depth.insert(next.clone(), d + 1);
                        queue.push_back(next);
                    }
                }
            }
        }
    }
    best
}

fn ter_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let cfg = TerConfig::default();
    let (mut equal, mut undercut, mut plain_mismatch, mut plain_cases) = (0, 0, 0, 0);
    let cases = 2000;
    for _ in 0..cases {
        let vocab = rng.gen_range(1..=5u8);
        let hyp: Vec<u8> = (0..rng.gen_range(0..=6)).map(|_| rng.gen_range(0..vocab)).collect();
        let reference: Vec<u8> = (0..rng.gen_range(1..=6)).map(|_| rng.gen_range(0..vocab)).collect();
        let words = |s: &[u8]| s.iter().map(|b| format!("t{b}")).collect::<Vec<_>>();
        let (h, r) = (words(&hyp), words(&reference));
        let greedy = ter(&h, &vec![1.0; h.len()], &r, &vec![1.0; r.len()], &cfg).unwrap().cost;
        let oracle = ter_oracle(&hyp, &reference) as f64;
        if greedy == oracle {
            equal += 1;
        }
        if greedy < oracle - 1e-9 {
            undercut += 1;
        }
        if oracle == edit_distance(&hyp, &reference) as f64 {
            plain_cases += 1;
            if greedy != oracle {
                plain_mismatch += 1;
            }
        }
    }
    let rate = equal as f64 / cases as f64;
    let elapsed = start.elapsed();
    outcome(
        rate >= 0.97 && undercut == 0 && plain_mismatch == 0 && elapsed < Duration::from_secs(300),
        format!(
            "equal in {equal}/{cases} ({:.2}%), undercuts {undercut}, no-shift cases {plain_cases} with {plain_mismatch} mismatches, {elapsed:.1?}",
            rate * 100.0
        ),
    )
}

// Metric fixtures

fn instance(reference: &str, hypothesis: &str, terms: &[&str]) -> EvalInstance {
    EvalInstance {
        source: tokenize("x"),
        hypothesis: tokenize(hypothesis),
        reference: tokenize(reference),
        expected_terms: terms.iter().map(|t| term(t)).collect(),
    }
}

fn metric_fixtures() -> Outcome {
    let lem = Lemmatizer::default();
    let cfg = EvalConfig::default();
    let fixture = [
        instance(
            "the patient has a runny nose and a fever today",
            "the patient has runny nose and fever today",
            &["runny nose", "fever"],
        ),
        instance("wash your hands with soap", "with soap wash your hands", &["soap"]),
        instance("the vaccine is safe", "the vaccine is safe and effective", &["Vaccine", "booster"]),
    ];
    // Values from an independent script: n-gram counting BLEU, exhaustive
    // block-move search for weighted TER, direct window extraction.
    let expected = [39.219194, 0.800000, 0.666667, 0.854167, 0.791667];
    let report = evaluate(&fixture, &cfg, &lem).unwrap();
    let got = [report.bleu, report.exact_match, report.window2, report.window3, report.one_minus_term];
    let fixture_ok = got.iter().zip(expected).all(|(g, e)| (g - e).abs() < 5e-7);

    let perfect: Vec<EvalInstance> = fixture
        .iter()
        .map(|i| EvalInstance {
            hypothesis: i.reference.clone(),
            expected_terms: i.expected_terms[..1].to_vec(),
            ..i.clone()
        })
        .collect();
    let p = evaluate(&perfect, &cfg, &lem).unwrap();
    let perfect_got = [p.bleu, p.exact_match, p.window2, p.window3, p.one_minus_term];
    let perfect_ok = perfect_got == [100.0, 1.0, 1.0, 1.0, 1.0];

    let mut tally: Vec<EvalInstance> = (0..872)
        .map(|i| instance("a term b", if i < 10 { "a b" } else { "a term b" }, &["term"]))
        .collect();
    tally.shuffle(&mut ChaCha8Rng::seed_from_u64(5));
    let em = exact_match(&tally, &lem, EmCounting::PerOccurrence);
    let em_ok = em.covered == 862 && em.total == 872 && format!("{:.3}", em.fraction) == "0.989";

    outcome(
        fixture_ok && perfect_ok && em_ok,
        format!(
            "fixture {:?} (expected {expected:?}); perfect {perfect_got:?}; EM {}/{} = {:.3}",
            got.map(|g| (g * 1e6).round() / 1e6),
            em.covered,
            em.total,
            em.fraction
        ),
    )
}

// Combiner dominance

fn combiner_dominance() -> Outcome {
    let lem = Lemmatizer::default();
    let lines = [
        ["la grippe est là", "la maladie est là", "la grippe est ici", "une grippe"],
        ["le vaccin marche", "le vaccin fonctionne", "un produit marche", "rien"],
        ["masque et gel", "masque seul", "gel seul", "masque et gel hydroalcoolique"],
        ["pas de terme ici", "ni là", "toujours rien", "encore rien"],
        ["le virus SARS-CoV", "le virus", "le coronavirus", "un virus"],
    ];
    let term_lists: [&[&str]; 5] = [&["grippe"], &["vaccin"], &["masque", "gel hydroalcoolique"], &["quarantaine"], &["SARS-CoV"]];
    let per_line: BTreeMap<u64, Vec<ConstraintSpec>> = term_lists
        .iter()
        .enumerate()
        .map(|(i, ts)| (i as u64, ts.iter().map(|t| term(t)).collect()))
        .collect();
    let bleus = [44.0, 45.0, 43.0, 41.0];
    let ids = ["base", "lemm", "sf", "comb"];
    let systems: Vec<SystemOutput> = (0..4)
        .map(|s| SystemOutput {
            system_id: ids[s].into(),
            validation_bleu: bleus[s],
            translations: lines.iter().map(|l| tokenize(l[s])).collect(),
        })
        .collect();
    let em_of = |translations: &[TokenizedSentence]| {
        let instances: Vec<EvalInstance> = translations
            .iter()
            .enumerate()
            .map(|(i, t)| EvalInstance {
                source: tokenize("x"),
                hypothesis: t.clone(),
                reference: t.clone(),
                expected_terms: per_line[&(i as u64)].clone(),
            })
            .collect();
        exact_match(&instances, &lem, EmCounting::PerOccurrence).fraction
    };
    let best_single = systems.iter().map(|s| em_of(&s.translations)).fold(0.0, f64::max);
    let choices = combine(&systems, "base", &per_line, &lem, Fallback::Baseline).unwrap();
    let combined: Vec<TokenizedSentence> = choices.iter().map(|c| c.translation.clone()).collect();
    let combined_em = em_of(&combined);
    let fallback_fired = choices[3].fell_back && choices[3].system_id == "base";

    let mut order: Vec<usize> = (0..4).collect();
    let mut invariant = true;
    let mut permutations = 0;
    permute(&mut order, 0, &mut |perm| {
        let shuffled: Vec<SystemOutput> = perm.iter().map(|&i| systems[i].clone()).collect();
        let again: Vec<Choice> = combine(&shuffled, "base", &per_line, &lem, Fallback::Baseline).unwrap();
        invariant &= again == choices;
        permutations += 1;
    });
    outcome(
        combined_em >= best_single && fallback_fired && invariant,
        format!(
            "combined EM {combined_em:.3} vs best single {best_single:.3}; fallback on line 3: {fallback_fired}; invariant over {permutations} orders: {invariant}"
        ),
    )
}

fn permute(items: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

// Matching correctness

/// All-spans matcher: at each position list every entry matching at surface
/// or lemma level and keep the longest, surface first, lowest index.
fn brute_force_matches(
    sentence: &[String],
    entries: &[(Vec<String>, Vec<String>)],
    lemma_of: &dyn Fn(&str) -> String,
) -> Vec<(usize, std::ops::Range<usize>, MatchLevel)> {
    let lemmas: Vec<String> = sentence.iter().map(|w| lemma_of(w)).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < sentence.len() {
        let mut best: Option<(usize, usize, MatchLevel)> = None;
        for (index, (surface, lemma)) in entries.iter().enumerate() {
            let len = surface.len();
            if i + len > sentence.len() {
                continue;
            }
            let level = if sentence[i..i + len] == surface[..] {
                MatchLevel::Surface
            } else if lemmas[i..i + len] == lemma[..] {
                MatchLevel::Lemma
            } else {
                continue;
            };
            let rank = |l: usize, lv: MatchLevel| (l, lv == MatchLevel::Surface);
            let better = match best {
                None => true,
                Some((_, bl, blv)) => rank(len, level) > rank(bl, blv),
            };
            if better {
                best = Some((index, len, level));
            }
        }
        match best {
            Some((index, len, level)) => {
                out.push((index, i..i + len, level));
                i += len;
            }
            None => i += 1,
        }
    }
    out
}

fn matching_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let vocab = ["a", "b", "c", "A", "B", "bs", "cs", "Cs"];
    let dict_pairs = [("bs", "b"), ("cs", "c")];
    let lem = Lemmatizer::with_dictionary(LemmaDictionary::from_pairs(dict_pairs, true), true);
    let dict: HashMap<&str, &str> = dict_pairs.into_iter().collect();
    let lemma_of = |w: &str| {
        let lower = w.to_lowercase();
        dict.get(lower.as_str()).map_or(lower.clone(), |l| l.to_string())
    };
    let mut disagreements = 0;
    let mut total_matches = 0;
    for _ in 0..1000 {
        let sentence: Vec<String> = (0..rng.gen_range(0..=8))
            .map(|_| vocab[rng.gen_range(0..vocab.len())].to_string())
            .collect();
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for _ in 0..rng.gen_range(1..=6) {
            let source: Vec<String> = (0..rng.gen_range(1..=3))
                .map(|_| vocab[rng.gen_range(0..vocab.len())].to_string())
                .collect();
            if seen.insert(source.clone()) {
                entries.push(source);
            }
        }
        let tb = TermBase::from_entries(
            entries
                .iter()
                .map(|s| TermEntry::new(s.clone(), vec![toks("t")], &lem).unwrap())
                .collect(),
        );
        let oracle_entries: Vec<(Vec<String>, Vec<String>)> = entries
            .iter()
            .map(|s| (s.clone(), s.iter().map(|w| lemma_of(w)).collect()))
            .collect();
        let expected = brute_force_matches(&sentence, &oracle_entries, &lemma_of);
        let got: Vec<_> = tb
            .find_matches(&TokenizedSentence::from_tokens(sentence.clone()).unwrap(), &lem)
            .into_iter()
            .map(|m| (m.entry_index, m.span, m.level))
            .collect();
        total_matches += expected.len();
        if got != expected {
            disagreements += 1;
        }
    }

    let fr = Lemmatizer::with_dictionary(
        LemmaDictionary::from_pairs([("maladies", "maladie"), ("grippales", "grippal")], true),
        true,
    );
    let flu = TermBase::from_entries(vec![TermEntry::new(toks("maladie grippal"), vec![toks("flu")], &fr).unwrap()]);
    let flu_matches = flu.find_matches(&tokenize("des maladies grippales graves"), &fr);
    let flu_ok = flu_matches.len() == 1 && flu_matches[0].span == (1..3) && flu_matches[0].level == MatchLevel::Lemma;

    let en = Lemmatizer::default();
    let sars = TermBase::from_entries(vec![
        TermEntry::new(toks("SARS-CoV"), vec![toks("SARS-CoV")], &en).unwrap(),
    ]);
    let sentence = tokenize("the SARS-CoV virus");
    let sars_matches = sars.find_matches(&sentence, &en);
    let lemma_constraints = matches_to_constraints(&sars_matches, &sars, Mode::Lemma, VariantPolicy::FirstOnly).unwrap();
    let sars_ok = sars_matches.len() == 1
        && sars_matches[0].level == MatchLevel::Surface
        && lemma_constraints[0].first_variant() == ["SARS-CoV"];

    outcome(
        disagreements == 0 && flu_ok && sars_ok,
        format!(
            "{disagreements} disagreements over 1000 instances ({total_matches} matches); maladies grippales: {flu_ok}; SARS-CoV case kept: {sars_ok}"
        ),
    )
}

// Pipeline scale and determinism

const PIPELINE_LINES: usize = 1_000_000;

fn write_corpus(path: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let mut out = std::io::BufWriter::new(fs::File::create(path).unwrap());
    let line = |rng: &mut ChaCha8Rng, prefix: char, len: usize| {
        (0..len)
            .map(|_| format!("{prefix}{}", rng.gen_range(0..20_000)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    for i in 0..PIPELINE_LINES {
        // Some duplicates and some pairs the filters drop.
        let (s, t) = if i % 50 == 49 {
            ("s1 s2 s3".to_owned(), "t1 t2 t3".to_owned())
        } else if i % 97 == 0 {
            (line(&mut rng, 's', 1), line(&mut rng, 't', 15))
        } else {
            let n = rng.gen_range(5..30);
            let m = (n as f64 * rng.gen_range(0.8..1.3)) as usize;
            (line(&mut rng, 's', n), line(&mut rng, 't', m.max(1)))
        };
        writeln!(out, "{s}\t{t}").unwrap();
    }
    out.flush().unwrap();
}

fn digest_outputs(dir: &Path) -> String {
    let mut hasher = Sha256::new();
    for file in ["clean.src", "clean.tgt", "pool.tsv", "constraints.tsv", "train.src"] {
        hasher.update(fs::read(dir.join(file)).unwrap());
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn peak_rss_kib() -> Option<u64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    status
        .lines()
        .find_map(|l| l.strip_prefix("VmHWM:"))
        .and_then(|v| v.trim().trim_end_matches("kB").trim().parse().ok())
}

fn pipeline_scale() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.tsv");
    write_corpus(&corpus);
    let config = |out: &str, shard: usize| {
        format!(
            "shard_size = {shard}\n[input]\ntsv = {:?}\n[output]\ndir = {:?}\n[pool]\nseed = 3\n[sample]\nseed = 17\n",
            corpus.display().to_string(),
            dir.path().join(out).display().to_string()
        )
    };
    let run = |out: &str, shard: usize, jobs: usize| {
        let text = config(out, shard);
        let cfg = PipelineConfig::parse(&text).unwrap();
        let threads = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().unwrap();
        let start = Instant::now();
        let manifest = threads.install(|| run_pipeline(&cfg, text.as_bytes())).unwrap();
        let stats = serde_json::to_string(&(&manifest.clean, &manifest.pool, &manifest.annotate)).unwrap();
        (start.elapsed(), manifest, digest_outputs(&dir.path().join(out)) + &stats)
    };
    let (four_time, manifest, four) = run("four", 10_000, 4);
    let (_, _, four_again) = run("four_again", 10_000, 4);
    let (one_time, _, one) = run("one", 10_000, 1);
    let (_, _, eight) = run("eight", 4_321, 8);
    let identical = four == four_again && four == one && four == eight;
    let peak = peak_rss_kib();
    let memory_ok = peak.is_some_and(|kib| kib < 2 * 1024 * 1024);
    outcome(
        identical && memory_ok && four_time < Duration::from_secs(600) && manifest.clean.total == PIPELINE_LINES as u64,
        format!(
            "{} lines, {} kept; 4 workers {four_time:.1?}, 1 worker {one_time:.1?}; identical across runs, 1/4/8 workers and shard sizes: {identical}; peak RSS {} MiB",
            manifest.clean.total,
            manifest.clean.kept,
            peak.map_or("unknown".into(), |k| (k / 1024).to_string())
        ),
    )
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut report = |name, o: Outcome| {
        println!("{} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        results.push((name, o));
    };
    report("annotation fidelity", annotation_fidelity());
    for (name, o) in sampler_statistics() {
        report(name, o);
    }
    report("TER oracle equivalence", ter_oracle_equivalence());
    report("metric fixtures", metric_fixtures());
    report("combiner dominance", combiner_dominance());
    report("matching correctness", matching_correctness());
    report("pipeline scale and determinism", pipeline_scale());
    let failed = results.iter().filter(|(_, o)| !o.passed).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
