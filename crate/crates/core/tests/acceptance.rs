//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.
//!
//! Set `RELPARA_BLESS=1` to rewrite the golden files from the current run.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use relpara_core::corpus::{load_dataset, sentences_from_texts, Article, Dataset};
use relpara_core::jsonl::read_jsonl;
use relpara_core::llm::{
    parse_summary, ChatModel, ExtractiveSummarizer, ModelSummary, ReversalParaphraser, RuleBackend, ScriptStep,
};
use relpara_core::metrics::rouge::{lcs_len, rouge_l, rouge_n};
use relpara_core::metrics::{parse_geval, performance_change};
use relpara_core::perturb::PerturbMode;
use relpara_core::pipeline::{run_experiment, run_experiment_with, Backends, RunConfig};
use relpara_core::relevance::{map_article, MapperKind, MapperMode, RelevanceMap};

type Check = Result<(), String>;
type Criterion = (&'static str, Duration, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn fixture() -> PathBuf {
    manifest_dir().join("tests/fixtures/fixture20.jsonl")
}

fn golden(name: &str) -> PathBuf {
    manifest_dir().join("tests/golden").join(name)
}

fn blessing() -> bool {
    std::env::var("RELPARA_BLESS").is_ok_and(|v| v == "1")
}

// ---------------------------------------------------------------- oracles

fn oracle_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn oracle_prf(hits: usize, cand: usize, refr: usize) -> (f64, f64, f64) {
    let p = if cand == 0 { 0.0 } else { hits as f64 / cand as f64 };
    let r = if refr == 0 { 0.0 } else { hits as f64 / refr as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

/// Multiset n-gram overlap by linear scans.
fn oracle_rouge_n<T: PartialEq + Clone>(cand: &[T], refr: &[T], n: usize) -> (f64, f64, f64) {
    let grams = |s: &[T]| -> Vec<Vec<T>> {
        if s.len() < n {
            Vec::new()
        } else {
            (0..=s.len() - n).map(|i| s[i..i + n].to_vec()).collect()
        }
    };
    let cg = grams(cand);
    let rg = grams(refr);
    let mut seen: Vec<&Vec<T>> = Vec::new();
    let mut hits = 0;
    for g in &cg {
        if seen.contains(&g) {
            continue;
        }
        seen.push(g);
        let a = cg.iter().filter(|x| *x == g).count();
        let b = rg.iter().filter(|x| *x == g).count();
        hits += a.min(b);
    }
    oracle_prf(hits, cg.len(), rg.len())
}

/// Full-table LCS.
fn oracle_lcs<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    t[a.len()][b.len()]
}

/// Dense TF-IDF cosine between every pair of article sentences, with the
/// smoothed idf fitted over the article.
fn oracle_cosines(article: &[String], query: &str) -> Vec<f64> {
    let docs: Vec<Vec<String>> = article.iter().map(|s| oracle_tokens(s)).collect();
    let vocab: Vec<String> = docs
        .iter()
        .flatten()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = docs.len() as f64;
    let idf: Vec<f64> = vocab
        .iter()
        .map(|t| {
            let df = docs.iter().filter(|d| d.contains(t)).count() as f64;
            ((1.0 + n) / (1.0 + df)).ln() + 1.0
        })
        .collect();
    let embed = |toks: &[String]| -> Vec<f64> {
        let v: Vec<f64> = vocab
            .iter()
            .zip(&idf)
            .map(|(t, w)| toks.iter().filter(|x| *x == t).count() as f64 * w)
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            v
        } else {
            v.iter().map(|x| x / norm).collect()
        }
    };
    let q = embed(&oracle_tokens(query));
    docs.iter()
        .map(|d| embed(d).iter().zip(&q).map(|(a, b)| a * b).sum())
        .collect()
}

/// Lowest index whose score is within 1e-12 of the maximum.
fn oracle_top(scores: &[f64]) -> usize {
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    scores.iter().position(|s| best - s <= 1e-12).expect("non-empty")
}

fn oracle_reverse(sentence: &str) -> String {
    let end = sentence.trim_end_matches(['.', '!', '?']).len();
    let (body, tail) = sentence.split_at(end);
    let words: Vec<&str> = body.split(' ').filter(|w| !w.is_empty()).rev().collect();
    let mut s = words.join(" ");
    let first = s.remove(0);
    format!("{}{s}{tail}", first.to_uppercase())
}

// ---------------------------------------------------------------- criteria

fn rouge_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    for case in 0..200 {
        let mut seq = || -> Vec<u8> {
            let len = rng.random_range(0..=12);
            (0..len).map(|_| rng.random_range(0..5u8)).collect()
        };
        let cand = seq();
        let refr = seq();
        for n in [1, 2] {
            let got = rouge_n(&cand, &refr, n);
            let want = oracle_rouge_n(&cand, &refr, n);
            for (g, w) in [(got.precision, want.0), (got.recall, want.1), (got.f1, want.2)] {
                ensure((g - w).abs() <= 1e-12, || {
                    format!("case {case} rouge{n} {cand:?} vs {refr:?}: {g} != {w}")
                })?;
            }
        }
        let lcs = oracle_lcs(&cand, &refr);
        ensure(lcs_len(&cand, &refr) == lcs, || format!("case {case}: lcs mismatch"))?;
        let got = rouge_l(&cand, &refr);
        let want = oracle_prf(lcs, cand.len(), refr.len());
        for (g, w) in [(got.precision, want.0), (got.recall, want.1), (got.f1, want.2)] {
            ensure((g - w).abs() <= 1e-12, || format!("case {case} rougeL: {g} != {w}"))?;
        }
    }
    Ok(())
}

fn identity_zero_delta() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::mock(fixture(), dir.path());
    cfg.mode = PerturbMode::Identity;
    let out = run_experiment(&cfg).map_err(|e| e.to_string())?;
    for m in ["rouge1", "rouge2", "rougeL"] {
        let c = out.bundle.change.get(m).ok_or(format!("{m} missing"))?;
        ensure(c.change_pct == Some(0.0), || format!("{m} change {:?}", c.change_pct))?;
    }
    ensure(out.bundle.histograms.l1 == 0.0, || {
        format!("l1 {}", out.bundle.histograms.l1)
    })?;
    ensure(out.bundle.original.n_pairs == 20, || "pairs dropped".into())
}

fn golden_config(out: &Path, max_in_flight: usize) -> RunConfig {
    let mut cfg = RunConfig::mock(fixture(), out);
    cfg.mode = PerturbMode::Relevant;
    cfg.top_n = 1;
    cfg.seed = 0;
    cfg.max_in_flight = max_in_flight;
    cfg
}

/// Compares `actual` with the committed golden file, or rewrites it when
/// blessing.
fn against_golden(name: &str, actual: &str) -> Check {
    let path = golden(name);
    if blessing() {
        std::fs::write(&path, actual).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let want = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    ensure(want == actual, || format!("{name} differs from golden"))
}

fn check_index_sets(dataset: &Dataset, maps: &[RelevanceMap]) -> Check {
    ensure(maps.len() == dataset.len(), || "relevance map count".into())?;
    for (pair, map) in dataset.pairs.iter().zip(maps) {
        ensure(map.article_id == pair.id(), || format!("map order at {}", pair.id()))?;
        let texts: Vec<String> = pair.article.sentences.iter().map(|s| s.text.clone()).collect();
        let mut expected = BTreeSet::new();
        for (i, s) in pair.summary.sentences.iter().enumerate() {
            let top = oracle_top(&oracle_cosines(&texts, &s.text));
            expected.insert(top);
            ensure(map.entries[i] == (i, vec![top]), || {
                format!("{} sentence {i}: {:?} vs oracle {top}", pair.id(), map.entries[i])
            })?;
        }
        let expected: Vec<usize> = expected.into_iter().collect();
        ensure(map.index_set == expected, || {
            format!("{} index set {:?} vs {expected:?}", pair.id(), map.index_set)
        })?;
    }
    Ok(())
}

fn check_substitutions(dataset: &Dataset, maps: &[RelevanceMap], perturbed_file: &Path) -> Check {
    let text = std::fs::read_to_string(perturbed_file).map_err(|e| e.to_string())?;
    for ((line, pair), map) in text.lines().zip(&dataset.pairs).zip(maps) {
        let rec: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let subs = rec["substitutions"].as_array().ok_or("substitutions")?;
        let indices: Vec<usize> = subs.iter().map(|s| s["index"].as_u64().unwrap() as usize).collect();
        ensure(indices == map.index_set, || {
            format!("{} substituted {indices:?}", pair.id())
        })?;
        for s in subs {
            let i = s["index"].as_u64().unwrap() as usize;
            let want = oracle_reverse(&pair.article.sentences[i].text);
            ensure(s["paraphrase"] == want.as_str(), || {
                format!("{} sentence {i}: {}", pair.id(), s["paraphrase"])
            })?;
        }
    }
    Ok(())
}

/// Mean ROUGE-1 F1 of "first two sentences" summaries, recomputed from
/// scratch.
fn oracle_rouge1_mean(summaries: &[ModelSummary], dataset: &Dataset) -> f64 {
    let total: f64 = summaries
        .iter()
        .map(|s| {
            let gold = dataset.pairs.iter().find(|p| p.id() == s.article_id).unwrap();
            let cand = oracle_tokens(&s.parsed.text());
            oracle_rouge_n(&cand, &oracle_tokens(&gold.summary.text()), 1).2
        })
        .sum();
    total / summaries.len() as f64
}

fn golden_run() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = run_experiment(&golden_config(dir.path(), 4)).map_err(|e| e.to_string())?;
    let dataset = load_dataset(&fixture(), None).map_err(|e| e.to_string())?;

    let maps: Vec<RelevanceMap> = read_jsonl(&dir.path().join("relevance_maps.jsonl")).map_err(|e| e.to_string())?;
    check_index_sets(&dataset, &maps)?;
    check_substitutions(&dataset, &maps, &dir.path().join("perturbed.jsonl"))?;

    let originals: Vec<ModelSummary> =
        read_jsonl(&dir.path().join("summaries_original.jsonl")).map_err(|e| e.to_string())?;
    for (s, pair) in originals.iter().zip(&dataset.pairs) {
        let lead: Vec<&str> = pair.article.sentences.iter().take(2).map(|x| x.text.as_str()).collect();
        let got: Vec<&str> = s.parsed.sentences.iter().map(|x| x.text.as_str()).collect();
        ensure(got == lead, || format!("{}: extractive summary {got:?}", pair.id()))?;
    }
    let perturbed: Vec<ModelSummary> =
        read_jsonl(&dir.path().join("summaries_perturbed.jsonl")).map_err(|e| e.to_string())?;
    for (got, want) in [
        (out.bundle.original.rouge1_f1, oracle_rouge1_mean(&originals, &dataset)),
        (out.bundle.perturbed.rouge1_f1, oracle_rouge1_mean(&perturbed, &dataset)),
    ] {
        ensure((got - want).abs() <= 1e-12, || {
            format!("rouge1 mean {got} vs oracle {want}")
        })?;
    }

    let report = std::fs::read_to_string(dir.path().join("report.json")).map_err(|e| e.to_string())?;
    let relevance = std::fs::read_to_string(dir.path().join("relevance_maps.jsonl")).map_err(|e| e.to_string())?;
    against_golden("relevant_seed0_report.json", &report)?;
    against_golden("relevant_seed0_relevance_maps.jsonl", &relevance)
}

fn psi_tie_break() -> Check {
    let article = Article::new(
        "tie",
        sentences_from_texts(&[
            "Cats sleep most of the day.",
            "Dogs bark at the mail carrier.",
            "Dogs bark at the mail carrier.",
            "Birds sing in the morning.",
            "Dogs bark at the mail carrier.",
        ]),
    )
    .map_err(|e| e.to_string())?;
    let summary = sentences_from_texts(&["Dogs bark at the mail carrier every day.", "Birds sing."]);
    for kind in [MapperKind::TfidfCosine, MapperKind::Rouge1F1] {
        for _ in 0..50 {
            let m = map_article(&article, &summary, MapperMode { kind, top_n: 1 });
            ensure(m.entries[0] == (0, vec![1]), || {
                format!("{kind}: tie went to {:?}", m.entries[0])
            })?;
        }
        for top_n in 1..=7 {
            let m = map_article(&article, &summary, MapperMode { kind, top_n });
            let n = top_n.min(article.len());
            let mut union = BTreeSet::new();
            for (i, (si, ranked)) in m.entries.iter().enumerate() {
                ensure(*si == i && ranked.len() == n, || {
                    format!("{kind} top_n {top_n}: entry {i}")
                })?;
                let distinct: BTreeSet<_> = ranked.iter().collect();
                ensure(distinct.len() == n && ranked.iter().all(|&j| j < article.len()), || {
                    format!("{kind}: bad ranking {ranked:?}")
                })?;
                union.extend(ranked.iter().copied());
            }
            ensure(n < 3 || m.entries[0].1[..3] == [1, 2, 4], || {
                format!("{kind}: tie order {:?}", m.entries[0].1)
            })?;
            ensure(m.index_set == union.into_iter().collect::<Vec<_>>(), || {
                format!("{kind}: index set")
            })?;
        }
    }
    Ok(())
}

fn performance_formula() -> Check {
    let c = performance_change(0.40, 0.37).map_err(|e| e.to_string())?;
    ensure(c == -7.5, || format!("got {c:?}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let old: f64 = rng.random_range(0.01..1.0);
        let x: f64 = rng.random_range(-100.0..100.0);
        let got = performance_change(old, old * (1.0 + x / 100.0)).map_err(|e| e.to_string())?;
        ensure((got - x).abs() <= 1e-9, || format!("old {old} x {x}: {got}"))?;
    }
    ensure(performance_change(0.0, 0.3).is_err(), || {
        "zero baseline accepted".into()
    })
}

// frozen output of the seeded down-sampler
const OVER_LENGTH_SEED7: [&str; 3] = ["A.", "D.", "E."];

fn over_length_parse() -> Check {
    let completion = "1. A.\n2. B.\n3. C.\n4. D.\n5. E.";
    for _ in 0..20 {
        let p = parse_summary(completion, 3, 7).map_err(|e| e.to_string())?;
        let got: Vec<&str> = p.sentences.iter().map(|s| s.text.as_str()).collect();
        ensure(got == OVER_LENGTH_SEED7, || format!("got {got:?}"))?;
        ensure(p.truncated, || "not flagged as truncated".into())?;
        let idx: Vec<usize> = p.sentences.iter().map(|s| s.index).collect();
        ensure(idx == [0, 1, 2], || format!("indices {idx:?}"))?;
    }
    Ok(())
}

fn exclusion_alignment() -> Check {
    let dataset = load_dataset(&fixture(), None).map_err(|e| e.to_string())?;
    let target = dataset
        .pairs
        .iter()
        .find(|p| p.id() == "coffee-prices")
        .ok_or("fixture id")?;
    let relmap = map_article(&target.article, &target.summary.sentences, MapperMode::tfidf());
    let needle = target.article.sentences[relmap.index_set[0]].text.clone();
    let attempted: usize = dataset
        .pairs
        .iter()
        .map(|p| {
            map_article(&p.article, &p.summary.sentences, MapperMode::tfidf())
                .index_set
                .len()
        })
        .sum();

    let paraphraser: Arc<dyn ChatModel> = Arc::new(RuleBackend::new(
        vec![(
            needle,
            ScriptStep::Reply("I'm sorry, but I can't rephrase that.".into()),
        )],
        Arc::new(ReversalParaphraser),
    ));
    let backends = Backends {
        summarizer: Arc::new(ExtractiveSummarizer),
        paraphraser,
        judge: None,
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = run_experiment_with(&golden_config(dir.path(), 4), &backends).map_err(|e| e.to_string())?;

    let ids = |f: &str| -> Result<Vec<String>, String> {
        let s: Vec<ModelSummary> = read_jsonl(&dir.path().join(f)).map_err(|e| e.to_string())?;
        Ok(s.into_iter().map(|s| s.article_id).collect())
    };
    let a = ids("summaries_original.jsonl")?;
    let b = ids("summaries_perturbed.jsonl")?;
    let expected: Vec<String> = dataset
        .ids()
        .into_iter()
        .filter(|i| *i != "coffee-prices")
        .map(String::from)
        .collect();
    ensure(a == b && a == expected, || {
        format!("id sequences differ: {a:?} / {b:?}")
    })?;
    let log = &out.bundle.exclusions;
    ensure(log.excluded_ids == ["coffee-prices"], || {
        format!("excluded {:?}", log.excluded_ids)
    })?;
    ensure(
        log.attempted_sentences == attempted && log.refused_sentences == 1,
        || format!("{}/{} vs 1/{attempted}", log.refused_sentences, log.attempted_sentences),
    )?;
    ensure(log.refusal_rate == 1.0 / attempted as f64, || {
        format!("rate {}", log.refusal_rate)
    })?;
    ensure(
        out.bundle.original.n_pairs == 19 && out.bundle.perturbed.n_pairs == 19,
        || "n_pairs".into(),
    )
}

fn geval_parsing() -> Check {
    let cases: [(&str, f64); 5] = [
        ("80, 10, 5, 3, 2", 4.63),
        ("40,40,10,5,5", 4.05),
        ("8,1,0,0,0", 44.0 / 9.0),
        ("Rating: 80%, 10%, 5%, 3%, 2%", 4.63),
        ("60, 20, 10, 5, 4", (300.0 + 80.0 + 30.0 + 10.0 + 4.0) / 100.0),
    ];
    for (input, want) in cases {
        let got = parse_geval(input).map_err(|e| format!("{input:?}: {e}"))?;
        ensure((got - want).abs() <= 1e-9, || format!("{input:?}: {got} vs {want}"))?;
    }
    ensure(parse_geval("80, 10, 5").is_err(), || "three numbers accepted".into())?;
    ensure(parse_geval("no numbers here").is_err(), || "empty accepted".into())
}

fn concurrency_determinism() -> Check {
    let mut reports = Vec::new();
    for k in [1, 8] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        run_experiment(&golden_config(dir.path(), k)).map_err(|e| e.to_string())?;
        reports.push(std::fs::read_to_string(dir.path().join("report.json")).map_err(|e| e.to_string())?);
    }
    ensure(reports[0] == reports[1], || {
        "report.json differs between 1 and 8 in flight".into()
    })?;
    if blessing() {
        return Ok(());
    }
    let want = std::fs::read_to_string(golden("relevant_seed0_report.json")).map_err(|e| e.to_string())?;
    ensure(reports[0] == want, || "differs from golden".into())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("rouge-oracle-equivalence", Duration::from_secs(5), rouge_oracle),
        ("identity-zero-delta", Duration::from_secs(10), identity_zero_delta),
        ("golden-relevant-run", Duration::from_secs(30), golden_run),
        ("psi-tie-break", Duration::from_secs(30), psi_tie_break),
        (
            "performance-change-formula",
            Duration::from_secs(30),
            performance_formula,
        ),
        ("over-length-parse", Duration::from_secs(30), over_length_parse),
        ("exclusion-alignment", Duration::from_secs(30), exclusion_alignment),
        ("geval-parsing", Duration::from_secs(30), geval_parsing),
        (
            "concurrency-determinism",
            Duration::from_secs(60),
            concurrency_determinism,
        ),
    ];
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let mut result = check();
        let took = start.elapsed();
        if result.is_ok() && took > limit {
            result = Err(format!("took {took:?}, limit {limit:?}"));
        }
        match result {
            Ok(()) => println!("PASS {name} ({:.2}s)", took.as_secs_f64()),
            Err(e) => {
                failed += 1;
                println!("FAIL {name} ({:.2}s): {e}", took.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
