use std::path::PathBuf;
use std::sync::Arc;

use relpara_core::llm::{
    ChatModel, ExtractiveSummarizer, GenerationConfig, ReversalParaphraser, RuleBackend, ScriptStep, SequenceBackend,
};
use relpara_core::perturb::PerturbMode;
use relpara_core::pipeline::{
    analyze_stage, evaluate_stage, paraphrase_stage, run_experiment, run_experiment_with, summarize_stage, Backends,
    PipelineError, RunConfig, RunDir, StageInputs, MANIFEST_FILE,
};
use relpara_core::relevance::map_article;

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/fixture20.jsonl")
}

fn read(dir: &std::path::Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn none_repeat_is_a_null_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::mock(fixture(), dir.path());
    cfg.mode = PerturbMode::NoneRepeat;
    cfg.summarizer_generation = GenerationConfig::greedy(256);
    let out = run_experiment(&cfg).unwrap();
    for m in &out.bundle.change.metrics {
        assert_eq!(m.change_pct, Some(0.0), "{}", m.metric);
    }
    assert_eq!(out.bundle.histograms.l1, 0.0);
    assert_eq!(out.bundle.exclusions.attempted_sentences, 0);
    assert_eq!(out.bundle.paraphrase_fidelity, None);
}

#[test]
fn nonrelevant_mode_avoids_relevant_sentences() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::mock(fixture(), dir.path());
    cfg.mode = PerturbMode::NonrelevantRandom;
    run_experiment(&cfg).unwrap();
    let dataset = cfg.dataset.load().unwrap();
    let rundir = RunDir::create(dir.path()).unwrap();
    let (pairs, perturbed, log) = rundir.read_perturbed(&dataset).unwrap();
    assert_eq!(pairs.len() + log.excluded_ids.len(), 20);
    for (pair, p) in pairs.iter().zip(&perturbed) {
        let relmap = map_article(&pair.article, &pair.summary.sentences, cfg.mapper());
        assert_eq!(p.substitutions.len(), relmap.index_set.len());
        assert!(
            p.substitutions.iter().all(|s| !relmap.contains(s.index)),
            "{}",
            pair.id()
        );
    }

    let again = tempfile::tempdir().unwrap();
    cfg.out_dir = again.path().to_path_buf();
    run_experiment(&cfg).unwrap();
    assert_eq!(
        read(dir.path(), "perturbed.jsonl"),
        read(again.path(), "perturbed.jsonl")
    );
    cfg.seed = 1;
    let other = tempfile::tempdir().unwrap();
    cfg.out_dir = other.path().to_path_buf();
    run_experiment(&cfg).unwrap();
    assert_ne!(
        read(dir.path(), "perturbed.jsonl"),
        read(other.path(), "perturbed.jsonl")
    );
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&RunConfig::mock(fixture(), a.path())).unwrap();
    run_experiment(&RunConfig::mock(fixture(), b.path())).unwrap();
    for f in [
        "report.json",
        "metrics.csv",
        "histograms.csv",
        "metrics.svg",
        "histograms.svg",
        "perturbed.jsonl",
    ] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
}

#[test]
fn mass_refusal_aborts_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::mock(fixture(), dir.path());
    let backends = Backends {
        summarizer: Arc::new(ExtractiveSummarizer),
        paraphraser: Arc::new(RuleBackend::new(
            vec![("".into(), ScriptStep::Reply("As an AI, I cannot do that.".into()))],
            Arc::new(ReversalParaphraser),
        )),
        judge: None,
    };
    let err = run_experiment_with(&cfg, &backends).err().unwrap();
    assert!(matches!(err, PipelineError::Aborted(_)), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn transport_failure_excludes_the_article() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::mock(fixture(), dir.path());
    let backends = Backends {
        summarizer: Arc::new(ExtractiveSummarizer),
        paraphraser: Arc::new(RuleBackend::new(
            vec![("serious rust".into(), ScriptStep::Fail("connection reset".into()))],
            Arc::new(ReversalParaphraser),
        )),
        judge: None,
    };
    let out = run_experiment_with(&cfg, &backends).unwrap();
    let log = &out.bundle.exclusions;
    assert!(
        log.excluded_ids.contains(&"bridge-repair".to_string()),
        "{:?}",
        log.excluded_ids
    );
    assert!(log.reasons["bridge-repair"].starts_with("transport:"));
    assert_eq!(log.refused_sentences, 0);
}

#[test]
fn staged_run_matches_end_to_end() {
    let whole = tempfile::tempdir().unwrap();
    run_experiment(&RunConfig::mock(fixture(), whole.path())).unwrap();

    let staged = tempfile::tempdir().unwrap();
    let cfg = RunConfig::mock(fixture(), staged.path());
    let dataset = cfg.dataset.load().unwrap();
    let dir = RunDir::create(staged.path()).unwrap();
    paraphrase_stage(&cfg, &dataset, &ReversalParaphraser, &dir).unwrap();

    // each later stage starts from what is on disk
    let (pairs, perturbed, _) = dir.read_perturbed(&dataset).unwrap();
    summarize_stage(
        &cfg,
        dataset.profile.target_summary_len,
        &pairs,
        &perturbed,
        &ExtractiveSummarizer,
        &dir,
    )
    .unwrap();
    let (orig, pert) = dir.read_summaries().unwrap();
    let inputs = StageInputs {
        pairs: &pairs,
        perturbed: &perturbed,
        original_summaries: &orig,
        perturbed_summaries: &pert,
    };
    evaluate_stage(&cfg, &dataset.name, &inputs, &ExtractiveSummarizer.id(), None, &dir).unwrap();
    let evaluation = dir.read_evaluation().unwrap();
    let log = dir.read_perturbed(&dataset).unwrap().2;
    analyze_stage(&cfg, &inputs, evaluation, log, &dir).unwrap();

    for f in [
        "report.json",
        "metrics.csv",
        "histograms.csv",
        "summaries_perturbed.jsonl",
        "evaluation.json",
    ] {
        assert_eq!(read(whole.path(), f), read(staged.path(), f), "{f}");
    }
}

#[test]
fn missing_intermediate_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::mock(fixture(), dir.path());
    let dataset = cfg.dataset.load().unwrap();
    let rundir = RunDir::create(dir.path()).unwrap();
    let err = rundir.read_perturbed(&dataset).err().unwrap();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("perturb stage"), "{err}");
    assert_eq!(rundir.read_summaries().err().unwrap().exit_code(), 1);
}

#[test]
fn manifest_records_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::mock(fixture(), dir.path());
    cfg.seed = 5;
    cfg.dataset.limit = Some(6);
    let out = run_experiment(&cfg).unwrap();
    let m = &out.manifest;
    assert_eq!(m.config_hash, cfg.config_hash());
    assert_eq!(m.seed, 5);
    assert_eq!(m.pairs_loaded, 6);
    assert_eq!(m.backends.summarizer, "mock-extractive");
    assert_eq!(m.backends.paraphraser, "mock-reversal");
    assert!(m.finished_unix >= m.started_unix);
    for f in &m.files {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let on_disk: serde_json::Value = serde_json::from_str(&read(dir.path(), MANIFEST_FILE)).unwrap();
    assert_eq!(on_disk["config_hash"], m.config_hash.as_str());
    assert!(!read(dir.path(), "report.json").contains("unix"));
}

#[test]
fn judge_scores_both_sides() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::mock(fixture(), dir.path());
    cfg.dataset.limit = Some(3);
    let judge: Arc<dyn ChatModel> = Arc::new(SequenceBackend::replies([
        "80, 10, 5, 3, 2",
        "80, 10, 5, 3, 2",
        "80, 10, 5, 3, 2",
        "40,40,10,5,5",
        "40,40,10,5,5",
        "40,40,10,5,5",
    ]));
    let backends = Backends {
        summarizer: Arc::new(ExtractiveSummarizer),
        paraphraser: Arc::new(ReversalParaphraser),
        judge: Some(judge),
    };
    cfg.max_in_flight = 1;
    let out = run_experiment_with(&cfg, &backends).unwrap();
    assert!((out.bundle.original.geval.unwrap() - 4.63).abs() < 1e-9);
    assert!((out.bundle.perturbed.geval.unwrap() - 4.05).abs() < 1e-9);
    let c = out.bundle.change.get("geval").unwrap();
    assert!((c.change_pct.unwrap() - (4.05 - 4.63) / 4.63 * 100.0).abs() < 1e-9);
}

#[test]
fn judge_failure_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::mock(fixture(), dir.path());
    cfg.dataset.limit = Some(2);
    let backends = Backends {
        summarizer: Arc::new(ExtractiveSummarizer),
        paraphraser: Arc::new(ReversalParaphraser),
        judge: Some(Arc::new(SequenceBackend::replies(["I would rate it highly."]))),
    };
    let err = run_experiment_with(&cfg, &backends).err().unwrap();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().starts_with("geval failed"), "{err}");
    // earlier artifacts stay for inspection
    assert!(dir.path().join("summaries_original.jsonl").exists());
}
