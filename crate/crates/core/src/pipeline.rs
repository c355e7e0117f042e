//! End-to-end experiment: load → map → perturb → summarize both corpora →
//! evaluate → position analysis → emit.
//!
//! Every intermediate corpus is written to the output directory so single
//! stages can be re-run from disk.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{
    emit_report, position_distribution, to_canonical_json, HistogramPair, ReportBundle, DEFAULT_BINS,
};
use crate::corpus::{load_dataset, Article, Dataset, DatasetPreset, Pair};
use crate::exec::ordered_map;
use crate::jsonl::{read_jsonl, write_jsonl};
use crate::llm::{
    parse_summary, render_summary_prompt, BackendConfig, ChatModel, GenerationConfig, LlmError, ModelSummary,
    PromptTemplate, SummaryStyle,
};
use crate::metrics::{evaluate_corpus, geval, BertScoreClient, ChangeReport, MetricReport, PairScorer, Rouge1Scorer};
use crate::perturb::{
    build_perturbed_corpus, paraphrase_fidelity, read_perturbed_jsonl, substitution_pairs, write_perturbed_jsonl,
    ExclusionLog, PerturbError, PerturbMode, PerturbationPlan, PerturbedArticle, PerturbedCorpus,
};
use crate::relevance::{map_article, MapperKind, MapperMode, RelevanceMap};
use crate::sampling::derive_seed;

pub const CALL_SUMMARIZE_ORIGINAL: &str = "summarize-original";
pub const CALL_SUMMARIZE_PERTURBED: &str = "summarize-perturbed";
pub const CALL_SUMMARIZE_REPEAT: &str = "summarize-repeat";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("run aborted: {0}")]
    Aborted(#[source] PerturbError),
}

impl PipelineError {
    pub fn stage(stage: &'static str, source: impl std::error::Error + Send + Sync + 'static) -> Self {
        Self::Stage {
            stage,
            source: Box::new(source),
        }
    }

    /// Process exit code: 1 config, 2 pipeline, 3 abort threshold.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 1,
            Self::Stage { .. } => 2,
            Self::Aborted(_) => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub path: PathBuf,
    /// Explicit number of summary sentences to request.
    pub target_summary_len: Option<usize>,
    /// Summary length of one of the reference datasets; ignored when
    /// `target_summary_len` is set.
    pub preset: Option<DatasetPreset>,
    /// Keep only the first N pairs.
    pub limit: Option<usize>,
}

impl DatasetConfig {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            target_summary_len: None,
            preset: None,
            limit: None,
        }
    }

    fn target_override(&self) -> Option<usize> {
        self.target_summary_len
            .or(self.preset.map(DatasetPreset::target_summary_len))
    }

    pub fn load(&self) -> Result<Dataset, PipelineError> {
        let mut ds = load_dataset(&self.path, self.target_override()).map_err(|e| PipelineError::stage("load", e))?;
        if let Some(n) = self.limit {
            ds.truncate(n);
        }
        if ds.is_empty() {
            return Err(PipelineError::Config(format!(
                "{} has no usable pairs",
                self.path.display()
            )));
        }
        Ok(ds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricToggles {
    /// BertScore sidecar base URL; BertScore is skipped when unset.
    pub bertscore_endpoint: Option<String>,
    pub bertscore_batch: usize,
}

impl Default for MetricToggles {
    fn default() -> Self {
        Self {
            bertscore_endpoint: None,
            bertscore_batch: crate::metrics::bertscore::DEFAULT_BATCH_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub summarizer: BackendConfig,
    pub paraphraser: BackendConfig,
    pub judge: Option<BackendConfig>,
    pub summarizer_generation: GenerationConfig,
    pub paraphraser_generation: GenerationConfig,
    pub judge_generation: GenerationConfig,
    pub prompt_style: SummaryStyle,
    pub mode: PerturbMode,
    /// Relevant sentences paraphrased per gold-summary sentence.
    pub top_n: usize,
    pub psi: MapperKind,
    pub metrics: MetricToggles,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub max_in_flight: usize,
    pub bins: usize,
}

impl RunConfig {
    /// Mock summarizer and paraphraser, relevant mode, seed 0.
    pub fn mock(dataset: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            dataset: DatasetConfig::new(dataset),
            summarizer: BackendConfig::mock_extractive(),
            paraphraser: BackendConfig::mock_reversal(),
            judge: None,
            summarizer_generation: GenerationConfig::default(),
            paraphraser_generation: GenerationConfig::default(),
            judge_generation: GenerationConfig::greedy(64),
            prompt_style: SummaryStyle::default(),
            mode: PerturbMode::Relevant,
            top_n: 1,
            psi: MapperKind::TfidfCosine,
            metrics: MetricToggles::default(),
            seed: 0,
            out_dir: out_dir.into(),
            max_in_flight: 4,
            bins: DEFAULT_BINS,
        }
    }

    pub fn plan(&self) -> Result<PerturbationPlan, PipelineError> {
        PerturbationPlan::new(self.mode, self.top_n, self.seed).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn mapper(&self) -> MapperMode {
        MapperMode {
            kind: self.psi,
            top_n: 1,
        }
    }

    /// SHA-256 over the canonical JSON form of the whole config.
    pub fn config_hash(&self) -> String {
        let json = to_canonical_json(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.top_n == 0 {
            return Err(PipelineError::Config("top_n must be at least 1".into()));
        }
        if self.bins == 0 {
            return Err(PipelineError::Config("bins must be at least 1".into()));
        }
        if self.max_in_flight == 0 {
            return Err(PipelineError::Config("max_in_flight must be at least 1".into()));
        }
        for g in [
            &self.summarizer_generation,
            &self.paraphraser_generation,
            &self.judge_generation,
        ] {
            GenerationConfig::new(g.temperature, g.max_tokens).map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn build_backends(&self) -> Result<Backends, PipelineError> {
        let build = |b: &BackendConfig| {
            b.build()
                .map_err(|e| PipelineError::Config(format!("backend {:?}: {e}", b.name)))
        };
        Ok(Backends {
            summarizer: build(&self.summarizer)?,
            paraphraser: build(&self.paraphraser)?,
            judge: self.judge.as_ref().map(build).transpose()?,
        })
    }

    fn bertscore(&self) -> Option<BertScoreClient> {
        self.metrics.bertscore_endpoint.as_ref().map(|e| {
            BertScoreClient::new(e.clone())
                .batch_size(self.metrics.bertscore_batch)
                .max_in_flight(self.max_in_flight)
        })
    }
}

/// Instantiated models for one run.
#[derive(Clone)]
pub struct Backends {
    pub summarizer: Arc<dyn ChatModel>,
    pub paraphraser: Arc<dyn ChatModel>,
    pub judge: Option<Arc<dyn ChatModel>>,
}

/// Summarizes every article and parses the completions. Over-long outputs
/// are down-sampled with a seed derived from `(seed, article id,
/// call_kind)`.
pub fn summarize_articles(
    articles: &[Article],
    model: &dyn ChatModel,
    template: &PromptTemplate,
    config: &GenerationConfig,
    seed: u64,
    call_kind: &str,
    max_in_flight: usize,
) -> Result<Vec<ModelSummary>, LlmError> {
    let n = template
        .n_sentences
        .ok_or_else(|| LlmError::Precondition("summary template lacks a sentence count".into()))?;
    ordered_map(articles, max_in_flight, |article| {
        let prompt = render_summary_prompt(article, template)?;
        let completion = model.complete(&prompt, config)?;
        let parsed = parse_summary(&completion, n, derive_seed(seed, &article.id, call_kind))?;
        Ok(ModelSummary {
            article_id: article.id.clone(),
            parsed,
        })
    })
    .into_iter()
    .collect()
}

/// Original and perturbed sides of one experiment, id-aligned.
pub struct StageInputs<'a> {
    pub pairs: &'a [Pair],
    pub perturbed: &'a [PerturbedArticle],
    pub original_summaries: &'a [ModelSummary],
    pub perturbed_summaries: &'a [ModelSummary],
}

/// Metric means for both sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub original: MetricReport,
    pub perturbed: MetricReport,
}

fn mean_geval(
    articles: &[Article],
    summaries: &[ModelSummary],
    judge: &dyn ChatModel,
    config: &GenerationConfig,
    max_in_flight: usize,
) -> Result<f64, PipelineError> {
    let items: Vec<(&Article, &ModelSummary)> = articles.iter().zip(summaries).collect();
    let scores = ordered_map(&items, max_in_flight, |(a, s)| {
        geval(a, &s.parsed.text(), judge, config)
    })
    .into_iter()
    .collect::<Result<Vec<f64>, _>>()
    .map_err(|e| PipelineError::stage("geval", e))?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Scores both summary sets against the gold summaries. The judge always
/// sees the original article, so both sides are rated against the same
/// source.
pub fn evaluate_sides(
    inputs: &StageInputs<'_>,
    dataset_name: &str,
    backend: &str,
    bertscore: Option<&dyn PairScorer>,
    judge: Option<(&dyn ChatModel, &GenerationConfig)>,
    max_in_flight: usize,
) -> Result<Evaluation, PipelineError> {
    let gold: Vec<_> = inputs.pairs.iter().map(|p| p.summary.clone()).collect();
    let originals: Vec<Article> = inputs.pairs.iter().map(|p| p.article.clone()).collect();
    let evaluate = |summaries: &[ModelSummary]| -> Result<MetricReport, PipelineError> {
        let mut report = evaluate_corpus(dataset_name, backend, &gold, summaries, bertscore)
            .map_err(|e| PipelineError::stage("evaluate", e))?;
        if let Some((j, cfg)) = judge {
            report.geval = Some(mean_geval(&originals, summaries, j, cfg, max_in_flight)?);
        }
        Ok(report)
    };
    Ok(Evaluation {
        original: evaluate(inputs.original_summaries)?,
        perturbed: evaluate(inputs.perturbed_summaries)?,
    })
}

/// Position histograms, relative changes and paraphrase fidelity on top of
/// an [`Evaluation`].
pub fn analyze_sides(
    inputs: &StageInputs<'_>,
    evaluation: Evaluation,
    exclusions: ExclusionLog,
    mapper: MapperMode,
    bins: usize,
    fidelity_scorer: &dyn PairScorer,
) -> Result<ReportBundle, PipelineError> {
    let originals: Vec<Article> = inputs.pairs.iter().map(|p| p.article.clone()).collect();
    let perturbed_articles: Vec<Article> = inputs.perturbed.iter().map(PerturbedArticle::as_article).collect();
    let analyze = |e| PipelineError::stage("analyze", e);
    let histograms = HistogramPair::new(
        position_distribution(&originals, inputs.original_summaries, mapper, bins).map_err(analyze)?,
        position_distribution(&perturbed_articles, inputs.perturbed_summaries, mapper, bins).map_err(analyze)?,
    )
    .map_err(analyze)?;

    let subs = substitution_pairs(inputs.perturbed);
    let paraphrase_fidelity = if subs.is_empty() {
        None
    } else {
        Some(paraphrase_fidelity(&subs, fidelity_scorer).map_err(|e| PipelineError::stage("fidelity", e))?)
    };
    let Evaluation { original, perturbed } = evaluation;
    Ok(ReportBundle {
        change: ChangeReport::between(&original, &perturbed),
        original,
        perturbed,
        histograms,
        exclusions,
        paraphrase_fidelity,
    })
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RELEVANCE_FILE: &str = "relevance_maps.jsonl";
pub const PERTURBED_FILE: &str = "perturbed.jsonl";
pub const EXCLUSIONS_FILE: &str = "exclusions.json";
pub const SUMMARIES_ORIGINAL_FILE: &str = "summaries_original.jsonl";
pub const SUMMARIES_PERTURBED_FILE: &str = "summaries_perturbed.jsonl";
pub const EVALUATION_FILE: &str = "evaluation.json";

/// Output directory of one run and the intermediates persisted in it.
#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|e| PipelineError::stage("output", e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Intermediates keep full float precision so resumed stages compute
    /// exactly what a single run would.
    fn write_json<T: Serialize>(&self, stage: &'static str, name: &str, value: &T) -> Result<(), PipelineError> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| PipelineError::stage(stage, e))?;
        s.push('\n');
        std::fs::write(self.path(name), s).map_err(|e| PipelineError::stage(stage, e))
    }

    fn read_json<T: serde::de::DeserializeOwned>(&self, stage: &'static str, name: &str) -> Result<T, PipelineError> {
        let text = std::fs::read_to_string(self.path(name)).map_err(|e| missing(stage, &self.path(name), e))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::stage(stage, e))
    }

    pub fn write_relevance(&self, maps: &[RelevanceMap]) -> Result<(), PipelineError> {
        write_jsonl(&self.path(RELEVANCE_FILE), maps).map_err(|e| PipelineError::stage("map", e))
    }

    pub fn write_perturbed(&self, corpus: &PerturbedCorpus) -> Result<(), PipelineError> {
        self.write_relevance(&corpus.relevance)?;
        write_perturbed_jsonl(&self.path(PERTURBED_FILE), corpus).map_err(|e| PipelineError::stage("perturb", e))?;
        self.write_json("perturb", EXCLUSIONS_FILE, &corpus.exclusions)
    }

    /// Surviving pairs, their perturbed articles and the exclusion log.
    pub fn read_perturbed(
        &self,
        dataset: &Dataset,
    ) -> Result<(Vec<Pair>, Vec<PerturbedArticle>, ExclusionLog), PipelineError> {
        let path = self.path(PERTURBED_FILE);
        if !path.exists() {
            return Err(missing(
                "perturb",
                &path,
                std::io::Error::from(std::io::ErrorKind::NotFound),
            ));
        }
        let (pairs, perturbed) =
            read_perturbed_jsonl(&path, dataset).map_err(|e| PipelineError::stage("perturb", e))?;
        let exclusions = self.read_json("perturb", EXCLUSIONS_FILE)?;
        Ok((pairs, perturbed, exclusions))
    }

    pub fn write_summaries(&self, original: &[ModelSummary], perturbed: &[ModelSummary]) -> Result<(), PipelineError> {
        for (name, s) in [
            (SUMMARIES_ORIGINAL_FILE, original),
            (SUMMARIES_PERTURBED_FILE, perturbed),
        ] {
            write_jsonl(&self.path(name), s).map_err(|e| PipelineError::stage("summarize", e))?;
        }
        Ok(())
    }

    pub fn read_summaries(&self) -> Result<(Vec<ModelSummary>, Vec<ModelSummary>), PipelineError> {
        let read = |name| {
            let path = self.path(name);
            read_jsonl(&path).map_err(|e| missing("summarize", &path, e))
        };
        Ok((read(SUMMARIES_ORIGINAL_FILE)?, read(SUMMARIES_PERTURBED_FILE)?))
    }

    pub fn write_evaluation(&self, evaluation: &Evaluation) -> Result<(), PipelineError> {
        self.write_json("evaluate", EVALUATION_FILE, evaluation)
    }

    pub fn read_evaluation(&self) -> Result<Evaluation, PipelineError> {
        self.read_json("evaluate", EVALUATION_FILE)
    }

    pub fn write_manifest(&self, manifest: &RunManifest) -> Result<(), PipelineError> {
        let s = to_canonical_json(manifest).map_err(|e| PipelineError::stage("emit", e))?;
        std::fs::write(self.path(MANIFEST_FILE), s).map_err(|e| PipelineError::stage("emit", e))
    }
}

fn missing(stage: &'static str, path: &Path, e: std::io::Error) -> PipelineError {
    if e.kind() == std::io::ErrorKind::NotFound {
        PipelineError::Config(format!("{} not found; run the {stage} stage first", path.display()))
    } else {
        PipelineError::stage(stage, e)
    }
}

/// Maps every pair of the dataset without paraphrasing.
pub fn map_dataset(dataset: &Dataset, mapper: MapperMode) -> Vec<RelevanceMap> {
    dataset
        .pairs
        .iter()
        .map(|p| map_article(&p.article, &p.summary.sentences, mapper))
        .collect()
}

/// Perturbs the dataset and persists relevance maps, the perturbed corpus
/// and the exclusion log.
pub fn paraphrase_stage(
    config: &RunConfig,
    dataset: &Dataset,
    paraphraser: &dyn ChatModel,
    dir: &RunDir,
) -> Result<PerturbedCorpus, PipelineError> {
    let plan = config.plan()?;
    let corpus = match build_perturbed_corpus(
        dataset,
        &plan,
        config.mapper(),
        paraphraser,
        &config.paraphraser_generation,
        config.max_in_flight,
    ) {
        Ok(c) => c,
        Err(e @ PerturbError::AbortThreshold { .. }) => return Err(PipelineError::Aborted(e)),
        Err(e) => return Err(PipelineError::stage("perturb", e)),
    };
    dir.write_perturbed(&corpus)?;
    Ok(corpus)
}

/// Summarizes originals and perturbed articles (originals twice in
/// none-repeat mode) and persists both summary sets.
pub fn summarize_stage(
    config: &RunConfig,
    target_summary_len: usize,
    pairs: &[Pair],
    perturbed: &[PerturbedArticle],
    summarizer: &dyn ChatModel,
    dir: &RunDir,
) -> Result<(Vec<ModelSummary>, Vec<ModelSummary>), PipelineError> {
    let template = PromptTemplate::summary(config.prompt_style, target_summary_len)
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let originals: Vec<Article> = pairs.iter().map(|p| p.article.clone()).collect();
    let perturbed_articles: Vec<Article> = perturbed.iter().map(PerturbedArticle::as_article).collect();
    let summarize = |articles: &[Article], kind: &'static str| {
        summarize_articles(
            articles,
            summarizer,
            &template,
            &config.summarizer_generation,
            config.seed,
            kind,
            config.max_in_flight,
        )
        .map_err(|e| PipelineError::stage(kind, e))
    };
    let original = summarize(&originals, CALL_SUMMARIZE_ORIGINAL)?;
    let second = match config.mode {
        PerturbMode::NoneRepeat => summarize(&originals, CALL_SUMMARIZE_REPEAT)?,
        _ => summarize(&perturbed_articles, CALL_SUMMARIZE_PERTURBED)?,
    };
    dir.write_summaries(&original, &second)?;
    Ok((original, second))
}

/// Scores both sides and persists the result.
pub fn evaluate_stage(
    config: &RunConfig,
    dataset_name: &str,
    inputs: &StageInputs<'_>,
    summarizer_id: &str,
    judge: Option<&dyn ChatModel>,
    dir: &RunDir,
) -> Result<Evaluation, PipelineError> {
    let bertscore = config.bertscore();
    let evaluation = evaluate_sides(
        inputs,
        dataset_name,
        summarizer_id,
        bertscore.as_ref().map(|b| b as &dyn PairScorer),
        judge.map(|j| (j, &config.judge_generation)),
        config.max_in_flight,
    )?;
    dir.write_evaluation(&evaluation)?;
    Ok(evaluation)
}

/// Builds the report bundle and writes the report files.
pub fn analyze_stage(
    config: &RunConfig,
    inputs: &StageInputs<'_>,
    evaluation: Evaluation,
    exclusions: ExclusionLog,
    dir: &RunDir,
) -> Result<(ReportBundle, Vec<PathBuf>), PipelineError> {
    let bertscore = config.bertscore();
    let scorer: &dyn PairScorer = match &bertscore {
        Some(b) => b,
        None => &Rouge1Scorer,
    };
    let bundle = analyze_sides(inputs, evaluation, exclusions, config.mapper(), config.bins, scorer)?;
    let written = emit_report(&bundle, dir.root()).map_err(|e| PipelineError::stage("emit", e))?;
    Ok((bundle, written))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendIds {
    pub summarizer: String,
    pub paraphraser: String,
    pub judge: Option<String>,
}

/// Provenance record written next to the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub mode: PerturbMode,
    pub dataset: String,
    pub pairs_loaded: usize,
    pub pairs_evaluated: usize,
    pub backends: BackendIds,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub files: Vec<String>,
}

pub struct RunOutput {
    pub bundle: ReportBundle,
    pub manifest: RunManifest,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Runs the experiment with backends built from the config.
pub fn run_experiment(config: &RunConfig) -> Result<RunOutput, PipelineError> {
    config.validate()?;
    let backends = config.build_backends()?;
    run_experiment_with(config, &backends)
}

/// Runs the experiment with caller-supplied backends. The backend fields of
/// `config` then only feed the manifest hash.
pub fn run_experiment_with(config: &RunConfig, backends: &Backends) -> Result<RunOutput, PipelineError> {
    config.validate()?;
    let started_unix = unix_now();
    let dataset = config.dataset.load()?;
    let dir = RunDir::create(&config.out_dir)?;

    let corpus = paraphrase_stage(config, &dataset, backends.paraphraser.as_ref(), &dir)?;
    let (original_summaries, perturbed_summaries) = summarize_stage(
        config,
        dataset.profile.target_summary_len,
        &corpus.pairs,
        &corpus.perturbed,
        backends.summarizer.as_ref(),
        &dir,
    )?;
    let inputs = StageInputs {
        pairs: &corpus.pairs,
        perturbed: &corpus.perturbed,
        original_summaries: &original_summaries,
        perturbed_summaries: &perturbed_summaries,
    };
    let evaluation = evaluate_stage(
        config,
        &dataset.name,
        &inputs,
        &backends.summarizer.id(),
        backends.judge.as_deref(),
        &dir,
    )?;
    let (bundle, written) = analyze_stage(config, &inputs, evaluation, corpus.exclusions.clone(), &dir)?;

    let mut files: Vec<String> = [
        RELEVANCE_FILE,
        PERTURBED_FILE,
        EXCLUSIONS_FILE,
        SUMMARIES_ORIGINAL_FILE,
        SUMMARIES_PERTURBED_FILE,
        EVALUATION_FILE,
    ]
    .map(String::from)
    .to_vec();
    files.extend(
        written
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned())),
    );
    files.push(MANIFEST_FILE.to_string());

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config.config_hash(),
        seed: config.seed,
        mode: config.mode,
        dataset: dataset.name.clone(),
        pairs_loaded: dataset.len(),
        pairs_evaluated: corpus.pairs.len(),
        backends: BackendIds {
            summarizer: backends.summarizer.id(),
            paraphraser: backends.paraphraser.id(),
            judge: backends.judge.as_ref().map(|j| j.id()),
        },
        started_unix,
        finished_unix: unix_now(),
        files,
    };
    dir.write_manifest(&manifest)?;
    tracing::info!(
        pairs = manifest.pairs_evaluated,
        refusal_rate = bundle.exclusions.refusal_rate,
        "run complete; report in {}",
        dir.root().display()
    );
    Ok(RunOutput { bundle, manifest })
}
