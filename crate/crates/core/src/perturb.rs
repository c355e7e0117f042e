//! Builds the perturbed corpus: find the article sentences that feed the
//! gold summary, paraphrase them one prompt at a time and splice the
//! paraphrases back in.
//!
//! An article with any refused (or undeliverable) paraphrase is dropped
//! from both the original and the perturbed corpus.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Article, Dataset, Pair, Sentence};
use crate::exec::ordered_map;
use crate::llm::{detect_refusal, render_paraphrase_prompt, ChatModel, GenerationConfig, LlmError};
use crate::metrics::{MetricsError, PairScorer};
use crate::relevance::{map_article, select_nonrelevant, MapperMode, RelevanceError, RelevanceMap};
use crate::sampling::derive_seed;
use crate::text::collapse_whitespace;

/// More than this fraction of excluded articles aborts the run.
pub const ABORT_FRACTION: f64 = 0.5;

#[derive(Debug, Error)]
pub enum PerturbError {
    #[error("replacement index {index} is out of range for an article of {len} sentences")]
    OutOfRange { index: usize, len: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("{excluded} of {total} articles were excluded, above the abort threshold")]
    AbortThreshold { excluded: usize, total: usize },
    #[error("paraphrase fidelity needs at least one substitution")]
    NoSubstitutions,
    #[error("top_n_paraphrase must be at least 1")]
    ZeroTopN,
    #[error("unknown perturbation mode {0:?}")]
    UnknownMode(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Relevance(#[from] RelevanceError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PerturbMode {
    /// Paraphrase the sentences most relevant to the gold summary.
    #[serde(rename = "relevant")]
    Relevant,
    /// Paraphrase as many randomly chosen non-relevant sentences.
    #[serde(rename = "nonrelevant")]
    NonrelevantRandom,
    /// Identity paraphraser: perturbed articles equal the originals.
    #[serde(rename = "identity")]
    Identity,
    /// No paraphrasing; the original articles are summarized a second time.
    #[serde(rename = "none-repeat")]
    NoneRepeat,
}

impl FromStr for PerturbMode {
    type Err = PerturbError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relevant" => Ok(Self::Relevant),
            "nonrelevant" | "nonrelevant-random" => Ok(Self::NonrelevantRandom),
            "identity" => Ok(Self::Identity),
            "none-repeat" | "repeat" => Ok(Self::NoneRepeat),
            other => Err(PerturbError::UnknownMode(other.to_string())),
        }
    }
}

impl fmt::Display for PerturbMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Relevant => "relevant",
            Self::NonrelevantRandom => "nonrelevant",
            Self::Identity => "identity",
            Self::NoneRepeat => "none-repeat",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PerturbationPlan {
    pub mode: PerturbMode,
    pub top_n_paraphrase: usize,
    pub seed: u64,
}

impl PerturbationPlan {
    pub fn new(mode: PerturbMode, top_n_paraphrase: usize, seed: u64) -> Result<Self, PerturbError> {
        if top_n_paraphrase == 0 {
            return Err(PerturbError::ZeroTopN);
        }
        Ok(Self {
            mode,
            top_n_paraphrase,
            seed,
        })
    }
}

impl Default for PerturbationPlan {
    fn default() -> Self {
        Self {
            mode: PerturbMode::Relevant,
            top_n_paraphrase: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitution {
    pub index: usize,
    pub original: String,
    pub paraphrase: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbedArticle {
    pub article_id: String,
    pub sentences: Vec<Sentence>,
    /// Sorted by index, one entry per replaced sentence.
    pub substitutions: Vec<Substitution>,
}

impl PerturbedArticle {
    /// View as a plain article, for summarization and mapping.
    pub fn as_article(&self) -> Article {
        Article {
            id: self.article_id.clone(),
            sentences: self.sentences.clone(),
        }
    }
}

/// Replaces the sentences at the given indices; everything else is copied
/// through untouched.
pub fn apply_replacements(
    article: &Article,
    replacements: &BTreeMap<usize, String>,
) -> Result<PerturbedArticle, PerturbError> {
    let mut sentences = article.sentences.clone();
    let mut substitutions = Vec::with_capacity(replacements.len());
    for (&index, text) in replacements {
        let slot = sentences.get_mut(index).ok_or(PerturbError::OutOfRange {
            index,
            len: article.len(),
        })?;
        substitutions.push(Substitution {
            index,
            original: slot.text.clone(),
            paraphrase: text.clone(),
        });
        slot.text = text.clone();
    }
    Ok(PerturbedArticle {
        article_id: article.id.clone(),
        sentences,
        substitutions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionLog {
    pub excluded_ids: Vec<String>,
    pub reasons: BTreeMap<String, String>,
    /// Paraphrase calls that returned a completion.
    pub attempted_sentences: usize,
    pub refused_sentences: usize,
    pub refusal_rate: f64,
}

impl ExclusionLog {
    pub fn empty() -> Self {
        Self {
            excluded_ids: Vec::new(),
            reasons: BTreeMap::new(),
            attempted_sentences: 0,
            refused_sentences: 0,
            refusal_rate: 0.0,
        }
    }
}

/// Original pairs and their perturbed counterparts, id-aligned after
/// exclusions.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedCorpus {
    pub pairs: Vec<Pair>,
    pub perturbed: Vec<PerturbedArticle>,
    /// Relevance maps for the surviving pairs.
    pub relevance: Vec<RelevanceMap>,
    pub exclusions: ExclusionLog,
}

impl PerturbedCorpus {
    pub fn ids(&self) -> Vec<&str> {
        self.pairs.iter().map(Pair::id).collect()
    }
}

struct Outcome {
    relmap: RelevanceMap,
    result: Result<PerturbedArticle, String>,
    attempted: usize,
    refused: usize,
}

fn paraphrase_targets(
    pair: &Pair,
    relmap: &RelevanceMap,
    plan: &PerturbationPlan,
) -> Result<Vec<usize>, RelevanceError> {
    match plan.mode {
        PerturbMode::Relevant | PerturbMode::Identity => Ok(relmap.index_set.clone()),
        PerturbMode::NonrelevantRandom => {
            let seed = derive_seed(plan.seed, pair.id(), "nonrelevant");
            let mut picked = select_nonrelevant(&pair.article, relmap, None, seed)?;
            picked.sort_unstable();
            Ok(picked)
        }
        PerturbMode::NoneRepeat => Ok(Vec::new()),
    }
}

fn perturb_one(
    pair: &Pair,
    plan: &PerturbationPlan,
    mapper: MapperMode,
    paraphraser: &dyn ChatModel,
    config: &GenerationConfig,
) -> Outcome {
    let relmap = map_article(&pair.article, &pair.summary.sentences, mapper);
    let mut out = Outcome {
        relmap,
        result: Err(String::new()),
        attempted: 0,
        refused: 0,
    };
    let targets = match paraphrase_targets(pair, &out.relmap, plan) {
        Ok(t) => t,
        Err(e) => {
            out.result = Err(format!("selection: {e}"));
            return out;
        }
    };
    let mut replacements = BTreeMap::new();
    if plan.mode == PerturbMode::Identity {
        for &i in &targets {
            replacements.insert(i, pair.article.sentences[i].text.clone());
        }
    } else {
        let mut refused_at = Vec::new();
        for &i in &targets {
            let sentence = &pair.article.sentences[i];
            let reply = render_paraphrase_prompt(sentence).and_then(|p| paraphraser.complete(&p, config));
            match reply {
                Ok(text) => {
                    out.attempted += 1;
                    if detect_refusal(&text) {
                        out.refused += 1;
                        refused_at.push(i);
                    } else {
                        replacements.insert(i, collapse_whitespace(&text));
                    }
                }
                Err(e) => {
                    out.result = Err(format!("transport: {e}"));
                    return out;
                }
            }
        }
        if !refused_at.is_empty() {
            let at: Vec<String> = refused_at.iter().map(usize::to_string).collect();
            out.result = Err(format!("refusal: sentence {}", at.join(",")));
            return out;
        }
    }
    out.result = apply_replacements(&pair.article, &replacements).map_err(|e| e.to_string());
    out
}

/// Runs the perturbation plan over `dataset`.
///
/// Articles are processed with at most `max_in_flight` concurrent workers;
/// results are committed in dataset order. Exclusions remove the article
/// from both sides. Fails with [`PerturbError::AbortThreshold`] when more
/// than half the articles are excluded.
pub fn build_perturbed_corpus(
    dataset: &Dataset,
    plan: &PerturbationPlan,
    mapper: MapperMode,
    paraphraser: &dyn ChatModel,
    config: &GenerationConfig,
    max_in_flight: usize,
) -> Result<PerturbedCorpus, PerturbError> {
    if dataset.is_empty() {
        return Err(PerturbError::EmptyDataset);
    }
    let mapper = mapper.with_top_n(plan.top_n_paraphrase)?;
    let outcomes = ordered_map(&dataset.pairs, max_in_flight, |pair| {
        perturb_one(pair, plan, mapper, paraphraser, config)
    });

    let mut corpus = PerturbedCorpus {
        pairs: Vec::new(),
        perturbed: Vec::new(),
        relevance: Vec::new(),
        exclusions: ExclusionLog::empty(),
    };
    for (pair, outcome) in dataset.pairs.iter().zip(outcomes) {
        corpus.exclusions.attempted_sentences += outcome.attempted;
        corpus.exclusions.refused_sentences += outcome.refused;
        match outcome.result {
            Ok(perturbed) => {
                corpus.pairs.push(pair.clone());
                corpus.perturbed.push(perturbed);
                corpus.relevance.push(outcome.relmap);
            }
            Err(reason) => {
                tracing::info!(id = pair.id(), "excluded: {reason}");
                corpus.exclusions.excluded_ids.push(pair.id().to_string());
                corpus.exclusions.reasons.insert(pair.id().to_string(), reason);
            }
        }
    }
    let log = &mut corpus.exclusions;
    if log.attempted_sentences > 0 {
        log.refusal_rate = log.refused_sentences as f64 / log.attempted_sentences as f64;
    }
    tracing::info!(
        refused = log.refused_sentences,
        attempted = log.attempted_sentences,
        "paraphrase refusal rate {:.4}",
        log.refusal_rate
    );
    let excluded = log.excluded_ids.len();
    let total = dataset.len();
    if excluded as f64 > ABORT_FRACTION * total as f64 {
        return Err(PerturbError::AbortThreshold { excluded, total });
    }
    Ok(corpus)
}

/// Mean scorer F1 of `(original, paraphrase)` pairs, paraphrase as the
/// candidate.
pub fn paraphrase_fidelity(substitutions: &[(String, String)], scorer: &dyn PairScorer) -> Result<f64, PerturbError> {
    if substitutions.is_empty() {
        return Err(PerturbError::NoSubstitutions);
    }
    let pairs: Vec<(String, String)> = substitutions
        .iter()
        .map(|(orig, para)| (para.clone(), orig.clone()))
        .collect();
    let scores = scorer.score_f1(&pairs)?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// All `(original, paraphrase)` text pairs in a corpus.
pub fn substitution_pairs(perturbed: &[PerturbedArticle]) -> Vec<(String, String)> {
    perturbed
        .iter()
        .flat_map(|p| p.substitutions.iter())
        .map(|s| (s.original.clone(), s.paraphrase.clone()))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct PerturbedRecord {
    id: String,
    article: String,
    summary: String,
    substitutions: Vec<Substitution>,
}

fn io_err(path: &Path, e: impl fmt::Display) -> PerturbError {
    PerturbError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes the perturbed corpus as JSONL in the input schema plus a
/// `substitutions` field.
pub fn write_perturbed_jsonl(path: &Path, corpus: &PerturbedCorpus) -> Result<(), PerturbError> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    for (pair, p) in corpus.pairs.iter().zip(&corpus.perturbed) {
        let rec = PerturbedRecord {
            id: p.article_id.clone(),
            article: crate::corpus::join_sentences(&p.sentences),
            summary: pair.summary.text(),
            substitutions: p.substitutions.clone(),
        };
        let line = serde_json::to_string(&rec).map_err(|e| io_err(path, e))?;
        writeln!(w, "{line}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Rebuilds perturbed articles from a file written by
/// [`write_perturbed_jsonl`] by re-applying its substitutions to the
/// original articles. Pairs missing from the file count as excluded.
pub fn read_perturbed_jsonl(
    path: &Path,
    original: &Dataset,
) -> Result<(Vec<Pair>, Vec<PerturbedArticle>), PerturbError> {
    let reader = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
    let mut subs: HashMap<String, Vec<Substitution>> = HashMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PerturbedRecord =
            serde_json::from_str(&line).map_err(|e| io_err(path, format!("line {}: {e}", n + 1)))?;
        subs.insert(rec.id, rec.substitutions);
    }
    let mut pairs = Vec::new();
    let mut perturbed = Vec::new();
    for pair in &original.pairs {
        let Some(s) = subs.get(pair.id()) else { continue };
        let map: BTreeMap<usize, String> = s.iter().map(|s| (s.index, s.paraphrase.clone())).collect();
        perturbed.push(apply_replacements(&pair.article, &map)?);
        pairs.push(pair.clone());
    }
    Ok((pairs, perturbed))
}
