//! Evaluation metrics: ROUGE kernels, BertScore sidecar client, G-Eval and
//! the relative performance change between two runs.

pub mod bertscore;
pub mod geval;
pub mod rouge;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::GoldSummary;
use crate::llm::{LlmError, ModelSummary};
use crate::text::tokenize;

pub use bertscore::{BertScoreClient, PairScore};
pub use geval::{geval, parse_geval, render_geval_prompt};
pub use rouge::{lcs_len, rouge_l, rouge_n, RougeScore};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("relative change is undefined for a zero baseline")]
    ZeroBaseline,
    #[error("pair {index}: expected id {expected:?}, got {got:?}")]
    Misaligned {
        index: usize,
        expected: String,
        got: String,
    },
    #[error("{gold} gold summaries but {generated} generated summaries")]
    LengthMismatch { gold: usize, generated: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("sidecar: {0}")]
    Sidecar(String),
    #[error("sidecar protocol error: {0}")]
    Protocol(String),
    #[error("pair {index} could not be scored: {message}")]
    PairFailed { index: usize, message: String },
    #[error("cannot parse G-Eval rating: {0}")]
    GevalParse(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

/// Scores `(candidate, reference)` text pairs, returning one F1 per pair in
/// input order.
pub trait PairScorer: Send + Sync {
    fn name(&self) -> String;

    fn score_f1(&self, pairs: &[(String, String)]) -> Result<Vec<f64>, MetricsError>;
}

/// ROUGE-1 F1 as a [`PairScorer`].
#[derive(Debug, Clone, Copy, Default)]
pub struct Rouge1Scorer;

impl PairScorer for Rouge1Scorer {
    fn name(&self) -> String {
        "rouge1".into()
    }

    fn score_f1(&self, pairs: &[(String, String)]) -> Result<Vec<f64>, MetricsError> {
        Ok(pairs
            .iter()
            .map(|(c, r)| rouge_n(&tokenize(c), &tokenize(r), 1).f1)
            .collect())
    }
}

/// `(new − old) / old × 100`. Evaluated as `(100·new − 100·old) / old`,
/// which keeps simple decimal inputs exact (0.40 → 0.37 gives −7.5).
pub fn performance_change(old: f64, new: f64) -> Result<f64, MetricsError> {
    if old == 0.0 {
        return Err(MetricsError::ZeroBaseline);
    }
    Ok((new * 100.0 - old * 100.0) / old)
}

/// Corpus-level macro averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dataset: String,
    pub backend: String,
    pub n_pairs: usize,
    pub rouge1_f1: f64,
    pub rouge2_f1: f64,
    #[serde(rename = "rougeL_f1")]
    pub rouge_l_f1: f64,
    pub bertscore_f1: Option<f64>,
    pub geval: Option<f64>,
}

impl MetricReport {
    /// `(name, value)` for every metric that was computed, in report order.
    pub fn metrics(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![
            ("rouge1", self.rouge1_f1),
            ("rouge2", self.rouge2_f1),
            ("rougeL", self.rouge_l_f1),
        ];
        if let Some(b) = self.bertscore_f1 {
            out.push(("bertscore", b));
        }
        if let Some(g) = self.geval {
            out.push(("geval", g));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricChange {
    pub metric: String,
    pub original: f64,
    pub perturbed: f64,
    /// `None` when the original value is zero.
    pub change_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeReport {
    pub metrics: Vec<MetricChange>,
}

impl ChangeReport {
    /// Relative change for every metric present in both reports.
    pub fn between(original: &MetricReport, perturbed: &MetricReport) -> Self {
        let after = perturbed.metrics();
        let metrics = original
            .metrics()
            .into_iter()
            .filter_map(|(name, old)| {
                let new = after.iter().find(|(n, _)| *n == name)?.1;
                Some(MetricChange {
                    metric: name.to_string(),
                    original: old,
                    perturbed: new,
                    change_pct: performance_change(old, new).ok(),
                })
            })
            .collect();
        Self { metrics }
    }

    pub fn get(&self, metric: &str) -> Option<&MetricChange> {
        self.metrics.iter().find(|m| m.metric == metric)
    }
}

/// Per-pair ROUGE F1 triple `(rouge1, rouge2, rougeL)` on space-joined
/// summaries.
pub fn rouge_triple(candidate: &str, reference: &str) -> (f64, f64, f64) {
    let c = tokenize(candidate);
    let r = tokenize(reference);
    (rouge_n(&c, &r, 1).f1, rouge_n(&c, &r, 2).f1, rouge_l(&c, &r).f1)
}

fn mean(xs: impl Iterator<Item = f64>, n: usize) -> f64 {
    xs.sum::<f64>() / n as f64
}

/// Scores id-aligned gold and generated summaries and macro-averages the
/// results. BertScore is computed only when a scorer is supplied.
pub fn evaluate_corpus(
    dataset: &str,
    backend: &str,
    gold: &[GoldSummary],
    generated: &[ModelSummary],
    bertscore: Option<&dyn PairScorer>,
) -> Result<MetricReport, MetricsError> {
    if gold.len() != generated.len() {
        return Err(MetricsError::LengthMismatch {
            gold: gold.len(),
            generated: generated.len(),
        });
    }
    if gold.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut pairs = Vec::with_capacity(gold.len());
    for (index, (g, m)) in gold.iter().zip(generated).enumerate() {
        if g.article_id != m.article_id {
            return Err(MetricsError::Misaligned {
                index,
                expected: g.article_id.clone(),
                got: m.article_id.clone(),
            });
        }
        pairs.push((m.parsed.text(), g.text()));
    }
    let n = pairs.len();
    let triples: Vec<(f64, f64, f64)> = pairs.iter().map(|(c, r)| rouge_triple(c, r)).collect();
    let bertscore_f1 = match bertscore {
        Some(scorer) => {
            let f1 = scorer.score_f1(&pairs)?;
            if f1.len() != n {
                return Err(MetricsError::Protocol(format!("{} scores for {n} pairs", f1.len())));
            }
            Some(mean(f1.into_iter(), n))
        }
        None => None,
    };
    Ok(MetricReport {
        dataset: dataset.to_string(),
        backend: backend.to_string(),
        n_pairs: n,
        rouge1_f1: mean(triples.iter().map(|t| t.0), n),
        rouge2_f1: mean(triples.iter().map(|t| t.1), n),
        rouge_l_f1: mean(triples.iter().map(|t| t.2), n),
        bertscore_f1,
        geval: None,
    })
}
