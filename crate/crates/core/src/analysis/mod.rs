//! Where in the article model summaries draw from, before and after
//! perturbation, plus report emission.

mod report;
mod svg;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Article;
use crate::llm::ModelSummary;
use crate::metrics::{ChangeReport, MetricReport};
use crate::perturb::ExclusionLog;
use crate::relevance::{fit_article, map_summary, MapperMode};

pub use report::{emit_report, round6, to_canonical_json, REPORT_FILES};
pub use svg::grouped_bar_chart;

pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("pair {index}: article {article:?} paired with summary of {summary:?}")]
    Misaligned {
        index: usize,
        article: String,
        summary: String,
    },
    #[error("{articles} articles but {summaries} summaries")]
    LengthMismatch { articles: usize, summaries: usize },
    #[error("bin count must be at least 1")]
    ZeroBins,
    #[error("histograms have {0} and {1} bins")]
    BinMismatch(usize, usize),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

/// Share of mapped summary sentences per normalized article position bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionHistogram {
    pub bins: Vec<f64>,
    pub n_mapped: usize,
}

impl PositionHistogram {
    fn from_counts(counts: &[usize]) -> Self {
        let total: usize = counts.iter().sum();
        let bins = counts
            .iter()
            .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
            .collect();
        Self { bins, n_mapped: total }
    }
}

/// Bin index for sentence `j` of an article with `len` sentences.
pub fn position_bin(j: usize, len: usize, bins: usize) -> usize {
    let position = if len <= 1 { 0.0 } else { j as f64 / (len - 1) as f64 };
    ((position * bins as f64).floor() as usize).min(bins - 1)
}

/// Maps every model-summary sentence to its top article sentence and bins
/// the normalized positions. `articles[i]` must be the input that produced
/// `summaries[i]`.
pub fn position_distribution(
    articles: &[Article],
    summaries: &[ModelSummary],
    mode: MapperMode,
    bins: usize,
) -> Result<PositionHistogram, AnalysisError> {
    if bins == 0 {
        return Err(AnalysisError::ZeroBins);
    }
    if articles.len() != summaries.len() {
        return Err(AnalysisError::LengthMismatch {
            articles: articles.len(),
            summaries: summaries.len(),
        });
    }
    let mode = MapperMode { top_n: 1, ..mode };
    let mut counts = vec![0usize; bins];
    for (index, (article, summary)) in articles.iter().zip(summaries).enumerate() {
        if article.id != summary.article_id {
            return Err(AnalysisError::Misaligned {
                index,
                article: article.id.clone(),
                summary: summary.article_id.clone(),
            });
        }
        let model = fit_article(article);
        let relmap = map_summary(article, &summary.parsed.sentences, mode, &model);
        for j in relmap.top_indices() {
            counts[position_bin(j, article.len(), bins)] += 1;
        }
    }
    Ok(PositionHistogram::from_counts(&counts))
}

/// L1 distance between two histograms, in `[0, 2]`.
pub fn histogram_divergence(a: &PositionHistogram, b: &PositionHistogram) -> Result<f64, AnalysisError> {
    if a.bins.len() != b.bins.len() {
        return Err(AnalysisError::BinMismatch(a.bins.len(), b.bins.len()));
    }
    Ok(a.bins.iter().zip(&b.bins).map(|(x, y)| (x - y).abs()).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramPair {
    pub original: PositionHistogram,
    pub perturbed: PositionHistogram,
    /// L1 divergence between the two.
    pub l1: f64,
}

impl HistogramPair {
    pub fn new(original: PositionHistogram, perturbed: PositionHistogram) -> Result<Self, AnalysisError> {
        let l1 = histogram_divergence(&original, &perturbed)?;
        Ok(Self {
            original,
            perturbed,
            l1,
        })
    }
}

/// Everything one experiment reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub original: MetricReport,
    pub perturbed: MetricReport,
    pub change: ChangeReport,
    pub histograms: HistogramPair,
    pub exclusions: ExclusionLog,
    /// Mean ROUGE-1 F1 between original and paraphrased sentences, when any
    /// were paraphrased.
    pub paraphrase_fidelity: Option<f64>,
}
