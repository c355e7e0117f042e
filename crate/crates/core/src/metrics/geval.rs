//! LLM-as-judge scoring. The judge returns five percentages for scores
//! 5, 4, 3, 2, 1 and the result is their weighted mean.

use std::sync::LazyLock;

use regex::Regex;

use super::MetricsError;
use crate::corpus::Article;
use crate::llm::{ChatModel, GenerationConfig};

pub const GEVAL_TEMPLATE: &str = "You will be given one summary written for an article. Your task is to rate the summary based on the following criteria:
Output format: PERCENTAGE, PERCENTAGE, PERCENTAGE, PERCENTAGE, PERCENTAGE

Evaluation Criteria:
1. Read the news article carefully and identify the main topic and key points.
2. Read the summary and compare it to the news article. Check if the summary covers the main topic and key points of the news article, and if it resents them in a clear and logical order.
3. Rate the summary with 5 percentages, where each one represents how likely the summary is going to get a score from 1 to 5. For example, if you think the summary is 80% likely to get a score of 5, 10% likely to get a score of 4, 5% likely to get a score of 3, 3% likely to get a score of 2, and 1% likely to get a score of 1, you should rate the summary as 80, 10, 5, 3, 2.

Here is the article: {Article}

Here is the summary: {Summary}";

pub fn render_geval_prompt(article: &Article, summary: &str) -> String {
    // article first, so a literal "{Summary}" inside it is not replaced
    let (head, tail) = GEVAL_TEMPLATE
        .split_once("{Article}")
        .expect("template has an article slot");
    format!("{head}{}{}", article.text(), tail.replacen("{Summary}", summary, 1))
}

static NUMBER_LIST: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\d+(?:\.\d+)?\s*%?(?:\s*,\s*\d+(?:\.\d+)?\s*%?)+").expect("valid regex"));

/// Parses the last comma-separated number list in `completion` as the
/// percentages for scores 5..1. Lists not summing to 100 ± 1 are rescaled
/// to 100 before weighting.
pub fn parse_geval(completion: &str) -> Result<f64, MetricsError> {
    let list = NUMBER_LIST
        .find_iter(completion)
        .last()
        .ok_or_else(|| MetricsError::GevalParse(format!("no percentage list in {completion:?}")))?;
    let values: Vec<f64> = list
        .as_str()
        .split(',')
        .map(|v| v.trim().trim_end_matches('%').trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| MetricsError::GevalParse(e.to_string()))?;
    if values.len() != 5 {
        return Err(MetricsError::GevalParse(format!(
            "expected 5 percentages, found {}",
            values.len()
        )));
    }
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(MetricsError::GevalParse("percentages sum to zero".into()));
    }
    let scale = if (total - 100.0).abs() <= 1.0 { 100.0 } else { total };
    let weighted: f64 = values
        .iter()
        .zip([5.0, 4.0, 3.0, 2.0, 1.0])
        .map(|(p, score)| score * p)
        .sum();
    Ok(weighted / scale)
}

/// Asks `judge` to rate `summary` against `article`.
pub fn geval(
    article: &Article,
    summary: &str,
    judge: &dyn ChatModel,
    config: &GenerationConfig,
) -> Result<f64, MetricsError> {
    let completion = judge.complete(&render_geval_prompt(article, summary), config)?;
    parse_geval(&completion)
}
