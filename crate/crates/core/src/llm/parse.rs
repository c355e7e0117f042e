use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::LlmError;
use crate::corpus::{segment_sentences, sentences_from_texts, Sentence};
use crate::sampling::sample_positions;

const REFUSAL_MARKERS: &[&str] = &["i cannot", "i can't", "i am not able", "i'm not able", "as an ai"];
const REFUSAL_WINDOW: usize = 120;

/// True when the completion is blank or one of the refusal markers appears
/// (case-insensitively) within its first 120 characters.
pub fn detect_refusal(completion: &str) -> bool {
    let trimmed = completion.trim();
    if trimmed.is_empty() {
        return true;
    }
    let head: String = trimmed
        .chars()
        .take(REFUSAL_WINDOW)
        .map(|c| if c == '\u{2019}' { '\'' } else { c })
        .collect::<String>()
        .to_lowercase();
    REFUSAL_MARKERS.iter().any(|m| head.contains(m))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedSummary {
    pub sentences: Vec<Sentence>,
    pub raw: String,
    /// Set when more sentences than requested were produced and a subset
    /// was sampled.
    pub truncated: bool,
}

impl ParsedSummary {
    pub fn text(&self) -> String {
        crate::corpus::join_sentences(&self.sentences)
    }
}

/// A parsed model summary tagged with the article it summarizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub article_id: String,
    #[serde(flatten)]
    pub parsed: ParsedSummary,
}

static LIST_ITEM: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(?:\d+\.|-)\s*(\S.*)$").expect("valid regex"));

/// Extracts summary sentences from a completion.
///
/// Numbered (`1.`) or dash-bulleted lines are taken as sentences with the
/// marker stripped; if there are none, the whole completion is segmented.
/// When more than `n_required` sentences come back, `n_required` of them are
/// sampled uniformly (seeded) and kept in their original order.
pub fn parse_summary(completion: &str, n_required: usize, seed: u64) -> Result<ParsedSummary, LlmError> {
    if n_required == 0 {
        return Err(LlmError::Precondition("n_required must be at least 1".into()));
    }
    let items: Vec<String> = completion
        .lines()
        .filter_map(|l| LIST_ITEM.captures(l.trim()))
        .map(|c| c[1].trim().to_string())
        .collect();
    let mut sentences = if items.is_empty() {
        segment_sentences(completion)
    } else {
        sentences_from_texts(&items)
    };
    if sentences.is_empty() {
        return Err(LlmError::NothingExtracted);
    }
    let truncated = sentences.len() > n_required;
    if truncated {
        let mut keep = sample_positions(sentences.len(), n_required, seed);
        keep.sort_unstable();
        let texts: Vec<String> = keep.into_iter().map(|i| sentences[i].text.clone()).collect();
        sentences = sentences_from_texts(&texts);
    }
    Ok(ParsedSummary {
        sentences,
        raw: completion.to_string(),
        truncated,
    })
}
