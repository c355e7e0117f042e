//! Article / gold-summary datasets, sentence segmentation and dataset
//! profiles.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::collapse_whitespace;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("dataset profile needs at least one pair")]
    EmptyPairs,
    #[error("{0} must contain at least one sentence")]
    NoSentences(String),
    #[error("sentence text is empty after trimming")]
    EmptySentence,
    #[error("summary for {summary:?} does not belong to article {article:?}")]
    IdMismatch { article: String, summary: String },
    #[error("target summary length must be at least 1")]
    ZeroTarget,
}

/// One sentence of a document. `index` is its zero-based ordinal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
}

impl Sentence {
    pub fn new(index: usize, text: &str) -> Result<Self, CorpusError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(CorpusError::EmptySentence);
        }
        Ok(Self {
            index,
            text: text.to_string(),
        })
    }
}

/// Builds a contiguous, zero-indexed sentence list from texts, skipping
/// anything blank.
pub fn sentences_from_texts<S: AsRef<str>>(texts: &[S]) -> Vec<Sentence> {
    texts
        .iter()
        .map(|t| t.as_ref().trim())
        .filter(|t| !t.is_empty())
        .enumerate()
        .map(|(index, text)| Sentence {
            index,
            text: text.to_string(),
        })
        .collect()
}

/// Space-joins sentence texts in order.
pub fn join_sentences(sentences: &[Sentence]) -> String {
    sentences.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join(" ")
}

fn check_contiguous(sentences: &[Sentence]) -> bool {
    sentences.iter().enumerate().all(|(i, s)| s.index == i)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub sentences: Vec<Sentence>,
}

impl Article {
    pub fn new(id: impl Into<String>, sentences: Vec<Sentence>) -> Result<Self, CorpusError> {
        let id = id.into();
        if sentences.is_empty() {
            return Err(CorpusError::NoSentences(format!("article {id:?}")));
        }
        debug_assert!(check_contiguous(&sentences));
        Ok(Self { id, sentences })
    }

    /// Segments `text` and wraps it as an article.
    pub fn from_text(id: impl Into<String>, text: &str) -> Result<Self, CorpusError> {
        Self::new(id, segment_sentences(text))
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn text(&self) -> String {
        join_sentences(&self.sentences)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldSummary {
    pub article_id: String,
    pub sentences: Vec<Sentence>,
}

impl GoldSummary {
    pub fn new(article_id: impl Into<String>, sentences: Vec<Sentence>) -> Result<Self, CorpusError> {
        let article_id = article_id.into();
        if sentences.is_empty() {
            return Err(CorpusError::NoSentences(format!("summary of {article_id:?}")));
        }
        Ok(Self { article_id, sentences })
    }

    pub fn text(&self) -> String {
        join_sentences(&self.sentences)
    }
}

/// An id-matched article / gold summary pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub article: Article,
    pub summary: GoldSummary,
}

impl Pair {
    pub fn new(article: Article, summary: GoldSummary) -> Result<Self, CorpusError> {
        if article.id != summary.article_id {
            return Err(CorpusError::IdMismatch {
                article: article.id,
                summary: summary.article_id,
            });
        }
        Ok(Self { article, summary })
    }

    pub fn id(&self) -> &str {
        &self.article.id
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub avg_article_sentences: f64,
    pub avg_summary_sentences: f64,
    /// Number of summary sentences requested from the summarizer.
    pub target_summary_len: usize,
}

/// Summary-length defaults matching the prompts used for the four reference
/// datasets. CNN/DM averages 3.79 gold sentences but is prompted for 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetPreset {
    Cnn,
    Xsum,
    Reddit,
    News,
}

impl DatasetPreset {
    pub fn target_summary_len(self) -> usize {
        match self {
            DatasetPreset::Cnn => 3,
            DatasetPreset::Xsum | DatasetPreset::Reddit | DatasetPreset::News => 1,
        }
    }
}

impl std::str::FromStr for DatasetPreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cnn" | "cnndm" | "cnn_dm" | "cnn/dm" => Ok(Self::Cnn),
            "xsum" => Ok(Self::Xsum),
            "reddit" => Ok(Self::Reddit),
            "news" => Ok(Self::News),
            other => Err(format!("unknown dataset preset {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub pairs: Vec<Pair>,
    pub profile: DatasetProfile,
    /// Pairs dropped at load time because the article or summary had no
    /// sentences.
    pub dropped: usize,
}

impl Dataset {
    /// Builds a dataset from already-segmented pairs, checking id uniqueness.
    pub fn from_pairs(
        name: impl Into<String>,
        pairs: Vec<Pair>,
        target_override: Option<usize>,
    ) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for (i, p) in pairs.iter().enumerate() {
            if !seen.insert(p.id().to_string()) {
                return Err(CorpusError::DuplicateId {
                    line: i + 1,
                    id: p.id().to_string(),
                });
            }
        }
        let profile = dataset_profile(&pairs, target_override)?;
        Ok(Self {
            name: name.into(),
            pairs,
            profile,
            dropped: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Keeps only the first `n` pairs. The profile is left as computed over
    /// the full file.
    pub fn truncate(&mut self, n: usize) {
        self.pairs.truncate(n);
    }

    pub fn ids(&self) -> Vec<&str> {
        self.pairs.iter().map(Pair::id).collect()
    }
}

const ABBREVIATIONS: &[&str] = &["mr.", "mrs.", "dr.", "e.g.", "i.e.", "u.s.", "etc.", "vs.", "no."];

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '\u{201c}' | '\u{2018}')
}

/// Splits raw text into sentences with a fixed terminator/abbreviation rule
/// table.
///
/// A sentence ends after a run of `.`, `!` or `?` (plus any closing quotes
/// or brackets) when it is followed by whitespace and an uppercase letter or
/// digit, or by the end of the text. A lone `.` closing a word from the
/// abbreviation table never ends a sentence.
pub fn segment_sentences(text: &str) -> Vec<Sentence> {
    let normalized = collapse_whitespace(text);
    let chars: Vec<char> = normalized.chars().collect();
    let mut texts = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        if !is_terminator(chars[i]) {
            i += 1;
            continue;
        }
        let term_start = i;
        while i < chars.len() && is_terminator(chars[i]) {
            i += 1;
        }
        let term_len = i - term_start;
        while i < chars.len() && is_closer(chars[i]) {
            i += 1;
        }
        let end = i;
        let boundary = if end == chars.len() {
            true
        } else if chars[end] == ' ' {
            let mut k = end + 1;
            while k < chars.len() && is_opener(chars[k]) {
                k += 1;
            }
            k < chars.len() && (chars[k].is_uppercase() || chars[k].is_ascii_digit())
        } else {
            false
        };
        if !boundary {
            continue;
        }
        if term_len == 1 && chars[term_start] == '.' && end == term_start + 1 {
            let word_start = chars[..term_start]
                .iter()
                .rposition(|c| *c == ' ')
                .map_or(start, |p| p + 1)
                .max(start);
            let word: String = chars[word_start..=term_start]
                .iter()
                .skip_while(|c| is_opener(**c))
                .collect::<String>()
                .to_lowercase();
            if ABBREVIATIONS.contains(&word.as_str()) {
                continue;
            }
        }
        texts.push(chars[start..end].iter().collect::<String>());
        start = end;
    }
    if start < chars.len() {
        texts.push(chars[start..].iter().collect::<String>());
    }
    sentences_from_texts(&texts)
}

/// Arithmetic-mean sentence counts over `pairs`. The target summary length
/// is the half-up rounded mean gold length unless overridden.
pub fn dataset_profile(pairs: &[Pair], target_override: Option<usize>) -> Result<DatasetProfile, CorpusError> {
    if pairs.is_empty() {
        return Err(CorpusError::EmptyPairs);
    }
    let n = pairs.len() as f64;
    let avg_article_sentences = pairs.iter().map(|p| p.article.len() as f64).sum::<f64>() / n;
    let avg_summary_sentences = pairs.iter().map(|p| p.summary.sentences.len() as f64).sum::<f64>() / n;
    let target_summary_len = match target_override {
        Some(0) => return Err(CorpusError::ZeroTarget),
        Some(t) => t,
        None => (round_half_up(avg_summary_sentences) as usize).max(1),
    };
    Ok(DatasetProfile {
        avg_article_sentences,
        avg_summary_sentences,
        target_summary_len,
    })
}

fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    id: String,
    article: String,
    summary: String,
}

/// Reads a JSONL dataset of `{"id", "article", "summary"}` objects.
///
/// Pairs whose article or summary segments to nothing are dropped and
/// counted in [`Dataset::dropped`]. Blank lines are ignored. Extra keys are
/// allowed, so perturbed corpora written by this crate load back as plain
/// datasets.
pub fn load_dataset(path: &Path, target_override: Option<usize>) -> Result<Dataset, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut pairs = Vec::new();
    let mut seen = HashSet::new();
    let mut dropped = 0;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RawRecord = serde_json::from_str(&line).map_err(|e| CorpusError::MalformedLine {
            line: lineno,
            message: e.to_string(),
        })?;
        if !seen.insert(rec.id.clone()) {
            return Err(CorpusError::DuplicateId {
                line: lineno,
                id: rec.id,
            });
        }
        let article = segment_sentences(&rec.article);
        let summary = segment_sentences(&rec.summary);
        if article.is_empty() || summary.is_empty() {
            dropped += 1;
            continue;
        }
        pairs.push(Pair {
            article: Article {
                id: rec.id.clone(),
                sentences: article,
            },
            summary: GoldSummary {
                article_id: rec.id,
                sentences: summary,
            },
        });
    }
    let profile = dataset_profile(&pairs, target_override)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Dataset {
        name,
        pairs,
        profile,
        dropped,
    })
}
