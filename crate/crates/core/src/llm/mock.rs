//! Deterministic stand-ins for real models. They read the same prompts a
//! real backend would receive.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use super::{ChatModel, GenerationConfig, LlmError};
use crate::corpus::segment_sentences;

const PARAPHRASE_MARKER: &str = "Here is the sentence: ";
const NUMBERED_PREFIX: &str = "For the following article: ";
const NUMBERED_REQUEST: &str = ". Return a summary comprising of ";
const PLAIN_PREFIX: &str = "Generate a ";
const PLAIN_ARTICLE: &str = "Article: ";

/// The sentence embedded in a paraphrase prompt.
pub fn extract_paraphrase_target(prompt: &str) -> Option<&str> {
    prompt
        .rfind(PARAPHRASE_MARKER)
        .map(|p| prompt[p + PARAPHRASE_MARKER.len()..].trim())
}

/// The `(article text, requested sentence count)` in a summary prompt built
/// from one of the stock templates.
pub fn extract_summary_request(prompt: &str) -> Option<(&str, usize)> {
    if let Some(rest) = prompt.strip_prefix(NUMBERED_PREFIX) {
        let cut = rest.rfind(NUMBERED_REQUEST)?;
        let n = leading_number(&rest[cut + NUMBERED_REQUEST.len()..])?;
        return Some((&rest[..cut], n));
    }
    if let Some(rest) = prompt.strip_prefix(PLAIN_PREFIX) {
        let n = leading_number(rest)?;
        let start = rest.find(PLAIN_ARTICLE)? + PLAIN_ARTICLE.len();
        let article = rest[start..].trim_end();
        let article = article.strip_suffix('.').unwrap_or(article);
        return Some((article, n));
    }
    None
}

fn leading_number(s: &str) -> Option<usize> {
    let digits: String = s.chars().take_while(char::is_ascii_digit).collect();
    digits.parse().ok()
}

/// Returns the first `n` article sentences as a numbered list.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExtractiveSummarizer;

impl ChatModel for ExtractiveSummarizer {
    fn id(&self) -> String {
        "mock-extractive".into()
    }

    fn complete(&self, prompt: &str, _config: &GenerationConfig) -> Result<String, LlmError> {
        let (article, n) =
            extract_summary_request(prompt).ok_or_else(|| LlmError::Mock("unrecognized summary prompt".into()))?;
        Ok(segment_sentences(article)
            .iter()
            .take(n)
            .enumerate()
            .map(|(i, s)| format!("{}. {}", i + 1, s.text))
            .collect::<Vec<_>>()
            .join("\n"))
    }
}

/// Reverses word order, keeps the trailing terminator run at the end and
/// capitalizes the new first word.
pub fn reverse_words(sentence: &str) -> String {
    let trimmed = sentence.trim();
    let body = trimmed.trim_end_matches(['.', '!', '?']);
    let tail = &trimmed[body.len()..];
    let mut words: Vec<&str> = body.split_whitespace().collect();
    words.reverse();
    let mut out = words.join(" ");
    if let Some(first) = out.chars().next() {
        let upper: String = first.to_uppercase().collect();
        out.replace_range(..first.len_utf8(), &upper);
    }
    out.push_str(tail);
    out
}

/// Paraphraser that answers with [`reverse_words`] of the prompted sentence.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReversalParaphraser;

impl ChatModel for ReversalParaphraser {
    fn id(&self) -> String {
        "mock-reversal".into()
    }

    fn complete(&self, prompt: &str, _config: &GenerationConfig) -> Result<String, LlmError> {
        extract_paraphrase_target(prompt)
            .map(reverse_words)
            .ok_or_else(|| LlmError::Mock("unrecognized paraphrase prompt".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptStep {
    Reply(String),
    /// Fails like an exhausted transport.
    Fail(String),
}

/// Replays a fixed script of replies in call order.
pub struct SequenceBackend {
    steps: Mutex<VecDeque<ScriptStep>>,
}

impl SequenceBackend {
    pub fn new(steps: impl IntoIterator<Item = ScriptStep>) -> Self {
        Self {
            steps: Mutex::new(steps.into_iter().collect()),
        }
    }

    pub fn replies<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        Self::new(replies.into_iter().map(|r| ScriptStep::Reply(r.into())))
    }
}

impl ChatModel for SequenceBackend {
    fn id(&self) -> String {
        "mock-sequence".into()
    }

    fn complete(&self, _prompt: &str, _config: &GenerationConfig) -> Result<String, LlmError> {
        let step = self.steps.lock().expect("script lock").pop_front();
        match step {
            Some(ScriptStep::Reply(r)) => Ok(r),
            Some(ScriptStep::Fail(msg)) => Err(LlmError::RetriesExhausted {
                attempts: 1,
                status: None,
                last: msg,
            }),
            None => Err(LlmError::Mock("script exhausted".into())),
        }
    }
}

/// Answers with the first rule whose needle occurs in the prompt, otherwise
/// defers to `fallback`. Order-independent, so safe under concurrency.
pub struct RuleBackend {
    rules: Vec<(String, ScriptStep)>,
    fallback: Arc<dyn ChatModel>,
}

impl RuleBackend {
    pub fn new(rules: Vec<(String, ScriptStep)>, fallback: Arc<dyn ChatModel>) -> Self {
        Self { rules, fallback }
    }
}

impl ChatModel for RuleBackend {
    fn id(&self) -> String {
        format!("rules+{}", self.fallback.id())
    }

    fn complete(&self, prompt: &str, config: &GenerationConfig) -> Result<String, LlmError> {
        for (needle, step) in &self.rules {
            if prompt.contains(needle.as_str()) {
                return match step {
                    ScriptStep::Reply(r) => Ok(r.clone()),
                    ScriptStep::Fail(msg) => Err(LlmError::RetriesExhausted {
                        attempts: 1,
                        status: None,
                        last: msg.clone(),
                    }),
                };
            }
        }
        self.fallback.complete(prompt, config)
    }
}
