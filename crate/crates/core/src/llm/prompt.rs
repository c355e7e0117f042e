//! Paraphrase and summarization prompt templates.

use serde::{Deserialize, Serialize};

use super::LlmError;
use crate::corpus::{Article, Sentence};

pub const ARTICLE_SLOT: &str = "{Article}";
pub const SENTENCE_SLOT: &str = "{Sentence}";

/// Single-sentence paraphrase prompt.
pub const PARAPHRASE_TEMPLATE: &str = "You are a helpful assistant that is an expert in paraphrasing sentences. \
Paraphrase the sentence I will provide. Please respond with just the paraphrased version of the sentence. \
Here is the sentence: {Sentence}";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptKind {
    Paraphrase,
    Summary,
}

/// Wording families for the summarization prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SummaryStyle {
    /// "With each sentence in a numbered list format."
    #[default]
    Numbered,
    /// "Write each sentence in a dash bulleted format."
    DashBullet,
    /// "Generate a N sentence summary for the given article."
    Plain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub template_id: String,
    pub body: String,
    /// Requested summary length; `None` for paraphrase templates.
    pub n_sentences: Option<usize>,
}

const ORDINALS: [&str; 10] = [
    "First", "Second", "Third", "Fourth", "Fifth", "Sixth", "Seventh", "Eighth", "Ninth", "Tenth",
];

fn exemplar(n: usize) -> String {
    (1..=n)
        .map(|i| match ORDINALS.get(i - 1) {
            Some(word) => format!("{i}. {word} sentence"),
            None => format!("{i}. {i}th sentence"),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

impl PromptTemplate {
    pub fn paraphrase() -> Self {
        Self {
            template_id: "paraphrase".into(),
            body: PARAPHRASE_TEMPLATE.into(),
            n_sentences: None,
        }
    }

    pub fn summary(style: SummaryStyle, n: usize) -> Result<Self, LlmError> {
        if n == 0 {
            return Err(LlmError::Precondition("summary length must be at least 1".into()));
        }
        let noun = if n == 1 { "sentence" } else { "sentences" };
        let (id, body) = match style {
            SummaryStyle::Numbered => (
                "numbered",
                format!(
                    "For the following article: {ARTICLE_SLOT}. Return a summary comprising of {n} {noun}. \
                     With each sentence in a numbered list format.\nFor example:\n{}",
                    exemplar(n)
                ),
            ),
            SummaryStyle::DashBullet => (
                "dash-bullet",
                format!(
                    "For the following article: {ARTICLE_SLOT}. Return a summary comprising of {n} {noun}. \
                     Write each sentence in a dash bulleted format. \nFor example:\n{}",
                    exemplar(n)
                ),
            ),
            SummaryStyle::Plain => (
                "plain",
                format!("Generate a {n} sentence summary for the given article. Article: {ARTICLE_SLOT}."),
            ),
        };
        Ok(Self {
            template_id: format!("{id}-{n}"),
            body,
            n_sentences: Some(n),
        })
    }

    /// A user-supplied template. Summary bodies need exactly one `{Article}`
    /// and no `{Sentence}`; paraphrase bodies the reverse.
    pub fn custom(
        template_id: impl Into<String>,
        body: impl Into<String>,
        kind: PromptKind,
        n_sentences: Option<usize>,
    ) -> Result<Self, LlmError> {
        let t = Self {
            template_id: template_id.into(),
            body: body.into(),
            n_sentences,
        };
        t.check(kind)?;
        Ok(t)
    }

    fn check(&self, kind: PromptKind) -> Result<(), LlmError> {
        let articles = self.body.matches(ARTICLE_SLOT).count();
        let sentences = self.body.matches(SENTENCE_SLOT).count();
        let ok = match kind {
            PromptKind::Summary => articles == 1 && sentences == 0 && self.n_sentences.is_some_and(|n| n >= 1),
            PromptKind::Paraphrase => sentences == 1 && articles == 0,
        };
        if ok {
            Ok(())
        } else {
            Err(LlmError::Precondition(format!(
                "template {:?} has the wrong placeholders for a {kind:?} prompt",
                self.template_id
            )))
        }
    }
}

/// The paraphrase prompt for one sentence. The sentence is inserted once;
/// braces inside it are left alone.
pub fn render_paraphrase_prompt(sentence: &Sentence) -> Result<String, LlmError> {
    let text = sentence.text.trim();
    if text.is_empty() {
        return Err(LlmError::Precondition("cannot paraphrase an empty sentence".into()));
    }
    Ok(PARAPHRASE_TEMPLATE.replacen(SENTENCE_SLOT, text, 1))
}

/// Fills a summary template with the article's sentences joined by single
/// spaces.
pub fn render_summary_prompt(article: &Article, template: &PromptTemplate) -> Result<String, LlmError> {
    template.check(PromptKind::Summary)?;
    Ok(template.body.replacen(ARTICLE_SLOT, &article.text(), 1))
}
