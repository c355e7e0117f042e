//! Tokenization shared by the relevance mapper and the ROUGE kernels.
//!
//! Both sides must agree on tokens, otherwise ROUGE-1 relevance scores and
//! the reported ROUGE-1 metric drift apart.

/// Lowercases and splits on every non-alphanumeric character. Empty tokens
/// are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Normalizes line endings and collapses every whitespace run to a single
/// space, trimming both ends.
pub fn collapse_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}
