//! Mapping from gold-summary sentences to the article sentences that
//! contributed most to them, scored by TF-IDF cosine or ROUGE-1 F1.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Article, Sentence};
use crate::metrics::rouge::rouge_n;
use crate::sampling::sample_positions;
use crate::text::tokenize;

#[derive(Debug, Error, PartialEq)]
pub enum RelevanceError {
    #[error("cannot fit TF-IDF on an empty corpus")]
    EmptyCorpus,
    #[error("top_n must be at least 1")]
    ZeroTopN,
    #[error("requested {requested} non-relevant sentences but only {available} are available")]
    ComplementTooSmall { requested: usize, available: usize },
    #[error("unknown mapper kind {0:?} (expected tfidf or rouge1)")]
    UnknownKind(String),
}

/// Smoothed-idf TF-IDF model over a set of token lists.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    vocabulary: HashMap<String, usize>,
    idf: Vec<f64>,
    doc_count: usize,
}

impl TfidfModel {
    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn vocabulary_len(&self) -> usize {
        self.idf.len()
    }

    /// `None` for out-of-vocabulary tokens.
    pub fn idf(&self, token: &str) -> Option<f64> {
        self.vocabulary.get(token).map(|&c| self.idf[c])
    }

    /// L2-normalized raw-tf × idf vector, keyed by vocabulary column.
    /// Out-of-vocabulary tokens carry no weight; an all-zero vector stays
    /// empty.
    pub fn vector(&self, tokens: &[String]) -> BTreeMap<usize, f64> {
        let mut v: BTreeMap<usize, f64> = BTreeMap::new();
        for t in tokens {
            if let Some(&col) = self.vocabulary.get(t) {
                *v.entry(col).or_insert(0.0) += 1.0;
            }
        }
        for (col, w) in v.iter_mut() {
            *w *= self.idf[*col];
        }
        let norm = v.values().map(|w| w * w).sum::<f64>().sqrt();
        if norm == 0.0 {
            return BTreeMap::new();
        }
        v.values_mut().for_each(|w| *w /= norm);
        v
    }
}

/// Fits `idf(t) = ln((1 + N) / (1 + df(t))) + 1` over `documents`.
pub fn fit_tfidf(documents: &[Vec<String>]) -> Result<TfidfModel, RelevanceError> {
    if documents.is_empty() {
        return Err(RelevanceError::EmptyCorpus);
    }
    let mut vocabulary: HashMap<String, usize> = HashMap::new();
    let mut df: Vec<usize> = Vec::new();
    for doc in documents {
        let unique: BTreeSet<&String> = doc.iter().collect();
        for t in unique {
            let next = vocabulary.len();
            let col = *vocabulary.entry(t.clone()).or_insert(next);
            if col == df.len() {
                df.push(0);
            }
            df[col] += 1;
        }
    }
    let n = documents.len() as f64;
    let idf = df.iter().map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0).collect();
    Ok(TfidfModel {
        vocabulary,
        idf,
        doc_count: documents.len(),
    })
}

/// Fits a model over one article's sentences.
pub fn fit_article(article: &Article) -> TfidfModel {
    let docs: Vec<Vec<String>> = article.sentences.iter().map(|s| tokenize(&s.text)).collect();
    // an Article always has at least one sentence
    fit_tfidf(&docs).expect("article has sentences")
}

fn sparse_dot(a: &BTreeMap<usize, f64>, b: &BTreeMap<usize, f64>) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut keys: Vec<usize> = small.keys().copied().filter(|k| large.contains_key(k)).collect();
    keys.sort_unstable();
    keys.iter().map(|k| a[k] * b[k]).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MapperKind {
    #[serde(rename = "tfidf")]
    TfidfCosine,
    #[serde(rename = "rouge1")]
    Rouge1F1,
}

impl FromStr for MapperKind {
    type Err = RelevanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tfidf" | "tfidf-cosine" => Ok(Self::TfidfCosine),
            "rouge1" | "rouge1-f1" => Ok(Self::Rouge1F1),
            other => Err(RelevanceError::UnknownKind(other.to_string())),
        }
    }
}

impl fmt::Display for MapperKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MapperKind::TfidfCosine => "tfidf",
            MapperKind::Rouge1F1 => "rouge1",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MapperMode {
    pub kind: MapperKind,
    pub top_n: usize,
}

impl MapperMode {
    pub fn new(kind: MapperKind, top_n: usize) -> Result<Self, RelevanceError> {
        if top_n == 0 {
            return Err(RelevanceError::ZeroTopN);
        }
        Ok(Self { kind, top_n })
    }

    pub fn tfidf() -> Self {
        Self {
            kind: MapperKind::TfidfCosine,
            top_n: 1,
        }
    }

    pub fn with_top_n(self, top_n: usize) -> Result<Self, RelevanceError> {
        Self::new(self.kind, top_n)
    }
}

impl Default for MapperMode {
    fn default() -> Self {
        Self::tfidf()
    }
}

/// Similarity in `[0, 1]` between two sentences under `mode`. In TF-IDF
/// mode `model` should be fitted over the enclosing article.
pub fn similarity(mode: MapperMode, a: &Sentence, b: &Sentence, model: &TfidfModel) -> f64 {
    let ta = tokenize(&a.text);
    let tb = tokenize(&b.text);
    match mode.kind {
        MapperKind::TfidfCosine => sparse_dot(&model.vector(&ta), &model.vector(&tb)),
        MapperKind::Rouge1F1 => rouge_n(&ta, &tb, 1).f1,
    }
}

/// Ranked relevance links for one article. `index_set` is the sorted,
/// deduplicated union of all ranked indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceMap {
    pub article_id: String,
    pub entries: Vec<(usize, Vec<usize>)>,
    pub index_set: Vec<usize>,
}

impl RelevanceMap {
    pub fn contains(&self, idx: usize) -> bool {
        self.index_set.binary_search(&idx).is_ok()
    }

    /// The top-ranked article index for each summary sentence.
    pub fn top_indices(&self) -> Vec<usize> {
        self.entries.iter().map(|(_, r)| r[0]).collect()
    }
}

/// Precomputed per-article scoring state, reused across summary sentences.
struct ArticleScorer<'a> {
    kind: MapperKind,
    model: &'a TfidfModel,
    tokens: Vec<Vec<String>>,
    vectors: Vec<BTreeMap<usize, f64>>,
}

impl<'a> ArticleScorer<'a> {
    fn new(article: &Article, kind: MapperKind, model: &'a TfidfModel) -> Self {
        let tokens: Vec<Vec<String>> = article.sentences.iter().map(|s| tokenize(&s.text)).collect();
        let vectors = match kind {
            MapperKind::TfidfCosine => tokens.iter().map(|t| model.vector(t)).collect(),
            MapperKind::Rouge1F1 => Vec::new(),
        };
        Self {
            kind,
            model,
            tokens,
            vectors,
        }
    }

    fn scores(&self, query: &str) -> Vec<f64> {
        let q = tokenize(query);
        match self.kind {
            MapperKind::TfidfCosine => {
                let qv = self.model.vector(&q);
                self.vectors.iter().map(|v| sparse_dot(&qv, v)).collect()
            }
            MapperKind::Rouge1F1 => self.tokens.iter().map(|t| rouge_n(&q, t, 1).f1).collect(),
        }
    }

    fn ranked(&self, query: &str, top_n: usize) -> Vec<usize> {
        let scores = self.scores(query);
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        order.truncate(top_n.min(scores.len()));
        order
    }
}

/// Ranks article sentences for every summary sentence (descending score,
/// lower index wins ties) and keeps the top `mode.top_n`. Entries are
/// clamped to the article length when it is shorter than `top_n`.
pub fn map_summary(article: &Article, summary: &[Sentence], mode: MapperMode, model: &TfidfModel) -> RelevanceMap {
    let scorer = ArticleScorer::new(article, mode.kind, model);
    let mut union = BTreeSet::new();
    let entries = summary
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let ranked = scorer.ranked(&s.text, mode.top_n);
            union.extend(ranked.iter().copied());
            (i, ranked)
        })
        .collect();
    RelevanceMap {
        article_id: article.id.clone(),
        entries,
        index_set: union.into_iter().collect(),
    }
}

/// [`map_summary`] with a TF-IDF model fitted over the article itself.
pub fn map_article(article: &Article, summary: &[Sentence], mode: MapperMode) -> RelevanceMap {
    let model = fit_article(article);
    map_summary(article, summary, mode, &model)
}

/// Uniformly samples `count` article indices outside `relmap.index_set`,
/// without replacement, in sampled order. `None` means "as many as there
/// are relevant indices".
pub fn select_nonrelevant(
    article: &Article,
    relmap: &RelevanceMap,
    count: Option<usize>,
    seed: u64,
) -> Result<Vec<usize>, RelevanceError> {
    let count = count.unwrap_or(relmap.index_set.len());
    let complement: Vec<usize> = (0..article.len()).filter(|i| !relmap.contains(*i)).collect();
    if count > complement.len() {
        return Err(RelevanceError::ComplementTooSmall {
            requested: count,
            available: complement.len(),
        });
    }
    Ok(sample_positions(complement.len(), count, seed)
        .into_iter()
        .map(|p| complement[p])
        .collect())
}
