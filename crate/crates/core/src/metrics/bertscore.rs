//! Client for the BertScore sidecar.
//!
//! Wire contract: `POST {endpoint}/v1/score` with
//! `{"pairs":[{"candidate","reference"}...]}` answered by
//! `{"scores":[{"p","r","f1"} | {"error"}...]}` in request order, and
//! `GET {endpoint}/healthz` answering 200 with `{"model": id}`.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{MetricsError, PairScorer};
use crate::exec::ordered_map;
use crate::llm::{ReqwestTransport, Transport};

pub const DEFAULT_BATCH_SIZE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BertScoreTriple {
    pub p: f64,
    pub r: f64,
    pub f1: f64,
}

/// Outcome for one pair: scores, or the sidecar's per-pair error message.
pub type PairScore = Result<BertScoreTriple, String>;

#[derive(Deserialize)]
#[serde(untagged)]
enum WireScore {
    Ok(BertScoreTriple),
    Err { error: String },
}

#[derive(Deserialize)]
struct WireResponse {
    scores: Vec<WireScore>,
}

pub struct BertScoreClient<T: Transport = ReqwestTransport> {
    endpoint: String,
    batch_size: usize,
    max_in_flight: usize,
    timeout: Duration,
    transport: T,
}

impl BertScoreClient<ReqwestTransport> {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self::with_transport(endpoint, ReqwestTransport::default())
    }

    /// `GET /healthz`; returns the model id the sidecar reports.
    pub fn healthz(&self) -> Result<String, MetricsError> {
        let url = format!("{}/healthz", self.endpoint);
        let resp = reqwest::blocking::Client::new()
            .get(&url)
            .timeout(self.timeout)
            .send()
            .map_err(|e| MetricsError::Sidecar(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(MetricsError::Sidecar(format!("healthz returned {}", resp.status())));
        }
        let v: Value = resp.json().map_err(|e| MetricsError::Protocol(e.to_string()))?;
        v.get("model")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| MetricsError::Protocol("healthz reply lacks \"model\"".into()))
    }
}

impl<T: Transport> BertScoreClient<T> {
    pub fn with_transport(endpoint: impl Into<String>, transport: T) -> Self {
        Self {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            batch_size: DEFAULT_BATCH_SIZE,
            max_in_flight: 4,
            timeout: Duration::from_secs(120),
            transport,
        }
    }

    pub fn batch_size(mut self, n: usize) -> Self {
        self.batch_size = n.max(1);
        self
    }

    pub fn max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }

    pub fn timeout(mut self, t: Duration) -> Self {
        self.timeout = t;
        self
    }

    fn score_batch(&self, batch: &[(String, String)]) -> Result<Vec<PairScore>, MetricsError> {
        let body = json!({
            "pairs": batch
                .iter()
                .map(|(c, r)| json!({"candidate": c, "reference": r}))
                .collect::<Vec<_>>()
        });
        let url = format!("{}/v1/score", self.endpoint);
        let reply = self
            .transport
            .post_json(&url, None, &body, self.timeout)
            .map_err(MetricsError::Sidecar)?;
        if !(200..300).contains(&reply.status) {
            return Err(MetricsError::Sidecar(format!("HTTP {}: {}", reply.status, reply.body)));
        }
        let parsed: WireResponse =
            serde_json::from_str(&reply.body).map_err(|e| MetricsError::Protocol(e.to_string()))?;
        if parsed.scores.len() != batch.len() {
            return Err(MetricsError::Protocol(format!(
                "{} scores for {} pairs",
                parsed.scores.len(),
                batch.len()
            )));
        }
        Ok(parsed
            .scores
            .into_iter()
            .map(|s| match s {
                WireScore::Ok(t) => Ok(t),
                WireScore::Err { error } => Err(error),
            })
            .collect())
    }

    /// Scores `(candidate, reference)` pairs in batches, preserving order.
    pub fn score(&self, pairs: &[(String, String)]) -> Result<Vec<PairScore>, MetricsError> {
        let batches: Vec<&[(String, String)]> = pairs.chunks(self.batch_size).collect();
        let results = ordered_map(&batches, self.max_in_flight, |b| self.score_batch(b));
        let mut out = Vec::with_capacity(pairs.len());
        for r in results {
            out.extend(r?);
        }
        Ok(out)
    }
}

impl<T: Transport> PairScorer for BertScoreClient<T> {
    fn name(&self) -> String {
        format!("bertscore@{}", self.endpoint)
    }

    fn score_f1(&self, pairs: &[(String, String)]) -> Result<Vec<f64>, MetricsError> {
        self.score(pairs)?
            .into_iter()
            .enumerate()
            .map(|(index, s)| {
                s.map(|t| t.f1)
                    .map_err(|message| MetricsError::PairFailed { index, message })
            })
            .collect()
    }
}
