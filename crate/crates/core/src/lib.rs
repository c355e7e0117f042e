//! Robustness harness for zero-shot LLM summarizers.
//!
//! The sentences of each article that best match its gold summary are
//! paraphrased, the perturbed articles are summarized again, and the change
//! in summary quality and in which article positions the summaries draw
//! from is reported.

pub mod analysis;
pub mod corpus;
pub mod exec;
pub mod jsonl;
pub mod llm;
pub mod metrics;
pub mod perturb;
pub mod pipeline;
pub mod relevance;
pub mod sampling;
pub mod text;

pub use analysis::{histogram_divergence, position_distribution, PositionHistogram, ReportBundle};
pub use corpus::{load_dataset, segment_sentences, Article, Dataset, DatasetProfile, GoldSummary, Pair, Sentence};
pub use llm::{BackendConfig, ChatModel, GenerationConfig, ModelSummary, ParsedSummary};
pub use metrics::{performance_change, MetricReport};
pub use perturb::{build_perturbed_corpus, PerturbMode, PerturbationPlan, PerturbedArticle};
pub use pipeline::{run_experiment, run_experiment_with, RunConfig};
pub use relevance::{map_summary, MapperKind, MapperMode, RelevanceMap};
