//! TOML run configuration and flag merging. Flags win over the file, the
//! file wins over built-in defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use relpara_core::corpus::DatasetPreset;
use relpara_core::llm::{BackendConfig, GenerationConfig, SummaryStyle};
use relpara_core::perturb::PerturbMode;
use relpara_core::pipeline::{DatasetConfig, MetricToggles, RunConfig};
use relpara_core::relevance::MapperKind;

use crate::RunArgs;

/// Backend names usable without a `[backends.*]` table.
pub const BUILTIN_BACKENDS: [&str; 3] = ["openai", "mock-extractive", "mock-reversal"];

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub max_in_flight: Option<usize>,
    pub mode: Option<PerturbMode>,
    pub top_n: Option<usize>,
    pub psi: Option<MapperKind>,
    pub prompt_style: Option<SummaryStyle>,
    pub bins: Option<usize>,
    pub summarizer: Option<String>,
    pub paraphraser: Option<String>,
    pub judge: Option<String>,
    pub bertscore_endpoint: Option<String>,
    pub bertscore_batch: Option<usize>,
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub generation: GenerationSection,
    #[serde(default)]
    pub backends: BTreeMap<String, BackendConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub path: Option<PathBuf>,
    pub preset: Option<DatasetPreset>,
    pub target_summary_len: Option<usize>,
    pub limit: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationSection {
    pub summarizer: Option<GenerationConfig>,
    pub paraphraser: Option<GenerationConfig>,
    pub judge: Option<GenerationConfig>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    fn backend(&self, name: &str) -> Result<BackendConfig, String> {
        if let Some(b) = self.backends.get(name) {
            return Ok(BackendConfig {
                name: name.to_string(),
                ..b.clone()
            });
        }
        match name {
            "openai" => Ok(BackendConfig::default()),
            "mock-extractive" => Ok(BackendConfig::mock_extractive()),
            "mock-reversal" => Ok(BackendConfig::mock_reversal()),
            other => {
                let mut known: Vec<&str> = self.backends.keys().map(String::as_str).collect();
                known.extend(BUILTIN_BACKENDS);
                Err(format!("unknown backend {other:?}; known: {}", known.join(", ")))
            }
        }
    }
}

/// Resolves the effective run configuration.
pub fn resolve(args: &RunArgs) -> Result<RunConfig, String> {
    let file = match &args.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };

    let path = args
        .dataset
        .clone()
        .or(file.dataset.path.clone())
        .ok_or("no dataset given (--dataset or [dataset].path)")?;
    let dataset = DatasetConfig {
        path,
        target_summary_len: args.target_len.or(file.dataset.target_summary_len),
        preset: args.preset.or(file.dataset.preset),
        limit: args.limit.or(file.dataset.limit),
    };

    let pick = |flag: &Option<String>, from_file: &Option<String>, default: &str| {
        flag.clone()
            .or(from_file.clone())
            .unwrap_or_else(|| default.to_string())
    };
    let (summarizer, paraphraser, judge) = if args.mock {
        (BackendConfig::mock_extractive(), BackendConfig::mock_reversal(), None)
    } else {
        let judge = match args.judge.clone().or(file.judge.clone()) {
            Some(name) => Some(file.backend(&name)?),
            None => None,
        };
        (
            file.backend(&pick(&args.summarizer, &file.summarizer, "openai"))?,
            file.backend(&pick(&args.paraphraser, &file.paraphraser, "openai"))?,
            judge,
        )
    };
    if args.mock && (args.judge.is_some() || file.judge.is_some()) {
        tracing::warn!("--mock: no mock judge exists, G-Eval is skipped");
    }

    let mut summarizer_generation = file.generation.summarizer.unwrap_or_default();
    let mut paraphraser_generation = file.generation.paraphraser.unwrap_or_default();
    if let Some(t) = args.temperature {
        summarizer_generation.temperature = t;
        paraphraser_generation.temperature = t;
    }

    let defaults = RunConfig::mock(PathBuf::new(), PathBuf::new());
    let config = RunConfig {
        dataset,
        summarizer,
        paraphraser,
        judge,
        summarizer_generation,
        paraphraser_generation,
        judge_generation: file.generation.judge.unwrap_or(defaults.judge_generation),
        prompt_style: file.prompt_style.unwrap_or_default(),
        mode: args.mode.or(file.mode).unwrap_or(PerturbMode::Relevant),
        top_n: args.top_n.or(file.top_n).unwrap_or(1),
        psi: args.psi.or(file.psi).unwrap_or(MapperKind::TfidfCosine),
        metrics: MetricToggles {
            bertscore_endpoint: args.bertscore_endpoint.clone().or(file.bertscore_endpoint),
            bertscore_batch: file.bertscore_batch.unwrap_or(defaults.metrics.bertscore_batch),
        },
        seed: args.seed.or(file.seed).unwrap_or(0),
        out_dir: args
            .out
            .clone()
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from("runs/latest")),
        max_in_flight: args
            .max_in_flight
            .or(file.max_in_flight)
            .unwrap_or(defaults.max_in_flight),
        bins: file.bins.unwrap_or(defaults.bins),
    };
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    fn args(extra: &[&str]) -> RunArgs {
        #[derive(Parser)]
        struct Wrap {
            #[command(flatten)]
            run: RunArgs,
        }
        let mut argv = vec!["relpara"];
        argv.extend_from_slice(extra);
        Wrap::parse_from(argv).run
    }

    const FILE: &str = r#"
seed = 3
mode = "nonrelevant"
top_n = 2
summarizer = "local"
paraphraser = "mock-reversal"

[dataset]
path = "data.jsonl"
preset = "xsum"

[generation.summarizer]
temperature = 0.0
max_tokens = 128

[backends.local]
kind = "openai"
base_url = "http://127.0.0.1:8000"
model_id = "llama"
"#;

    fn write_config(body: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), body).unwrap();
        f
    }

    #[test]
    fn file_values_apply() {
        let f = write_config(FILE);
        let cfg = resolve(&args(&["--config", f.path().to_str().unwrap()])).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.mode, PerturbMode::NonrelevantRandom);
        assert_eq!(cfg.top_n, 2);
        assert_eq!(cfg.dataset.preset, Some(DatasetPreset::Xsum));
        assert_eq!(cfg.summarizer.name, "local");
        assert_eq!(cfg.summarizer.model_id, "llama");
        assert_eq!(cfg.summarizer.max_retries, BackendConfig::default().max_retries);
        assert_eq!(cfg.summarizer_generation.max_tokens, 128);
        assert_eq!(cfg.paraphraser, BackendConfig::mock_reversal());
    }

    #[test]
    fn flags_win() {
        let f = write_config(FILE);
        let cfg = resolve(&args(&[
            "--config",
            f.path().to_str().unwrap(),
            "--seed",
            "9",
            "--mode",
            "identity",
            "--psi",
            "rouge1",
            "--temperature",
            "0.3",
            "--dataset",
            "other.jsonl",
            "--mock",
        ]))
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.mode, PerturbMode::Identity);
        assert_eq!(cfg.psi, MapperKind::Rouge1F1);
        assert_eq!(cfg.summarizer_generation.temperature, 0.3);
        assert_eq!(cfg.dataset.path, PathBuf::from("other.jsonl"));
        assert_eq!(cfg.summarizer, BackendConfig::mock_extractive());
    }

    #[test]
    fn config_errors() {
        assert!(resolve(&args(&[])).unwrap_err().contains("no dataset"));
        let f = write_config("surprise = 1\n");
        assert!(resolve(&args(&["--config", f.path().to_str().unwrap(), "--dataset", "d"])).is_err());
        let e = resolve(&args(&["--dataset", "d", "--summarizer", "nope"])).unwrap_err();
        assert!(e.contains("unknown backend"), "{e}");
        assert!(resolve(&args(&["--dataset", "d", "--top-n", "0"])).is_err());
    }

    #[test]
    fn example_config_parses() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/example.toml");
        let file = FileConfig::load(&path).unwrap();
        assert_eq!(file.backends.len(), 3);
        let cfg = resolve(&args(&["--config", path.to_str().unwrap()])).unwrap();
        assert_eq!(cfg.dataset.preset, Some(DatasetPreset::Cnn));
        assert_eq!(cfg.paraphraser_generation.max_tokens, 256);
        assert_eq!(cfg.summarizer.api_key_env, "OPENAI_API_KEY");
    }
}
