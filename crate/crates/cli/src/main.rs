mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use relpara_core::analysis::{to_canonical_json, ReportBundle};
use relpara_core::corpus::{load_dataset, DatasetPreset};
use relpara_core::llm::ChatModel;
use relpara_core::perturb::PerturbMode;
use relpara_core::pipeline::{
    analyze_stage, evaluate_stage, map_dataset, paraphrase_stage, run_experiment, summarize_stage, PipelineError,
    RunConfig, RunDir, RunManifest, StageInputs, MANIFEST_FILE,
};
use relpara_core::relevance::{MapperKind, MapperMode};

#[derive(Parser)]
#[command(
    name = "relpara",
    version,
    about = "Paraphrase the summary-relevant sentences of articles and measure how LLM summaries change"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a JSONL dataset and print its profile.
    Ingest(IngestArgs),
    /// Map gold-summary sentences to article sentences.
    Map(RunArgs),
    /// Build the perturbed corpus.
    Paraphrase(RunArgs),
    /// Summarize original and perturbed articles.
    Summarize(RunArgs),
    /// Score both summary sets.
    Evaluate(RunArgs),
    /// Position histograms, relative changes, report files.
    Analyze(RunArgs),
    /// All stages end to end.
    Run(RunArgs),
    /// Print the results of a finished run.
    Stats(StatsArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long = "in", value_name = "PATH")]
    input: PathBuf,
    /// Write the profile here instead of stdout.
    #[arg(long, value_name = "PATH")]
    profile_out: Option<PathBuf>,
    #[arg(long)]
    preset: Option<DatasetPreset>,
    #[arg(long, value_name = "N")]
    target_len: Option<usize>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args, Debug, Default)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub dataset: Option<PathBuf>,
    /// relevant | nonrelevant | identity | none-repeat
    #[arg(long)]
    pub mode: Option<PerturbMode>,
    /// Relevant sentences per gold-summary sentence.
    #[arg(long, value_name = "K")]
    pub top_n: Option<usize>,
    /// tfidf | rouge1
    #[arg(long)]
    pub psi: Option<MapperKind>,
    /// Sampling temperature for summarizer and paraphraser.
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Keep only the first N pairs.
    #[arg(long, value_name = "N")]
    pub limit: Option<usize>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "NAME")]
    pub summarizer: Option<String>,
    #[arg(long, value_name = "NAME")]
    pub paraphraser: Option<String>,
    #[arg(long, value_name = "NAME")]
    pub judge: Option<String>,
    /// Use the deterministic mock summarizer and paraphraser.
    #[arg(long)]
    pub mock: bool,
    #[arg(long, value_name = "URL")]
    pub bertscore_endpoint: Option<String>,
    #[arg(long, value_name = "K")]
    pub max_in_flight: Option<usize>,
    /// cnn | xsum | reddit | news
    #[arg(long)]
    pub preset: Option<DatasetPreset>,
    /// Summary sentences to request; overrides the preset.
    #[arg(long, value_name = "N")]
    pub target_len: Option<usize>,
}

fn config_error(e: impl ToString) -> PipelineError {
    PipelineError::Config(e.to_string())
}

fn build(b: &relpara_core::llm::BackendConfig) -> Result<std::sync::Arc<dyn ChatModel>, PipelineError> {
    b.build()
        .map_err(|e| config_error(format!("backend {:?}: {e}", b.name)))
}

fn print_report(bundle: &ReportBundle) {
    println!(
        "{:<10} {:>10} {:>10} {:>10}",
        "metric", "original", "perturbed", "change%"
    );
    for m in &bundle.change.metrics {
        let change = m.change_pct.map_or("n/a".to_string(), |c| format!("{c:+.3}"));
        println!(
            "{:<10} {:>10.4} {:>10.4} {:>10}",
            m.metric, m.original, m.perturbed, change
        );
    }
    let log = &bundle.exclusions;
    println!(
        "pairs {}  excluded {}  refusal rate {:.4} ({}/{})",
        bundle.original.n_pairs,
        log.excluded_ids.len(),
        log.refusal_rate,
        log.refused_sentences,
        log.attempted_sentences
    );
    println!("position histogram L1 {:.4}", bundle.histograms.l1);
    if let Some(f) = bundle.paraphrase_fidelity {
        println!("paraphrase fidelity {f:.4}");
    }
}

fn ingest(args: &IngestArgs) -> Result<(), PipelineError> {
    let target = args.target_len.or(args.preset.map(DatasetPreset::target_summary_len));
    let dataset = load_dataset(&args.input, target).map_err(|e| PipelineError::stage("load", e))?;
    tracing::info!(
        pairs = dataset.len(),
        dropped = dataset.dropped,
        "loaded {}",
        dataset.name
    );
    let json = to_canonical_json(&dataset.profile).map_err(|e| PipelineError::stage("ingest", e))?;
    match &args.profile_out {
        Some(p) => std::fs::write(p, json).map_err(|e| PipelineError::stage("ingest", e)),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn stats(args: &StatsArgs) -> Result<(), PipelineError> {
    let read = |name: &str| {
        let p = args.out.join(name);
        std::fs::read_to_string(&p).map_err(|e| config_error(format!("{}: {e}", p.display())))
    };
    let bundle: ReportBundle =
        serde_json::from_str(&read("report.json")?).map_err(|e| PipelineError::stage("stats", e))?;
    if let Ok(text) = read(MANIFEST_FILE) {
        let m: RunManifest = serde_json::from_str(&text).map_err(|e| PipelineError::stage("stats", e))?;
        println!(
            "dataset {}  mode {:?}  seed {}  config {}",
            m.dataset,
            m.mode,
            m.seed,
            &m.config_hash[..12.min(m.config_hash.len())]
        );
        println!(
            "summarizer {}  paraphraser {}",
            m.backends.summarizer, m.backends.paraphraser
        );
    }
    print_report(&bundle);
    Ok(())
}

fn stage(command: &Command, cfg: &RunConfig) -> Result<(), PipelineError> {
    if let Command::Run(_) = command {
        let out = run_experiment(cfg)?;
        print_report(&out.bundle);
        return Ok(());
    }
    let dataset = cfg.dataset.load()?;
    let dir = RunDir::create(&cfg.out_dir)?;
    match command {
        Command::Map(_) => {
            let mapper = MapperMode::new(cfg.psi, cfg.top_n).map_err(config_error)?;
            let maps = map_dataset(&dataset, mapper);
            dir.write_relevance(&maps)?;
            println!("mapped {} pairs", maps.len());
        }
        Command::Paraphrase(_) => {
            let corpus = paraphrase_stage(cfg, &dataset, build(&cfg.paraphraser)?.as_ref(), &dir)?;
            let log = &corpus.exclusions;
            println!(
                "perturbed {} pairs, excluded {}, refusal rate {:.4}",
                corpus.pairs.len(),
                log.excluded_ids.len(),
                log.refusal_rate
            );
        }
        Command::Summarize(_) => {
            let (pairs, perturbed, _) = dir.read_perturbed(&dataset)?;
            let model = build(&cfg.summarizer)?;
            let (a, _) = summarize_stage(
                cfg,
                dataset.profile.target_summary_len,
                &pairs,
                &perturbed,
                model.as_ref(),
                &dir,
            )?;
            println!("summarized {} pairs twice", a.len());
        }
        Command::Evaluate(_) | Command::Analyze(_) => {
            let (pairs, perturbed, exclusions) = dir.read_perturbed(&dataset)?;
            let (original_summaries, perturbed_summaries) = dir.read_summaries()?;
            let inputs = StageInputs {
                pairs: &pairs,
                perturbed: &perturbed,
                original_summaries: &original_summaries,
                perturbed_summaries: &perturbed_summaries,
            };
            if let Command::Evaluate(_) = command {
                let judge = cfg.judge.as_ref().map(build).transpose()?;
                let e = evaluate_stage(
                    cfg,
                    &dataset.name,
                    &inputs,
                    &cfg.summarizer.id(),
                    judge.as_deref(),
                    &dir,
                )?;
                println!("rouge1 {:.4} -> {:.4}", e.original.rouge1_f1, e.perturbed.rouge1_f1);
            } else {
                let evaluation = dir.read_evaluation()?;
                let (bundle, _) = analyze_stage(cfg, &inputs, evaluation, exclusions, &dir)?;
                print_report(&bundle);
            }
        }
        Command::Ingest(_) | Command::Stats(_) | Command::Run(_) => unreachable!("handled by the caller"),
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), PipelineError> {
    match &cli.command {
        Command::Ingest(args) => ingest(args),
        Command::Stats(args) => stats(args),
        Command::Map(args)
        | Command::Paraphrase(args)
        | Command::Summarize(args)
        | Command::Evaluate(args)
        | Command::Analyze(args)
        | Command::Run(args) => {
            let cfg = config::resolve(args).map_err(config_error)?;
            stage(&cli.command, &cfg)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_env("RELPARA_LOG").unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
