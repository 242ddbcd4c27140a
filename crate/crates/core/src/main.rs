use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use llmloop::active_learning::{LoopAnnotator, LoopConfig, LoopRunner};
use llmloop::annotation::{
    pick_examples, Annotator, AnnotatorConfig, AnnotatorSpec, PromptVariant, RemoteBackend,
};
use llmloop::contamination::{
    contamination_score, read_samples, ContaminationConfig, ContaminationMock,
};
use llmloop::corpus::{load_conll, save_conll};
use llmloop::quality::{evaluate_annotator, DEFAULT_REANNOTATIONS};
use llmloop::sampling::{balanced_sample, BalancedSamplerConfig};
use llmloop::{Error, Result};

#[derive(Parser)]
#[command(
    name = "llmloop",
    version,
    about = "Active learning for NER with an LLM annotator"
)]
struct Cli {
    /// Language code of CoNLL inputs.
    #[arg(long, global = true, default_value = "bam")]
    language: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Default,
    Shortened,
}

impl From<Variant> for PromptVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Default => PromptVariant::Default,
            Variant::Shortened => PromptVariant::Shortened,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw an entity-balanced subset.
    Sample {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        min_p: f64,
        #[arg(long, default_value_t = 0.50)]
        max_p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Reannotate a subset and report agreement, consistency and format errors.
    EvaluateAnnotator {
        #[arg(long)]
        corpus: PathBuf,
        /// Split the few-shot examples are drawn from.
        #[arg(long)]
        examples_from: PathBuf,
        #[arg(long, default_value = "remote")]
        annotator: String,
        #[arg(long, value_enum, default_value = "default")]
        variant: Variant,
        #[arg(long, default_value_t = DEFAULT_REANNOTATIONS)]
        rounds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the active-learning loop.
    RunAl {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value = "oracle")]
        annotator: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Receives report.json, curve.csv and the checkpoint directory.
        #[arg(long, default_value = "al-run")]
        out_dir: PathBuf,
        /// Continue from the checkpoint in `out_dir`.
        #[arg(long)]
        resume: bool,
    },
    /// Ask the model to name the source dataset of sampled records.
    Contamination {
        #[arg(long)]
        dataset: String,
        /// JSONL records with a `source` field.
        #[arg(long)]
        samples: PathBuf,
        /// `remote` or `mock:p=0.94,seed=0`.
        #[arg(long, default_value = "remote")]
        annotator: String,
        #[arg(long, default_value_t = 3)]
        runs: usize,
        #[arg(long)]
        multilingual: bool,
        #[arg(long = "alias")]
        aliases: Vec<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Settings file shared by the commands that talk to an annotator.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct Settings {
    #[serde(rename = "loop")]
    run: LoopConfig,
    annotator: AnnotatorConfig,
    variant: PromptVariant,
}

fn load_settings(path: Option<&Path>) -> Result<Settings> {
    let Some(path) = path else {
        return Ok(Settings::default());
    };
    let text =
        fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let lang = cli.language.as_str();
    match cli.command {
        Command::Sample {
            input,
            out,
            n,
            min_p,
            max_p,
            seed,
        } => {
            let corpus = load_conll(&input, lang)?;
            let cfg = BalancedSamplerConfig {
                min_proportion: min_p,
                max_proportion: max_p,
                sample_size: n,
                seed,
            };
            let sample = balanced_sample(&corpus, &cfg)?;
            save_conll(&sample.corpus, &out, '\t')?;
            let report = serde_json::json!({
                "config": cfg,
                "sampled": sample.corpus.len(),
                "filtered_pool_size": sample.filtered_pool_size,
                "undersized": sample.undersized,
                "pool_class_shares": sample.pool_class_shares,
                "sample_class_shares": sample.sample_class_shares,
            });
            write_json(&out.with_extension("report.json"), &report)?;
            log::info!(
                "wrote {} sentences to {}",
                sample.corpus.len(),
                out.display()
            );
        }
        Command::EvaluateAnnotator {
            corpus,
            examples_from,
            annotator,
            variant,
            rounds,
            seed,
            config,
            out,
        } => {
            let settings = load_settings(config.as_deref())?;
            let corpus = load_conll(&corpus, lang)?;
            let examples = pick_examples(&load_conll(&examples_from, lang)?, seed)?;
            let backend = annotator
                .parse::<AnnotatorSpec>()?
                .backend(&settings.annotator)?;
            let annotator = Annotator::new(backend, settings.annotator, variant.into(), examples)?;
            let report = evaluate_annotator(&annotator, &corpus, rounds)?;
            print!("{}", report.to_table());
            if let Some(out) = out {
                write_json(&out, &report)?;
            }
        }
        Command::RunAl {
            corpus,
            test,
            annotator,
            config,
            out_dir,
            resume,
        } => {
            let settings = load_settings(config.as_deref())?;
            let train = load_conll(&corpus, lang)?;
            let test = load_conll(&test, lang)?;
            let spec: AnnotatorSpec = annotator.parse()?;
            let annotator = match spec {
                AnnotatorSpec::Oracle => LoopAnnotator::Oracle,
                spec => {
                    let examples = pick_examples(&test, settings.run.seed)?;
                    let backend = spec.backend(&settings.annotator)?;
                    LoopAnnotator::Llm(Annotator::new(
                        backend,
                        settings.annotator.clone(),
                        settings.variant,
                        examples,
                    )?)
                }
            };
            let ckpt = out_dir.join("checkpoint");
            let mut runner = if resume {
                LoopRunner::resume(&ckpt, &train, &test, &annotator)?
            } else {
                LoopRunner::new(&train, &test, settings.run, &annotator)?
                    .with_checkpoint_dir(&ckpt)?
            };
            while let Some(r) = runner.step()? {
                log::info!(
                    "iteration {}: {:.1}% labeled, entity accuracy {:.2}%",
                    r.iteration,
                    r.data_percent,
                    r.entity_accuracy
                );
            }
            let report = runner.report();
            write_json(&out_dir.join("report.json"), &report)?;
            let csv_path = out_dir.join("curve.csv");
            let file = File::create(&csv_path)
                .map_err(|e| Error::Config(format!("{}: {e}", csv_path.display())))?;
            report.write_csv(file)?;
        }
        Command::Contamination {
            dataset,
            samples,
            annotator,
            runs,
            multilingual,
            aliases,
            config,
            out,
        } => {
            let settings = load_settings(config.as_deref())?;
            let file = File::open(&samples)
                .map_err(|e| Error::Config(format!("{}: {e}", samples.display())))?;
            let samples = read_samples(BufReader::new(file))?;
            let cfg = ContaminationConfig {
                dataset: dataset.clone(),
                n_records: samples.len(),
                n_runs: runs,
                multilingual,
                // the samples file is already stratified
                languages_per_dataset: 1,
                records_per_language: samples.len(),
                aliases,
                ..Default::default()
            };
            let backend: Arc<dyn llmloop::annotation::AnnotatorBackend> = match annotator.as_str() {
                "remote" => Arc::new(RemoteBackend::from_config(&settings.annotator)?),
                other => Arc::new(parse_source_mock(other, &dataset)?),
            };
            let report = contamination_score(
                &samples,
                backend.as_ref(),
                &cfg,
                &settings.annotator.retry_policy(),
            )?;
            println!(
                "{dataset}: {:.2} ± {:.2} over {} runs",
                report.mean, report.std, runs
            );
            match out {
                Some(out) => write_json(&out, &report)?,
                None => println!("{}", serde_json::to_string_pretty(&report)?),
            }
        }
    }
    Ok(())
}

fn parse_source_mock(spec: &str, dataset: &str) -> Result<ContaminationMock> {
    let opts = spec
        .strip_prefix("mock")
        .map(|s| s.trim_start_matches(':'))
        .ok_or_else(|| {
            Error::Config(format!(
                "unknown annotator {spec:?}; expected remote or mock[:p=..,seed=..]"
            ))
        })?;
    let (mut p, mut seed) = (1.0, 0);
    for part in opts.split(',').filter(|s| !s.trim().is_empty()) {
        let bad = || Error::Config(format!("bad mock option {part:?}"));
        match part.split_once('=').ok_or_else(bad)? {
            ("p", v) => p = v.parse().map_err(|_| bad())?,
            ("seed", v) => seed = v.parse().map_err(|_| bad())?,
            _ => return Err(bad()),
        }
    }
    ContaminationMock::new(dataset, p, seed)
}
