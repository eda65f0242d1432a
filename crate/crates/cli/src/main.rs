//! `vap` — a turn-taking pipeline over two-party voice-activity corpora.
//!
//! Subcommands cover the full flow: generate a synthetic corpus, emit
//! per-frame projection labels and evaluation events, train the count-based
//! predictor, calibrate decision thresholds on the validation split, and
//! score the test split. Every step is deterministic given the same
//! configuration and seeds, so artifacts are byte-identical across runs.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 internal invariant violation. Set `VAP_LOG` (e.g. `info`, `debug`) to
//! control log verbosity; warnings are shown by default.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use vap_core::zeroshot::{BcTemplate, StateSubset};
use vap_core::{
    calibrate_thresholds, load_config, load_corpus, prepare_dialogs, run_evaluation, save_corpus,
    score_split, synth_corpus, train_split, EventSet, HeadKind, MarkovModel, OracleConfig,
    PredictorSource, PreparedDialog, RunConfig, Speaker, SplitSpec, SubsetTables, TaskThresholds,
    VapLabels, ZeroShotScorer,
};

const EXIT_USAGE: i32 = 1;
const EXIT_DATA: i32 = 2;
const EXIT_INTERNAL: i32 = 3;

#[derive(Parser)]
#[command(
    name = "vap",
    version,
    about = "Turn-taking analysis over two-party voice-activity corpora"
)]
struct Cli {
    /// TOML run configuration; built-in defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dialog corpus (JSONL).
    Synth {
        /// Corpus file to write.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Emit per-frame projection labels for every dialog (JSONL).
    Encode {
        /// Corpus file to read.
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        /// Label file to write.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Extract evaluation events for every dialog (JSONL).
    Events {
        /// Corpus file to read.
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        /// Event file to write; each line carries skip-reason counters.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Train the count-based predictor on the training split.
    Train {
        /// Corpus file to read.
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        /// Split file to read; derived from the configuration when omitted.
        #[arg(long, value_name = "FILE")]
        split: Option<PathBuf>,
        /// Model file to write.
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// Also write the split that was used (handy when it was derived).
        #[arg(long, value_name = "FILE")]
        split_out: Option<PathBuf>,
    },
    /// Pick per-task decision thresholds on the validation split.
    Calibrate {
        /// Corpus file to read.
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        /// Split file to read; derived from the configuration when omitted.
        #[arg(long, value_name = "FILE")]
        split: Option<PathBuf>,
        #[command(flatten)]
        source: SourceArgs,
        /// Threshold file to write.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Score the test split and report per-task weighted F1.
    Evaluate {
        /// Corpus file to read.
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        /// Split file to read; derived from the configuration when omitted.
        #[arg(long, value_name = "FILE")]
        split: Option<PathBuf>,
        #[command(flatten)]
        source: SourceArgs,
        /// Threshold file to read; when omitted, configured thresholds are
        /// used if present, otherwise thresholds are calibrated on the
        /// validation split.
        #[arg(long, value_name = "FILE")]
        thresholds: Option<PathBuf>,
        /// Head format to score with.
        #[arg(long, value_enum, default_value_t = HeadChoice::Discrete)]
        head: HeadChoice,
        /// Report format printed to stdout.
        #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
        report: ReportFormat,
        /// Also write the full result (thresholds + report) as JSON.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Export the zero-shot subset tables as JSON.
    Subsets {
        /// File to write; stdout when omitted.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

/// Where predictions come from: a trained model file or the label-peeking
/// oracle.
#[derive(Args)]
struct SourceArgs {
    /// Trained model file.
    #[arg(long, value_name = "FILE", conflicts_with = "oracle")]
    model: Option<PathBuf>,
    /// Use the label-peeking oracle instead of a trained model.
    #[arg(long)]
    oracle: bool,
    /// Oracle noise: probability mass moved off the true state.
    #[arg(long, value_name = "EPS", requires = "oracle")]
    eps: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum HeadChoice {
    Discrete,
    Independent4,
    Independent40,
    Comparative,
}

impl From<HeadChoice> for HeadKind {
    fn from(choice: HeadChoice) -> HeadKind {
        match choice {
            HeadChoice::Discrete => HeadKind::Discrete,
            HeadChoice::Independent4 => HeadKind::Independent4,
            HeadChoice::Independent40 => HeadKind::Independent40,
            HeadChoice::Comparative => HeadKind::Comparative,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Table,
    Json,
}

enum CliError {
    Usage(String),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(err: E) -> CliError {
        CliError::Data(err.into())
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };

    env_logger::Builder::from_env(env_logger::Env::default().filter_or("VAP_LOG", "warn"))
        .format_timestamp(None)
        .init();

    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run(cli)));
    let code = match outcome {
        Ok(Ok(())) => 0,
        Ok(Err(CliError::Usage(msg))) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Ok(Err(CliError::Data(err))) => {
            eprintln!("error: {err:#}");
            EXIT_DATA
        }
        Err(_) => {
            eprintln!("error: internal invariant violation (see panic message above)");
            EXIT_INTERNAL
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };

    match cli.command {
        Command::Synth { out } => {
            let dialogs = synth_corpus(&config.synth)?;
            save_corpus(&out, &dialogs)?;
            log::info!("wrote {} dialogs to {}", dialogs.len(), out.display());
        }
        Command::Encode { corpus, out } => {
            let prepared = prepare(&config, &corpus)?;
            #[derive(Serialize)]
            struct LabelRecord<'a> {
                dialog: &'a str,
                #[serde(flatten)]
                labels: &'a VapLabels,
            }
            write_jsonl(
                &out,
                prepared.iter().map(|d| LabelRecord {
                    dialog: &d.id,
                    labels: &d.labels,
                }),
            )?;
            log::info!("wrote labels for {} dialogs to {}", prepared.len(), out.display());
        }
        Command::Events { corpus, out } => {
            let prepared = prepare(&config, &corpus)?;
            #[derive(Serialize)]
            struct EventRecord<'a> {
                dialog: &'a str,
                #[serde(flatten)]
                events: &'a EventSet,
            }
            write_jsonl(
                &out,
                prepared.iter().map(|d| EventRecord {
                    dialog: &d.id,
                    events: &d.events,
                }),
            )?;
            let skipped: u32 = prepared.iter().map(|d| d.events.skips.total()).sum();
            let extracted: usize = prepared.iter().map(|d| d.events.iter().count()).sum();
            log::info!(
                "extracted {extracted} events ({skipped} candidates skipped) to {}",
                out.display()
            );
        }
        Command::Train {
            corpus,
            split,
            model,
            split_out,
        } => {
            let prepared = prepare(&config, &corpus)?;
            let split = resolve_split(&split, &config, &prepared)?;
            let trained = train_split(&prepared, &split.train_ids, config.predictor.smoothing_alpha)?;
            trained.save(&model)?;
            if let Some(path) = split_out {
                write_json(&path, &split)?;
            }
            log::info!(
                "trained on {} dialogs ({} contexts observed), wrote {}",
                split.train_ids.len(),
                trained.observed_keys(),
                model.display()
            );
        }
        Command::Calibrate {
            corpus,
            split,
            source,
            out,
        } => {
            let prepared = prepare(&config, &corpus)?;
            let split = resolve_split(&split, &config, &prepared)?;
            let source = source.resolve(&config)?;
            let scored = score_split(
                &prepared,
                &split.val_ids,
                &source,
                &build_scorer(&config),
                config.eval.aggregation,
                HeadKind::Discrete,
                &config.bins,
            )?;
            let thresholds = calibrate_thresholds(&scored)?;
            write_json(&out, &thresholds)?;
            log::info!(
                "calibrated on {} validation events, wrote {}",
                scored.len(),
                out.display()
            );
        }
        Command::Evaluate {
            corpus,
            split,
            source,
            thresholds,
            head,
            report,
            out,
        } => {
            let prepared = prepare(&config, &corpus)?;
            let split = resolve_split(&split, &config, &prepared)?;
            let source = source.resolve(&config)?;
            let fixed = match &thresholds {
                Some(path) => Some(read_json::<TaskThresholds>(path)?),
                None => config.eval.thresholds,
            };
            let run = run_evaluation(
                &prepared,
                &split,
                &source,
                &build_scorer(&config),
                config.eval.aggregation,
                head.into(),
                &config.bins,
                fixed,
            )?;
            match report {
                ReportFormat::Table => println!("{}", run.report.to_table()),
                ReportFormat::Json => println!("{}", run.report.to_json()),
            }
            if let Some(path) = out {
                write_json(&path, &run)?;
            }
        }
        Command::Subsets { out } => {
            let tables = SubsetTables::new(&BcTemplate::default());
            let states = |subset: &StateSubset| {
                subset.states().iter().map(|s| s.index()).collect::<Vec<u8>>()
            };
            let pair = |subset_of: &dyn Fn(Speaker) -> Vec<u8>| {
                serde_json::json!({ "a": subset_of(Speaker::A), "b": subset_of(Speaker::B) })
            };
            let doc = serde_json::json!({
                "next_speaker": pair(&|s| states(tables.next_speaker(s))),
                "next_speaker_pred": pair(&|s| states(tables.next_speaker_pred(s))),
                "backchannel": pair(&|s| states(tables.backchannel(s))),
            });
            let text = serde_json::to_string_pretty(&doc).expect("subset tables serialize");
            match out {
                Some(path) => std::fs::write(&path, text + "\n")
                    .with_context(|| format!("writing {}", path.display()))?,
                None => println!("{text}"),
            }
        }
    }
    Ok(())
}

impl SourceArgs {
    /// Resolve to a predictor, loading the model file when given.
    fn resolve(&self, config: &RunConfig) -> Result<PredictorSource, CliError> {
        match (&self.model, self.oracle) {
            (Some(path), false) => Ok(PredictorSource::Markov(MarkovModel::load(path)?)),
            (None, true) => Ok(PredictorSource::Oracle(OracleConfig {
                noise_epsilon: self.eps.unwrap_or(config.predictor.noise_epsilon),
                seed: config.predictor.oracle_seed,
            })),
            (None, false) => Err(CliError::Usage(
                "one of --model <FILE> or --oracle is required".to_owned(),
            )),
            (Some(_), true) => unreachable!("clap rejects --model with --oracle"),
        }
    }
}

/// Load and fully prepare a corpus: rasterize, label, extract events.
fn prepare(config: &RunConfig, corpus: &Path) -> Result<Vec<PreparedDialog>, CliError> {
    let rate = config.frame_rate()?;
    let dialogs = load_corpus(corpus)?;
    Ok(prepare_dialogs(
        &dialogs,
        rate,
        &config.bins,
        &config.events,
    )?)
}

/// Read a split file, or derive the configured deterministic split.
fn resolve_split(
    path: &Option<PathBuf>,
    config: &RunConfig,
    prepared: &[PreparedDialog],
) -> Result<SplitSpec, CliError> {
    let ids: Vec<String> = prepared.iter().map(|d| d.id.clone()).collect();
    match path {
        Some(path) => {
            let split: SplitSpec = read_json(path)?;
            split.validate(&ids)?;
            Ok(split)
        }
        None => Ok(SplitSpec::random(
            &ids,
            config.split.val_frac,
            config.split.test_frac,
            config.split.seed,
        )?),
    }
}

fn build_scorer(config: &RunConfig) -> ZeroShotScorer {
    ZeroShotScorer::new(SubsetTables::new(&BcTemplate::default()), config.score.clone())
}

fn write_jsonl<T: Serialize>(
    path: &Path,
    records: impl Iterator<Item = T>,
) -> Result<(), CliError> {
    let file =
        File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut writer = BufWriter::new(file);
    for record in records {
        serde_json::to_writer(&mut writer, &record)
            .with_context(|| format!("writing {}", path.display()))?;
        writer
            .write_all(b"\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    writer
        .flush()
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .with_context(|| format!("serializing {}", path.display()))?;
    std::fs::write(path, text + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))?)
}
