use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use timerank::checkpoint::Checkpoint;
use timerank::dataset::{
    fill_timestamps, rankings_for, read_json, read_jsonl, write_jsonl, write_rankings, write_text,
    DataSplits,
};
use timerank::experiment::{run_experiment, ExperimentConfig};
use timerank::synth::{generate_synthetic, GeneratorSpec};
use timerank::training::{
    evaluate, finetune, pretrain_runs, select_best, select_pretrained_for, write_log, Evaluation,
    TrainingConfig,
};
use timerank::{Error, RankingMethod};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Time-aware evidence ranking for claim veracity prediction.
#[derive(Parser)]
#[command(name = "timerank", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fill missing snippet timestamps from dates at the start of snippet text.
    ParseDates { input: PathBuf, output: PathBuf },
    /// Write ground-truth evidence rankings for every claim.
    BuildRankings {
        #[arg(long)]
        method: RankingMethod,
        input: PathBuf,
        output: PathBuf,
    },
    /// Generate synthetic train/dev/test splits.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pre-train on every domain, or fine-tune on one with --domain.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        domain: Option<String>,
        /// Start fine-tuning from this checkpoint instead of pre-training.
        #[arg(long, requires = "domain")]
        init: Option<PathBuf>,
        /// Per-epoch training log (line-delimited JSON).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Print test metrics of a checkpoint as JSON.
    Evaluate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Ground truth for the Kendall tau of the ranking scores.
        #[arg(long)]
        method: Option<RankingMethod>,
        /// Defaults to the checkpoint's fine-tuning domain, else all domains.
        #[arg(long)]
        domain: Option<String>,
    },
    /// Compare methods per domain and write the result table (.json or .md).
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
}

#[derive(Serialize)]
struct EvaluationReport<'a> {
    checkpoint: &'a Path,
    domain: Option<&'a str>,
    method: Option<RankingMethod>,
    #[serde(flatten)]
    evaluation: Evaluation,
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::ParseDates { input, output } => {
            let mut records = read_jsonl(&input)?;
            let report = fill_timestamps(&mut records);
            write_jsonl(&output, &records)?;
            print_json(&report)
        }
        Command::BuildRankings {
            method,
            input,
            output,
        } => {
            let records = read_jsonl(&input)?;
            write_rankings(&output, &rankings_for(&records, method))
        }
        Command::Generate { spec, seed, out } => {
            let spec: GeneratorSpec = read_json(&spec)?;
            generate_synthetic(&spec, seed)?.splits.save(&out)
        }
        Command::Train {
            config,
            data,
            out,
            domain,
            init,
            log,
        } => {
            let config: TrainingConfig = read_json(&config)?;
            config.validate()?;
            let splits = DataSplits::load(&data)?;
            let (params, records, domain) = match domain {
                Some(domain) => {
                    let start = match init {
                        Some(path) => {
                            let ckpt = Checkpoint::load(&path)?;
                            if ckpt.schema != splits.schema {
                                return Err(Error::Invalid(format!(
                                    "{} was trained on a different label schema",
                                    path.display()
                                )));
                            }
                            ckpt.parameters
                        }
                        None => {
                            let runs = pretrain_runs(
                                &splits.train,
                                &splits.dev,
                                &splits.schema,
                                splits.dims(),
                                &config,
                            )?;
                            select_pretrained_for(
                                &runs,
                                &domain,
                                &splits.train,
                                &splits.dev,
                                &splits.schema,
                            )?
                            .best_params
                            .clone()
                        }
                    };
                    let state = finetune(
                        &domain,
                        &splits.train,
                        &splits.dev,
                        &splits.schema,
                        &start,
                        &config,
                    )?;
                    (state.best_params, state.log, Some(domain))
                }
                None => {
                    let runs = pretrain_runs(
                        &splits.train,
                        &splits.dev,
                        &splits.schema,
                        splits.dims(),
                        &config,
                    )?;
                    let dev: Vec<f64> = runs.iter().map(|r| r.best_dev).collect();
                    let best = select_best(&dev).ok_or(Error::Empty("pre-training runs"))?;
                    let run = runs.into_iter().nth(best).expect("index from select_best");
                    (run.best_params, run.log, None)
                }
            };
            if let Some(path) = log {
                write_log(path, &records)?;
            }
            let method = domain.as_ref().and(config.ranking_method);
            Checkpoint::new(splits.schema, params, config.seed, domain, method).save(&out)
        }
        Command::Evaluate {
            ckpt,
            data,
            method,
            domain,
        } => {
            let checkpoint = Checkpoint::load(&ckpt)?;
            let splits = DataSplits::load(&data)?;
            if checkpoint.schema != splits.schema {
                return Err(Error::Invalid(format!(
                    "{} was trained on a different label schema",
                    ckpt.display()
                )));
            }
            let domain = domain.or(checkpoint.domain.clone());
            if let Some(d) = &domain {
                splits.schema.domain_index(d)?;
            }
            let test: Vec<_> = splits
                .test
                .iter()
                .filter(|r| domain.as_ref().is_none_or(|d| &r.claim.domain == d))
                .collect();
            let evaluation = evaluate(&checkpoint.parameters, &splits.schema, &test, method)?;
            print_json(&EvaluationReport {
                checkpoint: &ckpt,
                domain: domain.as_deref(),
                method,
                evaluation,
            })
        }
        Command::Experiment {
            config,
            data,
            report,
        } => {
            let as_json = match report.extension().and_then(|e| e.to_str()) {
                Some("md") => false,
                Some("json") => true,
                _ => {
                    return Err(Error::Config(format!(
                        "report path {} must end in .json or .md",
                        report.display()
                    )))
                }
            };
            let config: ExperimentConfig = read_json(&config)?;
            let splits = DataSplits::load(&data)?;
            let table = run_experiment(&splits, &config)?;
            let markdown = table.to_markdown();
            if as_json {
                write_text(&report, &table.to_json()?)?;
            } else {
                write_text(&report, &markdown)?;
            }
            print!("{markdown}");
            Ok(())
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        e if e.is_numerical() => EXIT_NUMERICAL,
        Error::Config(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
