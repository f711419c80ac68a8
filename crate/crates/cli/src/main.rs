//! `tsd`: prepare data, build embeddings, train, predict, evaluate and run
//! the ablation grid.

mod ablate;
mod data;
mod embed;
mod manifest;
mod prepare;
mod run;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use settings::SettingsFile;

#[derive(Debug, Parser)]
#[command(name = "tsd", version, about = "Toxic spans detection pipeline")]
struct Cli {
    /// TOML settings file; command-line flags take precedence over it.
    #[arg(long, global = true, env = "TSD_SETTINGS")]
    settings: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tokenize dataset CSVs and build the vocabulary.
    Prepare(prepare::PrepareArgs),
    /// Build an embedding matrix for a prepared vocabulary.
    Embed(embed::EmbedArgs),
    /// Train a tagger into a run directory.
    Train(run::TrainArgs),
    /// Tag posts with a trained run and write offset predictions.
    Predict(run::PredictArgs),
    /// Score a prediction file against gold spans.
    Evaluate(run::EvaluateArgs),
    /// Train every model variant on every embedding configuration.
    Ablate(ablate::AblateArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Prepare(_) => "prepare",
            Command::Embed(_) => "embed",
            Command::Train(_) => "train",
            Command::Predict(_) => "predict",
            Command::Evaluate(_) => "evaluate",
            Command::Ablate(_) => "ablate",
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let stage = cli.command.name();
    let result = SettingsFile::load(cli.settings.as_deref()).and_then(|settings| match &cli.command {
        Command::Prepare(a) => prepare::run(a).map(|_| true),
        Command::Embed(a) => embed::run(a, &settings).map(|_| true),
        Command::Train(a) => run::run_train(a, &settings).map(|_| true),
        Command::Predict(a) => run::run_predict(a).map(|_| true),
        Command::Evaluate(a) => run::run_evaluate(a).map(|_| true),
        Command::Ablate(a) => ablate::run(a, &settings),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error [{stage}]: {e:#}");
            ExitCode::FAILURE
        }
    }
}
