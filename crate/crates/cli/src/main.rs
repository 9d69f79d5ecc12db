mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::CliError;
use crate::config::RunConfig;

/// Political-actor graph embeddings: build, train, analyse and predict votes.
#[derive(Debug, Parser)]
#[command(
    name = "actorgraph",
    version,
    after_help = "Every run writes <out>/resolved.cfg listing each config key with its resolved value; \
                  any of those keys may appear in --config files or --set overrides."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run seed; overrides `seed` from the config file [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Config file of `key = value` lines (`#` starts a comment)
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Output directory, created if missing [default: out]
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Input directory holding nodes.csv, edges.csv, features.csv,
    /// scores.csv, votes.csv and bills.csv
    #[arg(long, global = true, value_name = "DIR")]
    data: Option<PathBuf>,

    /// Encoder checkpoint directory (as written by `train` under <out>/model)
    #[arg(long, global = true, value_name = "DIR")]
    model: Option<PathBuf>,

    /// Vote classifier file (as written by `vote-train`)
    #[arg(long, global = true, value_name = "FILE")]
    vote_model: Option<PathBuf>,

    /// Override one config key; repeatable, applied after the config file
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Log progress to stderr
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load a graph and check every edge against the relation schema
    ValidateGraph,
    /// Write a planted-partition graph, scores, votes and bill features
    Synth,
    /// Train the encoder; writes the model, history and metrics
    Train,
    /// Evaluate a trained encoder on the train, validation and test splits
    Eval,
    /// Export final-layer node representations
    Embed,
    /// Export per-actor stance distributions and governor labels
    Stance,
    /// Two-component PCA of actor representations, with DBI scores
    Project,
    /// Retrain with a growing fraction of each relation's edges removed
    AblateRelations,
    /// Retrain under the four loss combinations
    AblateLosses,
    /// Train the roll-call vote classifier on top of representations
    VoteTrain,
    /// Evaluate a vote classifier and export test-set predictions
    VoteEval,
    /// Finite-difference check of the full loss gradient on a random graph
    Gradcheck,
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        cfg.apply_text(&text, &path.display().to_string())
            .map_err(CliError::config)?;
    }
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim()).map_err(CliError::config)?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(d) = &cli.data {
        cfg.data = Some(d.clone());
    }
    if let Some(m) = &cli.model {
        cfg.model = Some(m.clone());
    }
    if let Some(m) = &cli.vote_model {
        cfg.vote_model = Some(m.clone());
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve(cli)?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    let resolved = cfg.out.join("resolved.cfg");
    std::fs::write(&resolved, cfg.render()).map_err(|e| CliError::io(&resolved, e))?;
    match cli.command {
        Command::ValidateGraph => commands::validate_graph(&cfg),
        Command::Synth => commands::synth(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Eval => commands::eval(&cfg),
        Command::Embed => commands::embed(&cfg),
        Command::Stance => commands::stance(&cfg),
        Command::Project => commands::project(&cfg),
        Command::AblateRelations => commands::ablate_relations(&cfg),
        Command::AblateLosses => commands::ablate_losses(&cfg),
        Command::VoteTrain => commands::vote_train(&cfg),
        Command::VoteEval => commands::vote_eval(&cfg),
        Command::Gradcheck => commands::gradcheck(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ");
            eprintln!("error: cli: {first}");
            return ExitCode::FAILURE;
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}
