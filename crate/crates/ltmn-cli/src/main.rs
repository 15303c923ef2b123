//! Command-line front end for the lyrics-to-melody pipeline.
//!
//! Exit codes: 0 on success, 1 for usage and configuration mistakes, 2 for
//! bad data (unreadable corpus, invalid values, corrupt files), 3 when a
//! pipeline artifact that an earlier command should have produced is missing.

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "ltmn", version, about = "Lyrics-conditioned melody generation")]
struct Cli {
    /// Config file with one key=value per line.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override a config key, e.g. --set hidden=64. Repeatable; wins over the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,

    /// Directory that holds run directories. Defaults to $LTMN_RUN_DIR, then ./runs.
    #[arg(long, global = true, value_name = "DIR")]
    run_root: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse the corpus and print song, vocabulary, and attribute statistics.
    Parse,
    /// Train syllable and word skip-gram embeddings.
    TrainEmb,
    /// Train the lyrics language model for the configured scheme.
    TrainLm,
    /// Train the melody generator for the configured scheme.
    TrainLtmn,
    /// Generate lyrics from seed words, then a melody, a score, and a MIDI file.
    Compose {
        /// Seed words, e.g. "listen to". May be empty to generate freely.
        #[arg(default_value = "")]
        seed_lyrics: String,
    },
    /// Score every trained scheme against a test corpus and a random baseline.
    Eval {
        /// Corpus to evaluate on; defaults to the configured training corpus.
        #[arg(long, value_name = "FILE")]
        testset: Option<PathBuf>,
    },
    /// Sample baseline lyrics and melodies from the corpus statistics.
    Baseline,
}

/// Error carrying its process exit code.
pub enum CliError {
    Usage(String),
    Data(ltmn::Error),
    /// A required artifact file does not exist yet.
    Missing(PathBuf),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Missing(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Data(e) => write!(f, "{e}"),
            CliError::Missing(path) => write!(
                f,
                "missing artifact {}: run the earlier pipeline stage first",
                path.display()
            ),
        }
    }
}

impl From<ltmn::Error> for CliError {
    fn from(e: ltmn::Error) -> Self {
        CliError::Data(e)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.load_file(path).map_err(CliError::Usage)?;
    }
    cfg.apply_sets(&cli.sets).map_err(CliError::Usage)?;
    cfg.validate().map_err(CliError::Usage)?;

    let run_root = cli
        .run_root
        .or_else(|| std::env::var_os("LTMN_RUN_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"));

    match cli.cmd {
        Cmd::Parse => commands::parse(&cfg),
        Cmd::TrainEmb => commands::train_emb(&cfg, &run_root),
        Cmd::TrainLm => commands::train_lm(&cfg, &run_root),
        Cmd::TrainLtmn => commands::train_ltmn(&cfg, &run_root),
        Cmd::Compose { seed_lyrics } => commands::compose(&cfg, &run_root, &seed_lyrics),
        Cmd::Eval { testset } => commands::eval(&cfg, &run_root, testset.as_deref()),
        Cmd::Baseline => commands::baseline(&cfg, &run_root),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
