//! `parcelfit` command-line tool.
//!
//! Exit codes: 0 success, 1 input/output problems, 2 bad configuration,
//! 3 algorithm failures.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use parcelfit::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn io(message: String) -> Self {
        Self { code: 1, message }
    }

    fn config(message: String) -> Self {
        Self { code: 2, message }
    }

    /// A library error raised while reading the file at `path`.
    pub fn input(path: &Path, e: Error) -> Self {
        let f = Failure::from(e);
        Self { message: format!("{}: {}", path.display(), f.message), ..f }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) | Error::Parse(_) | Error::UnsupportedGeometry { .. } | Error::DuplicateId(_) => 1,
            Error::Config(_) => 2,
            _ => 3,
        };
        Self { code, message: e.to_string() }
    }
}

#[derive(Parser)]
#[command(name = "parcelfit", version, about = "Align cadastral survey maps with observed farm plots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options every subcommand takes. Trailing `--key value` pairs override config keys.
#[derive(clap::Args)]
struct Common {
    /// JSON config file; keys not given keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Config overrides as `--key value` or `--key=value`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured stages and write m1.geojson, m2.geojson and report.json.
    Matchfit {
        survey: PathBuf,
        farms: PathBuf,
        #[arg(long, short, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Snap plot corners to the farm partition graph.
    Facefit {
        survey: PathBuf,
        farms: PathBuf,
        #[arg(long, short, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Compare predicted instances with ground truth; prints JSON unless --out is given.
    Segeval {
        gt: PathBuf,
        pred: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Clean, de-duplicate, label and shard detected fields.
    Pipeline {
        detections: PathBuf,
        #[arg(long, short, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic village: survey, farms, truth and its config.
    GenFixture {
        #[arg(long, short, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn load<T: serde::Serialize + serde::de::DeserializeOwned + Default>(c: &Common) -> Result<T, Failure> {
    config::layered(c.config.as_deref(), &c.overrides).map_err(Failure::config)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Matchfit { survey, farms, out, common } => commands::matchfit(&survey, &farms, &load(&common)?, &out),
        Command::Facefit { survey, farms, out, common } => commands::facefit(&survey, &farms, &load(&common)?, &out),
        Command::Segeval { gt, pred, out, common } => commands::segeval(&gt, &pred, &load(&common)?, out.as_deref()),
        Command::Pipeline { detections, out, common } => commands::pipeline(&detections, &load(&common)?, &out),
        Command::GenFixture { out, common } => commands::gen_fixture(&load(&common)?, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
