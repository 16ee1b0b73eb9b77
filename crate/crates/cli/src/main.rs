mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process;

use clap::{Args, Parser, Subcommand};

use error::{CliError, ExitCode};
use output::Format;

/// Deduplicated archive of source code with intrinsic identifiers.
#[derive(Debug, Parser)]
#[command(name = "codevault", version)]
pub struct Cli {
    /// Archive store directory.
    #[arg(long, global = true, env = "CODEVAULT_STORE")]
    store: Option<PathBuf>,

    /// Output format for tabular results.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// TOML file with defaults; flags take precedence.
    #[arg(long, global = true, env = "CODEVAULT_CONFIG")]
    config: Option<PathBuf>,

    /// More logging; repeat for debug output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Errors only.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,

    #[command(flatten)]
    remote: RemoteArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Default)]
pub struct RemoteArgs {
    /// Web API root of the public archive.
    #[arg(long, global = true)]
    api: Option<String>,
    /// Root of the public content bucket.
    #[arg(long, global = true)]
    bucket: Option<String>,
    /// Directory for cached HTTP responses.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Request budget per minute.
    #[arg(long, global = true)]
    rate: Option<u32>,
    /// API token.
    #[arg(long, global = true, env = "CODEVAULT_TOKEN", hide_env_values = true)]
    token: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the identifier of files or directories without storing them.
    Identify {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Add a directory tree or a git fast-export stream to the store.
    #[command(subcommand)]
    Ingest(IngestCommand),
    /// List a directory or snapshot.
    Ls {
        swhid: String,
        /// Ask the public archive instead of the local store.
        #[arg(long)]
        remote: bool,
    },
    /// Write the bytes of a content to stdout.
    Cat {
        swhid: String,
        #[arg(long)]
        remote: bool,
    },
    /// Origins and revisions where an object occurs.
    Provenance { swhid: String },
    /// Group origins into forks.
    Forks {
        /// File of declared `url url` fork pairs.
        #[arg(long)]
        sidecar: Option<PathBuf>,
    },
    /// Archive statistics.
    #[command(subcommand)]
    Stats(StatsCommand),
    /// Write the graph as CSV tables.
    Export {
        out: PathBuf,
        /// Value recorded in the manifest; defaults to the current time.
        #[arg(long)]
        exported_at: Option<String>,
    },
    /// Load exported tables into the store (graph only, no payloads).
    Import { bundle: PathBuf },
    /// Copy the closure of some origins into a new store.
    Teaser {
        out: PathBuf,
        /// Select origins whose URL starts with this prefix.
        #[arg(long, conflicts_with = "origin", required_unless_present = "origin")]
        prefix: Option<String>,
        /// Select this origin; repeatable.
        #[arg(long)]
        origin: Vec<String>,
    },
    /// Blobs stored under license-like file names.
    Licenses {
        /// Also write the records as CSV to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Download a content from the public bucket by SHA1.
    Fetch {
        sha1: String,
        /// Store the payload instead of printing it.
        #[arg(long)]
        save: bool,
        /// Write the payload to this file.
        #[arg(long, conflicts_with = "save")]
        output: Option<PathBuf>,
    },
    /// Resolve an identifier with the public archive.
    Resolve { swhid: String },
}

#[derive(Debug, Subcommand)]
pub enum IngestCommand {
    Tree {
        path: PathBuf,
        /// Record a visit of this origin.
        #[arg(long)]
        origin: Option<String>,
        /// Visit date: epoch seconds or RFC 3339; defaults to now.
        #[arg(long)]
        date: Option<String>,
    },
    FastExport {
        /// Stream file, or `-` for stdin.
        file: PathBuf,
        #[arg(long)]
        origin: String,
        #[arg(long)]
        date: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum StatsCommand {
    /// Stored objects per type.
    Counts,
    /// Original commits and blobs per month.
    Growth {
        /// Print only the fitted doubling times.
        #[arg(long)]
        summary: bool,
    },
    /// Most frequent stems of first commit-message words.
    Stems {
        #[arg(short, default_value_t = 10)]
        k: usize,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { ExitCode::Usage } else { ExitCode::Ok };
            process::exit(code as i32);
        }
    };
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (_, 0) => log::LevelFilter::Warn,
        (_, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
    let code = match run(cli) {
        Ok(()) => ExitCode::Ok,
        Err(e) => {
            eprintln!("codevault: {e}");
            e.code
        }
    };
    process::exit(code as i32);
}

fn run(cli: Cli) -> Result<(), CliError> {
    let settings = config::Settings::resolve(&cli)?;
    let result = commands::dispatch(&settings, cli.command);
    match result {
        Err(e) if e.message.contains("Broken pipe") => Ok(()),
        other => other,
    }
}
