//! The `mfrs` command line. Every command is a thin wrapper over engine,
//! store or evaluation calls; JSON goes to stdout, diagnostics to stderr.

mod commands;

use std::collections::HashMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mfrs_core::engine::EngineError;
use mfrs_core::eval::EvalError;
use mfrs_core::store::StoreError;
use mfrs_core::vision::VisionError;
use mfrs_service::{ConfigError, ServeError};

/// Exit statuses. Scripts depend on these values.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    /// Not found, validation, failed framing check.
    pub const DOMAIN: u8 = 1;
    pub const USAGE: u8 = 2;
    /// I/O, decode or corrupt-data errors.
    pub const IO: u8 = 3;
}

/// Environment variables the command line reads, besides those of the
/// service configuration.
pub const MFRS_NOW: &str = "MFRS_NOW";

/// `MFRS_*` variables of the current process.
pub fn process_env() -> HashMap<String, String> {
    std::env::vars().filter(|(k, _)| k.starts_with("MFRS_")).collect()
}

#[derive(Debug, Parser)]
#[command(name = "mfrs", version, about = "Face recognition memory aid: enrollment, recognition and voice memos")]
pub struct Cli {
    /// Data directory (default: MFRS_DATA_DIR, then the config file, then ./mfrs-data).
    #[arg(long, global = true, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    /// TOML configuration shared with `serve`.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service until interrupted.
    Serve {
        /// Listen address, overriding the configuration.
        #[arg(long)]
        bind: Option<String>,
    },
    /// Enroll a new person from a photo, or add a photo to an existing person.
    Enroll(EnrollArgs),
    /// Detect and identify faces in a photo.
    Recognize {
        #[arg(long, value_name = "PATH")]
        image: PathBuf,
        /// Print the full outcome as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Voice memo management.
    #[command(subcommand)]
    Memo(MemoCommand),
    /// Person records.
    #[command(subcommand)]
    Person(PersonCommand),
    /// Write a snapshot of the whole store.
    Export {
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Replace the store content with a snapshot.
    Import {
        #[arg(long = "in", value_name = "PATH")]
        input: PathBuf,
    },
    /// Evaluation harnesses.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Store benchmarks.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Debug, Args)]
pub struct EnrollArgs {
    #[arg(long, required_unless_present = "person", conflicts_with = "person")]
    pub name: Option<String>,
    /// Add the photo to this existing person instead of creating one.
    #[arg(long, value_name = "ID")]
    pub person: Option<u64>,
    #[arg(long, conflicts_with = "person", default_value = "")]
    pub relationship: String,
    #[arg(long, conflicts_with = "person", default_value = "")]
    pub notes: String,
    #[arg(long, value_name = "PATH")]
    pub image: PathBuf,
    /// Accept a photo whose only framing failures are size, centring or sharpness.
    #[arg(long)]
    pub override_framing: bool,
}

#[derive(Debug, Subcommand)]
pub enum MemoCommand {
    /// Store a 16 kHz mono 16-bit WAV memo.
    Add {
        #[arg(long, value_name = "WAV")]
        file: PathBuf,
        /// Link to this person; otherwise the association window applies.
        #[arg(long, value_name = "ID")]
        person: Option<u64>,
        #[arg(long, default_value = "")]
        label: String,
    },
    /// List memo metadata.
    List {
        #[arg(long, value_name = "ID", conflicts_with = "unlinked")]
        person: Option<u64>,
        #[arg(long)]
        unlinked: bool,
    },
    /// Write a memo's audio as WAV.
    Play {
        #[arg(long, value_name = "ID")]
        id: u64,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Link a memo to a person.
    Link {
        #[arg(long, value_name = "ID")]
        id: u64,
        #[arg(long, value_name = "ID")]
        person: u64,
    },
    /// Delete a memo and its audio.
    Delete {
        #[arg(long, value_name = "ID")]
        id: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum PersonCommand {
    /// List all persons.
    List,
    /// Show a person's profile and memos.
    Show {
        #[arg(long, value_name = "ID")]
        id: u64,
    },
    /// Create a person without a photo.
    Add {
        #[arg(long)]
        name: String,
        #[arg(long, default_value = "")]
        relationship: String,
        #[arg(long, default_value = "")]
        notes: String,
    },
    /// Change fields of a person.
    Update {
        #[arg(long, value_name = "ID")]
        id: u64,
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        relationship: Option<String>,
        #[arg(long)]
        notes: Option<String>,
    },
    /// Delete a person with their encodings, photos and memos.
    Delete {
        #[arg(long, value_name = "ID")]
        id: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Score a same/different pair list and print the verification report.
    Pairs {
        #[arg(long, value_name = "FILE")]
        pairs: PathBuf,
        #[arg(long, value_name = "DIR")]
        images: PathBuf,
        /// Also write the ROC curve as CSV.
        #[arg(long, value_name = "PATH")]
        roc: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    Memory,
    Disk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DurabilityArg {
    Fsync,
    Buffered,
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Insert, fetch and update N persons in a scratch store.
    Db {
        #[arg(long, value_name = "N")]
        n: usize,
        #[arg(long, value_enum, default_value_t = Backend::Disk)]
        backend: Backend,
        #[arg(long, value_enum, default_value_t = DurabilityArg::Fsync)]
        durability: DurabilityArg,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Include every latency sample in the report.
        #[arg(long)]
        samples: bool,
    },
}

/// A failed command: its exit status and message.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: exit::USAGE,
            message: message.into(),
        }
    }

    pub fn io(message: impl std::fmt::Display) -> Self {
        Self {
            code: exit::IO,
            message: message.to_string(),
        }
    }

    pub fn domain(message: impl std::fmt::Display) -> Self {
        Self {
            code: exit::DOMAIN,
            message: message.to_string(),
        }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound { .. } | StoreError::Validation(_) => Self::domain(e),
            _ => Self::io(e),
        }
    }
}

impl From<VisionError> for Failure {
    fn from(e: VisionError) -> Self {
        match e {
            VisionError::InvalidImage(_) | VisionError::InvalidRegion(_) => Self::io(e),
            VisionError::InvalidConfig(_) => Self::usage(e.to_string()),
            _ => Self::domain(e),
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Decode(_) | EngineError::Audio(_) => Self::io(e),
            EngineError::Framing(_) => Self::domain(e),
            EngineError::Store(e) => e.into(),
            EngineError::Vision(e) => e.into(),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::InvalidParams(_) => Self::usage(e.to_string()),
            EvalError::Parse { .. } | EvalError::MissingImage(_) | EvalError::Decode { .. } => Self::io(e),
            EvalError::NoUsablePairs => Self::domain(e),
            EvalError::Vision(e) => e.into(),
            EvalError::Store(e) => e.into(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<ServeError> for Failure {
    fn from(e: ServeError) -> Self {
        match e {
            ServeError::Config(e) => e.into(),
            ServeError::Engine(e) => e.into(),
            ServeError::Bind { .. } | ServeError::Io(_) => Self::io(e),
        }
    }
}

/// Parse `args` (program name first) and run the command. `env` holds the
/// `MFRS_*` variables to honour.
pub fn run<I, T>(args: I, env: &HashMap<String, String>, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                exit::USAGE
            } else {
                let _ = write!(out, "{text}");
                exit::SUCCESS
            };
        }
    };
    match commands::dispatch(cli, env, out) {
        Ok(()) => exit::SUCCESS,
        Err(f) => {
            let _ = writeln!(err, "mfrs: {}", f.message);
            f.code
        }
    }
}
