//! `fitmap`: build snapshots, serve them, run the district regression and
//! convert district identifiers.
//!
//! Exit codes: 0 success, 2 unreadable or invalid input, 3 nothing to
//! ingest, 4 port busy, 5 regression could not be fitted, 64 usage error.

mod convert;
mod ingest;
mod regress;

use std::net::IpAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fitmap_core::geo::ClusterOptions;
use fitmap_core::model::{Assessment, Grade};
use fitmap_server::{ServerConfig, StartupError, DEFAULT_PORT};

#[derive(Debug, Parser)]
#[command(name = "fitmap", version, about = "School fitness-testing map data tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse research files, sites and boundaries into a snapshot directory.
    Ingest(IngestArgs),
    /// Serve a snapshot over HTTP.
    Serve(ServeArgs),
    /// Regress district HFZ percentages on a covariate file.
    Regress(RegressArgs),
    /// Rewrite a LEAID column as CDS codes, or the reverse.
    ConvertCodes(ConvertArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Records files; a glob pattern, may be repeated.
    #[arg(long, required = true)]
    pub records: Vec<String>,
    /// Column mapping for files without a `<stem>.mapping` sidecar.
    /// Defaults to the canonical long layout.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    #[arg(long)]
    pub boundaries: PathBuf,
    #[arg(long)]
    pub sites: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Boundary feature property holding the district code.
    #[arg(long, default_value = "CDSCode")]
    pub code_property: String,
    /// Write every ingest issue to this CSV.
    #[arg(long)]
    pub issues_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PORT)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    /// Directory for uploaded layers; in memory when omitted.
    #[arg(long)]
    uploads: Option<PathBuf>,
    /// LEAID to CDS table (columns leaid, cdscode).
    #[arg(long)]
    crosswalk: Option<PathBuf>,
    #[arg(long)]
    static_dir: Option<PathBuf>,
    /// Allowed cross-origin origin; may be repeated.
    #[arg(long = "cors-origin")]
    cors_origins: Vec<String>,
    #[arg(long, default_value_t = 40.0)]
    cluster_radius: f64,
    #[arg(long, default_value_t = 512.0)]
    tile_extent: f64,
    #[arg(long, default_value_t = 16)]
    max_zoom: u8,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Dep {
    AerobicCapacity,
    BodyComposition,
    UpperBodyStrength,
    AbdominalStrength,
    Flexibility,
    TrunkLift,
}

impl From<Dep> for Assessment {
    fn from(d: Dep) -> Self {
        match d {
            Dep::AerobicCapacity => Assessment::AerobicCapacity,
            Dep::BodyComposition => Assessment::BodyComposition,
            Dep::UpperBodyStrength => Assessment::UpperBodyStrength,
            Dep::AbdominalStrength => Assessment::AbdominalStrength,
            Dep::Flexibility => Assessment::Flexibility,
            Dep::TrunkLift => Assessment::TrunkLift,
        }
    }
}

fn parse_grade(s: &str) -> Result<Grade, String> {
    s.parse::<u8>().ok().and_then(|g| Grade::try_from(g).ok()).ok_or_else(|| "grade must be 5, 7 or 9".into())
}

#[derive(Debug, Args)]
pub struct RegressArgs {
    #[arg(long)]
    pub snapshot: PathBuf,
    #[arg(long)]
    pub covariates: PathBuf,
    #[arg(long, value_enum)]
    pub dep: Dep,
    #[arg(long)]
    pub year: u16,
    #[arg(long, value_parser = parse_grade)]
    pub grade: Grade,
    /// Output prefix: writes <prefix>.csv, <prefix>.txt, <prefix>-residuals.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// LEAID to CDS table for covariate files keyed by leaid.
    #[arg(long)]
    pub crosswalk: Option<PathBuf>,
    /// Predictor column, optionally `column=label`; replaces the default five.
    #[arg(long = "predictor")]
    pub predictors: Vec<String>,
    /// Divide a predictor column on read, `column=divisor`.
    #[arg(long = "divide")]
    pub divide: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CodeColumn {
    Leaid,
    Cdscode,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Conversion table with columns leaid, cdscode.
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub from: CodeColumn,
    #[arg(long, value_enum)]
    pub to: CodeColumn,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// A failed command: message for stderr and the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Failure::new(2, message)
    }
}

fn serve(args: ServeArgs) -> Result<(), Failure> {
    let cfg = ServerConfig {
        snapshot: args.snapshot,
        host: args.host,
        port: args.port,
        uploads: args.uploads,
        crosswalk: args.crosswalk,
        static_dir: args.static_dir,
        cors_origins: args.cors_origins,
        cluster: ClusterOptions {
            radius_px: args.cluster_radius,
            extent_px: args.tile_extent,
            max_zoom: args.max_zoom,
        },
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::new(1, e.to_string()))?;
    rt.block_on(fitmap_server::run(cfg)).map_err(|e| {
        let code = match e {
            StartupError::PortBusy(_) => 4,
            StartupError::Io(_) => 1,
            _ => 2,
        };
        Failure::new(code, e.to_string())
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(64) } else { ExitCode::SUCCESS };
        }
    };
    tracing_subscriber::fmt().with_writer(std::io::stderr).with_target(false).init();
    let result = match cli.command {
        Command::Ingest(a) => ingest::run(a),
        Command::Serve(a) => serve(a),
        Command::Regress(a) => regress::run(a),
        Command::ConvertCodes(a) => convert::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("fitmap: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
