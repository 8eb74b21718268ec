//! `faithkit`: corpus preparation, assignment, alignment, analysis and the
//! annotation server.

mod analyze;
mod commands;
mod io;

use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use faithkit_core::{HintMode, Mode};

#[derive(Parser)]
#[command(name = "faithkit", version, about = "Fine-grained human evaluation of summary faithfulness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate documents and summaries and write canonical JSONL.
    Ingest(commands::Ingest),
    /// Split summaries into fine units (JSONL).
    Segment(commands::Segment),
    /// Draw per-slot assignments (JSONL).
    Assign(commands::Assign),
    /// Build the summary x slot score matrix (CSV) from judgments.
    Matrix(commands::MatrixCmd),
    /// Rank source sentences for units, select hints, evaluate recall@k.
    #[command(subcommand)]
    Align(commands::Align),
    /// Lexical metrics keyed by summary.
    #[command(subcommand)]
    Metrics(commands::Metrics),
    /// Statistics over judgments and score matrices.
    #[command(subcommand)]
    Analyze(analyze::Analyze),
    /// Annotation projects for the server.
    #[command(subcommand)]
    Project(commands::ProjectCmd),
    /// Run the annotation server.
    Serve {
        #[arg(long, env = "FAITHKIT_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "FAITHKIT_HOST", default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long, env = "FAITHKIT_DATA_DIR", default_value = "faithkit-data")]
        data_dir: PathBuf,
        /// Directory with the web UI bundle, served at `/`.
        #[arg(long, env = "FAITHKIT_STATIC_DIR")]
        static_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Fine,
    Coarse,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Fine => Mode::Fine,
            ModeArg::Coarse => Mode::Coarse,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum HintModeArg {
    None,
    Algorithmic,
    Gold,
}

impl From<HintModeArg> for HintMode {
    fn from(h: HintModeArg) -> Self {
        match h {
            HintModeArg::None => HintMode::None,
            HintModeArg::Algorithmic => HintMode::Algorithmic,
            HintModeArg::Gold => HintMode::Gold,
        }
    }
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Err(e) if is_broken_pipe(&e) => Ok(()),
        other => other,
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<std::io::Error>()
            .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(c) => c.run(),
        Command::Segment(c) => c.run(),
        Command::Assign(c) => c.run(),
        Command::Matrix(c) => c.run(),
        Command::Align(c) => c.run(),
        Command::Metrics(c) => c.run(),
        Command::Analyze(c) => analyze::run(c),
        Command::Project(c) => c.run(),
        Command::Serve {
            port,
            host,
            data_dir,
            static_dir,
        } => {
            let config = faithkit_service::ServeConfig {
                addr: SocketAddr::new(host, port),
                data_dir,
                static_dir,
            };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(faithkit_service::serve(config, |addr| {
                use std::io::Write;
                let mut out = std::io::stdout().lock();
                let _ = writeln!(out, "listening on http://{addr}");
                let _ = out.flush();
            }))?;
            Ok(())
        }
    }
}
