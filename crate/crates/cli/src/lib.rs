//! Command-line driver for the framing pipeline.

pub mod config;
pub mod stages;
pub mod workspace;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::{Overrides, Run, SCORER_URL_ENV};
use workspace::DirLock;

#[derive(Debug, Parser)]
#[command(name = "framing", version, about = "Measure media framing with masked language models")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "run.toml")]
    pub config: PathBuf,
    /// Restrict to one configured topic.
    #[arg(long, global = true)]
    pub topic: Option<String>,
    /// Restrict to one prompt or baseline method.
    #[arg(long, global = true)]
    pub method: Option<String>,
    /// Restrict to one normalization mode: none, general or domain.
    #[arg(long, global = true)]
    pub normalization: Option<String>,
    /// Scorer backend, `stub=<path>` or `http=<url>`.
    #[arg(long, global = true)]
    pub backend: Option<String>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, env = SCORER_URL_ENV, hide = true)]
    pub scorer_url: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Split the corpus into instances and a train/dev partition.
    Ingest,
    /// Generate or load masked prompts.
    Prompts,
    /// Score prompts and build framing matrices.
    Represent,
    /// Pairwise source distances and similarity rankings.
    Measure,
    /// Rank agreement with each ground truth.
    Eval,
    /// TF-IDF, LDA and language-model embedding baselines.
    Baseline,
    /// Complete-linkage clustering of sources.
    Cluster,
    /// Summary CSV tables.
    Report,
    /// Every stage in order.
    All,
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            topic: self.topic.clone(),
            method: self.method.clone(),
            normalization: self.normalization.clone(),
            backend: self.backend.clone(),
            out: self.out.clone(),
            scorer_url: self.scorer_url.clone(),
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let run = Run::load(&cli.config, &cli.overrides())?;
    let _lock = DirLock::acquire(&run.out_dir)?;
    match cli.command {
        Command::Ingest => stages::ingest(&run),
        Command::Prompts => stages::prompts(&run),
        Command::Represent => stages::represent(&run),
        Command::Measure => stages::measure(&run),
        Command::Eval => stages::eval(&run),
        Command::Baseline => stages::baseline(&run),
        Command::Cluster => stages::cluster(&run),
        Command::Report => stages::report(&run),
        Command::All => stages::all(&run),
    }
}
