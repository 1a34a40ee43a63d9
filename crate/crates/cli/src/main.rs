mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use drfix_core::fixgen::ScopeOrder;

use config::{Config, EmbedderChoice, FileConfig, Overrides};

/// Repairs Go data races reported by the race detector.
#[derive(Debug, Parser)]
#[command(name = "drfix", version)]
struct Cli {
    /// TOML file with defaults for any setting below.
    #[arg(long, global = true, env = "DRFIX_CONFIG")]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Example store (JSON). A missing file is an empty store.
    #[arg(long, global = true, env = "DRFIX_DB")]
    db: Option<PathBuf>,
    #[arg(long, global = true, value_enum, env = "DRFIX_EMBEDDER")]
    embedder: Option<EmbedderChoice>,
    #[arg(long, global = true, env = "DRFIX_EMBEDDER_ENDPOINT")]
    embedder_endpoint: Option<String>,
    /// Embedding dimension.
    #[arg(long, global = true, env = "DRFIX_DIM")]
    dim: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Adds a (buggy, fixed) pair to the example store and prints its id.
    Ingest {
        #[arg(long)]
        buggy: PathBuf,
        #[arg(long)]
        fixed: PathBuf,
        #[arg(long, default_value = "uncategorized")]
        category: String,
        /// Racy lines of the buggy code (1-based). Derived from the diff if absent.
        #[arg(long, value_delimiter = ',')]
        lines: Option<Vec<usize>>,
    },
    /// Prints the skeleton of a Go file for the given racy lines.
    Skeletonize {
        file: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        lines: Vec<usize>,
        /// Extra variables of interest.
        #[arg(long, value_delimiter = ',')]
        vars: Vec<String>,
    },
    /// Attempts a validated fix for one race report.
    Fix(FixArgs),
    /// Prints entry count, dimension, embedder and categories of the store.
    DbStats,
    /// Prints the resolved configuration.
    ShowConfig(FixArgs),
}

#[derive(Debug, Args)]
struct FixArgs {
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, env = "DRFIX_REPO")]
    repo: Option<PathBuf>,
    #[arg(long, env = "DRFIX_MODEL_ENDPOINT")]
    model_endpoint: Option<String>,
    /// Name of the environment variable that holds the model credential.
    #[arg(long, env = "DRFIX_MODEL_CREDENTIAL_ENV")]
    model_credential_env: Option<String>,
    /// Scripted model responses (JSON) instead of a model endpoint.
    #[arg(long)]
    mock_responses: Option<PathBuf>,
    /// Scripted executor rounds (JSON) instead of the go toolchain.
    #[arg(long)]
    simulated_executor: Option<PathBuf>,
    #[arg(long, env = "DRFIX_REPETITIONS")]
    repetitions: Option<usize>,
    #[arg(long, env = "DRFIX_WORKERS")]
    workers: Option<usize>,
    #[arg(long, env = "DRFIX_NO_RAG")]
    no_rag: bool,
    #[arg(long, env = "DRFIX_NO_SKELETON")]
    no_skeleton: bool,
    #[arg(long, env = "DRFIX_NO_LCA")]
    no_lca: bool,
    #[arg(long, env = "DRFIX_SCOPE_ORDER")]
    scope_order: Option<ScopeOrder>,
    /// Retrieved examples per location.
    #[arg(long, env = "DRFIX_K")]
    k: Option<usize>,
    /// Feedback rungs after the first file-scope attempt.
    #[arg(long, env = "DRFIX_FEEDBACK_RETRIES")]
    feedback_retries: Option<usize>,
    #[arg(long, default_value = "drfix.diff")]
    out_diff: PathBuf,
    #[arg(long, default_value = "drfix-audit.jsonl")]
    audit_log: PathBuf,
}

fn overrides(common: &CommonArgs, fix: Option<&FixArgs>) -> Overrides {
    let mut o = Overrides {
        db: common.db.clone(),
        embedder: common.embedder,
        embedder_endpoint: common.embedder_endpoint.clone(),
        dim: common.dim,
        ..Overrides::default()
    };
    if let Some(f) = fix {
        o.repo = f.repo.clone();
        o.model_endpoint = f.model_endpoint.clone();
        o.model_credential_env = f.model_credential_env.clone();
        o.repetitions = f.repetitions;
        o.workers = f.workers;
        o.no_rag = f.no_rag;
        o.no_skeleton = f.no_skeleton;
        o.no_lca = f.no_lca;
        o.scope_order = f.scope_order;
        o.k = f.k;
        o.feedback_retries = f.feedback_retries;
    }
    o
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let fix_args = match &cli.command {
        Command::Fix(a) | Command::ShowConfig(a) => Some(a),
        _ => None,
    };
    let config = Config::resolve(overrides(&cli.common, fix_args), file)?;
    match cli.command {
        Command::Ingest {
            buggy,
            fixed,
            category,
            lines,
        } => commands::ingest(&config, &buggy, &fixed, &category, lines),
        Command::Skeletonize { file, lines, vars } => commands::skeletonize(&file, &lines, &vars),
        Command::Fix(a) => commands::fix(&config, &a),
        Command::DbStats => commands::db_stats(&config),
        Command::ShowConfig(_) => {
            print!("{}", toml::to_string(&config)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::EXIT_ENV)
        }
    }
}
