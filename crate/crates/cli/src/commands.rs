use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use drfix_core::fixgen::{orchestrate, AuditLog, FixContext, FixError, HttpModel, MockModel, Model};
use drfix_core::report::{parse_race_report, RaceInfo};
use drfix_core::retrieval::{Embedder, HashedTrigramEmbedder, RemoteEmbedder, Store};
use drfix_core::skeleton::{skeletonize as slice, SkeletonError, SkeletonRequest};
use drfix_core::validate::{GoExecutor, SimulatedExecutor, TestExecutor};

use crate::config::{Config, EmbedderChoice};
use crate::FixArgs;

pub const EXIT_NO_FIX: u8 = 1;
pub const EXIT_ENV: u8 = 2;

fn embedder(config: &Config) -> anyhow::Result<Box<dyn Embedder<f64>>> {
    Ok(match config.embedder {
        EmbedderChoice::Deterministic => Box::new(HashedTrigramEmbedder::new(config.dim)),
        EmbedderChoice::Remote => {
            let endpoint = config.embedder_endpoint.as_deref().expect("checked by Config::resolve");
            Box::new(RemoteEmbedder::<f64>::new(endpoint, config.dim)?)
        }
    })
}

fn load_store(config: &Config, embedder: &dyn Embedder<f64>) -> anyhow::Result<Store<f64>> {
    if config.db_path.exists() {
        Ok(Store::load(&config.db_path)?)
    } else {
        log::info!("no store at {}; starting empty", config.db_path.display());
        Ok(Store::for_embedder(embedder))
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn ingest(
    config: &Config,
    buggy: &Path,
    fixed: &Path,
    category: &str,
    lines: Option<Vec<usize>>,
) -> anyhow::Result<ExitCode> {
    let buggy = read(buggy)?;
    let fixed = read(fixed)?;
    let embedder = embedder(config)?;
    let mut store = load_store(config, embedder.as_ref())?;
    let lines = lines.map(|l| l.into_iter().collect::<BTreeSet<_>>());
    let id = store
        .ingest_example(embedder.as_ref(), &buggy, &fixed, category, lines)?
        .id
        .clone();
    store.save(&config.db_path)?;
    println!("{id}");
    Ok(ExitCode::SUCCESS)
}

pub fn skeletonize(file: &Path, lines: &[usize], vars: &[String]) -> anyhow::Result<ExitCode> {
    let source = read(file)?;
    let req = SkeletonRequest::new(source)
        .with_lines(lines.iter().copied())
        .with_vars(vars.iter().cloned());
    match slice(&req) {
        Ok(sk) => {
            print!("{}", sk.text);
            Ok(ExitCode::SUCCESS)
        }
        Err(e @ SkeletonError::LineOutOfRange { .. }) => {
            eprintln!("usage error: {e}");
            Ok(ExitCode::from(EXIT_ENV))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn db_stats(config: &Config) -> anyhow::Result<ExitCode> {
    let embedder = embedder(config)?;
    let store = load_store(config, embedder.as_ref())?;
    let mut categories: BTreeMap<&str, usize> = BTreeMap::new();
    for e in store.entries() {
        *categories.entry(e.category.as_str()).or_default() += 1;
    }
    println!("entries: {}", store.len());
    println!("dim: {}", store.dim);
    println!("embedder: {}", store.embedder_id);
    for (category, n) in categories {
        println!("category {category}: {n}");
    }
    Ok(ExitCode::SUCCESS)
}

fn model(config: &Config, args: &FixArgs) -> anyhow::Result<Box<dyn Model>> {
    if let Some(path) = &args.mock_responses {
        return Ok(Box::new(MockModel::from_file(path)?));
    }
    let Some(endpoint) = &config.model_endpoint else {
        bail!("no model: pass --model-endpoint or --mock-responses");
    };
    let model = HttpModel::new(
        endpoint.clone(),
        config.model_credential_env.as_deref(),
        Duration::from_secs(300),
    )?;
    Ok(Box::new(model))
}

fn executor(config: &Config, args: &FixArgs) -> anyhow::Result<Box<dyn TestExecutor>> {
    if let Some(path) = &args.simulated_executor {
        return Ok(Box::new(SimulatedExecutor::from_file(path)?));
    }
    let go = GoExecutor {
        workers: config.workers,
        ..GoExecutor::default()
    };
    if !go.available() {
        bail!("the go toolchain is not available; pass --simulated-executor to run without it");
    }
    Ok(Box::new(go))
}

pub fn fix(config: &Config, args: &FixArgs) -> anyhow::Result<ExitCode> {
    let Some(report_path) = &args.report else {
        bail!("--report is required");
    };
    let report =
        parse_race_report(&read(report_path)?).with_context(|| format!("cannot parse {}", report_path.display()))?;
    if !config.repo_root.is_dir() {
        bail!("repository root {} is not a directory", config.repo_root.display());
    }
    let embedder = embedder(config)?;
    let store = load_store(config, embedder.as_ref())?;
    if let Err(e) = store.check_embedder(embedder.as_ref()) {
        log::warn!("{e}; retrieval disabled for this run");
    }
    let executor = executor(config, args)?;
    let mut model = model(config, args)?;
    let mut audit =
        AuditLog::create(&args.audit_log).with_context(|| format!("cannot create {}", args.audit_log.display()))?;

    let race = RaceInfo::extract(report, &config.repo_root);
    for (kind, scope, err) in &race.extraction_failures {
        log::info!("{kind}/{scope}: {err}");
    }
    let fix_config = config.fix_config();
    let ctx = FixContext {
        repo_root: &config.repo_root,
        store: &store,
        embedder: embedder.as_ref(),
        executor: executor.as_ref(),
        config: &fix_config,
    };
    let session = match orchestrate(&race, &ctx, model.as_mut(), &mut audit) {
        Ok(s) => s,
        Err(e @ FixError::NoLocation) => bail!("{e}"),
        Err(e) => return Err(anyhow::Error::new(e).context("fix session aborted")),
    };
    println!("bug hash: {}", race.bug_hash);
    match session.fix {
        Some(outcome) => {
            std::fs::write(&args.out_diff, &outcome.patch.diff_text)
                .with_context(|| format!("cannot write {}", args.out_diff.display()))?;
            println!(
                "fixed at {}/{} with example {} after {} attempt(s)",
                outcome.candidate.location_kind, outcome.candidate.scope, outcome.candidate.example, session.attempts
            );
            println!("diff: {}", args.out_diff.display());
            println!("audit log: {}", args.audit_log.display());
            Ok(ExitCode::SUCCESS)
        }
        None => {
            println!("no fix after {} attempt(s)", session.attempts);
            println!("audit log: {}", args.audit_log.display());
            Ok(ExitCode::from(EXIT_NO_FIX))
        }
    }
}
