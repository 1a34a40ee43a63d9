//! Fix generation: prompt construction, model calls and the search over
//! location, scope, example and retry.

mod audit;
mod model;
mod prompt;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::golang;
use crate::patch::{apply_file_scope, apply_function_scope, Patch, PatchError};
use crate::report::{AccessKind, BugHash, FixLocation, LocationKind, RaceInfo, Scope, ScopedSource};
use crate::retrieval::{Embedder, Store};
use crate::skeleton::{identify_variables_of_interest, skeletonize, SkeletonRequest};
use crate::validate::{
    baseline_hashes, packages_for_files, validate_fix, TestExecutor, ValidateError, ValidationResult, Workspace,
};

pub use audit::{AuditLog, AuditRecord, Outcome};
pub use model::{HttpModel, MockModel, Model, ModelError, RecordingModel};
pub use prompt::{
    build_prompt, parse_model_response, render_code, strip_wrappers, CodeUnit, ExamplePair, ParsedResponse, Prompt,
    PromptInput, RacyAccess, FILE_MARKER, SYSTEM_PROMPT,
};

#[derive(Debug, thiserror::Error)]
pub enum FixError {
    #[error("model response is not usable code: {0}")]
    ResponseUnparseable(String),
    #[error(transparent)]
    Executor(#[from] ValidateError),
    #[error("cannot write audit log: {0}")]
    Audit(#[from] std::io::Error),
    #[error("no fix location could be extracted from the repository")]
    NoLocation,
}

/// Example given to the model for one series of attempts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExampleSlot {
    Empty,
    Retrieved { id: String, similarity: f64 },
}

impl fmt::Display for ExampleSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExampleSlot::Empty => f.write_str("empty"),
            ExampleSlot::Retrieved { id, .. } => f.write_str(id),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScopeOrder {
    #[default]
    FunctionThenFile,
    FunctionOnly,
    FileOnly,
}

impl FromStr for ScopeOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "function-then-file" => Ok(ScopeOrder::FunctionThenFile),
            "function-only" => Ok(ScopeOrder::FunctionOnly),
            "file-only" => Ok(ScopeOrder::FileOnly),
            other => Err(format!(
                "unknown scope order {other:?} (expected function-then-file, function-only or file-only)"
            )),
        }
    }
}

impl fmt::Display for ScopeOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScopeOrder::FunctionThenFile => "function-then-file",
            ScopeOrder::FunctionOnly => "function-only",
            ScopeOrder::FileOnly => "file-only",
        })
    }
}

/// One rung of the retry ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub scope: Scope,
    pub feedback: bool,
}

impl ScopeOrder {
    /// First rung without feedback at the narrowest scope, an escalation
    /// without feedback, then `feedback_retries` rungs carrying the
    /// accumulated failures.
    pub fn ladder(self, feedback_retries: usize) -> Vec<Step> {
        let step = |scope, feedback| Step { scope, feedback };
        let (first, last) = match self {
            ScopeOrder::FunctionThenFile => (
                vec![step(Scope::Function, false), step(Scope::File, false)],
                Scope::File,
            ),
            ScopeOrder::FunctionOnly => (vec![step(Scope::Function, false)], Scope::Function),
            ScopeOrder::FileOnly => (vec![step(Scope::File, false)], Scope::File),
        };
        first
            .into_iter()
            .chain(std::iter::repeat_n(step(last, true), feedback_retries))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixConfig {
    pub use_rag: bool,
    pub use_skeleton: bool,
    pub use_lca: bool,
    pub scope_order: ScopeOrder,
    /// Retrieved examples per location, after the empty one.
    pub k: usize,
    /// Retrieved examples below this similarity are dropped. Off by default.
    pub min_similarity: Option<f64>,
    pub feedback_retries: usize,
    pub repetitions: usize,
    /// Character budget for a whole prompt.
    pub prompt_budget: Option<usize>,
    /// Observe pre-existing races before patching; new ones then fail a
    /// candidate.
    pub baseline: bool,
    /// Run only the reporting test when it is known.
    pub narrow_to_test: bool,
}

impl Default for FixConfig {
    fn default() -> Self {
        FixConfig {
            use_rag: true,
            use_skeleton: true,
            use_lca: true,
            scope_order: ScopeOrder::default(),
            k: 1,
            min_similarity: None,
            feedback_retries: 1,
            repetitions: crate::validate::DESK_REPETITIONS,
            prompt_budget: None,
            baseline: true,
            narrow_to_test: true,
        }
    }
}

/// Failure messages of a race's session, in order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackHistory {
    items: Vec<(String, String)>,
}

impl FeedbackHistory {
    pub fn push(&mut self, descriptor: impl Into<String>, message: impl Into<String>) {
        self.items.push((descriptor.into(), message.into()));
    }

    pub fn items(&self) -> &[(String, String)] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixCandidate {
    pub location_kind: LocationKind,
    pub scope: Scope,
    pub example: ExampleSlot,
    pub response_text: String,
    pub parsed_ok: bool,
}

/// Result of one race's search.
#[derive(Debug, Clone, Default)]
pub struct Session {
    pub fix: Option<FixOutcome>,
    pub history: FeedbackHistory,
    pub attempts: usize,
}

#[derive(Debug, Clone)]
pub struct FixOutcome {
    pub candidate: FixCandidate,
    pub patch: Patch,
    pub validation: ValidationResult,
}

/// Text used as the retrieval key for `sources`: their skeletons, or the
/// raw text when skeletons are off or fail.
pub fn retrieval_key(
    sources: &[ScopedSource],
    accesses: &[RacyAccess],
    extra_vars: &BTreeSet<String>,
    use_skeleton: bool,
) -> String {
    let raw = || sources.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join("\n");
    if !use_skeleton {
        return raw();
    }
    let mut parts = Vec::new();
    for source in sources {
        let lines: BTreeSet<usize> = accesses
            .iter()
            .filter(|a| a.file == source.file_path)
            .filter_map(|a| source.local_line(a.line))
            .collect();
        let req = SkeletonRequest::new(source.text.clone())
            .with_lines(lines)
            .with_vars(extra_vars.iter().cloned());
        match skeletonize(&req) {
            Ok(sk) => parts.push(sk.text),
            Err(e) => {
                log::warn!("cannot skeletonize {}: {e}; retrieving by raw text", source.file_path);
                return raw();
            }
        }
    }
    parts.join("\n")
}

/// `[Empty]` followed by up to `k` retrieved examples when RAG is on.
pub fn get_example_slots<E: Embedder<f64> + ?Sized>(
    store: &Store<f64>,
    embedder: &E,
    key_text: &str,
    config: &FixConfig,
) -> Vec<ExampleSlot> {
    let mut slots = vec![ExampleSlot::Empty];
    if !config.use_rag || store.is_empty() || config.k == 0 {
        return slots;
    }
    if let Err(e) = store.check_embedder(embedder) {
        log::warn!("example store unusable with this embedder: {e}");
        return slots;
    }
    let query = match embedder.embed(key_text) {
        Ok(q) => q,
        Err(e) => {
            log::warn!("cannot embed retrieval key: {e}");
            return slots;
        }
    };
    for (entry, similarity) in store.query_nearest(&query, config.k) {
        if config.min_similarity.is_some_and(|min| similarity < min) {
            continue;
        }
        slots.push(ExampleSlot::Retrieved {
            id: entry.id.clone(),
            similarity,
        });
    }
    slots
}

/// Everything a session needs besides the race itself.
pub struct FixContext<'a, E: ?Sized> {
    pub repo_root: &'a Path,
    pub store: &'a Store<f64>,
    pub embedder: &'a E,
    pub executor: &'a dyn TestExecutor,
    pub config: &'a FixConfig,
}

fn test_filter(race: &RaceInfo) -> Option<String> {
    let site = race.locations.test.as_ref()?.sites.first()?;
    let key = site.function_key()?;
    Some(format!("^{}$", key.name))
}

/// Variables of interest taken from the leaf functions, used to skeletonize
/// locations that do not contain the racy lines themselves.
fn leaf_variables(race: &RaceInfo, accesses: &[RacyAccess]) -> BTreeSet<String> {
    let Some(sources) = race.sources(LocationKind::Leaf, Scope::Function) else {
        return BTreeSet::new();
    };
    let mut vars = BTreeSet::new();
    for source in sources {
        let lines: BTreeSet<usize> = accesses
            .iter()
            .filter(|a| a.file == source.file_path)
            .filter_map(|a| source.local_line(a.line))
            .collect();
        if let Ok(v) = identify_variables_of_interest(&source.text, &lines) {
            vars.extend(v);
        }
    }
    vars
}

/// Routes a parsed response to files and computes their new contents.
fn apply_response(
    workspace: &Path,
    sources: &[ScopedSource],
    parsed: &ParsedResponse,
) -> Result<Vec<(String, String)>, PatchError> {
    let read = |path: &str| {
        std::fs::read_to_string(workspace.join(path)).map_err(|source| PatchError::Io {
            path: path.to_string(),
            source,
        })
    };
    let files: Vec<&str> = {
        let mut seen = Vec::new();
        for s in sources {
            if !seen.contains(&s.file_path.as_str()) {
                seen.push(s.file_path.as_str());
            }
        }
        seen
    };
    let mut contents: Vec<(String, String)> = Vec::new();
    let target_of = |unit: &CodeUnit| -> Result<Option<String>, PatchError> {
        match &unit.path {
            Some(p) if files.contains(&p.as_str()) => Ok(Some(p.clone())),
            Some(p) => Err(PatchError::UnknownFile { path: p.clone() }),
            None if files.len() == 1 => Ok(Some(files[0].to_string())),
            None => Ok(None),
        }
    };
    match parsed.scope {
        Scope::File => {
            for unit in &parsed.units {
                let path = target_of(unit)?.ok_or_else(|| {
                    PatchError::ParseFailure(format!("two files were sent; mark each with `{FILE_MARKER}<path>`"))
                })?;
                let original = read(&path)?;
                let new = apply_file_scope(&original, &unit.code)?;
                contents.retain(|(p, _)| p != &path);
                contents.push((path, new));
            }
        }
        Scope::Function => {
            // Without a marker each function goes to the file declaring it.
            let mut per_file: Vec<(String, String)> = Vec::new();
            for unit in &parsed.units {
                if let Some(path) = target_of(unit)? {
                    per_file.push((path, unit.code.clone()));
                    continue;
                }
                let wrapped = format!("package p\n\n{}", unit.code);
                let tree = golang::parse_lenient(&wrapped);
                for span in golang::top_level_functions(&wrapped, &tree) {
                    let text = &wrapped[span.full_start()..span.end];
                    let mut home = None;
                    for file in &files {
                        let src = read(file)?;
                        let decls = golang::top_level_functions(&src, &golang::parse_lenient(&src));
                        if decls.iter().any(|d| d.key == span.key) {
                            home = Some(file.to_string());
                            break;
                        }
                    }
                    let home = home.ok_or_else(|| PatchError::FunctionNotFound(span.key.clone()))?;
                    per_file.push((home, format!("{text}\n")));
                }
            }
            for (path, code) in per_file {
                let current = match contents.iter().find(|(p, _)| *p == path) {
                    Some((_, c)) => c.clone(),
                    None => read(&path)?,
                };
                let new = apply_function_scope(&current, &code)?;
                contents.retain(|(p, _)| *p != path);
                contents.push((path, new));
            }
        }
    }
    Ok(contents)
}

fn first_line(text: &str, max: usize) -> String {
    let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("").trim();
    line.chars().take(max).collect()
}

/// Searches for a validated fix: locations Test, Leaf, Lca; for each, the
/// empty example then retrieved ones; for each example, the scope ladder.
/// Feedback accumulates within one example's ladder. Returns on the first
/// candidate that validates. Failures of a candidate go to the feedback
/// history and the audit log; only executor breakdowns are errors.
pub fn orchestrate<E: Embedder<f64> + ?Sized>(
    race: &RaceInfo,
    ctx: &FixContext<'_, E>,
    model: &mut dyn Model,
    audit: &mut AuditLog,
) -> Result<Session, FixError> {
    let config = ctx.config;
    let accesses: Vec<RacyAccess> = race
        .racy_lines_in_repo(ctx.repo_root)
        .into_iter()
        .zip(race.report.accesses())
        .map(|((file, line), trace)| RacyAccess {
            file,
            line,
            kind: trace.leaf().access_kind.unwrap_or(AccessKind::Write),
        })
        .collect();
    let locations: Vec<&FixLocation> = race
        .locations
        .iter()
        .filter(|l| config.use_lca || l.kind != LocationKind::Lca)
        .filter(|l| race.sources(l.kind, Scope::Function).is_some() || race.sources(l.kind, Scope::File).is_some())
        .collect();
    if locations.is_empty() {
        return Err(FixError::NoLocation);
    }
    let filter = if config.narrow_to_test { test_filter(race) } else { None };

    let baseline = if config.baseline {
        let files: Vec<&str> = accesses.iter().map(|a| a.file.as_str()).collect();
        let packages = if files.is_empty() {
            vec![".".to_string()]
        } else {
            packages_for_files(&files)
        };
        let ws = Workspace::copy_of(ctx.repo_root)?;
        let hashes = baseline_hashes(
            ws.path(),
            &packages,
            ctx.executor,
            config.repetitions,
            filter.as_deref(),
        )?;
        if !hashes.contains(&race.bug_hash) {
            log::info!("target race not observed before patching");
        }
        Some(hashes)
    } else {
        None
    };

    let leaf_vars = leaf_variables(race, &accesses);
    let ladder = config.scope_order.ladder(config.feedback_retries);
    let mut history = FeedbackHistory::default();
    let mut attempt = 0usize;

    for location in locations {
        let key_sources = race
            .sources(location.kind, Scope::Function)
            .or_else(|| race.sources(location.kind, Scope::File))
            .expect("filtered above");
        let key = retrieval_key(key_sources, &accesses, &leaf_vars, config.use_skeleton);
        let slots = get_example_slots(ctx.store, ctx.embedder, &key, config);
        for slot in &slots {
            let example = match slot {
                ExampleSlot::Empty => None,
                ExampleSlot::Retrieved { id, .. } => ctx.store.get(id).map(|e| ExamplePair {
                    buggy: &e.buggy,
                    fixed: &e.fixed,
                }),
            };
            let mut slot_failures: Vec<String> = Vec::new();
            for step in &ladder {
                let Some(sources) = race.sources(location.kind, step.scope) else {
                    log::debug!("no {} source for {} location; skipping rung", step.scope, location.kind);
                    continue;
                };
                attempt += 1;
                let prompt = build_prompt(&PromptInput {
                    sources,
                    accesses: &accesses,
                    example,
                    history: if step.feedback { &slot_failures } else { &[] },
                    budget: config.prompt_budget,
                });
                let mut record = AuditRecord {
                    attempt,
                    location: location.kind,
                    scope: step.scope,
                    feedback: step.feedback,
                    slot: slot.to_string(),
                    similarity: match slot {
                        ExampleSlot::Retrieved { similarity, .. } => Some(*similarity),
                        ExampleSlot::Empty => None,
                    },
                    prompt_sha256: prompt.sha256(),
                    outcome: Outcome::ModelError,
                    detail: String::new(),
                    example_truncated: prompt.truncated_example,
                };
                let descriptor = format!("attempt {attempt} ({}/{}/{slot})", location.kind, step.scope);
                match run_attempt(
                    ctx,
                    race,
                    sources,
                    step.scope,
                    &prompt,
                    model,
                    baseline.as_ref(),
                    filter.as_deref(),
                )? {
                    AttemptResult::Validated {
                        response,
                        patch,
                        validation,
                    } => {
                        record.outcome = Outcome::Validated;
                        audit.append(record)?;
                        return Ok(Session {
                            fix: Some(FixOutcome {
                                candidate: FixCandidate {
                                    location_kind: location.kind,
                                    scope: step.scope,
                                    example: slot.clone(),
                                    response_text: response,
                                    parsed_ok: true,
                                },
                                patch,
                                validation,
                            }),
                            history,
                            attempts: attempt,
                        });
                    }
                    AttemptResult::Failed { outcome, message } => {
                        record.outcome = outcome;
                        record.detail = first_line(&message, 300);
                        audit.append(record)?;
                        history.push(descriptor, message.clone());
                        slot_failures.push(message);
                    }
                }
            }
        }
    }
    Ok(Session {
        fix: None,
        history,
        attempts: attempt,
    })
}

enum AttemptResult {
    Validated {
        response: String,
        patch: Patch,
        validation: ValidationResult,
    },
    Failed {
        outcome: Outcome,
        message: String,
    },
}

#[allow(clippy::too_many_arguments)]
fn run_attempt<E: ?Sized>(
    ctx: &FixContext<'_, E>,
    race: &RaceInfo,
    sources: &[ScopedSource],
    scope: Scope,
    prompt: &Prompt,
    model: &mut dyn Model,
    baseline: Option<&BTreeSet<BugHash>>,
    filter: Option<&str>,
) -> Result<AttemptResult, FixError> {
    let failed = |outcome, message: String| Ok(AttemptResult::Failed { outcome, message });
    let response = match model.complete(prompt) {
        Ok(r) => r,
        Err(e) => return failed(Outcome::ModelError, e.to_string()),
    };
    let parsed = match parse_model_response(&response, scope) {
        Ok(p) => p,
        Err(e) => return failed(Outcome::Unparseable, e.to_string()),
    };
    let ws = Workspace::copy_of(ctx.repo_root)?;
    let patch = match apply_response(ws.path(), sources, &parsed).and_then(|c| Patch::from_workspace(ws.path(), c)) {
        Ok(p) => p,
        Err(e) => return failed(Outcome::PatchFailed, format!("The fix could not be applied: {e}")),
    };
    if patch.is_noop() {
        return failed(Outcome::PatchFailed, "The response did not change the code.".into());
    }
    patch
        .write_to(ws.path())
        .map_err(|e| ValidateError::ExecutorFailure(format!("cannot write candidate into workspace: {e}")))?;
    let files: Vec<&str> = patch.edits.iter().map(|e| e.path.as_str()).collect();
    let packages = packages_for_files(&files);
    let validation = validate_fix(
        ws.path(),
        &packages,
        &race.bug_hash,
        ctx.executor,
        ctx.config.repetitions,
        filter,
        baseline,
    )?;
    if validation.passed {
        return Ok(AttemptResult::Validated {
            response,
            patch,
            validation,
        });
    }
    let outcome = if !validation.build_ok {
        Outcome::BuildFailed
    } else if validation.target_race_present {
        Outcome::RacePresent
    } else if validation.failed_runs > 0 {
        Outcome::TestsFailed
    } else {
        Outcome::NewRace
    };
    failed(outcome, validation.diagnostics)
}
