//! Checking a candidate: build the patched packages, run their tests under
//! the race detector and look for the target bug hash in the output.

mod executor;
mod workspace;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::report::{compute_bug_hash, parse_race_report, split_reports, BugHash};

pub use executor::{BuildOutcome, GoExecutor, RunOutcome, SimRound, SimRun, SimulatedExecutor, TestExecutor};
pub use workspace::{packages_for_files, Workspace};

/// Repetitions used in production.
pub const PRODUCTION_REPETITIONS: usize = 1000;
/// Repetitions small enough for a laptop.
pub const DESK_REPETITIONS: usize = 20;

/// Longest excerpt of any single output kept in diagnostics.
const EXCERPT_CHARS: usize = 4000;

#[derive(Debug, thiserror::Error)]
pub enum ValidateError {
    /// The toolchain could not be run at all, as opposed to a candidate
    /// failing to build or test.
    #[error("test executor failed: {0}")]
    ExecutorFailure(String),
    #[error("cannot prepare workspace {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Outcome of validating one candidate.
///
/// `passed` means no counterexample was found in `runs` repetitions. It is
/// not a proof that the code is race free.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationResult {
    pub passed: bool,
    pub build_ok: bool,
    pub target_race_present: bool,
    /// Executor outcomes in which the target hash appeared.
    pub target_hits: usize,
    pub runs: usize,
    /// Reports whose hash is not the target.
    pub other_races: usize,
    /// Hashes not seen in the baseline; these fail validation.
    pub new_races: BTreeSet<BugHash>,
    /// Repetitions that failed without any race report.
    pub failed_runs: usize,
    /// Build errors, test failures and residual race reports, as fed back
    /// to the model.
    pub diagnostics: String,
}

/// Validates the candidate in `workspace`. With `baseline`, any race hash
/// absent from it also fails the candidate.
pub fn validate_fix(
    workspace: &Path,
    packages: &[String],
    bug_hash: &BugHash,
    executor: &dyn TestExecutor,
    repetitions: usize,
    test_filter: Option<&str>,
    baseline: Option<&BTreeSet<BugHash>>,
) -> Result<ValidationResult, ValidateError> {
    let repetitions = repetitions.max(1);
    let build = executor.build(workspace, packages)?;
    if !build.success {
        return Ok(ValidationResult {
            diagnostics: excerpt(&build.output),
            ..Default::default()
        });
    }
    let runs = executor.run_with_race_detector(workspace, packages, repetitions, test_filter)?;
    let mut result = ValidationResult {
        build_ok: true,
        ..Default::default()
    };
    let mut target_report: Option<String> = None;
    let mut other_reports: Vec<String> = Vec::new();
    let mut failure_output: Option<String> = None;
    for run in &runs {
        result.runs += run.repetitions;
        let (hashes, texts) = hash_reports(&run.output);
        if hashes.contains(bug_hash) {
            result.target_race_present = true;
            result.target_hits += 1;
        }
        for (hash, text) in hashes.iter().zip(texts) {
            if hash == bug_hash {
                target_report.get_or_insert(text);
                continue;
            }
            result.other_races += 1;
            if baseline.is_some_and(|b| !b.contains(hash)) && result.new_races.insert(hash.clone()) {
                other_reports.push(text);
            }
        }
        if !run.success && hashes.is_empty() {
            result.failed_runs += 1;
            failure_output.get_or_insert_with(|| run.output.clone());
        }
    }
    result.passed = !result.target_race_present && result.failed_runs == 0 && result.new_races.is_empty();

    let mut diag = Vec::new();
    if let Some(report) = target_report {
        diag.push(format!("The data race is still present:\n{}", excerpt(&report)));
    }
    if let Some(output) = failure_output {
        diag.push(format!("Tests failed:\n{}", excerpt(&output)));
    }
    for report in other_reports {
        diag.push(format!("The change introduced a new data race:\n{}", excerpt(&report)));
    }
    result.diagnostics = diag.join("\n\n");
    Ok(result)
}

/// Hashes of all parseable reports in `output`, in order, with their texts.
pub fn hash_reports(output: &str) -> (Vec<BugHash>, Vec<String>) {
    let mut hashes = Vec::new();
    let mut texts = Vec::new();
    for text in split_reports(output) {
        match parse_race_report(&text) {
            Ok(report) => {
                hashes.push(compute_bug_hash(&report));
                texts.push(text);
            }
            Err(e) => log::warn!("skipping unparseable race report: {e}"),
        }
    }
    (hashes, texts)
}

/// Hashes observed when testing the unpatched code.
pub fn baseline_hashes(
    workspace: &Path,
    packages: &[String],
    executor: &dyn TestExecutor,
    repetitions: usize,
    test_filter: Option<&str>,
) -> Result<BTreeSet<BugHash>, ValidateError> {
    let build = executor.build(workspace, packages)?;
    if !build.success {
        return Ok(BTreeSet::new());
    }
    let runs = executor.run_with_race_detector(workspace, packages, repetitions.max(1), test_filter)?;
    Ok(runs.iter().flat_map(|r| hash_reports(&r.output).0).collect())
}

fn excerpt(text: &str) -> String {
    let text = text.trim_end();
    if text.chars().count() <= EXCERPT_CHARS {
        return text.to_string();
    }
    let cut: String = text.chars().take(EXCERPT_CHARS).collect();
    format!("{cut}\n[output truncated]")
}
