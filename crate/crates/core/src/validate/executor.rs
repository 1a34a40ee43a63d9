use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::ValidateError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildOutcome {
    pub success: bool,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub success: bool,
    /// Combined test output, including any race reports.
    pub output: String,
    /// Test repetitions this outcome covers.
    pub repetitions: usize,
}

pub trait TestExecutor: Send + Sync {
    fn build(&self, workspace: &Path, packages: &[String]) -> Result<BuildOutcome, ValidateError>;

    /// Runs the package tests `repetitions` times with race detection.
    fn run_with_race_detector(
        &self,
        workspace: &Path,
        packages: &[String],
        repetitions: usize,
        test_filter: Option<&str>,
    ) -> Result<Vec<RunOutcome>, ValidateError>;
}

/// Drives `go test -race`. Repetitions are split over `workers` concurrent
/// processes, each running `-count=<share>`.
#[derive(Debug, Clone)]
pub struct GoExecutor {
    pub go: PathBuf,
    pub workers: usize,
    /// Passed to `go test -timeout`.
    pub timeout: String,
}

impl Default for GoExecutor {
    fn default() -> Self {
        GoExecutor {
            go: PathBuf::from("go"),
            workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            timeout: "10m".into(),
        }
    }
}

impl GoExecutor {
    /// True when `go version` runs.
    pub fn available(&self) -> bool {
        Command::new(&self.go)
            .arg("version")
            .output()
            .is_ok_and(|o| o.status.success())
    }

    fn go_test(&self, workspace: &Path, args: &[String]) -> Result<(bool, String), ValidateError> {
        let out = Command::new(&self.go)
            .arg("test")
            .args(args)
            .current_dir(workspace)
            .output()
            .map_err(|e| ValidateError::ExecutorFailure(format!("cannot run {}: {e}", self.go.display())))?;
        let mut text = String::from_utf8_lossy(&out.stdout).into_owned();
        text.push_str(&String::from_utf8_lossy(&out.stderr));
        Ok((out.status.success(), text))
    }
}

impl TestExecutor for GoExecutor {
    fn build(&self, workspace: &Path, packages: &[String]) -> Result<BuildOutcome, ValidateError> {
        // Compiles package and test code without running any test.
        let mut args = vec!["-race".to_string(), "-count=1".into(), "-run".into(), "^$".into()];
        args.extend(packages.iter().cloned());
        let (success, output) = self.go_test(workspace, &args)?;
        Ok(BuildOutcome { success, output })
    }

    fn run_with_race_detector(
        &self,
        workspace: &Path,
        packages: &[String],
        repetitions: usize,
        test_filter: Option<&str>,
    ) -> Result<Vec<RunOutcome>, ValidateError> {
        let workers = self.workers.clamp(1, repetitions.max(1));
        let shares: Vec<usize> = (0..workers)
            .map(|w| repetitions / workers + usize::from(w < repetitions % workers))
            .collect();
        let results: Vec<Result<RunOutcome, ValidateError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = shares
                .iter()
                .map(|&count| {
                    scope.spawn(move || {
                        let mut args = vec![
                            "-race".to_string(),
                            format!("-count={count}"),
                            format!("-timeout={}", self.timeout),
                        ];
                        if let Some(filter) = test_filter {
                            args.push("-run".into());
                            args.push(filter.to_string());
                        }
                        args.extend(packages.iter().cloned());
                        self.go_test(workspace, &args).map(|(success, output)| RunOutcome {
                            success,
                            output,
                            repetitions: count,
                        })
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| {
                    h.join()
                        .unwrap_or_else(|_| Err(ValidateError::ExecutorFailure("worker panicked".into())))
                })
                .collect()
        });
        results.into_iter().collect()
    }
}

/// One scripted test run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimRun {
    #[serde(default)]
    pub output: String,
    /// Read instead of `output`, relative to the script file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_file: Option<PathBuf>,
    /// Defaults to success when the output holds no race report.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success: Option<bool>,
}

/// Scripted behaviour for one build-and-run cycle.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimRound {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub build_error: Option<String>,
    /// Runs beyond the list are clean.
    #[serde(default)]
    pub runs: Vec<SimRun>,
}

#[derive(Debug, Clone, Default, Deserialize)]
struct SimScript {
    #[serde(default)]
    rounds: Vec<SimRound>,
    /// Used once `rounds` is exhausted; clean when absent.
    #[serde(default)]
    default: Option<SimRound>,
}

/// Replays scripted build and test results. Each `build` call starts the
/// next round; the following `run_with_race_detector` call replays it.
#[derive(Debug, Default)]
pub struct SimulatedExecutor {
    rounds: Vec<SimRound>,
    default: SimRound,
    base_dir: PathBuf,
    next_round: AtomicUsize,
    current: Mutex<Option<SimRound>>,
    build_calls: AtomicUsize,
    run_calls: AtomicUsize,
}

impl SimulatedExecutor {
    pub fn new(rounds: Vec<SimRound>) -> Self {
        SimulatedExecutor {
            rounds,
            ..Default::default()
        }
    }

    pub fn with_default(mut self, round: SimRound) -> Self {
        self.default = round;
        self
    }

    /// Loads `{"rounds": [...], "default": {...}}`.
    pub fn from_file(path: &Path) -> Result<Self, ValidateError> {
        let text = std::fs::read_to_string(path).map_err(|source| ValidateError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let script: SimScript = serde_json::from_str(&text)
            .map_err(|e| ValidateError::ExecutorFailure(format!("bad executor script {}: {e}", path.display())))?;
        let mut sim = SimulatedExecutor::new(script.rounds).with_default(script.default.unwrap_or_default());
        sim.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(sim)
    }

    pub fn build_calls(&self) -> usize {
        self.build_calls.load(Ordering::SeqCst)
    }

    /// Individual test runs replayed so far.
    pub fn run_calls(&self) -> usize {
        self.run_calls.load(Ordering::SeqCst)
    }

    fn run_output(&self, run: &SimRun) -> Result<String, ValidateError> {
        match &run.output_file {
            Some(file) => {
                let path = self.base_dir.join(file);
                std::fs::read_to_string(&path).map_err(|source| ValidateError::Io {
                    path: path.display().to_string(),
                    source,
                })
            }
            None => Ok(run.output.clone()),
        }
    }
}

impl TestExecutor for SimulatedExecutor {
    fn build(&self, _workspace: &Path, _packages: &[String]) -> Result<BuildOutcome, ValidateError> {
        self.build_calls.fetch_add(1, Ordering::SeqCst);
        let idx = self.next_round.fetch_add(1, Ordering::SeqCst);
        let round = self.rounds.get(idx).unwrap_or(&self.default).clone();
        let outcome = match &round.build_error {
            Some(err) => BuildOutcome {
                success: false,
                output: err.clone(),
            },
            None => BuildOutcome {
                success: true,
                output: String::new(),
            },
        };
        *self.current.lock().expect("executor lock poisoned") = Some(round);
        Ok(outcome)
    }

    fn run_with_race_detector(
        &self,
        _workspace: &Path,
        _packages: &[String],
        repetitions: usize,
        _test_filter: Option<&str>,
    ) -> Result<Vec<RunOutcome>, ValidateError> {
        let round = self
            .current
            .lock()
            .expect("executor lock poisoned")
            .take()
            .ok_or_else(|| ValidateError::ExecutorFailure("run requested without a preceding build".into()))?;
        let mut out = Vec::with_capacity(repetitions);
        for i in 0..repetitions {
            self.run_calls.fetch_add(1, Ordering::SeqCst);
            let run = round.runs.get(i).cloned().unwrap_or_default();
            let output = self.run_output(&run)?;
            let success = run
                .success
                .unwrap_or_else(|| crate::report::split_reports(&output).is_empty());
            out.push(RunOutcome {
                success,
                output,
                repetitions: 1,
            });
        }
        Ok(out)
    }
}
