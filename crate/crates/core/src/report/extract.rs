use std::collections::BTreeMap;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::locate::{compute_bug_hash, resolve_locations, FixLocation, Locations};
use super::{BugHash, LocationKind, RaceReport, ReportError, Scope};
use crate::golang::{self, FunctionKey};

/// Source text extracted for one site.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopedSource {
    /// Repo-relative path with `/` separators.
    pub file_path: String,
    pub text: String,
    /// 1-based line of `text`'s first line within the file.
    pub start_line: usize,
    /// Set for function-scope extracts.
    pub function: Option<FunctionKey>,
}

impl ScopedSource {
    pub fn line_count(&self) -> usize {
        self.text.lines().count()
    }

    /// Maps a file line into this extract (1-based), if it falls inside.
    pub fn local_line(&self, file_line: usize) -> Option<usize> {
        (file_line >= self.start_line && file_line < self.start_line + self.line_count())
            .then(|| file_line - self.start_line + 1)
    }
}

/// Locates a report path inside `repo_root`.
///
/// Relative paths are joined directly. Absolute paths are stripped of the
/// repo prefix when they have it, otherwise the longest path suffix that
/// exists under the repo wins (reports carry absolute paths from whatever
/// machine ran the tests).
pub fn resolve_repo_path(repo_root: &Path, report_path: &str) -> Option<(PathBuf, String)> {
    let p = Path::new(report_path);
    if p.is_relative() {
        let full = repo_root.join(p);
        return full.is_file().then(|| (full, to_slash(p)));
    }
    if let Ok(rel) = p.strip_prefix(repo_root) {
        let full = repo_root.join(rel);
        if full.is_file() {
            return Some((full, to_slash(rel)));
        }
    }
    let parts: Vec<_> = p.components().filter(|c| matches!(c, Component::Normal(_))).collect();
    for skip in 0..parts.len() {
        let rel: PathBuf = parts[skip..].iter().collect();
        let full = repo_root.join(&rel);
        if full.is_file() {
            return Some((full, to_slash(&rel)));
        }
    }
    None
}

fn to_slash(p: &Path) -> String {
    p.components()
        .filter_map(|c| match c {
            Component::Normal(s) => Some(s.to_string_lossy().into_owned()),
            _ => None,
        })
        .collect::<Vec<_>>()
        .join("/")
}

/// Extracts the text for `location` at `scope`: the declaration of each
/// site's function, or the whole containing files. Never more than two
/// texts; sites sharing a file (or function) collapse.
pub fn extract_scope_source(
    repo_root: &Path,
    location: &FixLocation,
    scope: Scope,
) -> Result<Vec<ScopedSource>, ReportError> {
    let mut out: Vec<ScopedSource> = Vec::new();
    for site in &location.sites {
        let (full, rel) = resolve_repo_path(repo_root, &site.file_path).ok_or_else(|| ReportError::Io {
            path: site.file_path.clone(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "not found under repository root"),
        })?;
        let text = std::fs::read_to_string(&full).map_err(|source| ReportError::Io {
            path: rel.clone(),
            source,
        })?;
        let source = match scope {
            Scope::File => {
                if out.iter().any(|s| s.file_path == rel) {
                    continue;
                }
                ScopedSource {
                    file_path: rel,
                    text,
                    start_line: 1,
                    function: None,
                }
            }
            Scope::Function => {
                let not_found = || ReportError::SiteNotFound {
                    path: rel.clone(),
                    function: site.function_name.clone(),
                };
                let key = site.function_key().ok_or_else(not_found)?;
                if out
                    .iter()
                    .any(|s| s.file_path == rel && s.function.as_ref() == Some(&key))
                {
                    continue;
                }
                let tree = golang::parse_lenient(&text);
                let span = golang::top_level_functions(&text, &tree)
                    .into_iter()
                    .find(|s| s.key == key)
                    .ok_or_else(not_found)?;
                ScopedSource {
                    file_path: rel.clone(),
                    text: text[span.decl_start..span.end].to_string(),
                    start_line: span.start_line,
                    function: Some(key),
                }
            }
        };
        out.push(source);
        if out.len() == 2 {
            break;
        }
    }
    Ok(out)
}

/// Everything the fixer needs to know about one race.
#[derive(Debug, Clone)]
pub struct RaceInfo {
    pub report: RaceReport,
    pub bug_hash: BugHash,
    pub locations: Locations,
    /// Extracted sources per (location, scope); only present locations have
    /// entries, and only where extraction succeeded.
    pub scoped_sources: BTreeMap<(LocationKind, Scope), Vec<ScopedSource>>,
    /// Extraction failures, e.g. a leaf in code outside the repository.
    pub extraction_failures: Vec<(LocationKind, Scope, String)>,
}

impl RaceInfo {
    pub fn extract(report: RaceReport, repo_root: &Path) -> RaceInfo {
        let bug_hash = compute_bug_hash(&report);
        let locations = resolve_locations(&report);
        let mut scoped_sources = BTreeMap::new();
        let mut extraction_failures = Vec::new();
        for location in locations.iter() {
            for scope in [Scope::Function, Scope::File] {
                match extract_scope_source(repo_root, location, scope) {
                    Ok(sources) if !sources.is_empty() => {
                        scoped_sources.insert((location.kind, scope), sources);
                    }
                    Ok(_) => {}
                    Err(e) => extraction_failures.push((location.kind, scope, e.to_string())),
                }
            }
        }
        RaceInfo {
            report,
            bug_hash,
            locations,
            scoped_sources,
            extraction_failures,
        }
    }

    pub fn sources(&self, kind: LocationKind, scope: Scope) -> Option<&[ScopedSource]> {
        self.scoped_sources.get(&(kind, scope)).map(Vec::as_slice)
    }

    /// Repo-relative racy locations, when the report paths resolve.
    pub fn racy_lines_in_repo(&self, repo_root: &Path) -> Vec<(String, usize)> {
        self.report
            .racy_lines
            .iter()
            .filter_map(|(path, line)| resolve_repo_path(repo_root, path).map(|(_, rel)| (rel, *line as usize)))
            .collect()
    }
}
