//! Applying model output to source files and rendering the result as a
//! unified diff.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use similar::TextDiff;

use crate::golang::{self, FunctionKey, SyntaxError};

/// Patches touch at most this many files.
pub const MAX_FILES: usize = 2;

#[derive(Debug, thiserror::Error)]
pub enum PatchError {
    #[error("function {0} does not exist in the target file")]
    FunctionNotFound(FunctionKey),
    #[error("replacement does not parse: {0}")]
    ParseFailure(String),
    #[error("package mismatch: file declares {expected:?}, replacement declares {found:?}")]
    PackageMismatch {
        expected: Option<String>,
        found: Option<String>,
    },
    #[error("patch touches {0} files (at most {MAX_FILES} allowed)")]
    TooManyFiles(usize),
    #[error("{path} is not an existing file of the workspace")]
    UnknownFile { path: String },
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("diff does not apply: {0}")]
    BadDiff(String),
}

impl From<SyntaxError> for PatchError {
    fn from(e: SyntaxError) -> Self {
        PatchError::ParseFailure(e.to_string())
    }
}

const WRAPPER: &str = "package p\n\n";

/// Replaces each top-level function named in `replacement` with its new
/// text. Bytes outside the replaced spans are untouched. The original doc
/// comment stays unless the replacement brings its own.
pub fn apply_function_scope(file_source: &str, replacement: &str) -> Result<String, PatchError> {
    let wrapped = format!("{WRAPPER}{replacement}");
    let tree = golang::parse(&wrapped)?;
    let root = tree.root_node();
    let mut cursor = root.walk();
    for node in root.children(&mut cursor) {
        match node.kind() {
            "package_clause" | "comment" | "function_declaration" | "method_declaration" => {}
            other => {
                return Err(PatchError::ParseFailure(format!(
                    "function scope accepts function declarations only, found {other} at line {}",
                    node.start_position().row + 1 - 2
                )))
            }
        }
    }
    let new_spans = golang::top_level_functions(&wrapped, &tree);
    if new_spans.is_empty() {
        return Err(PatchError::ParseFailure(
            "replacement contains no function declaration".into(),
        ));
    }
    let original = golang::top_level_functions(file_source, &golang::parse_lenient(file_source));
    let mut seen = BTreeSet::new();
    let mut splices: Vec<(usize, usize, &str)> = Vec::new();
    for span in &new_spans {
        if !seen.insert(span.key.clone()) {
            return Err(PatchError::ParseFailure(format!("{} is declared twice", span.key)));
        }
        let target = original
            .iter()
            .find(|o| o.key == span.key)
            .ok_or_else(|| PatchError::FunctionNotFound(span.key.clone()))?;
        let (from, text) = match span.doc_start {
            Some(doc) => (target.full_start(), &wrapped[doc..span.end]),
            None => (target.decl_start, &wrapped[span.decl_start..span.end]),
        };
        splices.push((from, target.end, text));
    }
    splices.sort_by_key(|s| std::cmp::Reverse(s.0));
    let mut out = file_source.to_string();
    for (from, to, text) in splices {
        out.replace_range(from..to, text);
    }
    Ok(out)
}

/// Checks that `replacement` is a complete file of the same package and
/// returns it verbatim.
pub fn apply_file_scope(original: &str, replacement: &str) -> Result<String, PatchError> {
    let tree = golang::parse(replacement)?;
    let expected = golang::package_name(original, &golang::parse_lenient(original));
    let found = golang::package_name(replacement, &tree);
    if found.is_none() || expected != found {
        return Err(PatchError::PackageMismatch { expected, found });
    }
    Ok(replacement.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEdit {
    /// Repo-relative, `/`-separated.
    pub path: String,
    pub original: String,
    pub new_content: String,
}

impl FileEdit {
    pub fn is_noop(&self) -> bool {
        self.original == self.new_content
    }
}

/// Unified diff of `edits`: three lines of context, `a/` and `b/` prefixes,
/// files in path order, unchanged files omitted.
pub fn render_diff(edits: &[FileEdit]) -> String {
    let mut sorted: Vec<&FileEdit> = edits.iter().filter(|e| !e.is_noop()).collect();
    sorted.sort_by(|a, b| a.path.cmp(&b.path));
    let mut out = String::new();
    for edit in sorted {
        let diff = TextDiff::from_lines(&edit.original, &edit.new_content);
        out.push_str(
            &diff
                .unified_diff()
                .context_radius(3)
                .header(&format!("a/{}", edit.path), &format!("b/{}", edit.path))
                .to_string(),
        );
    }
    out
}

/// A validated set of file edits with its diff.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patch {
    pub edits: Vec<FileEdit>,
    pub diff_text: String,
}

impl Patch {
    pub fn new(edits: Vec<FileEdit>) -> Result<Patch, PatchError> {
        let paths: BTreeSet<&str> = edits.iter().map(|e| e.path.as_str()).collect();
        if paths.len() > MAX_FILES || edits.len() > MAX_FILES {
            return Err(PatchError::TooManyFiles(edits.len()));
        }
        let diff_text = render_diff(&edits);
        Ok(Patch { edits, diff_text })
    }

    /// Builds a patch from new contents, reading originals from `root`.
    /// Only existing files may be edited.
    pub fn from_workspace(root: &Path, contents: Vec<(String, String)>) -> Result<Patch, PatchError> {
        let mut edits = Vec::with_capacity(contents.len());
        for (path, new_content) in contents {
            let full = root.join(&path);
            if !full.is_file() {
                return Err(PatchError::UnknownFile { path });
            }
            let original = std::fs::read_to_string(&full).map_err(|source| PatchError::Io {
                path: path.clone(),
                source,
            })?;
            edits.push(FileEdit {
                path,
                original,
                new_content,
            });
        }
        Patch::new(edits)
    }

    pub fn is_noop(&self) -> bool {
        self.edits.iter().all(FileEdit::is_noop)
    }

    /// Writes the new contents under `root`.
    pub fn write_to(&self, root: &Path) -> Result<(), PatchError> {
        for edit in &self.edits {
            std::fs::write(root.join(&edit.path), &edit.new_content).map_err(|source| PatchError::Io {
                path: edit.path.clone(),
                source,
            })?;
        }
        Ok(())
    }
}

/// Applies a unified diff (as produced by [`render_diff`]) to `originals`,
/// keyed by repo-relative path. Files not named in the diff are returned
/// unchanged.
pub fn apply_unified_diff(
    originals: &BTreeMap<String, String>,
    diff: &str,
) -> Result<BTreeMap<String, String>, PatchError> {
    let bad = |m: String| PatchError::BadDiff(m);
    let mut out = originals.clone();
    let lines: Vec<&str> = diff.split_inclusive('\n').collect();
    let mut i = 0;
    while i < lines.len() {
        let Some(old_name) = lines[i].strip_prefix("--- ") else {
            return Err(bad(format!("expected file header, got {:?}", lines[i])));
        };
        let new_name = lines
            .get(i + 1)
            .and_then(|l| l.strip_prefix("+++ "))
            .ok_or_else(|| bad("missing +++ header".into()))?;
        let path = new_name
            .trim_end()
            .strip_prefix("b/")
            .unwrap_or(new_name.trim_end())
            .to_string();
        let old_path = old_name.trim_end().strip_prefix("a/").unwrap_or(old_name.trim_end());
        if old_path != path {
            return Err(bad(format!("renames are not supported: {old_path} -> {path}")));
        }
        let original = originals
            .get(&path)
            .ok_or_else(|| bad(format!("no original for {path}")))?;
        let src: Vec<&str> = original.split_inclusive('\n').collect();
        let mut result = String::new();
        let mut cursor = 0usize;
        i += 2;
        while i < lines.len() && lines[i].starts_with("@@") {
            let header = lines[i];
            let (old_start, old_len) =
                parse_hunk_header(header).ok_or_else(|| bad(format!("bad hunk header {header:?}")))?;
            // An empty old range (`-N,0`) names the line after which the new
            // lines go.
            let skip_to = if old_len == 0 {
                old_start
            } else {
                old_start.saturating_sub(1)
            };
            if skip_to < cursor || skip_to > src.len() {
                return Err(bad(format!("hunk at line {old_start} out of order")));
            }
            src[cursor..skip_to].iter().for_each(|l| result.push_str(l));
            cursor = skip_to;
            i += 1;
            while i < lines.len() && !lines[i].starts_with("@@") && !lines[i].starts_with("--- ") {
                let line = lines[i];
                let body = &line[1..];
                match line.as_bytes()[0] {
                    b' ' | b'-' => {
                        let have = src
                            .get(cursor)
                            .ok_or_else(|| bad(format!("{path}: diff runs past end of file")))?;
                        if have.trim_end_matches('\n') != body.trim_end_matches('\n') {
                            return Err(bad(format!("{path}: context mismatch at line {}", cursor + 1)));
                        }
                        if line.starts_with(' ') {
                            result.push_str(have);
                        }
                        cursor += 1;
                    }
                    b'+' => result.push_str(body),
                    b'\\' => {
                        // "\ No newline at end of file" belongs to the
                        // preceding line; only added lines need trimming.
                        if lines[i - 1].starts_with('+') && result.ends_with('\n') {
                            result.pop();
                        }
                    }
                    _ => return Err(bad(format!("unexpected diff line {line:?}"))),
                }
                i += 1;
            }
        }
        src[cursor..].iter().for_each(|l| result.push_str(l));
        out.insert(path, result);
    }
    Ok(out)
}

fn parse_hunk_header(header: &str) -> Option<(usize, usize)> {
    let old = header.strip_prefix("@@ -")?.split(' ').next()?;
    match old.split_once(',') {
        Some((start, len)) => Some((start.parse().ok()?, len.parse().ok()?)),
        None => Some((old.parse().ok()?, 1)),
    }
}
