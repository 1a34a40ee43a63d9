use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use super::ValidateError;

/// Private copy of a repository that candidates are written into. Removed
/// on drop.
#[derive(Debug)]
pub struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    /// Copies `repo` (without `.git`) into a fresh temporary directory.
    pub fn copy_of(repo: &Path) -> Result<Workspace, ValidateError> {
        let io = |path: &Path, source| ValidateError::Io {
            path: path.display().to_string(),
            source,
        };
        let dir = tempfile::Builder::new()
            .prefix("drfix-ws-")
            .tempdir()
            .map_err(|e| io(repo, e))?;
        let walker = WalkDir::new(repo)
            .follow_links(false)
            .into_iter()
            .filter_entry(|e| e.file_name() != ".git");
        for entry in walker {
            let entry = entry.map_err(|e| io(repo, e.into()))?;
            let rel = entry.path().strip_prefix(repo).expect("walkdir stays under its root");
            let target = dir.path().join(rel);
            if entry.file_type().is_dir() {
                std::fs::create_dir_all(&target).map_err(|e| io(&target, e))?;
            } else if entry.file_type().is_file() {
                std::fs::copy(entry.path(), &target).map_err(|e| io(entry.path(), e))?;
            }
        }
        Ok(Workspace { dir })
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn join(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }
}

/// Go package patterns (`./dir`) containing the given repo-relative files.
pub fn packages_for_files<S: AsRef<str>>(files: &[S]) -> Vec<String> {
    let set: BTreeSet<String> = files
        .iter()
        .map(|f| match f.as_ref().rsplit_once('/') {
            Some((dir, _)) => format!("./{dir}"),
            None => ".".to_string(),
        })
        .collect();
    set.into_iter().collect()
}
