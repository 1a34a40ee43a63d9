use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::report::{LocationKind, Scope};

/// What happened to one attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Validated,
    ModelError,
    Unparseable,
    PatchFailed,
    BuildFailed,
    RacePresent,
    TestsFailed,
    NewRace,
}

/// One line of the audit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    /// 1-based attempt number within the session.
    pub attempt: usize,
    pub location: LocationKind,
    pub scope: Scope,
    pub feedback: bool,
    /// `empty` or the example id.
    pub slot: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub similarity: Option<f64>,
    pub prompt_sha256: String,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
    pub example_truncated: bool,
}

/// JSON-lines audit log. Records are kept in memory and, when a file is
/// attached, written through immediately.
#[derive(Debug, Default)]
pub struct AuditLog {
    records: Vec<AuditRecord>,
    sink: Option<BufWriter<File>>,
}

impl AuditLog {
    pub fn in_memory() -> Self {
        AuditLog::default()
    }

    /// Starts a fresh log file at `path`.
    pub fn create(path: &Path) -> std::io::Result<Self> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        Ok(AuditLog {
            records: Vec::new(),
            sink: Some(BufWriter::new(File::create(path)?)),
        })
    }

    pub fn append(&mut self, record: AuditRecord) -> std::io::Result<()> {
        if let Some(sink) = self.sink.as_mut() {
            serde_json::to_writer(&mut *sink, &record)?;
            sink.write_all(b"\n")?;
            sink.flush()?;
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[AuditRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}
