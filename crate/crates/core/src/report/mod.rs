//! Race-detector reports: parsing, the stable bug hash, fix locations and
//! scoped source extraction.
//!
//! The accepted input grammar follows the layout of the Go race detector:
//!
//! ```text
//! ==================
//! WARNING: DATA RACE
//! Write at 0x00c00001c0f8 by goroutine 8:
//!   example.com/svc.SomeFunction.func1()
//!       /src/svc/service.go:38 +0x7c
//!
//! Previous write at 0x00c00001c0f8 by goroutine 7:
//!   example.com/svc.SomeFunction()
//!       /src/svc/service.go:43 +0x1d0
//!
//! Goroutine 8 (running) created at:
//!   example.com/svc.SomeFunction()
//!       /src/svc/service.go:35 +0x1b0
//! ==================
//! ```
//!
//! An access header is `[Previous ][Atomic ](read|write) at ADDR by
//! (goroutine N|main goroutine):`. Each frame is a function line followed by
//! a `path:line[ +0xOFF]` line. `Goroutine N (...) created at:` blocks are
//! attached to the access section of goroutine `N`. The address is optional
//! and not retained.

mod extract;
mod locate;
mod parse;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use extract::{extract_scope_source, resolve_repo_path, RaceInfo, ScopedSource};
pub use locate::{
    ancestry_path, canonical_hash_input, compute_bug_hash, resolve_locations, FixLocation, Locations, Site,
};
pub use parse::{parse_race_report, split_reports};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("malformed race report: {0}")]
    Malformed(String),
    #[error("function {function} not found in {path}")]
    SiteNotFound { path: String, function: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessKind {
    Read,
    Write,
}

impl fmt::Display for AccessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AccessKind::Read => "Read",
            AccessKind::Write => "Write",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StackFrame {
    pub function_name: String,
    pub file_path: String,
    pub line: u32,
    /// Only set on the leaf frame of an access trace.
    pub access_kind: Option<AccessKind>,
}

impl StackFrame {
    pub fn new(function_name: impl Into<String>, file_path: impl Into<String>, line: u32) -> Result<Self, ReportError> {
        let frame = StackFrame {
            function_name: function_name.into(),
            file_path: file_path.into(),
            line,
            access_kind: None,
        };
        if frame.function_name.is_empty() || frame.file_path.is_empty() || frame.line == 0 {
            return Err(ReportError::Malformed(format!(
                "invalid frame {:?} at {:?}:{}",
                frame.function_name, frame.file_path, frame.line
            )));
        }
        Ok(frame)
    }

    /// Same function in the same file, ignoring line numbers.
    pub fn same_site(&self, other: &StackFrame) -> bool {
        self.function_name == other.function_name && self.file_path == other.file_path
    }
}

/// The detector only records one level of goroutine ancestry; we accept at
/// most this many creator levels.
pub const MAX_CREATOR_DEPTH: usize = 2;

/// A goroutine's stack (leaf first) and, when known, the stack of its parent
/// at the point where it was spawned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoroutineTrace {
    /// `None` for the main goroutine.
    pub goroutine_id: Option<u64>,
    pub frames: Vec<StackFrame>,
    pub creator: Option<Box<GoroutineTrace>>,
}

impl GoroutineTrace {
    pub fn new(
        goroutine_id: Option<u64>,
        frames: Vec<StackFrame>,
        creator: Option<GoroutineTrace>,
    ) -> Result<Self, ReportError> {
        if frames.is_empty() {
            return Err(ReportError::Malformed("goroutine trace with zero frames".into()));
        }
        let trace = GoroutineTrace {
            goroutine_id,
            frames,
            creator: creator.map(Box::new),
        };
        if trace.creator_depth() > MAX_CREATOR_DEPTH {
            return Err(ReportError::Malformed(format!(
                "goroutine ancestry deeper than {MAX_CREATOR_DEPTH} levels"
            )));
        }
        Ok(trace)
    }

    pub fn leaf(&self) -> &StackFrame {
        &self.frames[0]
    }

    pub fn creator_depth(&self) -> usize {
        let mut depth = 0;
        let mut cur = self.creator.as_deref();
        while let Some(c) = cur {
            depth += 1;
            cur = c.creator.as_deref();
        }
        depth
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaceReport {
    pub access_a: GoroutineTrace,
    pub access_b: GoroutineTrace,
    /// Input text as given to the parser.
    pub raw_text: String,
    /// Locations of the two racing accesses (the leaf frames).
    pub racy_lines: [(String, u32); 2],
}

impl RaceReport {
    pub fn new(access_a: GoroutineTrace, access_b: GoroutineTrace, raw_text: String) -> Result<Self, ReportError> {
        let writes = [&access_a, &access_b]
            .iter()
            .filter(|t| t.leaf().access_kind == Some(AccessKind::Write))
            .count();
        if writes == 0 {
            return Err(ReportError::Malformed("neither racing access is a write".into()));
        }
        let racy_lines = [
            (access_a.leaf().file_path.clone(), access_a.leaf().line),
            (access_b.leaf().file_path.clone(), access_b.leaf().line),
        ];
        Ok(RaceReport {
            access_a,
            access_b,
            raw_text,
            racy_lines,
        })
    }

    pub fn accesses(&self) -> [&GoroutineTrace; 2] {
        [&self.access_a, &self.access_b]
    }

    /// Renders the report in the canonical grammar. Addresses are zeroed and
    /// frame offsets dropped; parsing the result yields the same traces.
    pub fn render(&self) -> String {
        parse::render(self)
    }
}

/// SHA-256 hex digest identifying a race independent of line numbers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BugHash(String);

impl BugHash {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Accepts a 64 character lowercase hex string.
    pub fn from_hex(hex: &str) -> Option<BugHash> {
        (hex.len() == 64 && hex.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')))
            .then(|| BugHash(hex.to_string()))
    }
}

impl fmt::Display for BugHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocationKind {
    Test,
    Leaf,
    Lca,
}

impl LocationKind {
    /// Order in which fixes are attempted.
    pub const SEARCH_ORDER: [LocationKind; 3] = [LocationKind::Test, LocationKind::Leaf, LocationKind::Lca];
}

impl fmt::Display for LocationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LocationKind::Test => "test",
            LocationKind::Leaf => "leaf",
            LocationKind::Lca => "lca",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Function,
    File,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::Function => "function",
            Scope::File => "file",
        })
    }
}
