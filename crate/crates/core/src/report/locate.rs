use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BugHash, GoroutineTrace, LocationKind, RaceReport, StackFrame};
use crate::golang::FunctionKey;

/// Canonical hash input: each goroutine's function names joined leaf-first by
/// `→`, the two strings sorted, then joined by `||`. Creator stacks, file
/// paths and line numbers are not part of it.
pub fn canonical_hash_input(report: &RaceReport) -> String {
    let mut stacks: Vec<String> = report
        .accesses()
        .iter()
        .map(|t| {
            t.frames
                .iter()
                .map(|f| f.function_name.as_str())
                .collect::<Vec<_>>()
                .join("→")
        })
        .collect();
    stacks.sort();
    stacks.join("||")
}

pub fn compute_bug_hash(report: &RaceReport) -> BugHash {
    let digest = Sha256::digest(canonical_hash_input(report).as_bytes());
    BugHash(hex::encode(digest))
}

/// One function a fix can target.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Site {
    /// Path as printed in the report.
    pub file_path: String,
    /// Runtime symbol as printed in the report.
    pub function_name: String,
}

impl Site {
    fn from_frame(frame: &StackFrame) -> Site {
        Site {
            file_path: frame.file_path.clone(),
            function_name: frame.function_name.clone(),
        }
    }

    /// The top-level declaration enclosing this symbol.
    pub fn function_key(&self) -> Option<FunctionKey> {
        FunctionKey::from_symbol(&self.function_name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixLocation {
    pub kind: LocationKind,
    /// One site, or two for a leaf location whose racing accesses sit in
    /// different functions.
    pub sites: Vec<Site>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Locations {
    pub test: Option<FixLocation>,
    pub leaf: Option<FixLocation>,
    pub lca: Option<FixLocation>,
}

impl Locations {
    pub fn get(&self, kind: LocationKind) -> Option<&FixLocation> {
        match kind {
            LocationKind::Test => self.test.as_ref(),
            LocationKind::Leaf => self.leaf.as_ref(),
            LocationKind::Lca => self.lca.as_ref(),
        }
    }

    /// Present locations in search order.
    pub fn iter(&self) -> impl Iterator<Item = &FixLocation> {
        LocationKind::SEARCH_ORDER.into_iter().filter_map(|k| self.get(k))
    }
}

/// Root-first frames of a goroutine including its creator chain.
pub fn ancestry_path(trace: &GoroutineTrace) -> Vec<&StackFrame> {
    let mut path = match trace.creator.as_deref() {
        Some(parent) => ancestry_path(parent),
        None => Vec::new(),
    };
    path.extend(trace.frames.iter().rev());
    path
}

pub fn resolve_locations(report: &RaceReport) -> Locations {
    Locations {
        test: find_test(report),
        leaf: Some(leaf_location(report)),
        lca: find_lca(report),
    }
}

fn leaf_location(report: &RaceReport) -> FixLocation {
    let mut sites: Vec<Site> = Vec::with_capacity(2);
    for trace in report.accesses() {
        let site = Site::from_frame(trace.leaf());
        let duplicate = sites.iter().any(|s| {
            s.file_path == site.file_path
                && match (s.function_key(), site.function_key()) {
                    (Some(a), Some(b)) => a == b,
                    _ => s.function_name == site.function_name,
                }
        });
        if !duplicate {
            sites.push(site);
        }
    }
    FixLocation {
        kind: LocationKind::Leaf,
        sites,
    }
}

fn is_test_frame(frame: &StackFrame) -> bool {
    frame.file_path.ends_with("_test.go")
        && FunctionKey::from_symbol(&frame.function_name)
            .is_some_and(|k| k.receiver.is_none() && k.name.starts_with("Test"))
}

/// The outermost `TestXxx` frame in `_test.go` along either goroutine's
/// ancestry; access A is searched first.
fn find_test(report: &RaceReport) -> Option<FixLocation> {
    report.accesses().into_iter().find_map(|trace| {
        ancestry_path(trace)
            .into_iter()
            .find(|f| is_test_frame(f))
            .map(|f| FixLocation {
                kind: LocationKind::Test,
                sites: vec![Site::from_frame(f)],
            })
    })
}

/// Deepest frame of A's ancestry (walking from the leaf towards the root)
/// that also occurs anywhere in B's ancestry. The detector truncates
/// ancestry, so the two root-first paths do not necessarily start at the
/// same frame and a plain common-prefix walk would miss shared callers.
fn find_lca(report: &RaceReport) -> Option<FixLocation> {
    let path_a = ancestry_path(&report.access_a);
    let path_b = ancestry_path(&report.access_b);
    path_a
        .iter()
        .rev()
        .find(|fa| path_b.iter().any(|fb| fb.same_site(fa)))
        .map(|f| FixLocation {
            kind: LocationKind::Lca,
            sites: vec![Site::from_frame(f)],
        })
}
