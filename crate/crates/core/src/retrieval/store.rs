use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use similar::{capture_diff_slices, Algorithm, DiffOp, TextDiff};

use super::embed::tokenize;
use super::{cosine_similarity, Embedder, Embedding, RetrievalError, Scalar};
use crate::skeleton::{identify_variables_of_interest, SkeletonError, SkeletonRequest, Skeletonizer};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Entry<T> {
    pub id: String,
    pub buggy: String,
    pub fixed: String,
    pub skeleton_text: String,
    pub vector: Embedding<T>,
    pub category: String,
    #[serde(default)]
    pub provenance: String,
}

/// Exact-scan example store. Entries keep ingest order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Store<T> {
    pub dim: usize,
    pub embedder_id: String,
    entries: Vec<Entry<T>>,
}

#[derive(Serialize)]
#[serde(bound = "T: Scalar")]
struct DocumentRef<'a, T> {
    schema_version: u64,
    #[serde(flatten)]
    store: &'a Store<T>,
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: Option<u64>,
}

/// Lines of `buggy` (1-based) touched by the buggy→fixed edit. Pure
/// insertions mark the old lines on either side of the insertion point.
pub fn changed_lines(buggy: &str, fixed: &str) -> BTreeSet<usize> {
    let old_len = buggy.lines().count();
    let diff = TextDiff::from_lines(buggy, fixed);
    let mut lines = BTreeSet::new();
    for op in diff.ops() {
        match *op {
            DiffOp::Equal { .. } => {}
            DiffOp::Delete {
                old_index, old_len: n, ..
            }
            | DiffOp::Replace {
                old_index, old_len: n, ..
            } => {
                lines.extend(old_index + 1..=old_index + n);
            }
            DiffOp::Insert { old_index, .. } => {
                if old_index > 0 {
                    lines.insert(old_index);
                }
                if old_index < old_len {
                    lines.insert(old_index + 1);
                }
            }
        }
    }
    lines
}

/// Variables a buggy→fixed edit is about: identifiers on the changed lines
/// that are themselves edited or sit right next to an edited token. Falls
/// back to every identifier on the changed lines.
pub fn fixed_variables(buggy: &str, fixed: &str) -> Result<BTreeSet<String>, SkeletonError> {
    let lines = changed_lines(buggy, fixed);
    let mut on_lines = BTreeSet::new();
    for line in &lines {
        on_lines.extend(identify_variables_of_interest(buggy, &BTreeSet::from([*line]))?);
    }
    let old = tokenize(buggy);
    let new = tokenize(fixed);
    let mut near = BTreeSet::new();
    for op in capture_diff_slices(Algorithm::Myers, &old, &new) {
        let (start, len) = match op {
            DiffOp::Equal { .. } => continue,
            DiffOp::Delete { old_index, old_len, .. } | DiffOp::Replace { old_index, old_len, .. } => {
                (old_index, old_len)
            }
            DiffOp::Insert { old_index, .. } => (old_index, 0),
        };
        let lo = start.saturating_sub(1);
        let hi = (start + len + 1).min(old.len());
        near.extend(old[lo..hi].iter().map(|t| t.to_string()));
    }
    let narrowed: BTreeSet<String> = on_lines.intersection(&near).cloned().collect();
    Ok(if narrowed.is_empty() { on_lines } else { narrowed })
}

impl<T: Scalar> Store<T> {
    pub fn new(dim: usize, embedder_id: impl Into<String>) -> Self {
        Store {
            dim,
            embedder_id: embedder_id.into(),
            entries: Vec::new(),
        }
    }

    pub fn for_embedder<E: Embedder<T> + ?Sized>(embedder: &E) -> Self {
        Store::new(embedder.dim(), embedder.id())
    }

    pub fn entries(&self) -> &[Entry<T>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Entry<T>> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Fails unless `embedder` is the one this store was built with.
    pub fn check_embedder<E: Embedder<T> + ?Sized>(&self, embedder: &E) -> Result<(), RetrievalError> {
        if embedder.dim() != self.dim {
            return Err(RetrievalError::DimensionMismatch {
                expected: self.dim,
                found: embedder.dim(),
            });
        }
        if embedder.id() != self.embedder_id {
            return Err(RetrievalError::EmbedderMismatch {
                store: self.embedder_id.clone(),
                embedder: embedder.id(),
            });
        }
        Ok(())
    }

    fn next_id(&self) -> String {
        let mut n = self.entries.len() + 1;
        loop {
            let id = format!("ex-{n:04}");
            if self.get(&id).is_none() {
                return id;
            }
            n += 1;
        }
    }

    /// Skeletonizes `buggy` around the variables the fix touches (or the
    /// variables on `racy_lines`, when given), embeds the skeleton and
    /// appends the entry.
    pub fn ingest_example<E: Embedder<T> + ?Sized>(
        &mut self,
        embedder: &E,
        buggy: &str,
        fixed: &str,
        category: &str,
        racy_lines: Option<BTreeSet<usize>>,
    ) -> Result<&Entry<T>, RetrievalError> {
        self.check_embedder(embedder)?;
        if buggy == fixed {
            return Err(RetrievalError::IdenticalPair);
        }
        let request = match racy_lines {
            Some(lines) => SkeletonRequest::new(buggy).with_lines(lines),
            None => SkeletonRequest::new(buggy).with_vars(fixed_variables(buggy, fixed)?),
        };
        let skeleton = Skeletonizer::default().skeletonize(&request)?;
        let vector = embedder.embed(&skeleton.text)?;
        let entry = Entry {
            id: self.next_id(),
            buggy: buggy.to_string(),
            fixed: fixed.to_string(),
            skeleton_text: skeleton.text,
            vector,
            category: category.to_string(),
            provenance: String::new(),
        };
        self.push_entry(entry)?;
        Ok(self.entries.last().expect("just pushed"))
    }

    /// Appends a prepared entry after checking the store invariants.
    pub fn push_entry(&mut self, entry: Entry<T>) -> Result<(), RetrievalError> {
        entry.vector.check()?;
        if entry.vector.dim() != self.dim {
            return Err(RetrievalError::DimensionMismatch {
                expected: self.dim,
                found: entry.vector.dim(),
            });
        }
        if entry.buggy == entry.fixed {
            return Err(RetrievalError::IdenticalPair);
        }
        if self.get(&entry.id).is_some() {
            return Err(RetrievalError::DuplicateId(entry.id));
        }
        self.entries.push(entry);
        Ok(())
    }

    /// Top `k` entries by cosine similarity, best first; equal scores keep
    /// ingest order. A query of the wrong dimension, or a zero query, matches
    /// nothing.
    pub fn query_nearest(&self, query: &Embedding<T>, k: usize) -> Vec<(&Entry<T>, T)> {
        let mut scored: Vec<(&Entry<T>, T)> = self
            .entries
            .iter()
            .filter_map(|e| cosine_similarity(query, &e.vector).ok().map(|s| (e, s)))
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
        scored.truncate(k);
        scored
    }

    pub fn to_json(&self) -> Result<String, RetrievalError> {
        let doc = DocumentRef {
            schema_version: SCHEMA_VERSION,
            store: self,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self, RetrievalError> {
        let probe: VersionProbe = serde_json::from_str(text)?;
        let found = probe.schema_version.unwrap_or(0);
        if found != SCHEMA_VERSION {
            return Err(RetrievalError::SchemaVersionMismatch {
                found,
                expected: SCHEMA_VERSION,
            });
        }
        let raw: Store<T> = serde_json::from_str(text)?;
        let mut store = Store::new(raw.dim, raw.embedder_id);
        for entry in raw.entries {
            store.push_entry(entry)?;
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        let io = |source| RetrievalError::Io {
            path: path.display().to_string(),
            source,
        };
        let text = self.to_json()?;
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        // Write then rename so a crash never leaves a truncated store.
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, text).map_err(io)?;
        std::fs::rename(&tmp, path).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let text = std::fs::read_to_string(path).map_err(|source| RetrievalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Store::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::HashedTrigramEmbedder;
    use proptest::prelude::*;

    const BUGGY: &str = include_str!("../../../../fixtures/service/buggy_function.go");
    const FIXED: &str = include_str!("../../../../fixtures/service/fixed_function.go");

    fn entry(id: &str, v: Vec<f64>) -> Entry<f64> {
        Entry {
            id: id.into(),
            buggy: format!("buggy {id}"),
            fixed: format!("fixed {id}"),
            skeleton_text: String::new(),
            vector: Embedding::new(v).unwrap(),
            category: "c".into(),
            provenance: String::new(),
        }
    }

    #[test]
    fn changed_lines_of_service_pair() {
        assert_eq!(changed_lines(BUGGY, FIXED), BTreeSet::from([10, 11]));
        assert_eq!(changed_lines("a\nb\n", "a\nx\nb\n"), BTreeSet::from([1, 2]));
        assert_eq!(changed_lines("a\nb\n", "a\nb\nc\n"), BTreeSet::from([2]));
        assert_eq!(
            fixed_variables(BUGGY, FIXED).unwrap(),
            BTreeSet::from(["err".to_string()])
        );
    }

    #[test]
    fn ingest_service_pair_names_err_racy_var() {
        let e = HashedTrigramEmbedder::default();
        let mut store = Store::<f64>::for_embedder(&e);
        let entry = store
            .ingest_example(&e, BUGGY, FIXED, "capture-by-reference", None)
            .unwrap();
        assert_eq!(entry.id, "ex-0001");
        assert!(entry.skeleton_text.contains("racyVar1 ="), "{}", entry.skeleton_text);
        assert!(!entry.skeleton_text.contains("err"));
        let again = store
            .ingest_example(&e, BUGGY, FIXED, "capture-by-reference", None)
            .unwrap()
            .id
            .clone();
        assert_eq!(again, "ex-0002");
        assert!(matches!(
            store.ingest_example(&e, "func f( {", "func f() {}", "x", None),
            Err(RetrievalError::Parse(_))
        ));
        assert!(matches!(
            store.ingest_example(&e, BUGGY, BUGGY, "x", None),
            Err(RetrievalError::IdenticalPair)
        ));
        let other = HashedTrigramEmbedder::new(64);
        assert!(matches!(
            store.ingest_example(&other, BUGGY, FIXED, "x", None),
            Err(RetrievalError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn self_query_and_empty_store() {
        let e = HashedTrigramEmbedder::default();
        let mut store = Store::<f64>::for_embedder(&e);
        let q: Embedding<f64> = e.embed("go f()").unwrap();
        assert!(store.query_nearest(&q, 3).is_empty());
        let v = store
            .ingest_example(&e, BUGGY, FIXED, "c", None)
            .unwrap()
            .vector
            .clone();
        let hits = store.query_nearest(&v, 1);
        assert_eq!(hits.len(), 1);
        assert!((hits[0].1 - 1.0).abs() < 1e-12);
        let wrong_dim = Embedding::new(vec![1.0; 3]).unwrap();
        assert!(store.query_nearest(&wrong_dim, 1).is_empty());
    }

    #[test]
    fn ties_keep_ingest_order() {
        let mut s = Store::new(2, "t");
        s.push_entry(entry("b", vec![1.0, 0.0])).unwrap();
        s.push_entry(entry("a", vec![2.0, 0.0])).unwrap();
        s.push_entry(entry("c", vec![0.0, 1.0])).unwrap();
        let q = Embedding::new(vec![1.0, 0.0]).unwrap();
        let ids: Vec<_> = s.query_nearest(&q, 5).iter().map(|(e, _)| e.id.as_str()).collect();
        assert_eq!(ids, ["b", "a", "c"]);
        assert!(matches!(
            s.push_entry(entry("a", vec![1.0, 1.0])),
            Err(RetrievalError::DuplicateId(_))
        ));
        assert!(matches!(
            s.push_entry(entry("z", vec![1.0])),
            Err(RetrievalError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("db/store.json");
        let mut s = Store::new(3, "t");
        for (i, v) in [[0.1, 0.2, 0.3], [-1.0, 0.5, 1e-17], [0.3333333333333333, 2.0, -7.25]]
            .iter()
            .enumerate()
        {
            s.push_entry(entry(&format!("e{i}"), v.to_vec())).unwrap();
        }
        s.save(&path).unwrap();
        assert_eq!(Store::<f64>::load(&path).unwrap(), s);

        let empty = Store::<f64>::new(256, "t");
        empty.save(&path).unwrap();
        let back = Store::<f64>::load(&path).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.dim, 256);

        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"schema_version\": 1", "\"schema_version\": 9");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(
            Store::<f64>::load(&path),
            Err(RetrievalError::SchemaVersionMismatch { found: 9, expected: 1 })
        ));
        assert!(matches!(
            Store::<f64>::load(&dir.path().join("missing.json")),
            Err(RetrievalError::Io { .. })
        ));
    }

    /// Independent ranking: score every entry, then pick best repeatedly,
    /// preferring the lower index on equal score.
    fn brute_force(entries: &[Vec<f64>], q: &[f64], k: usize) -> Vec<usize> {
        let cos = |a: &[f64], b: &[f64]| {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            (dot / (na * nb)).clamp(-1.0, 1.0)
        };
        let scores: Vec<f64> = entries.iter().map(|e| cos(e, q)).collect();
        let mut taken = vec![false; entries.len()];
        let mut out = Vec::new();
        for _ in 0..k.min(entries.len()) {
            let mut best: Option<usize> = None;
            for i in 0..entries.len() {
                if !taken[i] && best.is_none_or(|b| scores[i] > scores[b]) {
                    best = Some(i);
                }
            }
            taken[best.unwrap()] = true;
            out.push(best.unwrap());
        }
        out
    }

    proptest! {
        #[test]
        fn query_matches_linear_scan(
            vecs in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 0..12),
            q in prop::collection::vec(-1.0f64..1.0, 4),
            k in 1usize..6,
        ) {
            let vecs: Vec<Vec<f64>> = vecs.into_iter().filter(|v| v.iter().any(|x| *x != 0.0)).collect();
            prop_assume!(q.iter().any(|x| *x != 0.0));
            let mut s = Store::new(4, "t");
            for (i, v) in vecs.iter().enumerate() {
                s.push_entry(entry(&format!("e{i}"), v.clone())).unwrap();
            }
            let got: Vec<String> = s.query_nearest(&Embedding::new(q.clone()).unwrap(), k).iter().map(|(e, _)| e.id.clone()).collect();
            let want: Vec<String> = brute_force(&vecs, &q, k).into_iter().map(|i| format!("e{i}")).collect();
            prop_assert_eq!(got, want);
        }
    }
}
