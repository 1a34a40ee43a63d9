//! Go source handling on top of the tree-sitter Go grammar.
//!
//! Everything that needs to look at Go code structurally (function lookup,
//! package clauses, response validation, slicing) goes through here so that
//! the grammar version is pinned in one place.

use std::fmt;

use serde::{Deserialize, Serialize};
use tree_sitter::{Node, Parser, Tree};

/// Source text that the Go grammar rejects.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("not valid Go source: syntax error at line {line}, column {column}")]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
}

/// Parses `text` without rejecting syntax errors.
pub fn parse_lenient(text: &str) -> Tree {
    let mut parser = Parser::new();
    parser
        .set_language(&tree_sitter_go::LANGUAGE.into())
        .expect("tree-sitter-go grammar is ABI compatible");
    parser
        .parse(text, None)
        .expect("parser has a language and no cancellation flag")
}

/// Parses `text`, failing on any ERROR or MISSING node.
pub fn parse(text: &str) -> Result<Tree, SyntaxError> {
    let tree = parse_lenient(text);
    if let Some(node) = first_error(tree.root_node()) {
        let pos = node.start_position();
        return Err(SyntaxError {
            line: pos.row + 1,
            column: pos.column + 1,
        });
    }
    Ok(tree)
}

fn first_error(node: Node<'_>) -> Option<Node<'_>> {
    if !node.has_error() {
        return None;
    }
    if node.is_error() || node.is_missing() {
        return Some(node);
    }
    let mut cursor = node.walk();
    let children: Vec<_> = node.children(&mut cursor).collect();
    children.into_iter().find_map(first_error).or(Some(node))
}

/// Text of a node.
pub fn node_text<'s>(node: Node<'_>, source: &'s str) -> &'s str {
    &source[node.byte_range()]
}

/// Identity of a top-level function or method: the receiver's base type
/// name (pointer and type parameters stripped) plus the declared name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FunctionKey {
    pub receiver: Option<String>,
    pub name: String,
}

impl FunctionKey {
    pub fn function(name: impl Into<String>) -> Self {
        FunctionKey {
            receiver: None,
            name: name.into(),
        }
    }

    pub fn method(receiver: impl Into<String>, name: impl Into<String>) -> Self {
        FunctionKey {
            receiver: Some(receiver.into()),
            name: name.into(),
        }
    }

    /// Maps a runtime symbol as printed in Go stack traces
    /// (`example.com/pkg.(*T).Method.func1`, `pkg.Fn.func2.3`,
    /// `pkg.T.Method`) to the top-level declaration that encloses it.
    /// Closure suffixes are dropped, so goroutine bodies map to the function
    /// that declares them.
    pub fn from_symbol(symbol: &str) -> Option<FunctionKey> {
        let symbol = strip_brackets(symbol.trim());
        let tail = match symbol.rfind('/') {
            Some(i) => &symbol[i + 1..],
            None => &symbol[..],
        };
        let (_, rest) = tail.split_once('.')?;
        let (receiver, rest) = if let Some(inner) = rest.strip_prefix('(') {
            let close = inner.find(')')?;
            let recv = inner[..close].trim_start_matches('*').to_string();
            let after = inner[close + 1..].strip_prefix('.')?;
            (Some(recv), after)
        } else {
            (None, rest)
        };
        let mut segments: Vec<&str> = rest.split('.').filter(|s| !s.is_empty()).collect();
        while segments.len() > 1 && is_closure_segment(segments[segments.len() - 1]) {
            segments.pop();
        }
        match (receiver, segments.as_slice()) {
            (Some(recv), [name, ..]) => Some(FunctionKey::method(recv, *name)),
            (None, [name]) => Some(FunctionKey::function(*name)),
            (None, [recv, name, ..]) => Some(FunctionKey::method(*recv, *name)),
            _ => None,
        }
    }
}

impl fmt::Display for FunctionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.receiver {
            Some(r) => write!(f, "({r}).{}", self.name),
            None => f.write_str(&self.name),
        }
    }
}

fn is_closure_segment(seg: &str) -> bool {
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    digits(seg)
        || seg.strip_prefix("func").is_some_and(digits)
        || seg.strip_prefix("gowrap").is_some_and(digits)
        || seg.strip_prefix("deferwrap").is_some_and(digits)
}

fn strip_brackets(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut depth = 0usize;
    for c in s.chars() {
        match c {
            '[' => depth += 1,
            ']' => depth = depth.saturating_sub(1),
            _ if depth == 0 => out.push(c),
            _ => {}
        }
    }
    out
}

/// Location of a top-level function declaration in a file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSpan {
    pub key: FunctionKey,
    /// Start of the attached doc comment block, if any.
    pub doc_start: Option<usize>,
    /// Start of the `func` keyword.
    pub decl_start: usize,
    pub end: usize,
    /// 1-based line of the `func` keyword.
    pub start_line: usize,
}

impl FunctionSpan {
    pub fn full_start(&self) -> usize {
        self.doc_start.unwrap_or(self.decl_start)
    }
}

/// All top-level function and method declarations, in source order.
pub fn top_level_functions(source: &str, tree: &Tree) -> Vec<FunctionSpan> {
    let root = tree.root_node();
    let mut cursor = root.walk();
    let children: Vec<Node<'_>> = root.children(&mut cursor).collect();
    let mut spans = Vec::new();
    for (idx, node) in children.iter().enumerate() {
        let key = match function_key(*node, source) {
            Some(k) => k,
            None => continue,
        };
        // Doc comments: a run of comment nodes ending on the line directly
        // above the declaration, each line-adjacent to the next.
        let mut doc_start = None;
        let mut next_row = node.start_position().row;
        for prev in children[..idx].iter().rev() {
            if prev.kind() != "comment" || prev.end_position().row + 1 != next_row {
                break;
            }
            doc_start = Some(prev.start_byte());
            next_row = prev.start_position().row;
        }
        spans.push(FunctionSpan {
            key,
            doc_start,
            decl_start: node.start_byte(),
            end: node.end_byte(),
            start_line: node.start_position().row + 1,
        });
    }
    spans
}

/// Key of a `function_declaration` / `method_declaration` node.
pub fn function_key(node: Node<'_>, source: &str) -> Option<FunctionKey> {
    let name = node.child_by_field_name("name")?;
    let name = node_text(name, source).to_string();
    match node.kind() {
        "function_declaration" => Some(FunctionKey::function(name)),
        "method_declaration" => {
            let receiver = node.child_by_field_name("receiver")?;
            let base = first_descendant(receiver, "type_identifier")?;
            Some(FunctionKey::method(node_text(base, source), name))
        }
        _ => None,
    }
}

fn first_descendant<'t>(node: Node<'t>, kind: &str) -> Option<Node<'t>> {
    if node.kind() == kind {
        return Some(node);
    }
    let mut cursor = node.walk();
    let children: Vec<_> = node.children(&mut cursor).collect();
    children.into_iter().find_map(|c| first_descendant(c, kind))
}

/// Package name from the `package` clause, if present.
pub fn package_name(source: &str, tree: &Tree) -> Option<String> {
    let root = tree.root_node();
    let mut cursor = root.walk();
    let clause = root.children(&mut cursor).find(|n| n.kind() == "package_clause")?;
    let ident = first_descendant(clause, "package_identifier")?;
    Some(node_text(ident, source).to_string())
}

/// Names bound by import declarations (explicit aliases or the last path
/// element). Dot and blank imports are skipped.
pub fn imported_names(source: &str, tree: &Tree) -> Vec<String> {
    let mut names = Vec::new();
    let root = tree.root_node();
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        if node.kind() == "import_spec" {
            if let Some(alias) = node.child_by_field_name("name") {
                let alias = node_text(alias, source);
                if alias != "_" && alias != "." {
                    names.push(alias.to_string());
                }
            } else if let Some(path) = node.child_by_field_name("path") {
                let path = node_text(path, source).trim_matches(|c| c == '"' || c == '`');
                if let Some(last) = path.rsplit('/').next() {
                    names.push(last.to_string());
                }
            }
            continue;
        }
        if matches!(node.kind(), "source_file" | "import_declaration" | "import_spec_list") {
            let mut cursor = node.walk();
            stack.extend(node.children(&mut cursor));
        }
    }
    names
}
