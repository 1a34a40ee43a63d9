//! Concurrency skeletons: a syntax-tree slice of a Go code item that keeps
//! concurrency constructs and statements touching the racy variables, and
//! canonically renames every other identifier.
//!
//! Slicing rules, applied to every statement (and every `case` clause):
//!
//! * the statement is kept when its own syntax, excluding nested statement
//!   lists, contains a concurrency construct or mentions a variable of
//!   interest;
//! * a statement with nested statement lists (loops, conditionals, `select`,
//!   closures) is also kept when any nested statement is kept; nested lists
//!   are filtered recursively;
//! * a dropped `var` declaration comes back when a kept statement refers to
//!   one of the names it declares;
//! * function signatures are always kept; `package`, `import` and comments
//!   never are.
//!
//! Renaming happens on the retained text in order of first occurrence:
//! variables of interest become `racyVarN`, types `typeN`, called or declared
//! functions `funcN`, everything else `vN`. Concurrency construct names
//! (`Go`, `Wait`, `Lock`, `sync`, `atomic`, ...), `nil`, `true`, `false`,
//! `iota`, `_` and literals are kept verbatim.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use tree_sitter::{Node, Tree};

use crate::golang::{self, node_text, SyntaxError};

#[derive(Debug, thiserror::Error)]
pub enum SkeletonError {
    #[error(transparent)]
    Parse(#[from] SyntaxError),
    #[error("racy line {line} is outside the source (1..={line_count})")]
    LineOutOfRange { line: usize, line_count: usize },
}

/// Names treated as concurrency constructs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConcurrencyConstructs {
    /// Method names whose calls count as constructs (`wg.Wait()`, `g.Go(..)`).
    pub methods: BTreeSet<String>,
    /// Package names whose members count as constructs (`sync.Mutex`,
    /// `atomic.AddInt64`).
    pub packages: BTreeSet<String>,
    /// Unqualified type names that count as constructs.
    pub types: BTreeSet<String>,
    /// Builtin functions that count as constructs.
    pub builtins: BTreeSet<String>,
}

impl Default for ConcurrencyConstructs {
    fn default() -> Self {
        let set = |names: &[&str]| names.iter().map(|s| s.to_string()).collect();
        ConcurrencyConstructs {
            methods: set(&[
                "Add", "Done", "Go", "Lock", "RLock", "RUnlock", "TryLock", "Unlock", "Wait",
            ]),
            packages: set(&["atomic", "errgroup", "sync"]),
            types: set(&["Cond", "Mutex", "Once", "RWMutex", "WaitGroup"]),
            builtins: set(&["close"]),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SkeletonRequest {
    pub source: String,
    /// 1-based lines of `source` holding the racing accesses.
    pub racy_lines: BTreeSet<usize>,
    pub extra_vars: BTreeSet<String>,
}

impl SkeletonRequest {
    pub fn new(source: impl Into<String>) -> Self {
        SkeletonRequest {
            source: source.into(),
            ..Default::default()
        }
    }

    pub fn with_lines(mut self, lines: impl IntoIterator<Item = usize>) -> Self {
        self.racy_lines.extend(lines);
        self
    }

    pub fn with_vars<S: Into<String>>(mut self, vars: impl IntoIterator<Item = S>) -> Self {
        self.extra_vars.extend(vars.into_iter().map(Into::into));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    pub text: String,
    /// Original identifier to canonical name. Injective.
    pub rename_map: BTreeMap<String, String>,
    /// 1-based lines of the original source with retained content.
    pub retained_lines: BTreeSet<usize>,
    /// Construct names that appear in `text` unrenamed.
    pub preserved_names: BTreeSet<String>,
}

impl Skeleton {
    /// Canonical names given to variables of interest.
    pub fn racy_vars(&self) -> BTreeSet<String> {
        self.rename_map
            .values()
            .filter(|v| v.starts_with("racyVar"))
            .cloned()
            .collect()
    }
}

/// Collapses whitespace runs to one space; used to compare skeletons.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Default)]
pub struct Skeletonizer {
    pub constructs: ConcurrencyConstructs,
}

pub fn skeletonize(req: &SkeletonRequest) -> Result<Skeleton, SkeletonError> {
    Skeletonizer::default().skeletonize(req)
}

pub fn identify_variables_of_interest(
    source: &str,
    racy_lines: &BTreeSet<usize>,
) -> Result<BTreeSet<String>, SkeletonError> {
    Skeletonizer::default().variables_of_interest(&SkeletonRequest {
        source: source.to_string(),
        racy_lines: racy_lines.clone(),
        extra_vars: BTreeSet::new(),
    })
}

impl Skeletonizer {
    pub fn new(constructs: ConcurrencyConstructs) -> Self {
        Skeletonizer { constructs }
    }

    /// Identifiers read or written on the racy lines, plus `extra_vars`.
    ///
    /// Both racing accesses touch the same memory, so with two or more racy
    /// lines only identifiers common to all of them are taken, narrowed to
    /// those assigned on some racy line when there are any (falling back to
    /// the union when nothing is shared). Called function names, package
    /// qualifiers and construct names are never variables of interest.
    pub fn variables_of_interest(&self, req: &SkeletonRequest) -> Result<BTreeSet<String>, SkeletonError> {
        let tree = self.parse_checked(req)?;
        Ok(self.voi_from_tree(req, &tree))
    }

    pub fn skeletonize(&self, req: &SkeletonRequest) -> Result<Skeleton, SkeletonError> {
        let tree = self.parse_checked(req)?;
        let voi = self.voi_from_tree(req, &tree);
        let slicer = Slicer {
            source: &req.source,
            constructs: &self.constructs,
            voi: &voi,
        };
        Ok(slicer.run(&tree))
    }

    fn parse_checked(&self, req: &SkeletonRequest) -> Result<Tree, SkeletonError> {
        let line_count = req.source.lines().count();
        if let Some(&line) = req.racy_lines.iter().find(|&&l| l == 0 || l > line_count) {
            return Err(SkeletonError::LineOutOfRange { line, line_count });
        }
        Ok(golang::parse(&req.source)?)
    }

    fn voi_from_tree(&self, req: &SkeletonRequest, tree: &Tree) -> BTreeSet<String> {
        let src = req.source.as_str();
        let packages: BTreeSet<String> = golang::imported_names(src, tree)
            .into_iter()
            .chain(self.constructs.packages.iter().cloned())
            .collect();
        let mut per_line: BTreeMap<usize, BTreeSet<String>> =
            req.racy_lines.iter().map(|&l| (l, BTreeSet::new())).collect();
        let mut written: BTreeSet<String> = BTreeSet::new();
        if !per_line.is_empty() {
            visit(tree.root_node(), &mut |node| {
                let line = node.start_position().row + 1;
                let Some(names) = per_line.get_mut(&line) else {
                    return;
                };
                if !matches!(node.kind(), "identifier" | "field_identifier") {
                    return;
                }
                let text = node_text(node, src);
                if text == "_" || is_call_target(node) || is_declared_function_name(node) {
                    return;
                }
                if is_selector_operand(node) && packages.contains(text) {
                    return;
                }
                if node.kind() == "field_identifier"
                    && selector_operand_text(node, src).is_some_and(|p| packages.contains(p))
                {
                    return;
                }
                if is_written(node) {
                    written.insert(text.to_string());
                }
                names.insert(text.to_string());
            });
        }
        let non_empty: Vec<&BTreeSet<String>> = per_line.values().filter(|s| !s.is_empty()).collect();
        let mut voi: BTreeSet<String> = match non_empty.as_slice() {
            [] => BTreeSet::new(),
            [only] => (*only).clone(),
            [first, rest @ ..] => {
                let common: BTreeSet<String> = first
                    .iter()
                    .filter(|n| rest.iter().all(|s| s.contains(*n)))
                    .cloned()
                    .collect();
                // A race needs a write, so shared names that are assigned on
                // one of the lines beat names that are only read.
                let assigned: BTreeSet<String> = common.intersection(&written).cloned().collect();
                if !assigned.is_empty() {
                    assigned
                } else if common.is_empty() {
                    non_empty.iter().flat_map(|s| s.iter().cloned()).collect()
                } else {
                    common
                }
            }
        };
        voi.extend(req.extra_vars.iter().cloned());
        voi
    }
}

fn visit<'t>(node: Node<'t>, f: &mut impl FnMut(Node<'t>)) {
    f(node);
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        visit(child, f);
    }
}

/// True when `node` is (part of) the target of an assignment, short
/// variable declaration, increment or decrement.
fn is_written(node: Node<'_>) -> bool {
    let mut cur = node;
    while let Some(parent) = cur.parent() {
        match parent.kind() {
            "selector_expression" | "index_expression" | "parenthesized_expression" | "expression_list" => {
                if parent.kind() == "index_expression" && parent.child_by_field_name("index") == Some(cur) {
                    return false;
                }
                cur = parent;
            }
            "unary_expression" if parent.child_by_field_name("operator").is_some_and(|o| o.kind() == "*") => {
                cur = parent
            }
            "assignment_statement" | "short_var_declaration" | "range_clause" => {
                return parent.child_by_field_name("left") == Some(cur);
            }
            "inc_statement" | "dec_statement" => return true,
            _ => return false,
        }
    }
    false
}

fn is_call_target(node: Node<'_>) -> bool {
    let Some(parent) = node.parent() else {
        return false;
    };
    match parent.kind() {
        "call_expression" => parent.child_by_field_name("function") == Some(node),
        "selector_expression" => {
            parent.child_by_field_name("field") == Some(node)
                && parent.parent().is_some_and(|gp| {
                    gp.kind() == "call_expression" && gp.child_by_field_name("function") == Some(parent)
                })
        }
        _ => false,
    }
}

fn is_declared_function_name(node: Node<'_>) -> bool {
    node.parent().is_some_and(|p| {
        matches!(p.kind(), "function_declaration" | "method_declaration") && p.child_by_field_name("name") == Some(node)
    })
}

fn is_selector_operand(node: Node<'_>) -> bool {
    node.parent()
        .is_some_and(|p| p.kind() == "selector_expression" && p.child_by_field_name("operand") == Some(node))
}

/// For the field of `pkg.Field`, the operand text when it is a bare identifier.
fn selector_operand_text<'s>(node: Node<'_>, source: &'s str) -> Option<&'s str> {
    let parent = node.parent()?;
    if parent.kind() != "selector_expression" || parent.child_by_field_name("field") != Some(node) {
        return None;
    }
    let operand = parent.child_by_field_name("operand")?;
    (operand.kind() == "identifier").then(|| node_text(operand, source))
}

fn is_case_clause(kind: &str) -> bool {
    matches!(
        kind,
        "expression_case" | "default_case" | "type_case" | "communication_case"
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NameClass {
    Keep,
    Racy,
    Var,
    Type,
    Func,
}

struct Slicer<'a> {
    source: &'a str,
    constructs: &'a ConcurrencyConstructs,
    voi: &'a BTreeSet<String>,
}

impl<'a> Slicer<'a> {
    fn text(&self, node: Node<'_>) -> &'a str {
        node_text(node, self.source)
    }

    fn is_construct(&self, node: Node<'_>) -> bool {
        let c = self.constructs;
        match node.kind() {
            "go_statement" | "send_statement" | "select_statement" | "channel_type" => true,
            "unary_expression" => node
                .child_by_field_name("operator")
                .is_some_and(|op| self.text(op) == "<-"),
            "call_expression" => match node.child_by_field_name("function") {
                Some(f) if f.kind() == "identifier" => c.builtins.contains(self.text(f)),
                Some(f) if f.kind() == "selector_expression" => f
                    .child_by_field_name("field")
                    .is_some_and(|field| c.methods.contains(self.text(field))),
                _ => false,
            },
            "selector_expression" => node
                .child_by_field_name("operand")
                .is_some_and(|op| op.kind() == "identifier" && c.packages.contains(self.text(op))),
            "qualified_type" => node
                .child_by_field_name("package")
                .is_some_and(|p| c.packages.contains(self.text(p))),
            "type_identifier" => c.types.contains(self.text(node)),
            _ => false,
        }
    }

    fn mentions_voi(&self, node: Node<'_>) -> bool {
        matches!(node.kind(), "identifier" | "field_identifier") && self.voi.contains(self.text(node))
    }

    /// Filters one statement or case clause. Returns whether it is kept;
    /// dropped descendants are recorded in `dropped`.
    fn filter_unit(
        &self,
        unit: Node<'_>,
        dropped: &mut Vec<Range<usize>>,
        drop_nodes: &mut Vec<(Range<usize>, Option<usize>)>,
    ) -> bool {
        let mut header_relevant = self.is_construct(unit) || self.mentions_voi(unit);
        let mut bodies = Vec::new();
        let mut cases = Vec::new();
        let mut stack = vec![unit];
        while let Some(n) = stack.pop() {
            let mut cursor = n.walk();
            for child in n.children(&mut cursor) {
                if child.kind() == "statement_list" {
                    bodies.push(child);
                } else if is_case_clause(child.kind()) {
                    cases.push(child);
                } else {
                    header_relevant |= self.is_construct(child) || self.mentions_voi(child);
                    stack.push(child);
                }
            }
        }
        let mut nested_kept = false;
        for body in bodies {
            nested_kept |= self.filter_list(body, dropped, drop_nodes);
        }
        for case in cases {
            if self.filter_unit(case, dropped, drop_nodes) {
                nested_kept = true;
            } else {
                dropped.push(self.unit_range(case));
            }
        }
        header_relevant || nested_kept
    }

    /// Filters the statements of a list; returns whether any is kept.
    fn filter_list(
        &self,
        list: Node<'_>,
        dropped: &mut Vec<Range<usize>>,
        drop_nodes: &mut Vec<(Range<usize>, Option<usize>)>,
    ) -> bool {
        let mut any = false;
        let mut cursor = list.walk();
        let stmts: Vec<Node<'_>> = list
            .named_children(&mut cursor)
            .filter(|n| n.kind() != "comment")
            .collect();
        for stmt in stmts {
            if self.filter_unit(stmt, dropped, drop_nodes) {
                any = true;
            } else {
                let range = self.unit_range(stmt);
                drop_nodes.push((range.clone(), (stmt.kind() == "var_declaration").then_some(stmt.id())));
                dropped.push(range);
            }
        }
        any
    }

    /// Node range plus a directly following `;` on the same line.
    fn unit_range(&self, node: Node<'_>) -> Range<usize> {
        let bytes = self.source.as_bytes();
        let mut end = node.end_byte();
        let mut i = end;
        while i < bytes.len() && (bytes[i] == b' ' || bytes[i] == b'\t') {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b';' {
            end = i + 1;
        }
        node.start_byte()..end
    }

    fn run(&self, tree: &Tree) -> Skeleton {
        let root = tree.root_node();
        let mut dropped: Vec<Range<usize>> = Vec::new();
        // Dropped statements, tagged with their node id when they are `var`
        // declarations that may come back.
        let mut drop_nodes: Vec<(Range<usize>, Option<usize>)> = Vec::new();
        let mut var_decls: Vec<Node<'_>> = Vec::new();

        let mut cursor = root.walk();
        for item in root.named_children(&mut cursor) {
            match item.kind() {
                "package_clause" | "import_declaration" | "comment" => dropped.push(item.byte_range()),
                "function_declaration" | "method_declaration" => {
                    if let Some(body) = item.child_by_field_name("body") {
                        let mut bc = body.walk();
                        let lists: Vec<_> = body
                            .named_children(&mut bc)
                            .filter(|n| n.kind() == "statement_list")
                            .collect();
                        for list in lists {
                            self.filter_list(list, &mut dropped, &mut drop_nodes);
                        }
                    }
                }
                _ => {
                    if !self.filter_unit(item, &mut dropped, &mut drop_nodes) {
                        let range = self.unit_range(item);
                        drop_nodes.push((range.clone(), (item.kind() == "var_declaration").then_some(item.id())));
                        dropped.push(range);
                    }
                }
            }
        }
        visit(root, &mut |n| {
            if n.kind() == "var_declaration" {
                var_decls.push(n);
            }
        });

        // Bring back `var` declarations of names used by retained code.
        loop {
            let deletions = merge(dropped.clone());
            let mut used = BTreeSet::new();
            visit(root, &mut |n| {
                if n.kind() == "identifier" && !covered(&deletions, n.byte_range()) {
                    used.insert(self.text(n));
                }
            });
            let mut restored = false;
            for decl in &var_decls {
                let Some(pos) = drop_nodes.iter().position(|(_, id)| *id == Some(decl.id())) else {
                    continue;
                };
                let (range, _) = drop_nodes[pos].clone();
                // Only statements dropped on their own; a declaration inside
                // another dropped statement stays dropped with it.
                let outer = merge(dropped.iter().filter(|r| **r != range).cloned().collect());
                if covered(&outer, range.clone()) {
                    continue;
                }
                let mut declares_used = false;
                visit(*decl, &mut |n| {
                    if n.kind() == "identifier"
                        && n.parent().is_some_and(|p| p.kind() == "var_spec" && is_spec_name(p, n))
                        && used.contains(self.text(n))
                    {
                        declares_used = true;
                    }
                });
                if declares_used {
                    drop_nodes.remove(pos);
                    if let Some(i) = dropped.iter().position(|r| *r == range) {
                        dropped.remove(i);
                    }
                    restored = true;
                }
            }
            if !restored {
                break;
            }
        }

        // Comments inside retained code.
        visit(root, &mut |n| {
            if n.kind() == "comment" {
                dropped.push(n.byte_range());
            }
        });
        let deletions = merge(dropped);
        self.render(root, &deletions)
    }

    fn classify(&self, node: Node<'_>) -> NameClass {
        let text = self.text(node);
        let c = self.constructs;
        if text == "_" {
            return NameClass::Keep;
        }
        let under_construct_pkg = |n: Node<'_>| {
            n.parent().is_some_and(|p| {
                p.kind() == "qualified_type"
                    && p.child_by_field_name("package")
                        .is_some_and(|pkg| c.packages.contains(self.text(pkg)))
            })
        };
        match node.kind() {
            "type_identifier" => {
                if c.types.contains(text) || under_construct_pkg(node) {
                    NameClass::Keep
                } else {
                    NameClass::Type
                }
            }
            "package_identifier" => {
                if c.packages.contains(text) {
                    NameClass::Keep
                } else {
                    NameClass::Var
                }
            }
            "identifier" => {
                if self.voi.contains(text) {
                    NameClass::Racy
                } else if (is_selector_operand(node) && c.packages.contains(text))
                    || (is_call_target(node) && c.builtins.contains(text))
                {
                    NameClass::Keep
                } else if is_call_target(node) || is_declared_function_name(node) {
                    NameClass::Func
                } else {
                    NameClass::Var
                }
            }
            "field_identifier" => {
                if selector_operand_text(node, self.source).is_some_and(|p| c.packages.contains(p)) {
                    NameClass::Keep
                } else if self.voi.contains(text) {
                    NameClass::Racy
                } else if is_call_target(node) && c.methods.contains(text) {
                    NameClass::Keep
                } else if is_call_target(node) || is_declared_function_name(node) {
                    NameClass::Func
                } else {
                    NameClass::Var
                }
            }
            _ => NameClass::Var,
        }
    }

    fn render(&self, root: Node<'_>, deletions: &[Range<usize>]) -> Skeleton {
        let mut rename_map: BTreeMap<String, String> = BTreeMap::new();
        let mut preserved = BTreeSet::new();
        let mut counters = [0usize; 4];
        let mut edits: Vec<(Range<usize>, String)> = deletions.iter().map(|r| (r.clone(), String::new())).collect();

        visit(root, &mut |n| {
            if !matches!(
                n.kind(),
                "identifier" | "field_identifier" | "type_identifier" | "package_identifier" | "label_name"
            ) || covered(deletions, n.byte_range())
            {
                return;
            }
            let text = self.text(n);
            let class = self.classify(n);
            if class == NameClass::Keep {
                if text != "_" {
                    preserved.insert(text.to_string());
                }
                return;
            }
            let canonical = rename_map
                .entry(text.to_string())
                .or_insert_with(|| {
                    let (slot, prefix) = match class {
                        NameClass::Racy => (0, "racyVar"),
                        NameClass::Var => (1, "v"),
                        NameClass::Type => (2, "type"),
                        NameClass::Func => (3, "func"),
                        NameClass::Keep => unreachable!(),
                    };
                    counters[slot] += 1;
                    format!("{prefix}{}", counters[slot])
                })
                .clone();
            edits.push((n.byte_range(), canonical));
        });
        edits.sort_by_key(|(r, _)| r.start);

        let mut out = String::with_capacity(self.source.len());
        let mut pos = 0;
        for (range, replacement) in &edits {
            if range.start < pos {
                continue;
            }
            out.push_str(&self.source[pos..range.start]);
            out.push_str(replacement);
            pos = range.end;
        }
        out.push_str(&self.source[pos..]);

        let mut text = String::new();
        for line in out.lines().map(str::trim_end).filter(|l| !l.trim().is_empty()) {
            text.push_str(line);
            text.push('\n');
        }

        let mut retained_lines = BTreeSet::new();
        let mut line = 1;
        let mut del = deletions.iter().peekable();
        for (idx, b) in self.source.bytes().enumerate() {
            while del.peek().is_some_and(|r| r.end <= idx) {
                del.next();
            }
            if b == b'\n' {
                line += 1;
                continue;
            }
            let deleted = del.peek().is_some_and(|r| r.start <= idx);
            if !deleted && !b.is_ascii_whitespace() {
                retained_lines.insert(line);
            }
        }

        Skeleton {
            text,
            rename_map,
            retained_lines,
            preserved_names: preserved,
        }
    }
}

fn is_spec_name(spec: Node<'_>, ident: Node<'_>) -> bool {
    let mut cursor = spec.walk();
    let names: Vec<_> = spec.children_by_field_name("name", &mut cursor).collect();
    names.contains(&ident)
}

fn merge(mut ranges: Vec<Range<usize>>) -> Vec<Range<usize>> {
    ranges.sort_by_key(|r| (r.start, std::cmp::Reverse(r.end)));
    let mut out: Vec<Range<usize>> = Vec::with_capacity(ranges.len());
    for r in ranges {
        match out.last_mut() {
            Some(last) if r.start <= last.end => last.end = last.end.max(r.end),
            _ => out.push(r),
        }
    }
    out
}

fn covered(merged: &[Range<usize>], r: Range<usize>) -> bool {
    let idx = merged.partition_point(|m| m.end <= r.start);
    merged.get(idx).is_some_and(|m| m.start <= r.start && r.end <= m.end)
}

#[cfg(test)]
mod tests {
    use super::*;

    const STORE_DATA: &str = include_str!("../tests/fixtures/skeleton/process_store_data.go");
    const STORE_DATA_SKELETON: &str = include_str!("../tests/fixtures/skeleton/process_store_data.skeleton");

    fn store_data() -> SkeletonRequest {
        SkeletonRequest::new(STORE_DATA).with_lines([16, 21])
    }

    #[test]
    fn store_data_variables_of_interest() {
        let voi = Skeletonizer::default().variables_of_interest(&store_data()).unwrap();
        assert_eq!(voi, BTreeSet::from(["err".to_string()]));
    }

    #[test]
    fn store_data_matches_golden() {
        let sk = skeletonize(&store_data()).unwrap();
        assert_eq!(sk.text, STORE_DATA_SKELETON, "\n{}", sk.text);
        assert_eq!(sk.rename_map["err"], "racyVar1");
        assert_eq!(sk.rename_map["group"], "v7");
        assert!(!sk.rename_map.contains_key("flipr"));
        assert!(!sk.retained_lines.contains(&12));
        assert!(sk.retained_lines.contains(&9) && sk.retained_lines.contains(&25));
    }

    #[test]
    fn all_identifiers_on_a_single_racy_line() {
        let src = "func f() {\n\tx[i] = y\n}\n";
        let voi = identify_variables_of_interest(src, &BTreeSet::from([2])).unwrap();
        assert_eq!(voi, BTreeSet::from(["i".into(), "x".into(), "y".into()]));
    }

    #[test]
    fn extra_vars_pass_through() {
        let req = SkeletonRequest::new("func f() {\n\tlimit := 3\n\t_ = limit\n}\n").with_vars(["limit"]);
        let voi = Skeletonizer::default().variables_of_interest(&req).unwrap();
        assert_eq!(voi, BTreeSet::from(["limit".to_string()]));
    }

    #[test]
    fn lone_goroutine_launch() {
        let sk = skeletonize(&SkeletonRequest::new(
            "func run(n int) {\n\tx := n * 2\n\tgo f()\n\tprintln(x)\n}\n",
        ))
        .unwrap();
        assert_eq!(sk.text, "func func1(v1 type1) {\n\tgo func2()\n}\n");
    }

    #[test]
    fn straight_line_code_is_fully_elided() {
        let sk = skeletonize(&SkeletonRequest::new(
            "func add(a, b int) int {\n\tc := a + b\n\treturn c\n}\n",
        ))
        .unwrap();
        assert_eq!(sk.text, "func func1(v1, v2 type1) type1 {\n}\n");
    }

    #[test]
    fn out_of_range_lines_are_rejected() {
        let err = skeletonize(&SkeletonRequest::new("func f() {}\n").with_lines([3])).unwrap_err();
        assert!(matches!(err, SkeletonError::LineOutOfRange { line: 3, line_count: 1 }));
        assert!(matches!(
            skeletonize(&SkeletonRequest::new("func f( {")),
            Err(SkeletonError::Parse(_))
        ));
    }

    #[test]
    fn comment_only_difference_vanishes() {
        let a = skeletonize(&store_data()).unwrap();
        let commented = STORE_DATA.replace(
            "// Optional documents behind a feature flag.",
            "// changed wording here",
        );
        let b = skeletonize(&SkeletonRequest::new(commented).with_lines([16, 21])).unwrap();
        assert_eq!(a.text, b.text);
    }

    #[test]
    fn select_and_channels_are_retained() {
        let src = "func loop(ch chan int, done chan struct{}) {\n\tcount := 0\n\tfor {\n\t\tselect {\n\t\tcase v := <-ch:\n\t\t\tcount += v\n\t\tcase <-done:\n\t\t\treturn\n\t\tdefault:\n\t\t\tlog(count)\n\t\t}\n\t}\n}\n";
        let sk = skeletonize(&SkeletonRequest::new(src)).unwrap();
        assert!(sk.text.contains("select {"));
        assert!(sk.text.contains("case v3 := <-v1:"));
        assert!(sk.text.contains("case <-v2:"));
        assert!(!sk.text.contains("default"), "{}", sk.text);
        assert!(sk.text.contains("for {"));
    }

    #[test]
    fn sync_members_are_preserved() {
        let src = "package p\n\nimport \"sync\"\n\ntype S struct {\n\tmu sync.Mutex\n\tn int\n}\n\nfunc (s *S) Inc() {\n\ts.mu.Lock()\n\tdefer s.mu.Unlock()\n\ts.n++\n}\n";
        let sk = skeletonize(&SkeletonRequest::new(src).with_lines([13])).unwrap();
        assert!(sk.text.contains("sync.Mutex"), "{}", sk.text);
        assert!(sk.text.contains(".Lock()") && sk.text.contains(".Unlock()"));
        assert!(!sk.text.contains("package"));
        assert_eq!(sk.rename_map["n"], "racyVar1");
        assert_eq!(sk.rename_map["s"], "racyVar2");
        assert!(sk.preserved_names.contains("Lock"));
    }
}
