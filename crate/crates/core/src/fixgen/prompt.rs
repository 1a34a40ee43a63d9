use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::FixError;
use crate::golang;
use crate::report::{AccessKind, Scope, ScopedSource};

pub const SYSTEM_PROMPT: &str = "You are an expert in parallel computing and helping user fix data race in the golang programs. \
The user will provide you code delimited by the <code> </code> XML tag; you will try to fix the race. \
Your response should only contain the fixed code. Pay strong attention to the following instructions:
(1) Do not skip any code by saying `the rest of the code stays the same` or `... rest of test cases ...` or `// Test cases...`.
(2) Your response should be the entire revised code top to bottom, verbatim. Do not say any other thing.
(3) Do not wrap the code with ```go``` or ```<code>```.
(4) Absolutely, do not update or remove existing comments in the code.";

const TASK: &str = "Refactor the code within <code> </code> XML tags to fix data race in golang function.";
const EXAMPLE_INTRO: &str = "You will be given 1 example that fix data race in golang function.";
const TRUNCATION_MARK: &str = "\n// [example truncated]";

/// Marker line separating files when a prompt or response covers two.
pub const FILE_MARKER: &str = "// File: ";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Prompt {
    pub system_text: String,
    pub user_text: String,
    /// Set when the example pair was cut to fit the budget.
    pub truncated_example: bool,
}

impl Prompt {
    pub fn char_len(&self) -> usize {
        self.system_text.chars().count() + self.user_text.chars().count()
    }

    /// SHA-256 over both texts; identifies the prompt in the audit log.
    pub fn sha256(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.system_text.as_bytes());
        h.update([0u8]);
        h.update(self.user_text.as_bytes());
        hex::encode(h.finalize())
    }
}

/// One racing access, with its file path relative to the repository.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RacyAccess {
    pub file: String,
    pub line: usize,
    pub kind: AccessKind,
}

#[derive(Debug, Clone, Copy)]
pub struct ExamplePair<'a> {
    pub buggy: &'a str,
    pub fixed: &'a str,
}

#[derive(Debug, Clone)]
pub struct PromptInput<'a> {
    /// Code to fix; one or two extracts.
    pub sources: &'a [ScopedSource],
    pub accesses: &'a [RacyAccess],
    pub example: Option<ExamplePair<'a>>,
    /// Failure messages to feed back, oldest first.
    pub history: &'a [String],
    /// Upper bound on total prompt characters. Only the example is cut.
    pub budget: Option<usize>,
}

/// Code block sent to the model. Two extracts get `// File:` headers.
pub fn render_code(sources: &[ScopedSource]) -> String {
    match sources {
        [one] => one.text.trim_end().to_string(),
        many => many
            .iter()
            .map(|s| format!("{FILE_MARKER}{}\n{}", s.file_path, s.text.trim_end()))
            .collect::<Vec<_>>()
            .join("\n\n"),
    }
}

/// Line reference for one access: local to the snippet when it lies in a
/// single extract, otherwise `path:line`.
fn line_ref(sources: &[ScopedSource], access: &RacyAccess) -> String {
    if let [one] = sources {
        if one.file_path == access.file {
            if let Some(local) = one.local_line(access.line) {
                return local.to_string();
            }
        }
    }
    format!("{}:{}", access.file, access.line)
}

fn race_sentence(sources: &[ScopedSource], accesses: &[RacyAccess], code: &str) -> String {
    // Reads go first, matching the usual "read ... with ... write" order.
    let mut ordered: Vec<&RacyAccess> = accesses.iter().collect();
    ordered.sort_by_key(|a| a.kind == AccessKind::Write);
    let (first, second) = match ordered.as_slice() {
        [a, b, ..] => (*a, *b),
        [a] => (*a, *a),
        [] => {
            return format!(
                "The data race happens due to a memory conflict on a shared variable in <code>\n{code}\n</code>."
            )
        }
    };
    format!(
        "The data race happens due to a memory conflict on a shared variable {} on line ```{}``` with the same shared variable {} on line ```{}``` in <code>\n{code}\n</code>.",
        first.kind,
        line_ref(sources, first),
        second.kind.to_string().to_lowercase(),
        line_ref(sources, second),
    )
}

fn example_block(buggy: &str, fixed: &str) -> String {
    format!(
        "{EXAMPLE_INTRO}\n\nExample 0 (Code with data race):\n\n```\n{}\n```\n\nExample 0 (Code after data race):\n\n```\n{}\n```\n\n",
        buggy.trim_end(),
        fixed.trim_end()
    )
}

fn history_block(history: &[String]) -> String {
    if history.is_empty() {
        return String::new();
    }
    let mut s = String::from("\n\nPrevious attempts to fix this race failed with the following errors:");
    for msg in history {
        s.push_str("\n\n");
        s.push_str(msg);
    }
    s
}

fn cut(text: &str, chars: usize) -> String {
    text.chars().take(chars).collect()
}

pub fn build_prompt(input: &PromptInput<'_>) -> Prompt {
    let code = render_code(input.sources);
    let race = race_sentence(input.sources, input.accesses, &code);
    let history = history_block(input.history);
    let assemble = |example: &str| format!("{TASK} {example}{race}{history}");
    let Some(ex) = input.example else {
        return Prompt {
            system_text: SYSTEM_PROMPT.to_string(),
            user_text: format!("{TASK}\n\n{race}{history}"),
            truncated_example: false,
        };
    };
    let full = assemble(&example_block(ex.buggy, ex.fixed));
    let total = SYSTEM_PROMPT.chars().count() + full.chars().count();
    match input.budget {
        Some(budget) if total > budget => {
            let fixed_part = SYSTEM_PROMPT.chars().count()
                + assemble(&example_block("", "")).chars().count()
                + 2 * TRUNCATION_MARK.chars().count();
            let each = budget.saturating_sub(fixed_part) / 2;
            let buggy = format!("{}{TRUNCATION_MARK}", cut(ex.buggy, each));
            let fixed = format!("{}{TRUNCATION_MARK}", cut(ex.fixed, each));
            Prompt {
                system_text: SYSTEM_PROMPT.to_string(),
                user_text: assemble(&example_block(&buggy, &fixed)),
                truncated_example: true,
            }
        }
        _ => Prompt {
            system_text: SYSTEM_PROMPT.to_string(),
            user_text: full,
            truncated_example: false,
        },
    }
}

/// A piece of model output destined for one file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeUnit {
    /// From a `// File:` marker, when present.
    pub path: Option<String>,
    pub code: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub scope: Scope,
    pub units: Vec<CodeUnit>,
}

/// Drops code fences and `<code>` tags the model added despite the
/// instructions.
pub fn strip_wrappers(text: &str) -> String {
    let mut body = text.trim().to_string();
    if body.lines().any(|l| l.trim_start().starts_with("```")) {
        let mut inside = false;
        let mut kept = Vec::new();
        for line in body.lines() {
            if line.trim_start().starts_with("```") {
                inside = !inside;
                continue;
            }
            if inside {
                kept.push(line);
            }
        }
        body = kept.join("\n");
    }
    if let (Some(start), Some(end)) = (body.find("<code>"), body.rfind("</code>")) {
        if start < end {
            body = body[start + "<code>".len()..end].to_string();
        }
    }
    let mut out = body.trim_matches('\n').to_string();
    out.push('\n');
    out
}

fn split_units(code: &str) -> Vec<CodeUnit> {
    let mut units: Vec<CodeUnit> = Vec::new();
    let mut current = CodeUnit {
        path: None,
        code: String::new(),
    };
    for line in code.split_inclusive('\n') {
        if let Some(path) = line.trim_end().strip_prefix(FILE_MARKER) {
            if current.path.is_some() || !current.code.trim().is_empty() {
                units.push(current);
            }
            current = CodeUnit {
                path: Some(path.trim().to_string()),
                code: String::new(),
            };
        } else {
            current.code.push_str(line);
        }
    }
    units.push(current);
    for u in &mut units {
        u.code = format!("{}\n", u.code.trim_matches('\n'));
    }
    units
}

/// Extracts the code from a model response and checks that it parses as
/// the expected unit: function declarations at function scope, complete
/// files at file scope.
pub fn parse_model_response(text: &str, scope: Scope) -> Result<ParsedResponse, FixError> {
    let unparseable = |m: String| FixError::ResponseUnparseable(m);
    let code = strip_wrappers(text);
    if code.trim().is_empty() {
        return Err(unparseable("response contains no code".into()));
    }
    let units = split_units(&code);
    for unit in &units {
        let label = unit.path.as_deref().unwrap_or("response");
        match scope {
            Scope::Function => {
                let wrapped = format!("package p\n\n{}", unit.code);
                let tree = golang::parse(&wrapped).map_err(|e| unparseable(format!("{label}: {e}")))?;
                let root = tree.root_node();
                let mut cursor = root.walk();
                let mut functions = 0;
                for node in root.children(&mut cursor) {
                    match node.kind() {
                        "function_declaration" | "method_declaration" => functions += 1,
                        "package_clause" | "comment" => {}
                        other => return Err(unparseable(format!("{label}: expected only functions, found {other}"))),
                    }
                }
                if functions == 0 {
                    return Err(unparseable(format!("{label}: no function declaration")));
                }
            }
            Scope::File => {
                let tree = golang::parse(&unit.code).map_err(|e| unparseable(format!("{label}: {e}")))?;
                if golang::package_name(&unit.code, &tree).is_none() {
                    return Err(unparseable(format!("{label}: missing package clause")));
                }
            }
        }
    }
    Ok(ParsedResponse { scope, units })
}
