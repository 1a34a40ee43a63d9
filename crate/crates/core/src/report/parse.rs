use std::collections::HashMap;
use std::fmt::Write as _;

use super::{AccessKind, GoroutineTrace, RaceReport, ReportError, StackFrame};

const HEADER: &str = "WARNING: DATA RACE";
const SEPARATOR: &str = "==================";

struct AccessSection {
    kind: AccessKind,
    goroutine: Option<u64>,
    frames: Vec<StackFrame>,
}

enum Block {
    Access(usize),
    Creator(u64),
}

/// Parses a single race report.
pub fn parse_race_report(text: &str) -> Result<RaceReport, ReportError> {
    let lines: Vec<&str> = text.lines().collect();
    let start = lines
        .iter()
        .position(|l| l.trim() == HEADER)
        .ok_or_else(|| ReportError::Malformed(format!("missing {HEADER:?} line")))?;

    let mut sections: Vec<AccessSection> = Vec::new();
    let mut creators: HashMap<u64, Vec<StackFrame>> = HashMap::new();
    let mut current: Option<Block> = None;

    let mut i = start + 1;
    while i < lines.len() {
        let line = lines[i].trim();
        i += 1;
        if line.is_empty() {
            continue;
        }
        if line.starts_with(SEPARATOR) || line == HEADER || line.starts_with("Found ") || line.starts_with("--- FAIL") {
            break;
        }
        if let Some((kind, goroutine)) = parse_access_header(line) {
            sections.push(AccessSection {
                kind,
                goroutine,
                frames: Vec::new(),
            });
            current = Some(Block::Access(sections.len() - 1));
            continue;
        }
        if let Some(id) = parse_creator_header(line) {
            creators.entry(id).or_default();
            current = Some(Block::Creator(id));
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            // e.g. "[failed to restore the stack]"
            continue;
        }
        let Some(block) = &current else {
            return Err(ReportError::Malformed(format!(
                "unexpected line before any section: {line:?}"
            )));
        };
        let location = lines.get(i).map(|l| l.trim()).unwrap_or("");
        let frame = parse_frame(line, location)?;
        i += 1;
        match block {
            Block::Access(idx) => sections[*idx].frames.push(frame),
            Block::Creator(id) => creators.entry(*id).or_default().push(frame),
        }
    }

    if sections.len() != 2 {
        return Err(ReportError::Malformed(format!(
            "expected exactly two racing-access sections, found {}",
            sections.len()
        )));
    }
    let mut traces = Vec::with_capacity(2);
    for section in sections {
        let AccessSection {
            kind,
            goroutine,
            mut frames,
        } = section;
        if frames.is_empty() {
            return Err(ReportError::Malformed("access section with zero frames".into()));
        }
        frames[0].access_kind = Some(kind);
        let creator = match goroutine.and_then(|g| creators.get(&g)) {
            Some(parent) if !parent.is_empty() => Some(GoroutineTrace::new(None, parent.clone(), None)?),
            Some(_) => return Err(ReportError::Malformed("creator block with zero frames".into())),
            None => None,
        };
        traces.push(GoroutineTrace::new(goroutine, frames, creator)?);
    }
    let access_b = traces.pop().expect("two traces");
    let access_a = traces.pop().expect("two traces");
    RaceReport::new(access_a, access_b, text.to_string())
}

/// Splits tool output (e.g. `go test -race`) into individual report texts.
/// Each block runs from its `WARNING: DATA RACE` line to the next separator,
/// the next header or end of input.
pub fn split_reports(output: &str) -> Vec<String> {
    let mut reports = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in output.lines() {
        let trimmed = line.trim();
        if trimmed == HEADER {
            if let Some(block) = current.take() {
                reports.push(block.join("\n"));
            }
            current = Some(vec![line]);
        } else if let Some(block) = current.as_mut() {
            if trimmed.starts_with(SEPARATOR) {
                reports.push(block.join("\n"));
                current = None;
            } else {
                block.push(line);
            }
        }
    }
    if let Some(block) = current {
        reports.push(block.join("\n"));
    }
    reports
}

fn parse_access_header(line: &str) -> Option<(AccessKind, Option<u64>)> {
    let body = line.strip_suffix(':')?;
    let (lhs, who) = body.rsplit_once(" by ")?;
    let mut words = lhs.split_whitespace().peekable();
    if words.peek().is_some_and(|w| w.eq_ignore_ascii_case("previous")) {
        words.next();
    }
    if words.peek().is_some_and(|w| w.eq_ignore_ascii_case("atomic")) {
        words.next();
    }
    let kind = match words.next()?.to_ascii_lowercase().as_str() {
        "read" => AccessKind::Read,
        "write" => AccessKind::Write,
        _ => return None,
    };
    match (words.next(), words.next(), words.next()) {
        (None, _, _) => {}
        (Some("at"), Some(_addr), None) => {}
        _ => return None,
    }
    let goroutine = if who == "main goroutine" {
        None
    } else {
        Some(who.strip_prefix("goroutine ")?.trim().parse().ok()?)
    };
    Some((kind, goroutine))
}

fn parse_creator_header(line: &str) -> Option<u64> {
    let rest = line.strip_prefix("Goroutine ")?;
    let rest = rest.strip_suffix("created at:")?.trim_end();
    let (id, state) = rest.split_once(' ')?;
    if !(state.starts_with('(') && state.ends_with(')')) {
        return None;
    }
    id.parse().ok()
}

fn parse_frame(func_line: &str, location: &str) -> Result<StackFrame, ReportError> {
    let function = strip_call_args(func_line)
        .ok_or_else(|| ReportError::Malformed(format!("unparseable frame line {func_line:?}")))?;
    let location = location.split(" +0x").next().unwrap_or("").trim();
    let (path, line) = location
        .rsplit_once(':')
        .ok_or_else(|| ReportError::Malformed(format!("frame {function:?} lacks a path:line location")))?;
    let line: u32 = line
        .parse()
        .map_err(|_| ReportError::Malformed(format!("bad line number in {location:?}")))?;
    StackFrame::new(function, path, line)
}

/// `pkg.(*T).M(0xc0000, 0x1)` -> `pkg.(*T).M`. The argument list is the
/// parenthesised group that closes the line.
fn strip_call_args(line: &str) -> Option<&str> {
    let line = line.trim();
    if !line.ends_with(')') {
        return None;
    }
    let mut depth = 0i32;
    for (idx, c) in line.char_indices().rev() {
        match c {
            ')' => depth += 1,
            '(' => {
                depth -= 1;
                if depth == 0 {
                    let name = &line[..idx];
                    return (!name.is_empty() && !name.contains(char::is_whitespace)).then_some(name);
                }
            }
            _ => {}
        }
    }
    None
}

pub(super) fn render(report: &RaceReport) -> String {
    let mut out = String::new();
    out.push_str(SEPARATOR);
    out.push('\n');
    out.push_str(HEADER);
    out.push('\n');
    for (idx, trace) in report.accesses().into_iter().enumerate() {
        if idx > 0 {
            out.push('\n');
        }
        let kind = trace.leaf().access_kind.unwrap_or(AccessKind::Read);
        let kind = match (idx, kind) {
            (0, k) => k.to_string(),
            (_, AccessKind::Read) => "Previous read".to_string(),
            (_, AccessKind::Write) => "Previous write".to_string(),
        };
        let who = match trace.goroutine_id {
            Some(g) => format!("goroutine {g}"),
            None => "main goroutine".to_string(),
        };
        let _ = writeln!(out, "{kind} at 0x000000000000 by {who}:");
        render_frames(&mut out, &trace.frames);
    }
    for trace in report.accesses() {
        if let (Some(id), Some(creator)) = (trace.goroutine_id, trace.creator.as_deref()) {
            let _ = writeln!(out, "\nGoroutine {id} (running) created at:");
            render_frames(&mut out, &creator.frames);
        }
    }
    out.push_str(SEPARATOR);
    out.push('\n');
    out
}

fn render_frames(out: &mut String, frames: &[StackFrame]) {
    for f in frames {
        let _ = writeln!(out, "  {}()\n      {}:{}", f.function_name, f.file_path, f.line);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG_REPORT: &str = "\
==================
WARNING: DATA RACE
Write at 0x00c0000a0010 by goroutine 21:
  example.com/app.R()
      /src/app/r.go:30 +0x44
  example.com/app.Q()
      /src/app/q.go:20 +0x38
  example.com/app.P()
      /src/app/p.go:10 +0x2c

Previous read at 0x00c0000a0010 by goroutine 22:
  example.com/app.K()
      /src/app/k.go:33 +0x44
  example.com/app.J()
      /src/app/j.go:22 +0x38
  example.com/app.I()
      /src/app/i.go:11 +0x2c

Goroutine 21 (running) created at:
  example.com/app.C()
      /src/app/c.go:7 +0x90
  example.com/app.B()
      /src/app/b.go:5 +0x60
  example.com/app.A()
      /src/app/a.go:3 +0x20

Goroutine 22 (finished) created at:
  example.com/app.D()
      /src/app/d.go:8 +0x90
  example.com/app.B()
      /src/app/b.go:6 +0x60
  example.com/app.A()
      /src/app/a.go:3 +0x20
==================
";

    fn names(frames: &[StackFrame]) -> Vec<&str> {
        frames
            .iter()
            .map(|f| f.function_name.rsplit('.').next().unwrap())
            .collect()
    }

    #[test]
    fn calling_context_example() {
        let r = parse_race_report(FIG_REPORT).unwrap();
        assert_eq!(names(&r.access_a.frames), ["R", "Q", "P"]);
        assert_eq!(names(&r.access_b.frames), ["K", "J", "I"]);
        let ca = r.access_a.creator.as_deref().unwrap();
        let cb = r.access_b.creator.as_deref().unwrap();
        assert_eq!(names(&ca.frames), ["C", "B", "A"]);
        assert_eq!(names(&cb.frames), ["D", "B", "A"]);
        assert_eq!(r.access_a.leaf().access_kind, Some(AccessKind::Write));
        assert_eq!(r.access_b.leaf().access_kind, Some(AccessKind::Read));
        assert_eq!(r.racy_lines[0], ("/src/app/r.go".to_string(), 30));
        assert_eq!(r.racy_lines[1], ("/src/app/k.go".to_string(), 33));
        assert_eq!(r.raw_text, FIG_REPORT);
    }

    #[test]
    fn swapped_sections_swap_traces() {
        let r = parse_race_report(FIG_REPORT).unwrap();
        let swapped_text = FIG_REPORT
            .replace("Write at 0x00c0000a0010 by goroutine 21:", "@@A@@")
            .replace(
                "Previous read at 0x00c0000a0010 by goroutine 22:",
                "Read at 0x00c0000a0010 by goroutine 22:",
            );
        // Move section B in front of section A.
        let a_start = swapped_text.find("@@A@@").unwrap();
        let b_start = swapped_text.find("Read at").unwrap();
        let creators = swapped_text.find("Goroutine 21").unwrap();
        let sec_a = &swapped_text[a_start..b_start];
        let sec_b = &swapped_text[b_start..creators];
        let text = format!(
            "{}{}\n{}{}",
            &swapped_text[..a_start],
            sec_b.trim_end(),
            sec_a.replace("@@A@@", "Previous write at 0x00c0000a0010 by goroutine 21:"),
            &swapped_text[creators..]
        );
        let s = parse_race_report(&text).unwrap();
        assert_eq!(s.access_a.frames, r.access_b.frames);
        assert_eq!(s.access_b.frames, r.access_a.frames);
        assert_eq!(s.access_a.creator, r.access_b.creator);
    }

    #[test]
    fn missing_second_section() {
        let cut = &FIG_REPORT[..FIG_REPORT.find("Previous read").unwrap()];
        let err = parse_race_report(cut).unwrap_err();
        assert!(matches!(err, ReportError::Malformed(_)), "{err}");
    }

    #[test]
    fn frame_without_location_is_malformed() {
        let text = "WARNING: DATA RACE\nWrite at 0x1 by goroutine 1:\n  main.f()\n\nRead at 0x1 by goroutine 2:\n  main.g()\n      /a.go:1\n";
        assert!(matches!(parse_race_report(text), Err(ReportError::Malformed(_))));
    }

    #[test]
    fn read_read_is_rejected() {
        let text = "WARNING: DATA RACE\nRead at 0x1 by goroutine 1:\n  main.f()\n      /a.go:2\n\nPrevious read at 0x1 by main goroutine:\n  main.g()\n      /a.go:1\n";
        assert!(matches!(parse_race_report(text), Err(ReportError::Malformed(_))));
    }

    #[test]
    fn call_args_and_main_goroutine() {
        let text = "WARNING: DATA RACE\nRead at 0x00c by main goroutine:\n  main.(*T).get(0xc000010000, 0x1)\n      /x/main.go:9 +0x1\n\nPrevious write at 0x00c by goroutine 6:\n  main.main.func1()\n      /x/main.go:4\n\nGoroutine 6 (running) created at:\n  main.main()\n      /x/main.go:3 +0x2\n";
        let r = parse_race_report(text).unwrap();
        assert_eq!(r.access_a.goroutine_id, None);
        assert_eq!(r.access_a.frames[0].function_name, "main.(*T).get");
        assert!(r.access_a.creator.is_none());
        assert_eq!(r.access_b.creator.as_ref().unwrap().frames[0].line, 3);
    }

    #[test]
    fn render_then_parse_is_identity_on_structure() {
        let r = parse_race_report(FIG_REPORT).unwrap();
        let again = parse_race_report(&r.render()).unwrap();
        assert_eq!(again.access_a, r.access_a);
        assert_eq!(again.access_b, r.access_b);
        assert_eq!(again.racy_lines, r.racy_lines);
    }

    #[test]
    fn split_multiple_reports_from_test_output() {
        let out = format!("=== RUN   TestX\n{FIG_REPORT}{FIG_REPORT}--- FAIL: TestX (0.00s)\n    testing.go:1490: race detected during execution of test\nFAIL\n");
        let blocks = split_reports(&out);
        assert_eq!(blocks.len(), 2);
        for b in blocks {
            let r = parse_race_report(&b).unwrap();
            assert_eq!(r.access_a.frames.len(), 3);
        }
        assert!(split_reports("ok  \texample.com/app\t0.01s\n").is_empty());
    }
}
