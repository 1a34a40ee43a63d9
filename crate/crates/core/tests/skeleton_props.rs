use std::collections::BTreeSet;

use drfix_core::skeleton::{skeletonize, SkeletonRequest};
use proptest::prelude::*;

const VARS: [&str; 5] = ["a", "b", "total", "count", "item"];

fn stmt() -> impl Strategy<Value = String> {
    let v = || prop::sample::select(VARS.to_vec());
    prop_oneof![
        (v(), 0u8..9).prop_map(|(x, n)| format!("{x} = {n}")),
        (v(), v()).prop_map(|(x, y)| format!("{x} = {y} + 1")),
        (v(), v()).prop_map(|(x, y)| format!("go func() {{\n\t\t{x}++\n\t\tlog.Printf(\"%d\", {y})\n\t}}()")),
        Just("wg.Add(1)".to_string()),
        Just("wg.Wait()".to_string()),
        v().prop_map(|x| format!("mu.Lock()\n\t{x}--\n\tmu.Unlock()")),
        v().prop_map(|x| format!("ch <- {x}")),
        v().prop_map(|x| format!("{x} = <-ch")),
        (v(), v()).prop_map(|(x, y)| format!("if {x} > 3 {{\n\t\t{y} = helper({x})\n\t}}")),
        v().prop_map(|x| format!("log.Printf(\"%d\", {x})")),
    ]
}

fn function() -> impl Strategy<Value = String> {
    prop::collection::vec(stmt(), 1..10).prop_map(|stmts| {
        let mut s = String::from("func process(a, b int, ch chan int) int {\n\tvar wg sync.WaitGroup\n\tvar mu sync.Mutex\n\ttotal, count, item := 0, 0, 0\n");
        for st in stmts {
            s.push('\t');
            s.push_str(&st);
            s.push('\n');
        }
        s.push_str("\treturn total\n}\n");
        s
    })
}

fn line_count(src: &str) -> usize {
    src.lines().count()
}

fn replace_word(text: &str, from: &str, to: &str) -> String {
    let mut out = String::new();
    let mut word = String::new();
    for c in text.chars().chain(std::iter::once('\0')) {
        if c.is_alphanumeric() || c == '_' {
            word.push(c);
            continue;
        }
        out.push_str(if word == from { to } else { &word });
        word.clear();
        if c != '\0' {
            out.push(c);
        }
    }
    out
}

fn count_constructs(text: &str) -> [usize; 5] {
    [
        text.lines().filter(|l| l.trim_start().starts_with("go ")).count(),
        text.matches(".Wait()").count(),
        text.matches(".Lock()").count(),
        text.matches(".Unlock()").count(),
        text.matches("<-").count(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn idempotent_up_to_renaming(src in function(), pick in any::<prop::sample::Index>()) {
        let line = 5 + pick.index(line_count(&src) - 6);
        let first = skeletonize(&SkeletonRequest::new(src.clone()).with_lines([line])).unwrap();
        let second = skeletonize(&SkeletonRequest::new(first.text.clone()).with_vars(first.racy_vars())).unwrap();
        prop_assert_eq!(second.text, first.text);
    }

    #[test]
    fn extra_vars_only_add_lines(src in function(), pick in any::<prop::sample::Index>(), extra in prop::sample::select(VARS.to_vec())) {
        let line = 5 + pick.index(line_count(&src) - 6);
        let base = skeletonize(&SkeletonRequest::new(src.clone()).with_lines([line])).unwrap();
        let more = skeletonize(&SkeletonRequest::new(src.clone()).with_lines([line]).with_vars([extra])).unwrap();
        prop_assert!(more.retained_lines.is_superset(&base.retained_lines));
    }

    #[test]
    fn elided_identifiers_do_not_matter(src in function(), pick in any::<prop::sample::Index>()) {
        let line = 5 + pick.index(line_count(&src) - 6);
        let sk = skeletonize(&SkeletonRequest::new(src.clone()).with_lines([line])).unwrap();
        let candidates: Vec<&str> = ["a", "b", "total", "count", "item", "helper", "log", "Printf"]
            .into_iter()
            .filter(|n| !sk.rename_map.contains_key(*n) && replace_word(&src, n, "zzz") != src)
            .collect();
        for name in candidates {
            let mutated = replace_word(&src, name, "renamedNoise");
            let again = skeletonize(&SkeletonRequest::new(mutated).with_lines([line])).unwrap();
            prop_assert_eq!(&again.text, &sk.text, "renaming {} changed the skeleton", name);
        }
    }

    #[test]
    fn constructs_are_preserved(src in function(), lines in prop::collection::btree_set(5usize..8, 0..2)) {
        let lines: BTreeSet<usize> = lines.into_iter().filter(|l| *l < line_count(&src)).collect();
        let sk = skeletonize(&SkeletonRequest::new(src.clone()).with_lines(lines)).unwrap();
        prop_assert_eq!(count_constructs(&sk.text), count_constructs(&src));
    }
}
