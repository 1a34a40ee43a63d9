use drfix_core::report::{
    canonical_hash_input, compute_bug_hash, parse_race_report, resolve_locations, AccessKind, GoroutineTrace,
    RaceReport, StackFrame,
};
use proptest::prelude::*;

fn frame_strategy() -> impl Strategy<Value = StackFrame> {
    (
        prop::sample::select(vec!["example.com/svc", "example.com/svc/store", "example.com/lib"]),
        prop::sample::select(vec![
            "Run",
            "Get",
            "Put",
            "TestRun",
            "handle",
            "(*Cache).Load",
            "Serve.func1",
        ]),
        prop::sample::select(vec!["/w/svc/a.go", "/w/svc/b_test.go", "/w/lib/c.go"]),
        1u32..500,
    )
        .prop_map(|(pkg, name, file, line)| StackFrame::new(format!("{pkg}.{name}"), file, line).unwrap())
}

fn trace_strategy(id: u64) -> impl Strategy<Value = GoroutineTrace> {
    (
        prop::collection::vec(frame_strategy(), 1..6),
        prop::option::of(prop::collection::vec(frame_strategy(), 1..4)),
    )
        .prop_map(move |(frames, creator)| {
            let creator = creator.map(|f| GoroutineTrace::new(None, f, None).unwrap());
            GoroutineTrace::new(Some(id), frames, creator).unwrap()
        })
}

fn report_strategy() -> impl Strategy<Value = RaceReport> {
    (trace_strategy(7), trace_strategy(8), any::<bool>(), any::<bool>()).prop_map(|(mut a, mut b, a_write, b_read)| {
        a.frames[0].access_kind = Some(if a_write { AccessKind::Write } else { AccessKind::Read });
        b.frames[0].access_kind = Some(if a_write && b_read {
            AccessKind::Read
        } else {
            AccessKind::Write
        });
        RaceReport::new(a, b, String::new()).unwrap()
    })
}

fn strip_raw(mut r: RaceReport) -> RaceReport {
    r.raw_text.clear();
    r
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn render_parse_round_trip(r in report_strategy()) {
        let back = parse_race_report(&r.render()).unwrap();
        prop_assert_eq!(strip_raw(back), r);
    }

    #[test]
    fn hash_ignores_order_and_lines(r in report_strategy(), shift in 1u32..1000) {
        let h = compute_bug_hash(&r);
        prop_assert_eq!(h.as_str().len(), 64);
        prop_assert!(h.as_str().bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase()));
        let swapped = RaceReport::new(r.access_b.clone(), r.access_a.clone(), String::new()).unwrap();
        prop_assert_eq!(compute_bug_hash(&swapped), h.clone());
        let mut moved = r.clone();
        for f in moved.access_a.frames.iter_mut().chain(moved.access_b.frames.iter_mut()) {
            f.line += shift;
        }
        prop_assert_eq!(compute_bug_hash(&moved), h);
    }

    #[test]
    fn hash_sees_every_function_name(r in report_strategy(), pick in any::<prop::sample::Index>(), in_b in any::<bool>()) {
        let h = compute_bug_hash(&r);
        let mut renamed = r.clone();
        let trace = if in_b { &mut renamed.access_b } else { &mut renamed.access_a };
        let i = pick.index(trace.frames.len());
        trace.frames[i].function_name.push_str("Renamed");
        prop_assert_ne!(canonical_hash_input(&renamed), canonical_hash_input(&r));
        prop_assert_ne!(compute_bug_hash(&renamed), h);
    }

    #[test]
    fn leaf_always_resolves(r in report_strategy()) {
        let locs = resolve_locations(&r);
        let leaf = locs.leaf.unwrap();
        prop_assert!(!leaf.sites.is_empty() && leaf.sites.len() <= 2);
    }
}
