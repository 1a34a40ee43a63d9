use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn drfix(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_drfix"));
    cmd.args(args);
    for (k, _) in std::env::vars() {
        if k.starts_with("DRFIX_") {
            cmd.env_remove(k);
        }
    }
    cmd.envs(env.iter().copied());
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn ingest(db: &Path, category: &str) -> Output {
    drfix(
        &[
            "--db",
            p(db),
            "ingest",
            "--buggy",
            p(&fixture("service/buggy_function.go")),
            "--fixed",
            p(&fixture("service/fixed_function.go")),
            "--category",
            category,
        ],
        &[],
    )
}

#[test]
fn ingest_twice_gives_two_ids() {
    let tmp = tempfile::tempdir().unwrap();
    let db = tmp.path().join("db.json");
    let a = ingest(&db, "capture");
    let b = ingest(&db, "capture");
    assert_eq!(stdout(&a).trim(), "ex-0001");
    assert_eq!(stdout(&b).trim(), "ex-0002");
}

#[test]
fn ingest_unreadable_file_is_environmental() {
    let tmp = tempfile::tempdir().unwrap();
    let out = drfix(
        &[
            "--db",
            p(&tmp.path().join("db.json")),
            "ingest",
            "--buggy",
            "/nonexistent.go",
            "--fixed",
            "/nonexistent.go",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("db.json").exists());
}

#[test]
fn db_stats_histogram_matches_recount() {
    let tmp = tempfile::tempdir().unwrap();
    let db = tmp.path().join("db.json");
    for c in ["capture", "mutex", "capture"] {
        assert!(ingest(&db, c).status.success());
    }
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&db).unwrap()).unwrap();
    let mut recount: BTreeMap<String, usize> = BTreeMap::new();
    for e in doc["entries"].as_array().unwrap() {
        *recount.entry(e["category"].as_str().unwrap().to_string()).or_default() += 1;
    }
    let out = stdout(&drfix(&["--db", p(&db), "db-stats"], &[]));
    assert!(out.contains("entries: 3\n"), "{out}");
    assert!(out.contains("dim: 256\n"));
    for (c, n) in recount {
        assert!(out.contains(&format!("category {c}: {n}\n")), "{out}");
    }
}

#[test]
fn db_stats_on_missing_store() {
    let tmp = tempfile::tempdir().unwrap();
    let out = drfix(&["--db", p(&tmp.path().join("none.json")), "db-stats"], &[]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("entries: 0\n"));
}

#[test]
fn skeletonize_without_concurrency_keeps_the_signature() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("plain.go");
    std::fs::write(
        &file,
        "package p\n\n// adds\nfunc add(a, b int) int {\n\tc := a + b\n\tfmt.Println(c)\n\treturn a\n}\n",
    )
    .unwrap();
    let out = drfix(&["skeletonize", p(&file), "--lines", "3"], &[]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "func func1(v1, v2 type1) type1 {\n}\n");

    let bad = drfix(&["skeletonize", p(&file), "--lines", "42"], &[]);
    assert_eq!(bad.status.code(), Some(2));
}

fn fix_args<'a>(tmp: &'a Path, mock: &'a str, sim: &'a str, extra: &[&'a str]) -> Vec<String> {
    let mut args: Vec<String> = vec![
        "fix".into(),
        "--report".into(),
        p(&fixture("service/race_report.txt")).into(),
        "--repo".into(),
        p(&fixture("service/repo")).into(),
        "--db".into(),
        p(&tmp.join("db.json")).into(),
        "--mock-responses".into(),
        p(&fixture(mock)).into(),
        "--simulated-executor".into(),
        p(&fixture(sim)).into(),
        "--out-diff".into(),
        p(&tmp.join("fix.diff")).into(),
        "--audit-log".into(),
        p(&tmp.join("audit.jsonl")).into(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    args
}

fn run_fix(args: &[String], env: &[(&str, &str)]) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    drfix(&refs, env)
}

#[test]
fn fix_is_deterministic() {
    let mut seen = Vec::new();
    for _ in 0..2 {
        let tmp = tempfile::tempdir().unwrap();
        assert!(ingest(&tmp.path().join("db.json"), "capture").status.success());
        let out = run_fix(
            &fix_args(
                tmp.path(),
                "service/mock_fixed_function.json",
                "service/sim_race_then_clean.json",
                &[],
            ),
            &[],
        );
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        seen.push((
            std::fs::read(tmp.path().join("fix.diff")).unwrap(),
            std::fs::read(tmp.path().join("audit.jsonl")).unwrap(),
        ));
    }
    assert_eq!(seen[0], seen[1]);
    assert_eq!(seen[0].0, std::fs::read(fixture("service/golden.diff")).unwrap());
}

#[test]
fn persistent_race_exhausts_the_tree() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_fix(
        &fix_args(
            tmp.path(),
            "service/mock_fixed_function.json",
            "service/sim_always_race.json",
            &[],
        ),
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(!tmp.path().join("fix.diff").exists());
    // Empty store: one slot; three locations; three rungs each.
    let lines = std::fs::read_to_string(tmp.path().join("audit.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 3 * 3);
    assert!(lines.contains("\"outcome\":\"race_present\""));
}

#[test]
fn missing_report_and_repo_are_environmental() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = fix_args(
        tmp.path(),
        "service/mock_refusal.json",
        "service/sim_race_then_clean.json",
        &[],
    );
    args[2] = p(&tmp.path().join("missing.txt")).into();
    assert_eq!(run_fix(&args, &[]).status.code(), Some(2));

    let mut args = fix_args(
        tmp.path(),
        "service/mock_refusal.json",
        "service/sim_race_then_clean.json",
        &[],
    );
    args[4] = p(&tmp.path().join("no-repo")).into();
    assert_eq!(run_fix(&args, &[]).status.code(), Some(2));
}

#[test]
fn flag_env_config_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("drfix.toml");
    std::fs::write(&cfg, "repetitions = 3\nk = 4\nworkers = 5\nuse_rag = false\n").unwrap();
    let show = |args: &[&str], env: &[(&str, &str)]| {
        let mut full = vec!["--config", p(&cfg), "show-config"];
        full.extend_from_slice(args);
        let out = drfix(&full, env);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        stdout(&out)
    };
    let from_file = show(&[], &[]);
    assert!(
        from_file.contains("repetitions = 3\n")
            && from_file.contains("k = 4\n")
            && from_file.contains("use_rag = false\n")
    );
    let from_env = show(&[], &[("DRFIX_REPETITIONS", "7"), ("DRFIX_K", "2")]);
    assert!(
        from_env.contains("repetitions = 7\n") && from_env.contains("k = 2\n") && from_env.contains("workers = 5\n")
    );
    let from_flag = show(&["--repetitions", "11"], &[("DRFIX_REPETITIONS", "7")]);
    assert!(from_flag.contains("repetitions = 11\n"));
    assert!(show(&[], &[]).contains("scope_order = \"function-then-file\"\n"));

    let zero = drfix(&["show-config", "--repetitions", "0"], &[]);
    assert_eq!(zero.status.code(), Some(2));
}

#[test]
fn credential_never_reaches_logs() {
    const SECRET: &str = "sk-test-4f1c9e0b7d";
    let tmp = tempfile::tempdir().unwrap();
    let args: Vec<String> = [
        "fix",
        "--report",
        p(&fixture("service/race_report.txt")),
        "--repo",
        p(&fixture("service/repo")),
        "--db",
        p(&tmp.path().join("db.json")),
        "--model-endpoint",
        "http://127.0.0.1:9/v1/complete",
        "--model-credential-env",
        "DRFIX_TEST_TOKEN",
        "--simulated-executor",
        p(&fixture("service/sim_race_then_clean.json")),
        "--out-diff",
        p(&tmp.path().join("fix.diff")),
        "--audit-log",
        p(&tmp.path().join("audit.jsonl")),
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let out = run_fix(&args, &[("DRFIX_TEST_TOKEN", SECRET), ("RUST_LOG", "trace")]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let audit = std::fs::read_to_string(tmp.path().join("audit.jsonl")).unwrap();
    assert!(audit.contains("\"outcome\":\"model_error\""));
    for text in [audit, stdout(&out), String::from_utf8_lossy(&out.stderr).into_owned()] {
        assert!(!text.contains(SECRET));
    }

    let unset = run_fix(&args, &[("RUST_LOG", "trace")]);
    assert_eq!(unset.status.code(), Some(2));
}

#[test]
fn seed_corpus_ingests() {
    let tmp = tempfile::tempdir().unwrap();
    let db = tmp.path().join("db.json");
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(fixture("corpus"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    dirs.sort();
    assert!(!dirs.is_empty());
    for dir in &dirs {
        let category = dir.file_name().unwrap().to_str().unwrap();
        let out = drfix(
            &[
                "--db",
                p(&db),
                "ingest",
                "--buggy",
                p(&dir.join("buggy.go")),
                "--fixed",
                p(&dir.join("fixed.go")),
                "--category",
                category,
            ],
            &[],
        );
        assert!(
            out.status.success(),
            "{category}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let stats = stdout(&drfix(&["--db", p(&db), "db-stats"], &[]));
    assert!(stats.starts_with(&format!("entries: {}\n", dirs.len())));
}
