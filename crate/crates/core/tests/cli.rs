use std::path::{Path, PathBuf};

use diverge::cli::main_with_args;

fn corpus(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/corpus")
        .join(name)
        .display()
        .to_string()
}

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = main_with_args(
        std::iter::once("diverge").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

#[test]
fn every_corpus_file_meets_its_expectations() {
    let models = corpus("models.txt");
    let dir = PathBuf::from(corpus(""));
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "mc"))
        .collect();
    files.sort();
    assert!(files.len() > 10);
    for f in files {
        let (code, out, err) = run(&["--models", &models, "--check", f.to_str().unwrap()]);
        assert_eq!(code, 0, "{}:\n{out}{err}", f.display());
        assert!(out.ends_with("0 mismatches\n"), "{out}");
    }
}

#[test]
fn exit_status_reflects_findings() {
    let models = corpus("models.txt");
    let (code, out, _) = run(&["--models", &models, &corpus("counting_loop.mc")]);
    assert_eq!(code, 0, "{out}");
    let (code, out, _) = run(&["--models", &models, &corpus("constant_guard_loop.mc")]);
    assert_eq!(code, 1);
    assert!(out.contains("infinite_loop"), "{out}");
}

#[test]
fn intended_only_findings_exit_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("server.mc");
    std::fs::write(
        &f,
        "//@ intended\nvoid serve() {\n    while (1) {\n    }\n}\n",
    )
    .unwrap();
    let (code, out, _) = run(&[f.to_str().unwrap()]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("[intended]"), "{out}");
}

#[test]
fn bad_input_is_a_usage_error() {
    let (code, _, err) = run(&["/nonexistent/file.mc"]);
    assert_eq!(code, 2);
    assert!(err.contains("error"), "{err}");
    let (code, _, _) = run(&["--k", "0", &corpus("goto_self_loop.mc")]);
    assert_eq!(code, 2);
    let (code, _, err) = run(&["--entry", "nope", &corpus("goto_self_loop.mc")]);
    assert_eq!(code, 2);
    assert!(err.contains("nope"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("broken.mc");
    std::fs::write(&f, "void f( {\n").unwrap();
    let (code, _, err) = run(&[f.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("broken.mc"), "{err}");
}

#[test]
fn undeclared_calls_are_rejected_without_models() {
    let (code, _, err) = run(&[&corpus("usb_config_retry.mc")]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn json_report_shape() {
    let models = corpus("models.txt");
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("report.json");
    let (code, out, _) = run(&[
        "--models",
        &models,
        "--format",
        "json",
        "-o",
        out_path.to_str().unwrap(),
        "--k",
        "4",
        &corpus("trivial_recursion.mc"),
    ]);
    assert_eq!(code, 1);
    assert!(out.is_empty());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["k"], 4);
    let issue = &v["issues"][0];
    assert_eq!(issue["issue_type"], "infinite_recursion");
    assert_eq!(issue["cycle"], serde_json::json!(["trivial"]));
    assert_eq!(issue["line"], 3);
    assert!(issue["trace"].as_array().is_some_and(|t| !t.is_empty()));
}

#[test]
fn directories_are_expanded() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.mc"), "void a() { while (1) { } }\n").unwrap();
    std::fs::write(dir.path().join("b.mc"), "void b() { int x = 0; x++; }\n").unwrap();
    std::fs::write(dir.path().join("notes.txt"), "not minic").unwrap();
    let (code, out, err) = run(&[dir.path().to_str().unwrap()]);
    assert_eq!(code, 1, "{err}");
    assert!(out.contains("a.mc"), "{out}");
}

#[test]
fn stale_database_is_rebuilt() {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("s.db");
    let mut old = b"DVGSUMDB".to_vec();
    old.extend(99u32.to_le_bytes());
    old.extend(3u32.to_le_bytes());
    old.extend(b"0.0");
    old.extend(0u32.to_le_bytes());
    std::fs::write(&db, old).unwrap();
    let (code, _, err) = run(&[
        "--db",
        db.to_str().unwrap(),
        &corpus("constant_guard_loop.mc"),
    ]);
    assert_eq!(code, 1, "{err}");
    assert!(err.contains("warning"), "{err}");
    let (code, _, err) = run(&[
        "--db",
        db.to_str().unwrap(),
        &corpus("constant_guard_loop.mc"),
    ]);
    assert_eq!(code, 1);
    assert!(err.is_empty(), "{err}");
}

#[test]
fn damaged_database_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("s.db");
    std::fs::write(&db, b"garbage").unwrap();
    let (code, _, err) = run(&[
        "--db",
        db.to_str().unwrap(),
        &corpus("constant_guard_loop.mc"),
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("corrupt"), "{err}");
}
