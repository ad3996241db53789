use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bucketforge"));
    c.env_remove("BUCKETFORGE_WIDTH_CAP");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn gen_then_solve_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.uai");
    let p = path.to_str().unwrap();
    let o = run(&[
        "gen", "--grid", "3x3", "--delta", "1.0", "--seed", "4", "--out", p,
    ]);
    assert!(o.status.success(), "{o:?}");
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("MARKOV\n9\n"));

    let o = run(&["solve", "--uai", p, "--algorithm", "exact-be"]);
    assert!(o.status.success(), "{o:?}");
    let line = stdout(&o);
    assert!(line.contains("\"algorithm\":\"exact-be\""), "{line}");
    assert!(line.contains("\"oracle\":\"ok\""), "{line}");
    assert!(line.contains("\"ibound\":null"), "{line}");
}

#[test]
fn solve_generated_model_defaults_ibound_to_ten() {
    let o = run(&[
        "solve",
        "--complete",
        "8",
        "--seed",
        "1",
        "--algorithm",
        "mbr",
    ]);
    assert!(o.status.success(), "{o:?}");
    let line = stdout(&o);
    assert!(line.contains("\"ibound\":10"), "{line}");
    assert!(line.contains("\"model_id\":\"complete8-d1-s1\""), "{line}");
}

#[test]
fn bench_sweeps_ibounds_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.csv");
    let o = run(&[
        "bench",
        "--grid",
        "4x4",
        "--seeds",
        "0..3",
        "--algorithm",
        "exact-be,mbe-upper,mbr,gbr",
        "--ibound",
        "2,3",
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(
        lines[0].starts_with("model_id,algorithm,ibound,seed,log10_z"),
        "{}",
        lines[0]
    );
    // 3 exact rows plus 3 seeds x 2 ibounds x 3 bounded algorithms.
    assert_eq!(lines.len(), 1 + 3 + 18);
}

#[test]
fn width_reports_min_fill_width() {
    let o = run(&["width", "--complete", "15"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("induced width 15"), "{}", stdout(&o));
}

#[test]
fn exit_codes() {
    // Configuration: unknown algorithm, zero ibound, no model.
    assert_eq!(
        run(&["solve", "--grid", "2x2", "--algorithm", "magic"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&[
            "solve",
            "--grid",
            "2x2",
            "--algorithm",
            "mbr",
            "--ibound",
            "0"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(run(&["solve", "--algorithm", "mbr"]).status.code(), Some(2));

    // Model: malformed file.
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.uai");
    std::fs::write(&bad, "MARKOV\n1\n2\n1\n1 0\n2 0.5\n").unwrap();
    let o = run(&[
        "solve",
        "--uai",
        bad.to_str().unwrap(),
        "--algorithm",
        "exact-be",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("parse error"));
    let bayes = dir.path().join("bayes.uai");
    std::fs::write(&bayes, "BAYES\n1\n2\n1\n1 0\n2 0.5 0.5\n").unwrap();
    assert_eq!(
        run(&["width", "--uai", bayes.to_str().unwrap()])
            .status
            .code(),
        Some(3)
    );

    // Resource cap.
    let o = bin()
        .env("BUCKETFORGE_WIDTH_CAP", "4")
        .args(["solve", "--grid", "6x6", "--algorithm", "exact-be"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4), "{o:?}");
    let o = run(&["solve", "--grid", "5x5", "--algorithm", "brute-force"]);
    assert_eq!(o.status.code(), Some(4));
    let o = bin()
        .env("BUCKETFORGE_WIDTH_CAP", "zero")
        .args(["solve", "--grid", "2x2", "--algorithm", "exact-be"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_records_failures_without_failing() {
    let o = bin()
        .env("BUCKETFORGE_WIDTH_CAP", "3")
        .args([
            "bench",
            "--grid",
            "5x5",
            "--seeds",
            "1,2",
            "--algorithm",
            "exact-be",
            "--oracle",
            "off",
        ])
        .output()
        .unwrap();
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 2);
    assert!(text
        .lines()
        .all(|l| l.contains("\"failure\":\"") && l.contains("\"oracle\":\"off\"")));
}
