use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/corpus").join(name)
}

fn lm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lm")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_dumps_the_expected_database() {
    let visit = corpus("visit.lm");
    for workers in ["1", "4"] {
        let o = lm(&["run", path(&visit), "--dump-db", "--workers", workers]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let want = std::fs::read_to_string(corpus("fixtures/visit.expected")).unwrap();
        assert_eq!(stdout(&o), want);
    }
}

#[test]
fn trace_prints_one_line_per_firing() {
    let o = lm(&["run", path(&corpus("message.lm")), "--trace"]);
    let out = stdout(&o);
    let nodes: Vec<&str> = out.lines().map(|l| l.split(' ').nth(1).unwrap()).collect();
    assert_eq!(nodes, ["@1", "@3", "@4"]);
    assert!(out.starts_with("node @1 rule 0: consumed {message(@1, 'Hello World', [@3, @4])} derived {"));
}

#[test]
fn files_are_joined_and_consts_applied() {
    let o = lm(&[
        "run",
        path(&corpus("shortest.lm")),
        path(&corpus("fixtures/fig1-unit-edges.lm")),
        "--const",
        "startnode=@1",
        "--const",
        "finalnode=@4",
        "--dump-db",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), std::fs::read_to_string(corpus("fixtures/shortest-fig1.expected")).unwrap());
}

#[test]
fn check_errors_carry_file_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let head = dir.path().join("head.lm");
    std::fs::write(&head, "type linear visit(node).\n").unwrap();
    let bad = dir.path().join("bad.lm");
    std::fs::write(&bad, "\nvisit(A) -o visit(B).\n").unwrap();
    let o = lm(&["run", path(&head), path(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.starts_with(&format!("{}:2:", bad.display())), "{err}");
    assert!(err.contains("UnboundHeadVariable"), "{err}");
    assert!(err.contains("(rule 0)"), "{err}");
}

#[test]
fn syntax_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.lm");
    std::fs::write(&bad, "type linear p(node).\np(A) -o\n").unwrap();
    let o = lm(&["run", path(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with(&format!("{}:2:", bad.display())), "{}", stderr(&o));
}

#[test]
fn step_limit_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let spin = dir.path().join("spin.lm");
    std::fs::write(&spin, "type linear p(node).\np(@1).\np(A) -o p(A).\n").unwrap();
    let o = lm(&["run", path(&spin), "--max-steps", "10", "--dump-db"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("step limit of 10"));
    assert_eq!(stdout(&o), "node @1: p(@1) x1\n");
}

#[test]
fn dump_ast_stops_before_running() {
    let o = lm(&["run", path(&corpus("message.lm")), "--dump-ast", "--trace"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("(program"), "{out}");
    assert!(!out.contains("rule 0: consumed"));
}

#[test]
fn audit_reports_checked_steps() {
    let o = lm(&["run", path(&corpus("visit.lm")), "--audit"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("audit: 5 steps checked, 0 violations"), "{}", stderr(&o));
}

#[test]
fn bad_const_is_rejected() {
    let o = lm(&["run", path(&corpus("visit.lm")), "--const", "nonsense"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--const nonsense"));
}

#[test]
fn gen_writes_axioms() {
    let o = lm(&["gen", "nqueens", "--size", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("!coord(@0, 0, 0)."));
    assert!(out.contains("!down-right(@1, @7)."));
    let o = lm(&["gen", "pagerank-ring", "--size", "4"]);
    assert!(stdout(&o).contains("!numLinks(@0, 3)."));
    assert_eq!(lm(&["gen", "torus", "--size", "3"]).status.code(), Some(1));
}

#[test]
fn generated_board_runs() {
    let dir = tempfile::tempdir().unwrap();
    let board = dir.path().join("board.lm");
    std::fs::write(&board, stdout(&lm(&["gen", "nqueens", "--size", "5"]))).unwrap();
    let o = lm(&["run", path(&corpus("nqueens.lm")), path(&board), "--const", "size=5", "--dump-db"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.contains("final-state")).count(), 10);
}

#[test]
fn verify_passes_on_the_corpus() {
    for name in ["message.lm", "visit.lm", "aggregate.lm", "exists.lm", "selector.lm"] {
        let o = lm(&["verify", path(&corpus(name)), "--samples", "20"]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stdout(&o));
        assert!(stdout(&o).starts_with("pass: "), "{name}: {}", stdout(&o));
    }
}
