mod common;

use std::collections::BTreeMap;
use std::path::Path;

use linear_meld::corpus::{self, fixtures, verify_fixture, Fixture};
use linear_meld::value::{NodeId, Value};

fn fixture(name: &str) -> Fixture {
    Fixture::load(&corpus::corpus_dir().join("fixtures").join(format!("{name}.conf"))).unwrap()
}

fn passes(name: &str) {
    let runs = verify_fixture(&fixture(name), &common::fixture_oracle).unwrap_or_else(|e| panic!("{e}"));
    assert!(!runs.is_empty());
    for r in runs {
        assert_eq!(r.audited, r.steps);
    }
}

#[test]
fn queens_enumerator_counts() {
    let counts: Vec<usize> = (1..=8).map(|n| common::queens(n).len()).collect();
    assert_eq!(counts, [1, 0, 0, 2, 10, 4, 40, 92]);
}

#[test]
fn dijkstra_oracle_by_hand() {
    let edges = [(1, 2, 4), (1, 3, 1), (3, 2, 1), (2, 4, 1), (4, 5, 1)];
    let d = common::dijkstra(&edges, 1, 4);
    assert_eq!(d, BTreeMap::from([(1, 0), (2, 2), (3, 1), (4, 3)]));
}

#[test]
fn pagerank_oracle_by_hand() {
    // Two nodes feeding each other: 0.5 -> 0.85 + 0.15 * 0.5.
    let v = common::pagerank(2, &[(0, 1), (1, 0)], 1);
    assert!(v.iter().all(|x| (x - 0.925).abs() < 1e-15), "{v:?}");
    let v = common::pagerank(2, &[(0, 1), (1, 0)], 2);
    assert!((v[0] - (0.85 + 0.15 * 0.925)).abs() < 1e-15);
}

#[test]
fn fixture_visit() {
    passes("visit");
}

#[test]
fn fixture_message() {
    passes("message");
}

#[test]
fn fixture_aggregate() {
    passes("aggregate");
}

#[test]
fn fixture_selector() {
    passes("selector");
}

#[test]
fn fixture_exists() {
    passes("exists");
}

#[test]
fn fixture_shortest_fig1() {
    passes("shortest-fig1");
}

#[test]
fn fixture_pagerank() {
    passes("pagerank-4");
}

#[test]
fn fixture_nqueens_small() {
    for n in [4, 5, 6] {
        passes(&format!("nqueens-{n}"));
    }
}

#[test]
fn shortest_fig1_distance_at_the_final_node() {
    let runs = verify_fixture(&fixture("shortest-fig1"), &common::fixture_oracle).unwrap();
    let paths = runs[0].graph.facts_of("path");
    let at4: Vec<_> = paths.iter().filter(|f| f.home() == NodeId(4)).collect();
    assert_eq!(at4.len(), 1);
    assert_eq!(at4[0].args[1], Value::Int(2));
}

#[test]
fn every_fixture_is_listed() {
    let names: Vec<String> = fixtures().unwrap().into_iter().map(|f| f.name).collect();
    for want in ["aggregate", "exists", "message", "nqueens-8", "pagerank-4", "selector", "shortest-fig1", "visit"] {
        assert!(names.iter().any(|n| n == want), "{want} missing from {names:?}");
    }
}

#[test]
fn wrong_expectation_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let exp = dir.path().join("visit.expected");
    std::fs::write(&exp, "node @1: edge(@1, @2) x1\nnode @1: edge(@1, @9) x1\n").unwrap();
    let conf = format!("program = {}\nexpected = {}\n", corpus::corpus_dir().join("visit.lm").display(), exp.display());
    let f = Fixture::parse("bad", &conf, dir.path()).unwrap();
    let err = verify_fixture(&f, &common::fixture_oracle).unwrap_err();
    assert!(err.contains("line 2: expected `node @1: edge(@1, @9) x1`"), "{err}");
}

#[test]
fn fixture_syntax_errors() {
    let here = Path::new(".");
    assert!(Fixture::parse("x", "expected = a\n", here).unwrap_err().contains("no program"));
    assert!(Fixture::parse("x", "program = a.lm\n", here).unwrap_err().contains("expected"));
    assert!(Fixture::parse("x", "program = a.lm\ncolour = red\n", here).unwrap_err().contains("colour"));
    let f = Fixture::parse("x", "# note\nprogram = a.lm b.lm\nconst.size = 8\noracle = nqueens\nworkers = 1, 4\n", here)
        .unwrap();
    assert_eq!(f.programs.len(), 2);
    assert_eq!(f.consts["size"], Value::Int(8));
    assert_eq!(f.workers, [1, 4]);
}

#[test]
fn generators_emit_loadable_axioms() {
    let consts = BTreeMap::from([("size".to_string(), Value::Int(5))]);
    let g = linear_meld::runtime::Graph::load(common::typed_with(
        &format!("{}{}", corpus::NQUEENS, corpus::generate("nqueens", 5).unwrap()),
        &consts,
    ))
    .unwrap();
    assert_eq!(g.nodes.len(), 25);
    assert!(corpus::generate("torus", 3).is_err());
}
