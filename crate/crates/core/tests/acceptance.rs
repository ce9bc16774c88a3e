//! End-to-end acceptance checks. Each test prints one verdict line to
//! stderr, bypassing the harness capture, then asserts it.

mod common;

use std::collections::BTreeMap;
use std::io::Write as _;
use std::sync::Arc;
use std::time::{Duration, Instant};

use linear_meld::check::check_program;
use linear_meld::corpus::{self, fixtures, random_weighted_graph, verify_fixture, weighted_edge_axioms};
use linear_meld::runtime::{run_source, RunConfig, RunReport, Status};
use linear_meld::syntax::parse_source;
use linear_meld::value::{NodeId, Value};
use linear_meld::verify::{verify, VerifyOptions};

const AGGREGATE_LIMIT: Duration = Duration::from_secs(1);
const VISIT_LIMIT: Duration = Duration::from_secs(1);
const MESSAGE_LIMIT: Duration = Duration::from_secs(1);
const SHORTEST_LIMIT: Duration = Duration::from_secs(5);
const PAGERANK_LIMIT: Duration = Duration::from_secs(1);
const NQUEENS_8_LIMIT: Duration = Duration::from_secs(30);
const SOUNDNESS_LIMIT: Duration = Duration::from_secs(300);
/// No limit is required; this only bounds a hung run.
const AUDIT_LIMIT: Duration = Duration::from_secs(600);

const SOUNDNESS_PROGRAMS: u64 = 1000;
const SHORTEST_GRAPHS: u64 = 3;
const SHORTEST_MAX_NODES: u64 = 20;
const SHORTEST_MAX_EDGES: usize = 60;

fn verdict(n: u32, name: &str, elapsed: Duration, limit: Duration, result: Result<String, String>) {
    let (pass, detail) = match result {
        Ok(d) if elapsed <= limit => (true, d),
        Ok(d) => (false, format!("{d}; over the time limit")),
        Err(e) => (false, e),
    };
    let line = format!(
        "criterion {n} {}: {name}: {detail} [{:.3}s, limit {}s]\n",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs_f64()
    );
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(pass, "{line}");
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn cfg(workers: usize, seed: u64) -> RunConfig {
    RunConfig { workers, seed, max_steps: None, trace: false, audit: false }
}

fn run(src: &str, consts: &BTreeMap<String, Value>, cfg: &RunConfig) -> Result<RunReport, String> {
    let report = run_source(src, consts, cfg).map_err(|e| e.to_string())?;
    if report.status != Status::Quiescent {
        return Err("no quiescence".into());
    }
    Ok(report)
}

fn consts(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

#[test]
fn criterion_1_aggregate_total() {
    let (result, elapsed) = timed(|| {
        let report = run(corpus::AGGREGATE, &BTreeMap::new(), &cfg(1, 0))?;
        let dump = report.graph.dump();
        if dump == "node @1: total(@1, 12) x1\n" {
            Ok("only total(@1, 12) remains".to_string())
        } else {
            Err(format!("final database:\n{dump}"))
        }
    });
    verdict(1, "sum aggregate over prices", elapsed, AGGREGATE_LIMIT, result);
}

#[test]
fn criterion_2_visit_all_configurations() {
    let want = [
        "node @1: edge(@1, @2) x1",
        "node @1: edge(@1, @4) x1",
        "node @1: visited(@1) x1",
        "node @2: edge(@2, @3) x1",
        "node @2: edge(@2, @4) x1",
        "node @2: visited(@2) x1",
        "node @3: visited(@3) x1",
        "node @4: visited(@4) x1",
    ]
    .map(|l| format!("{l}\n"))
    .concat();
    let mut slowest = Duration::ZERO;
    let mut result = Ok(String::new());
    let mut runs = 0;
    for workers in [1, 2, 4, 8] {
        for seed in 0..3 {
            let (r, elapsed) = timed(|| run(corpus::VISIT, &BTreeMap::new(), &cfg(workers, seed)));
            slowest = slowest.max(elapsed);
            match r {
                Ok(report) if report.graph.dump() == want => runs += 1,
                Ok(report) => {
                    result = Err(format!("workers {workers} seed {seed}:\n{}", report.graph.dump()));
                }
                Err(e) => result = Err(format!("workers {workers} seed {seed}: {e}")),
            }
        }
    }
    let result = result.map(|_| format!("{runs} runs identical, visited(@1..@4) plus edges; time is the slowest run"));
    verdict(2, "visit under workers 1, 2, 4, 8 and seeds 0, 1, 2", slowest, VISIT_LIMIT, result);
}

#[test]
fn criterion_3_message_route() {
    let (result, elapsed) = timed(|| {
        let report = run(corpus::MESSAGE, &BTreeMap::new(), &RunConfig { trace: true, ..cfg(1, 0) })?;
        let nodes: Vec<String> = report.trace.iter().map(|e| e.node.to_string()).collect();
        let messages = report.graph.facts_of("message").len();
        let edges = report.graph.facts_of("edge").len();
        if nodes != ["@1", "@3", "@4"] {
            return Err(format!("firings at {nodes:?}"));
        }
        if messages != 0 || edges != 4 || report.graph.nodes.values().map(|d| d.linear_count()).sum::<usize>() != 0 {
            return Err(format!("{messages} messages and {edges} edges remain"));
        }
        Ok("firings at @1, @3, @4; only the 4 edges remain".to_string())
    });
    verdict(3, "message routing", elapsed, MESSAGE_LIMIT, result);
}

#[test]
fn criterion_4_shortest_against_dijkstra() {
    let (result, elapsed) = timed(|| {
        let mut sizes = Vec::new();
        for seed in 0..SHORTEST_GRAPHS {
            let (n, edges) = random_weighted_graph(seed, SHORTEST_MAX_NODES, SHORTEST_MAX_EDGES);
            let src = format!("{}\n{}", corpus::SHORTEST, weighted_edge_axioms(&edges));
            let c = consts(&[("startnode", Value::Node(NodeId(1))), ("finalnode", Value::Node(NodeId(n)))]);
            let report = run(&src, &c, &cfg(1, 0))?;
            common::check_shortest(&report.graph, &edges, 1, n).map_err(|e| format!("graph {seed}: {e}"))?;
            sizes.push(format!("{n} nodes/{} edges", edges.len()));
        }
        Ok(format!("exact distances on {}", sizes.join(", ")))
    });
    verdict(4, "shortest distance on random graphs", elapsed, SHORTEST_LIMIT, result);
}

#[test]
fn criterion_5_pagerank_recurrence() {
    let (result, elapsed) = timed(|| {
        let src = format!("{}\n{}", corpus::PAGERANK, corpus::pagerank_ring_axioms(4));
        let report = run(&src, &consts(&[("iterations", Value::Int(10))]), &cfg(1, 0))?;
        common::check_pagerank(&report.graph, 4, 10)?;
        Ok(format!("4 ranks within {:e} of the recurrence", common::PAGERANK_TOL))
    });
    verdict(5, "pagerank, 4 nodes, 10 iterations", elapsed, PAGERANK_LIMIT, result);
}

#[test]
fn criterion_6_nqueens_against_enumerator() {
    let mut counts = Vec::new();
    let mut size8 = Duration::ZERO;
    let mut result = Ok(());
    for size in [4u64, 5, 6, 8] {
        let (r, elapsed) = timed(|| {
            let src = format!("{}\n{}", corpus::NQUEENS, corpus::nqueens_axioms(size));
            let report = run(&src, &consts(&[("size", Value::Int(size as i64))]), &cfg(1, 0))?;
            common::check_nqueens(&report.graph, size)
        });
        if size == 8 {
            size8 = elapsed;
        }
        match r {
            Ok(n) => counts.push(format!("{size}: {n}")),
            Err(e) => result = Err(format!("size {size}: {e}")),
        }
    }
    let result = result.map(|()| format!("solutions {} match the enumerator; size 8 run", counts.join(", ")));
    verdict(6, "n-queens sizes 4, 5, 6, 8", size8, NQUEENS_8_LIMIT, result);
}

#[test]
fn criterion_7_engine_steps_are_oracle_steps() {
    let (result, elapsed) = timed(|| {
        let (mut checked, mut skipped) = (0, 0);
        for seed in 0..SOUNDNESS_PROGRAMS {
            let src = common::random_program(seed);
            let program = parse_source(&src).map_err(|e| format!("program {seed}: {e}\n{src}"))?;
            let typed = check_program(&program, &BTreeMap::new()).map_err(|e| format!("program {seed}: {e:?}\n{src}"))?;
            let opts = VerifyOptions { bound: 6, samples: 4, seed, max_steps: 40 };
            let report = verify(Arc::new(typed), &opts).map_err(|e| format!("program {seed}: {e}"))?;
            if let Some(c) = report.failure {
                return Err(format!("program {seed}:\n{src}counterexample at {}: {}", c.node, c.reason));
            }
            checked += report.checked;
            skipped += report.skipped;
        }
        Ok(format!(
            "{SOUNDNESS_PROGRAMS} programs, {checked} states checked for membership, maximality and purity, {skipped} over the bound"
        ))
    });
    verdict(7, "soundness against the exhaustive oracle", elapsed, SOUNDNESS_LIMIT, result);
}

#[test]
fn criterion_8_audited_corpus_runs() {
    let (result, elapsed) = timed(|| {
        let mut runs = 0;
        let mut steps = 0;
        for f in fixtures()? {
            for r in verify_fixture(&f, &common::fixture_oracle)? {
                if r.audited != r.steps {
                    return Err(format!("{}: {} of {} steps audited", f.name, r.audited, r.steps));
                }
                runs += 1;
                steps += r.steps;
            }
        }
        for seed in 0..SHORTEST_GRAPHS {
            let (n, edges) = random_weighted_graph(seed, SHORTEST_MAX_NODES, SHORTEST_MAX_EDGES);
            let src = format!("{}\n{}", corpus::SHORTEST, weighted_edge_axioms(&edges));
            let c = consts(&[("startnode", Value::Node(NodeId(1))), ("finalnode", Value::Node(NodeId(n)))]);
            for workers in [1, 4] {
                let report = run(&src, &c, &RunConfig { audit: true, ..cfg(workers, seed) })?;
                if report.audited != report.steps {
                    return Err(format!("shortest graph {seed}: {} of {} steps audited", report.audited, report.steps));
                }
                runs += 1;
                steps += report.steps;
            }
        }
        Ok(format!("{runs} runs, {steps} steps audited, 0 violations"))
    });
    verdict(8, "linearity conservation audit", elapsed, AUDIT_LIMIT, result);
}
