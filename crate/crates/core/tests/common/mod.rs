//! Oracles that compute expected results without the rule engine.

#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use linear_meld::corpus::{pagerank_ring_edges, Fixture};
use linear_meld::ir::Fact;
use linear_meld::runtime::Graph;
use linear_meld::value::{NodeId, Value};

pub fn node(v: &Value) -> u64 {
    v.as_node().expect("node argument").0
}

pub fn int(v: &Value) -> i64 {
    match v {
        Value::Int(i) => *i,
        other => panic!("expected int, found {other:?}"),
    }
}

pub fn float(v: &Value) -> f64 {
    match v {
        Value::Float(x) => *x,
        other => panic!("expected float, found {other:?}"),
    }
}

pub fn list(v: &Value) -> Vec<Value> {
    match v {
        Value::List(l) => l.to_vec(),
        other => panic!("expected list, found {other:?}"),
    }
}

/// Single-source shortest distances over directed weighted edges. Edges
/// leaving `stop` are not relaxed.
pub fn dijkstra(edges: &[(u64, u64, i64)], start: u64, stop: u64) -> BTreeMap<u64, i64> {
    let mut adj: BTreeMap<u64, Vec<(u64, i64)>> = BTreeMap::new();
    for &(a, b, w) in edges {
        adj.entry(a).or_default().push((b, w));
    }
    let mut dist = BTreeMap::new();
    let mut heap = BinaryHeap::from([Reverse((0i64, start))]);
    while let Some(Reverse((d, n))) = heap.pop() {
        if dist.contains_key(&n) {
            continue;
        }
        dist.insert(n, d);
        if n == stop {
            continue;
        }
        for &(b, w) in adj.get(&n).into_iter().flatten() {
            if !dist.contains_key(&b) {
                heap.push(Reverse((d + w, b)));
            }
        }
    }
    dist
}

/// Every node reached holds exactly one `path` fact with the oracle's
/// distance; the others hold none.
pub fn check_shortest(graph: &Graph, edges: &[(u64, u64, i64)], start: u64, stop: u64) -> Result<(), String> {
    let want = dijkstra(edges, start, stop);
    let mut got: BTreeMap<u64, Vec<(i64, i64)>> = BTreeMap::new();
    for f in graph.facts_of("path") {
        got.entry(node(&f.args[0])).or_default().push((int(&f.args[1]), int(&f.args[2])));
    }
    for (n, paths) in &got {
        let Some(&d) = want.get(n) else { return Err(format!("@{n} is unreachable but holds {paths:?}")) };
        let used = if *n == stop { 0 } else { 1 };
        if paths.as_slice() != [(d, used)] {
            return Err(format!("@{n}: expected path(@{n}, {d}, {used}), found {paths:?}"));
        }
    }
    if let Some(n) = want.keys().find(|n| !got.contains_key(n)) {
        return Err(format!("@{n} is reachable but holds no path"));
    }
    Ok(())
}

pub fn edges_of(graph: &Graph) -> Vec<(u64, u64, i64)> {
    graph.facts_of("edge").iter().map(|f| (node(&f.args[0]), node(&f.args[1]), int(&f.args[2]))).collect()
}

/// Ranks after `iterations` rounds of V = 0.85 + 0.15 * Σ V(b) / outdeg(b)
/// over in-neighbours b, starting from 1 / n.
pub fn pagerank(n: u64, edges: &[(u64, u64)], iterations: u64) -> Vec<f64> {
    let outdeg: Vec<usize> = (0..n).map(|a| edges.iter().filter(|e| e.0 == a).count()).collect();
    let mut v = vec![1.0 / n as f64; n as usize];
    for _ in 0..iterations {
        let mut acc = vec![0.0; n as usize];
        for &(a, b) in edges {
            acc[b as usize] += v[a as usize] / outdeg[a as usize] as f64;
        }
        v = acc.iter().map(|s| 0.85 + 0.15 * s).collect();
    }
    v
}

pub const PAGERANK_TOL: f64 = 1e-9;

pub fn check_pagerank(graph: &Graph, size: u64, iterations: u64) -> Result<(), String> {
    let want = pagerank(size, &pagerank_ring_edges(size), iterations);
    let ranks = graph.facts_of("pagerank");
    if ranks.len() != size as usize {
        return Err(format!("expected {size} pagerank facts, found {}", ranks.len()));
    }
    for f in ranks {
        let (a, v, id) = (node(&f.args[0]), float(&f.args[1]), int(&f.args[2]));
        if id != iterations as i64 {
            return Err(format!("@{a}: rank for iteration {id}, expected {iterations}"));
        }
        if (v - want[a as usize]).abs() > PAGERANK_TOL {
            return Err(format!("@{a}: rank {v}, oracle {}", want[a as usize]));
        }
    }
    Ok(())
}

/// All placements of `size` queens, as the column of the queen in each
/// row, found by plain backtracking.
pub fn queens(size: usize) -> BTreeSet<Vec<usize>> {
    fn place(size: usize, cols: &mut Vec<usize>, out: &mut BTreeSet<Vec<usize>>) {
        if cols.len() == size {
            out.insert(cols.clone());
            return;
        }
        let row = cols.len();
        for c in 0..size {
            let safe = cols.iter().enumerate().all(|(r, &q)| q != c && row - r != c.abs_diff(q));
            if safe {
                cols.push(c);
                place(size, cols, out);
                cols.pop();
            }
        }
    }
    let mut out = BTreeSet::new();
    place(size, &mut Vec::new(), &mut out);
    out
}

/// Columns by row from a `final-state` fact, after checking that no two
/// queens attack each other and the node list matches the coordinates.
pub fn solution_of(f: &Fact, size: u64) -> Result<Vec<usize>, String> {
    let nodes = list(&f.args[1]);
    let coords: Vec<i64> = list(&f.args[2]).iter().map(int).collect();
    if coords.len() != 2 * size as usize || nodes.len() != size as usize {
        return Err(format!("incomplete board {coords:?}"));
    }
    let queens: Vec<(i64, i64)> = coords.chunks(2).map(|c| (c[0], c[1])).collect();
    for (i, &(x, y)) in queens.iter().enumerate() {
        if node(&nodes[i]) != x as u64 * size + y as u64 {
            return Err(format!("node {:?} does not sit at ({x}, {y})", nodes[i]));
        }
        for &(x2, y2) in &queens[i + 1..] {
            if x == x2 || y == y2 || (x - x2).abs() == (y - y2).abs() {
                return Err(format!("queens ({x}, {y}) and ({x2}, {y2}) attack each other"));
            }
        }
    }
    if node(&f.args[0]) != node(&nodes[0]) || queens[0].0 != size as i64 - 1 {
        return Err(format!("final state at {:?} is not on the bottom row", f.args[0]));
    }
    let mut cols = vec![0; size as usize];
    for (x, y) in queens {
        cols[x as usize] = y as usize;
    }
    Ok(cols)
}

pub fn check_nqueens(graph: &Graph, size: u64) -> Result<usize, String> {
    let want = queens(size as usize);
    let finals = graph.facts_of("final-state");
    let got = finals.iter().map(|f| solution_of(f, size)).collect::<Result<Vec<_>, _>>()?;
    if got.len() != want.len() {
        return Err(format!("{} final states, enumerator finds {}", got.len(), want.len()));
    }
    if got.into_iter().collect::<BTreeSet<_>>() != want {
        return Err("final states differ from the enumerated solutions".into());
    }
    Ok(want.len())
}

fn const_u64(f: &Fixture, name: &str) -> Result<u64, String> {
    match f.consts.get(name) {
        Some(Value::Int(i)) => Ok(*i as u64),
        Some(Value::Node(NodeId(n))) => Ok(*n),
        other => Err(format!("fixture const {name} is {other:?}")),
    }
}

fn gen_size(f: &Fixture, kind: &str) -> Result<u64, String> {
    f.generated.iter().find(|(k, _)| k == kind).map(|(_, s)| *s).ok_or(format!("fixture has no {kind} input"))
}

/// Oracle dispatch for fixtures.
pub fn fixture_oracle(id: &str, f: &Fixture, graph: &Graph) -> Result<(), String> {
    match id {
        "dijkstra" => {
            let edges = edges_of(graph);
            check_shortest(graph, &edges, const_u64(f, "startnode")?, const_u64(f, "finalnode")?)
        }
        "pagerank" => check_pagerank(graph, gen_size(f, "pagerank-ring")?, const_u64(f, "iterations")?),
        "nqueens" => check_nqueens(graph, gen_size(f, "nqueens")?).map(|_| ()),
        _ => Err(format!("unknown oracle `{id}`")),
    }
}

/// A small random program: up to 3 predicates, 6 axioms and 2 rules, all
/// at one home node, with at most one comprehension.
pub fn random_program(seed: u64) -> String {
    use rand::{Rng, SeedableRng};
    use std::fmt::Write as _;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let preds: Vec<(bool, bool)> =
        (0..rng.gen_range(1..=3)).map(|_| (rng.gen_bool(0.7), rng.gen_bool(0.7))).collect();
    let mut src = String::new();
    for (i, &(linear, binary)) in preds.iter().enumerate() {
        let lin = if linear { "linear " } else { "" };
        let args = if binary { "node, int" } else { "node" };
        writeln!(src, "type {lin}p{i}({args}).").unwrap();
    }
    let fact = |rng: &mut rand_chacha::ChaCha8Rng, node: &str, arg: &dyn Fn(&mut rand_chacha::ChaCha8Rng) -> String| {
        let i = rng.gen_range(0..preds.len());
        let (linear, binary) = preds[i];
        let bang = if linear { "" } else { "!" };
        if binary {
            format!("{bang}p{i}({node}, {})", arg(rng))
        } else {
            format!("{bang}p{i}({node})")
        }
    };
    for _ in 0..rng.gen_range(0..=6) {
        let f = fact(&mut rng, "@1", &|r| r.gen_range(0..2).to_string());
        writeln!(src, "{f}.").unwrap();
    }
    let mut comprehension = rng.gen_bool(0.7);
    for _ in 0..rng.gen_range(1..=2) {
        let mut bound = std::collections::BTreeSet::new();
        let mut body = Vec::new();
        for _ in 0..rng.gen_range(1..=3) {
            let t = fact(&mut rng, "A", &|r| match r.gen_range(0..6) {
                0 => "_".into(),
                1 => r.gen_range(0..2).to_string(),
                2 | 3 => "X".into(),
                4 => "Y".into(),
                _ => "Z".into(),
            });
            for v in ["X", "Y", "Z"] {
                if t.contains(&format!(", {v})")) {
                    bound.insert(v);
                }
            }
            body.push(t);
        }
        let vars: Vec<&str> = bound.iter().copied().collect();
        if vars.len() >= 1 && rng.gen_bool(0.3) {
            let op = ["<", "<=", "=", "<>"][rng.gen_range(0..4)];
            let a = vars[rng.gen_range(0..vars.len())];
            let b = if rng.gen_bool(0.5) { vars[rng.gen_range(0..vars.len())].to_string() } else { rng.gen_range(0..3).to_string() };
            body.push(format!("{a} {op} {b}"));
        }
        let mut head = Vec::new();
        for _ in 0..rng.gen_range(0..=2) {
            head.push(fact(&mut rng, "A", &|r| {
                if !vars.is_empty() && r.gen_bool(0.6) {
                    let v = vars[r.gen_range(0..vars.len())];
                    if r.gen_bool(0.3) { format!("{v} + 1") } else { v.to_string() }
                } else {
                    r.gen_range(0..3).to_string()
                }
            }));
        }
        if comprehension && rng.gen_bool(0.7) {
            comprehension = false;
            let inner = |r: &mut rand_chacha::ChaCha8Rng| match r.gen_range(0..3) {
                0 => "U".to_string(),
                1 => r.gen_range(0..3).to_string(),
                _ if !vars.is_empty() => vars[r.gen_range(0..vars.len())].to_string(),
                _ => "U".to_string(),
            };
            let cbody: Vec<String> = (0..rng.gen_range(1..=2)).map(|_| fact(&mut rng, "A", &inner)).collect();
            let local = if cbody.iter().any(|t| t.contains(", U)")) { "U" } else { "." };
            let chead = fact(&mut rng, "A", &|r| {
                if local == "U" && r.gen_bool(0.7) { "U".into() } else { r.gen_range(0..3).to_string() }
            });
            head.push(format!("{{{local} | {} | {chead}}}", cbody.join(", ")));
        }
        let head = if head.is_empty() { "1".to_string() } else { head.join(", ") };
        writeln!(src, "{} -o {head}.", body.join(", ")).unwrap();
    }
    src
}

/// `src` without its ground axioms (lines starting with `!` or with a
/// fact at a literal node).
pub fn rules_only(src: &str) -> String {
    src.lines()
        .filter(|l| {
            let t = l.trim_start();
            let name_end = t.find('(').unwrap_or(0);
            !(t.starts_with('!') || (name_end > 0 && t[name_end..].starts_with("(@") && !t.contains("-o")))
        })
        .map(|l| format!("{l}\n"))
        .collect()
}

pub fn typed(src: &str) -> std::sync::Arc<linear_meld::ir::TypedProgram> {
    typed_with(src, &BTreeMap::new())
}

pub fn typed_with(src: &str, consts: &BTreeMap<String, Value>) -> std::sync::Arc<linear_meld::ir::TypedProgram> {
    let program = linear_meld::syntax::parse_source(src).unwrap_or_else(|e| panic!("{e}\n{src}"));
    let typed = linear_meld::check::check_program(&program, consts).unwrap_or_else(|e| panic!("{e:?}\n{src}"));
    std::sync::Arc::new(typed)
}

pub fn graph(src: &str) -> Graph {
    Graph::load(typed(src)).expect("loads")
}

/// The engine a sequential run of `graph` would use.
pub fn engine(graph: &Graph, seed: u64) -> linear_meld::engine::Engine {
    linear_meld::engine::Engine::new(graph.program.clone(), graph.world(), seed, graph.first_fresh())
}

/// Sorted display strings.
pub fn shown<'a>(program: &linear_meld::ir::TypedProgram, facts: impl IntoIterator<Item = &'a Fact>) -> Vec<String> {
    let mut out: Vec<String> = facts.into_iter().map(|f| f.display(program).to_string()).collect();
    out.sort();
    out
}
