//! The example programs, input generators, and fixture runner.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::check::parse_const_override;
use crate::runtime::{run_source, Graph, RunConfig, Status};
use crate::value::Value;

pub const MESSAGE: &str = include_str!("../corpus/message.lm");
pub const VISIT: &str = include_str!("../corpus/visit.lm");
pub const SHORTEST: &str = include_str!("../corpus/shortest.lm");
pub const PAGERANK: &str = include_str!("../corpus/pagerank.lm");
pub const NQUEENS: &str = include_str!("../corpus/nqueens.lm");
pub const AGGREGATE: &str = include_str!("../corpus/aggregate.lm");
pub const SELECTOR: &str = include_str!("../corpus/selector.lm");
pub const EXISTS: &str = include_str!("../corpus/exists.lm");

/// Every embedded program by file stem.
pub const PROGRAMS: &[(&str, &str)] = &[
    ("message", MESSAGE),
    ("visit", VISIT),
    ("shortest", SHORTEST),
    ("pagerank", PAGERANK),
    ("nqueens", NQUEENS),
    ("aggregate", AGGREGATE),
    ("selector", SELECTOR),
    ("exists", EXISTS),
];

/// Directory holding the `.lm` files and fixtures.
pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

/// Board cell `(x, y)`, row `x` and column `y`, is node `x * size + y`.
pub fn nqueens_cell(size: u64, x: u64, y: u64) -> u64 {
    x * size + y
}

/// Axioms for the N-Queens board: each cell links to its row neighbours
/// and to the cells two columns away on the next row.
pub fn nqueens_axioms(size: u64) -> String {
    let mut out = String::new();
    let id = |x, y| nqueens_cell(size, x, y);
    for x in 0..size {
        for y in 0..size {
            let a = id(x, y);
            writeln!(out, "!coord(@{a}, {x}, {y}).").unwrap();
            if y > 0 {
                writeln!(out, "!left(@{a}, @{}).", id(x, y - 1)).unwrap();
            }
            if y + 1 < size {
                writeln!(out, "!right(@{a}, @{}).", id(x, y + 1)).unwrap();
            }
            if x + 1 < size {
                if y >= 2 {
                    writeln!(out, "!down-left(@{a}, @{}).", id(x + 1, y - 2)).unwrap();
                }
                if y + 2 < size {
                    writeln!(out, "!down-right(@{a}, @{}).", id(x + 1, y + 2)).unwrap();
                }
            }
        }
    }
    out
}

/// Directed edges of the PageRank input: a ring `i -> i+1` plus a hub at
/// node 0 linking to every other node.
pub fn pagerank_ring_edges(size: u64) -> Vec<(u64, u64)> {
    let mut edges = std::collections::BTreeSet::new();
    for i in 0..size {
        if size > 1 {
            edges.insert((i, (i + 1) % size));
        }
        if i > 0 {
            edges.insert((0, i));
        }
    }
    edges.into_iter().collect()
}

pub fn pagerank_ring_axioms(size: u64) -> String {
    let edges = pagerank_ring_edges(size);
    let mut out = String::new();
    let mut outdeg = vec![0; size as usize];
    let mut indeg = vec![0; size as usize];
    for &(a, b) in &edges {
        writeln!(out, "!output(@{a}, @{b}, 1.0).").unwrap();
        outdeg[a as usize] += 1;
        indeg[b as usize] += 1;
    }
    for i in 0..size as usize {
        writeln!(out, "!numLinks(@{i}, {}).", outdeg[i]).unwrap();
        writeln!(out, "!numInput(@{i}, {}).", indeg[i]).unwrap();
    }
    out
}

/// A random weighted digraph on nodes `1..=n`: a spanning tree rooted at
/// node 1 plus extra edges, without parallel edges or self loops.
pub fn random_weighted_graph(seed: u64, max_nodes: u64, max_edges: usize) -> (u64, Vec<(u64, u64, i64)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=max_nodes);
    let mut edges = BTreeMap::new();
    for b in 2..=n {
        let a = rng.gen_range(1..b);
        edges.insert((a, b), rng.gen_range(1..=10));
    }
    let possible = (n * (n - 1)) as usize;
    let target = rng.gen_range(edges.len()..=max_edges.min(possible));
    while edges.len() < target {
        let a = rng.gen_range(1..=n);
        let b = rng.gen_range(1..=n);
        if a != b {
            edges.entry((a, b)).or_insert_with(|| rng.gen_range(1..=10));
        }
    }
    (n, edges.into_iter().map(|((a, b), w)| (a, b, w)).collect())
}

pub fn weighted_edge_axioms(edges: &[(u64, u64, i64)]) -> String {
    edges.iter().map(|(a, b, w)| format!("!edge(@{a}, @{b}, {w}).\n")).collect()
}

/// Output of `lm gen <kind> --size N`.
pub fn generate(kind: &str, size: u64) -> Result<String, String> {
    match kind {
        "nqueens" => Ok(nqueens_axioms(size)),
        "pagerank-ring" => Ok(pagerank_ring_axioms(size)),
        _ => Err(format!("unknown generator `{kind}`; expected nqueens or pagerank-ring")),
    }
}

/// A fixture: programs to run, how to run them, and what to expect.
#[derive(Clone, Debug, PartialEq)]
pub struct Fixture {
    pub name: String,
    /// Source files, concatenated in order.
    pub programs: Vec<PathBuf>,
    /// Generated axioms appended to the sources.
    pub generated: Vec<(String, u64)>,
    pub consts: BTreeMap<String, Value>,
    pub expected: Option<PathBuf>,
    pub oracle: Option<String>,
    pub workers: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl Fixture {
    /// Reads `key = value` lines. Paths are relative to the file.
    pub fn parse(name: &str, text: &str, dir: &Path) -> Result<Fixture, String> {
        let mut f = Fixture {
            name: name.to_string(),
            programs: Vec::new(),
            generated: Vec::new(),
            consts: BTreeMap::new(),
            expected: None,
            oracle: None,
            workers: vec![1],
            seeds: vec![0],
        };
        let list = |v: &str| -> Result<Vec<u64>, String> {
            v.split(',').map(|x| x.trim().parse().map_err(|e| format!("`{x}`: {e}"))).collect()
        };
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "program" => f.programs.extend(value.split_whitespace().map(|p| dir.join(p))),
                "gen" => {
                    let (kind, size) = value.split_once(' ').ok_or("gen needs a kind and a size")?;
                    let size = size.trim().parse().map_err(|e| format!("gen size: {e}"))?;
                    f.generated.push((kind.to_string(), size));
                }
                "expected" => f.expected = Some(dir.join(value)),
                "oracle" => f.oracle = Some(value.to_string()),
                "workers" => f.workers = list(value)?.into_iter().map(|w| w as usize).collect(),
                "seeds" => f.seeds = list(value)?,
                _ if key.starts_with("const.") => {
                    let (k, v) = parse_const_override(&format!("{}={value}", &key[6..]))?;
                    f.consts.insert(k, v);
                }
                _ => return Err(format!("line {}: unknown key `{key}`", n + 1)),
            }
        }
        if f.programs.is_empty() {
            return Err("fixture names no program".into());
        }
        if f.expected.is_none() && f.oracle.is_none() {
            return Err("fixture needs `expected` or `oracle`".into());
        }
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Fixture, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("fixture");
        Fixture::parse(name, &text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn source(&self) -> Result<String, String> {
        let mut src = String::new();
        for p in &self.programs {
            src.push_str(&std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?);
            src.push('\n');
        }
        for (kind, size) in &self.generated {
            src.push_str(&generate(kind, *size)?);
        }
        Ok(src)
    }
}

/// All fixtures in the corpus directory, by name.
pub fn fixtures() -> Result<Vec<Fixture>, String> {
    let dir = corpus_dir().join("fixtures");
    let mut paths: Vec<_> = std::fs::read_dir(&dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "conf"))
        .collect();
    paths.sort();
    paths.iter().map(|p| Fixture::load(p)).collect()
}

/// Result of one fixture run configuration.
#[derive(Clone, Debug)]
pub struct FixtureRun {
    pub workers: usize,
    pub seed: u64,
    pub graph: Graph,
    pub steps: u64,
    pub audited: u64,
}

/// Runs the fixture under every configured worker count and seed with the
/// audit on, and checks each final database against the expected dump or
/// the named oracle. `oracles` maps an oracle id and a final graph to a
/// verdict.
pub fn verify_fixture(
    f: &Fixture,
    oracles: &dyn Fn(&str, &Fixture, &Graph) -> Result<(), String>,
) -> Result<Vec<FixtureRun>, String> {
    let src = f.source()?;
    let expected = match &f.expected {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?),
        None => None,
    };
    let mut runs = Vec::new();
    for &workers in &f.workers {
        for &seed in &f.seeds {
            let cfg = RunConfig { workers, seed, max_steps: None, trace: false, audit: true };
            let label = format!("{} (workers {workers}, seed {seed})", f.name);
            let report = run_source(&src, &f.consts, &cfg).map_err(|e| format!("{label}: {e}"))?;
            if report.status != Status::Quiescent {
                return Err(format!("{label}: did not reach quiescence"));
            }
            if let Some(oracle) = &f.oracle {
                oracles(oracle, f, &report.graph).map_err(|e| format!("{label}: {e}"))?;
            }
            if let Some(exp) = &expected {
                diff(exp, &report.graph.dump()).map_err(|e| format!("{label}: {e}"))?;
            }
            runs.push(FixtureRun { workers, seed, steps: report.steps, audited: report.audited, graph: report.graph });
        }
    }
    if let Some(first) = runs.first() {
        let want = first.graph.dump();
        for r in &runs[1..] {
            diff(&want, &r.graph.dump())
                .map_err(|e| format!("{}: workers {} seed {} differs from the first run: {e}", f.name, r.workers, r.seed))?;
        }
    }
    Ok(runs)
}

/// Reports the first line where two dumps differ.
pub fn diff(expected: &str, actual: &str) -> Result<(), String> {
    let mut e = expected.lines();
    let mut a = actual.lines();
    for n in 1.. {
        match (e.next(), a.next()) {
            (None, None) => return Ok(()),
            (x, y) if x == y => continue,
            (x, y) => {
                return Err(format!(
                    "line {n}: expected `{}`, found `{}`",
                    x.unwrap_or("<end>"),
                    y.unwrap_or("<end>")
                ))
            }
        }
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nqueens_wiring_follows_the_board() {
        let text = nqueens_axioms(8);
        let c = |x, y| nqueens_cell(8, x, y);
        for needle in [
            format!("!left(@{}, @{}).", c(0, 3), c(0, 2)),
            format!("!right(@{}, @{}).", c(0, 3), c(0, 4)),
            format!("!down-left(@{}, @{}).", c(0, 3), c(1, 1)),
            format!("!down-right(@{}, @{}).", c(0, 3), c(1, 5)),
        ] {
            assert!(text.contains(&needle), "{needle}");
        }
        assert!(!text.contains(&format!("!down-left(@{},", c(0, 1))));
    }

    #[test]
    fn ring_with_hub() {
        assert_eq!(pagerank_ring_edges(4), vec![(0, 1), (0, 2), (0, 3), (1, 2), (2, 3), (3, 0)]);
    }

    #[test]
    fn random_graphs_are_rooted_and_bounded() {
        for seed in 0..20 {
            let (n, edges) = random_weighted_graph(seed, 20, 60);
            assert!(n <= 20 && edges.len() <= 60);
            for b in 2..=n {
                assert!(edges.iter().any(|&(_, t, _)| t == b));
            }
            assert!(edges.iter().all(|&(a, b, w)| a != b && (1..=10).contains(&w)));
        }
    }

    #[test]
    fn diff_names_the_first_mismatch() {
        assert_eq!(diff("a\nb\n", "a\nc\n"), Err("line 2: expected `b`, found `c`".into()));
        assert_eq!(diff("a\n", "a\n"), Ok(()));
    }
}
