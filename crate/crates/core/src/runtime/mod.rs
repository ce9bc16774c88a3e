//! Whole-program execution: load the graph, schedule nodes on worker
//! threads, route facts between nodes and stop at global quiescence.

mod audit;
mod scheduler;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::database::{DbError, NodeDatabase};
use crate::engine::EngineError;
use crate::ir::{AxiomFact, Fact, TypedProgram};
use crate::value::NodeId;

pub use audit::audit_step;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("node {node}: {source}")]
    Database {
        node: NodeId,
        #[source]
        source: DbError,
    },
    #[error("audit failed at node {node} after rule {rule}: {detail}")]
    Audit { node: NodeId, rule: usize, detail: String },
}

/// Node databases of a whole program.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    pub program: Arc<TypedProgram>,
    pub nodes: BTreeMap<NodeId, NodeDatabase>,
}

impl Graph {
    /// Materializes every node mentioned by an axiom and asserts the axioms
    /// at their home nodes. Axioms with a variable home hold at every node.
    pub fn load(program: Arc<TypedProgram>) -> Result<Graph, RuntimeError> {
        let mut ids = BTreeSet::new();
        for a in &program.axioms {
            match a {
                AxiomFact::Ground(f) => {
                    let mut found = Vec::new();
                    f.args.iter().for_each(|v| v.collect_nodes(&mut found));
                    ids.extend(found);
                }
                AxiomFact::PerNode { rest, .. } => {
                    let mut found = Vec::new();
                    rest.iter().for_each(|v| v.collect_nodes(&mut found));
                    ids.extend(found);
                }
            }
        }
        let n = program.preds.len();
        let mut nodes: BTreeMap<NodeId, NodeDatabase> = ids.iter().map(|&id| (id, NodeDatabase::new(id, n))).collect();
        let mut put = |f: Fact| {
            let node = f.home();
            nodes.get_mut(&node).expect("axiom nodes were collected").assert_fact(f).map_err(|source| {
                RuntimeError::Database { node, source }
            })
        };
        for a in &program.axioms {
            match a {
                AxiomFact::Ground(f) => {
                    put(f.clone())?;
                }
                AxiomFact::PerNode { pred, linear, rest } => {
                    for &id in &ids {
                        let mut args = vec![crate::value::Value::Node(id)];
                        args.extend(rest.iter().cloned());
                        put(Fact { pred: *pred, linear: *linear, args })?;
                    }
                }
            }
        }
        Ok(Graph { program, nodes })
    }

    /// The value of `@world`.
    pub fn world(&self) -> i64 {
        self.nodes.len() as i64
    }

    /// First id available to `exists`.
    pub fn first_fresh(&self) -> u64 {
        self.nodes.keys().next_back().map_or(0, |n| n.0 + 1)
    }

    /// Canonical text of all databases: one line per distinct fact,
    /// `node <id>: pred(args) x<multiplicity>`, sorted by node, predicate
    /// name and arguments.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (id, db) in &self.nodes {
            let mut lines: BTreeMap<(&str, &[crate::value::Value]), usize> = BTreeMap::new();
            let facts = db.facts();
            for f in &facts {
                *lines.entry((self.program.pred_name(f.pred), &f.args)).or_insert(0) += 1;
            }
            for ((name, args), count) in lines {
                let args: Vec<String> = args.iter().map(|a| a.to_string()).collect();
                writeln!(out, "node {id}: {name}({}) x{count}", args.join(", ")).unwrap();
            }
        }
        out
    }

    /// All facts of one predicate across the graph, by node.
    pub fn facts_of(&self, pred: &str) -> Vec<Fact> {
        let Some(p) = self.program.pred(pred) else { return Vec::new() };
        self.nodes.values().flat_map(|db| db.facts()).filter(|f| f.pred == p).collect()
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub workers: usize,
    /// Seed for `random` selectors.
    pub seed: u64,
    pub max_steps: Option<u64>,
    pub trace: bool,
    /// Check every step against the conservation law.
    pub audit: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { workers: 1, seed: 0, max_steps: None, trace: false, audit: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Quiescent,
    StepLimit,
}

/// One rule firing.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceEvent {
    pub worker: usize,
    pub node: NodeId,
    pub rule: usize,
    pub consumed: Vec<Fact>,
    pub derived: Vec<Fact>,
}

impl TraceEvent {
    /// `node <id> rule <k>: consumed {...} derived {...}`
    pub fn render(&self, program: &TypedProgram) -> String {
        let list = |fs: &[Fact]| fs.iter().map(|f| f.display(program).to_string()).collect::<Vec<_>>().join(", ");
        format!(
            "node {} rule {}: consumed {{{}}} derived {{{}}}",
            self.node,
            self.rule,
            list(&self.consumed),
            list(&self.derived)
        )
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub graph: Graph,
    pub status: Status,
    pub steps: u64,
    /// Rule firings per worker.
    pub fired: Vec<u64>,
    pub trace: Vec<TraceEvent>,
    /// Number of steps checked by the audit.
    pub audited: u64,
}

/// Runs `graph` until no rule applies anywhere, or the step limit is hit.
pub fn run(graph: Graph, cfg: &RunConfig) -> Result<RunReport, RuntimeError> {
    scheduler::run(graph, cfg)
}

/// Parses, checks, loads and runs `src` in one call.
pub fn run_source(
    src: &str,
    consts: &BTreeMap<String, crate::value::Value>,
    cfg: &RunConfig,
) -> Result<RunReport, Box<dyn std::error::Error + Send + Sync>> {
    let program = crate::syntax::parse_source(src)?;
    let typed = crate::check::check_program(&program, consts).map_err(|errs| {
        errs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n")
    })?;
    let graph = Graph::load(Arc::new(typed))?;
    Ok(run(graph, cfg)?)
}
