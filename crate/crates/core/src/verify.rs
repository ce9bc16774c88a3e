//! Checks engine steps against the HLD oracle.
//!
//! [`check_state`] takes one node database and checks every rule attempt:
//! - a firing must be one of the oracle's outcomes;
//! - comprehensions must run to a fixed point;
//! - a failed attempt must match no oracle outcome;
//! - the attempt must leave the database untouched;
//! - the rule chosen by [`Engine::step`] must be the first applicable
//!   one.
//!
//! [`verify`] samples states from a sequential run of a whole program and
//! shrinks the first failing one.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::database::NodeDatabase;
use crate::engine::{commit, Engine};
use crate::hld::{Canon, Hld, HldError, NodeState};
use crate::ir::{Fact, TypedProgram};
use crate::runtime::{Graph, RuntimeError};
use crate::value::NodeId;

#[derive(Clone, Debug, PartialEq)]
pub struct Counterexample {
    pub node: NodeId,
    pub facts: Vec<Fact>,
    pub reason: String,
}

impl Counterexample {
    pub fn render(&self, program: &TypedProgram) -> String {
        let mut s = format!("at node {}: {}\n", self.node, self.reason);
        for f in &self.facts {
            s.push_str(&format!("  {}.\n", f.display(program)));
        }
        s
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    /// States checked against the oracle.
    pub checked: usize,
    /// States skipped because their linear context exceeds the bound.
    pub skipped: usize,
    pub failure: Option<Counterexample>,
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub bound: usize,
    pub samples: usize,
    pub seed: u64,
    /// Steps of the sequential run from which states are sampled.
    pub max_steps: u64,
}

/// Checks all rule attempts on `db`. `Err(None)` means the state is over
/// the oracle's bound.
pub fn check_state(engine: &Engine, hld: &Hld<'_>, db: &NodeDatabase) -> Result<(), Option<String>> {
    let st = NodeState::of(db);
    if hld.bound.is_some_and(|b| st.linear.len() > b) {
        return Err(None);
    }
    let before = db.facts();
    let fresh = engine.peek_fresh();
    let program = engine.program();
    let oracle_err = |e: HldError| match e {
        HldError::BoundExceeded { .. } => None,
        e => Some(format!("oracle: {e}")),
    };
    let mut first = None;
    for r in 0..program.rules.len() {
        let attempt = Engine::new(engine.program_arc().clone(), engine.ctx().world, engine.seed(), fresh);
        let lld = attempt.apply_rule(r, db).map_err(|e| Some(e.to_string()))?;
        if db.facts() != before {
            return Err(Some(format!("rule {r} changed the database while matching")));
        }
        let outcomes = hld.outcomes(&st, r, fresh).map_err(oracle_err)?;
        match lld {
            Some(o) => {
                first.get_or_insert(r);
                if !outcomes.contains(&Canon::of(&o)) {
                    return Err(Some(format!(
                        "rule {r} produced an outcome the oracle cannot derive ({} oracle outcomes)",
                        outcomes.len()
                    )));
                }
                hld.check_maximal(db, &o).map_err(|e| Some(format!("rule {r}: {e}")))?;
            }
            None if !outcomes.is_empty() => {
                return Err(Some(format!("rule {r} failed but the oracle has {} outcome(s)", outcomes.len())));
            }
            None => {}
        }
    }
    let chosen = engine.step(db).map_err(|e| Some(e.to_string()))?.map(|o| o.rule);
    if chosen != first {
        return Err(Some(format!("step chose rule {chosen:?}, first applicable is {first:?}")));
    }
    Ok(())
}

/// Removes facts one at a time while the check keeps failing.
pub fn minimize(engine: &Engine, hld: &Hld<'_>, db: &NodeDatabase) -> (NodeDatabase, String) {
    let fails = |d: &NodeDatabase| match check_state(engine, hld, d) {
        Err(Some(reason)) => Some(reason),
        _ => None,
    };
    let mut best = db.clone();
    let mut reason = fails(&best).unwrap_or_default();
    loop {
        let facts = best.facts();
        let mut shrunk = false;
        for skip in 0..facts.len() {
            let mut d = NodeDatabase::new(best.node(), engine.program().preds.len());
            for (i, f) in facts.iter().enumerate() {
                if i != skip {
                    d.assert_fact(f.clone()).expect("facts came from this node");
                }
            }
            if let Some(r) = fails(&d) {
                best = d;
                reason = r;
                shrunk = true;
                break;
            }
        }
        if !shrunk {
            return (best, reason);
        }
    }
}

/// Runs `program` sequentially and checks a seeded sample of the node
/// states seen before each firing, plus random sub-databases of them.
pub fn verify(program: Arc<TypedProgram>, opts: &VerifyOptions) -> Result<VerifyReport, RuntimeError> {
    let graph = Graph::load(program.clone())?;
    let engine = Engine::new(program.clone(), graph.world(), opts.seed, graph.first_fresh());
    let mut hld = Hld::new(&program, engine.ctx());
    hld.bound = Some(opts.bound);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    // Reservoir sample of pre-firing states.
    let mut sample: Vec<NodeDatabase> = Vec::new();
    let mut seen = 0usize;
    let mut nodes = graph.nodes;
    let mut queue: VecDeque<NodeId> = nodes.keys().copied().collect();
    let mut steps = 0;
    while let Some(id) = queue.pop_front() {
        loop {
            if steps >= opts.max_steps {
                break;
            }
            let db = nodes.get_mut(&id).expect("queued nodes exist");
            let Some(o) = engine.step(db)? else { break };
            seen += 1;
            if sample.len() < opts.samples {
                sample.push(db.clone());
            } else if opts.samples > 0 {
                let k = rng.gen_range(0..seen);
                if k < opts.samples {
                    sample[k] = db.clone();
                }
            }
            let remote = commit(db, &o)?;
            steps += 1;
            for f in remote {
                let home = f.home();
                let target =
                    nodes.entry(home).or_insert_with(|| NodeDatabase::new(home, program.preds.len()));
                target.assert_fact(f).map_err(|source| RuntimeError::Database { node: home, source })?;
                if !queue.contains(&home) {
                    queue.push_back(home);
                }
            }
        }
    }
    if sample.len() < opts.samples {
        // Quiescent states are worth checking too.
        for db in nodes.values() {
            if sample.len() >= opts.samples {
                break;
            }
            sample.push(db.clone());
        }
    }

    let mut report = VerifyReport::default();
    let mut states = Vec::new();
    for db in sample {
        let facts = db.facts();
        let mut sub = NodeDatabase::new(db.node(), program.preds.len());
        for f in &facts {
            if rng.gen_bool(0.5) {
                sub.assert_fact(f.clone()).expect("facts came from this node");
            }
        }
        states.push(db);
        states.push(sub);
    }
    for db in states {
        match check_state(&engine, &hld, &db) {
            Ok(()) => report.checked += 1,
            Err(None) => report.skipped += 1,
            Err(Some(_)) => {
                let (small, reason) = minimize(&engine, &hld, &db);
                report.checked += 1;
                report.failure = Some(Counterexample { node: small.node(), facts: small.facts(), reason });
                break;
            }
        }
    }
    Ok(report)
}
