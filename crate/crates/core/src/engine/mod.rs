//! Low-level rule application.
//!
//! The engine applies one rule at a time to a single node database. It
//! never mutates the database: an application yields an [`Outcome`] that
//! the caller commits with [`commit`].

mod search;

use std::collections::HashSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::database::{DbError, FactId, NodeDatabase};
use crate::eval::{eval, Bindings, EvalCtx, EvalError};
use crate::ir::{AggSpec, CompiledRule, Fact, HeadFact, HeadItem, MatchItem, PredId, TypedProgram};
use crate::syntax::ast::{AggregateOp, SelectorOp};
use crate::value::{NodeId, Value};

use search::Search;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum EngineError {
    #[error("rule {rule} at node {node}: {source}")]
    Eval {
        rule: usize,
        node: NodeId,
        #[source]
        source: EvalError,
    },
    #[error("node {node}: {source}")]
    Database {
        node: NodeId,
        #[source]
        source: DbError,
    },
}

/// How often a comprehension or aggregate fired during one application.
#[derive(Clone, Debug, PartialEq)]
pub struct CompTrace {
    /// Position of the item in the rule head.
    pub item: usize,
    /// Bindings of the enclosing rule when the item started.
    pub outer: Vec<Option<Value>>,
    /// Linear facts unavailable to the item once it finished.
    pub excluded: Vec<FactId>,
    pub applications: usize,
}

/// The effect of one rule application.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub rule: usize,
    pub node: NodeId,
    /// Linear facts consumed, by the body and by head comprehensions.
    pub consumed: Vec<(FactId, Fact)>,
    /// Derived facts in head order, wherever they live.
    pub derived: Vec<Fact>,
    /// Nodes created by `exists`.
    pub new_nodes: Vec<NodeId>,
    /// Bindings of the body match.
    pub bindings: Vec<Option<Value>>,
    pub traces: Vec<CompTrace>,
}

impl Outcome {
    pub fn derived_linear(&self) -> impl Iterator<Item = &Fact> {
        self.derived.iter().filter(|f| f.linear)
    }

    /// Derived persistent facts without repeats, first occurrence first.
    pub fn derived_persistent(&self) -> Vec<&Fact> {
        let mut seen = HashSet::new();
        self.derived.iter().filter(|f| !f.linear && seen.insert(*f)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Engine {
    program: Arc<TypedProgram>,
    ctx: EvalCtx,
    seed: u64,
    fresh: Arc<AtomicU64>,
    /// Linear predicates each rule body needs at least one fact of.
    needs: Arc<Vec<Vec<PredId>>>,
}

impl Engine {
    /// `world` is the value of `@world`; `first_fresh` is the first id handed
    /// out by `exists`.
    pub fn new(program: Arc<TypedProgram>, world: i64, seed: u64, first_fresh: u64) -> Self {
        let needs = program
            .rules
            .iter()
            .map(|r| {
                let mut ps: Vec<PredId> = r
                    .body
                    .iter()
                    .filter_map(|i| match i {
                        MatchItem::Fact(t) if t.linear => Some(t.pred),
                        _ => None,
                    })
                    .collect();
                ps.dedup();
                ps
            })
            .collect();
        Engine {
            program,
            ctx: EvalCtx { world },
            seed,
            fresh: Arc::new(AtomicU64::new(first_fresh)),
            needs: Arc::new(needs),
        }
    }

    pub fn program(&self) -> &TypedProgram {
        &self.program
    }

    pub fn program_arc(&self) -> &Arc<TypedProgram> {
        &self.program
    }

    pub fn ctx(&self) -> EvalCtx {
        self.ctx
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The id the next `exists` will receive.
    pub fn peek_fresh(&self) -> u64 {
        self.fresh.load(Ordering::SeqCst)
    }

    /// Applies the highest-priority rule that matches.
    pub fn step(&self, db: &NodeDatabase) -> Result<Option<Outcome>, EngineError> {
        for r in 0..self.program.rules.len() {
            if let Some(o) = self.apply_rule(r, db)? {
                return Ok(Some(o));
            }
        }
        Ok(None)
    }

    /// Applies rule `r` once, choosing the first match in fact order.
    pub fn apply_rule(&self, r: usize, db: &NodeDatabase) -> Result<Option<Outcome>, EngineError> {
        if self.needs[r].iter().any(|&p| db.linear_count_of(p) == 0) {
            return Ok(None);
        }
        let rule = &self.program.rules[r];
        let err = |source| EngineError::Eval { rule: r, node: db.node(), source };
        let mut b = Bindings::new(rule.num_slots());
        b.bind(rule.home, Value::Node(db.node()));
        let none = HashSet::new();
        let xi = match rule.selector {
            None => {
                let mut s = Search::new(db, &rule.body, self.ctx, false);
                if !s.next(&mut b, &none).map_err(err)? {
                    return Ok(None);
                }
                std::mem::take(&mut s.xi)
            }
            Some((op, slot)) => {
                let mut s = Search::new(db, &rule.body, self.ctx, false);
                let mut all = Vec::new();
                while s.next(&mut b, &none).map_err(err)? {
                    all.push((b.values().to_vec(), s.xi.clone()));
                }
                match op {
                    SelectorOp::Min => all.sort_by(|x, y| x.0[slot].cmp(&y.0[slot])),
                    SelectorOp::Max => all.sort_by(|x, y| y.0[slot].cmp(&x.0[slot])),
                    SelectorOp::Random => all.shuffle(&mut self.selector_rng(db.node(), r)),
                }
                let Some((values, xi)) = all.into_iter().next() else { return Ok(None) };
                b = Bindings::from_values(values);
                xi
            }
        };
        let mut out = Outcome {
            rule: r,
            node: db.node(),
            consumed: Vec::new(),
            derived: Vec::new(),
            new_nodes: Vec::new(),
            bindings: b.values().to_vec(),
            traces: Vec::new(),
        };
        let mut consumed = HashSet::new();
        for id in xi {
            consumed.insert(id);
            out.consumed.push((id, fetch(db, id)));
        }
        self.derive_head(rule, db, &mut b, &mut consumed, &mut out).map_err(err)?;
        Ok(Some(out))
    }

    fn selector_rng(&self, node: NodeId, rule: usize) -> ChaCha8Rng {
        let mut s = self.seed ^ 0x9e37_79b9_7f4a_7c15;
        for x in [node.0, rule as u64] {
            s = (s ^ x).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            s ^= s >> 31;
        }
        ChaCha8Rng::seed_from_u64(s)
    }

    fn derive_head(
        &self,
        rule: &CompiledRule,
        db: &NodeDatabase,
        b: &mut Bindings,
        consumed: &mut HashSet<FactId>,
        out: &mut Outcome,
    ) -> Result<(), EvalError> {
        for (k, item) in rule.head.iter().enumerate() {
            match item {
                HeadItem::Fact(hf) => out.derived.push(self.instantiate(hf, b)?),
                HeadItem::Exists(slots, facts) => {
                    for &s in slots {
                        let id = NodeId(self.fresh.fetch_add(1, Ordering::SeqCst));
                        out.new_nodes.push(id);
                        b.bind(s, Value::Node(id));
                    }
                    for hf in facts {
                        out.derived.push(self.instantiate(hf, b)?);
                    }
                }
                HeadItem::Comprehension(c) => {
                    let outer = b.values().to_vec();
                    let apps = self.repeat(db, &c.body, b, consumed, out, |_, _| Ok(()), &c.head)?;
                    out.traces.push(CompTrace { item: k, outer, excluded: sorted(consumed), applications: apps });
                }
                HeadItem::Aggregate(a) => {
                    let outer = b.values().to_vec();
                    let mut acc: Vec<Option<Value>> = a.specs.iter().map(agg_start).collect();
                    let apps = self.repeat(
                        db,
                        &a.body,
                        b,
                        consumed,
                        out,
                        |b, _| fold(&a.specs, &mut acc, b),
                        &a.each,
                    )?;
                    out.traces.push(CompTrace { item: k, outer, excluded: sorted(consumed), applications: apps });
                    if acc.iter().any(Option::is_none) {
                        continue;
                    }
                    let mark = b.mark();
                    for (spec, v) in a.specs.iter().zip(acc) {
                        b.bind(spec.result, v.unwrap());
                    }
                    for hf in &a.last {
                        out.derived.push(self.instantiate(hf, b)?);
                    }
                    b.undo(mark);
                }
            }
        }
        Ok(())
    }

    /// Applies a comprehension body as often as it matches, consuming linear
    /// facts as it goes, and returns the number of applications.
    #[allow(clippy::too_many_arguments)]
    fn repeat(
        &self,
        db: &NodeDatabase,
        body: &[MatchItem],
        b: &mut Bindings,
        consumed: &mut HashSet<FactId>,
        out: &mut Outcome,
        mut on_match: impl FnMut(&Bindings, usize) -> Result<(), EvalError>,
        head: &[HeadFact],
    ) -> Result<usize, EvalError> {
        let mark = b.mark();
        let mut s = Search::new(db, body, self.ctx, true);
        let mut apps = 0;
        while s.next(b, consumed)? {
            apps += 1;
            for &id in &s.xi {
                consumed.insert(id);
                out.consumed.push((id, fetch(db, id)));
            }
            s.fix_stack(consumed);
            on_match(b, apps)?;
            for hf in head {
                out.derived.push(self.instantiate(hf, b)?);
            }
        }
        b.undo(mark);
        Ok(apps)
    }

    pub(crate) fn instantiate(&self, hf: &HeadFact, b: &Bindings) -> Result<Fact, EvalError> {
        let args = hf.args.iter().map(|a| eval(a, b, &self.ctx)).collect::<Result<_, _>>()?;
        Ok(Fact { pred: hf.pred, linear: hf.linear, args })
    }
}

fn fetch(db: &NodeDatabase, id: FactId) -> Fact {
    Fact { pred: id.pred, linear: true, args: db.get(id).expect("matched fact is stored").to_vec() }
}

fn sorted(ids: &HashSet<FactId>) -> Vec<FactId> {
    let mut v: Vec<_> = ids.iter().copied().collect();
    v.sort();
    v
}

/// Min and max have no value before the first match.
pub(crate) fn agg_start(spec: &AggSpec) -> Option<Value> {
    match spec.op {
        AggregateOp::Min | AggregateOp::Max => None,
        AggregateOp::Sum | AggregateOp::Count => Some(spec.zero.clone()),
    }
}

pub(crate) fn fold(specs: &[AggSpec], acc: &mut [Option<Value>], b: &Bindings) -> Result<(), EvalError> {
    for (spec, a) in specs.iter().zip(acc.iter_mut()) {
        let x = match spec.input {
            Some(s) => b.get(s).cloned().ok_or(EvalError::Unbound(s))?,
            None => Value::Int(1),
        };
        *a = Some(match (spec.op, a.take()) {
            (_, None) => x,
            (AggregateOp::Min, Some(old)) => old.min(x),
            (AggregateOp::Max, Some(old)) => old.max(x),
            (AggregateOp::Sum | AggregateOp::Count, Some(old)) => match (old, x) {
                (Value::Int(p), Value::Int(q)) => Value::Int(p.checked_add(q).ok_or(EvalError::Overflow)?),
                (Value::Float(p), Value::Float(q)) => Value::Float(p + q),
                (p, q) => return Err(EvalError::TypeError(format!("{p} + {q}"))),
            },
        });
    }
    Ok(())
}

/// Removes consumed facts, stores derived facts that live at the node, and
/// returns the derived facts that live elsewhere.
pub fn commit(db: &mut NodeDatabase, o: &Outcome) -> Result<Vec<Fact>, EngineError> {
    let node = db.node();
    let dberr = |source| EngineError::Database { node, source };
    for (id, _) in &o.consumed {
        db.retract_id(*id).map_err(dberr)?;
    }
    let mut remote = Vec::new();
    for f in &o.derived {
        if f.home() == node {
            db.assert_fact(f.clone()).map_err(dberr)?;
        } else {
            remote.push(f.clone());
        }
    }
    Ok(remote)
}
