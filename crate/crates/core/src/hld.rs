//! High-level dynamics: a deliberately naive reference semantics.
//!
//! Given a node's facts and a rule, [`Hld::outcomes`] enumerates every
//! outcome the rule may produce. Every body match is considered, and each
//! comprehension may stop after any number of applications, since
//! `derive comp` unfolds to `1 & (A -o B * comp)`. The low-level engine is
//! sound when each of its outcomes is in this set and it stops only when
//! no further application is possible.
//!
//! Matching works on plain fact lists with recursion and shares no code
//! with the engine's frame machine.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::database::NodeDatabase;
use crate::engine::Outcome;
use crate::eval::{eval, unify, Bindings, EvalCtx, EvalError};
use crate::ir::{AggSpec, Fact, HeadFact, HeadItem, MatchItem, TypedProgram};
use crate::syntax::ast::AggregateOp;
use crate::value::{NodeId, Value};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum HldError {
    #[error("linear context has {size} facts, more than the bound {bound}")]
    BoundExceeded { size: usize, bound: usize },
    #[error("more than {0} intermediate states")]
    StateLimit(usize),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A node's facts as multisets, independent of storage order.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeState {
    pub node: NodeId,
    pub linear: Vec<Fact>,
    pub persistent: Vec<Fact>,
}

impl NodeState {
    pub fn of(db: &NodeDatabase) -> Self {
        let (linear, persistent) = db.facts().into_iter().partition(|f| f.linear);
        NodeState { node: db.node(), linear, persistent }
    }
}

/// An outcome up to the order of facts.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Canon {
    pub rule: usize,
    pub consumed: Vec<Fact>,
    pub derived_linear: Vec<Fact>,
    pub derived_persistent: BTreeSet<Fact>,
}

impl Canon {
    pub fn of(o: &Outcome) -> Self {
        let mut consumed: Vec<Fact> = o.consumed.iter().map(|(_, f)| f.clone()).collect();
        consumed.sort();
        let mut derived_linear: Vec<Fact> = o.derived_linear().cloned().collect();
        derived_linear.sort();
        let derived_persistent = o.derived.iter().filter(|f| !f.linear).cloned().collect();
        Canon { rule: o.rule, consumed, derived_linear, derived_persistent }
    }
}

/// One way a body matches: its bindings and the facts it used, by index
/// into [`NodeState::linear`] and [`NodeState::persistent`].
#[derive(Clone, Debug, PartialEq)]
pub struct Match {
    pub values: Vec<Option<Value>>,
    pub linear: Vec<usize>,
    pub persistent: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct State {
    available: Vec<bool>,
    consumed: Vec<Fact>,
    derived: Vec<Fact>,
    acc: Vec<Option<Value>>,
}

impl State {
    fn key(&self) -> (Vec<bool>, Vec<Fact>, Vec<Option<Value>>) {
        let mut d = self.derived.clone();
        d.sort();
        (self.available.clone(), d, self.acc.clone())
    }
}

pub struct Hld<'p> {
    program: &'p TypedProgram,
    ctx: EvalCtx,
    /// Reject nodes whose linear context is larger than this.
    pub bound: Option<usize>,
    pub max_states: usize,
}

impl<'p> Hld<'p> {
    pub fn new(program: &'p TypedProgram, ctx: EvalCtx) -> Self {
        Hld { program, ctx, bound: None, max_states: 100_000 }
    }

    /// All matches of `items` given `b`, using linear facts where
    /// `available` is set.
    pub fn matches(
        &self,
        st: &NodeState,
        items: &[MatchItem],
        b: &Bindings,
        available: &[bool],
    ) -> Result<Vec<Match>, EvalError> {
        let mut out = Vec::new();
        let mut b = b.clone();
        let mut avail = available.to_vec();
        let mut used = (Vec::new(), Vec::new());
        self.walk(st, items, &mut b, &mut avail, &mut used, &mut out)?;
        Ok(out)
    }

    fn walk(
        &self,
        st: &NodeState,
        items: &[MatchItem],
        b: &mut Bindings,
        avail: &mut Vec<bool>,
        used: &mut (Vec<usize>, Vec<usize>),
        out: &mut Vec<Match>,
    ) -> Result<(), EvalError> {
        let Some((item, rest)) = items.split_first() else {
            out.push(Match { values: b.values().to_vec(), linear: used.0.clone(), persistent: used.1.clone() });
            return Ok(());
        };
        let mark = b.mark();
        match item {
            MatchItem::Constraint(e) => {
                if eval(e, b, &self.ctx)? == Value::Bool(true) {
                    self.walk(st, rest, b, avail, used, out)?;
                }
            }
            MatchItem::Assign(s, e) => {
                let v = eval(e, b, &self.ctx)?;
                b.bind(*s, v);
                self.walk(st, rest, b, avail, used, out)?;
            }
            MatchItem::Fact(t) => {
                let pool = if t.linear { &st.linear } else { &st.persistent };
                for (j, f) in pool.iter().enumerate() {
                    if f.pred != t.pred || (t.linear && !avail[j]) {
                        continue;
                    }
                    let mut ok = true;
                    for (p, v) in t.args.iter().zip(&f.args) {
                        if !unify(p, v, b, &self.ctx)? {
                            ok = false;
                            break;
                        }
                    }
                    if ok {
                        if t.linear {
                            avail[j] = false;
                            used.0.push(j);
                        } else {
                            used.1.push(j);
                        }
                        self.walk(st, rest, b, avail, used, out)?;
                        if t.linear {
                            avail[j] = true;
                            used.0.pop();
                        } else {
                            used.1.pop();
                        }
                    }
                    b.undo(mark);
                }
            }
        }
        b.undo(mark);
        Ok(())
    }

    fn home_bindings(&self, st: &NodeState, rule: usize) -> Bindings {
        let r = &self.program.rules[rule];
        let mut b = Bindings::new(r.num_slots());
        b.bind(r.home, Value::Node(st.node));
        b
    }

    /// Rules whose body matches, in priority order.
    pub fn applicable(&self, st: &NodeState) -> Result<Vec<usize>, EvalError> {
        let avail = vec![true; st.linear.len()];
        let mut out = Vec::new();
        for r in 0..self.program.rules.len() {
            let b = self.home_bindings(st, r);
            if !self.matches(st, &self.program.rules[r].body, &b, &avail)?.is_empty() {
                out.push(r);
            }
        }
        Ok(out)
    }

    /// Every outcome of applying `rule` at the node. Nodes made by `exists`
    /// are numbered from `fresh_base`.
    pub fn outcomes(&self, st: &NodeState, rule: usize, fresh_base: u64) -> Result<BTreeSet<Canon>, HldError> {
        if let Some(bound) = self.bound {
            if st.linear.len() > bound {
                return Err(HldError::BoundExceeded { size: st.linear.len(), bound });
            }
        }
        let r = &self.program.rules[rule];
        let b0 = self.home_bindings(st, rule);
        let all = vec![true; st.linear.len()];
        let mut result = BTreeSet::new();
        for m in self.matches(st, &r.body, &b0, &all)? {
            let mut b = Bindings::from_values(m.values.clone());
            let mut start = State { available: all.clone(), consumed: Vec::new(), derived: Vec::new(), acc: Vec::new() };
            for &j in &m.linear {
                start.available[j] = false;
                start.consumed.push(st.linear[j].clone());
            }
            let mut fresh = fresh_base;
            let mut states = vec![start];
            for item in &r.head {
                let mut next = Vec::new();
                match item {
                    HeadItem::Fact(hf) => {
                        let f = self.instantiate(hf, &b)?;
                        for mut s in states {
                            s.derived.push(f.clone());
                            next.push(s);
                        }
                    }
                    HeadItem::Exists(slots, facts) => {
                        for &slot in slots {
                            b.bind(slot, Value::Node(NodeId(fresh)));
                            fresh += 1;
                        }
                        let fs = facts.iter().map(|hf| self.instantiate(hf, &b)).collect::<Result<Vec<_>, _>>()?;
                        for mut s in states {
                            s.derived.extend(fs.iter().cloned());
                            next.push(s);
                        }
                    }
                    HeadItem::Comprehension(c) => {
                        for s in states {
                            next.extend(self.unfold(st, &c.body, &c.head, &[], &b, s)?);
                        }
                    }
                    HeadItem::Aggregate(a) => {
                        for mut s in states {
                            s.acc = a.specs.iter().map(start_value).collect();
                            for mut done in self.unfold(st, &a.body, &a.each, &a.specs, &b, s)? {
                                if done.acc.iter().all(Option::is_some) {
                                    let mut fb = b.clone();
                                    for (spec, v) in a.specs.iter().zip(&done.acc) {
                                        fb.bind(spec.result, v.clone().unwrap());
                                    }
                                    for hf in &a.last {
                                        done.derived.push(self.instantiate(hf, &fb)?);
                                    }
                                }
                                done.acc.clear();
                                next.push(done);
                            }
                        }
                    }
                }
                states = next;
                if states.len() > self.max_states {
                    return Err(HldError::StateLimit(self.max_states));
                }
            }
            for s in states {
                let mut consumed = s.consumed;
                consumed.sort();
                let mut derived_linear: Vec<Fact> = s.derived.iter().filter(|f| f.linear).cloned().collect();
                derived_linear.sort();
                let derived_persistent = s.derived.into_iter().filter(|f| !f.linear).collect();
                result.insert(Canon { rule, consumed, derived_linear, derived_persistent });
            }
        }
        Ok(result)
    }

    /// All states reachable by applying a comprehension body zero or more
    /// times, up to the number of applications the engine could perform.
    fn unfold(
        &self,
        st: &NodeState,
        body: &[MatchItem],
        head: &[HeadFact],
        specs: &[AggSpec],
        b: &Bindings,
        start: State,
    ) -> Result<Vec<State>, HldError> {
        let initial = self.matches(st, body, b, &start.available)?.len();
        let limit = st.linear.len() + initial;
        let mut seen = BTreeMap::new();
        let mut frontier = vec![start];
        for depth in 0..=limit {
            let mut next = BTreeMap::new();
            for s in frontier {
                if depth < limit {
                    for m in self.matches(st, body, b, &s.available)? {
                        let mb = Bindings::from_values(m.values);
                        let mut t = s.clone();
                        for &j in &m.linear {
                            t.available[j] = false;
                            t.consumed.push(st.linear[j].clone());
                        }
                        crate::engine::fold(specs, &mut t.acc, &mb)?;
                        for hf in head {
                            t.derived.push(self.instantiate(hf, &mb)?);
                        }
                        next.entry(t.key()).or_insert(t);
                    }
                }
                seen.entry(s.key()).or_insert(s);
                if seen.len() + next.len() > self.max_states {
                    return Err(HldError::StateLimit(self.max_states));
                }
            }
            frontier = next.into_values().collect();
            if frontier.is_empty() {
                break;
            }
        }
        Ok(seen.into_values().collect())
    }

    fn instantiate(&self, hf: &HeadFact, b: &Bindings) -> Result<Fact, EvalError> {
        let args = hf.args.iter().map(|a| eval(a, b, &self.ctx)).collect::<Result<_, _>>()?;
        Ok(Fact { pred: hf.pred, linear: hf.linear, args })
    }

    /// Checks that every comprehension and aggregate in `o` ran to a fixed
    /// point: a body using linear facts has no match left, and a body of
    /// persistent facts fired once per distinct match.
    pub fn check_maximal(&self, db: &NodeDatabase, o: &Outcome) -> Result<(), String> {
        let rule = &self.program.rules[o.rule];
        for t in &o.traces {
            let body = match &rule.head[t.item] {
                HeadItem::Comprehension(c) => &c.body,
                HeadItem::Aggregate(a) => &a.body,
                _ => return Err(format!("trace points at head item {} which is a fact", t.item)),
            };
            let linear_body = body.iter().any(|i| matches!(i, MatchItem::Fact(t) if t.linear));
            let mut live = Vec::new();
            let mut persistent = Vec::new();
            for f in db.facts() {
                if !f.linear {
                    persistent.push(f);
                }
            }
            let mut initial = Vec::new();
            for pred in 0..self.program.preds.len() {
                for (id, args) in db.linear_of(pred) {
                    let f = Fact { pred, linear: true, args: args.to_vec() };
                    initial.push(f.clone());
                    if t.excluded.binary_search(&id).is_err() {
                        live.push(f);
                    }
                }
            }
            let b = Bindings::from_values(t.outer.clone());
            let err = |e: EvalError| e.to_string();
            if linear_body {
                let st = NodeState { node: db.node(), linear: live, persistent };
                let avail = vec![true; st.linear.len()];
                let left = self.matches(&st, body, &b, &avail).map_err(err)?.len();
                if left > 0 {
                    return Err(format!("head item {} stopped with {left} match(es) left", t.item));
                }
            } else {
                let st = NodeState { node: db.node(), linear: initial, persistent };
                let avail = vec![true; st.linear.len()];
                let distinct = self.matches(&st, body, &b, &avail).map_err(err)?.len();
                if distinct != t.applications {
                    return Err(format!(
                        "head item {} fired {} time(s) for {distinct} distinct match(es)",
                        t.item, t.applications
                    ));
                }
            }
        }
        Ok(())
    }
}

fn start_value(spec: &AggSpec) -> Option<Value> {
    match spec.op {
        AggregateOp::Min | AggregateOp::Max => None,
        AggregateOp::Sum | AggregateOp::Count => Some(spec.zero.clone()),
    }
}
