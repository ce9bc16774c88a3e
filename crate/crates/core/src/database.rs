//! Per-node fact storage.
//!
//! Linear facts live in a multiset indexed by predicate and kept in
//! insertion order, so that matching tries older facts first. Persistent
//! facts form a set per predicate, also in insertion order.

use std::collections::{BTreeMap, HashSet, VecDeque};

use thiserror::Error;

use crate::eval::{unify, Bindings, EvalCtx, EvalError};
use crate::ir::{Fact, PredId, Template};
use crate::value::{NodeId, Value};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum DbError {
    #[error("fact belongs to node {found}, not {expected}")]
    WrongNode { expected: NodeId, found: NodeId },
    #[error("linear fact is not present")]
    NotPresent,
    #[error("persistent facts cannot be retracted")]
    PersistentRetract,
}

/// Stable handle of a stored linear fact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FactId {
    pub pred: PredId,
    pub seq: u64,
}

/// A stored fact of either kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactRef {
    Linear(FactId),
    /// Position among the persistent facts of the predicate.
    Persistent(PredId, usize),
}

#[derive(Clone, Debug)]
pub struct NodeDatabase {
    node: NodeId,
    linear: Vec<BTreeMap<u64, Vec<Value>>>,
    persistent: Vec<Vec<Vec<Value>>>,
    persistent_seen: Vec<HashSet<Vec<Value>>>,
    next_seq: u64,
    dirty: bool,
}

/// Two databases are equal when they hold the same facts, regardless of
/// insertion history.
impl PartialEq for NodeDatabase {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
            && self.linear_multiset() == other.linear_multiset()
            && self.persistent_set() == other.persistent_set()
    }
}

impl NodeDatabase {
    pub fn new(node: NodeId, num_preds: usize) -> Self {
        NodeDatabase {
            node,
            linear: vec![BTreeMap::new(); num_preds],
            persistent: vec![Vec::new(); num_preds],
            persistent_seen: vec![HashSet::new(); num_preds],
            next_seq: 0,
            dirty: false,
        }
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    /// Adds a fact. Linear facts accumulate; persistent facts are
    /// deduplicated. Returns the id for linear facts.
    pub fn assert_fact(&mut self, f: Fact) -> Result<Option<FactId>, DbError> {
        let home = f.home();
        if home != self.node {
            return Err(DbError::WrongNode { expected: self.node, found: home });
        }
        self.dirty = true;
        if f.linear {
            let seq = self.next_seq;
            self.next_seq += 1;
            self.linear[f.pred].insert(seq, f.args);
            Ok(Some(FactId { pred: f.pred, seq }))
        } else {
            if self.persistent_seen[f.pred].insert(f.args.clone()) {
                self.persistent[f.pred].push(f.args);
            }
            Ok(None)
        }
    }

    /// Removes one copy of a linear fact, the oldest one.
    pub fn retract_fact(&mut self, f: &Fact) -> Result<(), DbError> {
        if !f.linear {
            return Err(DbError::PersistentRetract);
        }
        let seq = self.linear[f.pred]
            .iter()
            .find(|(_, args)| **args == f.args)
            .map(|(s, _)| *s)
            .ok_or(DbError::NotPresent)?;
        self.linear[f.pred].remove(&seq);
        Ok(())
    }

    pub fn retract_id(&mut self, id: FactId) -> Result<Fact, DbError> {
        let args = self.linear[id.pred].remove(&id.seq).ok_or(DbError::NotPresent)?;
        Ok(Fact { pred: id.pred, linear: true, args })
    }

    pub fn get(&self, id: FactId) -> Option<&[Value]> {
        self.linear[id.pred].get(&id.seq).map(Vec::as_slice)
    }

    /// Linear facts of `pred`, oldest first.
    pub fn linear_of(&self, pred: PredId) -> impl Iterator<Item = (FactId, &[Value])> + '_ {
        self.linear[pred].iter().map(move |(seq, a)| (FactId { pred, seq: *seq }, a.as_slice()))
    }

    /// Persistent facts of `pred`, in insertion order.
    pub fn persistent_of(&self, pred: PredId) -> &[Vec<Value>] {
        &self.persistent[pred]
    }

    pub fn args(&self, r: FactRef) -> Option<&[Value]> {
        match r {
            FactRef::Linear(id) => self.get(id),
            FactRef::Persistent(pred, k) => self.persistent[pred].get(k).map(Vec::as_slice),
        }
    }

    /// Every stored fact that unifies with `t` under `b`, in insertion
    /// order, with the bindings extended by the match.
    pub fn candidates(&self, t: &Template, b: &Bindings, ctx: &EvalCtx) -> Result<Vec<(Fact, Bindings)>, EvalError> {
        let mut out = Vec::new();
        let mut scratch = b.clone();
        for r in self.candidate_refs(t, &mut scratch, ctx, |_| false)? {
            let args = self.args(r).expect("reference is stored").to_vec();
            let mut nb = b.clone();
            unify_args(t, &args, &mut nb, ctx)?;
            out.push((Fact { pred: t.pred, linear: t.linear, args }, nb));
        }
        Ok(out)
    }

    /// Like [`candidates`](Self::candidates) but returns references and
    /// skips linear facts for which `skip` holds. `b` is left as it was.
    pub fn candidate_refs(
        &self,
        t: &Template,
        b: &mut Bindings,
        ctx: &EvalCtx,
        skip: impl Fn(FactId) -> bool,
    ) -> Result<VecDeque<FactRef>, EvalError> {
        let scratch = b;
        let mut out = VecDeque::new();
        let check = |args: &[Value], scratch: &mut Bindings| -> Result<bool, EvalError> {
            let mark = scratch.mark();
            let ok = unify_args(t, args, scratch, ctx)?;
            scratch.undo(mark);
            Ok(ok)
        };
        if t.linear {
            for (id, args) in self.linear_of(t.pred) {
                if !skip(id) && check(args, scratch)? {
                    out.push_back(FactRef::Linear(id));
                }
            }
        } else {
            for (k, args) in self.persistent[t.pred].iter().enumerate() {
                if check(args, scratch)? {
                    out.push_back(FactRef::Persistent(t.pred, k));
                }
            }
        }
        Ok(out)
    }

    pub fn linear_count_of(&self, pred: PredId) -> usize {
        self.linear[pred].len()
    }

    pub fn linear_count(&self) -> usize {
        self.linear.iter().map(BTreeMap::len).sum()
    }

    pub fn persistent_count(&self) -> usize {
        self.persistent.iter().map(Vec::len).sum()
    }

    /// The linear context as a sorted multiset.
    pub fn linear_multiset(&self) -> BTreeMap<Fact, usize> {
        let mut out = BTreeMap::new();
        for (pred, facts) in self.linear.iter().enumerate() {
            for args in facts.values() {
                *out.entry(Fact { pred, linear: true, args: args.clone() }).or_insert(0) += 1;
            }
        }
        out
    }

    pub fn persistent_set(&self) -> std::collections::BTreeSet<Fact> {
        let mut out = std::collections::BTreeSet::new();
        for (pred, facts) in self.persistent.iter().enumerate() {
            for args in facts {
                out.insert(Fact { pred, linear: false, args: args.clone() });
            }
        }
        out
    }

    /// All facts in storage order: linear first, then persistent.
    pub fn facts(&self) -> Vec<Fact> {
        let mut out: Vec<Fact> = Vec::new();
        for (pred, facts) in self.linear.iter().enumerate() {
            out.extend(facts.values().map(|a| Fact { pred, linear: true, args: a.clone() }));
        }
        for (pred, facts) in self.persistent.iter().enumerate() {
            out.extend(facts.iter().map(|a| Fact { pred, linear: false, args: a.clone() }));
        }
        out
    }

    /// Whether facts were added since the flag was last cleared.
    pub fn is_dirty(&self) -> bool {
        self.dirty
    }

    pub fn clear_dirty(&mut self) {
        self.dirty = false;
    }
}

/// Unifies every argument of `t` with `args`, left to right.
pub fn unify_args(t: &Template, args: &[Value], b: &mut Bindings, ctx: &EvalCtx) -> Result<bool, EvalError> {
    for (p, v) in t.args.iter().zip(args) {
        if !unify(p, v, b, ctx)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fact(pred: PredId, linear: bool, node: u64, x: i64) -> Fact {
        Fact { pred, linear, args: vec![Value::Node(NodeId(node)), Value::Int(x)] }
    }

    #[test]
    fn linear_is_a_multiset_persistent_is_a_set() {
        let mut db = NodeDatabase::new(NodeId(1), 2);
        db.assert_fact(fact(0, true, 1, 5)).unwrap();
        db.assert_fact(fact(0, true, 1, 5)).unwrap();
        db.assert_fact(fact(1, false, 1, 5)).unwrap();
        db.assert_fact(fact(1, false, 1, 5)).unwrap();
        assert_eq!(db.linear_count(), 2);
        assert_eq!(db.persistent_count(), 1);
        db.retract_fact(&fact(0, true, 1, 5)).unwrap();
        assert_eq!(db.linear_count(), 1);
        assert_eq!(db.retract_fact(&fact(1, false, 1, 5)), Err(DbError::PersistentRetract));
    }

    #[test]
    fn rejects_foreign_and_missing_facts() {
        let mut db = NodeDatabase::new(NodeId(1), 1);
        assert!(matches!(db.assert_fact(fact(0, true, 2, 0)), Err(DbError::WrongNode { .. })));
        assert_eq!(db.retract_fact(&fact(0, true, 1, 0)), Err(DbError::NotPresent));
    }

    #[test]
    fn iteration_is_oldest_first() {
        let mut db = NodeDatabase::new(NodeId(1), 1);
        for x in [3, 1, 2] {
            db.assert_fact(fact(0, true, 1, x)).unwrap();
        }
        let xs: Vec<_> = db.linear_of(0).map(|(_, a)| a[1].clone()).collect();
        assert_eq!(xs, vec![Value::Int(3), Value::Int(1), Value::Int(2)]);
    }
}
