//! Backtracking search over a body, driven by an explicit stack of frames.
//!
//! A frame records the template it matches, the candidate facts not yet
//! tried, and how much of the binding trail and of the consumed list Ξ it
//! owns. In split mode (comprehensions and aggregates) persistent frames
//! pushed before the first linear frame go to stack P and everything else
//! to stack C, so that after each application the search can resume from
//! the first linear frame instead of starting over.

use std::collections::{HashSet, VecDeque};

use crate::database::{unify_args, FactId, FactRef, NodeDatabase};
use crate::eval::{eval, eval_bool, Bindings, EvalCtx, EvalError};
use crate::ir::MatchItem;

#[derive(Debug)]
pub(crate) struct Frame {
    item: usize,
    linear: bool,
    alternatives: VecDeque<FactRef>,
    mark: usize,
    xi_len: usize,
}

pub(crate) struct Search<'a> {
    db: &'a NodeDatabase,
    items: &'a [MatchItem],
    ctx: EvalCtx,
    split: bool,
    p: Vec<Frame>,
    c: Vec<Frame>,
    /// Linear facts used by the current partial match.
    pub xi: Vec<FactId>,
    started: bool,
}

impl<'a> Search<'a> {
    pub fn new(db: &'a NodeDatabase, items: &'a [MatchItem], ctx: EvalCtx, split: bool) -> Self {
        Search { db, items, ctx, split, p: Vec::new(), c: Vec::new(), xi: Vec::new(), started: false }
    }

    /// Finds the next match. Facts in `excluded` are invisible. After a
    /// `true` result the bindings and `xi` describe the match.
    pub fn next(&mut self, b: &mut Bindings, excluded: &HashSet<FactId>) -> Result<bool, EvalError> {
        let start = if !self.started {
            self.started = true;
            0
        } else {
            match self.backtrack(b)? {
                Some(i) => i,
                None => return Ok(false),
            }
        };
        self.forward(start, b, excluded)
    }

    /// Keeps only the first linear frame of C and drops the facts now in
    /// `excluded` from its alternatives. Persistent frames in P survive.
    pub fn fix_stack(&mut self, excluded: &HashSet<FactId>) {
        self.c.truncate(1);
        if let Some(f) = self.c.first_mut() {
            f.alternatives.retain(|c| match c {
                FactRef::Linear(id) => !excluded.contains(id),
                FactRef::Persistent(..) => true,
            });
        }
    }

    fn forward(&mut self, mut i: usize, b: &mut Bindings, excluded: &HashSet<FactId>) -> Result<bool, EvalError> {
        loop {
            if i == self.items.len() {
                return Ok(true);
            }
            let ok = match &self.items[i] {
                MatchItem::Constraint(e) => eval_bool(e, b, &self.ctx)?,
                MatchItem::Assign(slot, e) => {
                    let v = eval(e, b, &self.ctx)?;
                    b.bind(*slot, v);
                    true
                }
                MatchItem::Fact(t) => {
                    let xi = &self.xi;
                    let alternatives =
                        self.db.candidate_refs(t, b, &self.ctx, |id| excluded.contains(&id) || xi.contains(&id))?;
                    let frame = Frame {
                        item: i,
                        linear: t.linear,
                        alternatives,
                        mark: b.mark(),
                        xi_len: self.xi.len(),
                    };
                    if self.split && !frame.linear && self.c.is_empty() {
                        self.p.push(frame);
                    } else {
                        self.c.push(frame);
                    }
                    if self.try_top(b)? {
                        true
                    } else {
                        self.pop(b);
                        false
                    }
                }
            };
            if ok {
                i += 1;
            } else {
                match self.backtrack(b)? {
                    Some(j) => i = j,
                    None => return Ok(false),
                }
            }
        }
    }

    fn top(&mut self) -> Option<&mut Frame> {
        if self.c.is_empty() {
            self.p.last_mut()
        } else {
            self.c.last_mut()
        }
    }

    fn pop(&mut self, b: &mut Bindings) {
        let f = if self.c.is_empty() { self.p.pop() } else { self.c.pop() };
        if let Some(f) = f {
            b.undo(f.mark);
            self.xi.truncate(f.xi_len);
        }
    }

    /// Tries the remaining alternatives of the top frame until one unifies.
    fn try_top(&mut self, b: &mut Bindings) -> Result<bool, EvalError> {
        let db = self.db;
        let items = self.items;
        let ctx = self.ctx;
        let (frame_item, mark, xi_len) = {
            let f = self.top().expect("a frame was pushed");
            (f.item, f.mark, f.xi_len)
        };
        let MatchItem::Fact(t) = &items[frame_item] else { unreachable!("frames match facts") };
        loop {
            let Some(cand) = self.top().unwrap().alternatives.pop_front() else { return Ok(false) };
            b.undo(mark);
            self.xi.truncate(xi_len);
            let args = db.args(cand).expect("candidate is stored");
            if unify_args(t, args, b, &ctx)? {
                if let FactRef::Linear(id) = cand {
                    self.xi.push(id);
                }
                return Ok(true);
            }
        }
    }

    /// Resumes the most recent frame with alternatives left. Returns the
    /// item to continue from, or `None` when both stacks are exhausted.
    fn backtrack(&mut self, b: &mut Bindings) -> Result<Option<usize>, EvalError> {
        while let Some(item) = self.top().map(|f| f.item) {
            if self.try_top(b)? {
                return Ok(Some(item + 1));
            }
            self.pop(b);
        }
        Ok(None)
    }
}
