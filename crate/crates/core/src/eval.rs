//! Expression evaluation and pattern unification over slot bindings.

use std::cmp::Ordering;

use thiserror::Error;

use crate::ir::{Builtin, CExpr, Pattern, Slot};
use crate::syntax::ast::BinOp;
use crate::value::Value;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("head of an empty list")]
    HeadOfEmptyList,
    #[error("integer overflow")]
    Overflow,
    #[error("ill-typed operands: {0}")]
    TypeError(String),
    #[error("variable slot {0} used before it was bound")]
    Unbound(Slot),
}

/// Values for a rule's variable slots, with an undo trail.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Bindings {
    values: Vec<Option<Value>>,
    trail: Vec<Slot>,
}

impl Bindings {
    pub fn new(slots: usize) -> Self {
        Bindings { values: vec![None; slots], trail: Vec::new() }
    }

    /// Bindings that cannot be undone below the given values.
    pub fn from_values(values: Vec<Option<Value>>) -> Self {
        Bindings { values, trail: Vec::new() }
    }

    pub fn get(&self, slot: Slot) -> Option<&Value> {
        self.values[slot].as_ref()
    }

    pub fn bind(&mut self, slot: Slot, v: Value) {
        debug_assert!(self.values[slot].is_none(), "slot {slot} bound twice");
        self.values[slot] = Some(v);
        self.trail.push(slot);
    }

    /// Binds an unbound slot, or checks an already bound one for equality.
    pub fn bind_or_check(&mut self, slot: Slot, v: &Value) -> bool {
        match &self.values[slot] {
            Some(old) => old == v,
            None => {
                self.bind(slot, v.clone());
                true
            }
        }
    }

    pub fn mark(&self) -> usize {
        self.trail.len()
    }

    pub fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let slot = self.trail.pop().unwrap();
            self.values[slot] = None;
        }
    }

    pub fn values(&self) -> &[Option<Value>] {
        &self.values
    }
}

/// Runtime facts visible to expressions.
#[derive(Clone, Copy, Debug, Default)]
pub struct EvalCtx {
    /// Number of nodes in the loaded graph (`@world`).
    pub world: i64,
}

pub fn eval(e: &CExpr, b: &Bindings, ctx: &EvalCtx) -> Result<Value, EvalError> {
    Ok(match e {
        CExpr::Lit(v) => v.clone(),
        CExpr::Var(s) => b.get(*s).cloned().ok_or(EvalError::Unbound(*s))?,
        CExpr::World => Value::Int(ctx.world),
        CExpr::Neg(inner) => match eval(inner, b, ctx)? {
            Value::Int(i) => Value::Int(i.checked_neg().ok_or(EvalError::Overflow)?),
            Value::Float(x) => Value::Float(-x),
            other => return Err(EvalError::TypeError(format!("cannot negate {other}"))),
        },
        CExpr::Binary(op, l, r) => {
            if let BinOp::And | BinOp::Or = op {
                let lv = eval_bool(l, b, ctx)?;
                return Ok(Value::Bool(match (op, lv) {
                    (BinOp::And, false) => false,
                    (BinOp::Or, true) => true,
                    _ => eval_bool(r, b, ctx)?,
                }));
            }
            binary(*op, eval(l, b, ctx)?, eval(r, b, ctx)?)?
        }
        CExpr::Call(f, args) => {
            let vals = args.iter().map(|a| eval(a, b, ctx)).collect::<Result<Vec<_>, _>>()?;
            call(*f, vals)?
        }
        CExpr::List(items, tail) => {
            let mut out = items.iter().map(|a| eval(a, b, ctx)).collect::<Result<Vec<_>, _>>()?;
            if let Some(t) = tail {
                match eval(t, b, ctx)? {
                    Value::List(rest) => out.extend(rest.iter().cloned()),
                    other => return Err(EvalError::TypeError(format!("list tail {other}"))),
                }
            }
            Value::list(out)
        }
    })
}

pub fn eval_bool(e: &CExpr, b: &Bindings, ctx: &EvalCtx) -> Result<bool, EvalError> {
    match eval(e, b, ctx)? {
        Value::Bool(x) => Ok(x),
        other => Err(EvalError::TypeError(format!("expected a boolean, got {other}"))),
    }
}

fn binary(op: BinOp, l: Value, r: Value) -> Result<Value, EvalError> {
    use BinOp::*;
    let bad = |l: &Value, r: &Value| EvalError::TypeError(format!("{l} {} {r}", op.symbol()));
    Ok(match op {
        Add | Sub | Mul | Div | Mod => match (&l, &r) {
            (Value::Int(a), Value::Int(b)) => {
                let (a, b) = (*a, *b);
                let v = match op {
                    Add => a.checked_add(b),
                    Sub => a.checked_sub(b),
                    Mul => a.checked_mul(b),
                    Div | Mod if b == 0 => return Err(EvalError::DivisionByZero),
                    Div => a.checked_div(b),
                    _ => a.checked_rem(b),
                };
                Value::Int(v.ok_or(EvalError::Overflow)?)
            }
            (Value::Float(a), Value::Float(b)) => {
                let (a, b) = (*a, *b);
                Value::Float(match op {
                    Add => a + b,
                    Sub => a - b,
                    Mul => a * b,
                    Div | Mod if b == 0.0 => return Err(EvalError::DivisionByZero),
                    Div => a / b,
                    _ => a % b,
                })
            }
            _ => return Err(bad(&l, &r)),
        },
        Eq | Neq | Lt | Le | Gt | Ge => {
            let ord = match (&l, &r) {
                // Constraints use numeric comparison; facts use bitwise identity.
                (Value::Float(a), Value::Float(b)) => a.partial_cmp(b),
                _ if std::mem::discriminant(&l) == std::mem::discriminant(&r) => Some(l.cmp(&r)),
                _ => return Err(bad(&l, &r)),
            };
            Value::Bool(match (op, ord) {
                (Neq, None) => true,
                (_, None) => false,
                (Eq, Some(o)) => o == Ordering::Equal,
                (Neq, Some(o)) => o != Ordering::Equal,
                (Lt, Some(o)) => o == Ordering::Less,
                (Le, Some(o)) => o != Ordering::Greater,
                (Gt, Some(o)) => o == Ordering::Greater,
                (_, Some(o)) => o != Ordering::Less,
            })
        }
        And | Or => unreachable!("short-circuit operators are handled by eval"),
    })
}

fn call(f: Builtin, mut args: Vec<Value>) -> Result<Value, EvalError> {
    let arg = |args: &mut Vec<Value>| args.remove(0);
    Ok(match f {
        Builtin::Float => match arg(&mut args) {
            Value::Int(i) => Value::Float(i as f64),
            v @ Value::Float(_) => v,
            other => return Err(EvalError::TypeError(format!("float({other})"))),
        },
        Builtin::Int => match arg(&mut args) {
            Value::Float(x) => {
                let t = x.trunc();
                if !(i64::MIN as f64..=i64::MAX as f64).contains(&t) {
                    return Err(EvalError::Overflow);
                }
                Value::Int(t as i64)
            }
            v @ Value::Int(_) => v,
            other => return Err(EvalError::TypeError(format!("int({other})"))),
        },
        Builtin::Pair => {
            let a = arg(&mut args);
            let b = arg(&mut args);
            Value::Pair(Box::new((a, b)))
        }
        Builtin::Fst | Builtin::Snd => match arg(&mut args) {
            Value::Pair(p) => {
                let (a, b) = *p;
                if f == Builtin::Fst {
                    a
                } else {
                    b
                }
            }
            other => return Err(EvalError::TypeError(format!("projection of {other}"))),
        },
        Builtin::Abs => match arg(&mut args) {
            Value::Int(i) => Value::Int(i.checked_abs().ok_or(EvalError::Overflow)?),
            Value::Float(x) => Value::Float(x.abs()),
            other => return Err(EvalError::TypeError(format!("abs({other})"))),
        },
        Builtin::Head | Builtin::Tail => match arg(&mut args) {
            Value::List(items) => {
                if items.is_empty() {
                    return Err(EvalError::HeadOfEmptyList);
                }
                if f == Builtin::Head {
                    items[0].clone()
                } else {
                    Value::List(items.skip(1))
                }
            }
            other => return Err(EvalError::TypeError(format!("list operation on {other}"))),
        },
    })
}

/// Matches `v` against `p`, extending `b`. On `false` the caller undoes any
/// partial bindings.
pub fn unify(p: &Pattern, v: &Value, b: &mut Bindings, ctx: &EvalCtx) -> Result<bool, EvalError> {
    match p {
        Pattern::Wildcard => Ok(true),
        Pattern::Var(s) => Ok(b.bind_or_check(*s, v)),
        Pattern::Value(e) => Ok(eval(e, b, ctx)? == *v),
        Pattern::Cons(items, tail) => {
            let Value::List(vals) = v else { return Ok(false) };
            let fits = match tail {
                Some(_) => vals.len() >= items.len(),
                None => vals.len() == items.len(),
            };
            if !fits {
                return Ok(false);
            }
            for (p, v) in items.iter().zip(vals.iter()) {
                if !unify(p, v, b, ctx)? {
                    return Ok(false);
                }
            }
            match tail {
                Some(t) => unify(t, &Value::List(vals.skip(items.len())), b, ctx),
                None => Ok(true),
            }
        }
    }
}
