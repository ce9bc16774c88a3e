//! Checked, slot-resolved program representation consumed by the engine.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::syntax::ast::{AggregateOp, BinOp, SelectorOp, TypeExpr};
use crate::syntax::Span;
use crate::value::{NodeId, Value};

pub type PredId = usize;
/// Index of a variable inside its rule's binding array.
pub type Slot = usize;

#[derive(Clone, Debug, PartialEq)]
pub struct PredInfo {
    pub name: String,
    pub arg_types: Vec<TypeExpr>,
    pub linear: bool,
}

/// A ground fact as stored in a node database.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fact {
    pub pred: PredId,
    pub linear: bool,
    pub args: Vec<Value>,
}

impl Fact {
    /// The node the fact lives at.
    pub fn home(&self) -> NodeId {
        self.args[0].as_node().expect("first argument is a node")
    }

    pub fn display<'a>(&'a self, program: &'a TypedProgram) -> FactDisplay<'a> {
        FactDisplay { fact: self, program }
    }
}

pub struct FactDisplay<'a> {
    fact: &'a Fact,
    program: &'a TypedProgram,
}

impl fmt::Display for FactDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.fact.linear {
            f.write_str("!")?;
        }
        write!(f, "{}(", self.program.preds[self.fact.pred].name)?;
        for (i, a) in self.fact.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Builtin {
    Float,
    Int,
    Pair,
    Fst,
    Snd,
    Abs,
    Head,
    Tail,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CExpr {
    Lit(Value),
    Var(Slot),
    World,
    Neg(Box<CExpr>),
    Binary(BinOp, Box<CExpr>, Box<CExpr>),
    Call(Builtin, Vec<CExpr>),
    List(Vec<CExpr>, Option<Box<CExpr>>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Pattern {
    /// Binds the slot if unbound, otherwise checks equality.
    Var(Slot),
    Wildcard,
    /// `[p1, ..., pn | tail]`; no tail means the list has exactly n items.
    Cons(Vec<Pattern>, Option<Box<Pattern>>),
    /// Evaluated with the current bindings and compared.
    Value(CExpr),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Template {
    pub pred: PredId,
    pub linear: bool,
    pub args: Vec<Pattern>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MatchItem {
    Fact(Template),
    Constraint(CExpr),
    Assign(Slot, CExpr),
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadFact {
    pub pred: PredId,
    pub linear: bool,
    pub args: Vec<CExpr>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comprehension {
    pub body: Vec<MatchItem>,
    pub head: Vec<HeadFact>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggSpec {
    pub op: AggregateOp,
    /// Slot holding the per-match value; `None` for `count`.
    pub input: Option<Slot>,
    /// Slot bound to the folded value while deriving the final head.
    pub result: Slot,
    pub zero: Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub specs: Vec<AggSpec>,
    pub body: Vec<MatchItem>,
    pub each: Vec<HeadFact>,
    pub last: Vec<HeadFact>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum HeadItem {
    Fact(HeadFact),
    Exists(Vec<Slot>, Vec<HeadFact>),
    Comprehension(Comprehension),
    Aggregate(Aggregate),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompiledRule {
    pub index: usize,
    pub span: Span,
    pub home: Slot,
    pub slot_names: Vec<String>,
    pub selector: Option<(SelectorOp, Slot)>,
    pub body: Vec<MatchItem>,
    pub head: Vec<HeadItem>,
    /// Source text of the rule, for diagnostics.
    pub text: String,
}

impl CompiledRule {
    pub fn num_slots(&self) -> usize {
        self.slot_names.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AxiomFact {
    Ground(Fact),
    /// `start(A).`: one fact per loaded node, remaining arguments fixed.
    PerNode { pred: PredId, linear: bool, rest: Vec<Value> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TypedProgram {
    pub preds: Vec<PredInfo>,
    pub pred_index: HashMap<String, PredId>,
    pub consts: BTreeMap<String, Value>,
    pub rules: Vec<CompiledRule>,
    pub axioms: Vec<AxiomFact>,
}

impl TypedProgram {
    pub fn pred(&self, name: &str) -> Option<PredId> {
        self.pred_index.get(name).copied()
    }

    pub fn pred_name(&self, id: PredId) -> &str {
        &self.preds[id].name
    }

    /// Builds a fact by predicate name, taking linearity from the declaration.
    pub fn fact(&self, name: &str, args: Vec<Value>) -> Fact {
        let pred = self.pred(name).unwrap_or_else(|| panic!("unknown predicate {name}"));
        Fact { pred, linear: self.preds[pred].linear, args }
    }
}
