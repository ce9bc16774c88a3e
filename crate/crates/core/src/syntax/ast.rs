//! Surface syntax tree, as written by the programmer.

use super::lexer::Span;

#[derive(Clone, Debug, PartialEq)]
pub enum TypeExpr {
    Node,
    Int,
    Float,
    String,
    Bool,
    List(Box<TypeExpr>),
    Pair(Box<TypeExpr>, Box<TypeExpr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Linearity {
    Linear,
    Persistent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredicateDecl {
    pub name: String,
    pub arg_types: Vec<TypeExpr>,
    pub linearity: Linearity,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstDecl {
    pub name: String,
    pub value: Expr,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Eq => "=",
            BinOp::Neq => "<>",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Neq | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Var(String),
    Wildcard,
    /// A lower-case name: a program constant.
    Name(String),
    Node(u64),
    World,
    Int(i64),
    Float(f64),
    Str(String),
    Bool(bool),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
    /// `[a, b | tail]`; `[]` has no items and no tail.
    List(Vec<Expr>, Option<Box<Expr>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactTemplate {
    pub predicate: String,
    /// Written with a leading `!`.
    pub persistent: bool,
    pub args: Vec<Expr>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum BodyTerm {
    Fact(FactTemplate),
    Constraint(Expr),
    Exists(Vec<String>, Vec<BodyTerm>, Span),
    One(Span),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AggregateOp {
    Min,
    Max,
    Sum,
    Count,
}

impl AggregateOp {
    pub fn name(self) -> &'static str {
        match self {
            AggregateOp::Min => "min",
            AggregateOp::Max => "max",
            AggregateOp::Sum => "sum",
            AggregateOp::Count => "count",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectorOp {
    Min,
    Max,
    Random,
}

impl SelectorOp {
    pub fn name(self) -> &'static str {
        match self {
            SelectorOp::Min => "min",
            SelectorOp::Max => "max",
            SelectorOp::Random => "random",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comprehension {
    pub vars: Vec<String>,
    pub body: Vec<BodyTerm>,
    pub head: Vec<HeadTerm>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    /// One or more `op => Var` specs sharing a single matching loop.
    pub ops: Vec<(AggregateOp, String)>,
    pub vars: Vec<String>,
    pub body: Vec<BodyTerm>,
    pub each: Vec<HeadTerm>,
    pub last: Vec<HeadTerm>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum HeadTerm {
    Fact(FactTemplate),
    One(Span),
    Exists(Vec<String>, Vec<HeadTerm>, Span),
    Comprehension(Comprehension),
    Aggregate(Aggregate),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selector {
    pub op: SelectorOp,
    pub var: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    /// Position among the program's rules; 0 is tried first.
    pub priority: usize,
    pub selector: Option<Selector>,
    pub body: Vec<BodyTerm>,
    pub head: Vec<HeadTerm>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Axiom {
    pub fact: FactTemplate,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Program {
    pub decls: Vec<PredicateDecl>,
    pub consts: Vec<ConstDecl>,
    pub rules: Vec<Rule>,
    pub axioms: Vec<Axiom>,
}
