//! Recursive-descent parser producing [`Program`].
//!
//! Statements end with `.`. Expression precedence, loosest first:
//! `||`, `&&`, comparisons, `+ -`, `* / %`, unary minus.

use thiserror::Error;

use super::ast::*;
use super::lexer::{tokenize, LexError, Span, Token, TokenKind};

/// Built-in functions usable in expressions. A call to any other name in a
/// body position is read as a fact template.
pub const BUILTIN_FUNCTIONS: &[&str] = &["float", "int", "pair", "fst", "snd", "abs", "head", "tail"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("{span}: expected {expected}, found {found}")]
    Syntax { expected: String, found: String, span: Span },
}

impl ParseError {
    pub fn span(&self) -> Span {
        match self {
            ParseError::Lex(e) => e.span(),
            ParseError::Syntax { span, .. } => *span,
        }
    }

    /// The description without its location.
    pub fn message(&self) -> String {
        let full = self.to_string();
        let prefix = format!("{}: ", self.span());
        full.strip_prefix(&prefix).map(str::to_string).unwrap_or(full)
    }

    pub fn code(&self) -> &'static str {
        match self {
            ParseError::Lex(LexError::UnterminatedString { .. }) => "UnterminatedString",
            ParseError::Lex(LexError::IllegalCharacter { .. }) => "IllegalCharacter",
            ParseError::Lex(LexError::BadNumber { .. }) => "BadNumber",
            ParseError::Syntax { .. } => "SyntaxError",
        }
    }
}

/// Tokenizes and parses a whole program.
pub fn parse_source(src: &str) -> Result<Program, ParseError> {
    let tokens = tokenize(src)?;
    parse_program(&tokens)
}

pub fn parse_program(tokens: &[Token]) -> Result<Program, ParseError> {
    let mut p = Parser { tokens, pos: 0 };
    let mut program = Program::default();
    while !p.at_end() {
        p.statement(&mut program)?;
    }
    Ok(program)
}

/// Parses a single expression, as used for `--const name=value`.
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens: &tokens, pos: 0 };
    let e = p.expr()?;
    if !p.at_end() {
        return Err(p.unexpected("end of expression"));
    }
    Ok(e)
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl<'t> Parser<'t> {
    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn peek_at(&self, n: usize) -> Option<&TokenKind> {
        self.tokens.get(self.pos + n).map(|t| &t.kind)
    }

    fn span(&self) -> Span {
        self.tokens
            .get(self.pos)
            .or(self.tokens.last())
            .map(|t| t.span)
            .unwrap_or_default()
    }

    fn bump(&mut self) -> Option<&TokenKind> {
        let t = self.tokens.get(self.pos).map(|t| &t.kind);
        self.pos += 1;
        t
    }

    fn check(&self, k: &TokenKind) -> bool {
        self.peek() == Some(k)
    }

    fn eat(&mut self, k: &TokenKind) -> bool {
        if self.check(k) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        ParseError::Syntax {
            expected: expected.to_string(),
            found: self
                .peek()
                .map(|k| k.to_string())
                .unwrap_or_else(|| "end of input".to_string()),
            span: self.span(),
        }
    }

    fn expect(&mut self, k: TokenKind) -> PResult<()> {
        if self.eat(&k) {
            Ok(())
        } else {
            Err(self.unexpected(&k.to_string()))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek() {
            Some(TokenKind::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn var(&mut self) -> PResult<String> {
        match self.peek() {
            Some(TokenKind::Var(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.unexpected("variable")),
        }
    }

    fn statement(&mut self, program: &mut Program) -> PResult<()> {
        let span = self.span();
        match self.peek() {
            Some(TokenKind::Type) => {
                self.bump();
                let linearity = if self.eat(&TokenKind::Linear) {
                    Linearity::Linear
                } else {
                    Linearity::Persistent
                };
                let name = self.ident()?;
                self.expect(TokenKind::LParen)?;
                let mut arg_types = vec![self.type_expr()?];
                while self.eat(&TokenKind::Comma) {
                    arg_types.push(self.type_expr()?);
                }
                self.expect(TokenKind::RParen)?;
                self.expect(TokenKind::Dot)?;
                program.decls.push(PredicateDecl { name, arg_types, linearity, span });
            }
            Some(TokenKind::Const) => {
                self.bump();
                let name = self.ident()?;
                self.expect(TokenKind::Eq)?;
                let value = self.expr()?;
                self.expect(TokenKind::Dot)?;
                program.consts.push(ConstDecl { name, value, span });
            }
            Some(TokenKind::LBracket)
                if matches!(self.peek_at(1), Some(TokenKind::Ident(_)))
                    && self.peek_at(2) == Some(&TokenKind::FatArrow) =>
            {
                self.bump();
                let op = match self.ident()?.as_str() {
                    "min" => SelectorOp::Min,
                    "max" => SelectorOp::Max,
                    "random" => SelectorOp::Random,
                    _ => {
                        self.pos -= 1;
                        return Err(self.unexpected("selector `min`, `max` or `random`"));
                    }
                };
                self.expect(TokenKind::FatArrow)?;
                let var = self.var()?;
                self.expect(TokenKind::Bar)?;
                let body = self.body_terms()?;
                self.expect(TokenKind::RBracket)?;
                self.expect(TokenKind::Lolli)?;
                let head = self.head_terms(true)?;
                self.expect(TokenKind::Dot)?;
                let priority = program.rules.len();
                program.rules.push(Rule {
                    priority,
                    selector: Some(Selector { op, var }),
                    body,
                    head,
                    span,
                });
            }
            _ => {
                let body = self.body_terms()?;
                if self.eat(&TokenKind::Lolli) {
                    let head = self.head_terms(true)?;
                    self.expect(TokenKind::Dot)?;
                    if body.iter().all(|t| matches!(t, BodyTerm::One(_))) {
                        // `1 -o facts.` is an axiom block.
                        for term in head {
                            match term {
                                HeadTerm::Fact(fact) => program.axioms.push(Axiom { fact }),
                                HeadTerm::One(_) => {}
                                _ => {
                                    return Err(ParseError::Syntax {
                                        expected: "facts in an axiom head".into(),
                                        found: "a complex head expression".into(),
                                        span,
                                    })
                                }
                            }
                        }
                    } else {
                        let priority = program.rules.len();
                        program.rules.push(Rule { priority, selector: None, body, head, span });
                    }
                } else if self.check(&TokenKind::Dot) {
                    self.bump();
                    for term in body {
                        match term {
                            BodyTerm::Fact(fact) => program.axioms.push(Axiom { fact }),
                            _ => {
                                return Err(ParseError::Syntax {
                                    expected: "`-o`".into(),
                                    found: "`.` after a non-fact term".into(),
                                    span,
                                })
                            }
                        }
                    }
                } else {
                    return Err(self.unexpected("`-o` or `.`"));
                }
            }
        }
        Ok(())
    }

    fn type_expr(&mut self) -> PResult<TypeExpr> {
        if self.eat(&TokenKind::LParen) {
            let t = self.type_expr()?;
            self.expect(TokenKind::RParen)?;
            return Ok(t);
        }
        let name = self.ident()?;
        Ok(match name.as_str() {
            "node" => TypeExpr::Node,
            "int" => TypeExpr::Int,
            "float" => TypeExpr::Float,
            "string" => TypeExpr::String,
            "bool" => TypeExpr::Bool,
            "list" => TypeExpr::List(Box::new(self.type_expr()?)),
            "pair" => {
                let a = self.type_expr()?;
                self.expect(TokenKind::Semi)?;
                let b = self.type_expr()?;
                TypeExpr::Pair(Box::new(a), Box::new(b))
            }
            _ => {
                self.pos -= 1;
                return Err(self.unexpected("a type"));
            }
        })
    }

    fn at_term_end(&self, offset: usize) -> bool {
        matches!(
            self.peek_at(offset),
            None | Some(
                TokenKind::Comma
                    | TokenKind::Lolli
                    | TokenKind::Dot
                    | TokenKind::Bar
                    | TokenKind::RBracket
                    | TokenKind::RBrace
                    | TokenKind::RParen
            )
        )
    }

    fn is_fact_start(&self) -> bool {
        match (self.peek(), self.peek_at(1)) {
            (Some(TokenKind::Bang), _) => true,
            (Some(TokenKind::Ident(name)), Some(TokenKind::LParen)) => {
                !BUILTIN_FUNCTIONS.contains(&name.as_str())
            }
            _ => false,
        }
    }

    fn fact(&mut self) -> PResult<FactTemplate> {
        let span = self.span();
        let persistent = self.eat(&TokenKind::Bang);
        let predicate = self.ident()?;
        self.expect(TokenKind::LParen)?;
        let mut args = Vec::new();
        if !self.check(&TokenKind::RParen) {
            args.push(self.expr()?);
            while self.eat(&TokenKind::Comma) {
                args.push(self.expr()?);
            }
        }
        self.expect(TokenKind::RParen)?;
        Ok(FactTemplate { predicate, persistent, args, span })
    }

    fn var_list(&mut self) -> PResult<Vec<String>> {
        if self.eat(&TokenKind::Dot) {
            return Ok(Vec::new());
        }
        let mut vars = Vec::new();
        if self.check(&TokenKind::Bar) {
            return Ok(vars);
        }
        vars.push(self.var()?);
        while self.eat(&TokenKind::Comma) {
            vars.push(self.var()?);
        }
        Ok(vars)
    }

    fn body_terms(&mut self) -> PResult<Vec<BodyTerm>> {
        let mut terms = vec![self.body_term()?];
        while self.eat(&TokenKind::Comma) {
            terms.push(self.body_term()?);
        }
        Ok(terms)
    }

    fn body_term(&mut self) -> PResult<BodyTerm> {
        let span = self.span();
        if self.is_fact_start() {
            return Ok(BodyTerm::Fact(self.fact()?));
        }
        if self.check(&TokenKind::Int(1)) && self.at_term_end(1) {
            self.bump();
            return Ok(BodyTerm::One(span));
        }
        if self.eat(&TokenKind::Exists) {
            let vars = self.exists_vars()?;
            self.expect(TokenKind::LParen)?;
            let inner = self.body_terms()?;
            self.expect(TokenKind::RParen)?;
            return Ok(BodyTerm::Exists(vars, inner, span));
        }
        Ok(BodyTerm::Constraint(self.expr()?))
    }

    fn exists_vars(&mut self) -> PResult<Vec<String>> {
        let mut vars = vec![self.var()?];
        while self.eat(&TokenKind::Comma) {
            vars.push(self.var()?);
        }
        self.expect(TokenKind::Dot)?;
        Ok(vars)
    }

    fn head_terms(&mut self, full: bool) -> PResult<Vec<HeadTerm>> {
        let mut terms = vec![self.head_term(full)?];
        while self.eat(&TokenKind::Comma) {
            terms.push(self.head_term(full)?);
        }
        Ok(terms)
    }

    /// `full` admits exists, comprehension and aggregate terms; sub-heads
    /// only hold facts and `1`.
    fn head_term(&mut self, full: bool) -> PResult<HeadTerm> {
        let span = self.span();
        if self.check(&TokenKind::Int(1)) && self.at_term_end(1) {
            self.bump();
            return Ok(HeadTerm::One(span));
        }
        if self.is_fact_start() {
            return Ok(HeadTerm::Fact(self.fact()?));
        }
        if !full {
            return Err(self.unexpected("a fact or `1`"));
        }
        match self.peek() {
            Some(TokenKind::Exists) => {
                self.bump();
                let vars = self.exists_vars()?;
                self.expect(TokenKind::LParen)?;
                let inner = self.head_terms(false)?;
                self.expect(TokenKind::RParen)?;
                Ok(HeadTerm::Exists(vars, inner, span))
            }
            Some(TokenKind::LBrace) => {
                self.bump();
                let vars = self.var_list()?;
                self.expect(TokenKind::Bar)?;
                let body = self.body_terms()?;
                self.expect(TokenKind::Bar)?;
                let head = self.head_terms(false)?;
                self.expect(TokenKind::RBrace)?;
                Ok(HeadTerm::Comprehension(Comprehension { vars, body, head, span }))
            }
            Some(TokenKind::LBracket) => {
                self.bump();
                let mut ops = vec![self.aggregate_spec()?];
                while self.eat(&TokenKind::Comma) {
                    ops.push(self.aggregate_spec()?);
                }
                self.expect(TokenKind::Bar)?;
                let vars = self.var_list()?;
                self.expect(TokenKind::Bar)?;
                let body = self.body_terms()?;
                self.expect(TokenKind::Bar)?;
                let each = self.head_terms(false)?;
                self.expect(TokenKind::Bar)?;
                let last = self.head_terms(false)?;
                self.expect(TokenKind::RBracket)?;
                Ok(HeadTerm::Aggregate(Aggregate { ops, vars, body, each, last, span }))
            }
            _ => Err(self.unexpected("a head term")),
        }
    }

    fn aggregate_spec(&mut self) -> PResult<(AggregateOp, String)> {
        let op = match self.ident()?.as_str() {
            "min" => AggregateOp::Min,
            "max" => AggregateOp::Max,
            "sum" => AggregateOp::Sum,
            "count" => AggregateOp::Count,
            _ => {
                self.pos -= 1;
                return Err(self.unexpected("aggregate `min`, `max`, `sum` or `count`"));
            }
        };
        self.expect(TokenKind::FatArrow)?;
        Ok((op, self.var()?))
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binary_op(&self) -> Option<BinOp> {
        Some(match self.peek()? {
            TokenKind::OrOr => BinOp::Or,
            TokenKind::AndAnd => BinOp::And,
            TokenKind::Eq => BinOp::Eq,
            TokenKind::Neq => BinOp::Neq,
            TokenKind::Lt => BinOp::Lt,
            TokenKind::Le => BinOp::Le,
            TokenKind::Gt => BinOp::Gt,
            TokenKind::Ge => BinOp::Ge,
            TokenKind::Plus => BinOp::Add,
            TokenKind::Minus => BinOp::Sub,
            TokenKind::Star => BinOp::Mul,
            TokenKind::Slash => BinOp::Div,
            TokenKind::Percent => BinOp::Mod,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            let span = lhs.span;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let span = self.span();
        if self.eat(&TokenKind::Minus) {
            let inner = self.unary()?;
            return Ok(Expr::new(ExprKind::Neg(Box::new(inner)), span));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        let span = self.span();
        let kind = match self.peek().cloned() {
            Some(TokenKind::Var(v)) => {
                self.bump();
                ExprKind::Var(v)
            }
            Some(TokenKind::Wildcard) => {
                self.bump();
                ExprKind::Wildcard
            }
            Some(TokenKind::Node(n)) => {
                self.bump();
                ExprKind::Node(n)
            }
            Some(TokenKind::World) => {
                self.bump();
                ExprKind::World
            }
            Some(TokenKind::Int(i)) => {
                self.bump();
                ExprKind::Int(i)
            }
            Some(TokenKind::Float(x)) => {
                self.bump();
                ExprKind::Float(x)
            }
            Some(TokenKind::Str(s)) => {
                self.bump();
                ExprKind::Str(s)
            }
            Some(TokenKind::Ident(name)) => {
                self.bump();
                if self.eat(&TokenKind::LParen) {
                    let mut args = Vec::new();
                    if !self.check(&TokenKind::RParen) {
                        args.push(self.expr()?);
                        while self.eat(&TokenKind::Comma) {
                            args.push(self.expr()?);
                        }
                    }
                    self.expect(TokenKind::RParen)?;
                    ExprKind::Call(name, args)
                } else {
                    match name.as_str() {
                        "true" => ExprKind::Bool(true),
                        "false" => ExprKind::Bool(false),
                        _ => ExprKind::Name(name),
                    }
                }
            }
            Some(TokenKind::LParen) => {
                self.bump();
                let e = self.expr()?;
                self.expect(TokenKind::RParen)?;
                return Ok(e);
            }
            Some(TokenKind::LBracket) => {
                self.bump();
                let mut items = Vec::new();
                let mut tail = None;
                if !self.check(&TokenKind::RBracket) {
                    items.push(self.expr()?);
                    while self.eat(&TokenKind::Comma) {
                        items.push(self.expr()?);
                    }
                    if self.eat(&TokenKind::Bar) {
                        tail = Some(Box::new(self.expr()?));
                    }
                }
                self.expect(TokenKind::RBracket)?;
                ExprKind::List(items, tail)
            }
            _ => return Err(self.unexpected("an expression")),
        };
        Ok(Expr::new(kind, span))
    }
}
