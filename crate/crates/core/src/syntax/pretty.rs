//! Source printer and the `--dump-ast` s-expression rendering.

use std::fmt::Write;

use super::ast::*;
use super::lexer::Span;
use crate::value::write_float;

/// Renders a program as source text that parses back to the same tree
/// (modulo spans).
pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for d in &p.decls {
        out.push_str("type ");
        if d.linearity == Linearity::Linear {
            out.push_str("linear ");
        }
        out.push_str(&d.name);
        out.push('(');
        for (i, t) in d.arg_types.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            print_type(&mut out, t);
        }
        out.push_str(").\n");
    }
    for c in &p.consts {
        let _ = writeln!(out, "const {} = {}.", c.name, print_expr(&c.value));
    }
    for r in &p.rules {
        out.push_str(&print_rule(r));
        out.push('\n');
    }
    for a in &p.axioms {
        out.push_str(&print_fact(&a.fact));
        out.push_str(".\n");
    }
    out
}

pub fn print_rule(r: &Rule) -> String {
    let mut out = String::new();
    match &r.selector {
        Some(sel) => {
            let _ = write!(out, "[{} => {} | {}]", sel.op.name(), sel.var, print_body(&r.body));
        }
        None => out.push_str(&print_body(&r.body)),
    }
    out.push_str(" -o ");
    out.push_str(&print_head(&r.head));
    out.push('.');
    out
}

fn print_type(out: &mut String, t: &TypeExpr) {
    match t {
        TypeExpr::Node => out.push_str("node"),
        TypeExpr::Int => out.push_str("int"),
        TypeExpr::Float => out.push_str("float"),
        TypeExpr::String => out.push_str("string"),
        TypeExpr::Bool => out.push_str("bool"),
        TypeExpr::List(inner) => {
            out.push_str("list ");
            print_type_atom(out, inner);
        }
        TypeExpr::Pair(a, b) => {
            out.push_str("pair ");
            print_type_atom(out, a);
            out.push_str(" ; ");
            print_type_atom(out, b);
        }
    }
}

fn print_type_atom(out: &mut String, t: &TypeExpr) {
    if matches!(t, TypeExpr::Pair(..)) {
        out.push('(');
        print_type(out, t);
        out.push(')');
    } else {
        print_type(out, t);
    }
}

pub fn type_name(t: &TypeExpr) -> String {
    let mut s = String::new();
    print_type(&mut s, t);
    s
}

pub fn print_fact(f: &FactTemplate) -> String {
    let mut out = String::new();
    if f.persistent {
        out.push('!');
    }
    out.push_str(&f.predicate);
    out.push('(');
    out.push_str(&join(f.args.iter().map(print_expr)));
    out.push(')');
    out
}

fn join(items: impl Iterator<Item = String>) -> String {
    items.collect::<Vec<_>>().join(", ")
}

fn vars_or_dot(vars: &[String]) -> String {
    if vars.is_empty() {
        ".".to_string()
    } else {
        vars.join(", ")
    }
}

pub fn print_body(terms: &[BodyTerm]) -> String {
    join(terms.iter().map(|t| match t {
        BodyTerm::Fact(f) => print_fact(f),
        BodyTerm::Constraint(e) => print_expr(e),
        BodyTerm::Exists(vars, inner, _) => {
            format!("exists {}. ({})", vars.join(", "), print_body(inner))
        }
        BodyTerm::One(_) => "1".to_string(),
    }))
}

pub fn print_head(terms: &[HeadTerm]) -> String {
    join(terms.iter().map(|t| match t {
        HeadTerm::Fact(f) => print_fact(f),
        HeadTerm::One(_) => "1".to_string(),
        HeadTerm::Exists(vars, inner, _) => {
            format!("exists {}. ({})", vars.join(", "), print_head(inner))
        }
        HeadTerm::Comprehension(c) => format!(
            "{{{} | {} | {}}}",
            vars_or_dot(&c.vars),
            print_body(&c.body),
            print_head(&c.head)
        ),
        HeadTerm::Aggregate(a) => format!(
            "[{} | {} | {} | {} | {}]",
            join(a.ops.iter().map(|(op, v)| format!("{} => {v}", op.name()))),
            vars_or_dot(&a.vars),
            print_body(&a.body),
            print_head(&a.each),
            print_head(&a.last)
        ),
    }))
}

pub fn print_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, 0);
    out
}

fn write_expr(out: &mut String, e: &Expr, min_prec: u8) {
    match &e.kind {
        ExprKind::Var(v) => out.push_str(v),
        ExprKind::Wildcard => out.push('_'),
        ExprKind::Name(n) => out.push_str(n),
        ExprKind::Node(n) => {
            let _ = write!(out, "@{n}");
        }
        ExprKind::World => out.push_str("@world"),
        ExprKind::Int(i) => {
            if *i < 0 {
                let _ = write!(out, "({i})");
            } else {
                let _ = write!(out, "{i}");
            }
        }
        ExprKind::Float(x) => {
            if x.is_sign_negative() {
                out.push_str("(-");
                let _ = write_float(out, -x);
                out.push(')');
            } else {
                let _ = write_float(out, *x);
            }
        }
        ExprKind::Str(s) => {
            let _ = write!(out, "'{s}'");
        }
        ExprKind::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        ExprKind::Neg(inner) => {
            out.push('-');
            let atomic = matches!(
                inner.kind,
                ExprKind::Var(_) | ExprKind::Int(0..) | ExprKind::Float(_) | ExprKind::Call(..)
            ) && !matches!(inner.kind, ExprKind::Float(x) if x.is_sign_negative());
            if atomic {
                write_expr(out, inner, 0);
            } else {
                out.push('(');
                write_expr(out, inner, 0);
                out.push(')');
            }
        }
        ExprKind::Binary(op, l, r) => {
            let prec = op.precedence();
            let paren = prec < min_prec;
            if paren {
                out.push('(');
            }
            write_expr(out, l, prec);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, r, prec + 1);
            if paren {
                out.push(')');
            }
        }
        ExprKind::Call(name, args) => {
            out.push_str(name);
            out.push('(');
            out.push_str(&join(args.iter().map(print_expr)));
            out.push(')');
        }
        ExprKind::List(items, tail) => {
            out.push('[');
            out.push_str(&join(items.iter().map(print_expr)));
            if let Some(t) = tail {
                out.push_str(" | ");
                out.push_str(&print_expr(t));
            }
            out.push(']');
        }
    }
}

/// Clears every span so that trees parsed from different layouts compare
/// equal.
pub fn strip_spans(p: &Program) -> Program {
    let mut p = p.clone();
    let z = Span::default();
    for d in &mut p.decls {
        d.span = z;
    }
    for c in &mut p.consts {
        c.span = z;
        strip_expr(&mut c.value);
    }
    for r in &mut p.rules {
        r.span = z;
        r.body.iter_mut().for_each(strip_body);
        r.head.iter_mut().for_each(strip_head);
    }
    for a in &mut p.axioms {
        strip_fact(&mut a.fact);
    }
    p
}

fn strip_expr(e: &mut Expr) {
    e.span = Span::default();
    match &mut e.kind {
        ExprKind::Neg(inner) => strip_expr(inner),
        ExprKind::Binary(_, l, r) => {
            strip_expr(l);
            strip_expr(r);
        }
        ExprKind::Call(_, args) => args.iter_mut().for_each(strip_expr),
        ExprKind::List(items, tail) => {
            items.iter_mut().for_each(strip_expr);
            if let Some(t) = tail {
                strip_expr(t);
            }
        }
        _ => {}
    }
}

fn strip_fact(f: &mut FactTemplate) {
    f.span = Span::default();
    f.args.iter_mut().for_each(strip_expr);
}

fn strip_body(t: &mut BodyTerm) {
    match t {
        BodyTerm::Fact(f) => strip_fact(f),
        BodyTerm::Constraint(e) => strip_expr(e),
        BodyTerm::Exists(_, inner, span) => {
            *span = Span::default();
            inner.iter_mut().for_each(strip_body);
        }
        BodyTerm::One(span) => *span = Span::default(),
    }
}

fn strip_head(t: &mut HeadTerm) {
    match t {
        HeadTerm::Fact(f) => strip_fact(f),
        HeadTerm::One(span) => *span = Span::default(),
        HeadTerm::Exists(_, inner, span) => {
            *span = Span::default();
            inner.iter_mut().for_each(strip_head);
        }
        HeadTerm::Comprehension(c) => {
            c.span = Span::default();
            c.body.iter_mut().for_each(strip_body);
            c.head.iter_mut().for_each(strip_head);
        }
        HeadTerm::Aggregate(a) => {
            a.span = Span::default();
            a.body.iter_mut().for_each(strip_body);
            a.each.iter_mut().for_each(strip_head);
            a.last.iter_mut().for_each(strip_head);
        }
    }
}

/// Canonical s-expression of a program: one tree node per line, children
/// indented by two spaces, fields in declaration order.
pub fn dump_ast(p: &Program) -> String {
    let mut s = SExpr::default();
    s.open("program");
    for d in &p.decls {
        let lin = match d.linearity {
            Linearity::Linear => "linear",
            Linearity::Persistent => "persistent",
        };
        s.open(&format!("decl {} {lin}", d.name));
        for t in &d.arg_types {
            s.leaf(&format!("type {}", type_name(t)));
        }
        s.close();
    }
    for c in &p.consts {
        s.open(&format!("const {}", c.name));
        s.expr(&c.value);
        s.close();
    }
    for r in &p.rules {
        match &r.selector {
            Some(sel) => s.open(&format!("rule {} select {} {}", r.priority, sel.op.name(), sel.var)),
            None => s.open(&format!("rule {}", r.priority)),
        }
        s.open("body");
        r.body.iter().for_each(|t| s.body(t));
        s.close();
        s.open("head");
        r.head.iter().for_each(|t| s.head(t));
        s.close();
        s.close();
    }
    for a in &p.axioms {
        s.open("axiom");
        s.fact(&a.fact);
        s.close();
    }
    s.close();
    s.out
}

#[derive(Default)]
struct SExpr {
    out: String,
    depth: usize,
}

impl SExpr {
    fn line(&mut self, text: &str) {
        if !self.out.is_empty() {
            self.out.push('\n');
        }
        for _ in 0..self.depth {
            self.out.push_str("  ");
        }
        self.out.push('(');
        self.out.push_str(text);
    }

    fn open(&mut self, text: &str) {
        self.line(text);
        self.depth += 1;
    }

    fn close(&mut self) {
        self.out.push(')');
        self.depth -= 1;
        if self.depth == 0 {
            self.out.push('\n');
        }
    }

    fn leaf(&mut self, text: &str) {
        self.line(text);
        self.out.push(')');
    }

    fn fact(&mut self, f: &FactTemplate) {
        let kind = if f.persistent { "persistent" } else { "linear" };
        self.open(&format!("fact {} {kind}", f.predicate));
        f.args.iter().for_each(|a| self.expr(a));
        self.close();
    }

    fn body(&mut self, t: &BodyTerm) {
        match t {
            BodyTerm::Fact(f) => self.fact(f),
            BodyTerm::Constraint(e) => {
                self.open("constraint");
                self.expr(e);
                self.close();
            }
            BodyTerm::Exists(vars, inner, _) => {
                self.open(&format!("exists {}", vars.join(" ")));
                inner.iter().for_each(|t| self.body(t));
                self.close();
            }
            BodyTerm::One(_) => self.leaf("one"),
        }
    }

    fn head(&mut self, t: &HeadTerm) {
        match t {
            HeadTerm::Fact(f) => self.fact(f),
            HeadTerm::One(_) => self.leaf("one"),
            HeadTerm::Exists(vars, inner, _) => {
                self.open(&format!("exists {}", vars.join(" ")));
                inner.iter().for_each(|t| self.head(t));
                self.close();
            }
            HeadTerm::Comprehension(c) => {
                self.open("comprehension");
                self.leaf(&format!("vars{}", prefixed(&c.vars)));
                self.open("body");
                c.body.iter().for_each(|t| self.body(t));
                self.close();
                self.open("head");
                c.head.iter().for_each(|t| self.head(t));
                self.close();
                self.close();
            }
            HeadTerm::Aggregate(a) => {
                self.open("aggregate");
                for (op, v) in &a.ops {
                    self.leaf(&format!("op {} {v}", op.name()));
                }
                self.leaf(&format!("vars{}", prefixed(&a.vars)));
                self.open("body");
                a.body.iter().for_each(|t| self.body(t));
                self.close();
                self.open("each");
                a.each.iter().for_each(|t| self.head(t));
                self.close();
                self.open("last");
                a.last.iter().for_each(|t| self.head(t));
                self.close();
                self.close();
            }
        }
    }

    fn expr(&mut self, e: &Expr) {
        match &e.kind {
            ExprKind::Var(v) => self.leaf(&format!("var {v}")),
            ExprKind::Wildcard => self.leaf("wildcard"),
            ExprKind::Name(n) => self.leaf(&format!("name {n}")),
            ExprKind::Node(n) => self.leaf(&format!("node {n}")),
            ExprKind::World => self.leaf("world"),
            ExprKind::Int(i) => self.leaf(&format!("int {i}")),
            ExprKind::Float(x) => {
                let mut s = String::from("float ");
                let _ = write_float(&mut s, *x);
                self.leaf(&s);
            }
            ExprKind::Str(s) => self.leaf(&format!("string '{s}'")),
            ExprKind::Bool(b) => self.leaf(&format!("bool {b}")),
            ExprKind::Neg(inner) => {
                self.open("neg");
                self.expr(inner);
                self.close();
            }
            ExprKind::Binary(op, l, r) => {
                self.open(&format!("binary {}", op.symbol()));
                self.expr(l);
                self.expr(r);
                self.close();
            }
            ExprKind::Call(name, args) => {
                self.open(&format!("call {name}"));
                args.iter().for_each(|a| self.expr(a));
                self.close();
            }
            ExprKind::List(items, tail) => {
                self.open("list");
                items.iter().for_each(|a| self.expr(a));
                if let Some(t) = tail {
                    self.open("tail");
                    self.expr(t);
                    self.close();
                }
                self.close();
            }
        }
    }
}

fn prefixed(vars: &[String]) -> String {
    vars.iter().map(|v| format!(" {v}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_source;

    fn round_trip(src: &str) {
        let p = parse_source(src).unwrap();
        let printed = print_program(&p);
        let q = parse_source(&printed).unwrap_or_else(|e| panic!("{e}\n{printed}"));
        assert_eq!(strip_spans(&p), strip_spans(&q), "{printed}");
    }

    #[test]
    fn expressions_keep_their_shape() {
        round_trip("const a = (1 - 2) - 3. const b = 1 - (2 - 3). const c = -(1 + 2) * 4.");
        round_trip("const d = -0.5. const e = 100000000000000000000.0. const f = --3.");
        round_trip("const g = pair(1, 'x'). const h = [1, 2 | [3]].");
    }

    #[test]
    fn heads_round_trip() {
        round_trip(
            "a(A, X), X > 0 || X < -5 -o {B | !e(A, B), B <> A | b(B, X)}, \
             [sum => S, count => C | D | n(A, D, S) | 1 | m(A, S, C)], exists N. (c(N)).",
        );
        round_trip("[random => W | w(A, W)] -o 1.");
    }

    #[test]
    fn dump_is_one_node_per_line() {
        let p = parse_source("type linear v(node). v(A) -o 1.").unwrap();
        let d = dump_ast(&p);
        assert_eq!(
            d,
            "(program\n  (decl v linear\n    (type node))\n  (rule 0\n    (body\n      \
             (fact v linear\n        (var A)))\n    (head\n      (one))))\n"
        );
    }
}
