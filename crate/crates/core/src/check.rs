//! Type checking, locality checking and compilation to [`TypedProgram`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::eval::{eval, Bindings, EvalCtx};
use crate::ir::*;
use crate::syntax::ast::{
    self, AggregateOp, BinOp, BodyTerm, Expr, ExprKind, FactTemplate, HeadTerm, Linearity,
    Program, Rule, SelectorOp, TypeExpr,
};
use crate::syntax::pretty::{print_fact, print_rule, type_name};
use crate::syntax::{parse_expr, Span};
use crate::value::{NodeId, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ErrorCode {
    TypeMismatch,
    UnknownPredicate,
    ArityMismatch,
    UnboundHeadVariable,
    UnboundVariable,
    NonGroundAxiom,
    LocalityViolation,
    UnresolvedConst,
    ShadowedVariable,
    InvalidDeclaration,
    DuplicateDeclaration,
    UnknownFunction,
    InvalidWildcard,
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckError {
    pub code: ErrorCode,
    pub message: String,
    pub span: Span,
    /// Index of the offending rule, if any.
    pub rule: Option<usize>,
}

impl fmt::Display for CheckError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.span, self.code, self.message)?;
        if let Some(r) = self.rule {
            write!(f, " (rule {r})")?;
        }
        Ok(())
    }
}

impl std::error::Error for CheckError {}

/// Parses a `name=value` constant override; the value uses literal syntax.
pub fn parse_const_override(s: &str) -> Result<(String, Value), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let name = name.trim();
    if name.is_empty() || !name.starts_with(|c: char| c.is_ascii_lowercase()) {
        return Err(format!("`{name}` is not a constant name"));
    }
    let expr = parse_expr(value.trim()).map_err(|e| e.to_string())?;
    let v = eval_literal(&expr, &BTreeMap::new()).map_err(|e| e.message)?;
    Ok((name.to_string(), v))
}

fn eval_literal(e: &Expr, consts: &BTreeMap<String, Value>) -> Result<Value, CheckError> {
    let preds = Preds::default();
    let mut errors = Vec::new();
    let mut cx = Cx::new(&preds, consts, &mut errors, None);
    cx.mode = Mode::Literal;
    let compiled = cx.expr(e, None);
    if let Some(err) = errors.into_iter().next() {
        return Err(err);
    }
    let (ce, _) = compiled.expect("no errors means the expression compiled");
    eval(&ce, &Bindings::new(0), &EvalCtx::default()).map_err(|err| CheckError {
        code: ErrorCode::TypeMismatch,
        message: err.to_string(),
        span: e.span,
        rule: None,
    })
}

fn type_of_value(v: &Value) -> Option<TypeExpr> {
    Some(match v {
        Value::Node(_) => TypeExpr::Node,
        Value::Int(_) => TypeExpr::Int,
        Value::Float(_) => TypeExpr::Float,
        Value::Bool(_) => TypeExpr::Bool,
        Value::Str(_) => TypeExpr::String,
        Value::List(items) => TypeExpr::List(Box::new(type_of_value(items.first()?)?)),
        Value::Pair(p) => TypeExpr::Pair(Box::new(type_of_value(&p.0)?), Box::new(type_of_value(&p.1)?)),
    })
}

/// Checks that every body template of `r`, including those inside
/// comprehensions, aggregates and selectors, shares one home variable.
pub fn check_locality(r: &Rule) -> Result<(), CheckError> {
    let mut templates = Vec::new();
    collect_body_templates(&r.body, &mut templates);
    for h in &r.head {
        match h {
            HeadTerm::Comprehension(c) => collect_body_templates(&c.body, &mut templates),
            HeadTerm::Aggregate(a) => collect_body_templates(&a.body, &mut templates),
            _ => {}
        }
    }
    let violation = |t: &FactTemplate, why: String| CheckError {
        code: ErrorCode::LocalityViolation,
        message: format!("{}: {why}", print_fact(t)),
        span: t.span,
        rule: Some(r.priority),
    };
    let Some(first) = templates.first() else {
        return Err(CheckError {
            code: ErrorCode::LocalityViolation,
            message: "rule body has no fact template".into(),
            span: r.span,
            rule: Some(r.priority),
        });
    };
    let home = match first.args.first().map(|a| &a.kind) {
        Some(ExprKind::Var(v)) => v.clone(),
        _ => return Err(violation(first, "first argument must be a variable".into())),
    };
    for t in &templates {
        match t.args.first().map(|a| &a.kind) {
            Some(ExprKind::Var(v)) if *v == home => {}
            _ => return Err(violation(t, format!("first argument differs from home variable {home}"))),
        }
    }
    Ok(())
}

fn collect_body_templates<'a>(terms: &'a [BodyTerm], out: &mut Vec<&'a FactTemplate>) {
    for t in terms {
        match t {
            BodyTerm::Fact(f) => out.push(f),
            BodyTerm::Exists(_, inner, _) => collect_body_templates(inner, out),
            _ => {}
        }
    }
}

#[derive(Default)]
struct Preds {
    infos: Vec<PredInfo>,
    index: HashMap<String, PredId>,
}

/// Checks `p` and lowers it. Constants in `overrides` take precedence over
/// `const` declarations and may name constants the program never declares.
pub fn check_program(
    p: &Program,
    overrides: &BTreeMap<String, Value>,
) -> Result<TypedProgram, Vec<CheckError>> {
    let mut errors = Vec::new();
    let mut preds = Preds::default();
    for d in &p.decls {
        if preds.index.contains_key(&d.name) {
            errors.push(CheckError {
                code: ErrorCode::DuplicateDeclaration,
                message: format!("predicate {} declared twice", d.name),
                span: d.span,
                rule: None,
            });
            continue;
        }
        if d.arg_types.first() != Some(&TypeExpr::Node) {
            errors.push(CheckError {
                code: ErrorCode::InvalidDeclaration,
                message: format!("first argument of {} must have type node", d.name),
                span: d.span,
                rule: None,
            });
        }
        preds.index.insert(d.name.clone(), preds.infos.len());
        preds.infos.push(PredInfo {
            name: d.name.clone(),
            arg_types: d.arg_types.clone(),
            linear: d.linearity == Linearity::Linear,
        });
    }

    let mut consts = overrides.clone();
    let mut declared = BTreeSet::new();
    for c in &p.consts {
        if !declared.insert(c.name.clone()) {
            errors.push(CheckError {
                code: ErrorCode::DuplicateDeclaration,
                message: format!("constant {} declared twice", c.name),
                span: c.span,
                rule: None,
            });
            continue;
        }
        if overrides.contains_key(&c.name) {
            continue;
        }
        match eval_literal(&c.value, &consts) {
            Ok(v) => {
                consts.insert(c.name.clone(), v);
            }
            Err(e) => errors.push(e),
        }
    }

    let mut rules = Vec::new();
    for r in &p.rules {
        if let Err(e) = check_locality(r) {
            errors.push(e);
            continue;
        }
        let mut cx = Cx::new(&preds, &consts, &mut errors, Some(r.priority));
        if let Some(rule) = cx.rule(r) {
            rules.push(rule);
        }
    }

    let mut axioms = Vec::new();
    for a in &p.axioms {
        let mut cx = Cx::new(&preds, &consts, &mut errors, None);
        if let Some(ax) = cx.axiom(&a.fact) {
            axioms.push(ax);
        }
    }

    if errors.is_empty() {
        Ok(TypedProgram { preds: preds.infos, pred_index: preds.index, consts, rules, axioms })
    } else {
        Err(errors)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Body,
    Head,
    Literal,
}

#[derive(Clone)]
struct Var {
    slot: Slot,
    ty: TypeExpr,
}

struct Cx<'a> {
    preds: &'a Preds,
    consts: &'a BTreeMap<String, Value>,
    errors: &'a mut Vec<CheckError>,
    rule: Option<usize>,
    slots: Vec<String>,
    /// Variables visible at this point, all bound before use.
    scope: HashMap<String, Var>,
    mode: Mode,
}

enum Pending<'e> {
    Constraint(&'e Expr),
    Assign(&'e str, &'e Expr),
}

impl<'a> Cx<'a> {
    fn new(
        preds: &'a Preds,
        consts: &'a BTreeMap<String, Value>,
        errors: &'a mut Vec<CheckError>,
        rule: Option<usize>,
    ) -> Self {
        Cx { preds, consts, errors, rule, slots: Vec::new(), scope: HashMap::new(), mode: Mode::Body }
    }

    fn err(&mut self, code: ErrorCode, span: Span, message: String) {
        self.errors.push(CheckError { code, message, span, rule: self.rule });
    }

    fn new_var(&mut self, name: &str, ty: TypeExpr) -> Slot {
        let slot = self.slots.len();
        self.slots.push(name.to_string());
        self.scope.insert(name.to_string(), Var { slot, ty });
        slot
    }

    fn rule(&mut self, r: &Rule) -> Option<CompiledRule> {
        let before = self.errors.len();
        let home_name = first_home_var(&r.body).expect("locality checked");
        let home = self.new_var(&home_name, TypeExpr::Node);
        let body = self.body(&r.body);
        let selector = r.selector.as_ref().map(|sel| {
            let slot = match self.scope.get(&sel.var).cloned() {
                Some(v) => {
                    if sel.op != SelectorOp::Random && !is_orderable(&v.ty) {
                        let msg = format!("selector variable {} has type {}", sel.var, type_name(&v.ty));
                        self.err(ErrorCode::TypeMismatch, r.span, msg);
                    }
                    v.slot
                }
                None if sel.op == SelectorOp::Random => self.new_var(&sel.var, TypeExpr::Int),
                None => {
                    let msg = format!("selector variable {} is not bound by the body", sel.var);
                    self.err(ErrorCode::UnboundVariable, r.span, msg);
                    0
                }
            };
            (sel.op, slot)
        });
        let head = self.head(&r.head);
        if self.errors.len() > before {
            return None;
        }
        Some(CompiledRule {
            index: r.priority,
            span: r.span,
            home,
            slot_names: std::mem::take(&mut self.slots),
            selector,
            body: body?,
            head: head?,
            text: print_rule(r),
        })
    }

    /// Compiles a body. Templates keep their written order; each constraint
    /// is placed right after the template that binds its last variable.
    fn body(&mut self, terms: &[BodyTerm]) -> Option<Vec<MatchItem>> {
        let before = self.errors.len();
        self.mode = Mode::Body;
        let mut flat = Vec::new();
        self.flatten(terms, &mut flat);
        let mut template_vars = BTreeSet::new();
        for t in &flat {
            if let BodyTerm::Fact(f) = t {
                for a in &f.args {
                    expr_vars(a, &mut template_vars);
                }
            }
        }
        let mut pending = Vec::new();
        let mut facts = Vec::new();
        for t in &flat {
            match t {
                BodyTerm::Fact(f) => facts.push(f),
                BodyTerm::Constraint(e) => pending.push(self.classify(e, &template_vars)),
                _ => {}
            }
        }
        let mut items = Vec::new();
        self.place_ready(&mut pending, &mut items);
        for f in facts {
            if let Some(t) = self.template(f) {
                items.push(MatchItem::Fact(t));
            }
            self.place_ready(&mut pending, &mut items);
        }
        for p in pending {
            let e = match p {
                Pending::Constraint(e) | Pending::Assign(_, e) => e,
            };
            let mut vars = BTreeSet::new();
            expr_vars(e, &mut vars);
            let missing: Vec<_> = vars.into_iter().filter(|v| !self.scope.contains_key(v)).collect();
            let msg = format!("constraint uses unbound variable(s) {}", missing.join(", "));
            self.err(ErrorCode::UnboundVariable, e.span, msg);
        }
        (self.errors.len() == before).then_some(items)
    }

    fn flatten<'t>(&mut self, terms: &'t [BodyTerm], out: &mut Vec<&'t BodyTerm>) {
        for t in terms {
            match t {
                BodyTerm::Exists(vars, inner, span) => {
                    for v in vars {
                        if self.scope.contains_key(v) {
                            let msg = format!("exists variable {v} shadows an outer variable");
                            self.err(ErrorCode::ShadowedVariable, *span, msg);
                        }
                    }
                    self.flatten(inner, out);
                }
                BodyTerm::One(_) => {}
                other => out.push(other),
            }
        }
    }

    fn classify<'e>(&self, e: &'e Expr, template_vars: &BTreeSet<String>) -> Pending<'e> {
        if let ExprKind::Binary(BinOp::Eq, l, r) = &e.kind {
            if let ExprKind::Var(x) = &l.kind {
                let mut rhs = BTreeSet::new();
                expr_vars(r, &mut rhs);
                if !self.scope.contains_key(x) && !template_vars.contains(x) && !rhs.contains(x) {
                    return Pending::Assign(x, r);
                }
            }
        }
        Pending::Constraint(e)
    }

    fn place_ready(&mut self, pending: &mut Vec<Pending<'_>>, items: &mut Vec<MatchItem>) {
        loop {
            let ready = pending.iter().position(|p| {
                let e = match p {
                    Pending::Constraint(e) | Pending::Assign(_, e) => e,
                };
                let mut vars = BTreeSet::new();
                expr_vars(e, &mut vars);
                vars.iter().all(|v| self.scope.contains_key(v))
            });
            let Some(i) = ready else { return };
            match pending.remove(i) {
                Pending::Constraint(e) => {
                    if let Some((ce, ty)) = self.expr(e, Some(&TypeExpr::Bool)) {
                        if ty == TypeExpr::Bool {
                            items.push(MatchItem::Constraint(ce));
                        }
                    }
                }
                Pending::Assign(x, e) => {
                    if let Some((ce, ty)) = self.expr(e, None) {
                        let slot = self.new_var(x, ty);
                        items.push(MatchItem::Assign(slot, ce));
                    }
                }
            }
        }
    }

    fn decl(&mut self, f: &FactTemplate) -> Option<(PredId, PredInfo)> {
        let Some(&id) = self.preds.index.get(&f.predicate) else {
            let msg = format!("predicate {} is not declared", f.predicate);
            self.err(ErrorCode::UnknownPredicate, f.span, msg);
            return None;
        };
        let info = self.preds.infos[id].clone();
        if info.arg_types.len() != f.args.len() {
            let msg = format!(
                "{} expects {} argument(s), found {}",
                f.predicate,
                info.arg_types.len(),
                f.args.len()
            );
            self.err(ErrorCode::ArityMismatch, f.span, msg);
            return None;
        }
        if f.persistent == info.linear {
            let msg = if info.linear {
                format!("{} is linear and cannot be written with `!`", f.predicate)
            } else {
                format!("{} is persistent and must be written with `!`", f.predicate)
            };
            self.err(ErrorCode::TypeMismatch, f.span, msg);
        }
        Some((id, info))
    }

    fn template(&mut self, f: &FactTemplate) -> Option<Template> {
        let (pred, info) = self.decl(f)?;
        let before = self.errors.len();
        let args: Vec<_> =
            f.args.iter().zip(&info.arg_types).map(|(a, ty)| self.pattern(a, ty)).collect();
        if self.errors.len() > before {
            return None;
        }
        Some(Template {
            pred,
            linear: info.linear,
            args: args.into_iter().map(Option::unwrap).collect(),
            span: f.span,
        })
    }

    fn pattern(&mut self, e: &Expr, ty: &TypeExpr) -> Option<Pattern> {
        match &e.kind {
            ExprKind::Wildcard => Some(Pattern::Wildcard),
            ExprKind::Var(v) => match self.scope.get(v).cloned() {
                Some(var) => {
                    if var.ty != *ty {
                        self.mismatch(e.span, &format!("variable {v}"), &var.ty, ty);
                    }
                    Some(Pattern::Var(var.slot))
                }
                None => Some(Pattern::Var(self.new_var(v, ty.clone()))),
            },
            ExprKind::List(items, tail) => {
                let TypeExpr::List(elem) = ty else {
                    self.mismatch(e.span, "list pattern", &TypeExpr::List(Box::new(ty.clone())), ty);
                    return None;
                };
                let ps: Vec<_> = items.iter().map(|i| self.pattern(i, elem)).collect();
                let tail = match tail {
                    Some(t) => Some(Box::new(self.pattern(t, ty)?)),
                    None => None,
                };
                Some(Pattern::Cons(ps.into_iter().collect::<Option<_>>()?, tail))
            }
            _ => {
                let (ce, got) = self.expr(e, Some(ty))?;
                if got != *ty {
                    self.mismatch(e.span, "argument", ty, &got);
                    return None;
                }
                Some(Pattern::Value(ce))
            }
        }
    }

    fn mismatch(&mut self, span: Span, what: &str, expected: &TypeExpr, found: &TypeExpr) {
        let msg = format!(
            "{what}: expected {}, found {}",
            type_name(expected),
            type_name(found)
        );
        self.err(ErrorCode::TypeMismatch, span, msg);
    }

    fn head(&mut self, terms: &[HeadTerm]) -> Option<Vec<HeadItem>> {
        let before = self.errors.len();
        let mut items = Vec::new();
        for t in terms {
            match t {
                HeadTerm::One(_) => {}
                HeadTerm::Fact(f) => {
                    if let Some(hf) = self.head_fact(f) {
                        items.push(HeadItem::Fact(hf));
                    }
                }
                HeadTerm::Exists(vars, sub, span) => {
                    let mut slots = Vec::new();
                    for v in vars {
                        if self.scope.contains_key(v) {
                            let msg = format!("exists variable {v} shadows an outer variable");
                            self.err(ErrorCode::ShadowedVariable, *span, msg);
                        }
                        slots.push(self.new_var(v, TypeExpr::Node));
                    }
                    if let Some(facts) = self.sub_head(sub) {
                        items.push(HeadItem::Exists(slots, facts));
                    }
                }
                HeadTerm::Comprehension(c) => {
                    self.check_shadow(&c.vars, c.span);
                    let saved = self.scope.clone();
                    let body = self.body(&c.body);
                    self.check_listed(&c.vars, c.span);
                    let head = self.sub_head(&c.head);
                    self.scope = saved;
                    if let (Some(body), Some(head)) = (body, head) {
                        items.push(HeadItem::Comprehension(Comprehension { body, head }));
                    }
                }
                HeadTerm::Aggregate(a) => {
                    if let Some(agg) = self.aggregate(a) {
                        items.push(HeadItem::Aggregate(agg));
                    }
                }
            }
        }
        (self.errors.len() == before).then_some(items)
    }

    fn check_shadow(&mut self, vars: &[String], span: Span) {
        for v in vars {
            if self.scope.contains_key(v) {
                let msg = format!("variable {v} shadows a variable of the enclosing rule");
                self.err(ErrorCode::ShadowedVariable, span, msg);
            }
        }
    }

    fn check_listed(&mut self, vars: &[String], span: Span) {
        for v in vars {
            if !self.scope.contains_key(v) {
                let msg = format!("listed variable {v} is not bound by the body");
                self.err(ErrorCode::UnboundVariable, span, msg);
            }
        }
    }

    fn aggregate(&mut self, a: &ast::Aggregate) -> Option<Aggregate> {
        let before = self.errors.len();
        self.check_shadow(&a.vars, a.span);
        let acc_names: Vec<String> = a.ops.iter().map(|(_, y)| y.clone()).collect();
        self.check_shadow(&acc_names, a.span);
        let saved = self.scope.clone();
        let body = self.body(&a.body);
        self.check_listed(&a.vars, a.span);
        let mut inputs = Vec::new();
        for (op, y) in &a.ops {
            let input = match (op, self.scope.get(y).cloned()) {
                (AggregateOp::Count, _) => None,
                (_, Some(var)) => {
                    if !matches!(var.ty, TypeExpr::Int | TypeExpr::Float) {
                        let msg = format!("{} over non-numeric {y}: {}", op.name(), type_name(&var.ty));
                        self.err(ErrorCode::TypeMismatch, a.span, msg);
                    }
                    Some(var)
                }
                (_, None) => {
                    let msg = format!("aggregate variable {y} is not bound by the body");
                    self.err(ErrorCode::UnboundVariable, a.span, msg);
                    None
                }
            };
            inputs.push(input);
        }
        let each = self.sub_head(&a.each);
        self.scope = saved;
        let mut specs = Vec::new();
        for ((op, y), input) in a.ops.iter().zip(inputs) {
            let ty = match &input {
                Some(v) => v.ty.clone(),
                None => TypeExpr::Int,
            };
            let zero = if ty == TypeExpr::Float { Value::Float(0.0) } else { Value::Int(0) };
            let result = self.new_var(y, ty);
            specs.push(AggSpec { op: *op, input: input.map(|v| v.slot), result, zero });
        }
        let last = self.sub_head(&a.last);
        for (_, y) in &a.ops {
            self.scope.remove(y);
        }
        if self.errors.len() > before {
            return None;
        }
        Some(Aggregate { specs, body: body?, each: each?, last: last? })
    }

    fn sub_head(&mut self, terms: &[HeadTerm]) -> Option<Vec<HeadFact>> {
        let before = self.errors.len();
        let mut out = Vec::new();
        for t in terms {
            match t {
                HeadTerm::One(_) => {}
                HeadTerm::Fact(f) => {
                    if let Some(hf) = self.head_fact(f) {
                        out.push(hf);
                    }
                }
                _ => unreachable!("the parser only admits facts and 1 in sub-heads"),
            }
        }
        (self.errors.len() == before).then_some(out)
    }

    fn head_fact(&mut self, f: &FactTemplate) -> Option<HeadFact> {
        let (pred, info) = self.decl(f)?;
        let saved = self.mode;
        self.mode = Mode::Head;
        let mut args = Vec::new();
        for (a, ty) in f.args.iter().zip(&info.arg_types) {
            if let Some((ce, got)) = self.expr(a, Some(ty)) {
                if got == *ty {
                    args.push(ce);
                } else {
                    self.mismatch(a.span, "argument", ty, &got);
                }
            }
        }
        self.mode = saved;
        (args.len() == f.args.len()).then_some(HeadFact { pred, linear: info.linear, args })
    }

    fn axiom(&mut self, f: &FactTemplate) -> Option<AxiomFact> {
        let (pred, info) = self.decl(f)?;
        self.mode = Mode::Literal;
        let per_node = match f.args.first().map(|a| &a.kind) {
            Some(ExprKind::Var(_)) => {
                let mut others = BTreeSet::new();
                f.args[1..].iter().for_each(|a| expr_vars(a, &mut others));
                if !others.is_empty() {
                    let msg = format!("axiom {} has free variables", print_fact(f));
                    self.err(ErrorCode::NonGroundAxiom, f.span, msg);
                    return None;
                }
                true
            }
            _ => false,
        };
        let start = usize::from(per_node);
        let mut values = Vec::new();
        for (a, ty) in f.args.iter().zip(&info.arg_types).skip(start) {
            let (ce, got) = self.expr(a, Some(ty))?;
            if got != *ty {
                self.mismatch(a.span, "argument", ty, &got);
                return None;
            }
            match eval(&ce, &Bindings::new(0), &EvalCtx::default()) {
                Ok(v) => values.push(v),
                Err(e) => {
                    self.err(ErrorCode::TypeMismatch, a.span, e.to_string());
                    return None;
                }
            }
        }
        Some(if per_node {
            AxiomFact::PerNode { pred, linear: info.linear, rest: values }
        } else {
            AxiomFact::Ground(Fact { pred, linear: info.linear, args: values })
        })
    }

    fn expr(&mut self, e: &Expr, expected: Option<&TypeExpr>) -> Option<(CExpr, TypeExpr)> {
        let out = match &e.kind {
            ExprKind::Var(v) => match self.scope.get(v) {
                Some(var) => (CExpr::Var(var.slot), var.ty.clone()),
                None => {
                    let (code, msg) = match self.mode {
                        Mode::Head => (ErrorCode::UnboundHeadVariable, format!("head variable {v} is not bound")),
                        Mode::Body => (ErrorCode::UnboundVariable, format!("variable {v} is not bound here")),
                        Mode::Literal => (ErrorCode::NonGroundAxiom, format!("variable {v} in a ground context")),
                    };
                    self.err(code, e.span, msg);
                    return None;
                }
            },
            ExprKind::Wildcard => {
                self.err(ErrorCode::InvalidWildcard, e.span, "`_` is only allowed in body patterns".into());
                return None;
            }
            ExprKind::Name(n) => match self.consts.get(n) {
                Some(v) => match type_of_value(v) {
                    Some(ty) => (CExpr::Lit(v.clone()), ty),
                    None => match expected {
                        Some(ty @ TypeExpr::List(_)) => (CExpr::Lit(v.clone()), ty.clone()),
                        _ => {
                            let msg = format!("cannot infer the type of constant {n}");
                            self.err(ErrorCode::TypeMismatch, e.span, msg);
                            return None;
                        }
                    },
                },
                None => {
                    self.err(ErrorCode::UnresolvedConst, e.span, format!("constant {n} has no value"));
                    return None;
                }
            },
            ExprKind::Node(n) => (CExpr::Lit(Value::Node(NodeId(*n))), TypeExpr::Node),
            ExprKind::World => {
                if self.mode == Mode::Literal {
                    self.err(ErrorCode::NonGroundAxiom, e.span, "@world is only known at run time".into());
                    return None;
                }
                (CExpr::World, TypeExpr::Int)
            }
            ExprKind::Int(i) => (CExpr::Lit(Value::Int(*i)), TypeExpr::Int),
            ExprKind::Float(x) => (CExpr::Lit(Value::Float(*x)), TypeExpr::Float),
            ExprKind::Str(s) => (CExpr::Lit(Value::str(s)), TypeExpr::String),
            ExprKind::Bool(b) => (CExpr::Lit(Value::Bool(*b)), TypeExpr::Bool),
            ExprKind::Neg(inner) => {
                let (ce, ty) = self.expr(inner, expected)?;
                if !matches!(ty, TypeExpr::Int | TypeExpr::Float) {
                    self.mismatch(e.span, "negation", &TypeExpr::Int, &ty);
                    return None;
                }
                (CExpr::Neg(Box::new(ce)), ty)
            }
            ExprKind::Binary(op, l, r) => return self.binary(e, *op, l, r, expected),
            ExprKind::Call(name, args) => return self.call(e, name, args, expected),
            ExprKind::List(items, tail) => {
                let elem = match expected {
                    Some(TypeExpr::List(t)) => Some((**t).clone()),
                    _ => None,
                };
                let mut elem_ty = elem;
                let mut out = Vec::new();
                for item in items {
                    let (ce, ty) = self.expr(item, elem_ty.as_ref())?;
                    match &elem_ty {
                        Some(t) if *t != ty => {
                            self.mismatch(item.span, "list element", t, &ty);
                            return None;
                        }
                        _ => elem_ty = Some(ty),
                    }
                    out.push(ce);
                }
                let tail_ce = match tail {
                    Some(t) => {
                        let want = elem_ty.clone().map(|t| TypeExpr::List(Box::new(t)));
                        let (ce, ty) = self.expr(t, want.as_ref())?;
                        match (&want, &ty) {
                            (Some(w), _) if *w != ty => {
                                self.mismatch(t.span, "list tail", w, &ty);
                                return None;
                            }
                            (None, TypeExpr::List(inner)) => elem_ty = Some((**inner).clone()),
                            (None, _) => {
                                self.mismatch(t.span, "list tail", &TypeExpr::List(Box::new(TypeExpr::Int)), &ty);
                                return None;
                            }
                            _ => {}
                        }
                        Some(Box::new(ce))
                    }
                    None => None,
                };
                let Some(elem_ty) = elem_ty else {
                    self.err(ErrorCode::TypeMismatch, e.span, "cannot infer the element type of []".into());
                    return None;
                };
                (CExpr::List(out, tail_ce), TypeExpr::List(Box::new(elem_ty)))
            }
        };
        Some(fold(out))
    }

    fn binary(
        &mut self,
        e: &Expr,
        op: BinOp,
        l: &Expr,
        r: &Expr,
        expected: Option<&TypeExpr>,
    ) -> Option<(CExpr, TypeExpr)> {
        use BinOp::*;
        let operand_hint = match op {
            Add | Sub | Mul | Div | Mod => expected,
            And | Or => Some(&TypeExpr::Bool),
            _ => None,
        };
        let empty_list = |x: &Expr| matches!(&x.kind, ExprKind::List(items, None) if items.is_empty());
        let (lc, lt, rc, rt) = if empty_list(l) {
            let (rc, rt) = self.expr(r, operand_hint)?;
            let (lc, lt) = self.expr(l, Some(&rt))?;
            (lc, lt, rc, rt)
        } else {
            let (lc, lt) = self.expr(l, operand_hint)?;
            let (rc, rt) = self.expr(r, Some(&lt))?;
            (lc, lt, rc, rt)
        };
        let ty = match op {
            Add | Sub | Mul | Div | Mod => {
                if lt != rt || !matches!(lt, TypeExpr::Int | TypeExpr::Float) {
                    let msg = format!(
                        "`{}` needs two ints or two floats, found {} and {}",
                        op.symbol(),
                        type_name(&lt),
                        type_name(&rt)
                    );
                    self.err(ErrorCode::TypeMismatch, e.span, msg);
                    return None;
                }
                lt
            }
            Eq | Neq | Lt | Le | Gt | Ge => {
                if lt != rt {
                    self.mismatch(r.span, &format!("right operand of `{}`", op.symbol()), &lt, &rt);
                    return None;
                }
                TypeExpr::Bool
            }
            And | Or => {
                if lt != TypeExpr::Bool || rt != TypeExpr::Bool {
                    let found = if lt != TypeExpr::Bool { &lt } else { &rt };
                    self.mismatch(e.span, &format!("operand of `{}`", op.symbol()), &TypeExpr::Bool, found);
                    return None;
                }
                TypeExpr::Bool
            }
        };
        Some(fold((CExpr::Binary(op, Box::new(lc), Box::new(rc)), ty)))
    }

    fn call(
        &mut self,
        e: &Expr,
        name: &str,
        args: &[Expr],
        expected: Option<&TypeExpr>,
    ) -> Option<(CExpr, TypeExpr)> {
        let (f, arity) = match name {
            "float" => (Builtin::Float, 1),
            "int" => (Builtin::Int, 1),
            "pair" => (Builtin::Pair, 2),
            "fst" => (Builtin::Fst, 1),
            "snd" => (Builtin::Snd, 1),
            "abs" => (Builtin::Abs, 1),
            "head" => (Builtin::Head, 1),
            "tail" => (Builtin::Tail, 1),
            _ => {
                self.err(ErrorCode::UnknownFunction, e.span, format!("unknown function {name}"));
                return None;
            }
        };
        if args.len() != arity {
            let msg = format!("{name} takes {arity} argument(s), found {}", args.len());
            self.err(ErrorCode::ArityMismatch, e.span, msg);
            return None;
        }
        let hints: Vec<Option<TypeExpr>> = match (f, expected) {
            (Builtin::Pair, Some(TypeExpr::Pair(a, b))) => vec![Some((**a).clone()), Some((**b).clone())],
            (Builtin::Abs, Some(t)) => vec![Some(t.clone())],
            (Builtin::Tail, Some(t)) => vec![Some(t.clone())],
            (Builtin::Head, Some(t)) => vec![Some(TypeExpr::List(Box::new(t.clone())))],
            _ => vec![None; arity],
        };
        let mut compiled = Vec::new();
        let mut types = Vec::new();
        for (a, hint) in args.iter().zip(&hints) {
            let (ce, ty) = self.expr(a, hint.as_ref())?;
            compiled.push(ce);
            types.push(ty);
        }
        let bad = |cx: &mut Self, want: &str| {
            let msg = format!("{name} expects {want}, found {}", type_name(&types[0]));
            cx.err(ErrorCode::TypeMismatch, e.span, msg);
        };
        let ty = match f {
            Builtin::Float | Builtin::Int => {
                if !matches!(types[0], TypeExpr::Int | TypeExpr::Float) {
                    bad(self, "a number");
                    return None;
                }
                if f == Builtin::Float { TypeExpr::Float } else { TypeExpr::Int }
            }
            Builtin::Abs => {
                if !matches!(types[0], TypeExpr::Int | TypeExpr::Float) {
                    bad(self, "a number");
                    return None;
                }
                types[0].clone()
            }
            Builtin::Pair => TypeExpr::Pair(Box::new(types[0].clone()), Box::new(types[1].clone())),
            Builtin::Fst | Builtin::Snd => match &types[0] {
                TypeExpr::Pair(a, b) => {
                    if f == Builtin::Fst { (**a).clone() } else { (**b).clone() }
                }
                _ => {
                    bad(self, "a pair");
                    return None;
                }
            },
            Builtin::Head | Builtin::Tail => match &types[0] {
                TypeExpr::List(inner) => {
                    if f == Builtin::Head { (**inner).clone() } else { types[0].clone() }
                }
                _ => {
                    bad(self, "a list");
                    return None;
                }
            },
        };
        Some(fold((CExpr::Call(f, compiled), ty)))
    }
}

/// Evaluates operations whose operands are all literals.
fn fold((e, ty): (CExpr, TypeExpr)) -> (CExpr, TypeExpr) {
    let literal = |x: &CExpr| matches!(x, CExpr::Lit(_));
    let foldable = match &e {
        CExpr::Neg(x) => literal(x),
        CExpr::Binary(_, l, r) => literal(l) && literal(r),
        CExpr::Call(_, args) => args.iter().all(literal),
        CExpr::List(items, tail) => items.iter().all(literal) && tail.as_deref().is_none_or(literal),
        _ => false,
    };
    if foldable {
        if let Ok(v) = eval(&e, &Bindings::new(0), &EvalCtx::default()) {
            return (CExpr::Lit(v), ty);
        }
    }
    (e, ty)
}

fn is_orderable(ty: &TypeExpr) -> bool {
    !matches!(ty, TypeExpr::List(_) | TypeExpr::Pair(..))
}

fn first_home_var(terms: &[BodyTerm]) -> Option<String> {
    let mut ts = Vec::new();
    collect_body_templates(terms, &mut ts);
    ts.first().and_then(|t| match &t.args.first()?.kind {
        ExprKind::Var(v) => Some(v.clone()),
        _ => None,
    })
}

fn expr_vars(e: &Expr, out: &mut BTreeSet<String>) {
    match &e.kind {
        ExprKind::Var(v) => {
            out.insert(v.clone());
        }
        ExprKind::Neg(x) => expr_vars(x, out),
        ExprKind::Binary(_, l, r) => {
            expr_vars(l, out);
            expr_vars(r, out);
        }
        ExprKind::Call(_, args) => args.iter().for_each(|a| expr_vars(a, out)),
        ExprKind::List(items, tail) => {
            items.iter().for_each(|a| expr_vars(a, out));
            if let Some(t) = tail {
                expr_vars(t, out);
            }
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_source;

    fn check(src: &str) -> Result<TypedProgram, Vec<CheckError>> {
        check_program(&parse_source(src).unwrap(), &BTreeMap::new())
    }

    fn codes(src: &str) -> Vec<ErrorCode> {
        check(src).unwrap_err().into_iter().map(|e| e.code).collect()
    }

    #[test]
    fn unbound_head_variable() {
        let src = "type linear visit(node). visit(A) -o visit(B).";
        assert_eq!(codes(src), vec![ErrorCode::UnboundHeadVariable]);
    }

    #[test]
    fn two_home_variables() {
        let src = "type linear p(node). type linear q(node). p(A), q(B) -o 1.";
        let errs = check(src).unwrap_err();
        assert_eq!(errs[0].code, ErrorCode::LocalityViolation);
        assert!(errs[0].message.starts_with("q(B)"));
    }

    #[test]
    fn int_and_float_do_not_mix() {
        let src = "type linear p(node, float). p(A, X) -o p(A, X + 1).";
        assert_eq!(codes(src), vec![ErrorCode::TypeMismatch]);
        let src = "type linear p(node, float). p(A, X) -o p(A, X + float(1)).";
        assert!(check(src).is_ok());
    }

    #[test]
    fn constants_resolve_into_axioms() {
        let src = "type linear path(node, int, int). const notused = 0. path(startnode, 0, notused).";
        assert_eq!(codes(src), vec![ErrorCode::UnresolvedConst]);
        let p = parse_source(src).unwrap();
        let consts = BTreeMap::from([("startnode".to_string(), Value::Node(NodeId(1)))]);
        let tp = check_program(&p, &consts).unwrap();
        let AxiomFact::Ground(f) = &tp.axioms[0] else { panic!() };
        assert_eq!(f.args, vec![Value::Node(NodeId(1)), Value::Int(0), Value::Int(0)]);
    }

    #[test]
    fn constraints_follow_their_last_variable() {
        let src = "type linear p(node, int). type q(node, int). \
                   p(A, X), X > 0, !q(A, Y), Z = X + Y, Z < 9 -o p(A, Z).";
        let tp = check(src).unwrap();
        let kinds: Vec<_> = tp.rules[0]
            .body
            .iter()
            .map(|i| match i {
                MatchItem::Fact(_) => 'f',
                MatchItem::Constraint(_) => 'c',
                MatchItem::Assign(..) => 'a',
            })
            .collect();
        assert_eq!(kinds, vec!['f', 'c', 'f', 'a', 'c']);
    }

    #[test]
    fn shadowing_comprehension_variable_is_rejected() {
        let src = "type linear v(node, node). type e(node, node). \
                   v(A, B) -o {B | !e(A, B) | v(A, B)}.";
        assert_eq!(codes(src), vec![ErrorCode::ShadowedVariable]);
    }

    #[test]
    fn per_node_axiom_and_bad_axiom() {
        let tp = check("type linear start(node). start(A).").unwrap();
        assert!(matches!(tp.axioms[0], AxiomFact::PerNode { .. }));
        assert_eq!(codes("type linear p(node, int). p(@1, X)."), vec![ErrorCode::NonGroundAxiom]);
    }

    #[test]
    fn rejection_is_stable() {
        let src = "type linear p(node). p(A), q(A) -o r(A). p(A) -o p(B).";
        assert_eq!(check(src).unwrap_err(), check(src).unwrap_err());
    }

    #[test]
    fn const_override_syntax() {
        assert_eq!(parse_const_override("startnode=@1"), Ok(("startnode".into(), Value::Node(NodeId(1)))));
        assert_eq!(parse_const_override("size = 8"), Ok(("size".into(), Value::Int(8))));
        assert_eq!(parse_const_override("x=-2.5"), Ok(("x".into(), Value::Float(-2.5))));
        assert!(parse_const_override("nokey").is_err());
    }
}
