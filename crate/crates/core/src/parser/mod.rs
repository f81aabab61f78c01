//! Concrete syntax for programs (`.chpi`) and session types (`.chty`).

mod lexer;

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use crate::syntax::{
    called_functions, free_proc_vars, free_vars, is_guarded, Chan, Collab, Expr, Name, Op, Process, Role, Sort, Value,
};
use crate::types::{RoleRef, Roles, SessionType};
use lexer::{lex, Tok};

pub type Span = Range<usize>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseDiagnostic {
    pub span: Span,
    pub message: String,
    pub severity: Severity,
}

impl ParseDiagnostic {
    pub fn error(span: Span, message: impl Into<String>) -> Self {
        ParseDiagnostic { span, message: message.into(), severity: Severity::Error }
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error at {}..{}: {}", self.span.start, self.span.end, self.message)
    }
}

/// Declared signature of an uninterpreted function.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FnSig {
    pub args: Vec<Sort>,
    pub result: Sort,
    /// Finite outcome set, required by exhaustive exploration for non-bool results.
    pub domain: Option<Vec<Value>>,
}

impl FnSig {
    /// All outcomes exhaustive exploration branches over, if finite.
    pub fn outcomes(&self) -> Option<Vec<Value>> {
        match (&self.domain, self.result) {
            (Some(d), _) => Some(d.clone()),
            (None, Sort::Bool) => Some(vec![Value::Bool(true), Value::Bool(false)]),
            (None, _) => None,
        }
    }
}

pub type Signatures = BTreeMap<Name, FnSig>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub signatures: Signatures,
    pub main: Collab,
}

type Result<T> = core::result::Result<T, Vec<ParseDiagnostic>>;
type PResult<T> = core::result::Result<T, ParseDiagnostic>;

/// Parses a program: `fn` declarations, `def` abbreviations and a `main` collaboration.
pub fn parse_program(text: &str) -> Result<Program> {
    let toks = lex(text).map_err(|d| vec![d])?;
    let mut p = Parser::new(toks, text.len());
    let raw = p.program().map_err(|d| vec![d])?;
    raw.expand().map_err(|d| vec![d])
}

/// Parses a standalone session type.
pub fn parse_type(text: &str) -> Result<SessionType> {
    let toks = lex(text).map_err(|d| vec![d])?;
    let mut p = Parser::new(toks, text.len());
    let start = p.here();
    let t = p.ty().map_err(|d| vec![d])?;
    p.expect_eof().map_err(|d| vec![d])?;
    let span = start..text.len();
    if let Some(v) = t.free_vars().into_iter().next() {
        return Err(vec![ParseDiagnostic::error(span, format!("unbound type variable `{v}`"))]);
    }
    if !t.is_guarded() {
        return Err(vec![ParseDiagnostic::error(span, "unguarded recursion variable")]);
    }
    Ok(t)
}

#[derive(Debug)]
enum RawCollab {
    Init(Collab, Span),
    Ref(Name, Span),
    Par(Vec<RawCollab>),
}

enum Def {
    Process(Process, Span),
    Collab(RawCollab),
}

struct RawProgram {
    signatures: Signatures,
    defs: BTreeMap<Name, Def>,
    main: Option<(RawCollab, Span)>,
}

impl RawProgram {
    fn expand(mut self) -> PResult<Program> {
        let (main, span) = self.main.take().ok_or_else(|| ParseDiagnostic::error(0..0, "missing `main = ...` definition"))?;
        let mut comps = Vec::new();
        self.expand_collab(&main, &mut Vec::new(), &mut comps)?;
        for (c, span) in &comps {
            self.validate_initiator(c, span.clone())?;
        }
        let _ = span;
        Ok(Program { signatures: self.signatures, main: Collab::par_all(comps.into_iter().map(|(c, _)| c).collect()) })
    }

    fn expand_collab(&self, c: &RawCollab, stack: &mut Vec<Name>, out: &mut Vec<(Collab, Span)>) -> PResult<()> {
        match c {
            RawCollab::Init(init, span) => {
                let expanded = match init {
                    Collab::Request { chan, arity, var, body } => Collab::Request {
                        chan: chan.clone(),
                        arity: *arity,
                        var: var.clone(),
                        body: self.expand_process(body, &mut Vec::new(), stack, span)?,
                    },
                    Collab::Accept { chan, role, var, body } => Collab::Accept {
                        chan: chan.clone(),
                        role: *role,
                        var: var.clone(),
                        body: self.expand_process(body, &mut Vec::new(), stack, span)?,
                    },
                    _ => unreachable!("parser only builds initiators"),
                };
                out.push((expanded, span.clone()));
            }
            RawCollab::Ref(n, span) => match self.defs.get(n) {
                Some(Def::Collab(body)) => {
                    if stack.contains(n) {
                        return Err(ParseDiagnostic::error(span.clone(), format!("recursive abbreviation `{n}`")));
                    }
                    stack.push(n.clone());
                    self.expand_collab(body, stack, out)?;
                    stack.pop();
                }
                Some(Def::Process(..)) => {
                    return Err(ParseDiagnostic::error(span.clone(), format!("`{n}` is a process, expected a collaboration")))
                }
                None => return Err(ParseDiagnostic::error(span.clone(), format!("unknown collaboration `{n}`"))),
            },
            RawCollab::Par(items) => {
                for i in items {
                    self.expand_collab(i, stack, out)?;
                }
            }
        }
        Ok(())
    }

    fn expand_process(&self, p: &Process, recs: &mut Vec<Name>, stack: &mut Vec<Name>, span: &Span) -> PResult<Process> {
        let mut go = |q: &Process, recs: &mut Vec<Name>| self.expand_process(q, recs, stack, span).map(Box::new);
        Ok(match p {
            Process::Var(x) if !recs.contains(x) => match self.defs.get(x) {
                Some(Def::Process(body, dspan)) => {
                    if stack.contains(x) {
                        return Err(ParseDiagnostic::error(dspan.clone(), format!("recursive abbreviation `{x}`")));
                    }
                    stack.push(x.clone());
                    let out = self.expand_process(body, recs, stack, dspan)?;
                    stack.pop();
                    out
                }
                Some(Def::Collab(_)) => {
                    return Err(ParseDiagnostic::error(span.clone(), format!("`{x}` is a collaboration, expected a process")))
                }
                None => return Err(ParseDiagnostic::error(span.clone(), format!("unbound process variable `{x}`"))),
            },
            Process::Var(_) | Process::Inact | Process::Roll | Process::Abort => p.clone(),
            Process::Send { chan, peer, expr, cont } => Process::Send { chan: chan.clone(), peer: *peer, expr: expr.clone(), cont: go(cont, recs)? },
            Process::Recv { chan, peer, var, sort, cont } => {
                Process::Recv { chan: chan.clone(), peer: *peer, var: var.clone(), sort: *sort, cont: go(cont, recs)? }
            }
            Process::Select { chan, peer, label, cont } => Process::Select { chan: chan.clone(), peer: *peer, label: label.clone(), cont: go(cont, recs)? },
            Process::Branch { chan, peer, arms } => {
                let mut out = Vec::new();
                for (l, q) in arms {
                    out.push((l.clone(), *go(q, recs)?));
                }
                Process::Branch { chan: chan.clone(), peer: *peer, arms: out }
            }
            Process::If { cond, then, els } => Process::If { cond: cond.clone(), then: go(then, recs)?, els: go(els, recs)? },
            Process::Rec { var, body } => {
                recs.push(var.clone());
                let body = go(body, recs)?;
                recs.pop();
                Process::Rec { var: var.clone(), body }
            }
            Process::Commit(cont) => Process::Commit(go(cont, recs)?),
        })
    }

    fn validate_initiator(&self, c: &Collab, span: Span) -> PResult<()> {
        let (var, body) = match c {
            Collab::Request { var, body, .. } | Collab::Accept { var, body, .. } => (var, body),
            _ => return Ok(()),
        };
        let mut fv = free_vars(body);
        fv.remove(var);
        if let Some(x) = fv.into_iter().next() {
            return Err(ParseDiagnostic::error(span, format!("unbound variable `{x}`")));
        }
        if let Some(x) = free_proc_vars(body).into_iter().next() {
            return Err(ParseDiagnostic::error(span, format!("unbound process variable `{x}`")));
        }
        if !is_guarded(body) {
            return Err(ParseDiagnostic::error(span, "unguarded recursion"));
        }
        let mut calls = BTreeSet::new();
        called_functions(body, &mut calls);
        for f in calls {
            if !self.signatures.contains_key(&f) {
                return Err(ParseDiagnostic::error(span, format!("unknown function `{f}`")));
            }
        }
        check_arity(body, &self.signatures).map_err(|m| ParseDiagnostic::error(span, m))
    }
}

fn check_arity(p: &Process, sigs: &Signatures) -> core::result::Result<(), String> {
    fn expr(e: &Expr, sigs: &Signatures) -> core::result::Result<(), String> {
        match e {
            Expr::Call(f, args) => {
                let want = sigs.get(f).map_or(0, |s| s.args.len());
                if want != args.len() {
                    return Err(format!("function `{f}` expects {want} argument(s), got {}", args.len()));
                }
                args.iter().try_for_each(|a| expr(a, sigs))
            }
            Expr::Op(_, args) => args.iter().try_for_each(|a| expr(a, sigs)),
            _ => Ok(()),
        }
    }
    match p {
        Process::Send { expr: e, cont, .. } => {
            expr(e, sigs)?;
            check_arity(cont, sigs)
        }
        Process::If { cond, then, els } => {
            expr(cond, sigs)?;
            check_arity(then, sigs)?;
            check_arity(els, sigs)
        }
        Process::Recv { cont, .. } | Process::Select { cont, .. } | Process::Commit(cont) | Process::Rec { body: cont, .. } => check_arity(cont, sigs),
        Process::Branch { arms, .. } => arms.iter().try_for_each(|(_, q)| check_arity(q, sigs)),
        _ => Ok(()),
    }
}

const KEYWORDS: &[&str] = &[
    "request", "accept", "if", "then", "else", "rec", "commit", "roll", "abort", "true", "false", "fn", "def", "main", "mu",
    "end", "err", "cmt", "abt", "sel", "brn", "int", "bool", "str", "in",
];

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn new(toks: Vec<(Tok, Span)>, len: usize) -> Self {
        Parser { toks, pos: 0, len }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.len, |(_, s)| s.start)
    }

    fn span(&self) -> Span {
        self.toks.get(self.pos).map_or(self.len..self.len, |(_, s)| s.clone())
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 {
            0
        } else {
            self.toks[self.pos - 1].1.end
        }
    }

    fn unexpected(&self, what: &str) -> ParseDiagnostic {
        match self.peek() {
            Some(t) => ParseDiagnostic::error(self.span(), format!("expected {what}, found {}", t.describe())),
            None => ParseDiagnostic::error(self.len..self.len, format!("expected {what}, found end of input")),
        }
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok) -> PResult<()> {
        if self.eat(&t) {
            Ok(())
        } else {
            Err(self.unexpected(&t.describe()))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn ident(&mut self) -> PResult<Name> {
        match self.peek() {
            Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()) => {
                let n = Name::from(s.as_str());
                self.pos += 1;
                Ok(n)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn role(&mut self) -> PResult<Role> {
        match self.peek() {
            Some(Tok::Int(n)) if *n >= 1 && *n <= i64::from(u32::MAX) => {
                let r = *n as Role;
                self.pos += 1;
                Ok(r)
            }
            _ => Err(self.unexpected("role (positive integer)")),
        }
    }

    fn expect_eof(&self) -> PResult<()> {
        match self.peek() {
            None => Ok(()),
            Some(_) => Err(self.unexpected("end of input")),
        }
    }

    fn sort(&mut self) -> PResult<Sort> {
        let s = if self.eat_kw("int") {
            Sort::Int
        } else if self.eat_kw("bool") {
            Sort::Bool
        } else if self.eat_kw("str") {
            Sort::Str
        } else {
            return Err(self.unexpected("sort (`int`, `bool` or `str`)"));
        };
        Ok(s)
    }

    fn literal(&mut self) -> PResult<Value> {
        let v = match self.peek() {
            Some(Tok::Int(n)) => Value::Int(*n),
            Some(Tok::Str(s)) => Value::Str(Name::from(s.as_str())),
            Some(Tok::Ident(s)) if s == "true" => Value::Bool(true),
            Some(Tok::Ident(s)) if s == "false" => Value::Bool(false),
            _ => return Err(self.unexpected("literal")),
        };
        self.pos += 1;
        Ok(v)
    }

    // ---- programs ----

    fn program(&mut self) -> PResult<RawProgram> {
        let mut prog = RawProgram { signatures: BTreeMap::new(), defs: BTreeMap::new(), main: None };
        while self.peek().is_some() {
            let start = self.here();
            if self.eat_kw("fn") {
                let at = self.span();
                let f = self.ident()?;
                self.expect(Tok::LParen)?;
                let mut args = Vec::new();
                if !self.eat(&Tok::RParen) {
                    loop {
                        args.push(self.sort()?);
                        if self.eat(&Tok::RParen) {
                            break;
                        }
                        self.expect(Tok::Comma)?;
                    }
                }
                self.expect(Tok::Colon)?;
                let result = self.sort()?;
                let domain = if self.eat_kw("in") {
                    self.expect(Tok::LBrace)?;
                    let mut vals = Vec::new();
                    loop {
                        let vspan = self.span();
                        let v = self.literal()?;
                        if v.sort() != result {
                            return Err(ParseDiagnostic::error(vspan, "domain value does not match the result sort"));
                        }
                        vals.push(v);
                        if self.eat(&Tok::RBrace) {
                            break;
                        }
                        self.expect(Tok::Comma)?;
                    }
                    Some(vals)
                } else {
                    None
                };
                self.expect(Tok::Semi)?;
                if prog.signatures.insert(f.clone(), FnSig { args, result, domain }).is_some() {
                    return Err(ParseDiagnostic::error(at, format!("duplicate declaration of `{f}`")));
                }
            } else if self.eat_kw("def") {
                let at = self.span();
                let n = self.ident()?;
                self.expect(Tok::Eq)?;
                let def = self.definition_body()?;
                self.expect(Tok::Semi)?;
                if prog.defs.insert(n.clone(), def).is_some() {
                    return Err(ParseDiagnostic::error(at, format!("duplicate definition of `{n}`")));
                }
            } else if self.eat_kw("main") {
                if prog.main.is_some() {
                    return Err(ParseDiagnostic::error(start..self.prev_end(), "duplicate `main`"));
                }
                self.expect(Tok::Eq)?;
                let c = self.collab()?;
                prog.main = Some((c, start..self.prev_end()));
                self.eat(&Tok::Semi);
            } else {
                return Err(self.unexpected("`fn`, `def` or `main`"));
            }
        }
        Ok(prog)
    }

    fn definition_body(&mut self) -> PResult<Def> {
        let save = self.pos;
        let start = self.here();
        if !(self.is_kw("request") || self.is_kw("accept")) {
            if let Ok(p) = self.process() {
                if self.peek() == Some(&Tok::Semi) {
                    return Ok(Def::Process(p, start..self.prev_end()));
                }
            }
            self.pos = save;
        }
        Ok(Def::Collab(self.collab()?))
    }

    fn collab(&mut self) -> PResult<RawCollab> {
        let mut items = vec![self.collab_atom()?];
        while self.eat(&Tok::Bar) {
            items.push(self.collab_atom()?);
        }
        Ok(if items.len() == 1 { items.pop().expect("non-empty") } else { RawCollab::Par(items) })
    }

    fn collab_atom(&mut self) -> PResult<RawCollab> {
        let start = self.here();
        let request = self.is_kw("request");
        if request || self.is_kw("accept") {
            self.pos += 1;
            let chan = self.ident()?;
            let annot = if self.eat(&Tok::LBrack) {
                let r = self.role()?;
                self.expect(Tok::RBrack)?;
                Some(r)
            } else {
                None
            };
            self.expect(Tok::LParen)?;
            let var = self.ident()?;
            self.expect(Tok::RParen)?;
            self.expect(Tok::Dot)?;
            let body = self.process()?;
            let span = start..self.prev_end();
            if request && annot.is_some_and(|n| n < 2) {
                return Err(ParseDiagnostic::error(span, "a multiparty request needs arity at least 2"));
            }
            let c = if request {
                Collab::Request { chan, arity: annot, var, body }
            } else {
                Collab::Accept { chan, role: annot, var, body }
            };
            return Ok(RawCollab::Init(c, span));
        }
        if self.eat(&Tok::LParen) {
            let c = self.collab()?;
            self.expect(Tok::RParen)?;
            return Ok(c);
        }
        if let Some(Tok::Ident(_)) = self.peek() {
            let span = self.span();
            let n = self.ident()?;
            return Ok(RawCollab::Ref(n, span));
        }
        Err(self.unexpected("`request`, `accept` or `(`"))
    }

    fn peer(&mut self) -> PResult<Option<Role>> {
        if self.eat(&Tok::At) {
            Ok(Some(self.role()?))
        } else {
            Ok(None)
        }
    }

    fn process(&mut self) -> PResult<Process> {
        match self.peek() {
            Some(Tok::Int(0)) => {
                self.pos += 1;
                Ok(Process::Inact)
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let p = self.process()?;
                self.expect(Tok::RParen)?;
                Ok(p)
            }
            Some(Tok::Ident(s)) => match s.as_str() {
                "if" => {
                    self.pos += 1;
                    let cond = self.expr()?;
                    self.expect_kw("then")?;
                    let then = self.process()?;
                    self.expect_kw("else")?;
                    let els = self.process()?;
                    Ok(Process::If { cond, then: Box::new(then), els: Box::new(els) })
                }
                "rec" => {
                    self.pos += 1;
                    let var = self.ident()?;
                    self.expect(Tok::Dot)?;
                    let body = self.process()?;
                    Ok(Process::Rec { var, body: Box::new(body) })
                }
                "commit" => {
                    self.pos += 1;
                    self.expect(Tok::Dot)?;
                    Ok(Process::Commit(Box::new(self.process()?)))
                }
                "roll" => {
                    self.pos += 1;
                    Ok(Process::Roll)
                }
                "abort" => {
                    self.pos += 1;
                    Ok(Process::Abort)
                }
                _ => {
                    let n = self.ident()?;
                    self.action(n)
                }
            },
            _ => Err(self.unexpected("process")),
        }
    }

    fn action(&mut self, subject: Name) -> PResult<Process> {
        let chan = Chan::Var(subject.clone());
        match self.peek() {
            Some(Tok::Bang) => {
                self.pos += 1;
                self.expect(Tok::Lt)?;
                let expr = self.expr()?;
                self.expect(Tok::Gt)?;
                let peer = self.peer()?;
                self.expect(Tok::Dot)?;
                let cont = self.process()?;
                Ok(Process::Send { chan, peer, expr, cont: Box::new(cont) })
            }
            Some(Tok::Quest) => {
                self.pos += 1;
                self.expect(Tok::LParen)?;
                let var = self.ident()?;
                self.expect(Tok::Colon)?;
                let sort = self.sort()?;
                self.expect(Tok::RParen)?;
                let peer = self.peer()?;
                self.expect(Tok::Dot)?;
                let cont = self.process()?;
                Ok(Process::Recv { chan, peer, var, sort, cont: Box::new(cont) })
            }
            Some(Tok::SelOp) => {
                self.pos += 1;
                let label = self.ident()?;
                let peer = self.peer()?;
                self.expect(Tok::Dot)?;
                let cont = self.process()?;
                Ok(Process::Select { chan, peer, label, cont: Box::new(cont) })
            }
            Some(Tok::BrnOp) => {
                self.pos += 1;
                let open = self.span();
                self.expect(Tok::LBrace)?;
                let mut arms: Vec<(Name, Process)> = Vec::new();
                loop {
                    let lspan = self.span();
                    let l = self.ident()?;
                    if arms.iter().any(|(k, _)| *k == l) {
                        return Err(ParseDiagnostic::error(lspan, format!("duplicate branch label `{l}`")));
                    }
                    self.expect(Tok::Colon)?;
                    let q = self.process()?;
                    arms.push((l, q));
                    if self.eat(&Tok::RBrace) {
                        break;
                    }
                    if !self.eat(&Tok::Comma) {
                        let mut d = self.unexpected("`,` or `}`");
                        if self.peek().is_none() {
                            d.span = open;
                        }
                        return Err(d);
                    }
                }
                let peer = self.peer()?;
                Ok(Process::Branch { chan, peer, arms })
            }
            _ => Ok(Process::Var(subject)),
        }
    }

    // ---- expressions ----

    fn expr(&mut self) -> PResult<Expr> {
        let mut l = self.expr_and()?;
        while self.eat(&Tok::OrOr) {
            let r = self.expr_and()?;
            l = Expr::Op(Op::Or, vec![l, r]);
        }
        Ok(l)
    }

    fn expr_and(&mut self) -> PResult<Expr> {
        let mut l = self.expr_cmp()?;
        while self.eat(&Tok::AndAnd) {
            let r = self.expr_cmp()?;
            l = Expr::Op(Op::And, vec![l, r]);
        }
        Ok(l)
    }

    fn expr_cmp(&mut self) -> PResult<Expr> {
        let l = self.expr_add()?;
        let op = if self.eat(&Tok::EqEq) {
            Op::Eq
        } else if self.eat(&Tok::Lt) {
            Op::Lt
        } else {
            return Ok(l);
        };
        let r = self.expr_add()?;
        Ok(Expr::Op(op, vec![l, r]))
    }

    fn expr_add(&mut self) -> PResult<Expr> {
        let mut l = self.expr_unary()?;
        loop {
            let op = if self.eat(&Tok::Plus) {
                Op::Add
            } else if self.eat(&Tok::PlusPlus) {
                Op::Concat
            } else {
                return Ok(l);
            };
            let r = self.expr_unary()?;
            l = Expr::Op(op, vec![l, r]);
        }
    }

    fn expr_unary(&mut self) -> PResult<Expr> {
        if self.eat(&Tok::Bang) {
            return Ok(Expr::Op(Op::Not, vec![self.expr_unary()?]));
        }
        match self.peek() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Int(_) | Tok::Str(_)) => Ok(Expr::Lit(self.literal()?)),
            Some(Tok::Ident(s)) if s == "true" || s == "false" => Ok(Expr::Lit(self.literal()?)),
            Some(Tok::Ident(_)) => {
                let n = self.ident()?;
                if self.eat(&Tok::LParen) {
                    let mut args = Vec::new();
                    if !self.eat(&Tok::RParen) {
                        loop {
                            args.push(self.expr()?);
                            if self.eat(&Tok::RParen) {
                                break;
                            }
                            self.expect(Tok::Comma)?;
                        }
                    }
                    Ok(Expr::Call(n, args))
                } else {
                    Ok(Expr::Var(n))
                }
            }
            _ => Err(self.unexpected("expression")),
        }
    }

    // ---- types ----

    fn ty(&mut self) -> PResult<SessionType> {
        let mut l = self.ty_prefix()?;
        while self.eat(&Tok::Choice) {
            let r = self.ty_prefix()?;
            l = SessionType::choice(l, r);
        }
        Ok(l)
    }

    fn roles(&mut self) -> PResult<Option<Roles>> {
        let is_roles = self.peek() == Some(&Tok::LBrack)
            && matches!(self.peek_at(1), Some(Tok::Int(_) | Tok::Underscore))
            && self.peek_at(2) == Some(&Tok::Comma);
        if !is_roles {
            return Ok(None);
        }
        self.pos += 1;
        let from = if self.eat(&Tok::Underscore) { RoleRef::Hole } else { RoleRef::Role(self.role()?) };
        self.expect(Tok::Comma)?;
        let to = self.role()?;
        self.expect(Tok::RBrack)?;
        Ok(Some(Roles { from, to }))
    }

    fn ty_prefix(&mut self) -> PResult<SessionType> {
        match self.peek() {
            Some(Tok::Bang | Tok::Quest) => {
                let out = self.bump() == Some(Tok::Bang);
                let roles = self.roles()?;
                self.expect(Tok::LBrack)?;
                let sort = self.sort()?;
                self.expect(Tok::RBrack)?;
                self.expect(Tok::Dot)?;
                let cont = Box::new(self.ty_prefix()?);
                Ok(if out { SessionType::Out { roles, sort, cont } } else { SessionType::In { roles, sort, cont } })
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let t = self.ty()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Some(Tok::Ident(s)) => match s.as_str() {
                "sel" => {
                    self.pos += 1;
                    let roles = self.roles()?;
                    self.expect(Tok::LBrack)?;
                    let label = self.ident()?;
                    self.expect(Tok::RBrack)?;
                    self.expect(Tok::Dot)?;
                    let cont = Box::new(self.ty_prefix()?);
                    Ok(SessionType::Sel { roles, label, cont })
                }
                "brn" => {
                    self.pos += 1;
                    let roles = self.roles()?;
                    self.expect(Tok::LBrack)?;
                    let mut arms: Vec<(Name, SessionType)> = Vec::new();
                    loop {
                        let lspan = self.span();
                        let l = self.ident()?;
                        if arms.iter().any(|(k, _)| *k == l) {
                            return Err(ParseDiagnostic::error(lspan, format!("duplicate branch label `{l}`")));
                        }
                        self.expect(Tok::Colon)?;
                        arms.push((l, self.ty()?));
                        if self.eat(&Tok::RBrack) {
                            break;
                        }
                        self.expect(Tok::Semi)?;
                    }
                    Ok(SessionType::Brn { roles, arms })
                }
                "mu" => {
                    self.pos += 1;
                    let t = self.ident()?;
                    self.expect(Tok::Dot)?;
                    Ok(SessionType::Mu(t, Box::new(self.ty_prefix()?)))
                }
                "cmt" => {
                    self.pos += 1;
                    self.expect(Tok::Dot)?;
                    Ok(SessionType::cmt(self.ty_prefix()?))
                }
                "end" => {
                    self.pos += 1;
                    Ok(SessionType::End)
                }
                "err" => {
                    self.pos += 1;
                    Ok(SessionType::Err)
                }
                "roll" => {
                    self.pos += 1;
                    Ok(SessionType::Roll)
                }
                "abt" => {
                    self.pos += 1;
                    Ok(SessionType::Abt)
                }
                _ => Ok(SessionType::Var(self.ident()?)),
            },
            _ => Err(self.unexpected("session type")),
        }
    }
}

/// Parses a single process term (free names allowed); used by tests and tooling.
pub fn parse_process(text: &str) -> Result<Process> {
    let toks = lex(text).map_err(|d| vec![d])?;
    let mut p = Parser::new(toks, text.len());
    let proc = p.process().map_err(|d| vec![d])?;
    p.expect_eof().map_err(|d| vec![d])?;
    Ok(proc)
}

/// Parses a collaboration without declarations (no abbreviations, no validation).
pub fn parse_collab(text: &str) -> Result<Collab> {
    parse_program(&format!("main = {text}")).map(|p| p.main).or_else(|_| {
        let toks = lex(text).map_err(|d| vec![d])?;
        let mut p = Parser::new(toks, text.len());
        let raw = p.collab().map_err(|d| vec![d])?;
        p.expect_eof().map_err(|d| vec![d])?;
        let mut out = Vec::new();
        flatten_raw(raw, &mut out).map_err(|d| vec![d])?;
        Ok(Collab::par_all(out))
    })
}

fn flatten_raw(c: RawCollab, out: &mut Vec<Collab>) -> PResult<()> {
    match c {
        RawCollab::Init(c, _) => out.push(c),
        RawCollab::Ref(n, span) => return Err(ParseDiagnostic::error(span, format!("unknown collaboration `{n}`"))),
        RawCollab::Par(items) => {
            for i in items {
                flatten_raw(i, out)?;
            }
        }
    }
    Ok(())
}
