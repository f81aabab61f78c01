//! Abstract syntax of programs, runtime states and expressions.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::cmp::Ordering;

use thiserror::Error;

/// Interned identifier.
pub type Name = Arc<str>;

/// Multiparty role index (1-based).
pub type Role = u32;

pub fn name(s: &str) -> Name {
    Name::from(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sort {
    Bool,
    Int,
    Str,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Str(Name),
}

impl Value {
    pub fn sort(&self) -> Sort {
        match self {
            Value::Bool(_) => Sort::Bool,
            Value::Int(_) => Sort::Int,
            Value::Str(_) => Sort::Str,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Op {
    Add,
    And,
    Or,
    Not,
    Eq,
    Lt,
    Concat,
}

impl Op {
    pub fn arity(self) -> usize {
        match self {
            Op::Not => 1,
            _ => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Lit(Value),
    Var(Name),
    Op(Op, Vec<Expr>),
    /// Uninterpreted function call, resolved by the runtime oracle.
    Call(Name, Vec<Expr>),
}

impl Expr {
    pub fn is_closed(&self) -> bool {
        match self {
            Expr::Lit(_) => true,
            Expr::Var(_) => false,
            Expr::Op(_, args) | Expr::Call(_, args) => args.iter().all(Expr::is_closed),
        }
    }

    pub fn has_calls(&self) -> bool {
        match self {
            Expr::Lit(_) | Expr::Var(_) => false,
            Expr::Call(..) => true,
            Expr::Op(_, args) => args.iter().any(Expr::has_calls),
        }
    }

    fn free_vars_into(&self, out: &mut BTreeSet<Name>) {
        match self {
            Expr::Lit(_) => {}
            Expr::Var(x) => {
                out.insert(x.clone());
            }
            Expr::Op(_, args) | Expr::Call(_, args) => {
                for a in args {
                    a.free_vars_into(out);
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SessionName(pub u32);

/// Endpoint side. Binary sessions use polarities; multiparty sessions use roles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Plus,
    Minus,
    Role(Role),
}

impl Side {
    // Requester first: plus before minus, higher roles before lower ones.
    fn rank(self) -> (u8, i64) {
        match self {
            Side::Plus => (0, 0),
            Side::Minus => (1, 0),
            Side::Role(r) => (2, -i64::from(r)),
        }
    }

    pub fn dual(self) -> Side {
        match self {
            Side::Plus => Side::Minus,
            Side::Minus => Side::Plus,
            Side::Role(r) => Side::Role(r),
        }
    }
}

impl PartialOrd for Side {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Side {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank().cmp(&other.rank())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Endpoint {
    pub session: SessionName,
    pub side: Side,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Chan {
    Var(Name),
    End(Endpoint),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Process {
    Send {
        chan: Chan,
        peer: Option<Role>,
        expr: Expr,
        cont: Box<Process>,
    },
    Recv {
        chan: Chan,
        peer: Option<Role>,
        var: Name,
        sort: Sort,
        cont: Box<Process>,
    },
    Select {
        chan: Chan,
        peer: Option<Role>,
        label: Name,
        cont: Box<Process>,
    },
    Branch {
        chan: Chan,
        peer: Option<Role>,
        arms: Vec<(Name, Process)>,
    },
    If {
        cond: Expr,
        then: Box<Process>,
        els: Box<Process>,
    },
    Rec {
        var: Name,
        body: Box<Process>,
    },
    Var(Name),
    Inact,
    Commit(Box<Process>),
    Roll,
    Abort,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Checkpoint {
    pub process: Process,
    pub imposed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Collab {
    /// `request a(x). P`; `arity` is set for multiparty requests `a[n]`.
    Request {
        chan: Name,
        arity: Option<Role>,
        var: Name,
        body: Process,
    },
    /// `accept a(x). P`; `role` is set for multiparty accepts `a[p]`.
    Accept {
        chan: Name,
        role: Option<Role>,
        var: Name,
        body: Process,
    },
    Par(Box<Collab>, Box<Collab>),
    Session {
        name: SessionName,
        saved: Box<Collab>,
        body: Box<Collab>,
    },
    Log {
        endpoint: Endpoint,
        checkpoint: Checkpoint,
        current: Process,
    },
    RollError,
    ComError,
}

impl Collab {
    /// Right-nested parallel composition. Panics on an empty list.
    pub fn par_all(mut items: Vec<Collab>) -> Collab {
        let mut acc = items.pop().expect("parallel composition of nothing");
        while let Some(c) = items.pop() {
            acc = Collab::Par(Box::new(c), Box::new(acc));
        }
        acc
    }

    /// Top-level parallel components, left to right.
    pub fn components(&self) -> Vec<&Collab> {
        let mut out = Vec::new();
        self.components_into(&mut out);
        out
    }

    fn components_into<'a>(&'a self, out: &mut Vec<&'a Collab>) {
        match self {
            Collab::Par(l, r) => {
                l.components_into(out);
                r.components_into(out);
            }
            c => out.push(c),
        }
    }

    pub fn into_components(self) -> Vec<Collab> {
        let mut out = Vec::new();
        let mut stack = alloc::vec![self];
        while let Some(c) = stack.pop() {
            match c {
                Collab::Par(l, r) => {
                    stack.push(*r);
                    stack.push(*l);
                }
                c => out.push(c),
            }
        }
        out
    }

    /// True for parse-level collaborations: no sessions, logs or error terms.
    pub fn is_initial(&self) -> bool {
        self.components()
            .iter()
            .all(|c| matches!(c, Collab::Request { .. } | Collab::Accept { .. }))
    }

    pub fn has_error(&self) -> bool {
        match self {
            Collab::RollError | Collab::ComError => true,
            Collab::Par(l, r) => l.has_error() || r.has_error(),
            Collab::Session { body, .. } => body.has_error(),
            _ => false,
        }
    }

    pub fn max_session(&self) -> u32 {
        match self {
            Collab::Par(l, r) => l.max_session().max(r.max_session()),
            Collab::Session { name, .. } => name.0,
            _ => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NameRef {
    Var(Name),
    ProcVar(Name),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Replacement {
    Value(Value),
    Chan(Endpoint),
    Process(Process),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SyntaxError {
    #[error("invalid substitution: {0}")]
    InvalidSubstitution(String),
    #[error("not a recursion")]
    NotARecursion,
}

/// Capture-avoiding substitution of `repl` for the free occurrences of `target` in `p`.
pub fn substitute(p: &Process, target: &NameRef, repl: &Replacement) -> Result<Process, SyntaxError> {
    match (target, repl) {
        (NameRef::Var(_), Replacement::Process(_)) => {
            return Err(SyntaxError::InvalidSubstitution(format!(
                "process substituted for variable {}",
                name_of(target)
            )))
        }
        (NameRef::ProcVar(_), Replacement::Value(_) | Replacement::Chan(_)) => {
            return Err(SyntaxError::InvalidSubstitution(format!(
                "value substituted for process variable {}",
                name_of(target)
            )))
        }
        _ => {}
    }
    let (fv, fpv) = match repl {
        Replacement::Process(q) => (free_vars(q), free_proc_vars(q)),
        _ => (BTreeSet::new(), BTreeSet::new()),
    };
    let mut s = Subst {
        target,
        repl,
        fv,
        fpv,
    };
    s.process(p)
}

fn name_of(t: &NameRef) -> &str {
    match t {
        NameRef::Var(n) | NameRef::ProcVar(n) => n,
    }
}

struct Subst<'a> {
    target: &'a NameRef,
    repl: &'a Replacement,
    fv: BTreeSet<Name>,
    fpv: BTreeSet<Name>,
}

impl Subst<'_> {
    fn chan(&self, c: &Chan) -> Result<Chan, SyntaxError> {
        match (c, self.target, self.repl) {
            (Chan::Var(x), NameRef::Var(t), r) if x == t => match r {
                Replacement::Chan(e) => Ok(Chan::End(*e)),
                _ => Err(SyntaxError::InvalidSubstitution(format!("value substituted for channel {x}"))),
            },
            _ => Ok(c.clone()),
        }
    }

    fn expr(&self, e: &Expr) -> Result<Expr, SyntaxError> {
        Ok(match e {
            Expr::Var(x) => match (self.target, self.repl) {
                (NameRef::Var(t), Replacement::Value(v)) if x == t => Expr::Lit(v.clone()),
                (NameRef::Var(t), Replacement::Chan(_)) if x == t => {
                    return Err(SyntaxError::InvalidSubstitution(format!("channel substituted into expression at {x}")))
                }
                _ => e.clone(),
            },
            Expr::Lit(_) => e.clone(),
            Expr::Op(op, args) => Expr::Op(*op, args.iter().map(|a| self.expr(a)).collect::<Result<_, _>>()?),
            Expr::Call(f, args) => Expr::Call(f.clone(), args.iter().map(|a| self.expr(a)).collect::<Result<_, _>>()?),
        })
    }

    fn boxed(&mut self, p: &Process) -> Result<Box<Process>, SyntaxError> {
        Ok(Box::new(self.process(p)?))
    }

    fn process(&mut self, p: &Process) -> Result<Process, SyntaxError> {
        Ok(match p {
            Process::Send { chan, peer, expr, cont } => Process::Send {
                chan: self.chan(chan)?,
                peer: *peer,
                expr: self.expr(expr)?,
                cont: self.boxed(cont)?,
            },
            Process::Recv { chan, peer, var, sort, cont } => {
                let chan = self.chan(chan)?;
                if matches!(self.target, NameRef::Var(t) if t == var) {
                    return Ok(Process::Recv { chan, peer: *peer, var: var.clone(), sort: *sort, cont: cont.clone() });
                }
                let (var, cont) = if self.fv.contains(var) {
                    let fresh = fresh_name(var, &self.fv, &free_vars(cont));
                    let renamed = substitute_var_name(cont, var, &fresh);
                    (fresh, renamed)
                } else {
                    (var.clone(), (**cont).clone())
                };
                Process::Recv { chan, peer: *peer, var, sort: *sort, cont: Box::new(self.process(&cont)?) }
            }
            Process::Select { chan, peer, label, cont } => Process::Select {
                chan: self.chan(chan)?,
                peer: *peer,
                label: label.clone(),
                cont: self.boxed(cont)?,
            },
            Process::Branch { chan, peer, arms } => Process::Branch {
                chan: self.chan(chan)?,
                peer: *peer,
                arms: arms
                    .iter()
                    .map(|(l, q)| Ok((l.clone(), self.process(q)?)))
                    .collect::<Result<_, SyntaxError>>()?,
            },
            Process::If { cond, then, els } => Process::If {
                cond: self.expr(cond)?,
                then: self.boxed(then)?,
                els: self.boxed(els)?,
            },
            Process::Rec { var, body } => {
                if matches!(self.target, NameRef::ProcVar(t) if t == var) {
                    return Ok(p.clone());
                }
                let (var, body) = if self.fpv.contains(var) {
                    let fresh = fresh_name(var, &self.fpv, &free_proc_vars(body));
                    let renamed = substitute(body, &NameRef::ProcVar(var.clone()), &Replacement::Process(Process::Var(fresh.clone())))?;
                    (fresh, renamed)
                } else {
                    (var.clone(), (**body).clone())
                };
                Process::Rec { var, body: Box::new(self.process(&body)?) }
            }
            Process::Var(x) => match (self.target, self.repl) {
                (NameRef::ProcVar(t), Replacement::Process(q)) if x == t => q.clone(),
                _ => p.clone(),
            },
            Process::Commit(cont) => Process::Commit(self.boxed(cont)?),
            Process::Inact | Process::Roll | Process::Abort => p.clone(),
        })
    }
}

fn fresh_name(base: &Name, avoid1: &BTreeSet<Name>, avoid2: &BTreeSet<Name>) -> Name {
    let mut candidate = String::from(&**base);
    loop {
        candidate.push('\'');
        if !avoid1.contains(candidate.as_str()) && !avoid2.contains(candidate.as_str()) {
            return Name::from(candidate.as_str());
        }
    }
}

/// Renames free occurrences of variable `from` to `to`, assuming `to` is not bound inside.
fn substitute_var_name(p: &Process, from: &Name, to: &Name) -> Process {
    rename_vars(p, &|x: &Name| if x == from { Some(to.clone()) } else { None })
}

/// Applies `f` to free variable occurrences (channels and expressions).
pub(crate) fn rename_vars(p: &Process, f: &dyn Fn(&Name) -> Option<Name>) -> Process {
    fn chan(c: &Chan, f: &dyn Fn(&Name) -> Option<Name>) -> Chan {
        match c {
            Chan::Var(x) => Chan::Var(f(x).unwrap_or_else(|| x.clone())),
            c => c.clone(),
        }
    }
    fn expr(e: &Expr, f: &dyn Fn(&Name) -> Option<Name>) -> Expr {
        match e {
            Expr::Var(x) => Expr::Var(f(x).unwrap_or_else(|| x.clone())),
            Expr::Lit(_) => e.clone(),
            Expr::Op(op, a) => Expr::Op(*op, a.iter().map(|a| expr(a, f)).collect()),
            Expr::Call(n, a) => Expr::Call(n.clone(), a.iter().map(|a| expr(a, f)).collect()),
        }
    }
    match p {
        Process::Send { chan: c, peer, expr: e, cont } => Process::Send {
            chan: chan(c, f),
            peer: *peer,
            expr: expr(e, f),
            cont: Box::new(rename_vars(cont, f)),
        },
        Process::Recv { chan: c, peer, var, sort, cont } => {
            let inner = |x: &Name| if x == var { None } else { f(x) };
            Process::Recv {
                chan: chan(c, f),
                peer: *peer,
                var: var.clone(),
                sort: *sort,
                cont: Box::new(rename_vars(cont, &inner)),
            }
        }
        Process::Select { chan: c, peer, label, cont } => Process::Select {
            chan: chan(c, f),
            peer: *peer,
            label: label.clone(),
            cont: Box::new(rename_vars(cont, f)),
        },
        Process::Branch { chan: c, peer, arms } => Process::Branch {
            chan: chan(c, f),
            peer: *peer,
            arms: arms.iter().map(|(l, q)| (l.clone(), rename_vars(q, f))).collect(),
        },
        Process::If { cond, then, els } => Process::If {
            cond: expr(cond, f),
            then: Box::new(rename_vars(then, f)),
            els: Box::new(rename_vars(els, f)),
        },
        Process::Rec { var, body } => Process::Rec { var: var.clone(), body: Box::new(rename_vars(body, f)) },
        Process::Commit(cont) => Process::Commit(Box::new(rename_vars(cont, f))),
        Process::Var(_) | Process::Inact | Process::Roll | Process::Abort => p.clone(),
    }
}

/// One unfolding of a recursion: `rec X. P` becomes `P[rec X. P / X]`.
pub fn unfold_recursion(p: &Process) -> Result<Process, SyntaxError> {
    match p {
        Process::Rec { var, body } => substitute(body, &NameRef::ProcVar(var.clone()), &Replacement::Process(p.clone())),
        _ => Err(SyntaxError::NotARecursion),
    }
}

pub fn free_vars(p: &Process) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    fv_into(p, &mut Vec::new(), &mut out);
    out
}

fn fv_into(p: &Process, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
    let chan = |c: &Chan, bound: &Vec<Name>, out: &mut BTreeSet<Name>| {
        if let Chan::Var(x) = c {
            if !bound.contains(x) {
                out.insert(x.clone());
            }
        }
    };
    let expr = |e: &Expr, bound: &Vec<Name>, out: &mut BTreeSet<Name>| {
        let mut s = BTreeSet::new();
        e.free_vars_into(&mut s);
        out.extend(s.into_iter().filter(|x| !bound.contains(x)));
    };
    match p {
        Process::Send { chan: c, expr: e, cont, .. } => {
            chan(c, bound, out);
            expr(e, bound, out);
            fv_into(cont, bound, out);
        }
        Process::Recv { chan: c, var, cont, .. } => {
            chan(c, bound, out);
            bound.push(var.clone());
            fv_into(cont, bound, out);
            bound.pop();
        }
        Process::Select { chan: c, cont, .. } => {
            chan(c, bound, out);
            fv_into(cont, bound, out);
        }
        Process::Branch { chan: c, arms, .. } => {
            chan(c, bound, out);
            for (_, q) in arms {
                fv_into(q, bound, out);
            }
        }
        Process::If { cond, then, els } => {
            expr(cond, bound, out);
            fv_into(then, bound, out);
            fv_into(els, bound, out);
        }
        Process::Rec { body, .. } | Process::Commit(body) => fv_into(body, bound, out),
        Process::Var(_) | Process::Inact | Process::Roll | Process::Abort => {}
    }
}

pub fn free_proc_vars(p: &Process) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    fpv_into(p, &mut Vec::new(), &mut out);
    out
}

fn fpv_into(p: &Process, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
    match p {
        Process::Var(x) => {
            if !bound.contains(x) {
                out.insert(x.clone());
            }
        }
        Process::Rec { var, body } => {
            bound.push(var.clone());
            fpv_into(body, bound, out);
            bound.pop();
        }
        Process::Send { cont, .. } | Process::Recv { cont, .. } | Process::Select { cont, .. } | Process::Commit(cont) => {
            fpv_into(cont, bound, out)
        }
        Process::Branch { arms, .. } => {
            for (_, q) in arms {
                fpv_into(q, bound, out);
            }
        }
        Process::If { then, els, .. } => {
            fpv_into(then, bound, out);
            fpv_into(els, bound, out);
        }
        Process::Inact | Process::Roll | Process::Abort => {}
    }
}

/// Every process variable occurs under a communication or commit prefix of its binder.
pub fn is_guarded(p: &Process) -> bool {
    fn go(p: &Process, unguarded: &mut Vec<Name>) -> bool {
        match p {
            Process::Var(x) => !unguarded.contains(x),
            Process::Rec { var, body } => {
                unguarded.push(var.clone());
                let ok = go(body, unguarded);
                unguarded.pop();
                ok
            }
            Process::Send { cont, .. } | Process::Recv { cont, .. } | Process::Select { cont, .. } | Process::Commit(cont) => {
                go(cont, &mut Vec::new())
            }
            Process::Branch { arms, .. } => arms.iter().all(|(_, q)| go(q, &mut Vec::new())),
            Process::If { then, els, .. } => go(then, unguarded) && go(els, unguarded),
            Process::Inact | Process::Roll | Process::Abort => true,
        }
    }
    go(p, &mut Vec::new())
}

/// Collects the names of uninterpreted functions called in `p`.
pub fn called_functions(p: &Process, out: &mut BTreeSet<Name>) {
    fn expr(e: &Expr, out: &mut BTreeSet<Name>) {
        match e {
            Expr::Call(f, args) => {
                out.insert(f.clone());
                args.iter().for_each(|a| expr(a, out));
            }
            Expr::Op(_, args) => args.iter().for_each(|a| expr(a, out)),
            _ => {}
        }
    }
    match p {
        Process::Send { expr: e, cont, .. } => {
            expr(e, out);
            called_functions(cont, out);
        }
        Process::If { cond, then, els } => {
            expr(cond, out);
            called_functions(then, out);
            called_functions(els, out);
        }
        Process::Recv { cont, .. } | Process::Select { cont, .. } | Process::Commit(cont) | Process::Rec { body: cont, .. } => {
            called_functions(cont, out)
        }
        Process::Branch { arms, .. } => arms.iter().for_each(|(_, q)| called_functions(q, out)),
        Process::Var(_) | Process::Inact | Process::Roll | Process::Abort => {}
    }
}

pub fn collab_called_functions(c: &Collab) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    fn go(c: &Collab, out: &mut BTreeSet<Name>) {
        match c {
            Collab::Request { body, .. } | Collab::Accept { body, .. } => called_functions(body, out),
            Collab::Par(l, r) => {
                go(l, out);
                go(r, out);
            }
            Collab::Session { saved, body, .. } => {
                go(saved, out);
                go(body, out);
            }
            Collab::Log { checkpoint, current, .. } => {
                called_functions(&checkpoint.process, out);
                called_functions(current, out);
            }
            Collab::RollError | Collab::ComError => {}
        }
    }
    go(c, &mut out);
    out
}
