//! Type inference for expressions, processes and initial collaborations.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::parser::Signatures;
use crate::syntax::{Chan, Collab, Endpoint, Expr, Name, Op, Process, Role, Sort};
use crate::types::{RoleRef, Roles, SessionType};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(Name),
    #[error("unbound process variable `{0}`")]
    UnboundProcVar(Name),
    #[error("sort mismatch in {context}: expected {expected}, found {found}")]
    SortMismatch { context: String, expected: Sort, found: Sort },
    #[error("operands of `==` have different sorts {0} and {1}")]
    EqSorts(Sort, Sort),
    #[error("unknown function `{0}`")]
    UnknownFunction(Name),
    #[error("function `{name}` expects {expected} argument(s), got {found}")]
    Arity { name: Name, expected: usize, found: usize },
    #[error("process uses session `{found}` but is typed against `{expected}`")]
    MixedSessionVariables { expected: String, found: String },
    #[error("session variable `{0}` used as a value")]
    ChannelAsValue(Name),
    #[error("variable `{0}` is already bound")]
    Shadowed(Name),
    #[error("process variable `{0}` is already bound")]
    ProcVarShadowed(Name),
    #[error("collaboration is not initial: runtime term encountered")]
    NotInitial,
    #[error("multiparty: {0}")]
    Multiparty(String),
}

type Result<T> = core::result::Result<T, TypeError>;

/// Γ: variables to sorts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Sorting(BTreeMap<Name, Sort>);

impl Sorting {
    pub fn new() -> Self {
        Sorting::default()
    }

    pub fn get(&self, x: &str) -> Option<Sort> {
        self.0.get(x).copied()
    }

    pub fn extend(&self, x: &Name, s: Sort) -> Result<Sorting> {
        self.extend_with(x, s, true)
    }

    fn extend_with(&self, x: &Name, s: Sort, strict: bool) -> Result<Sorting> {
        if strict && self.0.contains_key(x) {
            return Err(TypeError::Shadowed(x.clone()));
        }
        let mut next = self.clone();
        next.0.insert(x.clone(), s);
        Ok(next)
    }
}

impl FromIterator<(Name, Sort)> for Sorting {
    fn from_iter<I: IntoIterator<Item = (Name, Sort)>>(iter: I) -> Self {
        Sorting(iter.into_iter().collect())
    }
}

/// Θ: process variables to type variables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Basis(BTreeMap<Name, Name>);

impl Basis {
    pub fn new() -> Self {
        Basis::default()
    }

    pub fn get(&self, x: &str) -> Option<&Name> {
        self.0.get(x)
    }

    pub fn extend(&self, x: &Name, t: &Name) -> Result<Basis> {
        self.extend_with(x, t, true)
    }

    fn extend_with(&self, x: &Name, t: &Name, strict: bool) -> Result<Basis> {
        if strict && self.0.contains_key(x) {
            return Err(TypeError::ProcVarShadowed(x.clone()));
        }
        let mut next = self.clone();
        next.0.insert(x.clone(), t.clone());
        Ok(next)
    }
}

pub fn sort_of_expression(gamma: &Sorting, sigs: &Signatures, e: &Expr) -> Result<Sort> {
    match e {
        Expr::Lit(v) => Ok(v.sort()),
        Expr::Var(x) => gamma.get(x).ok_or_else(|| TypeError::UnboundVariable(x.clone())),
        Expr::Op(op, args) => {
            let sorts = args.iter().map(|a| sort_of_expression(gamma, sigs, a)).collect::<Result<Vec<_>>>()?;
            let want = |expected: Sort, found: Sort| {
                if expected == found {
                    Ok(())
                } else {
                    Err(TypeError::SortMismatch { context: format!("operand of {op:?}"), expected, found })
                }
            };
            match op {
                Op::Add => {
                    sorts.iter().try_for_each(|s| want(Sort::Int, *s))?;
                    Ok(Sort::Int)
                }
                Op::And | Op::Or | Op::Not => {
                    sorts.iter().try_for_each(|s| want(Sort::Bool, *s))?;
                    Ok(Sort::Bool)
                }
                Op::Lt => {
                    sorts.iter().try_for_each(|s| want(Sort::Int, *s))?;
                    Ok(Sort::Bool)
                }
                Op::Concat => {
                    sorts.iter().try_for_each(|s| want(Sort::Str, *s))?;
                    Ok(Sort::Str)
                }
                Op::Eq => {
                    if sorts[0] != sorts[1] {
                        return Err(TypeError::EqSorts(sorts[0], sorts[1]));
                    }
                    Ok(Sort::Bool)
                }
            }
        }
        Expr::Call(f, args) => {
            let sig = sigs.get(f).ok_or_else(|| TypeError::UnknownFunction(f.clone()))?;
            if sig.args.len() != args.len() {
                return Err(TypeError::Arity { name: f.clone(), expected: sig.args.len(), found: args.len() });
            }
            for (a, s) in args.iter().zip(&sig.args) {
                let found = sort_of_expression(gamma, sigs, a)?;
                if found != *s {
                    return Err(TypeError::SortMismatch { context: format!("argument of `{f}`"), expected: *s, found });
                }
            }
            Ok(sig.result)
        }
    }
}

/// Infers the session type of `p`; the subject is the single session variable it uses.
pub fn type_of_process(theta: &Basis, gamma: &Sorting, sigs: &Signatures, p: &Process) -> Result<(Option<Chan>, SessionType)> {
    let mut t = Typer::new(sigs, None);
    t.used.extend(theta.0.values().cloned());
    let ty = t.process(theta, gamma, p)?;
    Ok((t.subject, ty))
}

/// Types a process living in a log, with its endpoint as subject. Recursion unfolding
/// nests binders of the same name, so shadowing is allowed here.
pub(crate) fn type_of_runtime_process(p: &Process, endpoint: Endpoint, sigs: &Signatures) -> Result<SessionType> {
    let mut t = Typer::new(sigs, Some(Chan::End(endpoint)));
    t.strict = false;
    t.process(&Basis::new(), &Sorting::new(), p)
}

pub(crate) fn type_of_initiator(var: &Name, body: &Process, sigs: &Signatures) -> Result<SessionType> {
    Typer::new(sigs, Some(Chan::Var(var.clone()))).process(&Basis::new(), &Sorting::new(), body)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ChannelRole {
    /// ā, optionally with the multiparty arity.
    Requester(Option<Role>),
    /// a, optionally with the multiparty role.
    Acceptor(Option<Role>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Association {
    pub channel: Name,
    pub role: ChannelRole,
    pub ty: SessionType,
}

/// One association per session initiator, in source order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TypeAssociations(pub Vec<Association>);

impl TypeAssociations {
    pub fn iter(&self) -> impl Iterator<Item = &Association> {
        self.0.iter()
    }

    pub fn channels(&self) -> BTreeSet<Name> {
        self.0.iter().map(|a| a.channel.clone()).collect()
    }

    pub fn requesters<'a>(&'a self, chan: &'a str) -> impl Iterator<Item = &'a Association> + 'a {
        self.0.iter().filter(move |a| &*a.channel == chan && matches!(a.role, ChannelRole::Requester(_)))
    }

    pub fn acceptors<'a>(&'a self, chan: &'a str) -> impl Iterator<Item = &'a Association> + 'a {
        self.0.iter().filter(move |a| &*a.channel == chan && matches!(a.role, ChannelRole::Acceptor(_)))
    }
}

pub fn infer_collaboration(c: &Collab, sigs: &Signatures) -> Result<TypeAssociations> {
    let mut out = Vec::new();
    for comp in c.components() {
        match comp {
            Collab::Request { chan, arity, var, body } => out.push(Association {
                channel: chan.clone(),
                role: ChannelRole::Requester(*arity),
                ty: type_of_initiator(var, body, sigs)?,
            }),
            Collab::Accept { chan, role, var, body } => out.push(Association {
                channel: chan.clone(),
                role: ChannelRole::Acceptor(*role),
                ty: type_of_initiator(var, body, sigs)?,
            }),
            _ => return Err(TypeError::NotInitial),
        }
    }
    Ok(TypeAssociations(out))
}

struct Typer<'a> {
    sigs: &'a Signatures,
    subject: Option<Chan>,
    used: BTreeSet<Name>,
    strict: bool,
}

impl<'a> Typer<'a> {
    fn new(sigs: &'a Signatures, subject: Option<Chan>) -> Self {
        Typer { sigs, subject, used: BTreeSet::new(), strict: true }
    }

    fn chan(&mut self, c: &Chan) -> Result<()> {
        match &self.subject {
            None => {
                self.subject = Some(c.clone());
                Ok(())
            }
            Some(s) if s == c => Ok(()),
            Some(s) => Err(TypeError::MixedSessionVariables { expected: crate::render::render(s), found: crate::render::render(c) }),
        }
    }

    fn expr(&self, gamma: &Sorting, e: &Expr) -> Result<Sort> {
        if let Some(Chan::Var(x)) = &self.subject {
            if gamma.get(x).is_none() && mentions(e, x) {
                return Err(TypeError::ChannelAsValue(x.clone()));
            }
        }
        sort_of_expression(gamma, self.sigs, e)
    }

    fn fresh_tvar(&mut self, x: &Name) -> Name {
        let mut candidate = x.clone();
        let mut k = 0;
        while self.used.contains(&candidate) {
            k += 1;
            candidate = Name::from(format!("{x}{k}").as_str());
        }
        self.used.insert(candidate.clone());
        candidate
    }

    fn process(&mut self, theta: &Basis, gamma: &Sorting, p: &Process) -> Result<SessionType> {
        let roles = |peer: &Option<Role>| peer.map(|q| Roles { from: RoleRef::Hole, to: q });
        Ok(match p {
            Process::Send { chan, peer, expr, cont } => {
                self.chan(chan)?;
                let sort = self.expr(gamma, expr)?;
                SessionType::Out { roles: roles(peer), sort, cont: Box::new(self.process(theta, gamma, cont)?) }
            }
            Process::Recv { chan, peer, var, sort, cont } => {
                self.chan(chan)?;
                if matches!(&self.subject, Some(Chan::Var(x)) if x == var) {
                    return Err(TypeError::Shadowed(var.clone()));
                }
                let g = gamma.extend_with(var, *sort, self.strict)?;
                SessionType::In { roles: roles(peer), sort: *sort, cont: Box::new(self.process(theta, &g, cont)?) }
            }
            Process::Select { chan, peer, label, cont } => {
                self.chan(chan)?;
                SessionType::Sel { roles: roles(peer), label: label.clone(), cont: Box::new(self.process(theta, gamma, cont)?) }
            }
            Process::Branch { chan, peer, arms } => {
                self.chan(chan)?;
                let mut out = Vec::new();
                for (l, q) in arms {
                    out.push((l.clone(), self.process(theta, gamma, q)?));
                }
                SessionType::Brn { roles: roles(peer), arms: out }
            }
            Process::If { cond, then, els } => {
                let s = self.expr(gamma, cond)?;
                if s != Sort::Bool {
                    return Err(TypeError::SortMismatch { context: String::from("condition"), expected: Sort::Bool, found: s });
                }
                SessionType::choice(self.process(theta, gamma, then)?, self.process(theta, gamma, els)?)
            }
            Process::Rec { var, body } => {
                let t = self.fresh_tvar(var);
                let th = theta.extend_with(var, &t, self.strict)?;
                SessionType::Mu(t, Box::new(self.process(&th, gamma, body)?))
            }
            Process::Var(x) => SessionType::Var(theta.get(x).cloned().ok_or_else(|| TypeError::UnboundProcVar(x.clone()))?),
            Process::Inact => SessionType::End,
            Process::Commit(cont) => SessionType::cmt(self.process(theta, gamma, cont)?),
            Process::Roll => SessionType::Roll,
            Process::Abort => SessionType::Abt,
        })
    }
}

fn mentions(e: &Expr, x: &str) -> bool {
    match e {
        Expr::Var(y) => &**y == x,
        Expr::Lit(_) => false,
        Expr::Op(_, args) | Expr::Call(_, args) => args.iter().any(|a| mentions(a, x)),
    }
}
