//! Canonical forms: alpha-renaming by binder depth plus sorting of parallel components.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::syntax::{Chan, Checkpoint, Collab, Endpoint, Expr, Name, Process, SessionName};

/// Normal form of a collaboration; two collaborations are structurally congruent iff their
/// canonical forms are equal.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalForm(Collab);

impl CanonicalForm {
    pub fn as_collab(&self) -> &Collab {
        &self.0
    }

    pub fn into_collab(self) -> Collab {
        self.0
    }
}

impl fmt::Display for CanonicalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

pub fn canonicalize(c: &Collab) -> CanonicalForm {
    CanonicalForm(normalize(c))
}

pub fn equivalent(c1: &Collab, c2: &Collab) -> bool {
    canonicalize(c1) == canonicalize(c2)
}

/// Alpha-equality of processes, recursion left folded.
pub fn process_equivalent(p: &Process, q: &Process) -> bool {
    p == q || canonical_process(p) == canonical_process(q)
}

/// Canonical collaboration term: components sorted, sessions renumbered from 1 in order.
pub fn normalize(c: &Collab) -> Collab {
    let mut comps: Vec<Collab> = c.components().into_iter().map(|k| component(k, &|_| SessionName(0))).collect();
    comps.sort();
    let mut next = 0;
    for comp in &mut comps {
        if let Collab::Session { .. } = comp {
            next += 1;
            let n = SessionName(next);
            *comp = rename_component(comp, &|_| n);
        }
    }
    Collab::par_all(comps)
}

fn sorted_par(c: &Collab, sess: &dyn Fn(SessionName) -> SessionName) -> Collab {
    let mut comps: Vec<Collab> = c.components().into_iter().map(|k| component(k, sess)).collect();
    comps.sort();
    Collab::par_all(comps)
}

fn component(c: &Collab, sess: &dyn Fn(SessionName) -> SessionName) -> Collab {
    match c {
        Collab::Request { chan, arity, var, body } => Collab::Request {
            chan: chan.clone(),
            arity: *arity,
            var: var_name(0),
            body: Canon::with_var(var, sess).process(body),
        },
        Collab::Accept { chan, role, var, body } => Collab::Accept {
            chan: chan.clone(),
            role: *role,
            var: var_name(0),
            body: Canon::with_var(var, sess).process(body),
        },
        Collab::Session { name, saved, body } => {
            let own = *name;
            let inner = move |s: SessionName| if s == own { SessionName(0) } else { sess(s) };
            Collab::Session {
                name: SessionName(0),
                saved: Box::new(sorted_par(saved, &inner)),
                body: Box::new(sorted_par(body, &inner)),
            }
        }
        Collab::Log { endpoint, checkpoint, current } => Collab::Log {
            endpoint: Endpoint { session: sess(endpoint.session), side: endpoint.side },
            checkpoint: Checkpoint {
                process: Canon::new(sess).process(&checkpoint.process),
                imposed: checkpoint.imposed,
            },
            current: Canon::new(sess).process(current),
        },
        Collab::Par(..) => sorted_par(c, sess),
        Collab::RollError | Collab::ComError => c.clone(),
    }
}

fn rename_component(c: &Collab, sess: &dyn Fn(SessionName) -> SessionName) -> Collab {
    match c {
        Collab::Session { name, saved, body } => Collab::Session {
            name: sess(*name),
            saved: saved.clone(),
            body: Box::new(Collab::par_all(body.components().into_iter().map(|k| rename_component(k, sess)).collect())),
        },
        Collab::Log { endpoint, checkpoint, current } => Collab::Log {
            endpoint: Endpoint { session: sess(endpoint.session), side: endpoint.side },
            checkpoint: Checkpoint {
                process: rename_sessions(&checkpoint.process, sess),
                imposed: checkpoint.imposed,
            },
            current: rename_sessions(current, sess),
        },
        c => c.clone(),
    }
}

fn rename_sessions(p: &Process, sess: &dyn Fn(SessionName) -> SessionName) -> Process {
    // Binder names are already canonical, so a fresh Canon pass only touches endpoints.
    Canon::new(sess).process(p)
}

pub fn canonical_process(p: &Process) -> Process {
    Canon::new(&|s| s).process(p)
}

fn var_name(level: usize) -> Name {
    Name::from(format!("#{level}").as_str())
}

fn proc_var_name(level: usize) -> Name {
    Name::from(format!("#X{level}").as_str())
}

struct Canon<'a> {
    vars: Vec<(Name, Name)>,
    pvars: Vec<(Name, Name)>,
    sess: &'a dyn Fn(SessionName) -> SessionName,
}

impl<'a> Canon<'a> {
    fn new(sess: &'a dyn Fn(SessionName) -> SessionName) -> Self {
        Canon { vars: Vec::new(), pvars: Vec::new(), sess }
    }

    fn with_var(x: &Name, sess: &'a dyn Fn(SessionName) -> SessionName) -> Self {
        let mut c = Canon::new(sess);
        c.vars.push((x.clone(), var_name(0)));
        c
    }

    fn lookup(env: &[(Name, Name)], x: &Name) -> Name {
        env.iter().rev().find(|(k, _)| k == x).map(|(_, v)| v.clone()).unwrap_or_else(|| x.clone())
    }

    fn chan(&self, c: &Chan) -> Chan {
        match c {
            Chan::Var(x) => Chan::Var(Self::lookup(&self.vars, x)),
            Chan::End(e) => Chan::End(Endpoint { session: (self.sess)(e.session), side: e.side }),
        }
    }

    fn expr(&self, e: &Expr) -> Expr {
        match e {
            Expr::Var(x) => Expr::Var(Self::lookup(&self.vars, x)),
            Expr::Lit(_) => e.clone(),
            Expr::Op(op, a) => Expr::Op(*op, a.iter().map(|a| self.expr(a)).collect()),
            Expr::Call(f, a) => Expr::Call(f.clone(), a.iter().map(|a| self.expr(a)).collect()),
        }
    }

    fn process(&mut self, p: &Process) -> Process {
        match p {
            Process::Send { chan, peer, expr, cont } => Process::Send {
                chan: self.chan(chan),
                peer: *peer,
                expr: self.expr(expr),
                cont: Box::new(self.process(cont)),
            },
            Process::Recv { chan, peer, var, sort, cont } => {
                let chan = self.chan(chan);
                let fresh = var_name(self.vars.len());
                self.vars.push((var.clone(), fresh.clone()));
                let cont = self.process(cont);
                self.vars.pop();
                Process::Recv { chan, peer: *peer, var: fresh, sort: *sort, cont: Box::new(cont) }
            }
            Process::Select { chan, peer, label, cont } => Process::Select {
                chan: self.chan(chan),
                peer: *peer,
                label: label.clone(),
                cont: Box::new(self.process(cont)),
            },
            Process::Branch { chan, peer, arms } => Process::Branch {
                chan: self.chan(chan),
                peer: *peer,
                arms: arms.iter().map(|(l, q)| (l.clone(), self.process(q))).collect(),
            },
            Process::If { cond, then, els } => Process::If {
                cond: self.expr(cond),
                then: Box::new(self.process(then)),
                els: Box::new(self.process(els)),
            },
            Process::Rec { var, body } => {
                let fresh = proc_var_name(self.pvars.len());
                self.pvars.push((var.clone(), fresh.clone()));
                let body = self.process(body);
                self.pvars.pop();
                Process::Rec { var: fresh, body: Box::new(body) }
            }
            Process::Var(x) => Process::Var(Self::lookup(&self.pvars, x)),
            Process::Commit(cont) => Process::Commit(Box::new(self.process(cont))),
            Process::Inact | Process::Roll | Process::Abort => p.clone(),
        }
    }
}
