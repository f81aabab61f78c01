//! Session types.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use crate::syntax::{Name, Role, Sort};

/// The `from` side of a multiparty annotation: a concrete role or the placeholder `_`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RoleRef {
    Hole,
    Role(Role),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Roles {
    pub from: RoleRef,
    pub to: Role,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SessionType {
    Out {
        roles: Option<Roles>,
        sort: Sort,
        cont: Box<SessionType>,
    },
    In {
        roles: Option<Roles>,
        sort: Sort,
        cont: Box<SessionType>,
    },
    Sel {
        roles: Option<Roles>,
        label: Name,
        cont: Box<SessionType>,
    },
    Brn {
        roles: Option<Roles>,
        arms: Vec<(Name, SessionType)>,
    },
    Choice(Box<SessionType>, Box<SessionType>),
    Var(Name),
    Mu(Name, Box<SessionType>),
    End,
    Err,
    Cmt(Box<SessionType>),
    Roll,
    Abt,
}

impl SessionType {
    pub fn out(sort: Sort, cont: SessionType) -> Self {
        SessionType::Out { roles: None, sort, cont: Box::new(cont) }
    }

    pub fn inp(sort: Sort, cont: SessionType) -> Self {
        SessionType::In { roles: None, sort, cont: Box::new(cont) }
    }

    pub fn sel(label: &str, cont: SessionType) -> Self {
        SessionType::Sel { roles: None, label: Name::from(label), cont: Box::new(cont) }
    }

    pub fn choice(l: SessionType, r: SessionType) -> Self {
        SessionType::Choice(Box::new(l), Box::new(r))
    }

    pub fn cmt(cont: SessionType) -> Self {
        SessionType::Cmt(Box::new(cont))
    }

    /// Alpha-canonical form: mu binders renamed by nesting depth, branch arms sorted by label.
    pub fn canonical(&self) -> SessionType {
        canon(self, &mut Vec::new())
    }

    pub fn alpha_eq(&self, other: &SessionType) -> bool {
        self == other || self.canonical() == other.canonical()
    }

    pub fn substitute(&self, var: &Name, repl: &SessionType) -> SessionType {
        let fv = repl.free_vars();
        subst(self, var, repl, &fv)
    }

    /// `mu t. T` becomes `T[mu t. T / t]`; other types are returned unchanged.
    pub fn unfold(&self) -> SessionType {
        match self {
            SessionType::Mu(t, body) => body.substitute(t, self),
            _ => self.clone(),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        fv(self, &mut Vec::new(), &mut out);
        out
    }

    /// Every mu-bound variable occurs under a communication or commit prefix.
    pub fn is_guarded(&self) -> bool {
        fn go(t: &SessionType, unguarded: &mut Vec<Name>) -> bool {
            match t {
                SessionType::Var(x) => !unguarded.contains(x),
                SessionType::Mu(x, body) => {
                    unguarded.push(x.clone());
                    let ok = go(body, unguarded);
                    unguarded.pop();
                    ok
                }
                SessionType::Out { cont, .. } | SessionType::In { cont, .. } | SessionType::Sel { cont, .. } | SessionType::Cmt(cont) => {
                    go(cont, &mut Vec::new())
                }
                SessionType::Brn { arms, .. } => arms.iter().all(|(_, t)| go(t, &mut Vec::new())),
                SessionType::Choice(l, r) => go(l, unguarded) && go(r, unguarded),
                SessionType::End | SessionType::Err | SessionType::Roll | SessionType::Abt => true,
            }
        }
        go(self, &mut Vec::new())
    }

    pub fn depth(&self) -> usize {
        match self {
            SessionType::Out { cont, .. } | SessionType::In { cont, .. } | SessionType::Sel { cont, .. } | SessionType::Cmt(cont) | SessionType::Mu(_, cont) => {
                1 + cont.depth()
            }
            SessionType::Brn { arms, .. } => 1 + arms.iter().map(|(_, t)| t.depth()).max().unwrap_or(0),
            SessionType::Choice(l, r) => 1 + l.depth().max(r.depth()),
            _ => 1,
        }
    }

    /// Applies `f` to every role annotation.
    pub fn map_roles(&self, f: &dyn Fn(Option<Roles>) -> Option<Roles>) -> SessionType {
        match self {
            SessionType::Out { roles, sort, cont } => SessionType::Out { roles: f(*roles), sort: *sort, cont: Box::new(cont.map_roles(f)) },
            SessionType::In { roles, sort, cont } => SessionType::In { roles: f(*roles), sort: *sort, cont: Box::new(cont.map_roles(f)) },
            SessionType::Sel { roles, label, cont } => SessionType::Sel { roles: f(*roles), label: label.clone(), cont: Box::new(cont.map_roles(f)) },
            SessionType::Brn { roles, arms } => SessionType::Brn {
                roles: f(*roles),
                arms: arms.iter().map(|(l, t)| (l.clone(), t.map_roles(f))).collect(),
            },
            SessionType::Choice(l, r) => SessionType::choice(l.map_roles(f), r.map_roles(f)),
            SessionType::Mu(t, body) => SessionType::Mu(t.clone(), Box::new(body.map_roles(f))),
            SessionType::Cmt(c) => SessionType::cmt(c.map_roles(f)),
            _ => self.clone(),
        }
    }

    /// Drops all role annotations.
    pub fn erase_roles(&self) -> SessionType {
        self.map_roles(&|_| None)
    }
}

fn canon(t: &SessionType, env: &mut Vec<(Name, Name)>) -> SessionType {
    match t {
        SessionType::Out { roles, sort, cont } => SessionType::Out { roles: *roles, sort: *sort, cont: Box::new(canon(cont, env)) },
        SessionType::In { roles, sort, cont } => SessionType::In { roles: *roles, sort: *sort, cont: Box::new(canon(cont, env)) },
        SessionType::Sel { roles, label, cont } => SessionType::Sel { roles: *roles, label: label.clone(), cont: Box::new(canon(cont, env)) },
        SessionType::Brn { roles, arms } => {
            let mut arms: Vec<(Name, SessionType)> = arms.iter().map(|(l, t)| (l.clone(), canon(t, env))).collect();
            arms.sort_by(|a, b| a.0.cmp(&b.0));
            SessionType::Brn { roles: *roles, arms }
        }
        SessionType::Choice(l, r) => SessionType::choice(canon(l, env), canon(r, env)),
        SessionType::Var(x) => SessionType::Var(env.iter().rev().find(|(k, _)| k == x).map(|(_, v)| v.clone()).unwrap_or_else(|| x.clone())),
        SessionType::Mu(x, body) => {
            let fresh = Name::from(format!("#t{}", env.len()).as_str());
            env.push((x.clone(), fresh.clone()));
            let body = canon(body, env);
            env.pop();
            SessionType::Mu(fresh, Box::new(body))
        }
        SessionType::Cmt(c) => SessionType::cmt(canon(c, env)),
        SessionType::End | SessionType::Err | SessionType::Roll | SessionType::Abt => t.clone(),
    }
}

fn subst(t: &SessionType, var: &Name, repl: &SessionType, repl_fv: &BTreeSet<Name>) -> SessionType {
    let go = |c: &SessionType| subst(c, var, repl, repl_fv);
    match t {
        SessionType::Out { roles, sort, cont } => SessionType::Out { roles: *roles, sort: *sort, cont: Box::new(go(cont)) },
        SessionType::In { roles, sort, cont } => SessionType::In { roles: *roles, sort: *sort, cont: Box::new(go(cont)) },
        SessionType::Sel { roles, label, cont } => SessionType::Sel { roles: *roles, label: label.clone(), cont: Box::new(go(cont)) },
        SessionType::Brn { roles, arms } => SessionType::Brn { roles: *roles, arms: arms.iter().map(|(l, t)| (l.clone(), go(t))).collect() },
        SessionType::Choice(l, r) => SessionType::choice(go(l), go(r)),
        SessionType::Var(x) if x == var => repl.clone(),
        SessionType::Mu(x, _) if x == var => t.clone(),
        SessionType::Mu(x, body) if repl_fv.contains(x) => {
            let mut fresh = alloc::string::String::from(&**x);
            let body_fv = body.free_vars();
            loop {
                fresh.push('\'');
                if !repl_fv.contains(fresh.as_str()) && !body_fv.contains(fresh.as_str()) {
                    break;
                }
            }
            let fresh = Name::from(fresh.as_str());
            let renamed = body.substitute(x, &SessionType::Var(fresh.clone()));
            SessionType::Mu(fresh, Box::new(go(&renamed)))
        }
        SessionType::Mu(x, body) => SessionType::Mu(x.clone(), Box::new(go(body))),
        SessionType::Cmt(c) => SessionType::cmt(go(c)),
        SessionType::Var(_) | SessionType::End | SessionType::Err | SessionType::Roll | SessionType::Abt => t.clone(),
    }
}

fn fv(t: &SessionType, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
    match t {
        SessionType::Var(x) => {
            if !bound.contains(x) {
                out.insert(x.clone());
            }
        }
        SessionType::Mu(x, body) => {
            bound.push(x.clone());
            fv(body, bound, out);
            bound.pop();
        }
        SessionType::Out { cont, .. } | SessionType::In { cont, .. } | SessionType::Sel { cont, .. } | SessionType::Cmt(cont) => fv(cont, bound, out),
        SessionType::Brn { arms, .. } => arms.iter().for_each(|(_, t)| fv(t, bound, out)),
        SessionType::Choice(l, r) => {
            fv(l, bound, out);
            fv(r, bound, out);
        }
        _ => {}
    }
}
