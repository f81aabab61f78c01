//! A deliberately naive re-implementation of the configuration semantics: its own unfolding,
//! its own rule table, recursive depth-first enumeration keyed by rendered text.

use std::collections::{BTreeMap, BTreeSet};

use cherry_core::syntax::Name;
use cherry_core::types::SessionType;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Move {
    Out(String),
    In(String),
    Sel(String),
    Brn(String),
    Tau,
    Cmt,
    Roll,
    Abt,
}

fn subst(t: &SessionType, x: &Name, r: &SessionType) -> SessionType {
    use SessionType::*;
    match t {
        Var(y) if y == x => r.clone(),
        Mu(y, _) if y == x => t.clone(),
        Mu(y, b) => Mu(y.clone(), Box::new(subst(b, x, r))),
        Out { roles, sort, cont } => Out { roles: *roles, sort: *sort, cont: Box::new(subst(cont, x, r)) },
        In { roles, sort, cont } => In { roles: *roles, sort: *sort, cont: Box::new(subst(cont, x, r)) },
        Sel { roles, label, cont } => Sel { roles: *roles, label: label.clone(), cont: Box::new(subst(cont, x, r)) },
        Brn { roles, arms } => Brn { roles: *roles, arms: arms.iter().map(|(l, a)| (l.clone(), subst(a, x, r))).collect() },
        Choice(a, b) => Choice(Box::new(subst(a, x, r)), Box::new(subst(b, x, r))),
        Cmt(c) => Cmt(Box::new(subst(c, x, r))),
        _ => t.clone(),
    }
}

fn moves(t: &SessionType) -> Vec<(Move, SessionType)> {
    use SessionType::*;
    match t {
        Out { sort, cont, .. } => vec![(Move::Out(sort.to_string()), (**cont).clone())],
        In { sort, cont, .. } => vec![(Move::In(sort.to_string()), (**cont).clone())],
        Sel { label, cont, .. } => vec![(Move::Sel(label.to_string()), (**cont).clone())],
        Brn { arms, .. } => arms.iter().map(|(l, a)| (Move::Brn(l.to_string()), a.clone())).collect(),
        Choice(a, b) => vec![(Move::Tau, (**a).clone()), (Move::Tau, (**b).clone())],
        Mu(x, b) => moves(&subst(b, x, t)),
        Cmt(c) => vec![(Move::Cmt, (**c).clone())],
        Roll => vec![(Move::Roll, End)],
        Abt => vec![(Move::Abt, End)],
        _ => vec![],
    }
}

#[derive(Clone, Debug)]
pub struct Cfg {
    pub init: [SessionType; 2],
    /// (checkpoint, imposed, current)
    pub parties: [(SessionType, bool, SessionType); 2],
}

impl Cfg {
    pub fn initial(a: &SessionType, b: &SessionType) -> Self {
        Cfg { init: [a.clone(), b.clone()], parties: [(a.clone(), false, a.clone()), (b.clone(), false, b.clone())] }
    }

    pub fn key(&self) -> String {
        let c = |t: &SessionType| t.canonical().to_string();
        let p = |i: usize| format!("{}{}|{}", if self.parties[i].1 { "!" } else { "" }, c(&self.parties[i].0), c(&self.parties[i].2));
        format!("{} ; {} ; {} ; {}", c(&self.init[0]), c(&self.init[1]), p(0), p(1))
    }

    pub fn completed(&self) -> bool {
        self.parties.iter().all(|p| p.2 == SessionType::End)
    }
}

fn same(a: &SessionType, b: &SessionType) -> bool {
    a.canonical() == b.canonical()
}

pub fn successors(c: &Cfg) -> Vec<(&'static str, Cfg)> {
    let mut out = Vec::new();
    for i in 0..2 {
        let j = 1 - i;
        for (m, next) in moves(&c.parties[i].2) {
            let mut n = c.clone();
            match m {
                Move::Tau => {
                    n.parties[i].2 = next;
                    out.push(("TS-Tau", n));
                }
                Move::Out(s) => {
                    for (m2, next2) in moves(&c.parties[j].2) {
                        if m2 == Move::In(s.clone()) {
                            let mut n = c.clone();
                            n.parties[i].2 = next.clone();
                            n.parties[j].2 = next2;
                            out.push(("TS-Com", n));
                        }
                    }
                }
                Move::Sel(l) => {
                    for (m2, next2) in moves(&c.parties[j].2) {
                        if m2 == Move::Brn(l.clone()) {
                            let mut n = c.clone();
                            n.parties[i].2 = next.clone();
                            n.parties[j].2 = next2;
                            out.push(("TS-Lab", n));
                        }
                    }
                }
                Move::In(_) | Move::Brn(_) => {}
                Move::Cmt => {
                    n.parties[i] = (next.clone(), false, next);
                    if same(&c.parties[j].0, &c.parties[j].2) {
                        out.push(("TS-Cmt2", n));
                    } else {
                        n.parties[j].0 = c.parties[j].2.clone();
                        n.parties[j].1 = true;
                        out.push(("TS-Cmt1", n));
                    }
                }
                Move::Roll if c.parties[i].1 => {
                    n.parties[0].2 = SessionType::Err;
                    n.parties[1].2 = SessionType::Err;
                    out.push(("TS-Rll2", n));
                }
                Move::Roll => {
                    for k in 0..2 {
                        n.parties[k].2 = n.parties[k].0.clone();
                    }
                    out.push(("TS-Rll1", n));
                }
                Move::Abt => out.push(("TS-Abt1", Cfg::initial(&c.init[0], &c.init[1]))),
            }
        }
    }
    out
}

#[derive(Debug, Default)]
pub struct Enumeration {
    pub states: BTreeMap<String, Cfg>,
    pub terminals: BTreeSet<String>,
}

impl Enumeration {
    pub fn violating(&self) -> BTreeSet<String> {
        self.terminals.iter().filter(|k| !self.states[*k].completed()).cloned().collect()
    }
}

fn visit(c: Cfg, acc: &mut Enumeration, limit: usize) -> bool {
    let k = c.key();
    if acc.states.contains_key(&k) {
        return true;
    }
    if acc.states.len() >= limit {
        return false;
    }
    let next = successors(&c);
    if next.is_empty() {
        acc.terminals.insert(k.clone());
    }
    acc.states.insert(k, c);
    next.into_iter().all(|(_, n)| visit(n, acc, limit))
}

/// All configurations reachable from `init(a,b)`, or `None` past `limit` states.
pub fn enumerate(a: &SessionType, b: &SessionType, limit: usize) -> Option<Enumeration> {
    let mut acc = Enumeration::default();
    visit(Cfg::initial(&a.canonical(), &b.canonical()), &mut acc, limit).then_some(acc)
}

/// Key of a library configuration in the same format as [`Cfg::key`].
pub fn key_of(c: &cherry_core::compliance::TypeConfiguration) -> String {
    let p = &c.parties;
    Cfg {
        init: [c.init[0].clone(), c.init[1].clone()],
        parties: [
            (p[0].checkpoint.ty.clone(), p[0].checkpoint.imposed, p[0].current.clone()),
            (p[1].checkpoint.ty.clone(), p[1].checkpoint.imposed, p[1].current.clone()),
        ],
    }
    .key()
}
