//! Seeded random generators for session types and programs.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::compliance::check_rollback_safety;
use crate::parser::{FnSig, Program, Signatures};
use crate::syntax::{name, Chan, Collab, Expr, Name, Op, Process, Sort, Value};
use crate::types::SessionType;

fn below(rng: &mut dyn RngCore, n: u64) -> u64 {
    rng.next_u64() % n
}

fn chance(rng: &mut dyn RngCore, percent: u64) -> bool {
    below(rng, 100) < percent
}

const SORTS: [Sort; 3] = [Sort::Bool, Sort::Int, Sort::Str];
const LABELS: [&str; 3] = ["l", "m", "n"];

/// A closed, guarded session type of depth at most `depth`.
pub fn random_type(rng: &mut dyn RngCore, depth: usize) -> SessionType {
    ty(rng, depth.max(1), &mut Vec::new(), false)
}

// `guarded`: a prefix has been emitted since the innermost `mu`.
fn ty(rng: &mut dyn RngCore, depth: usize, vars: &mut Vec<Name>, guarded: bool) -> SessionType {
    let leaf = |rng: &mut dyn RngCore, vars: &Vec<Name>| match below(rng, 4) {
        0 => SessionType::Roll,
        1 => SessionType::Abt,
        2 if guarded && !vars.is_empty() => SessionType::Var(vars[below(rng, vars.len() as u64) as usize].clone()),
        _ => SessionType::End,
    };
    if depth <= 1 {
        return if guarded || vars.is_empty() { leaf(rng, vars) } else { SessionType::End };
    }
    let d = depth - 1;
    let sort = SORTS[below(rng, 3) as usize];
    match below(rng, 9) {
        0 => SessionType::out(sort, ty(rng, d, vars, true)),
        1 => SessionType::inp(sort, ty(rng, d, vars, true)),
        2 => SessionType::sel(LABELS[below(rng, 3) as usize], ty(rng, d, vars, true)),
        3 => {
            let k = 1 + below(rng, 2) as usize;
            SessionType::Brn { roles: None, arms: (0..k).map(|i| (name(LABELS[i]), ty(rng, d, vars, true))).collect() }
        }
        4 => SessionType::choice(ty(rng, d, vars, guarded), ty(rng, d, vars, guarded)),
        5 => SessionType::cmt(ty(rng, d, vars, true)),
        6 => {
            let v = name(&format!("t{}", vars.len()));
            vars.push(v.clone());
            let body = ty(rng, d, vars, false);
            vars.pop();
            if body.free_vars().contains(&v) {
                SessionType::Mu(v, Box::new(body))
            } else {
                body
            }
        }
        _ => leaf(rng, vars),
    }
}

/// A random expression of the given sort over the variables in scope.
pub fn random_expr(rng: &mut dyn RngCore, sort: Sort, depth: usize, scope: &[(Name, Sort)], fns: &Signatures) -> Expr {
    let vars: Vec<&Name> = scope.iter().filter(|(_, s)| *s == sort).map(|(x, _)| x).collect();
    if depth == 0 || chance(rng, 40) {
        if !vars.is_empty() && chance(rng, 50) {
            return Expr::Var(vars[below(rng, vars.len() as u64) as usize].clone());
        }
        let nullary: Vec<&Name> = fns.iter().filter(|(_, s)| s.result == sort && s.args.is_empty()).map(|(f, _)| f).collect();
        if !nullary.is_empty() && chance(rng, 30) {
            return Expr::Call(nullary[below(rng, nullary.len() as u64) as usize].clone(), Vec::new());
        }
        return Expr::Lit(match sort {
            Sort::Bool => Value::Bool(chance(rng, 50)),
            Sort::Int => Value::Int(below(rng, 7) as i64 - 2),
            Sort::Str => Value::Str(name(["", "a", "hd", "q\"x"][below(rng, 4) as usize])),
        });
    }
    let d = depth - 1;
    let mut e = |s| random_expr(rng, s, d, scope, fns);
    match sort {
        Sort::Int => Expr::Op(Op::Add, vec![e(Sort::Int), e(Sort::Int)]),
        Sort::Str => Expr::Op(Op::Concat, vec![e(Sort::Str), e(Sort::Str)]),
        Sort::Bool => match below(rng, 5) {
            0 => Expr::Op(Op::And, vec![random_expr(rng, Sort::Bool, d, scope, fns), random_expr(rng, Sort::Bool, d, scope, fns)]),
            1 => Expr::Op(Op::Or, vec![random_expr(rng, Sort::Bool, d, scope, fns), random_expr(rng, Sort::Bool, d, scope, fns)]),
            2 => Expr::Op(Op::Not, vec![random_expr(rng, Sort::Bool, d, scope, fns)]),
            3 => Expr::Op(Op::Lt, vec![random_expr(rng, Sort::Int, d, scope, fns), random_expr(rng, Sort::Int, d, scope, fns)]),
            _ => {
                let s = SORTS[below(rng, 3) as usize];
                Expr::Op(Op::Eq, vec![random_expr(rng, s, d, scope, fns), random_expr(rng, s, d, scope, fns)])
            }
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenConfig {
    /// Maximum protocol depth (prefixes per branch).
    pub depth: usize,
    /// Number of nullary boolean functions `b0, b1, …`.
    pub functions: usize,
    /// Allow a top-level loop.
    pub loops: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { depth: 4, functions: 2, loops: true }
    }
}

fn signatures(cfg: &GenConfig) -> Signatures {
    (0..cfg.functions.max(1))
        .map(|k| (name(&format!("b{k}")), FnSig { args: Vec::new(), result: Sort::Bool, domain: None }))
        .collect()
}

struct Pair<'a> {
    rng: &'a mut dyn RngCore,
    fns: usize,
    recv: usize,
}

impl Pair<'_> {
    fn guard(&mut self) -> Expr {
        Expr::Call(name(&format!("b{}", below(self.rng, self.fns as u64))), Vec::new())
    }

    fn fresh(&mut self) -> Name {
        self.recv += 1;
        name(&format!("v{}", self.recv))
    }

    /// Dual processes for the requester (`x`) and acceptor (`y`). `lp` is the loop variable.
    fn protocol(&mut self, depth: usize, lp: Option<&Name>) -> (Process, Process) {
        let x = Chan::Var(name("x"));
        let y = Chan::Var(name("y"));
        if depth == 0 {
            return match (lp, below(self.rng, 6)) {
                (Some(v), 0..=3) => (Process::Var(v.clone()), Process::Var(v.clone())),
                (_, 4) => (Process::Roll, Process::Inact),
                (_, 5) if chance(self.rng, 50) => (Process::Inact, Process::Abort),
                _ => (Process::Inact, Process::Inact),
            };
        }
        let d = depth - 1;
        // Direction: true when the requester leads.
        let lead = chance(self.rng, 50);
        let orient = |a: Process, b: Process| if lead { (a, b) } else { (b, a) };
        let (sender, receiver) = if lead { (x.clone(), y.clone()) } else { (y.clone(), x.clone()) };
        match below(self.rng, 10) {
            0..=2 => {
                let (p, q) = self.protocol(d, lp);
                let (pa, pb) = if lead { (p, q) } else { (q, p) };
                let sort = SORTS[below(self.rng, 3) as usize];
                let v = self.fresh();
                let e = random_expr(self.rng, sort, 1, &[], &BTreeMap::new());
                let s = Process::Send { chan: sender, peer: None, expr: e, cont: Box::new(pa) };
                let r = Process::Recv { chan: receiver, peer: None, var: v, sort, cont: Box::new(pb) };
                orient(s, r)
            }
            3..=4 => {
                let (p1, q1) = self.protocol(d, lp);
                let (p2, q2) = self.protocol(d, lp);
                let ((a1, b1), (a2, b2)) = if lead { ((p1, q1), (p2, q2)) } else { ((q1, p1), (q2, p2)) };
                let sel = Process::If {
                    cond: self.guard(),
                    then: Box::new(Process::Select { chan: sender.clone(), peer: None, label: name("l"), cont: Box::new(a1) }),
                    els: Box::new(Process::Select { chan: sender, peer: None, label: name("m"), cont: Box::new(a2) }),
                };
                let brn = Process::Branch { chan: receiver, peer: None, arms: vec![(name("l"), b1), (name("m"), b2)] };
                orient(sel, brn)
            }
            5..=6 => {
                let (p, q) = self.protocol(d, lp);
                if lead {
                    (Process::Commit(Box::new(p)), q)
                } else {
                    (p, Process::Commit(Box::new(q)))
                }
            }
            7 => {
                // Escape on one side: the partner must be able to roll too.
                let (p, q) = self.protocol(d, lp);
                let g = self.guard();
                let esc = if chance(self.rng, 70) { Process::Roll } else { Process::Abort };
                let wrap = |r: Process| Process::If { cond: g, then: Box::new(esc), els: Box::new(r) };
                if lead {
                    (wrap(p), q)
                } else {
                    (p, wrap(q))
                }
            }
            _ => self.protocol(d, lp),
        }
    }
}

fn pair_program(rng: &mut dyn RngCore, cfg: &GenConfig, chan: &str) -> (Collab, Collab) {
    let mut g = Pair { rng, fns: cfg.functions.max(1), recv: 0 };
    let looped = cfg.loops && chance(g.rng, 35);
    let lp = name("X");
    let (mut p, mut q) = g.protocol(cfg.depth, looped.then_some(&lp));
    if looped {
        p = Process::Rec { var: lp.clone(), body: Box::new(p) };
        q = Process::Rec { var: lp, body: Box::new(q) };
    }
    (
        Collab::Request { chan: name(chan), arity: None, var: name("x"), body: p },
        Collab::Accept { chan: name(chan), role: None, var: name("y"), body: q },
    )
}

fn well_formed(p: &Program) -> bool {
    p.main.components().iter().all(|c| match c {
        Collab::Request { body, .. } | Collab::Accept { body, .. } => crate::syntax::is_guarded(body) && crate::syntax::free_proc_vars(body).is_empty(),
        _ => true,
    })
}

/// One requester/acceptor pair on channel `a`, built from a dual protocol skeleton.
pub fn random_program(rng: &mut dyn RngCore, cfg: &GenConfig) -> Program {
    loop {
        let (r, a) = pair_program(rng, cfg, "a");
        let p = Program { signatures: signatures(cfg), main: Collab::Par(Box::new(r), Box::new(a)) };
        if well_formed(&p) {
            return p;
        }
    }
}

/// Two independent pairs on channels `a` and `b`.
pub fn random_multi_session_program(rng: &mut dyn RngCore, cfg: &GenConfig) -> Program {
    loop {
        let (r1, a1) = pair_program(rng, cfg, "a");
        let (r2, a2) = pair_program(rng, cfg, "b");
        let p = Program { signatures: signatures(cfg), main: Collab::par_all(vec![r1, a1, r2, a2]) };
        if well_formed(&p) {
            return p;
        }
    }
}

/// Random local edits that typically break duality: dropped prefixes, flipped labels,
/// inserted commits and rollbacks.
pub fn perturb(rng: &mut dyn RngCore, p: &Program) -> Program {
    let mut comps = p.main.clone().into_components();
    let k = below(rng, comps.len() as u64) as usize;
    if let Collab::Request { body, .. } | Collab::Accept { body, .. } = &mut comps[k] {
        let edits = 1 + below(rng, 2);
        for _ in 0..edits {
            *body = mutate(rng, body);
        }
    }
    let out = Program { signatures: p.signatures.clone(), main: Collab::par_all(comps) };
    if well_formed(&out) {
        out
    } else {
        p.clone()
    }
}

fn mutate(rng: &mut dyn RngCore, p: &Process) -> Process {
    let here = chance(rng, 30);
    match p {
        Process::Send { cont, .. } | Process::Recv { cont, .. } | Process::Select { cont, .. } if here => match below(rng, 3) {
            0 => (**cont).clone(),
            1 => Process::Commit(Box::new(p.clone())),
            _ => Process::Roll,
        },
        Process::Select { chan, peer, label, cont } if chance(rng, 30) => Process::Select {
            chan: chan.clone(),
            peer: *peer,
            label: if &**label == "l" { name("m") } else { name("l") },
            cont: cont.clone(),
        },
        Process::Send { chan, peer, expr, cont } => {
            Process::Send { chan: chan.clone(), peer: *peer, expr: expr.clone(), cont: Box::new(mutate(rng, cont)) }
        }
        Process::Recv { chan, peer, var, sort, cont } => {
            Process::Recv { chan: chan.clone(), peer: *peer, var: var.clone(), sort: *sort, cont: Box::new(mutate(rng, cont)) }
        }
        Process::Select { chan, peer, label, cont } => {
            Process::Select { chan: chan.clone(), peer: *peer, label: label.clone(), cont: Box::new(mutate(rng, cont)) }
        }
        Process::Branch { chan, peer, arms } => {
            let k = below(rng, arms.len().max(1) as u64) as usize;
            Process::Branch {
                chan: chan.clone(),
                peer: *peer,
                arms: arms.iter().enumerate().map(|(i, (l, q))| (l.clone(), if i == k { mutate(rng, q) } else { q.clone() })).collect(),
            }
        }
        Process::If { cond, then, els } => {
            if chance(rng, 50) {
                Process::If { cond: cond.clone(), then: Box::new(mutate(rng, then)), els: els.clone() }
            } else {
                Process::If { cond: cond.clone(), then: then.clone(), els: Box::new(mutate(rng, els)) }
            }
        }
        Process::Rec { var, body } => Process::Rec { var: var.clone(), body: Box::new(mutate(rng, body)) },
        Process::Commit(c) if here => (**c).clone(),
        Process::Commit(c) => Process::Commit(Box::new(mutate(rng, c))),
        Process::Inact if here => Process::Commit(Box::new(Process::Roll)),
        _ => p.clone(),
    }
}

/// The first `count` generated programs that pass the rollback-safety check.
pub fn roll_safe_programs(seed: u64, count: usize, cfg: &GenConfig) -> Vec<Program> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < count && attempts < count * 200 {
        attempts += 1;
        let p = random_program(&mut rng, cfg);
        if check_rollback_safety(&p.main, &p.signatures, 100_000).is_ok_and(|r| r.safe) {
            out.push(p);
        }
    }
    out
}

/// `count` programs with no safety filter: half plain, half perturbed.
pub fn arbitrary_programs(seed: u64, count: usize, cfg: &GenConfig) -> Vec<Program> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let p = random_program(&mut rng, cfg);
            if k % 2 == 1 {
                perturb(&mut rng, &p)
            } else {
                p
            }
        })
        .collect()
}
