use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use super::oracle::{eval_pure, evaluate_all, DecisionOracle, EvalError};
use crate::syntax::{unfold_recursion, Chan, Name, Process, Role, Value};

/// Bound on nested unfoldings while looking for a prefix; guarded processes need one.
const UNFOLD_LIMIT: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActionLabel {
    Out { chan: Chan, peer: Option<Role>, value: Value },
    In { chan: Chan, peer: Option<Role>, var: Name },
    Sel { chan: Chan, peer: Option<Role>, label: Name },
    Brn { chan: Chan, peer: Option<Role>, label: Name },
    Tau { branch: bool },
    Cmt,
    Roll,
    Abt,
}

/// One enabled action with its continuation. For `In`, the continuation still has `var` free.
#[derive(Clone, Debug)]
pub struct Action {
    pub label: ActionLabel,
    pub cont: Process,
    pub oracle: DecisionOracle,
}

/// Actions enabled at the top of `p`. Oracle calls in guards and payloads are resolved here,
/// one action per outcome.
pub fn enabled_actions(p: &Process, oracle: &DecisionOracle) -> Result<Vec<Action>, EvalError> {
    let mut p = p.clone();
    for _ in 0..UNFOLD_LIMIT {
        if let Process::Rec { .. } = p {
            p = unfold_recursion(&p).expect("recursion");
        } else {
            break;
        }
    }
    let act = |label, cont: &Process| Action { label, cont: cont.clone(), oracle: oracle.clone() };
    Ok(match &p {
        Process::Send { chan, peer, expr, cont } => evaluate_all(expr, oracle)?
            .into_iter()
            .map(|(value, o)| Action {
                label: ActionLabel::Out { chan: chan.clone(), peer: *peer, value },
                cont: (**cont).clone(),
                oracle: o,
            })
            .collect(),
        Process::Recv { chan, peer, var, cont, .. } => {
            vec![act(ActionLabel::In { chan: chan.clone(), peer: *peer, var: var.clone() }, cont)]
        }
        Process::Select { chan, peer, label, cont } => {
            vec![act(ActionLabel::Sel { chan: chan.clone(), peer: *peer, label: label.clone() }, cont)]
        }
        Process::Branch { chan, peer, arms } => arms
            .iter()
            .map(|(l, q)| act(ActionLabel::Brn { chan: chan.clone(), peer: *peer, label: l.clone() }, q))
            .collect(),
        Process::If { cond, then, els } => {
            let mut out = Vec::new();
            for (v, o) in evaluate_all(cond, oracle)? {
                let b = v == Value::Bool(true);
                let cont = if b { then } else { els };
                out.push(Action { label: ActionLabel::Tau { branch: b }, cont: (**cont).clone(), oracle: o });
            }
            out
        }
        Process::Commit(cont) => vec![act(ActionLabel::Cmt, cont)],
        Process::Roll => vec![act(ActionLabel::Roll, &Process::Inact)],
        Process::Abort => vec![act(ActionLabel::Abt, &Process::Inact)],
        Process::Rec { .. } | Process::Var(_) | Process::Inact => Vec::new(),
    })
}

/// Observable capability of a process after internal steps.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Barb {
    Out(Chan, Option<Role>),
    In(Chan, Option<Role>),
    Sel(Chan, Option<Role>, Name),
    Brn(Chan, Option<Role>, Name),
    Roll,
    Abt,
}

/// Weak barbs of `p`: closes over conditionals, recursion and `commit` prefixes. A guard
/// whose value is not statically known contributes both branches.
pub fn barbs(p: &Process) -> BTreeSet<Barb> {
    let mut out = BTreeSet::new();
    let mut seen = BTreeSet::new();
    let mut work = vec![p.clone()];
    while let Some(q) = work.pop() {
        if !seen.insert(q.clone()) {
            continue;
        }
        match q {
            Process::Send { chan, peer, .. } => {
                out.insert(Barb::Out(chan, peer));
            }
            Process::Recv { chan, peer, .. } => {
                out.insert(Barb::In(chan, peer));
            }
            Process::Select { chan, peer, label, .. } => {
                out.insert(Barb::Sel(chan, peer, label));
            }
            Process::Branch { chan, peer, arms } => {
                for (l, _) in arms {
                    out.insert(Barb::Brn(chan.clone(), peer, l));
                }
            }
            Process::If { cond, then, els } => match eval_pure(&cond) {
                Some(Value::Bool(true)) => work.push(*then),
                Some(Value::Bool(false)) => work.push(*els),
                _ => {
                    work.push(*then);
                    work.push(*els);
                }
            },
            Process::Rec { .. } => {
                if seen.len() < UNFOLD_LIMIT * 16 {
                    work.push(unfold_recursion(&q).expect("recursion"));
                }
            }
            Process::Commit(cont) => work.push(*cont),
            Process::Roll => {
                out.insert(Barb::Roll);
            }
            Process::Abort => {
                out.insert(Barb::Abt);
            }
            Process::Var(_) | Process::Inact => {}
        }
    }
    out
}

/// Whether the process may reach `roll` or `abort` before communicating.
pub fn may_escape(b: &BTreeSet<Barb>) -> bool {
    b.contains(&Barb::Roll) || b.contains(&Barb::Abt)
}
