use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use super::actions::{barbs, enabled_actions, may_escape, Action, ActionLabel, Barb};
use super::oracle::{DecisionOracle, EvalError};
use crate::canon::process_equivalent;
use crate::syntax::{substitute, Chan, Checkpoint, Collab, Endpoint, Name, NameRef, Process, Replacement, SessionName, Side, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ErrorKind {
    RollError,
    ComError,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorKind::RollError => "roll_error",
            ErrorKind::ComError => "com_error",
        })
    }
}

/// Collaboration-level reduction label. Session names refer to the source state.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ReductionLabel {
    Con { session: SessionName, channel: Name },
    Com { session: SessionName, value: Value },
    Lab { session: SessionName, label: Name },
    Cmt { session: SessionName },
    If { session: SessionName, branch: bool },
    Rll { session: SessionName },
    Abt { session: SessionName },
    Error { session: SessionName, kind: ErrorKind, rule: &'static str },
}

impl ReductionLabel {
    pub fn session(&self) -> SessionName {
        match self {
            ReductionLabel::Con { session, .. }
            | ReductionLabel::Com { session, .. }
            | ReductionLabel::Lab { session, .. }
            | ReductionLabel::Cmt { session }
            | ReductionLabel::If { session, .. }
            | ReductionLabel::Rll { session }
            | ReductionLabel::Abt { session }
            | ReductionLabel::Error { session, .. } => *session,
        }
    }

    /// Forward steps, including error hits.
    pub fn is_forward(&self) -> bool {
        !matches!(self, ReductionLabel::Rll { .. } | ReductionLabel::Abt { .. })
    }
}

impl fmt::Display for ReductionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReductionLabel::Con { session, channel } => write!(f, "fcon(s{}, {channel})", session.0),
            ReductionLabel::Com { session, value } => write!(f, "fcom(s{}, {value})", session.0),
            ReductionLabel::Lab { session, label } => write!(f, "flab(s{}, {label})", session.0),
            ReductionLabel::Cmt { session } => write!(f, "fcmt(s{})", session.0),
            ReductionLabel::If { session, branch } => {
                write!(f, "fif(s{}, {})", session.0, if *branch { "then" } else { "else" })
            }
            ReductionLabel::Rll { session } => write!(f, "brll(s{})", session.0),
            ReductionLabel::Abt { session } => write!(f, "babt(s{})", session.0),
            ReductionLabel::Error { session, kind, rule } => write!(f, "err(s{}, {kind}, {rule})", session.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Mode {
    /// Forward and backward rules only; imposed flags are tracked but not read.
    Plain,
    /// Error-detecting rules: communication errors and rollbacks to imposed checkpoints.
    #[default]
    Detect,
}

#[derive(Clone, Debug)]
pub struct Step {
    pub label: ReductionLabel,
    pub next: Collab,
    /// Oracle state after the step's decisions.
    pub oracle: DecisionOracle,
}

/// One-step successors; `failures` lists candidates dropped because evaluation failed.
#[derive(Clone, Debug, Default)]
pub struct Successors {
    pub steps: Vec<Step>,
    pub failures: Vec<EvalError>,
}

/// A reduction relation over collaborations.
pub trait Semantics {
    fn steps(&self, c: &Collab, oracle: &DecisionOracle) -> Successors;
}

/// The binary calculus in the given mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Binary(pub Mode);

impl Semantics for Binary {
    fn steps(&self, c: &Collab, oracle: &DecisionOracle) -> Successors {
        reduction_steps(c, oracle, self.0)
    }
}

/// Effect of a step on one session.
pub(crate) enum Outcome {
    Body(Collab),
    Restore,
    Fail(ErrorKind),
}

pub(crate) struct SessionStep {
    pub label: ReductionLabel,
    pub outcome: Outcome,
    pub oracle: DecisionOracle,
}

/// All one-step successors of `c`: connections first, then session steps in component order.
pub fn reduction_steps(c: &Collab, oracle: &DecisionOracle, mode: Mode) -> Successors {
    let comps: Vec<Collab> = c.clone().into_components();
    let fresh = SessionName(c.max_session() + 1);
    let mut out = Successors::default();
    for (i, req) in comps.iter().enumerate() {
        let Collab::Request { chan, arity: None, var: x, body: p } = req else { continue };
        for (j, acc) in comps.iter().enumerate() {
            let Collab::Accept { chan: chan2, role: None, var: y, body: q } = acc else { continue };
            if chan != chan2 {
                continue;
            }
            let plus = Endpoint { session: fresh, side: Side::Plus };
            let minus = Endpoint { session: fresh, side: Side::Minus };
            let p1 = bind_endpoint(p, x, plus);
            let q1 = bind_endpoint(q, y, minus);
            let session = Collab::Session {
                name: fresh,
                saved: Box::new(Collab::Par(Box::new(req.clone()), Box::new(acc.clone()))),
                body: Box::new(Collab::Par(Box::new(fresh_log(plus, p1)), Box::new(fresh_log(minus, q1)))),
            };
            let mut next = comps.clone();
            next[i] = session;
            next.remove(j);
            out.steps.push(Step {
                label: ReductionLabel::Con { session: fresh, channel: chan.clone() },
                next: Collab::par_all(next),
                oracle: oracle.clone(),
            });
        }
    }
    for (k, comp) in comps.iter().enumerate() {
        let Collab::Session { name, body, .. } = comp else { continue };
        let (steps, failures) = session_steps(*name, body, oracle, mode);
        out.failures.extend(failures);
        for s in steps {
            out.steps.push(Step { label: s.label, next: apply_outcome(&comps, k, s.outcome), oracle: s.oracle });
        }
    }
    dedup(&mut out.steps);
    out
}

pub(crate) fn bind_endpoint(p: &Process, x: &Name, e: Endpoint) -> Process {
    substitute(p, &NameRef::Var(x.clone()), &Replacement::Chan(e)).expect("channel substitution")
}

pub(crate) fn fresh_log(e: Endpoint, p: Process) -> Collab {
    Collab::Log { endpoint: e, checkpoint: Checkpoint { process: p.clone(), imposed: false }, current: p }
}

pub(crate) fn apply_outcome(comps: &[Collab], k: usize, outcome: Outcome) -> Collab {
    let Collab::Session { name, saved, .. } = &comps[k] else { unreachable!() };
    let mut next: Vec<Collab> = Vec::with_capacity(comps.len() + 1);
    next.extend_from_slice(&comps[..k]);
    match outcome {
        Outcome::Body(body) => next.push(Collab::Session { name: *name, saved: saved.clone(), body: Box::new(body) }),
        Outcome::Restore => next.extend((**saved).clone().into_components()),
        Outcome::Fail(kind) => next.push(Collab::Session {
            name: *name,
            saved: saved.clone(),
            body: Box::new(match kind {
                ErrorKind::RollError => Collab::RollError,
                ErrorKind::ComError => Collab::ComError,
            }),
        }),
    }
    next.extend_from_slice(&comps[k + 1..]);
    Collab::par_all(next)
}

pub(crate) fn dedup(steps: &mut Vec<Step>) {
    let mut seen = BTreeSet::new();
    steps.retain(|s| seen.insert((s.label.clone(), s.next.clone())));
}

/// Log entries of a session body, or `None` once the body is an error term.
pub(crate) fn logs(body: &Collab) -> Option<Vec<(Endpoint, Checkpoint, Process)>> {
    body.components()
        .into_iter()
        .map(|c| match c {
            Collab::Log { endpoint, checkpoint, current } => Some((*endpoint, checkpoint.clone(), current.clone())),
            _ => None,
        })
        .collect()
}

pub(crate) fn logs_to_body(logs: Vec<(Endpoint, Checkpoint, Process)>) -> Collab {
    Collab::par_all(
        logs.into_iter()
            .map(|(endpoint, checkpoint, current)| Collab::Log { endpoint, checkpoint, current })
            .collect(),
    )
}

/// Checkpoint update on a commit by party `i`: the committer's checkpoint becomes its
/// continuation; every partner whose current differs from its checkpoint gets it imposed.
pub(crate) fn commit_logs(
    logs: &[(Endpoint, Checkpoint, Process)],
    i: usize,
    cont: &Process,
) -> Vec<(Endpoint, Checkpoint, Process)> {
    logs.iter()
        .enumerate()
        .map(|(j, (e, ck, cur))| {
            if j == i {
                (*e, Checkpoint { process: cont.clone(), imposed: false }, cont.clone())
            } else if process_equivalent(&ck.process, cur) {
                (*e, ck.clone(), cur.clone())
            } else {
                (*e, Checkpoint { process: cur.clone(), imposed: true }, cur.clone())
            }
        })
        .collect()
}

pub(crate) fn restored(logs: &[(Endpoint, Checkpoint, Process)]) -> Collab {
    logs_to_body(logs.iter().map(|(e, ck, _)| (*e, ck.clone(), ck.process.clone())).collect())
}

fn on(chan: &Chan, e: Endpoint) -> bool {
    *chan == Chan::End(e)
}

fn session_steps(
    name: SessionName,
    body: &Collab,
    oracle: &DecisionOracle,
    mode: Mode,
) -> (Vec<SessionStep>, Vec<EvalError>) {
    let mut out = Vec::new();
    let mut failures = Vec::new();
    let Some(logs) = logs(body) else { return (out, failures) };
    if logs.len() != 2 {
        return (out, failures);
    }
    let mut acts: Vec<Vec<Action>> = Vec::new();
    for (_, _, cur) in &logs {
        match enabled_actions(cur, oracle) {
            Ok(a) => acts.push(a),
            Err(e) => {
                failures.push(e);
                acts.push(Vec::new());
            }
        }
    }
    let detect = mode == Mode::Detect;
    let bs: Vec<BTreeSet<Barb>> = if detect { logs.iter().map(|(_, _, p)| barbs(p)).collect() } else { Vec::new() };
    for i in 0..2 {
        let j = 1 - i;
        let (ei, ej) = (logs[i].0, logs[j].0);
        let with = |ps: [(usize, Process); 2]| {
            let mut l = logs.clone();
            for (k, p) in ps {
                l[k].2 = p;
            }
            logs_to_body(l)
        };
        let mut errored = false;
        let mut error = |out: &mut Vec<SessionStep>, rule: &'static str, o: &DecisionOracle| {
            if !errored {
                errored = true;
                out.push(SessionStep {
                    label: ReductionLabel::Error { session: name, kind: ErrorKind::ComError, rule },
                    outcome: Outcome::Fail(ErrorKind::ComError),
                    oracle: o.clone(),
                });
            }
        };
        for a in &acts[i] {
            match &a.label {
                ActionLabel::Out { chan, value, .. } if on(chan, ei) => {
                    for b in &acts[j] {
                        if let ActionLabel::In { chan: c2, var, .. } = &b.label {
                            if on(c2, ej) {
                                let received = substitute(&b.cont, &NameRef::Var(var.clone()), &Replacement::Value(value.clone()))
                                    .expect("value substitution");
                                out.push(SessionStep {
                                    label: ReductionLabel::Com { session: name, value: value.clone() },
                                    outcome: Outcome::Body(with([(i, a.cont.clone()), (j, received)])),
                                    oracle: a.oracle.clone(),
                                });
                            }
                        }
                    }
                    if detect && !bs[j].contains(&Barb::In(Chan::End(ej), None)) && !may_escape(&bs[j]) {
                        error(&mut out, "E-Com1", &a.oracle);
                    }
                }
                ActionLabel::In { chan, .. } if on(chan, ei) => {
                    if detect && !bs[j].contains(&Barb::Out(Chan::End(ej), None)) && !may_escape(&bs[j]) {
                        error(&mut out, "E-Com2", &a.oracle);
                    }
                }
                ActionLabel::Sel { chan, label, .. } if on(chan, ei) => {
                    for b in &acts[j] {
                        if matches!(&b.label, ActionLabel::Brn { chan: c2, label: l2, .. } if on(c2, ej) && l2 == label) {
                            out.push(SessionStep {
                                label: ReductionLabel::Lab { session: name, label: label.clone() },
                                outcome: Outcome::Body(with([(i, a.cont.clone()), (j, b.cont.clone())])),
                                oracle: a.oracle.clone(),
                            });
                        }
                    }
                    if detect && !bs[j].contains(&Barb::Brn(Chan::End(ej), None, label.clone())) && !may_escape(&bs[j]) {
                        error(&mut out, "E-Lab1", &a.oracle);
                    }
                }
                ActionLabel::Brn { chan, .. } if on(chan, ei) => {
                    // The branching party fails only if none of its labels can be selected.
                    if detect {
                        let offered = acts[i].iter().any(|x| {
                            matches!(&x.label, ActionLabel::Brn { label, .. } if bs[j].contains(&Barb::Sel(Chan::End(ej), None, label.clone())))
                        });
                        if !offered && !may_escape(&bs[j]) {
                            error(&mut out, "E-Lab2", &a.oracle);
                        }
                    }
                }
                ActionLabel::Tau { branch } => out.push(SessionStep {
                    label: ReductionLabel::If { session: name, branch: *branch },
                    outcome: Outcome::Body(with([(i, a.cont.clone()), (j, logs[j].2.clone())])),
                    oracle: a.oracle.clone(),
                }),
                ActionLabel::Cmt => out.push(SessionStep {
                    label: ReductionLabel::Cmt { session: name },
                    outcome: Outcome::Body(logs_to_body(commit_logs(&logs, i, &a.cont))),
                    oracle: a.oracle.clone(),
                }),
                ActionLabel::Roll => {
                    if detect && logs[i].1.imposed {
                        out.push(SessionStep {
                            label: ReductionLabel::Error { session: name, kind: ErrorKind::RollError, rule: "E-Rll2" },
                            outcome: Outcome::Fail(ErrorKind::RollError),
                            oracle: a.oracle.clone(),
                        });
                    } else {
                        out.push(SessionStep {
                            label: ReductionLabel::Rll { session: name },
                            outcome: Outcome::Body(restored(&logs)),
                            oracle: a.oracle.clone(),
                        });
                    }
                }
                ActionLabel::Abt => out.push(SessionStep {
                    label: ReductionLabel::Abt { session: name },
                    outcome: Outcome::Restore,
                    oracle: a.oracle.clone(),
                }),
                // Actions on a channel other than the own endpoint cannot fire.
                _ => {}
            }
        }
    }
    (out, failures)
}
