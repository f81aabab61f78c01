//! n-party sessions: role-filled types, configuration semantics, compliance and reductions.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::compliance::{
    explore_configs, CheckpointType, ComplianceError, ComplianceReport, ConfigStep, GroupReport, Party, SafetyReport, TypeConfiguration,
    TypeLabel, TransitionSystem,
};
use crate::parser::Signatures;
use crate::runtime::actions::{barbs, enabled_actions, may_escape, Action, ActionLabel, Barb};
use crate::runtime::oracle::{DecisionOracle, EvalError};
use crate::runtime::reduce::{
    apply_outcome, bind_endpoint, commit_logs, dedup, fresh_log, logs, logs_to_body, restored, ErrorKind, Mode, Outcome,
    ReductionLabel, Semantics, SessionStep, Step, Successors,
};
use crate::syntax::{substitute, Chan, Collab, Endpoint, NameRef, Process, Replacement, Role, SessionName, Side};
use crate::types::{RoleRef, Roles, SessionType};
use crate::typing::{infer_collaboration, ChannelRole, TypeAssociations, TypeError};

/// `T·p`: replaces every placeholder with `p`.
pub fn fill_roles(t: &SessionType, p: Role) -> SessionType {
    t.map_roles(&|r| r.map(|r| if r.from == RoleRef::Hole { Roles { from: RoleRef::Role(p), to: r.to } } else { r }))
}

/// Own role of an initiator: the arity for requesters.
pub fn initiator_role(role: ChannelRole) -> Option<Role> {
    match role {
        ChannelRole::Requester(n) | ChannelRole::Acceptor(n) => n,
    }
}

fn peers(t: &SessionType, out: &mut BTreeSet<Option<Role>>) {
    match t {
        SessionType::Out { roles, cont, .. } | SessionType::In { roles, cont, .. } | SessionType::Sel { roles, cont, .. } => {
            out.insert(roles.map(|r| r.to));
            peers(cont, out);
        }
        SessionType::Brn { roles, arms } => {
            out.insert(roles.map(|r| r.to));
            for (_, a) in arms {
                peers(a, out);
            }
        }
        SessionType::Choice(l, r) => {
            peers(l, out);
            peers(r, out);
        }
        SessionType::Mu(_, b) | SessionType::Cmt(b) => peers(b, out),
        _ => {}
    }
}

/// Infers role-indexed associations and checks that each channel has one requester of arity
/// `n` and exactly one acceptor for every role `1..n-1`, with peers in range.
pub fn m_infer_collaboration(c: &Collab, sigs: &Signatures) -> Result<TypeAssociations, TypeError> {
    let assoc = infer_collaboration(c, sigs)?;
    let err = |m: String| Err(TypeError::Multiparty(m));
    for chan in assoc.channels() {
        let reqs: Vec<_> = assoc.requesters(&chan).collect();
        let accs: Vec<_> = assoc.acceptors(&chan).collect();
        let n = match reqs.as_slice() {
            [r] => match r.role {
                ChannelRole::Requester(Some(n)) => n,
                _ => return err(format!("requester on `{chan}` has no arity")),
            },
            [] => return err(format!("no requester on `{chan}`")),
            _ => return err(format!("duplicate role: several requesters on `{chan}`")),
        };
        let mut roles = BTreeSet::new();
        for a in &accs {
            let Some(p) = initiator_role(a.role) else { return err(format!("acceptor on `{chan}` has no role")) };
            if p == 0 || p >= n {
                return err(format!("arity mismatch: role {p} on `{chan}` outside 1..{}", n - 1));
            }
            if !roles.insert(p) {
                return err(format!("duplicate role {p} on `{chan}`"));
            }
        }
        if let Some(p) = (1..n).find(|p| !roles.contains(p)) {
            return err(format!("missing role {p} on `{chan}` (arity {n})"));
        }
        for a in reqs.iter().chain(accs.iter()) {
            let me = initiator_role(a.role).expect("checked above");
            let mut ps = BTreeSet::new();
            peers(&a.ty, &mut ps);
            for q in ps {
                match q {
                    None => return err(format!("role {me} on `{chan}` communicates without a peer")),
                    Some(q) if q == me || q == 0 || q > n => return err(format!("role {me} on `{chan}` addresses invalid peer {q}")),
                    Some(_) => {}
                }
            }
        }
    }
    Ok(assoc)
}

fn party_of(c: &TypeConfiguration, role: Role) -> Option<usize> {
    let k = (role as usize).checked_sub(1)?;
    (k < c.parties.len()).then_some(k)
}

/// Multiparty configuration steps. Party `k` plays role `k + 1`; types are filled.
pub fn m_config_transitions(c: &TypeConfiguration) -> Vec<ConfigStep> {
    let mut out = Vec::new();
    let with = |pairs: &[(usize, &SessionType)]| {
        let mut t = c.clone();
        for (k, ty) in pairs {
            t.parties[*k].current = ty.canonical();
        }
        t
    };
    for i in 0..c.parties.len() {
        let me = (i + 1) as Role;
        let mine = &c.parties[i];
        for (label, next) in crate::compliance::type_transitions(&mine.current) {
            let mut push = |rule, target| out.push(ConfigStep { party: i, rule, label: label.clone(), target });
            match &label {
                TypeLabel::Tau => push("M-TS-Tau", with(&[(i, &next)])),
                TypeLabel::Out(Some(r), s) => {
                    let Some(j) = party_of(c, r.to) else { continue };
                    for (l2, next2) in crate::compliance::type_transitions(&c.parties[j].current) {
                        if matches!(&l2, TypeLabel::In(Some(r2), s2) if s2 == s && r2.to == me) {
                            push("M-TS-Com", with(&[(i, &next), (j, &next2)]));
                        }
                    }
                }
                TypeLabel::Sel(Some(r), l) => {
                    let Some(j) = party_of(c, r.to) else { continue };
                    for (l2, next2) in crate::compliance::type_transitions(&c.parties[j].current) {
                        if matches!(&l2, TypeLabel::Brn(Some(r2), k) if k == l && r2.to == me) {
                            push("M-TS-Lab", with(&[(i, &next), (j, &next2)]));
                        }
                    }
                }
                TypeLabel::Out(None, _) | TypeLabel::Sel(None, _) | TypeLabel::In(..) | TypeLabel::Brn(..) => {}
                TypeLabel::Cmt => {
                    let next = next.canonical();
                    let mut t = c.clone();
                    for (h, p) in t.parties.iter_mut().enumerate() {
                        if h == i {
                            *p = Party { checkpoint: CheckpointType { ty: next.clone(), imposed: false }, current: next.clone() };
                        } else if p.checkpoint.ty != p.current {
                            p.checkpoint = CheckpointType { ty: p.current.clone(), imposed: true };
                        }
                    }
                    push("M-TS-Cmt", t);
                }
                TypeLabel::Roll => {
                    let mut t = c.clone();
                    if mine.checkpoint.imposed {
                        for p in &mut t.parties {
                            p.current = SessionType::Err;
                        }
                        push("M-TS-Rll2", t);
                    } else {
                        for p in &mut t.parties {
                            p.current = p.checkpoint.ty.clone();
                        }
                        push("M-TS-Rll", t);
                    }
                }
                TypeLabel::Abt => push("M-TS-Abt", TypeConfiguration::initial(&c.init)),
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

pub fn m_reachable_system(c0: &TypeConfiguration, budget: usize) -> Result<TransitionSystem, ComplianceError> {
    explore_configs(c0, budget, &m_config_transitions)
}

/// Compliance of filled types, `types[k]` playing role `k + 1`.
pub fn m_check_compliance(types: &[SessionType], budget: usize) -> Result<ComplianceReport, ComplianceError> {
    let ts = m_reachable_system(&TypeConfiguration::initial(types), budget)?;
    Ok(ComplianceReport::of(&ts))
}

pub fn m_check_rollback_safety(c: &Collab, sigs: &Signatures, budget: usize) -> Result<SafetyReport, ComplianceError> {
    let assoc = match m_infer_collaboration(c, sigs) {
        Ok(a) => a,
        Err(e) => {
            return Ok(SafetyReport { safe: false, associations: TypeAssociations::default(), groups: Vec::new(), diagnostics: vec![format!("{e}")] })
        }
    };
    let mut groups = Vec::new();
    for chan in assoc.channels() {
        let mut members: Vec<(Role, usize)> = assoc
            .0
            .iter()
            .enumerate()
            .filter(|(_, a)| a.channel == chan)
            .map(|(k, a)| (initiator_role(a.role).expect("validated"), k))
            .collect();
        members.sort();
        let types: Vec<SessionType> = members.iter().map(|&(r, k)| fill_roles(&assoc.0[k].ty, r)).collect();
        let report = m_check_compliance(&types, budget)?;
        groups.push(GroupReport { channel: chan.clone(), members: members.iter().map(|&(_, k)| k).collect(), types, report });
    }
    let safe = groups.iter().all(|g| g.report.is_compliant());
    Ok(SafetyReport { safe, associations: assoc, groups, diagnostics: Vec::new() })
}

/// The multiparty calculus in the given mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Multiparty(pub Mode);

impl Semantics for Multiparty {
    fn steps(&self, c: &Collab, oracle: &DecisionOracle) -> Successors {
        m_reduction_steps(c, oracle, self.0)
    }
}

/// Connections need every role present; session steps generalize the binary rules to `n` logs.
pub fn m_reduction_steps(c: &Collab, oracle: &DecisionOracle, mode: Mode) -> Successors {
    let comps: Vec<Collab> = c.clone().into_components();
    let fresh = SessionName(c.max_session() + 1);
    let mut out = Successors::default();
    for (i, req) in comps.iter().enumerate() {
        let Collab::Request { chan, arity: Some(n), .. } = req else { continue };
        let n = *n;
        // Candidate acceptor positions per role 1..n-1.
        let per_role: Vec<Vec<usize>> = (1..n)
            .map(|p| {
                comps.iter().enumerate().filter(|(_, a)| matches!(a, Collab::Accept { chan: c2, role: Some(q), .. } if c2 == chan && *q == p)).map(|(j, _)| j).collect()
            })
            .collect();
        for choice in product(&per_role) {
            let mut initiators = vec![(n, i)];
            initiators.extend(choice.iter().enumerate().map(|(k, &j)| ((k + 1) as Role, j)));
            let mut logs_v = Vec::new();
            for &(role, j) in &initiators {
                let (Collab::Request { var, body, .. } | Collab::Accept { var, body, .. }) = &comps[j] else { unreachable!() };
                let e = Endpoint { session: fresh, side: Side::Role(role) };
                logs_v.push(fresh_log(e, bind_endpoint(body, var, e)));
            }
            let saved = Collab::par_all(initiators.iter().map(|&(_, j)| comps[j].clone()).collect());
            let session = Collab::Session { name: fresh, saved: Box::new(saved), body: Box::new(Collab::par_all(logs_v)) };
            let removed: BTreeSet<usize> = choice.iter().copied().collect();
            let next: Vec<Collab> = comps
                .iter()
                .enumerate()
                .filter(|(j, _)| !removed.contains(j))
                .map(|(j, k)| if j == i { session.clone() } else { k.clone() })
                .collect();
            out.steps.push(Step {
                label: ReductionLabel::Con { session: fresh, channel: chan.clone() },
                next: Collab::par_all(next),
                oracle: oracle.clone(),
            });
        }
    }
    for (k, comp) in comps.iter().enumerate() {
        let Collab::Session { name, body, .. } = comp else { continue };
        let (steps, failures) = m_session_steps(*name, body, oracle, mode);
        out.failures.extend(failures);
        for s in steps {
            out.steps.push(Step { label: s.label, next: apply_outcome(&comps, k, s.outcome), oracle: s.oracle });
        }
    }
    dedup(&mut out.steps);
    out
}

fn product(choices: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut acc = vec![Vec::new()];
    for opts in choices {
        acc = acc.into_iter().flat_map(|prefix: Vec<usize>| opts.iter().map(move |&o| {
            let mut v = prefix.clone();
            v.push(o);
            v
        })).collect();
    }
    acc
}

/// The partner's next interactions all address third parties; an unmatched prefix towards it
/// is not an error yet. With two parties this never holds.
fn engaged_elsewhere(b: &BTreeSet<Barb>, me: Role) -> bool {
    let peer = |x: &Barb| match x {
        Barb::Out(_, p) | Barb::In(_, p) | Barb::Sel(_, p, _) | Barb::Brn(_, p, _) => Some(*p),
        Barb::Roll | Barb::Abt => None,
    };
    let mut any = false;
    for x in b {
        if let Some(p) = peer(x) {
            if p == Some(me) {
                return false;
            }
            any = true;
        }
    }
    any
}

fn role_of(e: Endpoint) -> Option<Role> {
    match e.side {
        Side::Role(r) => Some(r),
        _ => None,
    }
}

fn m_session_steps(
    name: SessionName,
    body: &Collab,
    oracle: &DecisionOracle,
    mode: Mode,
) -> (Vec<SessionStep>, Vec<EvalError>) {
    let mut out = Vec::new();
    let mut failures = Vec::new();
    let Some(logs) = logs(body) else { return (out, failures) };
    let by_role: BTreeMap<Role, usize> = logs.iter().enumerate().filter_map(|(k, l)| role_of(l.0).map(|r| (r, k))).collect();
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
    let with = |ps: &[(usize, Process)]| {
        let mut l = logs.clone();
        for (k, p) in ps {
            l[*k].2 = p.clone();
        }
        logs_to_body(l)
    };
    for i in 0..logs.len() {
        let ei = logs[i].0;
        let Some(me) = role_of(ei) else { continue };
        let own = Chan::End(ei);
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
            // Partner log index and its own channel, for prefixes addressed to a present peer.
            let partner = |chan: &Chan, peer: &Option<Role>| -> Option<(usize, Chan)> {
                if *chan != own {
                    return None;
                }
                let j = *by_role.get(&(*peer)?)?;
                Some((j, Chan::End(logs[j].0)))
            };
            match &a.label {
                ActionLabel::Out { chan, peer, value } => {
                    let Some((j, cj)) = partner(chan, peer) else { continue };
                    for b in &acts[j] {
                        if let ActionLabel::In { chan: c2, peer: Some(q), var } = &b.label {
                            if *c2 == cj && *q == me {
                                let received = substitute(&b.cont, &NameRef::Var(var.clone()), &Replacement::Value(value.clone()))
                                    .expect("value substitution");
                                out.push(SessionStep {
                                    label: ReductionLabel::Com { session: name, value: value.clone() },
                                    outcome: Outcome::Body(with(&[(i, a.cont.clone()), (j, received)])),
                                    oracle: a.oracle.clone(),
                                });
                            }
                        }
                    }
                    if detect && !bs[j].contains(&Barb::In(cj, Some(me))) && !may_escape(&bs[j]) && !engaged_elsewhere(&bs[j], me) {
                        error(&mut out, "E-Com1", &a.oracle);
                    }
                }
                ActionLabel::In { chan, peer, .. } => {
                    let Some((j, cj)) = partner(chan, peer) else { continue };
                    if detect && !bs[j].contains(&Barb::Out(cj, Some(me))) && !may_escape(&bs[j]) && !engaged_elsewhere(&bs[j], me) {
                        error(&mut out, "E-Com2", &a.oracle);
                    }
                }
                ActionLabel::Sel { chan, peer, label } => {
                    let Some((j, cj)) = partner(chan, peer) else { continue };
                    for b in &acts[j] {
                        if matches!(&b.label, ActionLabel::Brn { chan: c2, peer: Some(q), label: l2 } if *c2 == cj && *q == me && l2 == label) {
                            out.push(SessionStep {
                                label: ReductionLabel::Lab { session: name, label: label.clone() },
                                outcome: Outcome::Body(with(&[(i, a.cont.clone()), (j, b.cont.clone())])),
                                oracle: a.oracle.clone(),
                            });
                        }
                    }
                    if detect && !bs[j].contains(&Barb::Brn(cj.clone(), Some(me), label.clone())) && !may_escape(&bs[j]) && !engaged_elsewhere(&bs[j], me) {
                        error(&mut out, "E-Lab1", &a.oracle);
                    }
                }
                ActionLabel::Brn { chan, peer, .. } => {
                    let Some((j, cj)) = partner(chan, peer) else { continue };
                    if detect {
                        let offered = acts[i].iter().any(|x| {
                            matches!(&x.label, ActionLabel::Brn { label, .. } if bs[j].contains(&Barb::Sel(cj.clone(), Some(me), label.clone())))
                        });
                        if !offered && !may_escape(&bs[j]) && !engaged_elsewhere(&bs[j], me) {
                            error(&mut out, "E-Lab2", &a.oracle);
                        }
                    }
                }
                ActionLabel::Tau { branch } => out.push(SessionStep {
                    label: ReductionLabel::If { session: name, branch: *branch },
                    outcome: Outcome::Body(with(&[(i, a.cont.clone())])),
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
                        out.push(SessionStep { label: ReductionLabel::Rll { session: name }, outcome: Outcome::Body(restored(&logs)), oracle: a.oracle.clone() });
                    }
                }
                ActionLabel::Abt => out.push(SessionStep { label: ReductionLabel::Abt { session: name }, outcome: Outcome::Restore, oracle: a.oracle.clone() }),
            }
        }
    }
    (out, failures)
}

fn map_process(p: &Process, chan: &dyn Fn(&Chan) -> Chan, peer: &dyn Fn(Option<Role>) -> Option<Role>) -> Process {
    let go = |q: &Process| Box::new(map_process(q, chan, peer));
    match p {
        Process::Send { chan: c, peer: r, expr, cont } => Process::Send { chan: chan(c), peer: peer(*r), expr: expr.clone(), cont: go(cont) },
        Process::Recv { chan: c, peer: r, var, sort, cont } => {
            Process::Recv { chan: chan(c), peer: peer(*r), var: var.clone(), sort: *sort, cont: go(cont) }
        }
        Process::Select { chan: c, peer: r, label, cont } => Process::Select { chan: chan(c), peer: peer(*r), label: label.clone(), cont: go(cont) },
        Process::Branch { chan: c, peer: r, arms } => Process::Branch {
            chan: chan(c),
            peer: peer(*r),
            arms: arms.iter().map(|(l, q)| (l.clone(), map_process(q, chan, peer))).collect(),
        },
        Process::If { cond, then, els } => Process::If { cond: cond.clone(), then: go(then), els: go(els) },
        Process::Rec { var, body } => Process::Rec { var: var.clone(), body: go(body) },
        Process::Commit(c) => Process::Commit(go(c)),
        Process::Var(_) | Process::Inact | Process::Roll | Process::Abort => p.clone(),
    }
}

/// Transcribes a binary initial collaboration as a 2-party one: requesters become role 2,
/// acceptors role 1, and every prefix addresses the other role.
pub fn to_multiparty(c: &Collab) -> Collab {
    let comps = c
        .components()
        .into_iter()
        .map(|k| match k {
            Collab::Request { chan, arity: None, var, body } => Collab::Request {
                chan: chan.clone(),
                arity: Some(2),
                var: var.clone(),
                body: map_process(body, &|c| c.clone(), &|_| Some(1)),
            },
            Collab::Accept { chan, role: None, var, body } => Collab::Accept {
                chan: chan.clone(),
                role: Some(1),
                var: var.clone(),
                body: map_process(body, &|c| c.clone(), &|_| Some(2)),
            },
            k => k.clone(),
        })
        .collect();
    Collab::par_all(comps)
}

/// Inverse of [`to_multiparty`] on any reachable state: roles 2 and 1 become the two
/// polarities and annotations are dropped.
pub fn erase(c: &Collab) -> Collab {
    let ep = |e: Endpoint| Endpoint {
        session: e.session,
        side: match e.side {
            Side::Role(2) => Side::Plus,
            Side::Role(1) => Side::Minus,
            s => s,
        },
    };
    let chan = |c: &Chan| match c {
        Chan::End(e) => Chan::End(ep(*e)),
        c => c.clone(),
    };
    let proc_ = |p: &Process| map_process(p, &chan, &|_| None);
    match c {
        Collab::Request { chan, var, body, .. } => Collab::Request { chan: chan.clone(), arity: None, var: var.clone(), body: proc_(body) },
        Collab::Accept { chan, var, body, .. } => Collab::Accept { chan: chan.clone(), role: None, var: var.clone(), body: proc_(body) },
        Collab::Par(l, r) => Collab::Par(Box::new(erase(l)), Box::new(erase(r))),
        Collab::Session { name, saved, body } => Collab::Session { name: *name, saved: Box::new(erase(saved)), body: Box::new(erase(body)) },
        Collab::Log { endpoint, checkpoint, current } => Collab::Log {
            endpoint: ep(*endpoint),
            checkpoint: crate::syntax::Checkpoint { process: proc_(&checkpoint.process), imposed: checkpoint.imposed },
            current: proc_(current),
        },
        Collab::RollError | Collab::ComError => c.clone(),
    }
}
