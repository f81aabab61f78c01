use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use super::reduce::ReductionLabel;
use super::simulate::Trace;
use crate::canon::canonicalize;
use crate::compliance::{config_transitions, CheckpointType, Party, TypeConfiguration};
use crate::multiparty::{fill_roles, m_config_transitions};
use crate::parser::Signatures;
use crate::syntax::{Collab, Side};
use crate::types::SessionType;
use crate::typing::{type_of_initiator, type_of_runtime_process};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("step {step}: {message}")]
pub struct LockstepFailure {
    /// 0 for the initial state, k for the k-th trace step.
    pub step: usize,
    pub message: String,
}

/// Type configuration of every live session, sorted. Binary parties are ordered requester
/// first; multiparty parties by role.
pub fn session_configurations(c: &Collab, sigs: &Signatures) -> Result<Vec<TypeConfiguration>, String> {
    let mut out = Vec::new();
    for comp in c.components() {
        let Collab::Session { saved, body, .. } = comp else { continue };
        if body.has_error() {
            return Err(format!("error term in session: {comp}"));
        }
        let mut init = Vec::new();
        for k in saved.components() {
            let (var, body, role) = match k {
                Collab::Request { var, body, arity, .. } => (var, body, arity.map(|n| (n, true))),
                Collab::Accept { var, body, role, .. } => (var, body, role.map(|p| (p, false))),
                _ => return Err(String::from("saved collaboration is not initial")),
            };
            let t = type_of_initiator(var, body, sigs).map_err(|e| format!("{e}"))?;
            init.push(match role {
                Some((p, _)) => (p, fill_roles(&t, p)),
                None => (if matches!(k, Collab::Request { .. }) { 0 } else { 1 }, t),
            });
        }
        init.sort_by_key(|(k, _)| *k);
        let mut parties = Vec::new();
        for l in body.components() {
            let Collab::Log { endpoint, checkpoint, current } = l else { return Err(String::from("malformed session body")) };
            let ty = |p| -> Result<SessionType, String> {
                let t = type_of_runtime_process(p, *endpoint, sigs).map_err(|e| format!("{e}"))?;
                Ok(match endpoint.side {
                    Side::Role(r) => fill_roles(&t, r),
                    _ => t,
                })
            };
            let key = match endpoint.side {
                Side::Plus => 0,
                Side::Minus => 1,
                Side::Role(r) => r,
            };
            parties.push((key, Party { checkpoint: CheckpointType { ty: ty(&checkpoint.process)?, imposed: checkpoint.imposed }, current: ty(current)? }));
        }
        parties.sort_by_key(|(k, _)| *k);
        let config = TypeConfiguration { init: init.into_iter().map(|(_, t)| t).collect(), parties: parties.into_iter().map(|(_, p)| p).collect() };
        out.push(config.canonical());
    }
    out.sort();
    Ok(out)
}

fn rules_for(label: &ReductionLabel) -> &'static [&'static str] {
    match label {
        ReductionLabel::Com { .. } => &["TS-Com", "M-TS-Com"],
        ReductionLabel::Lab { .. } => &["TS-Lab", "M-TS-Lab"],
        ReductionLabel::If { .. } => &["TS-Tau", "M-TS-Tau"],
        ReductionLabel::Cmt { .. } => &["TS-Cmt1", "TS-Cmt2", "M-TS-Cmt"],
        ReductionLabel::Rll { .. } => &["TS-Rll1", "M-TS-Rll"],
        ReductionLabel::Abt { .. } => &["TS-Abt1", "M-TS-Abt"],
        ReductionLabel::Con { .. } | ReductionLabel::Error { .. } => &[],
    }
}

fn steps_of(c: &TypeConfiguration) -> Vec<crate::compliance::ConfigStep> {
    if c.init.len() == 2 && c.init.iter().all(|t| !has_roles(t)) {
        config_transitions(c)
    } else {
        m_config_transitions(c)
    }
}

fn has_roles(t: &SessionType) -> bool {
    t.erase_roles() != *t
}

/// Multiset difference `a - b` of sorted vectors.
fn minus(a: &[TypeConfiguration], b: &[TypeConfiguration]) -> Vec<TypeConfiguration> {
    let mut rest: Vec<TypeConfiguration> = b.to_vec();
    let mut out = Vec::new();
    for x in a {
        if let Some(k) = rest.iter().position(|y| y == x) {
            rest.remove(k);
        } else {
            out.push(x.clone());
        }
    }
    out
}

fn flags_erased(c: &TypeConfiguration) -> TypeConfiguration {
    let mut c = c.clone();
    for p in &mut c.parties {
        p.checkpoint.imposed = false;
    }
    c
}

/// Replays `trace` against the configuration semantics: every session-changing step must be
/// mirrored by one configuration step of the corresponding rule, with matching imposed flags.
pub fn shadow_typecheck(trace: &Trace, sigs: &Signatures) -> Result<(), LockstepFailure> {
    let fail = |step: usize, message: String| LockstepFailure { step, message };
    let mut prev = session_configurations(canonicalize(&trace.initial).as_collab(), sigs).map_err(|m| fail(0, m))?;
    for (k, st) in trace.steps.iter().enumerate() {
        let k = k + 1;
        if let ReductionLabel::Error { .. } = st.label {
            return Err(fail(k, format!("error step {}", st.label)));
        }
        let next = session_configurations(st.state.as_collab(), sigs).map_err(|m| fail(k, m))?;
        let removed = minus(&prev, &next);
        let added = minus(&next, &prev);
        match (&st.label, removed.as_slice(), added.as_slice()) {
            (ReductionLabel::Con { .. }, [], [a]) => {
                if *a != TypeConfiguration::initial(&a.init) {
                    return Err(fail(k, format!("new session does not start initialised: {a}")));
                }
            }
            (ReductionLabel::Con { .. }, _, _) => return Err(fail(k, String::from("connection changed existing sessions"))),
            (ReductionLabel::Abt { .. }, [r], []) => {
                if !steps_of(r).iter().any(|s| rules_for(&st.label).contains(&s.rule)) {
                    return Err(fail(k, format!("abort not typable from {r}")));
                }
            }
            (label, [r], [a]) => {
                let rules = rules_for(label);
                let candidates: Vec<_> = steps_of(r).into_iter().filter(|s| rules.contains(&s.rule)).collect();
                if candidates.iter().any(|s| s.target == *a) {
                    // matched
                } else if candidates.iter().any(|s| flags_erased(&s.target) == flags_erased(a)) {
                    return Err(fail(k, format!("checkpoint accordance fails after {label}: runtime {a}")));
                } else {
                    return Err(fail(k, format!("{label} has no matching configuration step from {r} to {a}")));
                }
            }
            (label, [], []) => {
                // Types unchanged: the step must be a self-loop of some session configuration.
                let rules = rules_for(label);
                let ok = prev.iter().any(|c| steps_of(c).iter().any(|s| rules.contains(&s.rule) && s.target == *c));
                if !ok {
                    return Err(fail(k, format!("{label} leaves types unchanged but no configuration self-loop exists")));
                }
            }
            (label, r, a) => return Err(fail(k, format!("{label} changed {} and produced {} configurations", r.len(), a.len()))),
        }
        prev = next;
    }
    Ok(())
}
