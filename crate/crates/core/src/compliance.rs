//! Type and configuration semantics, terminal-state search, compliance and rollback safety.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::{self, Display, Formatter, Write};

use thiserror::Error;

use crate::parser::Signatures;
use crate::syntax::{Collab, Name, Sort};
use crate::types::{Roles, SessionType};
use crate::typing::{infer_collaboration, TypeAssociations};

pub const DEFAULT_BUDGET: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TypeLabel {
    Out(Option<Roles>, Sort),
    In(Option<Roles>, Sort),
    Sel(Option<Roles>, Name),
    Brn(Option<Roles>, Name),
    Tau,
    Cmt,
    Roll,
    Abt,
}

impl Display for TypeLabel {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let roles = |r: &Option<Roles>| r.map(|r| format!("{r}")).unwrap_or_default();
        match self {
            TypeLabel::Out(r, s) => write!(f, "!{}[{s}]", roles(r)),
            TypeLabel::In(r, s) => write!(f, "?{}[{s}]", roles(r)),
            TypeLabel::Sel(r, l) => write!(f, "sel{}[{l}]", roles(r)),
            TypeLabel::Brn(r, l) => write!(f, "brn{}[{l}]", roles(r)),
            TypeLabel::Tau => f.write_str("tau"),
            TypeLabel::Cmt => f.write_str("cmt"),
            TypeLabel::Roll => f.write_str("roll"),
            TypeLabel::Abt => f.write_str("abt"),
        }
    }
}

/// One-step transitions of a session type; `mu` is unfolded before deriving.
pub fn type_transitions(t: &SessionType) -> Vec<(TypeLabel, SessionType)> {
    let mut out = Vec::new();
    transitions_into(t, &mut out, 0);
    out.sort();
    out.dedup();
    out
}

fn transitions_into(t: &SessionType, out: &mut Vec<(TypeLabel, SessionType)>, unfoldings: usize) {
    match t {
        SessionType::Out { roles, sort, cont } => out.push((TypeLabel::Out(*roles, *sort), (**cont).clone())),
        SessionType::In { roles, sort, cont } => out.push((TypeLabel::In(*roles, *sort), (**cont).clone())),
        SessionType::Sel { roles, label, cont } => out.push((TypeLabel::Sel(*roles, label.clone()), (**cont).clone())),
        SessionType::Brn { roles, arms } => {
            for (l, c) in arms {
                out.push((TypeLabel::Brn(*roles, l.clone()), c.clone()));
            }
        }
        SessionType::Choice(l, r) => {
            out.push((TypeLabel::Tau, (**l).clone()));
            out.push((TypeLabel::Tau, (**r).clone()));
        }
        // Guardedness bounds the number of consecutive unfoldings; the cap only protects
        // against ill-formed input.
        SessionType::Mu(..) if unfoldings < 64 => transitions_into(&t.unfold(), out, unfoldings + 1),
        SessionType::Cmt(c) => out.push((TypeLabel::Cmt, (**c).clone())),
        SessionType::Roll => out.push((TypeLabel::Roll, SessionType::End)),
        SessionType::Abt => out.push((TypeLabel::Abt, SessionType::End)),
        SessionType::Mu(..) | SessionType::Var(_) | SessionType::End | SessionType::Err => {}
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CheckpointType {
    pub ty: SessionType,
    pub imposed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Party {
    pub checkpoint: CheckpointType,
    pub current: SessionType,
}

/// `init(T1,…,Tn)` with one (checkpoint, current) pair per party.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TypeConfiguration {
    pub init: Vec<SessionType>,
    pub parties: Vec<Party>,
}

impl TypeConfiguration {
    pub fn initial(types: &[SessionType]) -> Self {
        let init: Vec<SessionType> = types.iter().map(SessionType::canonical).collect();
        let parties = init
            .iter()
            .map(|t| Party { checkpoint: CheckpointType { ty: t.clone(), imposed: false }, current: t.clone() })
            .collect();
        TypeConfiguration { init, parties }
    }

    pub fn canonical(&self) -> Self {
        TypeConfiguration {
            init: self.init.iter().map(SessionType::canonical).collect(),
            parties: self
                .parties
                .iter()
                .map(|p| Party {
                    checkpoint: CheckpointType { ty: p.checkpoint.ty.canonical(), imposed: p.checkpoint.imposed },
                    current: p.current.canonical(),
                })
                .collect(),
        }
    }

    pub fn is_completed(&self) -> bool {
        self.parties.iter().all(|p| p.current == SessionType::End)
    }

    fn with_current(&self, i: usize, t: SessionType) -> Self {
        let mut next = self.clone();
        next.parties[i].current = t.canonical();
        next
    }
}

impl Display for TypeConfiguration {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str("init(")?;
        for (i, t) in self.init.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{t}")?;
        }
        f.write_char(')')?;
        for (i, p) in self.parties.iter().enumerate() {
            f.write_str(if i == 0 { " " } else { " || " })?;
            let tag = if p.checkpoint.imposed { "imp" } else { "ckp" };
            write!(f, "<{tag} {}> {}", p.checkpoint.ty, p.current)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ConfigStep {
    pub party: usize,
    pub rule: &'static str,
    pub label: TypeLabel,
    pub target: TypeConfiguration,
}

/// All binary configuration steps (both parties, all applicable rules), sorted.
pub fn config_transitions(c: &TypeConfiguration) -> Vec<ConfigStep> {
    assert_eq!(c.parties.len(), 2, "binary configuration expected");
    let mut out = Vec::new();
    for i in 0..2 {
        let j = 1 - i;
        let mine = &c.parties[i];
        let theirs = &c.parties[j];
        for (label, next) in type_transitions(&mine.current) {
            let mut push = |rule, target: TypeConfiguration| out.push(ConfigStep { party: i, rule, label: label.clone(), target });
            match &label {
                TypeLabel::Tau => push("TS-Tau", c.with_current(i, next)),
                TypeLabel::Out(_, s) => {
                    for (l2, next2) in type_transitions(&theirs.current) {
                        if matches!(&l2, TypeLabel::In(_, s2) if s2 == s) {
                            push("TS-Com", c.with_current(i, next.clone()).with_current(j, next2));
                        }
                    }
                }
                TypeLabel::Sel(_, l) => {
                    for (l2, next2) in type_transitions(&theirs.current) {
                        if matches!(&l2, TypeLabel::Brn(_, k) if k == l) {
                            push("TS-Lab", c.with_current(i, next.clone()).with_current(j, next2));
                        }
                    }
                }
                TypeLabel::In(..) | TypeLabel::Brn(..) => {}
                TypeLabel::Cmt => {
                    let next = next.canonical();
                    let mut t = c.clone();
                    t.parties[i] = Party { checkpoint: CheckpointType { ty: next.clone(), imposed: false }, current: next };
                    if theirs.checkpoint.ty == theirs.current {
                        push("TS-Cmt2", t);
                    } else {
                        t.parties[j].checkpoint = CheckpointType { ty: theirs.current.clone(), imposed: true };
                        push("TS-Cmt1", t);
                    }
                }
                TypeLabel::Roll => {
                    let mut t = c.clone();
                    if mine.checkpoint.imposed {
                        t.parties[i].current = SessionType::Err;
                        t.parties[j].current = SessionType::Err;
                        push("TS-Rll2", t);
                    } else {
                        for p in &mut t.parties {
                            p.current = p.checkpoint.ty.clone();
                        }
                        push("TS-Rll1", t);
                    }
                }
                TypeLabel::Abt => push("TS-Abt1", TypeConfiguration::initial(&c.init)),
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ComplianceError {
    #[error("state budget of {0} configurations exceeded")]
    Budget(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub party: usize,
    pub rule: &'static str,
    pub label: TypeLabel,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionSystem {
    pub states: Vec<TypeConfiguration>,
    pub edges: Vec<Edge>,
    pub initial: usize,
    pub terminals: Vec<usize>,
    parent: Vec<Option<usize>>,
}

impl TransitionSystem {
    /// Terminal states with some current type other than `end`.
    pub fn violating(&self) -> Vec<usize> {
        self.terminals.iter().copied().filter(|&s| !self.states[s].is_completed()).collect()
    }

    /// Rule names along the BFS tree path from the initial state.
    pub fn witness(&self, state: usize) -> Vec<&'static str> {
        let mut path = Vec::new();
        let mut cur = state;
        while let Some(e) = self.parent[cur] {
            path.push(self.edges[e].rule);
            cur = self.edges[e].from;
        }
        path.reverse();
        path
    }

    pub fn outgoing(&self, state: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.from == state)
    }
}

pub fn reachable_system(c0: &TypeConfiguration, budget: usize) -> Result<TransitionSystem, ComplianceError> {
    explore_configs(c0, budget, &config_transitions)
}

/// Breadth-first search over configurations with canonical deduplication.
pub fn explore_configs(
    c0: &TypeConfiguration,
    budget: usize,
    step: &dyn Fn(&TypeConfiguration) -> Vec<ConfigStep>,
) -> Result<TransitionSystem, ComplianceError> {
    let c0 = c0.canonical();
    let mut states = vec![c0.clone()];
    let mut index = BTreeMap::new();
    index.insert(c0, 0usize);
    let mut parent = vec![None];
    let mut edges = Vec::new();
    let mut terminals = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(s) = queue.pop_front() {
        let steps = step(&states[s]);
        if steps.is_empty() {
            terminals.push(s);
        }
        for st in steps {
            let to = match index.get(&st.target) {
                Some(&k) => k,
                None => {
                    if states.len() >= budget {
                        return Err(ComplianceError::Budget(budget));
                    }
                    let k = states.len();
                    index.insert(st.target.clone(), k);
                    states.push(st.target);
                    parent.push(Some(edges.len()));
                    queue.push_back(k);
                    k
                }
            };
            edges.push(Edge { from: s, to, party: st.party, rule: st.rule, label: st.label });
        }
    }
    terminals.sort_unstable();
    Ok(TransitionSystem { states, edges, initial: 0, terminals, parent })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Compliant,
    Violating,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub state: usize,
    pub terminal: TypeConfiguration,
    pub path: Vec<&'static str>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComplianceReport {
    pub verdict: Verdict,
    pub violations: Vec<Violation>,
    pub states: usize,
    pub edges: usize,
}

impl ComplianceReport {
    pub fn of(ts: &TransitionSystem) -> Self {
        let violations: Vec<Violation> = ts
            .violating()
            .into_iter()
            .map(|s| Violation { state: s, terminal: ts.states[s].clone(), path: ts.witness(s) })
            .collect();
        ComplianceReport {
            verdict: if violations.is_empty() { Verdict::Compliant } else { Verdict::Violating },
            violations,
            states: ts.states.len(),
            edges: ts.edges.len(),
        }
    }

    pub fn is_compliant(&self) -> bool {
        self.verdict == Verdict::Compliant
    }
}

pub fn check_compliance(t1: &SessionType, t2: &SessionType) -> Result<ComplianceReport, ComplianceError> {
    check_compliance_with_budget(t1, t2, DEFAULT_BUDGET)
}

pub fn check_compliance_with_budget(t1: &SessionType, t2: &SessionType, budget: usize) -> Result<ComplianceReport, ComplianceError> {
    let ts = reachable_system(&TypeConfiguration::initial(&[t1.clone(), t2.clone()]), budget)?;
    Ok(ComplianceReport::of(&ts))
}

/// Compliance result for one group of initiators sharing a channel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupReport {
    pub channel: Name,
    /// Indices into the inferred associations, in configuration order.
    pub members: Vec<usize>,
    pub types: Vec<SessionType>,
    pub report: ComplianceReport,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SafetyReport {
    pub safe: bool,
    pub associations: TypeAssociations,
    pub groups: Vec<GroupReport>,
    pub diagnostics: Vec<String>,
}

/// Infers the type associations of an initial collaboration and checks every
/// requester/acceptor group on each shared channel for compliance.
pub fn check_rollback_safety(c: &Collab, sigs: &Signatures, budget: usize) -> Result<SafetyReport, ComplianceError> {
    if c.components().iter().any(|k| matches!(k, Collab::Request { arity: Some(_), .. } | Collab::Accept { role: Some(_), .. })) {
        return crate::multiparty::m_check_rollback_safety(c, sigs, budget);
    }
    let assoc = match infer_collaboration(c, sigs) {
        Ok(a) => a,
        Err(e) => {
            return Ok(SafetyReport { safe: false, associations: TypeAssociations::default(), groups: Vec::new(), diagnostics: vec![format!("{e}")] })
        }
    };
    let mut groups = Vec::new();
    for chan in assoc.channels() {
        for (ri, r) in assoc.0.iter().enumerate().filter(|(_, a)| a.channel == chan && matches!(a.role, crate::typing::ChannelRole::Requester(_))) {
            for (ai, a) in assoc.0.iter().enumerate().filter(|(_, a)| a.channel == chan && matches!(a.role, crate::typing::ChannelRole::Acceptor(_))) {
                let report = check_compliance_with_budget(&r.ty, &a.ty, budget)?;
                groups.push(GroupReport { channel: chan.clone(), members: vec![ri, ai], types: vec![r.ty.clone(), a.ty.clone()], report });
            }
        }
    }
    let safe = groups.iter().all(|g| g.report.is_compliant());
    Ok(SafetyReport { safe, associations: assoc, groups, diagnostics: Vec::new() })
}

/// Graphviz rendering: nodes are state indices, edges carry rule names, violating terminals
/// are double-circled.
pub fn export_dot(ts: &TransitionSystem) -> String {
    let violating = ts.violating();
    let mut s = String::new();
    let _ = writeln!(s, "digraph transition_system {{");
    let _ = writeln!(s, "  node [shape=circle];");
    for i in 0..ts.states.len() {
        if violating.contains(&i) {
            let _ = writeln!(s, "  {i} [label=\"{i}\", peripheries=2];");
        } else {
            let _ = writeln!(s, "  {i} [label=\"{i}\"];");
        }
    }
    for e in &ts.edges {
        let _ = writeln!(s, "  {} -> {} [label=\"{}\"];", e.from, e.to, e.rule);
    }
    s.push_str("}\n");
    s
}
