use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use super::oracle::DecisionOracle;
use super::reduce::{ErrorKind, ReductionLabel, Semantics, Step, Successors};
use super::simulate::{StopReason, Trace, TraceStep};
use crate::canon::{canonicalize, CanonicalForm};
use crate::parser::Signatures;
use crate::syntax::{collab_called_functions, Collab, Name, Process, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExploreOptions {
    /// States at this BFS depth are kept but not expanded.
    pub depth: usize,
    /// Maximum number of distinct states.
    pub budget: usize,
    /// Drop `B-Rll` and `B-Abt` steps.
    pub forward_only: bool,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions { depth: 30, budget: 200_000, forward_only: false }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ExploreError {
    #[error("`{0}` has no finite outcome domain; declare one with `in {{..}}`")]
    NoDomain(Name),
    #[error("unknown function `{0}`")]
    UnknownFunction(Name),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphEdge {
    pub from: usize,
    pub to: usize,
    pub label: ReductionLabel,
    /// Oracle decisions taken by this step.
    pub decisions: Vec<(Name, Value)>,
}

/// Bounded reachability graph over canonical states. State 0 is the initial state.
#[derive(Clone, Debug)]
pub struct ExplorationGraph {
    pub initial: Collab,
    pub states: Vec<CanonicalForm>,
    pub depth: Vec<usize>,
    pub edges: Vec<GraphEdge>,
    /// Whether the state's successors were computed.
    pub expanded: Vec<bool>,
    pub budget_exceeded: bool,
    parent: Vec<Option<usize>>,
    out: Vec<Vec<usize>>,
    index: BTreeMap<CanonicalForm, usize>,
}

impl ExplorationGraph {
    pub fn index_of(&self, c: &CanonicalForm) -> Option<usize> {
        self.index.get(c).copied()
    }

    pub fn contains(&self, c: &CanonicalForm) -> bool {
        self.index.contains_key(c)
    }

    pub fn outgoing(&self, s: usize) -> impl Iterator<Item = &GraphEdge> {
        self.out[s].iter().map(move |&e| &self.edges[e])
    }

    /// Shortest discovered path from the initial state to `s`.
    pub fn witness(&self, s: usize, stop: StopReason) -> Trace {
        let mut path = Vec::new();
        let mut cur = s;
        while let Some(e) = self.parent[cur] {
            path.push(e);
            cur = self.edges[e].from;
        }
        path.reverse();
        let mut transcript = Vec::new();
        let steps = path
            .iter()
            .map(|&e| {
                let edge = &self.edges[e];
                transcript.extend(edge.decisions.iter().cloned());
                TraceStep { label: edge.label.clone(), state: self.states[edge.to].clone() }
            })
            .collect();
        Trace { initial: self.initial.clone(), steps, transcript, stop }
    }

    /// Stuck states: expanded, error-free, without successors.
    pub fn stuck(&self) -> Vec<usize> {
        (0..self.states.len())
            .filter(|&s| self.expanded[s] && self.out[s].is_empty() && !self.states[s].as_collab().has_error())
            .collect()
    }

    pub fn error_states(&self) -> Vec<usize> {
        (0..self.states.len()).filter(|&s| self.states[s].as_collab().has_error()).collect()
    }

    /// Forward closure of `from` inside the graph (reflexive).
    pub fn forward_closure(&self, from: &[usize]) -> BTreeSet<usize> {
        let mut seen: BTreeSet<usize> = from.iter().copied().collect();
        let mut work: Vec<usize> = from.to_vec();
        while let Some(s) = work.pop() {
            for e in self.outgoing(s) {
                if e.label.is_forward() && seen.insert(e.to) {
                    work.push(e.to);
                }
            }
        }
        seen
    }
}

/// Rejects programs whose calls cannot be enumerated.
pub fn check_enumerable(c: &Collab, sigs: &Signatures) -> Result<(), ExploreError> {
    for f in collab_called_functions(c) {
        let sig = sigs.get(&f).ok_or_else(|| ExploreError::UnknownFunction(f.clone()))?;
        if sig.outcomes().is_none() {
            return Err(ExploreError::NoDomain(f));
        }
    }
    Ok(())
}

fn filtered(succ: Successors, forward_only: bool) -> Vec<Step> {
    succ.steps.into_iter().filter(|s| !forward_only || s.label.is_forward()).collect()
}

/// Breadth-first exploration, branching over every oracle outcome.
pub fn explore_graph(c: &Collab, sem: &dyn Semantics, sigs: &Signatures, opts: ExploreOptions) -> Result<ExplorationGraph, ExploreError> {
    check_enumerable(c, sigs)?;
    let oracle = DecisionOracle::exhaustive(sigs);
    let init = canonicalize(c);
    let mut g = ExplorationGraph {
        initial: c.clone(),
        states: vec![init.clone()],
        depth: vec![0],
        edges: Vec::new(),
        expanded: vec![false],
        budget_exceeded: false,
        parent: vec![None],
        out: vec![Vec::new()],
        index: BTreeMap::from([(init, 0)]),
    };
    let mut queue = VecDeque::from([0usize]);
    'bfs: while let Some(s) = queue.pop_front() {
        let state = g.states[s].as_collab().clone();
        if g.depth[s] >= opts.depth || state.has_error() {
            continue;
        }
        g.expanded[s] = true;
        for step in filtered(sem.steps(&state, &oracle), opts.forward_only) {
            let next = canonicalize(&step.next);
            let to = match g.index.get(&next) {
                Some(&t) => t,
                None => {
                    if g.states.len() >= opts.budget {
                        g.budget_exceeded = true;
                        g.expanded[s] = false;
                        break 'bfs;
                    }
                    let t = g.states.len();
                    g.index.insert(next.clone(), t);
                    g.states.push(next);
                    g.depth.push(g.depth[s] + 1);
                    g.expanded.push(false);
                    g.parent.push(Some(g.edges.len()));
                    g.out.push(Vec::new());
                    queue.push_back(t);
                    t
                }
            };
            g.out[s].push(g.edges.len());
            g.edges.push(GraphEdge { from: s, to, label: step.label, decisions: step.oracle.transcript().to_vec() });
        }
    }
    Ok(g)
}

#[derive(Clone, Debug)]
pub struct ErrorWitness {
    pub kind: ErrorKind,
    pub rule: &'static str,
    pub trace: Trace,
}

#[derive(Clone, Debug)]
pub struct ExplorationReport {
    pub states: usize,
    pub edges: usize,
    pub depth_bound: usize,
    pub errors: Vec<ErrorWitness>,
    /// Stuck states where every session has finished.
    pub completed: Vec<CanonicalForm>,
    /// Stuck states with an unfinished session.
    pub progress_violations: Vec<Trace>,
    pub budget_exceeded: bool,
}

impl ExplorationReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty() && self.progress_violations.is_empty()
    }
}

/// Every session's logs hold `0`.
pub fn sessions_completed(c: &Collab) -> bool {
    c.components().into_iter().all(|k| match k {
        Collab::Session { body, .. } => body.components().into_iter().all(|l| matches!(l, Collab::Log { current: Process::Inact, .. })),
        _ => true,
    })
}

pub fn explore(c: &Collab, sem: &dyn Semantics, sigs: &Signatures, opts: ExploreOptions) -> Result<ExplorationReport, ExploreError> {
    let g = explore_graph(c, sem, sigs, opts)?;
    Ok(report(&g, opts.depth))
}

pub fn report(g: &ExplorationGraph, depth_bound: usize) -> ExplorationReport {
    let errors = g
        .error_states()
        .into_iter()
        .map(|s| {
            let trace = g.witness(s, StopReason::Error);
            let (kind, rule) = match trace.steps.last().map(|t| &t.label) {
                Some(ReductionLabel::Error { kind, rule, .. }) => (*kind, *rule),
                _ => (ErrorKind::ComError, "initial"),
            };
            ErrorWitness { kind, rule, trace }
        })
        .collect();
    let mut completed = Vec::new();
    let mut progress_violations = Vec::new();
    for s in g.stuck() {
        if sessions_completed(g.states[s].as_collab()) {
            completed.push(g.states[s].clone());
        } else {
            progress_violations.push(g.witness(s, StopReason::Stuck));
        }
    }
    ExplorationReport {
        states: g.states.len(),
        edges: g.edges.len(),
        depth_bound,
        errors,
        completed,
        progress_violations,
        budget_exceeded: g.budget_exceeded,
    }
}

/// Every `B-Rll` step `C1 ~> C2` in the graph: forward search from `C2` re-reaches `C1`
/// within `bound` steps. Returns descriptions of failures.
pub fn check_safe_rollback(g: &ExplorationGraph, sem: &dyn Semantics, sigs: &Signatures, bound: usize) -> Vec<String> {
    let mut failures = Vec::new();
    let mut cache: BTreeMap<(usize, usize), bool> = BTreeMap::new();
    for e in g.edges.iter().filter(|e| matches!(e.label, ReductionLabel::Rll { .. })) {
        let ok = *cache.entry((e.to, e.from)).or_insert_with(|| {
            let target = &g.states[e.from];
            forward_reaches(g.states[e.to].as_collab(), target, sem, sigs, bound)
        });
        if !ok {
            failures.push(format!("rollback {} -> {} is not forward-reversible: {}", e.from, e.to, g.states[e.from]));
        }
    }
    failures
}

fn forward_reaches(from: &Collab, target: &CanonicalForm, sem: &dyn Semantics, sigs: &Signatures, bound: usize) -> bool {
    let opts = ExploreOptions { depth: bound, budget: 100_000, forward_only: true };
    match explore_graph(from, sem, sigs, opts) {
        Ok(h) => h.contains(target),
        Err(_) => false,
    }
}

/// All `B-Rll` successors of a state on one session are canonically equal.
pub fn check_rollback_determinism(g: &ExplorationGraph) -> Vec<String> {
    let mut failures = Vec::new();
    for s in 0..g.states.len() {
        let mut by_session: BTreeMap<_, usize> = BTreeMap::new();
        for e in g.outgoing(s) {
            if let ReductionLabel::Rll { session } = e.label {
                if let Some(&t) = by_session.get(&session) {
                    if t != e.to {
                        failures.push(format!("state {s}: rollbacks of s{} reach {} and {}", session.0, t, e.to));
                    }
                } else {
                    by_session.insert(session, e.to);
                }
            }
        }
    }
    failures
}

/// Every state of the mixed graph at depth `d` appears in the forward-only graph.
pub fn check_causal_consistency(g: &ExplorationGraph, forward: &ExplorationGraph) -> Vec<String> {
    g.states
        .iter()
        .filter(|s| !forward.contains(s))
        .map(|s| format!("not forward-reachable: {s}"))
        .collect()
}

/// For every commit `C -> C'`: no path of forward steps, one rollback, then at least one
/// forward step leads from `C'` back to `C` inside the graph.
pub fn check_commit_persistency(g: &ExplorationGraph) -> Vec<String> {
    let mut failures = Vec::new();
    let mut rolled_cache: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for e in g.edges.iter().filter(|e| matches!(e.label, ReductionLabel::Cmt { .. })) {
        let again = rolled_cache.entry(e.to).or_insert_with(|| {
            let pre: Vec<usize> = g
                .forward_closure(&[e.to])
                .into_iter()
                .flat_map(|x| g.outgoing(x).filter(|r| matches!(r.label, ReductionLabel::Rll { .. })).map(|r| r.to).collect::<Vec<_>>())
                .collect();
            let succ: Vec<usize> =
                pre.iter().flat_map(|&x| g.outgoing(x).filter(|f| f.label.is_forward()).map(|f| f.to).collect::<Vec<_>>()).collect();
            g.forward_closure(&succ)
        });
        if again.contains(&e.from) {
            failures.push(format!("commit {} -> {} is undone: {}", e.from, e.to, g.states[e.from]));
        }
    }
    failures
}

/// Every `B-Abt` step restores the session's saved initiators.
pub fn check_abort_restores(g: &ExplorationGraph) -> Vec<String> {
    let mut failures = Vec::new();
    for e in g.edges.iter().filter(|e| matches!(e.label, ReductionLabel::Abt { .. })) {
        let ReductionLabel::Abt { session } = e.label else { continue };
        let src = g.states[e.from].as_collab();
        let mut comps: Vec<Collab> = Vec::new();
        for k in src.clone().into_components() {
            match k {
                Collab::Session { name, saved, .. } if name == session => comps.extend(saved.into_components()),
                k => comps.push(k),
            }
        }
        if canonicalize(&Collab::par_all(comps)) != g.states[e.to] {
            failures.push(format!("abort {} -> {} does not restore the saved initiators", e.from, e.to));
        }
    }
    failures
}
