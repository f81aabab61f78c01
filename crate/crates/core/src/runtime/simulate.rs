use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

use super::oracle::{DecisionOracle, EvalError};
use super::reduce::{ReductionLabel, Semantics};
use crate::canon::{canonicalize, CanonicalForm};
use crate::render::render;
use crate::syntax::{Collab, Name, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Policy {
    FirstEnabled,
    SeededRandom(u64),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// No successors.
    Stuck,
    /// A `roll_error` or `com_error` term was reached.
    Error,
    /// `max_steps` reductions were taken.
    StepBudget,
    /// Every candidate step failed to evaluate; the trace is truncated here.
    OracleFailure(EvalError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub label: ReductionLabel,
    pub state: CanonicalForm,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub initial: Collab,
    pub steps: Vec<TraceStep>,
    pub transcript: Vec<(Name, Value)>,
    pub stop: StopReason,
}

impl Trace {
    pub fn final_state(&self) -> Collab {
        match self.steps.last() {
            Some(s) => s.state.as_collab().clone(),
            None => canonicalize(&self.initial).into_collab(),
        }
    }
}

/// Runs `c` under `policy`. States are canonicalized after every step.
pub fn simulate(c: &Collab, sem: &dyn Semantics, oracle: DecisionOracle, policy: Policy, max_steps: usize) -> Trace {
    let mut oracle = oracle;
    let mut rng = match policy {
        Policy::SeededRandom(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        Policy::FirstEnabled => None,
    };
    let mut state = canonicalize(c).into_collab();
    let mut steps = Vec::new();
    let stop = loop {
        if state.has_error() {
            break StopReason::Error;
        }
        if steps.len() >= max_steps {
            break StopReason::StepBudget;
        }
        let succ = sem.steps(&state, &oracle);
        if succ.steps.is_empty() {
            break match succ.failures.into_iter().next() {
                Some(e) => StopReason::OracleFailure(e),
                None => StopReason::Stuck,
            };
        }
        let idx = match &mut rng {
            Some(r) => (r.next_u64() % succ.steps.len() as u64) as usize,
            None => 0,
        };
        let step = succ.steps.into_iter().nth(idx).expect("index in range");
        oracle = step.oracle;
        let next = canonicalize(&step.next);
        state = next.as_collab().clone();
        steps.push(TraceStep { label: step.label, state: next });
    };
    Trace { initial: c.clone(), steps, transcript: oracle.transcript().to_vec(), stop }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("step {step}: no successor matches `{label}` leading to the recorded state")]
    Diverged { step: usize, label: String },
}

/// Re-executes recorded `(label, state)` pairs, both in rendered form, from `initial`.
pub fn replay_rendered(
    initial: &Collab,
    sem: &dyn Semantics,
    oracle: DecisionOracle,
    expected: &[(String, String)],
) -> Result<Trace, ReplayError> {
    let mut oracle = oracle;
    let mut state = canonicalize(initial).into_collab();
    let mut steps = Vec::new();
    for (k, (label, rendered)) in expected.iter().enumerate() {
        let succ = sem.steps(&state, &oracle);
        let found = succ.steps.into_iter().find_map(|s| {
            if render(&s.label) != *label {
                return None;
            }
            let next = canonicalize(&s.next);
            (render(&next) == *rendered).then_some((s.label, next, s.oracle))
        });
        let Some((l, next, o)) = found else {
            return Err(ReplayError::Diverged { step: k, label: label.clone() });
        };
        oracle = o;
        state = next.as_collab().clone();
        steps.push(TraceStep { label: l, state: next });
    }
    Ok(Trace { initial: initial.clone(), steps, transcript: oracle.transcript().to_vec(), stop: StopReason::StepBudget })
}

/// Replays `trace` with a scripted oracle built from its transcript.
pub fn replay(trace: &Trace, sem: &dyn Semantics, oracle: &DecisionOracle) -> Result<(), ReplayError> {
    let o = DecisionOracle::replaying(oracle.signatures(), &trace.transcript);
    let expected: Vec<(String, String)> = trace.steps.iter().map(|s| (render(&s.label), render(&s.state))).collect();
    replay_rendered(&trace.initial, sem, o, &expected).map(|_| ())
}
