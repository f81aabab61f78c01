//! Executable semantics: oracle-driven evaluation, reductions with error detection,
//! simulation, bounded exploration and the lockstep typing harness.

pub mod actions;
pub mod explore;
pub mod oracle;
pub mod reduce;
pub mod shadow;
pub mod simulate;

pub use actions::{barbs, enabled_actions, Action, ActionLabel, Barb};
pub use explore::{
    check_abort_restores, check_causal_consistency, check_commit_persistency, check_rollback_determinism, check_safe_rollback, explore,
    explore_graph, sessions_completed, ErrorWitness, ExplorationGraph, ExplorationReport, ExploreError, ExploreOptions, GraphEdge,
};
pub use oracle::{eval_pure, evaluate, evaluate_all, DecisionOracle, EvalError};
pub use reduce::{reduction_steps, Binary, ErrorKind, Mode, ReductionLabel, Semantics, Step, Successors};
pub use shadow::{session_configurations, shadow_typecheck, LockstepFailure};
pub use simulate::{replay, replay_rendered, simulate, Policy, ReplayError, StopReason, Trace, TraceStep};
