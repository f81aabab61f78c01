use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

use crate::parser::Signatures;
use crate::syntax::{Expr, Name, Op, Value};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("oracle script has no entry for call #{index} of `{name}`")]
    Exhausted { name: Name, index: usize },
    #[error("no finite outcome domain declared for `{0}`")]
    NoDomain(Name),
    #[error("unknown function `{0}`")]
    UnknownFunction(Name),
    #[error("open expression: variable `{0}`")]
    Open(Name),
    #[error("runtime sort error: {0}")]
    Sort(String),
}

#[derive(Clone, Debug)]
enum Mode {
    Scripted(BTreeMap<Name, Vec<Value>>),
    Seeded(Box<ChaCha8Rng>),
    Constant,
    Exhaustive,
}

/// Supplies results of uninterpreted calls. Decisions are environment state: rollback does
/// not rewind call counters.
#[derive(Clone, Debug)]
pub struct DecisionOracle {
    sigs: Arc<Signatures>,
    mode: Mode,
    counters: BTreeMap<Name, usize>,
    transcript: Vec<(Name, Value)>,
}

impl DecisionOracle {
    fn with_mode(sigs: &Signatures, mode: Mode) -> Self {
        DecisionOracle { sigs: Arc::new(sigs.clone()), mode, counters: BTreeMap::new(), transcript: Vec::new() }
    }

    /// Call `k` of `f` returns `script[f][k]`; a missing entry is an error unless `f` has a
    /// one-value domain.
    pub fn scripted(sigs: &Signatures, script: BTreeMap<Name, Vec<Value>>) -> Self {
        Self::with_mode(sigs, Mode::Scripted(script))
    }

    pub fn seeded(sigs: &Signatures, seed: u64) -> Self {
        Self::with_mode(sigs, Mode::Seeded(Box::new(ChaCha8Rng::seed_from_u64(seed))))
    }

    /// `true`, or the first domain value, or `0` / `""`.
    pub fn constant(sigs: &Signatures) -> Self {
        Self::with_mode(sigs, Mode::Constant)
    }

    /// Branches over every outcome; used by the explorer.
    pub fn exhaustive(sigs: &Signatures) -> Self {
        Self::with_mode(sigs, Mode::Exhaustive)
    }

    /// Scripted oracle replaying a recorded transcript.
    pub fn replaying(sigs: &Signatures, transcript: &[(Name, Value)]) -> Self {
        let mut script: BTreeMap<Name, Vec<Value>> = BTreeMap::new();
        for (f, v) in transcript {
            script.entry(f.clone()).or_default().push(v.clone());
        }
        Self::scripted(sigs, script)
    }

    pub fn signatures(&self) -> &Signatures {
        &self.sigs
    }

    pub fn transcript(&self) -> &[(Name, Value)] {
        &self.transcript
    }

    pub fn is_exhaustive(&self) -> bool {
        matches!(self.mode, Mode::Exhaustive)
    }

    /// Same oracle state with an empty transcript.
    pub fn forget_transcript(&self) -> Self {
        let mut o = self.clone();
        o.transcript.clear();
        o
    }

    fn decide(&self, f: &Name) -> Result<Vec<(Value, DecisionOracle)>, EvalError> {
        let sig = self.sigs.get(f).ok_or_else(|| EvalError::UnknownFunction(f.clone()))?;
        let index = self.counters.get(f).copied().unwrap_or(0);
        let values = match &self.mode {
            Mode::Scripted(script) => {
                // A one-value domain is not a decision and needs no script entry.
                let forced = sig.domain.as_ref().filter(|d| d.len() == 1).map(|d| d[0].clone());
                let v = script.get(f).and_then(|vs| vs.get(index)).cloned().or(forced);
                vec![v.ok_or_else(|| EvalError::Exhausted { name: f.clone(), index })?]
            }
            Mode::Constant => vec![match (&sig.domain, sig.result) {
                (Some(d), _) if !d.is_empty() => d[0].clone(),
                (_, crate::syntax::Sort::Bool) => Value::Bool(true),
                (_, crate::syntax::Sort::Int) => Value::Int(0),
                (_, crate::syntax::Sort::Str) => Value::Str(Name::from("")),
            }],
            Mode::Exhaustive => sig.outcomes().ok_or_else(|| EvalError::NoDomain(f.clone()))?,
            Mode::Seeded(_) => Vec::new(),
        };
        if let Mode::Seeded(rng) = &self.mode {
            let mut rng = rng.clone();
            let r = rng.next_u64();
            let v = match (&sig.domain, sig.result) {
                (Some(d), _) if !d.is_empty() => d[(r % d.len() as u64) as usize].clone(),
                (_, crate::syntax::Sort::Bool) => Value::Bool(r & 1 == 1),
                (_, crate::syntax::Sort::Int) => Value::Int((r % 100) as i64),
                (_, crate::syntax::Sort::Str) => Value::Str(Name::from(format!("r{}", r % 4).as_str())),
            };
            let mut next = self.advanced(f, index, &v);
            next.mode = Mode::Seeded(rng);
            return Ok(vec![(v, next)]);
        }
        Ok(values.into_iter().map(|v| (v.clone(), self.advanced(f, index, &v))).collect())
    }

    fn advanced(&self, f: &Name, index: usize, v: &Value) -> DecisionOracle {
        let mut next = self.clone();
        next.counters.insert(f.clone(), index + 1);
        next.transcript.push((f.clone(), v.clone()));
        next
    }
}

/// Evaluates a closed expression; under an exhaustive oracle every outcome is returned.
pub fn evaluate_all(e: &Expr, oracle: &DecisionOracle) -> Result<Vec<(Value, DecisionOracle)>, EvalError> {
    match e {
        Expr::Lit(v) => Ok(vec![(v.clone(), oracle.clone())]),
        Expr::Var(x) => Err(EvalError::Open(x.clone())),
        Expr::Op(op, args) => Ok(eval_args(args, oracle)?
            .into_iter()
            .map(|(vals, o)| apply_op(*op, &vals).map(|v| (v, o)))
            .collect::<Result<_, _>>()?),
        Expr::Call(f, args) => {
            let mut out = Vec::new();
            for (_, o) in eval_args(args, oracle)? {
                out.extend(o.decide(f)?);
            }
            Ok(out)
        }
    }
}

fn eval_args(args: &[Expr], oracle: &DecisionOracle) -> Result<Vec<(Vec<Value>, DecisionOracle)>, EvalError> {
    let mut alts = vec![(Vec::new(), oracle.clone())];
    for a in args {
        let mut next = Vec::new();
        for (vals, o) in alts {
            for (v, o2) in evaluate_all(a, &o)? {
                let mut vs = vals.clone();
                vs.push(v);
                next.push((vs, o2));
            }
        }
        alts = next;
    }
    Ok(alts)
}

/// Evaluates `e`, committing the first outcome's decisions to `oracle`.
pub fn evaluate(e: &Expr, oracle: &mut DecisionOracle) -> Result<Value, EvalError> {
    let (v, o) = evaluate_all(e, oracle)?.into_iter().next().expect("evaluation yields an outcome");
    *oracle = o;
    Ok(v)
}

/// Evaluates a closed, call-free expression.
pub fn eval_pure(e: &Expr) -> Option<Value> {
    match e {
        Expr::Lit(v) => Some(v.clone()),
        Expr::Op(op, args) => {
            let vals = args.iter().map(eval_pure).collect::<Option<Vec<_>>>()?;
            apply_op(*op, &vals).ok()
        }
        Expr::Var(_) | Expr::Call(..) => None,
    }
}

fn apply_op(op: Op, vals: &[Value]) -> Result<Value, EvalError> {
    use Value::*;
    Ok(match (op, vals) {
        (Op::Add, [Int(a), Int(b)]) => Int(a.wrapping_add(*b)),
        (Op::And, [Bool(a), Bool(b)]) => Bool(*a && *b),
        (Op::Or, [Bool(a), Bool(b)]) => Bool(*a || *b),
        (Op::Not, [Bool(a)]) => Bool(!a),
        (Op::Eq, [a, b]) if a.sort() == b.sort() => Bool(a == b),
        (Op::Lt, [Int(a), Int(b)]) => Bool(a < b),
        (Op::Concat, [Str(a), Str(b)]) => Str(Name::from(format!("{a}{b}").as_str())),
        _ => return Err(EvalError::Sort(format!("{op:?} applied to {vals:?}"))),
    })
}
