mod common;

use std::collections::{BTreeMap, BTreeSet};

use cherry_core::canon::{canonicalize, CanonicalForm};
use cherry_core::gen::{arbitrary_programs, random_multi_session_program, roll_safe_programs, GenConfig};
use cherry_core::parser::{parse_collab, parse_process, parse_program, Program, Signatures};
use cherry_core::runtime::*;
use cherry_core::syntax::{name, Chan, Collab, Expr, Name, Op, Process, Value};
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

fn script(entries: &[(&str, &[Value])]) -> BTreeMap<Name, Vec<Value>> {
    entries.iter().map(|(f, vs)| (name(f), vs.to_vec())).collect()
}

fn b(v: bool) -> Value {
    Value::Bool(v)
}

fn run(p: &Program, mode: Mode, s: BTreeMap<Name, Vec<Value>>, max: usize) -> Trace {
    simulate(&p.main, &Binary(mode), DecisionOracle::scripted(&p.signatures, s), Policy::FirstEnabled, max)
}

fn labels(t: &Trace) -> Vec<String> {
    t.steps.iter().map(|s| s.label.to_string()).collect()
}

#[test]
fn evaluation_examples() {
    let sigs = parse_program("fn f_eval(int, str): bool; main = request a(x). 0").unwrap().signatures;
    let mut o = DecisionOracle::scripted(&sigs, script(&[("f_eval", &[b(true)])]));
    let add = Expr::Op(Op::Add, vec![Expr::Lit(Value::Int(1)), Expr::Lit(Value::Int(2))]);
    assert_eq!(evaluate(&add, &mut o), Ok(Value::Int(3)));
    let and = Expr::Op(Op::And, vec![Expr::Lit(b(true)), Expr::Lit(b(false))]);
    assert_eq!(evaluate(&and, &mut o), Ok(b(false)));
    let call = Expr::Call(name("f_eval"), vec![Expr::Lit(Value::Int(10)), Expr::Lit(Value::Str(name("m")))]);
    assert_eq!(evaluate(&call, &mut o), Ok(b(true)));
    assert_eq!(evaluate(&call, &mut o), Err(EvalError::Exhausted { name: name("f_eval"), index: 1 }));
    assert_eq!(o.transcript(), &[(name("f_eval"), b(true))]);
    let all = evaluate_all(&call, &DecisionOracle::exhaustive(&sigs)).unwrap();
    let outcomes: Vec<Value> = all.into_iter().map(|(v, _)| v).collect();
    assert_eq!(outcomes, vec![b(true), b(false)]);
    assert_eq!(evaluate(&Expr::Var(name("x")), &mut o), Err(EvalError::Open(name("x"))));
}

#[test]
fn seeded_oracle_is_reproducible() {
    let sigs = parse_program("fn g(): int; main = request a(x). 0").unwrap().signatures;
    let call = Expr::Call(name("g"), vec![]);
    let draw = |seed| {
        let mut o = DecisionOracle::seeded(&sigs, seed);
        (0..5).map(|_| evaluate(&call, &mut o).unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(draw(3), draw(3));
    assert_ne!(draw(3), draw(4));
}

#[test]
fn enabled_action_examples() {
    let o = DecisionOracle::constant(&Signatures::new());
    let k = Chan::Var(name("k"));
    let acts = enabled_actions(&parse_process("k!<1+1>.0").unwrap(), &o).unwrap();
    assert_eq!(acts.len(), 1);
    assert_eq!(acts[0].label, ActionLabel::Out { chan: k.clone(), peer: None, value: Value::Int(2) });
    assert_eq!(acts[0].cont, Process::Inact);

    let acts = enabled_actions(&parse_process("k>+{l1: 0, l2: roll}").unwrap(), &o).unwrap();
    let got: Vec<(ActionLabel, Process)> = acts.into_iter().map(|a| (a.label, a.cont)).collect();
    assert_eq!(
        got,
        vec![
            (ActionLabel::Brn { chan: k.clone(), peer: None, label: name("l1") }, Process::Inact),
            (ActionLabel::Brn { chan: k, peer: None, label: name("l2") }, Process::Roll),
        ]
    );

    let acts = enabled_actions(&parse_process("commit. roll").unwrap(), &o).unwrap();
    assert_eq!((acts[0].label.clone(), acts[0].cont.clone()), (ActionLabel::Cmt, Process::Roll));

    let acts = enabled_actions(&parse_process("if 1 < 2 then 0 else roll").unwrap(), &o).unwrap();
    assert_eq!(acts.len(), 1);
    assert_eq!(acts[0].label, ActionLabel::Tau { branch: true });
}

#[test]
fn guards_with_calls_branch_per_outcome() {
    let p = parse_program("fn f(): bool; main = accept a(k). if f() then k!<1>.0 else roll").unwrap();
    let Collab::Accept { body, .. } = &p.main else { panic!() };
    let both = enabled_actions(body, &DecisionOracle::exhaustive(&p.signatures)).unwrap();
    assert_eq!(both.len(), 2);
    let one = enabled_actions(body, &DecisionOracle::scripted(&p.signatures, script(&[("f", &[b(false)])]))).unwrap();
    assert_eq!(one.len(), 1);
    assert_eq!(one[0].cont, Process::Roll);
}

// Oracle for barbs: fix every call outcome, then read off the first visible prefixes.
fn barbs_by_enumeration(p: &Process) -> BTreeSet<Barb> {
    fn fix(p: &Process, v: bool) -> Process {
        match p {
            Process::If { cond, then, els } => {
                let cond = if cond.has_calls() { Expr::Lit(Value::Bool(v)) } else { cond.clone() };
                Process::If { cond, then: Box::new(fix(then, v)), els: Box::new(fix(els, v)) }
            }
            Process::Commit(c) => Process::Commit(Box::new(fix(c, v))),
            q => q.clone(),
        }
    }
    [true, false].iter().flat_map(|&v| barbs(&fix(p, v))).collect()
}

#[test]
fn barb_examples() {
    let k = Chan::Var(name("k"));
    assert_eq!(barbs(&parse_process("k?(x:int).0").unwrap()), BTreeSet::from([Barb::In(k.clone(), None)]));
    assert!(barbs(&Process::Inact).is_empty());
    let p = parse_program("fn f(): bool; main = accept a(k). if f() then k!<1>.0 else roll").unwrap();
    let Collab::Accept { body, .. } = &p.main else { panic!() };
    let want = BTreeSet::from([Barb::Out(k.clone(), None), Barb::Roll]);
    assert_eq!(barbs(body), want);
    assert_eq!(barbs_by_enumeration(body), want);
    assert_eq!(barbs(&parse_process("if false then k!<1>.0 else abort").unwrap()), BTreeSet::from([Barb::Abt]));
    assert_eq!(barbs(&parse_process("commit. k<+l. 0").unwrap()), BTreeSet::from([Barb::Sel(k.clone(), None, name("l"))]));
    assert_eq!(barbs(&parse_process("rec X. k!<1>. X").unwrap()), BTreeSet::from([Barb::Out(k, None)]));
}

#[test]
fn connection_creates_session() {
    let c = parse_collab("request a(x).0 | accept a(y).0").unwrap();
    let t = simulate(&c, &Binary(Mode::Detect), DecisionOracle::constant(&Signatures::new()), Policy::FirstEnabled, 10);
    assert_eq!(labels(&t), vec!["fcon(s1, a)"]);
    assert_eq!(t.stop, StopReason::Stuck);
    assert!(sessions_completed(&t.final_state()));
    let Collab::Session { saved, .. } = t.final_state() else { panic!() };
    assert_eq!(canonicalize(&saved), canonicalize(&c));
}

#[test]
fn vod_b_rollback_restores_the_service_commit() {
    let p = common::load("vod_b");
    let t = run(&p, Mode::Plain, script(&[("f_eval", &[b(true)]), ("f_HD", &[b(false)])]), 100);
    let ls = labels(&t);
    assert_eq!(ls[0], "fcon(s1, login)");
    let cmts: Vec<usize> = (0..ls.len()).filter(|&i| ls[i].starts_with("fcmt")).collect();
    assert_eq!(cmts.len(), 2, "{ls:?}");
    let (c2, c3) = (t.steps[cmts[0]].state.clone(), t.steps[cmts[1]].state.clone());
    let rll = ls.iter().position(|l| l.starts_with("brll")).expect("rollback");
    let c4 = t.steps[rll - 1].state.clone();
    assert_eq!(t.steps[rll].state, c3);
    let from_c4: Vec<CanonicalForm> = reduction_steps(c4.as_collab(), &DecisionOracle::exhaustive(&p.signatures), Mode::Plain)
        .steps
        .iter()
        .map(|s| canonicalize(&s.next))
        .collect();
    assert!(from_c4.contains(&c3));
    assert!(!from_c4.contains(&c2));

    // The run up to C3 is typable step by step; the rollback onto the imposed checkpoint is not.
    let prefix = Trace { steps: t.steps[..=cmts[1]].to_vec(), ..t.clone() };
    shadow_typecheck(&prefix, &p.signatures).unwrap();
    let upto_roll = Trace { steps: t.steps[..=rll].to_vec(), ..t.clone() };
    assert_eq!(shadow_typecheck(&upto_roll, &p.signatures).unwrap_err().step, rll + 1);
}

#[test]
fn vod_b_error_detection_hits_roll_error() {
    let p = common::load("vod_b");
    let t = run(&p, Mode::Detect, script(&[("f_eval", &[b(true)]), ("f_HD", &[b(false)])]), 100);
    assert_eq!(t.stop, StopReason::Error);
    let last = &t.steps.last().unwrap().label;
    assert!(matches!(last, ReductionLabel::Error { kind: ErrorKind::RollError, rule: "E-Rll2", .. }), "{last}");
}

#[test]
fn vod_c_rollback_returns_to_own_commit() {
    let p = common::load("vod_c");
    let s = script(&[("f_eval", &[b(true), b(false)]), ("f_HD", &[b(false)]), ("f_SD", &[b(true)])]);
    let t = run(&p, Mode::Detect, s, 100);
    assert_eq!(t.stop, StopReason::Stuck);
    let ls = labels(&t);
    assert_eq!(ls.iter().filter(|l| l.starts_with("brll")).count(), 1);
    assert!(ls.contains(&"flab(s1, HD)".to_string()) && ls.contains(&"flab(s1, SD)".to_string()));
    assert!(sessions_completed(&t.final_state()));
    assert_eq!(t.transcript.iter().filter(|(f, _)| &**f == "f_eval").count(), 2);
    replay(&t, &Binary(Mode::Detect), &DecisionOracle::constant(&p.signatures)).unwrap();
}

#[test]
fn producer_consumer_speculation() {
    let p = common::load("producer_consumer");
    let s = script(&[("f_eval", &[b(true), b(true), b(false)]), ("f_compare", &[b(false), b(true)])]);
    let t = run(&p, Mode::Detect, s, 200);
    assert!(matches!(&t.stop, StopReason::OracleFailure(EvalError::Exhausted { index: 3, .. })), "{:?}", t.stop);
    let key: Vec<&str> = labels(&t)
        .iter()
        .filter_map(|l| ["fcmt", "brll"].into_iter().find(|k| l.starts_with(k)))
        .collect();
    assert_eq!(key, vec!["fcmt", "brll", "fcmt"]);
    shadow_typecheck(&t, &p.signatures).unwrap();
}

#[test]
fn both_send_is_a_communication_error() {
    let c = parse_collab("request a(x). x!<1>.0 | accept a(y). y!<1>.0").unwrap();
    let r = explore(&c, &Binary(Mode::Detect), &Signatures::new(), ExploreOptions::default()).unwrap();
    assert!(!r.errors.is_empty());
    for e in &r.errors {
        assert_eq!((e.kind, e.rule, e.trace.steps.len()), (ErrorKind::ComError, "E-Com1", 2));
    }
    let plain = explore(&c, &Binary(Mode::Plain), &Signatures::new(), ExploreOptions::default()).unwrap();
    assert!(plain.errors.is_empty());
    assert_eq!(plain.progress_violations.len(), 1);
}

#[test]
fn branch_without_matching_selection_is_a_label_error() {
    let c = parse_collab("request a(x). x<+z. 0 | accept a(y). y>+{l: 0, m: 0}").unwrap();
    let r = explore(&c, &Binary(Mode::Detect), &Signatures::new(), ExploreOptions::default()).unwrap();
    let rules: BTreeSet<&str> = r.errors.iter().map(|e| e.rule).collect();
    assert!(rules.contains("E-Lab1") || rules.contains("E-Lab2"), "{rules:?}");
    let escape = parse_collab("request a(x). x!<1>. 0 | accept a(y). roll").unwrap();
    assert!(explore(&escape, &Binary(Mode::Detect), &Signatures::new(), ExploreOptions::default()).unwrap().errors.is_empty());
}

#[test]
fn corpus_exploration() {
    for (n, clean) in [("vod_b", false), ("vod_c", true), ("vod_d", false), ("producer_consumer", true), ("producer_consumer_prime", false)] {
        let p = common::load(n);
        let r = explore(&p.main, &Binary(Mode::Detect), &p.signatures, ExploreOptions { depth: 40, ..Default::default() }).unwrap();
        assert!(!r.budget_exceeded);
        assert_eq!(r.is_clean(), clean, "{n}");
        if !clean {
            assert!(r.errors.iter().any(|e| e.kind == ErrorKind::RollError), "{n}");
        }
        for e in &r.errors {
            replay(&e.trace, &Binary(Mode::Detect), &DecisionOracle::constant(&p.signatures)).unwrap();
            assert!(e.trace.final_state().has_error());
        }
    }
}

#[test]
fn exploration_requires_finite_domains() {
    let p = parse_program("fn g(): int; main = request a(x). x!<g()>. 0 | accept a(y). y?(v:int). 0").unwrap();
    let err = explore(&p.main, &Binary(Mode::Detect), &p.signatures, ExploreOptions::default()).unwrap_err();
    assert_eq!(err, ExploreError::NoDomain(name("g")));
}

// Naive depth-first enumerator: the states within `depth` steps, by best remaining depth.
fn naive_reach(p: &Program, depth: usize) -> (BTreeSet<CanonicalForm>, BTreeSet<CanonicalForm>, BTreeSet<CanonicalForm>) {
    fn go(c: CanonicalForm, left: usize, o: &DecisionOracle, memo: &mut BTreeMap<CanonicalForm, usize>, stuck: &mut BTreeSet<CanonicalForm>) {
        if memo.get(&c).is_some_and(|&l| l >= left) {
            return;
        }
        memo.insert(c.clone(), left);
        if left == 0 || c.as_collab().has_error() {
            return;
        }
        let succ = reduction_steps(c.as_collab(), o, Mode::Detect);
        if succ.steps.is_empty() {
            stuck.insert(c.clone());
        }
        for s in succ.steps {
            go(canonicalize(&s.next), left - 1, o, memo, stuck);
        }
    }
    let o = DecisionOracle::exhaustive(&p.signatures);
    let (mut memo, mut stuck) = (BTreeMap::new(), BTreeSet::new());
    go(canonicalize(&p.main), depth, &o, &mut memo, &mut stuck);
    let errors = memo.keys().filter(|c| c.as_collab().has_error()).cloned().collect();
    (memo.into_keys().collect(), errors, stuck)
}

#[test]
fn explorer_agrees_with_naive_enumerator() {
    let mut progs: Vec<Program> = common::BINARY.iter().map(|n| common::load(n)).collect();
    progs.extend(arbitrary_programs(8, 60, &GenConfig { depth: 5, ..GenConfig::default() }));
    for p in &progs {
        for depth in [3, 6, 10] {
            let g = explore_graph(&p.main, &Binary(Mode::Detect), &p.signatures, ExploreOptions { depth, ..Default::default() }).unwrap();
            let (states, errors, stuck) = naive_reach(p, depth);
            let got: BTreeSet<CanonicalForm> = g.states.iter().cloned().collect();
            assert_eq!(got, states, "{p}");
            let got_err: BTreeSet<CanonicalForm> = g.error_states().into_iter().map(|s| g.states[s].clone()).collect();
            assert_eq!(got_err, errors);
            let got_stuck: BTreeSet<CanonicalForm> = g.stuck().into_iter().map(|s| g.states[s].clone()).collect();
            assert_eq!(got_stuck, stuck);
        }
    }
}

#[test]
fn reversibility_properties_on_corpus_and_random_programs() {
    let sem = Binary(Mode::Detect);
    let mut progs: Vec<Program> = common::BINARY.iter().map(|n| common::load(n)).collect();
    progs.extend(arbitrary_programs(12, 40, &GenConfig { depth: 5, loops: false, ..GenConfig::default() }));
    for p in &progs {
        let opts = ExploreOptions { depth: 20, ..Default::default() };
        let g = explore_graph(&p.main, &sem, &p.signatures, opts).unwrap();
        let f = explore_graph(&p.main, &sem, &p.signatures, ExploreOptions { forward_only: true, ..opts }).unwrap();
        assert_eq!(check_safe_rollback(&g, &sem, &p.signatures, 20), Vec::<String>::new(), "{p}");
        assert_eq!(check_rollback_determinism(&g), Vec::<String>::new(), "{p}");
        assert_eq!(check_causal_consistency(&g, &f), Vec::<String>::new(), "{p}");
        assert_eq!(check_abort_restores(&g), Vec::<String>::new(), "{p}");
    }
}

#[test]
fn commit_persistency_holds_without_loops() {
    let sem = Binary(Mode::Detect);
    let mut progs: Vec<Program> = ["vod_b", "vod_c", "vod_d"].iter().map(|n| common::load(n)).collect();
    progs.extend(arbitrary_programs(13, 60, &GenConfig { depth: 6, loops: false, ..GenConfig::default() }));
    for p in &progs {
        let g = explore_graph(&p.main, &sem, &p.signatures, ExploreOptions { depth: 30, ..Default::default() }).unwrap();
        assert_eq!(check_commit_persistency(&g), Vec::<String>::new(), "{p}");
    }
}

#[test]
fn in_session_loops_can_re_reach_a_pre_commit_state() {
    // The consumer commits and loops back to the very term it started from, so after a later
    // rollback forward steps re-reach the state just before that commit.
    let p = common::load("producer_consumer");
    let g = explore_graph(&p.main, &Binary(Mode::Detect), &p.signatures, ExploreOptions { depth: 30, ..Default::default() }).unwrap();
    assert!(!check_commit_persistency(&g).is_empty());
}

#[test]
fn swap_lemma_on_multi_session_programs() {
    let sem = Binary(Mode::Detect);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let cfg = GenConfig { depth: 3, ..GenConfig::default() };
    let mut checked = 0;
    for _ in 0..25 {
        let p = random_multi_session_program(&mut rng, &cfg);
        let g = explore_graph(&p.main, &sem, &p.signatures, ExploreOptions { depth: 12, ..Default::default() }).unwrap();
        let is_session_step = |l: &ReductionLabel| !matches!(l, ReductionLabel::Con { .. } | ReductionLabel::Error { .. });
        // Canonical forms renumber sessions, so a label is compared without its session name.
        let kind = |l: &ReductionLabel| l.to_string().split_once(',').map_or(l.to_string().replace(char::is_numeric, ""), |(h, t)| format!("{}{t}", h.trim_end_matches(char::is_numeric)));
        for e1 in g.edges.iter().filter(|e| is_session_step(&e.label)) {
            for e2 in g.outgoing(e1.to).filter(|e| is_session_step(&e.label) && e.label.session() != e1.label.session()) {
                // The whole diamond must lie inside the expanded region.
                if g.depth[e1.from] + 2 >= 12 || g.states[e1.to].as_collab().has_error() {
                    continue;
                }
                let swapped = g
                    .outgoing(e1.from)
                    .filter(|e| kind(&e.label) == kind(&e2.label))
                    .any(|e3| g.outgoing(e3.to).any(|e4| kind(&e4.label) == kind(&e1.label) && e4.to == e2.to));
                assert!(swapped, "{} then {} from {} does not commute", e1.label, e2.label, g.states[e1.from]);
                checked += 1;
            }
        }
    }
    assert!(checked > 100, "only {checked} pairs");
}

#[test]
fn roll_safe_programs_are_error_free_and_progress() {
    let sem = Binary(Mode::Detect);
    for p in roll_safe_programs(31, 40, &GenConfig { depth: 5, ..GenConfig::default() }) {
        let r = explore(&p.main, &sem, &p.signatures, ExploreOptions { depth: 30, ..Default::default() }).unwrap();
        assert!(r.is_clean(), "{p}");
    }
}

#[test]
fn lockstep_on_seeded_traces() {
    let sem = Binary(Mode::Detect);
    let mut progs: Vec<Program> = ["vod_c", "producer_consumer"].iter().map(|n| common::load(n)).collect();
    progs.extend(roll_safe_programs(77, 30, &GenConfig { depth: 5, ..GenConfig::default() }));
    for p in &progs {
        for seed in 0..10 {
            let t = simulate(&p.main, &sem, DecisionOracle::seeded(&p.signatures, seed), Policy::SeededRandom(seed), 60);
            shadow_typecheck(&t, &p.signatures).unwrap_or_else(|f| panic!("{p}\nseed {seed}: {f}"));
            replay(&t, &sem, &DecisionOracle::constant(&p.signatures)).unwrap();
        }
    }
}

#[test]
fn empty_trace_is_accepted() {
    let p = common::load("vod_c");
    let t = Trace { initial: p.main.clone(), steps: vec![], transcript: vec![], stop: StopReason::StepBudget };
    shadow_typecheck(&t, &p.signatures).unwrap();
}

#[test]
fn rollback_does_not_rewind_decisions() {
    let p = parse_program("fn f(): bool; main = request a(x). x!<1>. (if f() then roll else 0) | accept a(y). y?(v:int). 0").unwrap();
    let t = run(&p, Mode::Detect, script(&[("f", &[b(true), b(false)])]), 20);
    assert_eq!(labels(&t).iter().filter(|l| l.starts_with("brll")).count(), 1);
    assert_eq!(t.transcript, vec![(name("f"), b(true)), (name("f"), b(false))]);
    assert!(sessions_completed(&t.final_state()));
}
