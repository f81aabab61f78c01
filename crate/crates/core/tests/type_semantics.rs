mod common;

use std::collections::BTreeSet;

use cherry_core::compliance::*;
use cherry_core::gen::{arbitrary_programs, random_type, GenConfig};
use cherry_core::parser::{parse_program, parse_type};
use cherry_core::syntax::Sort;
use cherry_core::types::SessionType;
use cherry_core::typing::infer_collaboration;
use common::naive_ts;
use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

fn t(s: &str) -> SessionType {
    parse_type(s).unwrap_or_else(|d| panic!("{s}: {d:?}"))
}

fn fixture(n: &str) -> SessionType {
    t(&std::fs::read_to_string(format!("{}/../cli/examples/types/{n}.chty", env!("CARGO_MANIFEST_DIR"))).unwrap())
}

fn party(ckp: SessionType, imposed: bool, current: SessionType) -> Party {
    Party { checkpoint: CheckpointType { ty: ckp, imposed }, current }
}

fn system(a: &SessionType, b: &SessionType) -> TransitionSystem {
    reachable_system(&TypeConfiguration::initial(&[a.clone(), b.clone()]), DEFAULT_BUDGET).unwrap()
}

#[test]
fn type_transition_examples() {
    assert_eq!(type_transitions(&t("cmt. end")), vec![(TypeLabel::Cmt, SessionType::End)]);
    assert_eq!(type_transitions(&SessionType::Roll), vec![(TypeLabel::Roll, SessionType::End)]);
    assert_eq!(type_transitions(&SessionType::Abt), vec![(TypeLabel::Abt, SessionType::End)]);
    let mu = t("mu t. ![int]. t");
    let steps = type_transitions(&mu);
    assert_eq!(steps.len(), 1);
    assert_eq!(steps[0].0, TypeLabel::Out(None, Sort::Int));
    assert!(steps[0].1.alpha_eq(&mu));
    assert!(type_transitions(&SessionType::End).is_empty());
    assert!(type_transitions(&SessionType::Err).is_empty());
}

#[test]
fn roll_against_end_is_a_self_loop() {
    let c = TypeConfiguration {
        init: vec![SessionType::Roll, SessionType::End],
        parties: vec![party(SessionType::Roll, false, SessionType::Roll), party(SessionType::End, false, SessionType::End)],
    };
    let steps = config_transitions(&c);
    assert_eq!(steps.len(), 1);
    assert_eq!(steps[0].rule, "TS-Rll1");
    assert_eq!(steps[0].target, c);
}

#[test]
fn imposed_roll_reaches_err() {
    let (tu, ts) = (fixture("t_user"), fixture("t_service"));
    let c = TypeConfiguration {
        init: vec![tu, ts],
        parties: vec![party(t("?[str]. (?[str]. end (+) roll)"), true, SessionType::Roll), party(t("![str]. ![str]. end"), false, t("![str]. end"))],
    };
    let steps = config_transitions(&c);
    assert_eq!(steps.len(), 1, "{steps:?}");
    assert_eq!(steps[0].rule, "TS-Rll2");
    assert!(steps[0].target.parties.iter().all(|p| p.current == SessionType::Err));
    assert!(config_transitions(&steps[0].target).is_empty());
}

#[test]
fn abort_resets() {
    let (a, b) = (t("![int]. abt"), t("?[int]. ?[int]. end"));
    let c = TypeConfiguration {
        init: vec![a.clone(), b.clone()],
        parties: vec![party(t("cmt. abt"), true, SessionType::Abt), party(SessionType::End, false, t("?[int]. end"))],
    };
    let steps = config_transitions(&c);
    assert_eq!(steps.len(), 1);
    assert_eq!(steps[0].rule, "TS-Abt1");
    assert_eq!(steps[0].target, TypeConfiguration::initial(&[a, b]));
}

#[test]
fn commit_imposes_only_on_a_moved_partner() {
    let a = t("cmt. end");
    let fresh = TypeConfiguration::initial(&[a.clone(), t("?[int]. end")]);
    assert_eq!(config_transitions(&fresh)[0].rule, "TS-Cmt2");
    let mut moved = fresh.clone();
    moved.parties[1].current = SessionType::End;
    let s = &config_transitions(&moved)[0];
    assert_eq!(s.rule, "TS-Cmt1");
    assert_eq!(s.target.parties[1].checkpoint, CheckpointType { ty: SessionType::End, imposed: true });
}

#[test]
fn small_systems() {
    let ts = system(&SessionType::End, &SessionType::End);
    assert_eq!((ts.states.len(), ts.edges.len(), ts.terminals.clone()), (1, 0, vec![0]));
    assert!(check_compliance(&SessionType::End, &SessionType::End).unwrap().is_compliant());
    let dot = export_dot(&ts);
    assert!(dot.contains("0 [label=\"0\"]") && !dot.contains("->"));
}

#[test]
fn vod_compliance() {
    let b = check_compliance(&fixture("t_user"), &fixture("t_service")).unwrap();
    assert_eq!(b.verdict, Verdict::Violating);
    assert!(b.violations.iter().any(|v| v.terminal.parties.iter().all(|p| p.current == SessionType::Err)));
    for v in &b.violations {
        assert!(v.terminal.parties.iter().any(|p| p.current != SessionType::End));
        assert_eq!(*v.path.last().unwrap(), "TS-Rll2");
    }
    assert!(check_compliance(&fixture("t_user"), &fixture("t_service_c")).unwrap().is_compliant());
    assert!(!check_compliance(&fixture("t_user_d"), &fixture("t_service_d")).unwrap().is_compliant());
}

#[test]
fn producer_consumer_systems() {
    let (tc, tp, tp2) = (fixture("t_consumer"), fixture("t_producer"), fixture("t_producer_prime"));
    let ts = system(&tc, &tp);
    assert!(ts.violating().is_empty());
    assert!(ts.edges.iter().any(|e| e.label == TypeLabel::Cmt && e.to == ts.initial && e.from != ts.initial));
    let ts2 = system(&tc, &tp2);
    assert_eq!(ts2.violating().len(), 2);
    let dot = export_dot(&ts2);
    assert_eq!(dot.matches("peripheries=2").count(), 2);
    // Regression anchors, cross-checked by the naive enumerator below.
    assert_eq!((ts.states.len(), ts2.states.len()), (10, 18));
}

#[test]
fn rollback_safety_reports() {
    for (n, safe, violations) in [("vod_b", false, 1), ("vod_c", true, 0), ("vod_d", false, 1), ("producer_consumer", true, 0), ("producer_consumer_prime", false, 2)] {
        let p = common::load(n);
        let r = check_rollback_safety(&p.main, &p.signatures, DEFAULT_BUDGET).unwrap();
        assert_eq!(r.safe, safe, "{n}");
        assert_eq!(r.groups.len(), 1);
        assert_eq!(r.groups[0].report.violations.len(), violations, "{n}");
    }
    let p = parse_program("main = request a(x). x!<1>. 0 | accept a(y). y?(v:int). 0 | accept a(z). z?(v:str). 0").unwrap();
    let r = check_rollback_safety(&p.main, &p.signatures, DEFAULT_BUDGET).unwrap();
    assert!(!r.safe);
    let verdicts: Vec<bool> = r.groups.iter().map(|g| g.report.is_compliant()).collect();
    assert_eq!(verdicts, vec![true, false]);
    let bad = parse_program("main = request a(x). x!<1>. 0 | accept a(y). y?(v:int). y!<v && true>. 0").unwrap();
    let r = check_rollback_safety(&bad.main, &bad.signatures, DEFAULT_BUDGET).unwrap();
    assert!(!r.safe && !r.diagnostics.is_empty());
}

#[test]
fn budget_is_enforced() {
    let tc = fixture("t_consumer");
    let tp = fixture("t_producer_prime");
    assert_eq!(check_compliance_with_budget(&tc, &tp, 5), Err(ComplianceError::Budget(5)));
}

fn corpus_pairs() -> Vec<(SessionType, SessionType)> {
    let mut out = Vec::new();
    for n in common::BINARY {
        let p = common::load(n);
        let a = infer_collaboration(&p.main, &p.signatures).unwrap();
        out.push((a.0[0].ty.clone(), a.0[1].ty.clone()));
    }
    for p in arbitrary_programs(23, 150, &GenConfig { depth: 6, ..GenConfig::default() }) {
        let a = infer_collaboration(&p.main, &p.signatures).unwrap();
        out.push((a.0[0].ty.clone(), a.0[1].ty.clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for d in 1..=8 {
        for _ in 0..20 {
            out.push((random_type(&mut rng, d), random_type(&mut rng, d)));
        }
    }
    out
}

#[test]
fn agrees_with_naive_enumerator() {
    for (a, b) in corpus_pairs() {
        let Some(naive) = naive_ts::enumerate(&a, &b, 20_000) else { continue };
        let ts = system(&a, &b);
        let lib: BTreeSet<String> = ts.states.iter().map(naive_ts::key_of).collect();
        let oracle: BTreeSet<String> = naive.states.keys().cloned().collect();
        assert_eq!(lib, oracle, "{a} || {b}");
        let lib_bad: BTreeSet<String> = ts.violating().into_iter().map(|s| naive_ts::key_of(&ts.states[s])).collect();
        assert_eq!(lib_bad, naive.violating(), "{a} || {b}");
    }
}

fn invariants(ts: &TransitionSystem) -> Result<(), String> {
    for e in &ts.edges {
        let (from, to) = (&ts.states[e.from], &ts.states[e.to]);
        if e.rule == "TS-Abt1" && e.to != ts.initial {
            return Err(format!("abort edge {} -> {}", e.from, e.to));
        }
        if e.rule == "TS-Rll1" && to.parties.iter().any(|p| p.current != p.checkpoint.ty) {
            return Err(format!("roll edge {} -> {} leaves a current off its checkpoint", e.from, e.to));
        }
        for (i, (pf, pt)) in from.parties.iter().zip(&to.parties).enumerate() {
            let own_commit = e.party == i && matches!(e.rule, "TS-Cmt1" | "TS-Cmt2");
            if pf.checkpoint.imposed && !pt.checkpoint.imposed && !own_commit && e.rule != "TS-Abt1" {
                return Err(format!("imposed flag of party {i} cleared by {}", e.rule));
            }
            if !pf.checkpoint.imposed && pt.checkpoint.imposed && !(e.party != i && e.rule == "TS-Cmt1") {
                return Err(format!("imposed flag of party {i} set by {}", e.rule));
            }
        }
    }
    for (k, s) in ts.states.iter().enumerate() {
        if s.parties.iter().any(|p| p.current == SessionType::Err) && ts.outgoing(k).next().is_some() {
            return Err(format!("err state {k} has successors"));
        }
    }
    for &k in &ts.terminals {
        if ts.outgoing(k).next().is_some() {
            return Err(format!("terminal {k} has successors"));
        }
    }
    Ok(())
}

#[test]
fn invariants_on_corpus_pairs() {
    for (a, b) in corpus_pairs() {
        invariants(&system(&a, &b)).unwrap_or_else(|m| panic!("{a} || {b}: {m}"));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn symmetric_and_well_behaved(seed in any::<u64>(), d in 1usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (random_type(&mut rng, d), random_type(&mut rng, d));
        let ab = check_compliance(&a, &b).unwrap();
        let ba = check_compliance(&b, &a).unwrap();
        prop_assert_eq!(ab.verdict, ba.verdict);
        prop_assert_eq!(ab.states, ba.states);
        let ts = system(&a, &b);
        prop_assert!(invariants(&ts).is_ok(), "{:?}", invariants(&ts));
        let again = system(&a, &b);
        prop_assert_eq!(export_dot(&ts), export_dot(&again));
        for v in &ab.violations {
            prop_assert!(v.terminal.parties.iter().any(|p| p.current != SessionType::End));
        }
    }
}
