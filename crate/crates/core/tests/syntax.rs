mod common;

use cherry_core::canon::{canonical_process, canonicalize, equivalent, process_equivalent};
use cherry_core::gen::{arbitrary_programs, random_multi_session_program, GenConfig};
use cherry_core::parser::{parse_collab, parse_process, Signatures};
use cherry_core::runtime::{enabled_actions, explore_graph, Binary, DecisionOracle, ExploreOptions, Mode};
use cherry_core::syntax::*;
use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

fn p(s: &str) -> Process {
    parse_process(s).unwrap_or_else(|d| panic!("{s}: {d:?}"))
}

fn c(s: &str) -> Collab {
    parse_collab(s).unwrap_or_else(|d| panic!("{s}: {d:?}"))
}

fn var(x: &str) -> NameRef {
    NameRef::Var(name(x))
}

fn plus(n: u32) -> Endpoint {
    Endpoint { session: SessionName(n), side: Side::Plus }
}

#[test]
fn substitute_session_variable() {
    let got = substitute(&p("x!<1>.0"), &var("x"), &Replacement::Chan(plus(1))).unwrap();
    let want = Process::Send { chan: Chan::End(plus(1)), peer: None, expr: Expr::Lit(Value::Int(1)), cont: Box::new(Process::Inact) };
    assert_eq!(got, want);
}

#[test]
fn substitute_bound_proc_var_is_identity() {
    let t = p("rec X. x!<1>.X");
    let got = substitute(&t, &NameRef::ProcVar(name("X")), &Replacement::Process(Process::Inact)).unwrap();
    assert_eq!(got, t);
}

#[test]
fn substitute_value_into_guard() {
    let got = substitute(&p("if y then roll else 0"), &var("y"), &Replacement::Value(Value::Bool(true))).unwrap();
    assert_eq!(got, p("if true then roll else 0"));
}

#[test]
fn substitute_kind_mismatch() {
    let err = substitute(&p("rec X. x!<1>.X"), &NameRef::ProcVar(name("X")), &Replacement::Value(Value::Int(1)));
    assert!(matches!(err, Err(SyntaxError::InvalidSubstitution(_))));
}

#[test]
fn substitute_respects_inner_binder() {
    let t = p("x!<u>. x?(u:int). x!<u>. 0");
    let got = substitute(&t, &var("u"), &Replacement::Value(Value::Int(7))).unwrap();
    assert_eq!(got, p("x!<7>. x?(u:int). x!<u>. 0"));
}

#[test]
fn substitute_avoids_capture_of_process() {
    // X's replacement mentions a free `u`; the binder `u` around the occurrence must not capture it.
    let t = p("x?(u:int). X");
    let got = substitute(&t, &NameRef::ProcVar(name("X")), &Replacement::Process(p("x!<u>.0"))).unwrap();
    let Process::Recv { var: bound, cont, .. } = &got else { panic!("{got}") };
    assert_ne!(&**bound, "u");
    assert!(free_vars(&got).contains("u"));
    assert!(free_vars(cont).contains("u"));
}

#[test]
fn unfold_examples() {
    assert!(process_equivalent(&unfold_recursion(&p("rec X. k!<1>.X")).unwrap(), &p("k!<1>. rec X. k!<1>.X")));
    assert_eq!(unfold_recursion(&p("rec X. 0")).unwrap(), Process::Inact);
    let got = unfold_recursion(&p("rec X. rec Y. k?(z:int).X")).unwrap();
    assert!(process_equivalent(&got, &p("rec Y. k?(z:int). rec X. rec Y. k?(z:int).X")));
    assert_eq!(unfold_recursion(&Process::Roll), Err(SyntaxError::NotARecursion));
}

#[test]
fn canonical_laws() {
    let (a, b, d) = ("request a(x). x!<1>.0", "accept a(y). y?(z:int).0", "accept b(w). w<+l.0");
    assert_eq!(canonicalize(&c(&format!("{a} | {b}"))), canonicalize(&c(&format!("{b} | {a}"))));
    let left = Collab::Par(Box::new(Collab::Par(Box::new(c(a)), Box::new(c(b)))), Box::new(c(d)));
    let right = Collab::Par(Box::new(c(a)), Box::new(Collab::Par(Box::new(c(b)), Box::new(c(d)))));
    assert_eq!(canonicalize(&left), canonicalize(&right));
    assert_eq!(canonical_process(&p("rec X. k!<1>.X")), canonical_process(&p("rec Y. k!<1>.Y")));
}

#[test]
fn equivalent_examples() {
    assert!(equivalent(&c("request a(x).0 | accept a(y).0"), &c("accept a(y).0 | request a(x).0")));
    let roll = c("accept a(y). roll");
    let abort = c("accept a(y). abort");
    assert!(!equivalent(&roll, &abort));
}

// Bounded strong bisimilarity on closed processes without oracle calls, comparing action labels.
fn bisimilar(p: &Process, q: &Process, depth: usize) -> bool {
    if depth == 0 {
        return true;
    }
    let o = DecisionOracle::constant(&Signatures::new());
    let (ap, aq) = (enabled_actions(p, &o).unwrap(), enabled_actions(q, &o).unwrap());
    let matched = |xs: &[cherry_core::runtime::Action], ys: &[cherry_core::runtime::Action]| {
        xs.iter().all(|x| ys.iter().any(|y| x.label == y.label && bisimilar(&x.cont, &y.cont, depth - 1)))
    };
    matched(&ap, &aq) && matched(&aq, &ap)
}

#[test]
fn unfolding_is_bisimilar_but_not_equivalent() {
    let folded = p("rec X. k!<1>.X");
    let unfolded = p("k!<1>. rec X. k!<1>.X");
    let wrap = |q: &Process| Collab::Accept { chan: name("a"), role: None, var: name("k"), body: q.clone() };
    assert!(!equivalent(&wrap(&folded), &wrap(&unfolded)));
    assert!(!process_equivalent(&folded, &unfolded));
    assert!(bisimilar(&folded, &unfolded, 6));
    assert!(bisimilar(&unfolded, &folded, 6));
    assert!(!bisimilar(&folded, &p("k!<1>. 0"), 3));
}

#[test]
fn parsed_programs_are_initial() {
    for n in common::CORPUS {
        assert!(common::load(n).main.is_initial(), "{n}");
    }
}

// Terms over the free variables u:int, v:bool and session variable k.
fn arb_expr(sort: Sort) -> BoxedStrategy<Expr> {
    match sort {
        Sort::Int => prop_oneof![(-3i64..4).prop_map(|n| Expr::Lit(Value::Int(n))), Just(Expr::Var(name("u"))), Just(Expr::Var(name("z")))]
            .prop_recursive(2, 6, 2, |e| (e.clone(), e).prop_map(|(a, b)| Expr::Op(Op::Add, vec![a, b])))
            .boxed(),
        _ => prop_oneof![any::<bool>().prop_map(|b| Expr::Lit(Value::Bool(b))), Just(Expr::Var(name("v")))]
            .prop_recursive(2, 6, 2, |e| {
                prop_oneof![
                    (e.clone(), e.clone()).prop_map(|(a, b)| Expr::Op(Op::And, vec![a, b])),
                    e.prop_map(|a| Expr::Op(Op::Not, vec![a])),
                    (arb_expr(Sort::Int), arb_expr(Sort::Int)).prop_map(|(a, b)| Expr::Op(Op::Lt, vec![a, b])),
                ]
            })
            .boxed(),
    }
}

fn k() -> Chan {
    Chan::Var(name("k"))
}

fn arb_process() -> impl Strategy<Value = Process> {
    let leaf = prop_oneof![Just(Process::Inact), Just(Process::Roll), Just(Process::Abort)];
    leaf.prop_recursive(5, 40, 3, |inner| {
        prop_oneof![
            (arb_expr(Sort::Int), inner.clone()).prop_map(|(e, q)| Process::Send { chan: k(), peer: None, expr: e, cont: Box::new(q) }),
            (prop_oneof![Just("z"), Just("u"), Just("v")], inner.clone()).prop_map(|(x, q)| Process::Recv {
                chan: k(),
                peer: None,
                var: name(x),
                sort: if x == "v" { Sort::Bool } else { Sort::Int },
                cont: Box::new(q)
            }),
            (arb_expr(Sort::Bool), inner.clone(), inner.clone()).prop_map(|(e, a, b)| Process::If { cond: e, then: Box::new(a), els: Box::new(b) }),
            inner.clone().prop_map(|q| Process::Commit(Box::new(q))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Process::Branch { chan: k(), peer: None, arms: vec![(name("l"), a), (name("m"), b)] }),
            (arb_expr(Sort::Int), inner).prop_map(|(e, q)| Process::Rec {
                var: name("X"),
                body: Box::new(Process::If {
                    cond: Expr::Op(Op::Lt, vec![e.clone(), Expr::Lit(Value::Int(0))]),
                    then: Box::new(q),
                    els: Box::new(Process::Send { chan: k(), peer: None, expr: e, cont: Box::new(Process::Var(name("X"))) }),
                }),
            }),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn substitution_lemma(t in arb_process(), n in -5i64..5, b in any::<bool>()) {
        let (u, v) = (Replacement::Value(Value::Int(n)), Replacement::Value(Value::Bool(b)));
        let uv = substitute(&substitute(&t, &var("u"), &u).unwrap(), &var("v"), &v).unwrap();
        let vu = substitute(&substitute(&t, &var("v"), &v).unwrap(), &var("u"), &u).unwrap();
        prop_assert_eq!(&uv, &vu);
        prop_assert!(!free_vars(&uv).contains("u") && !free_vars(&uv).contains("v"));
        let ck = substitute(&substitute(&t, &var("k"), &Replacement::Chan(plus(3))).unwrap(), &var("u"), &u).unwrap();
        let kc = substitute(&substitute(&t, &var("u"), &u).unwrap(), &var("k"), &Replacement::Chan(plus(3))).unwrap();
        prop_assert_eq!(ck, kc);
    }

    #[test]
    fn substitution_of_absent_name_is_identity(t in arb_process()) {
        prop_assert_eq!(substitute(&t, &var("absent"), &Replacement::Value(Value::Int(0))).unwrap(), t);
    }

    #[test]
    fn equivalence_is_an_equivalence(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = GenConfig { depth: 3, ..GenConfig::default() };
        let a = random_multi_session_program(&mut rng, &cfg).main;
        let mut comps = a.clone().into_components();
        comps.reverse();
        let b = Collab::par_all(comps.clone());
        comps.rotate_left(1);
        let d = Collab::par_all(comps);
        prop_assert!(equivalent(&a, &a));
        prop_assert_eq!(equivalent(&a, &b), equivalent(&b, &a));
        prop_assert!(equivalent(&a, &b) && equivalent(&b, &d) && equivalent(&a, &d));
        let other = random_multi_session_program(&mut rng, &cfg).main;
        prop_assert_eq!(equivalent(&a, &other), equivalent(&other, &a));
        if equivalent(&a, &other) && equivalent(&other, &d) {
            prop_assert!(equivalent(&a, &d));
        }
    }
}

#[test]
fn canonicalize_is_idempotent_on_ten_thousand_terms() {
    let cfg = GenConfig { depth: 5, ..GenConfig::default() };
    let sem = Binary(Mode::Detect);
    let mut seen = 0usize;
    for prog in arbitrary_programs(99, 700, &cfg) {
        let g = explore_graph(&prog.main, &sem, &prog.signatures, ExploreOptions { depth: 12, budget: 60, forward_only: false }).unwrap();
        for s in std::iter::once(canonicalize(&prog.main)).chain(g.states.iter().cloned()) {
            let once = canonicalize(s.as_collab());
            assert_eq!(canonicalize(once.as_collab()), once);
            seen += 1;
        }
    }
    assert!(seen >= 10_000, "only {seen} terms");
}
