mod common;

use cherry_core::gen::{arbitrary_programs, GenConfig};
use cherry_core::parser::{parse_collab, parse_process, parse_program, parse_type, FnSig, Signatures};
use cherry_core::syntax::{name, Chan, Collab, Expr, Op, Process, Sort, Value};
use cherry_core::types::SessionType;
use cherry_core::typing::*;

fn fixture(n: &str) -> SessionType {
    let text = std::fs::read_to_string(format!("{}/../cli/examples/types/{n}.chty", env!("CARGO_MANIFEST_DIR"))).unwrap();
    parse_type(&text).unwrap()
}

fn infer(src: &str) -> TypeAssociations {
    let p = parse_program(src).unwrap();
    infer_collaboration(&p.main, &p.signatures).unwrap()
}

fn types_of(n: &str) -> Vec<SessionType> {
    let p = common::load(n);
    infer_collaboration(&p.main, &p.signatures).unwrap().iter().map(|a| a.ty.clone()).collect()
}

#[test]
fn expression_sorts() {
    let g = Sorting::new();
    let s = Signatures::new();
    let add = Expr::Op(Op::Add, vec![Expr::Lit(Value::Int(1)), Expr::Lit(Value::Int(2))]);
    assert_eq!(sort_of_expression(&g, &s, &add), Ok(Sort::Int));
    let gx = g.extend(&name("x"), Sort::Bool).unwrap();
    let and = Expr::Op(Op::And, vec![Expr::Var(name("x")), Expr::Lit(Value::Bool(true))]);
    assert_eq!(sort_of_expression(&gx, &s, &and), Ok(Sort::Bool));
    let bad = Expr::Op(Op::And, vec![Expr::Lit(Value::Int(1)), Expr::Lit(Value::Bool(true))]);
    assert!(matches!(sort_of_expression(&g, &s, &bad), Err(TypeError::SortMismatch { .. })));
    assert!(matches!(sort_of_expression(&g, &s, &Expr::Var(name("y"))), Err(TypeError::UnboundVariable(_))));
    assert!(gx.extend(&name("x"), Sort::Int).is_err());
}

#[test]
fn uninterpreted_calls_are_checked() {
    let mut sigs = Signatures::new();
    sigs.insert(name("f"), FnSig { args: vec![Sort::Int, Sort::Str], result: Sort::Bool, domain: None });
    let g = Sorting::new();
    let call = |args| Expr::Call(name("f"), args);
    assert_eq!(sort_of_expression(&g, &sigs, &call(vec![Expr::Lit(Value::Int(1)), Expr::Lit(Value::Str(name("m")))])), Ok(Sort::Bool));
    assert!(matches!(sort_of_expression(&g, &sigs, &call(vec![Expr::Lit(Value::Int(1))])), Err(TypeError::Arity { .. })));
    assert!(sort_of_expression(&g, &sigs, &call(vec![Expr::Lit(Value::Int(1)), Expr::Lit(Value::Int(2))])).is_err());
}

#[test]
fn process_examples() {
    let ty = |s: &str| type_of_process(&Basis::new(), &Sorting::new(), &Signatures::new(), &parse_process(s).unwrap()).unwrap();
    assert_eq!(ty("roll"), (None, SessionType::Roll));
    let (subject, t) = ty("if true then k!<1>.0 else roll");
    assert_eq!(subject, Some(Chan::Var(name("k"))));
    assert_eq!(t, SessionType::choice(SessionType::out(Sort::Int, SessionType::End), SessionType::Roll));
    assert_eq!(ty("k?(z:int). commit. abort").1, parse_type("?[int]. cmt. abt").unwrap());
    assert!(ty("rec X. k<+l. X").1.alpha_eq(&parse_type("mu t. sel[l]. t").unwrap()));
    assert!(ty("k>+{a: 0, b: roll}").1 == parse_type("brn[a: end; b: roll]").unwrap());
}

#[test]
fn process_errors() {
    let ty = |s: &str| type_of_process(&Basis::new(), &Sorting::new(), &Signatures::new(), &parse_process(s).unwrap());
    assert!(matches!(ty("k!<1>. j!<2>. 0"), Err(TypeError::MixedSessionVariables { .. })));
    assert!(matches!(ty("k!<1 && true>. 0"), Err(TypeError::SortMismatch { .. })));
    assert!(matches!(ty("if 1 then 0 else 0"), Err(TypeError::SortMismatch { .. })));
}

#[test]
fn vod_types() {
    assert_eq!(types_of("vod_b"), vec![fixture("t_user"), fixture("t_service")]);
    assert_eq!(types_of("vod_c"), vec![fixture("t_user"), fixture("t_service_c")]);
    assert_eq!(types_of("vod_d"), vec![fixture("t_user_d"), fixture("t_service_d")]);
}

#[test]
fn producer_consumer_types() {
    let pc = types_of("producer_consumer");
    assert!(pc[0].alpha_eq(&fixture("t_consumer")) && pc[1].alpha_eq(&fixture("t_producer")), "{pc:?}");
    let pc2 = types_of("producer_consumer_prime");
    assert!(pc2[0].alpha_eq(&fixture("t_consumer")) && pc2[1].alpha_eq(&fixture("t_producer_prime")), "{pc2:?}");
}

#[test]
fn collaboration_examples() {
    let a = infer("main = request a(x).0 | accept a(y).0");
    let roles: Vec<_> = a.iter().map(|a| (a.role, a.ty.clone())).collect();
    assert_eq!(roles, vec![(ChannelRole::Requester(None), SessionType::End), (ChannelRole::Acceptor(None), SessionType::End)]);

    let a = infer("main = request a(x). x!<1>.0 | accept a(y). y?(v:int).0 | accept a(z). roll");
    assert_eq!(a.requesters("a").count(), 1);
    let acc: Vec<_> = a.acceptors("a").map(|a| a.ty.clone()).collect();
    assert_eq!(acc, vec![parse_type("?[int]. end").unwrap(), SessionType::Roll]);

    let c = parse_collab("request a(x).0 | accept a(y).0").unwrap();
    let p = cherry_core::runtime::reduction_steps(
        &c,
        &cherry_core::runtime::DecisionOracle::constant(&Signatures::new()),
        cherry_core::runtime::Mode::Detect,
    );
    assert_eq!(infer_collaboration(&p.steps[0].next, &Signatures::new()), Err(TypeError::NotInitial));
}

fn branch_labels_process(p: &Process, out: &mut Vec<Vec<String>>) {
    match p {
        Process::Send { cont, .. } | Process::Recv { cont, .. } | Process::Select { cont, .. } | Process::Commit(cont) => branch_labels_process(cont, out),
        Process::Branch { arms, .. } => {
            out.push(arms.iter().map(|(l, _)| l.to_string()).collect());
            for (_, q) in arms {
                branch_labels_process(q, out);
            }
        }
        Process::If { then, els, .. } => {
            branch_labels_process(then, out);
            branch_labels_process(els, out);
        }
        Process::Rec { body, .. } => branch_labels_process(body, out),
        _ => {}
    }
}

fn branch_labels_type(t: &SessionType, out: &mut Vec<Vec<String>>) {
    match t {
        SessionType::Out { cont, .. } | SessionType::In { cont, .. } | SessionType::Sel { cont, .. } | SessionType::Cmt(cont) => branch_labels_type(cont, out),
        SessionType::Brn { arms, .. } => {
            out.push(arms.iter().map(|(l, _)| l.to_string()).collect());
            for (_, u) in arms {
                branch_labels_type(u, out);
            }
        }
        SessionType::Choice(l, r) => {
            branch_labels_type(l, out);
            branch_labels_type(r, out);
        }
        SessionType::Mu(_, body) => branch_labels_type(body, out),
        _ => {}
    }
}

#[test]
fn inference_is_deterministic_and_preserves_branch_labels() {
    let cfg = GenConfig { depth: 6, ..GenConfig::default() };
    for p in arbitrary_programs(17, 300, &cfg) {
        let a = infer_collaboration(&p.main, &p.signatures).unwrap();
        assert_eq!(infer_collaboration(&p.main, &p.signatures).unwrap(), a);
        for (assoc, comp) in a.iter().zip(p.main.components()) {
            let (Collab::Request { body, .. } | Collab::Accept { body, .. }) = comp else { unreachable!() };
            let (mut lp, mut lt) = (Vec::new(), Vec::new());
            branch_labels_process(body, &mut lp);
            branch_labels_type(&assoc.ty, &mut lt);
            assert_eq!(lp, lt, "{p}");
        }
    }
}
