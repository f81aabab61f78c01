use std::fs;
use std::path::{Path, PathBuf};

use cherry_core::compliance::{
    check_compliance_with_budget, check_rollback_safety, export_dot, reachable_system, ComplianceError, ComplianceReport, SafetyReport,
    TransitionSystem, TypeConfiguration, Verdict, DEFAULT_BUDGET,
};
use cherry_core::multiparty::{fill_roles, m_check_compliance, m_infer_collaboration, m_reachable_system, Multiparty};
use cherry_core::parser::{parse_program, parse_type, ParseDiagnostic, Program};
use cherry_core::runtime::{
    explore_graph, replay_rendered, simulate, Binary, DecisionOracle, ExploreOptions, Mode, Policy, Semantics, StopReason,
};
use cherry_core::syntax::Collab;
use cherry_core::types::SessionType;
use cherry_core::typing::{infer_collaboration, ChannelRole, TypeAssociations};
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::trace::{stop_text, trace_from_json, trace_to_json, transcript_to_json};
use crate::{dot, Command, ErrorMode, Limits, Output, Simulation};

const OK: u8 = 0;
const VIOLATION: u8 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    /// Rendered diagnostics, one per line.
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Type(String),
    #[error("state budget of {0} exhausted; raise it with --budget or CHERRY_BUDGET")]
    Budget(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Type(_) => 1,
            CliError::Io { .. } | CliError::Parse(_) | CliError::Input(_) => 2,
            CliError::Budget(_) => 3,
        }
    }
}

impl From<ComplianceError> for CliError {
    fn from(e: ComplianceError) -> Self {
        match e {
            ComplianceError::Budget(n) => CliError::Budget(n),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

fn parse_error(path: &Path, text: &str, ds: &[ParseDiagnostic]) -> CliError {
    let lines: Vec<String> = ds
        .iter()
        .map(|d| {
            let before = &text[..d.span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let col = before.chars().count() - before.rfind('\n').map_or(0, |i| before[..=i].chars().count()) + 1;
            format!("{}:{line}:{col}: {}", path.display(), d.message)
        })
        .collect();
    CliError::Parse(lines.join("\n"))
}

fn load_program(path: &Path) -> Result<(String, Program), CliError> {
    let text = read(path)?;
    let p = parse_program(&text).map_err(|d| parse_error(path, &text, &d))?;
    Ok((text, p))
}

fn load_type(path: &Path) -> Result<SessionType, CliError> {
    let text = read(path)?;
    parse_type(&text).map_err(|d| parse_error(path, &text, &d))
}

fn is_multiparty(c: &Collab) -> bool {
    c.components().iter().any(|k| matches!(k, Collab::Request { arity: Some(_), .. } | Collab::Accept { role: Some(_), .. }))
}

fn has_roles(t: &SessionType) -> bool {
    t.erase_roles() != *t
}

fn semantics(multiparty: bool, mode: ErrorMode) -> Box<dyn Semantics> {
    let m = match mode {
        ErrorMode::Plain => Mode::Plain,
        ErrorMode::Detect => Mode::Detect,
    };
    if multiparty {
        Box::new(Multiparty(m))
    } else {
        Box::new(Binary(m))
    }
}

fn print_json(j: &Json) {
    println!("{}", serde_json::to_string_pretty(j).expect("json"));
}

pub fn run(cmd: Command) -> Result<u8, CliError> {
    match cmd {
        Command::Infer { file, out } => infer(&file, &out),
        Command::Check { file, dot, out, limits } => check(&file, dot.as_deref(), &out, &limits),
        Command::Comply { types, dot, out, limits } => comply(&types, dot.as_deref(), &out, &limits),
        Command::Run { file, out, sim, trace } => run_program(&file, &out, &sim, trace.as_deref()),
        Command::Explore { file, dot, out, limits, depth, error_mode } => explore(&file, dot.as_deref(), &out, &limits, depth, error_mode),
        Command::Graph { inputs, limits, dot } => graph(&inputs, &limits, dot.as_deref()),
        Command::Replay { trace, out } => replay(&trace, &out),
    }
}

fn role_text(r: ChannelRole) -> (&'static str, Option<u32>) {
    match r {
        ChannelRole::Requester(n) => ("requester", n),
        ChannelRole::Acceptor(n) => ("acceptor", n),
    }
}

fn associations_json(a: &TypeAssociations) -> Json {
    Json::Array(
        a.iter()
            .map(|a| {
                let (role, index) = role_text(a.role);
                json!({ "channel": &*a.channel, "role": role, "index": index, "type": a.ty.to_string() })
            })
            .collect(),
    )
}

fn infer(file: &Path, out: &Output) -> Result<u8, CliError> {
    let (_, p) = load_program(file)?;
    let a = if is_multiparty(&p.main) { m_infer_collaboration(&p.main, &p.signatures) } else { infer_collaboration(&p.main, &p.signatures) };
    let a = a.map_err(|e| CliError::Type(format!("{}: {e}", file.display())))?;
    if out.json {
        print_json(&json!({ "associations": associations_json(&a) }));
    } else {
        for x in a.iter() {
            let (role, index) = role_text(x.role);
            let bar = if role == "requester" { "~" } else { "" };
            match index {
                Some(n) => println!("{bar}{}[{n}]: {}", x.channel, x.ty),
                None => println!("{bar}{}: {}", x.channel, x.ty),
            }
        }
    }
    Ok(OK)
}

fn compliance_budget(l: &Limits) -> usize {
    l.budget.unwrap_or(DEFAULT_BUDGET)
}

fn system_of(types: &[SessionType], budget: usize) -> Result<TransitionSystem, ComplianceError> {
    let c0 = TypeConfiguration::initial(types);
    if types.len() == 2 && !types.iter().any(has_roles) {
        reachable_system(&c0, budget)
    } else {
        m_reachable_system(&c0, budget)
    }
}

fn report_json(r: &ComplianceReport) -> Json {
    json!({
        "verdict": match r.verdict { Verdict::Compliant => "compliant", Verdict::Violating => "violating" },
        "states": r.states,
        "edges": r.edges,
        "violations": r.violations.iter().map(|v| json!({
            "state": v.state,
            "configuration": v.terminal.to_string(),
            "parties": v.terminal.parties.iter().map(|p| json!({
                "checkpoint": p.checkpoint.ty.to_string(),
                "imposed": p.checkpoint.imposed,
                "current": p.current.to_string(),
            })).collect::<Vec<_>>(),
            "path": v.path,
        })).collect::<Vec<_>>(),
    })
}

fn print_report(indent: &str, r: &ComplianceReport) {
    let verdict = if r.is_compliant() { "compliant" } else { "violating" };
    println!("{indent}{verdict} ({} states, {} transitions)", r.states, r.edges);
    for v in &r.violations {
        println!("{indent}  violating terminal {}: {}", v.state, v.terminal);
        for (k, p) in v.terminal.parties.iter().enumerate() {
            println!("{indent}    T{} --> {}", k + 1, p.current);
        }
        println!("{indent}    via {}", if v.path.is_empty() { "(initial state)".to_string() } else { v.path.join(", ") });
    }
}

fn safety_json(file: &Path, r: &SafetyReport) -> Json {
    json!({
        "file": file.display().to_string(),
        "rollback_safe": r.safe,
        "diagnostics": r.diagnostics,
        "associations": associations_json(&r.associations),
        "groups": r.groups.iter().map(|g| json!({
            "channel": &*g.channel,
            "members": g.members,
            "types": g.types.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
            "report": report_json(&g.report),
        })).collect::<Vec<_>>(),
    })
}

fn check(file: &Path, dot_path: Option<&Path>, out: &Output, limits: &Limits) -> Result<u8, CliError> {
    let (_, p) = load_program(file)?;
    let budget = compliance_budget(limits);
    let r = check_rollback_safety(&p.main, &p.signatures, budget)?;
    if let Some(path) = dot_path {
        let mut text = String::new();
        for g in &r.groups {
            text.push_str(&export_dot(&system_of(&g.types, budget)?));
        }
        write(path, &text)?;
    }
    if out.json {
        print_json(&safety_json(file, &r));
    } else {
        println!("{}: {}", file.display(), if r.safe { "rollback safe" } else { "not rollback safe" });
        for d in &r.diagnostics {
            println!("  {d}");
        }
        for g in &r.groups {
            let members: Vec<String> = g.types.iter().map(|t| t.to_string()).collect();
            println!("  channel {}: {}", g.channel, members.join("  ||  "));
            print_report("    ", &g.report);
        }
    }
    Ok(if r.safe { OK } else { VIOLATION })
}

fn comply(files: &[PathBuf], dot_path: Option<&Path>, out: &Output, limits: &Limits) -> Result<u8, CliError> {
    let mut types = files.iter().map(|f| load_type(f)).collect::<Result<Vec<_>, _>>()?;
    let budget = compliance_budget(limits);
    let r = if types.len() == 2 && !types.iter().any(has_roles) {
        check_compliance_with_budget(&types[0], &types[1], budget)?
    } else {
        types = types.iter().enumerate().map(|(k, t)| fill_roles(t, k as u32 + 1)).collect();
        m_check_compliance(&types, budget)?
    };
    if let Some(path) = dot_path {
        write(path, &export_dot(&system_of(&types, budget)?))?;
    }
    if out.json {
        print_json(&json!({ "types": types.iter().map(|t| t.to_string()).collect::<Vec<_>>(), "report": report_json(&r) }));
    } else {
        for (k, t) in types.iter().enumerate() {
            println!("T{}: {t}", k + 1);
        }
        print_report("", &r);
    }
    Ok(if r.is_compliant() { OK } else { VIOLATION })
}

fn run_program(file: &Path, out: &Output, sim: &Simulation, trace_path: Option<&Path>) -> Result<u8, CliError> {
    let (text, p) = load_program(file)?;
    let multiparty = is_multiparty(&p.main);
    let sem = semantics(multiparty, sim.error_mode);
    let (oracle, mode) = match (&sim.script, sim.seed) {
        (Some(s), _) => (DecisionOracle::scripted(&p.signatures, crate::trace::parse_script(&read(s)?)?), "scripted"),
        (None, Some(seed)) => (DecisionOracle::seeded(&p.signatures, seed), "seeded"),
        (None, None) => (DecisionOracle::constant(&p.signatures), "constant"),
    };
    let policy = sim.seed.map_or(Policy::FirstEnabled, Policy::SeededRandom);
    let t = simulate(&p.main, sem.as_ref(), oracle, policy, sim.max_steps);
    let j = trace_to_json(&text, multiparty, sim.error_mode == ErrorMode::Detect, mode, sim.seed, &t);
    if let Some(path) = trace_path {
        write(path, &serde_json::to_string_pretty(&j).expect("json"))?;
    }
    if out.json {
        print_json(&j);
    } else {
        for (k, s) in t.steps.iter().enumerate() {
            println!("{:>4}  {}", k + 1, s.label);
        }
        println!("stopped: {} after {} steps", stop_text(&t.stop), t.steps.len());
        println!("final state: {}", t.final_state());
    }
    Ok(if t.stop == StopReason::Error { VIOLATION } else { OK })
}

fn explore(file: &Path, dot_path: Option<&Path>, out: &Output, limits: &Limits, depth: usize, mode: ErrorMode) -> Result<u8, CliError> {
    let (_, p) = load_program(file)?;
    let sem = semantics(is_multiparty(&p.main), mode);
    let mut opts = ExploreOptions { depth, ..ExploreOptions::default() };
    if let Some(b) = limits.budget {
        opts.budget = b;
    }
    let g = explore_graph(&p.main, sem.as_ref(), &p.signatures, opts).map_err(|e| CliError::Input(format!("{}: {e}", file.display())))?;
    if let Some(path) = dot_path {
        write(path, &dot::exploration(&g))?;
    }
    let r = cherry_core::runtime::explore::report(&g, depth);
    let labels = |t: &cherry_core::runtime::Trace| t.steps.iter().map(|s| s.label.to_string()).collect::<Vec<_>>();
    if out.json {
        print_json(&json!({
            "file": file.display().to_string(),
            "states": r.states,
            "edges": r.edges,
            "depth": r.depth_bound,
            "budget_exceeded": r.budget_exceeded,
            "clean": r.is_clean(),
            "completed": r.completed.len(),
            "errors": r.errors.iter().map(|e| json!({ "kind": e.kind.to_string(), "rule": e.rule, "path": labels(&e.trace), "transcript": transcript_to_json(&e.trace.transcript) })).collect::<Vec<_>>(),
            "progress_violations": r.progress_violations.iter().map(|t| json!({ "path": labels(t), "state": t.final_state().to_string() })).collect::<Vec<_>>(),
        }));
    } else {
        println!("{}: {} states, {} transitions, depth bound {}", file.display(), r.states, r.edges, r.depth_bound);
        println!("  completed terminal states: {}", r.completed.len());
        for e in &r.errors {
            println!("  {} ({}) after: {}", e.kind, e.rule, labels(&e.trace).join(", "));
        }
        for t in &r.progress_violations {
            println!("  stuck after: {}", labels(t).join(", "));
            println!("    {}", t.final_state());
        }
        println!("  {}", if r.is_clean() { "no errors, no stuck sessions" } else { "errors found" });
    }
    if r.budget_exceeded {
        return Err(CliError::Budget(opts.budget));
    }
    Ok(if r.is_clean() { OK } else { VIOLATION })
}

fn graph(inputs: &[PathBuf], limits: &Limits, dot_path: Option<&Path>) -> Result<u8, CliError> {
    let budget = compliance_budget(limits);
    let text = match inputs {
        [one] => {
            let (_, p) = load_program(one)?;
            let r = check_rollback_safety(&p.main, &p.signatures, budget)?;
            if r.groups.is_empty() {
                return Err(CliError::Type(r.diagnostics.join("; ")));
            }
            let mut text = String::new();
            for g in &r.groups {
                text.push_str(&export_dot(&system_of(&g.types, budget)?));
            }
            text
        }
        _ => {
            let mut types = inputs.iter().map(|f| load_type(f)).collect::<Result<Vec<_>, _>>()?;
            if types.len() != 2 || types.iter().any(has_roles) {
                types = types.iter().enumerate().map(|(k, t)| fill_roles(t, k as u32 + 1)).collect();
            }
            export_dot(&system_of(&types, budget)?)
        }
    };
    match dot_path {
        Some(p) => write(p, &text)?,
        None => print!("{text}"),
    }
    Ok(OK)
}

fn replay(path: &Path, out: &Output) -> Result<u8, CliError> {
    let rec = trace_from_json(&read(path)?)?;
    let p = parse_program(&rec.program).map_err(|d| parse_error(path, &rec.program, &d))?;
    let sem = semantics(rec.multiparty, if rec.detect { ErrorMode::Detect } else { ErrorMode::Plain });
    let oracle = DecisionOracle::replaying(&p.signatures, &rec.transcript);
    let result = replay_rendered(&p.main, sem.as_ref(), oracle, &rec.steps);
    let (ok, message) = match &result {
        Ok(t) if t.transcript == rec.transcript => (true, format!("replayed {} steps", t.steps.len())),
        Ok(t) => (false, format!("replayed {} steps but consumed {} of {} recorded decisions", t.steps.len(), t.transcript.len(), rec.transcript.len())),
        Err(e) => (false, e.to_string()),
    };
    if out.json {
        print_json(&json!({ "ok": ok, "steps": rec.steps.len(), "message": message }));
    } else {
        println!("{}: {message}", path.display());
    }
    Ok(if ok { OK } else { VIOLATION })
}
