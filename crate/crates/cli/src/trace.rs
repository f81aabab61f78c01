//! JSON forms of traces, scripts and values.

use std::collections::BTreeMap;

use cherry_core::runtime::{StopReason, Trace};
use cherry_core::syntax::{name, Name, Value};
use serde_json::{json, Map, Value as Json};

use crate::commands::CliError;

pub fn value_to_json(v: &Value) -> Json {
    match v {
        Value::Int(n) => json!(n),
        Value::Bool(b) => json!(b),
        Value::Str(s) => json!(&**s),
    }
}

pub fn value_from_json(j: &Json) -> Option<Value> {
    match j {
        Json::Bool(b) => Some(Value::Bool(*b)),
        Json::Number(n) => n.as_i64().map(Value::Int),
        Json::String(s) => Some(Value::Str(name(s))),
        _ => None,
    }
}

/// `{"f": [v0, v1, ...], ...}`
pub fn parse_script(text: &str) -> Result<BTreeMap<Name, Vec<Value>>, CliError> {
    let bad = |m: &str| CliError::Input(format!("script: {m}"));
    let j: Json = serde_json::from_str(text).map_err(|e| bad(&e.to_string()))?;
    let obj = j.as_object().ok_or_else(|| bad("expected an object of arrays"))?;
    let mut out = BTreeMap::new();
    for (f, vs) in obj {
        let vs = vs.as_array().ok_or_else(|| bad(&format!("`{f}` is not an array")))?;
        let vs = vs.iter().map(|v| value_from_json(v).ok_or_else(|| bad(&format!("unsupported value {v} for `{f}`")))).collect::<Result<_, _>>()?;
        out.insert(name(f), vs);
    }
    Ok(out)
}

pub fn stop_text(s: &StopReason) -> String {
    match s {
        StopReason::Stuck => "stuck".into(),
        StopReason::Error => "error".into(),
        StopReason::StepBudget => "step budget".into(),
        StopReason::OracleFailure(e) => format!("oracle failure: {e}"),
    }
}

pub fn transcript_to_json(t: &[(Name, Value)]) -> Json {
    Json::Array(t.iter().map(|(f, v)| json!({ "fn": &**f, "value": value_to_json(v) })).collect())
}

pub struct Recorded {
    pub program: String,
    pub multiparty: bool,
    pub detect: bool,
    pub steps: Vec<(String, String)>,
    pub transcript: Vec<(Name, Value)>,
}

pub fn trace_to_json(program: &str, multiparty: bool, detect: bool, oracle_mode: &str, seed: Option<u64>, t: &Trace) -> Json {
    let mut oracle = Map::new();
    oracle.insert("mode".into(), json!(oracle_mode));
    if let Some(s) = seed {
        oracle.insert("seed".into(), json!(s));
    }
    oracle.insert("transcript".into(), transcript_to_json(&t.transcript));
    json!({
        "initial": program,
        "semantics": if multiparty { "multiparty" } else { "binary" },
        "error_mode": if detect { "detect" } else { "plain" },
        "steps": t.steps.iter().map(|s| json!({ "label": s.label.to_string(), "state": s.state.to_string() })).collect::<Vec<_>>(),
        "stop": stop_text(&t.stop),
        "oracle": Json::Object(oracle),
    })
}

pub fn trace_from_json(text: &str) -> Result<Recorded, CliError> {
    let bad = |m: &str| CliError::Input(format!("trace: {m}"));
    let j: Json = serde_json::from_str(text).map_err(|e| bad(&e.to_string()))?;
    let field = |k: &str| j.get(k).ok_or_else(|| bad(&format!("missing `{k}`")));
    let string = |v: &Json, k: &str| v.as_str().map(String::from).ok_or_else(|| bad(&format!("`{k}` is not a string")));
    let program = string(field("initial")?, "initial")?;
    let multiparty = match field("semantics")?.as_str() {
        Some("binary") => false,
        Some("multiparty") => true,
        _ => return Err(bad("`semantics` must be \"binary\" or \"multiparty\"")),
    };
    let detect = match j.get("error_mode").and_then(Json::as_str) {
        None | Some("detect") => true,
        Some("plain") => false,
        _ => return Err(bad("`error_mode` must be \"plain\" or \"detect\"")),
    };
    let steps = field("steps")?
        .as_array()
        .ok_or_else(|| bad("`steps` is not an array"))?
        .iter()
        .map(|s| Ok((string(s.get("label").unwrap_or(&Json::Null), "label")?, string(s.get("state").unwrap_or(&Json::Null), "state")?)))
        .collect::<Result<_, CliError>>()?;
    let transcript = field("oracle")?
        .get("transcript")
        .and_then(Json::as_array)
        .ok_or_else(|| bad("missing `oracle.transcript`"))?
        .iter()
        .map(|d| {
            let f = d.get("fn").and_then(Json::as_str).ok_or_else(|| bad("transcript entry without `fn`"))?;
            let v = d.get("value").and_then(value_from_json).ok_or_else(|| bad("transcript entry without a value"))?;
            Ok((name(f), v))
        })
        .collect::<Result<_, CliError>>()?;
    Ok(Recorded { program, multiparty, detect, steps, transcript })
}
