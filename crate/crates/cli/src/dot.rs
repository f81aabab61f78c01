use std::fmt::Write;

use cherry_core::runtime::ExplorationGraph;

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Reachability graph: error states are boxed, stuck states double-circled.
pub fn exploration(g: &ExplorationGraph) -> String {
    let errors = g.error_states();
    let stuck = g.stuck();
    let mut s = String::from("digraph exploration {\n  node [shape=circle];\n");
    for i in 0..g.states.len() {
        let attr = if errors.contains(&i) {
            ", shape=box"
        } else if stuck.contains(&i) {
            ", peripheries=2"
        } else {
            ""
        };
        let _ = writeln!(s, "  {i} [label=\"{i}\", tooltip=\"{}\"{attr}];", escape(&g.states[i].to_string()));
    }
    for e in &g.edges {
        let _ = writeln!(s, "  {} -> {} [label=\"{}\"];", e.from, e.to, escape(&e.label.to_string()));
    }
    s.push_str("}\n");
    s
}
