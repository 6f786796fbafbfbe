use std::collections::BTreeSet;
use std::fmt::Write;

use super::{Kind, StateId, TaskMonitor};

#[derive(Clone, Debug, Default)]
pub struct DotOptions {
    pub hide_self_loops: bool,
    /// Synchronization states, drawn with a bold outline.
    pub sync: BTreeSet<StateId>,
}

/// Render as GraphViz DOT. Finals are double circles, global states are
/// filled green, global edges are bold.
pub fn to_dot(m: &TaskMonitor, opts: &DotOptions) -> String {
    let mut out = String::from("digraph monitor {\n  rankdir=LR;\n");
    for q in m.states() {
        let shape = if m.is_final(q) { "doublecircle" } else { "circle" };
        let mut attrs = format!("shape={shape}");
        if m.global_states().contains(&q) {
            attrs.push_str(", style=filled, fillcolor=palegreen");
        }
        if opts.sync.contains(&q) {
            attrs.push_str(", penwidth=3");
        }
        let _ = writeln!(out, "  q{q} [{attrs}];");
    }
    let _ = writeln!(out, "  start [shape=point];\n  start -> q{};", m.initial);
    for t in m.transitions() {
        if t.is_self_loop() && opts.hide_self_loops {
            continue;
        }
        let label = m.describe_guard(&t.guard).replace('"', "'");
        let style = if t.kind == Kind::Global {
            ", style=bold"
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "  q{} -> q{} [label=\"t{}: {}\"{}];",
            t.source, t.target, t.id, label, style
        );
    }
    out.push_str("}\n");
    out
}
