//! Compile a specification with global and local branches, then print the
//! monitor, its global and synchronization states, and a DOT graph.
//!
//! cargo run --example compile_monitor -- "reach_gl(5, 0); reach_gl(0, 0)"

use specmarl::monitor::{compile, to_dot, validate_structure, DotOptions};
use specmarl::sync::identify_sync_states;
use specmarl::parse;

fn main() -> specmarl::Result<()> {
    let text = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "reach_gl(1, 1) or [reach_lo(2, 2); [reach_lo(3, 3) or reach_gl(4, 4)]]".into());
    let spec = parse(&text)?;
    let m = compile(&spec)?;
    let sync = identify_sync_states(&m);

    println!("{spec}");
    for t in m.transitions() {
        println!(
            "  t{:<2} q{} -> q{}  {:?}  {}",
            t.id,
            t.source,
            t.target,
            t.kind,
            m.describe_guard(&t.guard)
        );
    }
    println!("finals {:?}, global {:?}, sync {:?}", m.finals, m.global_states(), sync);
    println!("structure ok: {}", validate_structure(&m).ok());
    println!();
    print!("{}", to_dot(&m, &DotOptions { hide_self_loops: true, sync }));
    Ok(())
}
