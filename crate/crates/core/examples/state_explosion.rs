//! Reachable states of the centralized product monitor against the
//! distributed representation (one monitor copy per agent).

use specmarl::monitor::{compile, product, DEFAULT_STATE_CAP};
use specmarl::parse;

fn main() -> specmarl::Result<()> {
    for text in [
        "reach_lo(1, 0); reach_lo(2, 0); reach_lo(3, 0)",
        "reach_lo(5, 0); reach_gl(0, 0); reach_gl(3, 0)",
    ] {
        let m = compile(&parse(text)?)?;
        println!("{text}  ({} states per agent)", m.num_states());
        for n in 1..=6 {
            match product(&vec![m.clone(); n], DEFAULT_STATE_CAP) {
                Ok(p) => println!(
                    "  N={n}: product {:>6} states, {:>7} transitions; distributed {}",
                    p.num_states(),
                    p.transitions().len(),
                    n * m.num_states()
                ),
                Err(e) => println!("  N={n}: {e}"),
            }
        }
    }
    Ok(())
}
