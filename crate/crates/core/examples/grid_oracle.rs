//! Exhaustive check on small grids: for every joint action sequence, the
//! specification holds exactly when some choice of monitor transitions ends
//! with every agent in a final state with positive reward. A monitor built
//! from the wrong specification produces witnesses.

use specmarl::parse;
use specmarl::verify::{default_oracle_cases, run_oracle};

fn main() -> specmarl::Result<()> {
    let cases = default_oracle_cases();
    for r in run_oracle(&cases, None)? {
        println!(
            "{:<28} {:<45} sequences {:>8}  satisfied {:>7}  disagreements {}",
            r.name, r.spec, r.report.rollouts, r.report.satisfied, r.report.disagreements
        );
    }

    let wrong = parse("reach_lo(2, 1)")?;
    let r = &run_oracle(&cases[..1], Some(&wrong))?[0];
    println!("\nmonitor for {wrong} checked against {}: {} disagreements", r.spec, r.report.disagreements);
    if let Some(w) = r.report.witnesses.first() {
        println!("witness: {:?} satisfied={} monitor={}", w.states, w.satisfied, w.monitor);
    }
    Ok(())
}
