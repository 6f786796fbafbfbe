//! Group curriculum: train on small groups first, doubling the minimum
//! group size each time every group is reliably satisfied.

use std::sync::Arc;

use specmarl::envs::{Environment, NavConfig, NavEnv};
use specmarl::scaling::build_schedule;
use specmarl::trainer::{build_game, evaluate, train, TrainConfig};
use specmarl::parse;

fn main() -> specmarl::Result<()> {
    for n in [6, 10] {
        let s = build_schedule(n, 2, 2)?;
        for stage in 0..s.stages() {
            println!("N={n} stage {stage}: g={} groups {:?}", s.sizes[stage], s.groups_at(stage));
        }
    }

    let spec = parse("reach_gl(5, 0); reach_gl(0, 0)")?;
    let env: Arc<dyn Environment> = Arc::new(NavEnv::new(NavConfig::new(2, 6))?);
    let base = TrainConfig {
        seed: 7,
        iterations: 30,
        early_stop: false,
        ..Default::default()
    };
    for cfg in [TrainConfig { stage: true, ..base.clone() }, base] {
        let result = train(env.clone(), &spec, 200, &cfg)?;
        let game = build_game(env.clone(), &spec, &cfg, None)?;
        let report = evaluate(&result.policy, &game, &spec, 200, 100, 3, 0)?;
        let switches: Vec<usize> = result.curve.windows(2).filter(|w| w[0].stage != w[1].stage).map(|w| w[1].iteration).collect();
        println!(
            "staged={}: stages {:?} (advanced at iterations {switches:?}), satisfaction {:.2}",
            cfg.stage, result.stages_visited, report.rate
        );
    }
    Ok(())
}
