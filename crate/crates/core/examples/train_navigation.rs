//! Train agents on 2D navigation and evaluate them, with or without access
//! to their monitor state.
//!
//! cargo run --release --example train_navigation -- [spec] [agents] [--no-mon]

use std::sync::Arc;

use specmarl::envs::{Environment, NavConfig, NavEnv};
use specmarl::trainer::{build_game, evaluate, train, TrainConfig};
use specmarl::parse;

fn main() -> specmarl::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let no_mon = args.iter().any(|a| a == "--no-mon");
    let mut rest = args.iter().filter(|a| !a.starts_with("--"));
    let text = rest.next().cloned().unwrap_or_else(|| "reach_gl(5, 0); reach_gl(0, 0)".into());
    let agents = rest.next().map(|n| n.parse().expect("agent count")).unwrap_or(3);

    let spec = parse(&text)?;
    let env: Arc<dyn Environment> = Arc::new(NavEnv::new(NavConfig::new(2, agents))?);
    let cfg = TrainConfig {
        seed: 1,
        no_mon,
        ..Default::default()
    };
    let result = train(env.clone(), &spec, 200, &cfg)?;
    for row in &result.curve {
        println!(
            "iter {:>3}  best {:>9.2}  mean {:>9.2}  satisfied {:.2}",
            row.iteration, row.best_score, row.mean_score, row.satisfaction
        );
    }
    let game = build_game(env, &spec, &cfg, None)?;
    let report = evaluate(&result.policy, &game, &spec, 200, 100, 99, 0)?;
    println!(
        "{spec} with {agents} agents{}: satisfaction {:.2}, depth histogram {:?}",
        if no_mon { " (no monitor input)" } else { "" },
        report.rate,
        report.depth_histogram
    );
    Ok(())
}
