//! Two agents at a synchronization state vote on which branch to take. The
//! winning transition is committed for the group; each agent takes it once
//! its own guard holds.

use std::sync::Arc;

use specmarl::envs::{Environment, NavConfig, NavEnv};
use specmarl::game::{AugmentedAction, Game};
use specmarl::sync::resolve_transition;
use specmarl::{parse, JointState};

fn main() -> specmarl::Result<()> {
    let spec = parse("reach_gl(5, 0) or reach_lo(0, 5)")?;
    let env: Arc<dyn Environment> = Arc::new(NavEnv::new(NavConfig::new(2, 2))?);
    let game = Game::from_spec(env, &spec)?;
    let m = game.monitor_of(0);
    let exits: Vec<_> = m.exits(0).map(|t| t.id).collect();
    println!("sync states {:?}; exits of q0: {exits:?}", game.groups()[0].sync);

    let tie = resolve_transition(&[(0, exits[1]), (1, exits[0])].into(), &exits)?;
    println!("a 1-1 tie goes to the smaller id: t{tie}");

    // both agents propose the global branch, then walk to (5, 0)
    let mut s = game.initial(JointState::from_agents(&[[3.0, 0.0], [2.0, 0.0]])?)?;
    for step in 0..4 {
        let actions: Vec<AugmentedAction> = (0..2)
            .map(|a| AugmentedAction {
                env_action: vec![(5.0 - s.env.agent(a)[0]).clamp(-1.0, 1.0), 0.0],
                delta: exits[0],
            })
            .collect();
        let (next, taken) = game.step(&s, &actions)?;
        s = next;
        println!(
            "step {step}: positions {:?} monitor {:?} taken {:?} commitments {:?}",
            s.env.coords(),
            s.q,
            taken,
            s.commitments
        );
    }
    Ok(())
}
