//! Shaped rewards for rollouts that stop at different depths of the
//! monitor: deeper progress always scores higher, and completed rollouts
//! score their final reward.

use std::sync::Arc;

use specmarl::envs::{Environment, NavConfig, NavEnv};
use specmarl::game::{AugmentedAction, Game};
use specmarl::shaping::compute_constants;
use specmarl::parse;

fn main() -> specmarl::Result<()> {
    let spec = parse("reach_gl(5, 0); reach_gl(0, 0); reach_gl(3, 0)")?;
    let env: Arc<dyn Environment> = Arc::new(NavEnv::new(NavConfig::new(2, 2))?);
    let game = Game::from_spec(env.clone(), &spec)?;
    let consts = compute_constants(game.monitor_of(0), env.state_box())?;
    println!("C_u = {}, C_l = {}, max depth {}", consts.c_u, consts.c_l, consts.max_depth);

    let waypoints = [[5.0, 0.0], [0.0, 0.0], [3.0, 0.0]];
    for horizon in [3, 8, 14, 20, 26] {
        let start = game.reset(1)?;
        let r = game.rollout(start, horizon, |s, _| {
            (0..2)
                .map(|a| {
                    let goal = waypoints[s.q[a].min(2)];
                    let here = s.env.agent(a);
                    let m = game.monitor_of(a);
                    let delta = m.exits(s.q[a]).next().or(m.self_loop(s.q[a])).map(|t| t.id).unwrap_or(0);
                    Ok(AugmentedAction {
                        env_action: vec![(goal[0] - here[0]).clamp(-1.0, 1.0), (goal[1] - here[1]).clamp(-1.0, 1.0)],
                        delta,
                    })
                })
                .collect()
        })?;
        let shaped = game.shaped_rewards(&r, &consts)?;
        println!(
            "T={horizon:>2}: monitor states {:?}, shaped {:?}, clipped {:.2}",
            r.last().q,
            shaped[0],
            consts.clip_ctm(shaped[0])
        );
    }
    Ok(())
}
