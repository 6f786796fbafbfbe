use std::collections::BTreeMap;

use proptest::prelude::*;

use specmarl::envs::{Environment, NavConfig, NavEnv, StateBox};
use specmarl::monitor::{compile, validate_structure};
use specmarl::scaling::{check_ma_distributive, set_groups};
use specmarl::shaping::{compute_constants, staged_reward, FinalReward};
use specmarl::spec_lang::{satisfies, JointState, Predicate, Spec, Trajectory};
use specmarl::sync::{identify_sync_states, resolve_transition};
use specmarl::parse;

fn coord() -> impl Strategy<Value = f64> {
    (-8i32..=8).prop_map(|x| x as f64 / 2.0)
}

fn predicate(global: bool) -> impl Strategy<Value = Predicate> {
    (coord(), coord(), any::<bool>()).prop_map(move |(x, y, g)| {
        if global && g {
            Predicate::reach_gl(vec![x, y])
        } else {
            Predicate::reach_lo(vec![x, y])
        }
    })
}

fn spec(global: bool) -> impl Strategy<Value = Spec> {
    let leaf = predicate(global).prop_map(Spec::Achieve);
    leaf.prop_recursive(3, 16, 2, move |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Spec::seq(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Spec::or(a, b)),
            (inner, predicate(false)).prop_map(|(a, p)| Spec::ensuring(a, p)),
        ]
    })
}

fn trajectory(agents: usize) -> impl Strategy<Value = Trajectory> {
    let point = prop::sample::select(vec![[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]]);
    let state = prop::collection::vec(point, agents).prop_map(|p| JointState::from_agents(&p).unwrap());
    prop::collection::vec(state, 2..8).prop_map(|s| Trajectory::new(s).unwrap())
}

proptest! {
    #[test]
    fn display_parses_back(s in spec(true)) {
        prop_assert_eq!(parse(&s.to_string()).unwrap(), s);
    }

    #[test]
    fn compiled_monitors_are_well_formed(s in spec(true)) {
        let m = compile(&s).unwrap();
        let report = validate_structure(&m);
        prop_assert!(report.ok(), "{}", report.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "));
        prop_assert!(m.global_states().is_subset(&identify_sync_states(&m)));
        let consts = compute_constants(&m, &StateBox::cube(2, 20.0)).unwrap();
        prop_assert_eq!(consts.max_depth, m.max_depth().unwrap());
    }

    #[test]
    fn nav_step_is_deterministic_and_stays_in_box(
        seed in any::<u64>(),
        moves in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..30),
    ) {
        let env = NavEnv::new(NavConfig::new(2, 1)).unwrap();
        let mut s = env.reset(seed);
        prop_assert_eq!(&s, &env.reset(seed));
        for (ax, ay) in moves {
            let a = vec![vec![ax, ay]];
            let next = env.step(&s, &a).unwrap();
            prop_assert_eq!(&next, &env.step(&s, &a).unwrap());
            prop_assert!(env.state_box().contains(next.agent(0)));
            for k in 0..2 {
                prop_assert!((next.agent(0)[k] - s.agent(0)[k]).abs() <= 1.0 + 1e-12);
            }
            s = next;
        }
    }

    #[test]
    fn vote_picks_a_most_popular_proposal(votes in prop::collection::vec(0usize..4, 1..9)) {
        let proposals: BTreeMap<usize, usize> = votes.iter().copied().enumerate().collect();
        let winner = resolve_transition(&proposals, &[0, 1, 2, 3]).unwrap();
        let count = |t| votes.iter().filter(|&&v| v == t).count();
        let best = (0..4).map(count).max().unwrap();
        prop_assert_eq!(count(winner), best);
        prop_assert!((0..winner).all(|t| count(t) < best));
    }

    #[test]
    fn groups_partition_the_agents(n in 1usize..40, g in 1usize..12) {
        let agents: Vec<usize> = (0..n).collect();
        let groups = set_groups(g, &agents).unwrap();
        let flat: Vec<usize> = groups.iter().flatten().copied().collect();
        prop_assert_eq!(flat, agents);
        if g <= n {
            prop_assert_eq!(groups.len(), n / g);
            prop_assert!(groups.iter().all(|grp| grp.len() >= g));
        } else {
            prop_assert_eq!(groups.len(), 1);
        }
    }

    #[test]
    fn reach_specs_distribute(s in spec(true), t in trajectory(4), split in 1usize..4) {
        let n1: Vec<usize> = (0..split).collect();
        let n2: Vec<usize> = (split..4).collect();
        prop_assert!(check_ma_distributive(&s, &t, &n1, &n2).unwrap());
    }

    #[test]
    fn single_agent_satisfaction_matches_restriction(s in spec(false), t in trajectory(3), a in 0usize..3) {
        let own = Trajectory::new(t.states.iter().map(|j| j.select(&[a])).collect()).unwrap();
        prop_assert_eq!(satisfies(&s, &t, &[a]).unwrap(), satisfies(&s, &own, &[0]).unwrap());
    }

    #[test]
    fn clipped_rewards_keep_stages_apart(s in spec(true), x in -1e6f64..1e6, y in -1e6f64..1e6, stage in 0usize..6) {
        let m = compile(&s).unwrap();
        let c = compute_constants(&m, &StateBox::cube(2, 20.0)).unwrap();
        let (lo, hi) = c.ctm_band();
        let cx = c.clip_ctm(FinalReward::Value(x));
        prop_assert!((lo..=hi).contains(&cx));
        prop_assert_eq!(c.clip_ctm(FinalReward::NegInfinity), lo);
        let cy = c.clip_ctm(FinalReward::Value(y));
        prop_assert!(staged_reward(stage, cx, &c) < staged_reward(stage + 1, cy, &c));
    }
}
