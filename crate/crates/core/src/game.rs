//! The augmented Markov game: a base environment plus one monitor copy per
//! agent, stepped with synchronization at sync states.

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::sync::Arc;

use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::monitor::{compile, product, StateId, TaskMonitor, TransitionId, DEFAULT_STATE_CAP};
use crate::shaping::{self, FinalReward, ShapingConstants};
use crate::spec_lang::{JointState, Spec, Trajectory};
use crate::sync::{identify_sync_states, resolve_transition, SyncSet};

/// One agent's view: its environment state, monitor state and registers.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedState {
    pub env_state: Vec<f64>,
    pub q: StateId,
    pub v: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedAction {
    pub env_action: Vec<f64>,
    /// Preferred monitor transition; illegal choices fall back to the self-loop.
    pub delta: TransitionId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointAugState {
    pub env: JointState,
    pub q: Vec<StateId>,
    pub v: Vec<Vec<f64>>,
    /// Transition a group agreed on at a synchronization state, keyed by
    /// (group, state).
    pub commitments: BTreeMap<(usize, StateId), TransitionId>,
}

impl JointAugState {
    pub fn agent(&self, i: usize) -> AugmentedState {
        AugmentedState {
            env_state: self.env.agent(i).to_vec(),
            q: self.q[i],
            v: self.v[i].clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AugmentedRollout {
    /// `T + 1` joint states.
    pub states: Vec<JointAugState>,
    /// `T` joint actions.
    pub actions: Vec<Vec<AugmentedAction>>,
    /// Transition each agent actually took at each step.
    pub taken: Vec<Vec<TransitionId>>,
}

impl AugmentedRollout {
    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn last(&self) -> &JointAugState {
        self.states.last().expect("rollouts hold at least the initial state")
    }

    /// Strip monitor states, registers and transition choices.
    pub fn project(&self) -> Trajectory {
        Trajectory {
            states: self.states.iter().map(|s| s.env.clone()).collect(),
            actions: self
                .actions
                .iter()
                .map(|joint| joint.iter().map(|a| a.env_action.clone()).collect())
                .collect(),
        }
    }
}

/// Agents that share a monitor instance and synchronize with each other.
#[derive(Clone, Debug)]
pub struct AgentGroup {
    pub agents: Vec<usize>,
    pub monitor: Arc<TaskMonitor>,
    pub sync: Arc<SyncSet>,
}

#[derive(Clone)]
pub struct Game {
    env: Arc<dyn Environment>,
    groups: Vec<AgentGroup>,
    /// agent -> (group, index inside the group)
    slot: Vec<(usize, usize)>,
}

impl Game {
    /// All agents in one group sharing `monitor`.
    pub fn new(env: Arc<dyn Environment>, monitor: TaskMonitor, sync: SyncSet) -> Self {
        let n = env.n_agents();
        let group = AgentGroup {
            agents: (0..n).collect(),
            monitor: Arc::new(monitor),
            sync: Arc::new(sync),
        };
        Game {
            env,
            groups: vec![group],
            slot: (0..n).map(|i| (0, i)).collect(),
        }
    }

    /// Compile `spec` and identify its sync states.
    pub fn from_spec(env: Arc<dyn Environment>, spec: &Spec) -> Result<Self> {
        let m = compile(spec)?;
        let sync = identify_sync_states(&m);
        Ok(Game::new(env, m, sync))
    }

    /// Each group runs its own monitors on the spec restricted to the group.
    pub fn grouped(env: Arc<dyn Environment>, spec: &Spec, partition: &[Vec<usize>]) -> Result<Self> {
        let n = env.n_agents();
        let mut slot = vec![None; n];
        let mut groups = Vec::with_capacity(partition.len());
        for (g, agents) in partition.iter().enumerate() {
            for (li, &a) in agents.iter().enumerate() {
                if a >= n {
                    return Err(Error::UnknownAgent(a));
                }
                if slot[a].replace((g, li)).is_some() {
                    return Err(Error::OverlappingAgents);
                }
            }
            let m = compile(&spec.restrict(agents, env.dim()))?;
            let sync = identify_sync_states(&m);
            groups.push(AgentGroup {
                agents: agents.clone(),
                monitor: Arc::new(m),
                sync: Arc::new(sync),
            });
        }
        let slot = slot
            .into_iter()
            .enumerate()
            .map(|(a, s)| s.ok_or_else(|| Error::Config(format!("agent {a} is in no group"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Game { env, groups, slot })
    }

    /// Centralized baseline: every agent tracks the product of all per-agent
    /// monitors and every product state is a synchronization state.
    pub fn centralized(env: Arc<dyn Environment>, spec: &Spec, cap: Option<usize>) -> Result<Self> {
        let m = compile(spec)?;
        let n = env.n_agents();
        let p = product(&vec![m; n], cap.unwrap_or(DEFAULT_STATE_CAP))?;
        let sync: SyncSet = p.states().collect();
        Ok(Game::new(env, p, sync))
    }

    pub fn env(&self) -> &dyn Environment {
        self.env.as_ref()
    }

    pub fn n_agents(&self) -> usize {
        self.slot.len()
    }

    pub fn groups(&self) -> &[AgentGroup] {
        &self.groups
    }

    pub fn group_of(&self, agent: usize) -> &AgentGroup {
        &self.groups[self.slot[agent].0]
    }

    pub fn monitor_of(&self, agent: usize) -> &TaskMonitor {
        &self.group_of(agent).monitor
    }

    pub fn initial(&self, env: JointState) -> Result<JointAugState> {
        if env.n_agents() != self.n_agents() {
            return Err(Error::AgentCount {
                expected: self.n_agents(),
                got: env.n_agents(),
            });
        }
        let (q, v) = (0..self.n_agents())
            .map(|i| {
                let m = self.monitor_of(i);
                (m.initial, m.initial_registers.clone())
            })
            .unzip();
        Ok(JointAugState {
            env,
            q,
            v,
            commitments: BTreeMap::new(),
        })
    }

    pub fn reset(&self, seed: u64) -> Result<JointAugState> {
        self.initial(self.env.reset(seed))
    }

    /// Joint state seen by the monitors of group `g`.
    pub fn group_joint<'a>(&self, g: usize, joint: &'a JointState) -> Cow<'a, JointState> {
        let agents = &self.groups[g].agents;
        if agents.len() == joint.n_agents() && agents.iter().enumerate().all(|(i, &a)| i == a) {
            Cow::Borrowed(joint)
        } else {
            Cow::Owned(joint.select(agents))
        }
    }

    /// Transitions out of the agent's monitor state whose guards hold on
    /// `joint`; the self-loop is always included.
    pub fn available_transitions(
        &self,
        state: &JointAugState,
        agent: usize,
        joint: &JointState,
    ) -> Result<Vec<TransitionId>> {
        let (g, li) = self.slot[agent];
        let m = &self.groups[g].monitor;
        let gj = self.group_joint(g, joint);
        let mut out = Vec::new();
        for t in m.outgoing(state.q[agent]) {
            if t.guard.is_true() || m.guard_holds(&t.guard, li, &gj)? {
                out.push(t.id);
            }
        }
        Ok(out)
    }

    /// Advance the environment, then the monitors on the post-step state.
    pub fn step(
        &self,
        state: &JointAugState,
        actions: &[AugmentedAction],
    ) -> Result<(JointAugState, Vec<TransitionId>)> {
        if actions.len() != self.n_agents() {
            return Err(Error::AgentCount {
                expected: self.n_agents(),
                got: actions.len(),
            });
        }
        let env_actions: Vec<Vec<f64>> = actions.iter().map(|a| a.env_action.clone()).collect();
        let post = self.env.step(&state.env, &env_actions)?;
        let deltas: Vec<TransitionId> = actions.iter().map(|a| a.delta).collect();
        self.advance_monitors(state, &deltas, post)
    }

    /// Monitor half of a step. Guards and updates read `post`.
    ///
    /// Outside sync states an agent takes its chosen transition when legal
    /// and its self-loop otherwise. At a sync state agents wait until the
    /// whole group is there; the group then votes over the proposed exits,
    /// commits to the winner, and each agent takes it once its guard holds.
    pub fn advance_monitors(
        &self,
        state: &JointAugState,
        deltas: &[TransitionId],
        post: JointState,
    ) -> Result<(JointAugState, Vec<TransitionId>)> {
        let n = self.n_agents();
        if deltas.len() != n || post.n_agents() != n {
            return Err(Error::AgentCount {
                expected: n,
                got: deltas.len().min(post.n_agents()),
            });
        }
        let mut next = state.clone();
        let mut taken = vec![0; n];
        for (g, group) in self.groups.iter().enumerate() {
            let m = &group.monitor;
            let gj = self.group_joint(g, &post);
            for &a in &group.agents {
                m.transition(deltas[a])?;
            }

            let present: BTreeSet<StateId> = group
                .agents
                .iter()
                .map(|&a| state.q[a])
                .filter(|q| group.sync.contains(q))
                .collect();
            for q in present {
                if next.commitments.contains_key(&(g, q))
                    || !group.agents.iter().all(|&a| state.q[a] == q)
                {
                    continue;
                }
                let exits: Vec<TransitionId> = m.exits(q).map(|t| t.id).collect();
                let proposals: BTreeMap<usize, TransitionId> = group
                    .agents
                    .iter()
                    .filter(|&&a| exits.contains(&deltas[a]))
                    .map(|&a| (a, deltas[a]))
                    .collect();
                if !proposals.is_empty() {
                    let winner = resolve_transition(&proposals, &exits)?;
                    next.commitments.insert((g, q), winner);
                }
            }

            for (li, &a) in group.agents.iter().enumerate() {
                let q = state.q[a];
                let stay = m.self_loop(q).ok_or(Error::Config(format!(
                    "monitor state {q} has no self-loop"
                )))?;
                let wanted = if group.sync.contains(&q) {
                    next.commitments.get(&(g, q)).map(|&c| m.transition(c)).transpose()?
                } else {
                    let t = m.transition(deltas[a])?;
                    (t.source == q).then_some(t)
                };
                let chosen = match wanted {
                    Some(t) if t.is_self_loop() || m.guard_holds(&t.guard, li, &gj)? => t,
                    _ => stay,
                };
                m.apply_update(chosen, li, &gj, &mut next.v[a])?;
                next.q[a] = chosen.target;
                taken[a] = chosen.id;
            }
        }
        next.env = post;
        Ok((next, taken))
    }

    /// Run `horizon` steps from `start`, asking `policy` for joint actions.
    pub fn rollout<P>(&self, start: JointAugState, horizon: usize, mut policy: P) -> Result<AugmentedRollout>
    where
        P: FnMut(&JointAugState, usize) -> Result<Vec<AugmentedAction>>,
    {
        let mut states = Vec::with_capacity(horizon + 1);
        let mut actions = Vec::with_capacity(horizon);
        let mut taken = Vec::with_capacity(horizon);
        let mut s = start;
        for t in 0..horizon {
            let a = policy(&s, t)?;
            let (next, took) = self.step(&s, &a)?;
            states.push(std::mem::replace(&mut s, next));
            actions.push(a);
            taken.push(took);
        }
        states.push(s);
        Ok(AugmentedRollout {
            states,
            actions,
            taken,
        })
    }

    /// Final-state reward of each agent.
    pub fn final_rewards(&self, r: &AugmentedRollout) -> Result<Vec<FinalReward>> {
        let last = r.last();
        (0..self.n_agents())
            .map(|a| shaping::final_reward(self.monitor_of(a), last.q[a], &last.v[a]))
            .collect()
    }

    /// True when every agent ends in a final state with a positive reward.
    pub fn monitor_success(&self, r: &AugmentedRollout) -> Result<bool> {
        Ok(self
            .final_rewards(r)?
            .iter()
            .all(|f| matches!(f, FinalReward::Value(v) if *v > 0.0)))
    }

    /// Shaped reward of each agent.
    pub fn shaped_rewards(&self, r: &AugmentedRollout, consts: &ShapingConstants) -> Result<Vec<FinalReward>> {
        (0..self.n_agents())
            .map(|a| {
                let (g, li) = self.slot[a];
                let joints: Vec<Cow<JointState>> =
                    r.states.iter().map(|s| self.group_joint(g, &s.env)).collect();
                let joints: Vec<&JointState> = joints.iter().map(|c| c.as_ref()).collect();
                let qs: Vec<StateId> = r.states.iter().map(|s| s.q[a]).collect();
                let vs: Vec<&[f64]> = r.states.iter().map(|s| s.v[a].as_slice()).collect();
                shaping::shaped_reward(&self.groups[g].monitor, consts, li, &joints, &qs, &vs)
            })
            .collect()
    }

    /// CSV trace with one row per (t, agent). `rewards[a]` is written on the
    /// agent's last row; earlier rows carry 0.
    pub fn write_trace<W: Write>(&self, r: &AugmentedRollout, rewards: &[f64], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let dim = self.env.dim();
        let regs = r.states[0].v.iter().map(Vec::len).max().unwrap_or(0);
        let mut header = vec!["t".to_string(), "agent".to_string()];
        header.extend((0..dim).map(|k| format!("s{k}")));
        header.push("q".into());
        header.extend((0..regs).map(|k| format!("v{k}")));
        header.push("delta".into());
        header.push("reward".into());
        w.write_record(&header)?;
        let horizon = r.horizon();
        for (t, s) in r.states.iter().enumerate() {
            for a in 0..self.n_agents() {
                let mut row = vec![t.to_string(), a.to_string()];
                row.extend(s.env.agent(a).iter().map(|x| x.to_string()));
                row.push(s.q[a].to_string());
                row.extend((0..regs).map(|k| s.v[a].get(k).map(|x| x.to_string()).unwrap_or_default()));
                row.push(r.taken.get(t).map(|d| d[a].to_string()).unwrap_or_default());
                let reward = if t == horizon { rewards.get(a).copied().unwrap_or(0.0) } else { 0.0 };
                row.push(reward.to_string());
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{NavConfig, NavEnv};
    use crate::spec_lang::parse;

    fn nav(n: usize) -> Arc<dyn Environment> {
        Arc::new(NavEnv::new(NavConfig::new(2, n)).unwrap())
    }

    fn at(points: &[[f64; 2]]) -> JointState {
        JointState::from_agents(points).unwrap()
    }

    fn act(delta: TransitionId, n: usize) -> Vec<AugmentedAction> {
        (0..n)
            .map(|_| AugmentedAction {
                env_action: vec![0.0, 0.0],
                delta,
            })
            .collect()
    }

    fn phi1(n: usize) -> Game {
        Game::from_spec(nav(n), &parse("reach_gl(5, 0); reach_gl(0, 0)").unwrap()).unwrap()
    }

    #[test]
    fn available_at_goal_and_away() {
        let g = phi1(2);
        let s = g.initial(at(&[[5.0, 0.0], [5.0, 0.0]])).unwrap();
        let m = g.monitor_of(0);
        let exit = m.exits(0).next().unwrap().id;
        let stay = m.self_loop(0).unwrap().id;
        assert_eq!(g.available_transitions(&s, 0, &s.env).unwrap(), vec![stay, exit]);
        let far = at(&[[0.0, 0.0], [0.0, 0.0]]);
        assert_eq!(g.available_transitions(&s, 0, &far).unwrap(), vec![stay]);
        let mut fin = s.clone();
        fin.q = vec![2, 2];
        let stay2 = m.self_loop(2).unwrap().id;
        assert_eq!(g.available_transitions(&fin, 0, &s.env).unwrap(), vec![stay2]);
    }

    #[test]
    fn agents_wait_at_sync_state() {
        let g = phi1(2);
        let m = g.monitor_of(0);
        let exit = m.exits(1).next().unwrap().id;
        let mut s = g.initial(at(&[[0.0, 0.0], [0.0, 0.0]])).unwrap();
        // agent 0 already reached q1, agent 1 is still at q0
        s.q = vec![1, 0];
        let (next, _) = g.advance_monitors(&s, &[exit, exit], s.env.clone()).unwrap();
        assert_eq!(next.q, vec![1, 0]);
        assert!(next.commitments.is_empty());
    }

    #[test]
    fn unanimous_global_move() {
        let g = phi1(2);
        let m = g.monitor_of(0);
        let exit = m.exits(0).next().unwrap().id;
        let s = g.initial(at(&[[4.5, 0.0], [5.0, 0.5]])).unwrap();
        let (next, taken) = g.step(&s, &act(exit, 2)).unwrap();
        assert_eq!(next.q, vec![1, 1]);
        assert_eq!(taken, vec![exit, exit]);
        assert_eq!(next.commitments.get(&(0, 0)), Some(&exit));
        // registers hold the best progress on the first goal
        assert!((next.v[0][0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn local_move_is_independent() {
        let g = Game::from_spec(nav(2), &parse("reach_lo(1, 0); reach_lo(2, 0)").unwrap()).unwrap();
        let exit = g.monitor_of(0).exits(0).next().unwrap().id;
        let s = g.initial(at(&[[1.0, 0.0], [-5.0, 0.0]])).unwrap();
        let (next, _) = g.step(&s, &act(exit, 2)).unwrap();
        assert_eq!(next.q, vec![1, 0]);
    }

    #[test]
    fn illegal_choice_coerced_and_unknown_rejected() {
        let g = phi1(1);
        let exit = g.monitor_of(0).exits(1).next().unwrap().id;
        let s = g.initial(at(&[[-9.0, 0.0]])).unwrap();
        // the exit of q1 proposed from q0 is coerced to the self-loop
        let (next, taken) = g.advance_monitors(&s, &[exit], s.env.clone()).unwrap();
        assert_eq!(next.q, vec![0]);
        assert_eq!(taken, vec![g.monitor_of(0).self_loop(0).unwrap().id]);
        assert!(matches!(
            g.advance_monitors(&s, &[999], s.env.clone()),
            Err(Error::UnknownTransition(999))
        ));
        assert!(matches!(
            g.step(&s, &act(0, 2)),
            Err(Error::AgentCount { .. })
        ));
    }

    #[test]
    fn sync_prevents_split_choices() {
        // one agent heads for the local goal, the other for the global one
        let spec = parse("reach_lo(2, 0) or reach_gl(3, 0)").unwrap();
        let g = Game::from_spec(nav(2), &spec).unwrap();
        let m = g.monitor_of(0);
        assert!(g.group_of(0).sync.contains(&0));
        let exits: Vec<TransitionId> = m.exits(0).map(|t| t.id).collect();
        let s = g.initial(at(&[[2.5, 0.0], [3.0, 0.0]])).unwrap();
        let actions = vec![
            AugmentedAction { env_action: vec![0.0, 0.0], delta: exits[0] },
            AugmentedAction { env_action: vec![0.0, 0.0], delta: exits[1] },
        ];
        let (next, _) = g.step(&s, &actions).unwrap();
        // tie goes to the lower id: both are bound to the local branch
        assert_eq!(next.commitments[&(0, 0)], exits[0]);
        assert_eq!(next.q, vec![m.transition(exits[0]).unwrap().target, 0]);

        // without gating the agents would split across branches
        let ungated = Game::new(nav(2), m.clone(), SyncSet::new());
        let (split, _) = ungated.step(&s, &actions).unwrap();
        assert_ne!(split.q[0], split.q[1]);
        assert!(split.q.iter().all(|&q| q != 0));
    }

    #[test]
    fn projection_replays_dynamics() {
        let g = phi1(2);
        let exit = g.monitor_of(0).exits(0).next().unwrap().id;
        let start = g.reset(7).unwrap();
        let r = g
            .rollout(start, 12, |_, t| {
                Ok((0..2)
                    .map(|i| AugmentedAction {
                        env_action: vec![(t as f64 * 0.3).sin(), i as f64 - 0.5],
                        delta: exit,
                    })
                    .collect())
            })
            .unwrap();
        let traj = r.project();
        assert_eq!(traj.horizon(), 12);
        for t in 0..12 {
            let replay = g.env().step(&traj.states[t], &traj.actions[t]).unwrap();
            assert_eq!(replay, traj.states[t + 1]);
        }
        let mut buf = Vec::new();
        g.write_trace(&r, &[1.0, 2.0], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 13 * 2);
        assert!(text.starts_with("t,agent,s0,s1,q,v0,v1,delta,reward"));
    }

    #[test]
    fn grouped_games_synchronize_within_groups() {
        let spec = parse("reach_gl(5, 0)").unwrap();
        let g = Game::grouped(nav(4), &spec, &[vec![0, 1], vec![2, 3]]).unwrap();
        let exit = g.monitor_of(0).exits(0).next().unwrap().id;
        let s = g
            .initial(at(&[[5.0, 0.0], [5.0, 0.0], [5.0, 0.0], [-5.0, 0.0]]))
            .unwrap();
        let (next, _) = g.advance_monitors(&s, &[exit; 4], s.env.clone()).unwrap();
        assert_eq!(next.q, vec![1, 1, 0, 0]);
        assert!(matches!(
            Game::grouped(nav(4), &spec, &[vec![0, 1], vec![1, 2, 3]]),
            Err(Error::OverlappingAgents)
        ));
    }
}
