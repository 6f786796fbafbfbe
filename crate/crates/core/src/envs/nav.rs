use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_actions, Environment, StateBox};
use crate::error::{Error, Result};
use crate::spec_lang::JointState;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NavConfig {
    pub dim: usize,
    pub agents: usize,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    #[serde(default = "one")]
    pub dt: f64,
    #[serde(default = "one")]
    pub max_speed: f64,
    /// x coordinate the starting line is centred on.
    #[serde(default)]
    pub anchor_x: f64,
    #[serde(default = "default_spacing")]
    pub spacing: f64,
}

fn default_half_width() -> f64 {
    20.0
}

fn one() -> f64 {
    1.0
}

fn default_spacing() -> f64 {
    2.0
}

impl NavConfig {
    pub fn new(dim: usize, agents: usize) -> Self {
        NavConfig {
            dim,
            agents,
            half_width: default_half_width(),
            dt: 1.0,
            max_speed: 1.0,
            anchor_x: 0.0,
            spacing: default_spacing(),
        }
    }

    pub fn with_anchor(mut self, x: f64) -> Self {
        self.anchor_x = x;
        self
    }
}

/// First-order point navigation: `s' = clip(s + clip(a, max_speed) * dt)`.
#[derive(Clone, Debug)]
pub struct NavEnv {
    cfg: NavConfig,
    bounds: StateBox,
}

impl NavEnv {
    pub fn new(cfg: NavConfig) -> Result<Self> {
        if !(2..=3).contains(&cfg.dim) {
            return Err(Error::Config(format!("nav dim must be 2 or 3, got {}", cfg.dim)));
        }
        if cfg.agents == 0 {
            return Err(Error::Config("nav needs at least one agent".into()));
        }
        if !(cfg.max_speed > 0.0) || !(cfg.dt > 0.0) || !(cfg.half_width > 0.0) {
            return Err(Error::Config("max_speed, dt and half_width must be positive".into()));
        }
        let bounds = StateBox::cube(cfg.dim, cfg.half_width);
        Ok(NavEnv { cfg, bounds })
    }

    pub fn config(&self) -> &NavConfig {
        &self.cfg
    }

    pub fn max_speed(&self) -> f64 {
        self.cfg.max_speed
    }
}

impl Environment for NavEnv {
    fn dim(&self) -> usize {
        self.cfg.dim
    }

    fn n_agents(&self) -> usize {
        self.cfg.agents
    }

    fn state_box(&self) -> &StateBox {
        &self.bounds
    }

    fn action_bound(&self) -> f64 {
        self.cfg.max_speed
    }

    /// Agents start on a line along x, `spacing` apart and centred on
    /// `anchor_x`; the remaining coordinates are drawn from U(2, 3).
    fn reset(&self, seed: u64) -> JointState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.cfg.agents;
        let mut coords = Vec::with_capacity(n * self.cfg.dim);
        for i in 0..n {
            let offset = (i as f64 - (n as f64 - 1.0) / 2.0) * self.cfg.spacing;
            coords.push(self.cfg.anchor_x + offset);
            for _ in 1..self.cfg.dim {
                coords.push(rng.random_range(2.0..3.0));
            }
        }
        let mut s = JointState::new(self.cfg.dim, coords).expect("consistent layout");
        for i in 0..n {
            self.bounds.clip(s.agent_mut(i));
        }
        s
    }

    fn step(&self, state: &JointState, actions: &[Vec<f64>]) -> Result<JointState> {
        check_actions(self.cfg.agents, self.cfg.dim, actions)?;
        if state.n_agents() != self.cfg.agents {
            return Err(Error::AgentCount {
                expected: self.cfg.agents,
                got: state.n_agents(),
            });
        }
        let mut next = state.clone();
        let vmax = self.cfg.max_speed;
        for (i, a) in actions.iter().enumerate() {
            let s = next.agent_mut(i);
            for (x, v) in s.iter_mut().zip(a) {
                *x += v.clamp(-vmax, vmax) * self.cfg.dt;
            }
            self.bounds.clip(s);
        }
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(agents: usize) -> NavEnv {
        NavEnv::new(NavConfig::new(2, agents)).unwrap()
    }

    #[test]
    fn unit_step() {
        let e = env(1);
        let s = JointState::new(2, vec![0.0, 0.0]).unwrap();
        let next = e.step(&s, &[vec![1.0, 0.0]]).unwrap();
        assert_eq!(next.coords(), &[1.0, 0.0]);
    }

    #[test]
    fn action_saturates() {
        let e = env(1);
        let s = JointState::new(2, vec![0.0, 0.0]).unwrap();
        let next = e.step(&s, &[vec![7.0, -0.5]]).unwrap();
        assert_eq!(next.coords(), &[1.0, -0.5]);
    }

    #[test]
    fn boundary_clips() {
        let e = env(1);
        let s = JointState::new(2, vec![19.5, -20.0]).unwrap();
        let next = e.step(&s, &[vec![1.0, -1.0]]).unwrap();
        assert_eq!(next.coords(), &[20.0, -20.0]);
    }

    #[test]
    fn bad_action_count() {
        let e = env(2);
        let s = e.reset(0);
        assert!(matches!(
            e.step(&s, &[vec![0.0, 0.0]]),
            Err(Error::AgentCount { .. })
        ));
    }

    #[test]
    fn reset_is_seeded_and_lined_up() {
        let e = NavEnv::new(NavConfig::new(2, 3).with_anchor(5.0)).unwrap();
        assert_eq!(e.reset(0), e.reset(0));
        assert_ne!(e.reset(0), e.reset(1));
        let s = e.reset(3);
        let xs: Vec<f64> = (0..3).map(|i| s.agent(i)[0]).collect();
        assert_eq!(xs, vec![3.0, 5.0, 7.0]);
        for seed in 0..1000 {
            let s = e.reset(seed);
            for i in 0..3 {
                assert!((2.0..=3.0).contains(&s.agent(i)[1]));
            }
        }
    }

    #[test]
    fn reset_3d_draws_z() {
        let e = NavEnv::new(NavConfig::new(3, 2)).unwrap();
        for seed in 0..200 {
            let s = e.reset(seed);
            for i in 0..2 {
                assert!((2.0..=3.0).contains(&s.agent(i)[2]));
            }
        }
    }
}
