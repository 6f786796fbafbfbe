use serde::{Deserialize, Serialize};

use super::{check_actions, Environment, StateBox};
use crate::error::{Error, Result};
use crate::spec_lang::JointState;

/// stay, N, S, E, W
pub const GRID_ACTIONS: [[f64; 2]; 5] = [[0.0, 0.0], [0.0, 1.0], [0.0, -1.0], [1.0, 0.0], [-1.0, 0.0]];

/// Bound on `|A|^(N*T)` for exhaustive enumeration.
pub const MAX_ROLLOUTS: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub width: usize,
    pub height: usize,
    pub horizon: usize,
    /// Start cell per agent; the agent count is `start.len()`.
    pub start: Vec<[i64; 2]>,
}

impl GridConfig {
    pub fn agents(&self) -> usize {
        self.start.len()
    }

    pub fn rollouts(&self) -> u64 {
        (GRID_ACTIONS.len() as u64).saturating_pow((self.agents() * self.horizon) as u32)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.width) || !(1..=5).contains(&self.height) {
            return Err(Error::Config("grid sides must be between 1 and 5".into()));
        }
        if !(1..=2).contains(&self.agents()) {
            return Err(Error::Config("grid supports one or two agents".into()));
        }
        if !(1..=6).contains(&self.horizon) {
            return Err(Error::Config("grid horizon must be between 1 and 6".into()));
        }
        if self.rollouts() > MAX_ROLLOUTS {
            return Err(Error::Config(format!(
                "{} rollouts exceed the enumeration bound",
                self.rollouts()
            )));
        }
        for c in &self.start {
            if c[0] < 0 || c[1] < 0 || c[0] >= self.width as i64 || c[1] >= self.height as i64 {
                return Err(Error::Config(format!("start cell {c:?} outside the grid")));
            }
        }
        Ok(())
    }
}

/// Integer grid with unit moves; moves into a wall leave the agent in place.
#[derive(Clone, Debug)]
pub struct GridWorld {
    cfg: GridConfig,
    bounds: StateBox,
}

impl GridWorld {
    pub fn new(cfg: GridConfig) -> Result<Self> {
        cfg.validate()?;
        let bounds = StateBox {
            lo: vec![0.0, 0.0],
            hi: vec![cfg.width as f64 - 1.0, cfg.height as f64 - 1.0],
        };
        Ok(GridWorld { cfg, bounds })
    }

    pub fn config(&self) -> &GridConfig {
        &self.cfg
    }

    pub fn action(index: usize) -> Vec<f64> {
        GRID_ACTIONS[index].to_vec()
    }
}

impl Environment for GridWorld {
    fn dim(&self) -> usize {
        2
    }

    fn n_agents(&self) -> usize {
        self.cfg.agents()
    }

    fn state_box(&self) -> &StateBox {
        &self.bounds
    }

    fn reset(&self, _seed: u64) -> JointState {
        let coords = self
            .cfg
            .start
            .iter()
            .flat_map(|c| [c[0] as f64, c[1] as f64])
            .collect();
        JointState::new(2, coords).expect("two coordinates per agent")
    }

    fn step(&self, state: &JointState, actions: &[Vec<f64>]) -> Result<JointState> {
        check_actions(self.n_agents(), 2, actions)?;
        let mut next = state.clone();
        for (i, a) in actions.iter().enumerate() {
            if !GRID_ACTIONS.iter().any(|g| g[..] == a[..]) {
                return Err(Error::Config(format!("{a:?} is not a grid action")));
            }
            let s = next.agent_mut(i);
            s[0] += a[0];
            s[1] += a[1];
            self.bounds.clip(s);
        }
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world() -> GridWorld {
        GridWorld::new(GridConfig {
            width: 3,
            height: 3,
            horizon: 4,
            start: vec![[0, 0], [2, 2]],
        })
        .unwrap()
    }

    #[test]
    fn moves_and_walls() {
        let w = world();
        let s = w.reset(0);
        let next = w.step(&s, &[GridWorld::action(1), GridWorld::action(3)]).unwrap();
        assert_eq!(next.coords(), &[0.0, 1.0, 2.0, 2.0]);
        let next = w.step(&next, &[GridWorld::action(4), GridWorld::action(0)]).unwrap();
        assert_eq!(next.coords(), &[0.0, 1.0, 2.0, 2.0]);
    }

    #[test]
    fn rejects_non_grid_actions_and_large_configs() {
        let w = world();
        let s = w.reset(0);
        assert!(w.step(&s, &[vec![0.5, 0.0], GridWorld::action(0)]).is_err());
        let big = GridConfig {
            width: 3,
            height: 3,
            horizon: 6,
            start: vec![[0, 0], [1, 1]],
        };
        assert!(GridWorld::new(big).is_err());
    }
}
