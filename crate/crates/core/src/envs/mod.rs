//! Bundled environments: continuous point navigation and a small grid used
//! for exhaustive checks.

mod grid;
mod nav;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spec_lang::JointState;

pub use grid::{GridConfig, GridWorld, GRID_ACTIONS};
pub use nav::{NavConfig, NavEnv};

/// Deterministic multi-agent environment over a shared per-agent state space.
pub trait Environment: Send + Sync {
    fn dim(&self) -> usize;
    fn n_agents(&self) -> usize;
    fn state_box(&self) -> &StateBox;
    /// Largest useful action magnitude per coordinate.
    fn action_bound(&self) -> f64 {
        1.0
    }
    fn reset(&self, seed: u64) -> JointState;
    /// One step; `actions[i]` is agent `i`'s action vector.
    fn step(&self, state: &JointState, actions: &[Vec<f64>]) -> Result<JointState>;
}

/// Axis-aligned box of per-agent states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl StateBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Config("box bounds must have equal, non-zero length".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h)) {
            return Err(Error::Config("box is degenerate".into()));
        }
        Ok(StateBox { lo, hi })
    }

    pub fn cube(dim: usize, half_width: f64) -> Self {
        StateBox {
            lo: vec![-half_width; dim],
            hi: vec![half_width; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn clip(&self, x: &mut [f64]) {
        for (k, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lo[k], self.hi[k]);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .enumerate()
            .all(|(k, v)| *v >= self.lo[k] && *v <= self.hi[k])
    }

    /// Largest L-infinity distance between two points of the box.
    pub fn diameter_inf(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| h - l)
            .fold(0.0, f64::max)
    }

    /// Smallest box containing this one and the given points.
    pub fn including<'a>(&self, points: impl IntoIterator<Item = &'a [f64]>) -> StateBox {
        let mut b = self.clone();
        for p in points {
            for (k, v) in p.iter().enumerate().take(b.dim()) {
                b.lo[k] = b.lo[k].min(*v);
                b.hi[k] = b.hi[k].max(*v);
            }
        }
        b
    }
}

pub(crate) fn check_actions(n: usize, dim: usize, actions: &[Vec<f64>]) -> Result<()> {
    if actions.len() != n {
        return Err(Error::AgentCount {
            expected: n,
            got: actions.len(),
        });
    }
    for a in actions {
        if a.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: a.len(),
            });
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("action".into()));
        }
    }
    Ok(())
}
