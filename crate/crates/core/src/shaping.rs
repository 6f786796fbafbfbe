//! Monitor-based trajectory rewards: final reward, the shaped reward that
//! orders incomplete rollouts by monitor depth, and stage offsets for group
//! curricula.

use serde::Serialize;

use crate::envs::StateBox;
use crate::error::{Error, Result};
use crate::monitor::{StateId, TaskMonitor, RHO_EPSILON};
use crate::spec_lang::JointState;

/// Reward of a rollout. `NegInfinity` sorts below every value and never
/// enters arithmetic.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub enum FinalReward {
    NegInfinity,
    Value(f64),
}

impl FinalReward {
    pub fn value(self) -> Option<f64> {
        match self {
            FinalReward::Value(v) => Some(v),
            FinalReward::NegInfinity => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShapingConstants {
    /// Lower bound on every final reward.
    pub c_l: f64,
    /// Upper bound on `|alpha|` over the state box.
    pub c_u: f64,
    /// Longest-path depth per monitor state.
    pub depth: Vec<usize>,
    pub max_depth: usize,
    /// Largest predicate tolerance in the monitor.
    pub tolerance: f64,
}

impl ShapingConstants {
    /// Offset between consecutive stages: `(2D + 1) * C_u`.
    pub fn stage_offset(&self) -> f64 {
        (2.0 * self.max_depth as f64 + 1.0) * self.c_u
    }

    /// Interval holding every reward a real rollout can get: from the
    /// shallowest incomplete rollout to the best final reward. Its width is
    /// below the stage offset.
    pub fn ctm_band(&self) -> (f64, f64) {
        let lo = self.c_l + 1.0 + 2.0 * self.tolerance - self.stage_offset();
        let hi = self.c_l + self.tolerance;
        (lo, hi)
    }

    /// Clip into [`Self::ctm_band`], mapping an unsatisfied outcome to the floor.
    pub fn clip_ctm(&self, r: FinalReward) -> f64 {
        let (lo, hi) = self.ctm_band();
        match r {
            FinalReward::Value(v) => v.clamp(lo, hi),
            FinalReward::NegInfinity => lo,
        }
    }
}

pub fn compute_constants(m: &TaskMonitor, state_box: &StateBox) -> Result<ShapingConstants> {
    let depth = m.depths()?;
    let max_depth = depth.iter().copied().max().unwrap_or(0);
    let tolerance = m.predicates.iter().map(|p| p.tolerance).fold(0.0, f64::max);
    let dim = state_box.dim();
    let targets: Vec<&[f64]> = m
        .predicates
        .iter()
        .flat_map(|p| p.target.chunks(dim))
        .collect();
    let reach = state_box.including(targets).diameter_inf();
    Ok(ShapingConstants {
        c_l: RHO_EPSILON,
        c_u: tolerance + reach + 1.0,
        depth,
        max_depth,
        tolerance,
    })
}

/// Best quantitative value over the exits of a non-final state.
pub fn alpha(m: &TaskMonitor, q: StateId, owner: usize, joint: &JointState) -> Result<f64> {
    if m.is_final(q) {
        return Err(Error::FinalState(q));
    }
    let mut best = f64::NEG_INFINITY;
    for t in m.exits(q) {
        best = best.max(m.guard_quant(&t.guard, owner, joint)?);
    }
    Ok(best)
}

pub fn final_reward(m: &TaskMonitor, q: StateId, v: &[f64]) -> Result<FinalReward> {
    if !m.is_final(q) {
        return Ok(FinalReward::NegInfinity);
    }
    Ok(match m.rho(q, v)? {
        Some(r) => FinalReward::Value(r),
        None => FinalReward::NegInfinity,
    })
}

/// Shaped reward of one agent. `joints`, `qs` and `vs` hold the `T + 1`
/// joint states (as seen by the agent's monitor), monitor states and
/// registers of the rollout.
pub fn shaped_reward(
    m: &TaskMonitor,
    consts: &ShapingConstants,
    owner: usize,
    joints: &[&JointState],
    qs: &[StateId],
    vs: &[&[f64]],
) -> Result<FinalReward> {
    if qs.len() < 2 || joints.len() != qs.len() || vs.len() != qs.len() {
        return Err(Error::DegenerateRollout);
    }
    let t_end = qs.len() - 1;
    let q_t = qs[t_end];
    if m.is_final(q_t) {
        return final_reward(m, q_t, vs[t_end]);
    }
    let k = (0..=t_end)
        .rev()
        .take_while(|&j| qs[j] == q_t)
        .last()
        .unwrap_or(t_end);
    // j runs over [k, T); when q_T was entered on the last step that range
    // is empty and the terminal state is used instead
    let window = if k < t_end { k..t_end } else { t_end..t_end + 1 };
    let mut best = f64::NEG_INFINITY;
    for j in window {
        best = best.max(alpha(m, q_t, owner, joints[j])?);
    }
    let d = consts.depth[q_t] as f64;
    Ok(FinalReward::Value(
        best + 2.0 * consts.c_u * (d - consts.max_depth as f64) + consts.c_l,
    ))
}

/// `stage * c_k + ctm` with `c_k = (2D + 1) C_u`.
pub fn staged_reward(stage: usize, ctm: f64, consts: &ShapingConstants) -> f64 {
    stage as f64 * consts.stage_offset() + ctm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monitor::compile;
    use crate::spec_lang::parse;

    fn phi1() -> TaskMonitor {
        compile(&parse("reach_gl(5, 0); reach_gl(0, 0)").unwrap()).unwrap()
    }

    fn js(points: &[[f64; 2]]) -> JointState {
        JointState::from_agents(points).unwrap()
    }

    #[test]
    fn alpha_values() {
        let m = phi1();
        assert_eq!(alpha(&m, 0, 0, &js(&[[5.0, 0.0], [5.0, 0.0]])).unwrap(), 1.0);
        assert_eq!(alpha(&m, 0, 0, &js(&[[0.0, 0.0], [0.0, 0.0]])).unwrap(), -4.0);
        assert!(matches!(alpha(&m, 2, 0, &js(&[[0.0, 0.0]])), Err(Error::FinalState(2))));

        let two = compile(&parse("reach_lo(2, 0) or reach_lo(0, 0.7)").unwrap()).unwrap();
        // quant values -1 and 0.3
        assert!((alpha(&two, 0, 0, &js(&[[0.0, 0.0]])).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn constants_for_default_box() {
        let m = phi1();
        let c = compute_constants(&m, &StateBox::cube(2, 20.0)).unwrap();
        assert_eq!(c.c_u, 42.0);
        assert_eq!(c.c_l, RHO_EPSILON);
        assert_eq!(c.depth, vec![0, 1, 2]);
        assert_eq!(c.max_depth, 2);
        let single = compile(&parse("reach_lo(0, 0)").unwrap()).unwrap();
        assert_eq!(compute_constants(&single, &StateBox::cube(2, 20.0)).unwrap().max_depth, 1);
    }

    #[test]
    fn final_reward_cases() {
        let m = phi1();
        let v = [0.9, 0.4];
        assert_eq!(final_reward(&m, 2, &v).unwrap(), FinalReward::Value(0.5));
        assert_eq!(final_reward(&m, 1, &v).unwrap(), FinalReward::NegInfinity);
        assert!(FinalReward::NegInfinity < FinalReward::Value(-1e300));
    }

    #[test]
    fn stuck_rollout_plugs_into_formula() {
        let m = phi1();
        let c = ShapingConstants {
            c_l: 0.1,
            c_u: 30.0,
            depth: vec![0, 1, 2],
            max_depth: 2,
            tolerance: 1.0,
        };
        // best alpha -1 at (7, 0); the terminal state is excluded
        let states = [js(&[[9.0, 0.0]]), js(&[[7.0, 0.0]]), js(&[[5.0, 0.0]])];
        let joints: Vec<&JointState> = states.iter().collect();
        let v = [0.0, 0.0];
        let r = shaped_reward(&m, &c, 0, &joints, &[0, 0, 0], &[&v, &v, &v]).unwrap();
        match r {
            FinalReward::Value(x) => assert!((x - (-120.9)).abs() < 1e-9),
            _ => panic!(),
        }
        assert!(matches!(
            shaped_reward(&m, &c, 0, &joints[..1], &[0], &[&v]),
            Err(Error::DegenerateRollout)
        ));
    }

    #[test]
    fn window_starts_where_the_last_state_was_entered() {
        let m = phi1();
        let c = compute_constants(&m, &StateBox::cube(2, 20.0)).unwrap();
        let states = [js(&[[5.0, 0.0]]), js(&[[5.0, 0.0]]), js(&[[3.0, 0.0]]), js(&[[2.0, 0.0]])];
        let joints: Vec<&JointState> = states.iter().collect();
        let v: &[f64] = &[0.0, 0.0];
        // at q1 from index 1: alpha over j = 1, 2 is max(-4, -2)
        let r = shaped_reward(&m, &c, 0, &joints, &[0, 1, 1, 1], &[v; 4]).unwrap();
        assert_eq!(r, FinalReward::Value(-2.0 + 2.0 * 42.0 * (1.0 - 2.0) + 0.1));
        // entered on the last step: the terminal state is used
        let r = shaped_reward(&m, &c, 0, &joints, &[0, 0, 0, 1], &[v; 4]).unwrap();
        assert_eq!(r, FinalReward::Value(-1.0 + 2.0 * 42.0 * (1.0 - 2.0) + 0.1));
    }

    #[test]
    fn staged_offsets() {
        let c = ShapingConstants {
            c_l: 0.1,
            c_u: 42.0,
            depth: vec![0, 1, 2],
            max_depth: 2,
            tolerance: 1.0,
        };
        assert!((staged_reward(1, -120.9, &c) - 89.1).abs() < 1e-9);
        assert_eq!(staged_reward(0, -3.5, &c), -3.5);
        let (lo, hi) = c.ctm_band();
        assert!(hi - lo < c.stage_offset());
        assert!(staged_reward(0, hi, &c) < staged_reward(1, lo, &c));
    }

    #[test]
    fn wider_band_breaks_stage_order() {
        // with ctm allowed anywhere in [-2 D C_u - C_u, C_u] stages overlap
        let c = compute_constants(&phi1(), &StateBox::cube(2, 20.0)).unwrap();
        let d = c.max_depth as f64;
        let top = staged_reward(0, c.c_u, &c);
        let bottom = staged_reward(1, -2.0 * d * c.c_u - c.c_u, &c);
        assert!(top >= bottom);
    }
}
