//! Task specification language: predicates, the `Spec` AST, its parser and a
//! direct trajectory-satisfaction oracle.
//!
//! Specifications are built from reach predicates over a single agent's state
//! (`reach_lo`) or over the joint state of all agents (`reach_gl`), composed
//! with `achieve`, `ensuring`, sequencing (`;`) and choice (`or`).

mod eval;
mod parse;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use eval::{chebyshev, satisfies, satisfies_segment, seq_split, HOLD_EPS};
pub use parse::{parse, parse_with, ParseOptions};

/// Whether a predicate reads one agent's state or the joint state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scope {
    Local,
    Global,
}

/// A reach predicate `tolerance - d_inf(state, target) > 0`.
///
/// Local targets have the agent-state dimension. Global targets are either a
/// single point broadcast to every agent, or the per-agent targets
/// concatenated into one joint vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub scope: Scope,
    pub target: Vec<f64>,
    pub tolerance: f64,
}

impl Predicate {
    pub const DEFAULT_TOLERANCE: f64 = 1.0;

    pub fn reach_lo(target: impl Into<Vec<f64>>) -> Self {
        Predicate {
            scope: Scope::Local,
            target: target.into(),
            tolerance: Self::DEFAULT_TOLERANCE,
        }
    }

    pub fn reach_gl(target: impl Into<Vec<f64>>) -> Self {
        Predicate {
            scope: Scope::Global,
            target: target.into(),
            tolerance: Self::DEFAULT_TOLERANCE,
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn is_global(&self) -> bool {
        self.scope == Scope::Global
    }

    /// Target of agent `agent` (global predicates only), given the agent-state
    /// dimension and agent count of the joint state.
    pub fn agent_target(&self, agent: usize, dim: usize, agents: usize) -> Result<&[f64]> {
        if self.target.len() == dim {
            Ok(&self.target)
        } else if self.target.len() == dim * agents {
            Ok(&self.target[agent * dim..(agent + 1) * dim])
        } else {
            Err(Error::Dimension {
                expected: dim * agents,
                got: self.target.len(),
            })
        }
    }

    /// Keep only the joint-target components of `agents` (in the given order).
    /// Local and broadcast targets are returned unchanged.
    pub fn restrict(&self, agents: &[usize], dim: usize) -> Predicate {
        if self.scope == Scope::Local || self.target.len() == dim {
            return self.clone();
        }
        let mut target = Vec::with_capacity(agents.len() * dim);
        for &a in agents {
            target.extend_from_slice(&self.target[a * dim..(a + 1) * dim]);
        }
        Predicate {
            target,
            ..self.clone()
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.scope {
            Scope::Local => "reach_lo",
            Scope::Global => "reach_gl",
        };
        write!(f, "{name}(")?;
        for (i, x) in self.target.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Spec {
    Achieve(Predicate),
    Ensuring(Box<Spec>, Predicate),
    Seq(Box<Spec>, Box<Spec>),
    Or(Box<Spec>, Box<Spec>),
}

impl Spec {
    pub fn achieve(p: Predicate) -> Spec {
        Spec::Achieve(p)
    }

    pub fn seq(a: Spec, b: Spec) -> Spec {
        Spec::Seq(Box::new(a), Box::new(b))
    }

    pub fn or(a: Spec, b: Spec) -> Spec {
        Spec::Or(Box::new(a), Box::new(b))
    }

    pub fn ensuring(a: Spec, b: Predicate) -> Spec {
        Spec::Ensuring(Box::new(a), b)
    }

    /// True when no predicate in the tree is global.
    pub fn is_local(&self) -> bool {
        self.predicates().iter().all(|p| !p.is_global())
    }

    /// All predicates in left-to-right order, constraints included.
    pub fn predicates(&self) -> Vec<&Predicate> {
        let mut out = Vec::new();
        self.collect_predicates(&mut out);
        out
    }

    fn collect_predicates<'a>(&'a self, out: &mut Vec<&'a Predicate>) {
        match self {
            Spec::Achieve(p) => out.push(p),
            Spec::Ensuring(s, p) => {
                s.collect_predicates(out);
                out.push(p);
            }
            Spec::Seq(a, b) | Spec::Or(a, b) => {
                a.collect_predicates(out);
                b.collect_predicates(out);
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Spec::Achieve(_) => 1,
            Spec::Ensuring(s, _) => 1 + s.depth(),
            Spec::Seq(a, b) | Spec::Or(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Rewrite joint targets so the spec talks about `agents` only, renumbered
    /// `0..agents.len()`.
    pub fn restrict(&self, agents: &[usize], dim: usize) -> Spec {
        match self {
            Spec::Achieve(p) => Spec::Achieve(p.restrict(agents, dim)),
            Spec::Ensuring(s, p) => {
                Spec::Ensuring(Box::new(s.restrict(agents, dim)), p.restrict(agents, dim))
            }
            Spec::Seq(a, b) => Spec::seq(a.restrict(agents, dim), b.restrict(agents, dim)),
            Spec::Or(a, b) => Spec::or(a.restrict(agents, dim), b.restrict(agents, dim)),
        }
    }

    /// Check every target against the agent-state dimension (and, for joint
    /// global targets, the agent count).
    pub fn check_dims(&self, dim: usize, agents: Option<usize>) -> Result<()> {
        for p in self.predicates() {
            let ok = match p.scope {
                Scope::Local => p.target.len() == dim,
                Scope::Global => {
                    p.target.len() == dim || agents.is_some_and(|n| p.target.len() == dim * n)
                }
            };
            if !ok {
                return Err(Error::Dimension {
                    expected: dim,
                    got: p.target.len(),
                });
            }
        }
        Ok(())
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
        // 0: seq, 1: or, 2: factor
        let (own, open) = match self {
            Spec::Seq(..) => (0, prec > 0),
            Spec::Or(..) => (1, prec > 1),
            _ => (2, false),
        };
        if open {
            write!(f, "(")?;
        }
        match self {
            Spec::Achieve(p) => write!(f, "{p}")?,
            Spec::Ensuring(s, p) => {
                s.fmt_prec(f, 2)?;
                write!(f, " ensuring {p}")?;
            }
            Spec::Seq(a, b) => {
                a.fmt_prec(f, own)?;
                write!(f, "; ")?;
                b.fmt_prec(f, own + 1)?;
            }
            Spec::Or(a, b) => {
                a.fmt_prec(f, own)?;
                write!(f, " or ")?;
                b.fmt_prec(f, own + 1)?;
            }
        }
        if open {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Spec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// States of all agents at one timestep, stored agent-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    dim: usize,
    coords: Vec<f64>,
}

impl JointState {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: coords.len(),
            });
        }
        Ok(JointState { dim, coords })
    }

    pub fn from_agents<S: AsRef<[f64]>>(agents: &[S]) -> Result<Self> {
        let dim = agents.first().map(|a| a.as_ref().len()).unwrap_or(0);
        let mut coords = Vec::with_capacity(dim * agents.len());
        for a in agents {
            let a = a.as_ref();
            if a.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: a.len(),
                });
            }
            coords.extend_from_slice(a);
        }
        JointState::new(dim, coords)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_agents(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn agent(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn agent_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// The joint state of a subset of agents, renumbered in the given order.
    pub fn select(&self, agents: &[usize]) -> JointState {
        let mut coords = Vec::with_capacity(agents.len() * self.dim);
        for &a in agents {
            coords.extend_from_slice(self.agent(a));
        }
        JointState {
            dim: self.dim,
            coords,
        }
    }
}

/// A base rollout `s_0, a_0, ..., a_{T-1}, s_T`. Specifications are judged on
/// `s_1..=s_T`; `s_0` is the initial condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<JointState>,
    pub actions: Vec<Vec<Vec<f64>>>,
}

impl Trajectory {
    pub fn new(states: Vec<JointState>) -> Result<Self> {
        if let Some(first) = states.first() {
            let (n, dim) = (first.n_agents(), first.dim());
            for s in &states {
                if s.n_agents() != n || s.dim() != dim {
                    return Err(Error::AgentCount {
                        expected: n,
                        got: s.n_agents(),
                    });
                }
            }
        }
        Ok(Trajectory {
            states,
            actions: Vec::new(),
        })
    }

    /// Horizon `T` (number of transitions).
    pub fn horizon(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn n_agents(&self) -> usize {
        self.states.first().map(JointState::n_agents).unwrap_or(0)
    }

    pub fn dim(&self) -> usize {
        self.states.first().map(JointState::dim).unwrap_or(0)
    }

    /// The per-agent view `s^i_0..s^i_T`.
    pub fn agent_view(&self, agent: usize) -> Vec<&[f64]> {
        self.states.iter().map(|s| s.agent(agent)).collect()
    }

    pub fn all_agents(&self) -> Vec<usize> {
        (0..self.n_agents()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_round_trips_precedence() {
        for text in [
            "reach_gl(5, 0); reach_gl(0, 0)",
            "reach_lo(3, 0) or reach_lo(5, 10); reach_lo(5, 0)",
            "reach_lo(1, 1); (reach_lo(2, 2); reach_lo(3, 3))",
            "(reach_lo(1, 1) or reach_lo(2, 2)) ensuring reach_lo(0, 0)",
            "reach_lo(1) or (reach_lo(2) or reach_lo(3))",
        ] {
            let spec = parse(text).unwrap();
            assert_eq!(spec.to_string(), text);
            assert_eq!(parse(&spec.to_string()).unwrap(), spec);
        }
    }

    #[test]
    fn restrict_slices_joint_targets() {
        let p = Predicate::reach_gl(vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0]);
        let r = p.restrict(&[2, 0], 2);
        assert_eq!(r.target, vec![2.0, 2.0, 0.0, 0.0]);
        let b = Predicate::reach_gl(vec![5.0, 0.0]);
        assert_eq!(b.restrict(&[1], 2), b);
    }

    #[test]
    fn check_dims_rejects_mismatch() {
        let spec = parse("reach_lo(1, 2, 3)").unwrap();
        assert!(matches!(spec.check_dims(2, None), Err(Error::Dimension { .. })));
        let spec = parse("reach_gl(1, 2, 3, 4)").unwrap();
        assert!(spec.check_dims(2, Some(2)).is_ok());
        assert!(spec.check_dims(2, Some(3)).is_err());
    }

    #[test]
    fn locality() {
        assert!(parse("reach_lo(1); reach_lo(2)").unwrap().is_local());
        assert!(!parse("reach_lo(1); reach_gl(2)").unwrap().is_local());
    }
}
