use std::collections::HashMap;

use super::{JointState, Predicate, Scope, Spec, Trajectory};
use crate::error::{Error, Result};

/// Quantitative values in `(-HOLD_EPS, HOLD_EPS]` count as not holding.
pub const HOLD_EPS: f64 = 1e-9;

/// L-infinity distance.
pub fn chebyshev(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

impl Predicate {
    /// Quantitative value of a local predicate on one agent's state.
    pub fn quant_agent(&self, state: &[f64]) -> Result<f64> {
        if self.scope != Scope::Local || state.len() != self.target.len() {
            return Err(Error::Dimension {
                expected: self.target.len(),
                got: state.len(),
            });
        }
        Ok(self.tolerance - chebyshev(state, &self.target))
    }

    /// Quantitative value of a global predicate on the joint state restricted to
    /// `agents`: `tolerance - max_j d_inf(s^j, x^j)`.
    pub fn quant_joint(&self, state: &JointState, agents: &[usize]) -> Result<f64> {
        if self.scope != Scope::Global {
            return Err(Error::Dimension {
                expected: self.target.len(),
                got: state.coords().len(),
            });
        }
        let (dim, n) = (state.dim(), state.n_agents());
        let mut dist = 0.0f64;
        for &a in agents {
            if a >= n {
                return Err(Error::UnknownAgent(a));
            }
            dist = dist.max(chebyshev(state.agent(a), self.agent_target(a, dim, n)?));
        }
        Ok(self.tolerance - dist)
    }

    /// Quantitative value on the full state: the single agent state for local
    /// predicates, every agent of the joint state for global ones.
    pub fn quant(&self, state: &JointState) -> Result<f64> {
        match self.scope {
            Scope::Local if state.n_agents() == 1 => self.quant_agent(state.agent(0)),
            Scope::Local => Err(Error::Dimension {
                expected: self.target.len(),
                got: state.coords().len(),
            }),
            Scope::Global => {
                let all: Vec<usize> = (0..state.n_agents()).collect();
                self.quant_joint(state, &all)
            }
        }
    }

    pub fn holds_agent(&self, state: &[f64]) -> Result<bool> {
        Ok(self.quant_agent(state)? > HOLD_EPS)
    }

    pub fn holds_joint(&self, state: &JointState, agents: &[usize]) -> Result<bool> {
        Ok(self.quant_joint(state, agents)? > HOLD_EPS)
    }

    pub fn holds(&self, state: &JointState) -> Result<bool> {
        Ok(self.quant(state)? > HOLD_EPS)
    }
}

/// Does `traj` satisfy `spec` for the agent set `agents`, judged on
/// `s_1..=s_T`?
///
/// Local (sub)specifications are judged per agent; global ones on the joint
/// state of `agents`. Sequencing searches every split index exhaustively.
pub fn satisfies(spec: &Spec, traj: &Trajectory, agents: &[usize]) -> Result<bool> {
    let t = traj.horizon();
    if t == 0 {
        return Err(Error::EmptyTrajectory);
    }
    satisfies_segment(spec, traj, agents, 1, t)
}

/// Like [`satisfies`] but on the inclusive segment `s_lo..=s_hi`.
pub fn satisfies_segment(
    spec: &Spec,
    traj: &Trajectory,
    agents: &[usize],
    lo: usize,
    hi: usize,
) -> Result<bool> {
    let n = traj.n_agents();
    if let Some(&bad) = agents.iter().find(|&&a| a >= n) {
        return Err(Error::UnknownAgent(bad));
    }
    if hi >= traj.states.len() {
        return Err(Error::EmptyTrajectory);
    }
    let mut ev = Evaluator::new(traj, agents);
    ev.sat(spec, lo, hi, agents)
}

/// For `Seq(a, b)`, the smallest split index `k` with `a` on `s_1..=s_k` and
/// `b` on `s_{k+1}..=s_T`, if any.
pub fn seq_split(spec: &Spec, traj: &Trajectory, agents: &[usize]) -> Result<Option<usize>> {
    let Spec::Seq(a, b) = spec else {
        return Ok(None);
    };
    let t = traj.horizon();
    if t == 0 {
        return Err(Error::EmptyTrajectory);
    }
    let mut ev = Evaluator::new(traj, agents);
    for k in 1..t {
        if ev.sat(a, 1, k, agents)? && ev.sat(b, k + 1, t, agents)? {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

const WHOLE_SET: usize = usize::MAX;

struct Evaluator<'a> {
    traj: &'a Trajectory,
    agents: &'a [usize],
    // sorted times at which a leaf holds, keyed by (leaf address, agent or WHOLE_SET)
    hits: HashMap<(usize, usize), Vec<usize>>,
    // sorted times at which a constraint fails for one agent
    violations: HashMap<(usize, usize), Vec<usize>>,
    local: HashMap<usize, bool>,
    memo: HashMap<(usize, usize, usize, usize), bool>,
}

fn addr<T>(x: &T) -> usize {
    x as *const T as usize
}

fn any_in(sorted: &[usize], lo: usize, hi: usize) -> bool {
    let i = sorted.partition_point(|&t| t < lo);
    i < sorted.len() && sorted[i] <= hi
}

impl<'a> Evaluator<'a> {
    fn new(traj: &'a Trajectory, agents: &'a [usize]) -> Self {
        Evaluator {
            traj,
            agents,
            hits: HashMap::new(),
            violations: HashMap::new(),
            local: HashMap::new(),
            memo: HashMap::new(),
        }
    }

    fn is_local(&mut self, spec: &Spec) -> bool {
        *self
            .local
            .entry(addr(spec))
            .or_insert_with(|| spec.is_local())
    }

    fn local_hits(&mut self, p: &Predicate, agent: usize) -> Result<&Vec<usize>> {
        let key = (addr(p), agent);
        if !self.hits.contains_key(&key) {
            let mut v = Vec::new();
            for (t, s) in self.traj.states.iter().enumerate() {
                if p.holds_agent(s.agent(agent))? {
                    v.push(t);
                }
            }
            self.hits.insert(key, v);
        }
        Ok(&self.hits[&key])
    }

    fn global_hits(&mut self, p: &Predicate) -> Result<&Vec<usize>> {
        let key = (addr(p), WHOLE_SET);
        if !self.hits.contains_key(&key) {
            let mut v = Vec::new();
            for (t, s) in self.traj.states.iter().enumerate() {
                if p.holds_joint(s, self.agents)? {
                    v.push(t);
                }
            }
            self.hits.insert(key, v);
        }
        Ok(&self.hits[&key])
    }

    fn constraint_violations(&mut self, p: &Predicate, agent: usize) -> Result<&Vec<usize>> {
        let key = (addr(p), agent);
        if !self.violations.contains_key(&key) {
            let mut v = Vec::new();
            for (t, s) in self.traj.states.iter().enumerate() {
                if !p.holds_agent(s.agent(agent))? {
                    v.push(t);
                }
            }
            self.violations.insert(key, v);
        }
        Ok(&self.violations[&key])
    }

    fn sat(&mut self, spec: &Spec, lo: usize, hi: usize, agents: &[usize]) -> Result<bool> {
        if lo > hi || lo == 0 {
            return Ok(false);
        }
        if agents.len() > 1 && self.is_local(spec) {
            for &a in agents {
                if !self.sat(spec, lo, hi, &[a])? {
                    return Ok(false);
                }
            }
            return Ok(true);
        }
        match spec {
            Spec::Achieve(p) => match p.scope {
                Scope::Local => {
                    for &a in agents {
                        if !any_in(self.local_hits(p, a)?, lo, hi) {
                            return Ok(false);
                        }
                    }
                    Ok(true)
                }
                Scope::Global => Ok(any_in(self.global_hits(p)?, lo, hi)),
            },
            Spec::Ensuring(inner, p) => {
                for &a in agents {
                    if any_in(self.constraint_violations(p, a)?, lo, hi) {
                        return Ok(false);
                    }
                }
                self.sat(inner, lo, hi, agents)
            }
            Spec::Or(a, b) => Ok(self.sat(a, lo, hi, agents)? || self.sat(b, lo, hi, agents)?),
            Spec::Seq(a, b) => {
                let who = if agents.len() == 1 { agents[0] } else { WHOLE_SET };
                let key = (addr(spec), lo, hi, who);
                if let Some(&r) = self.memo.get(&key) {
                    return Ok(r);
                }
                let mut found = false;
                for k in lo..hi {
                    if self.sat(a, lo, k, agents)? && self.sat(b, k + 1, hi, agents)? {
                        found = true;
                        break;
                    }
                }
                self.memo.insert(key, found);
                Ok(found)
            }
        }
    }
}
