//! Group curriculum: partition agents into groups whose minimum size grows
//! by a factor each stage, plus checkers for the group properties that make
//! the curriculum sound.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spec_lang::{chebyshev, satisfies, Spec, Trajectory, HOLD_EPS};

pub const DEFAULT_THRESHOLD: f64 = 0.9;

/// Partition `agents` (in order) into `floor(N / g)` groups of at least `g`
/// agents; the last group takes the remainder. `g > N` gives one group.
pub fn set_groups(g: usize, agents: &[usize]) -> Result<Vec<Vec<usize>>> {
    if agents.is_empty() {
        return Err(Error::Config("cannot group an empty agent set".into()));
    }
    if g == 0 {
        return Err(Error::Config("group size must be at least 1".into()));
    }
    let n = agents.len();
    if g > n {
        return Ok(vec![agents.to_vec()]);
    }
    let groups = n / g;
    let mut out: Vec<Vec<usize>> = vec![Vec::new()];
    for &a in agents {
        let j = out.len();
        if out[j - 1].len() < g || j == groups {
            out[j - 1].push(a);
        } else {
            out.push(vec![a]);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageSchedule {
    pub agents: usize,
    pub k: usize,
    pub f: usize,
    /// Minimum group size per stage.
    pub sizes: Vec<usize>,
    pub stage: usize,
    pub complete: bool,
}

/// Stages `g_1 = k, g_{i+1} = f g_i` while `g <= N`; at least one stage.
pub fn build_schedule(agents: usize, k: usize, f: usize) -> Result<StageSchedule> {
    if agents == 0 || k == 0 {
        return Err(Error::Config("agent count and k must be positive".into()));
    }
    if f < 2 {
        return Err(Error::Config("growth factor must be at least 2".into()));
    }
    let mut sizes = vec![k];
    let mut g = k;
    while g * f <= agents {
        g *= f;
        sizes.push(g);
    }
    Ok(StageSchedule {
        agents,
        k,
        f,
        sizes,
        stage: 0,
        complete: false,
    })
}

impl StageSchedule {
    pub fn stages(&self) -> usize {
        self.sizes.len()
    }

    pub fn group_size(&self) -> usize {
        self.sizes[self.stage]
    }

    pub fn groups(&self) -> Vec<Vec<usize>> {
        self.groups_at(self.stage)
    }

    pub fn groups_at(&self, stage: usize) -> Vec<Vec<usize>> {
        let agents: Vec<usize> = (0..self.agents).collect();
        set_groups(self.sizes[stage], &agents).expect("schedule has agents and g >= 1")
    }

    pub fn is_final_stage(&self) -> bool {
        self.stage + 1 == self.sizes.len()
    }
}

/// Advance when every group's satisfaction rate reaches `threshold`. On the
/// last stage this marks the schedule complete instead. Returns whether the
/// stage index changed.
pub fn advance_if_satisfied(s: &mut StageSchedule, rates: &[f64], threshold: f64) -> Result<bool> {
    let groups = s.groups().len();
    if rates.len() != groups {
        return Err(Error::Config(format!(
            "expected {groups} group rates, got {}",
            rates.len()
        )));
    }
    if !rates.iter().all(|&r| r >= threshold) {
        return Ok(false);
    }
    if s.is_final_stage() {
        s.complete = true;
        return Ok(false);
    }
    s.stage += 1;
    Ok(true)
}

/// Satisfaction of a specification by a subset of agents.
pub trait GroupSpec {
    fn holds(&self, traj: &Trajectory, agents: &[usize]) -> Result<bool>;
}

impl GroupSpec for Spec {
    fn holds(&self, traj: &Trajectory, agents: &[usize]) -> Result<bool> {
        satisfies(self, traj, agents)
    }
}

/// Counting objective: each agent collects the first fruit it comes within
/// `tolerance` of, and the agents together must collect `required` distinct
/// fruits. Subsets of a satisfying set usually fall short.
#[derive(Clone, Debug)]
pub struct CapacitySpec {
    pub fruits: Vec<Vec<f64>>,
    pub tolerance: f64,
    pub required: usize,
}

impl CapacitySpec {
    fn collected(&self, traj: &Trajectory, agent: usize) -> Option<usize> {
        (1..traj.states.len()).find_map(|t| {
            let s = traj.states[t].agent(agent);
            self.fruits
                .iter()
                .position(|f| self.tolerance - chebyshev(s, f) > HOLD_EPS)
        })
    }
}

impl GroupSpec for CapacitySpec {
    fn holds(&self, traj: &Trajectory, agents: &[usize]) -> Result<bool> {
        let mut got = std::collections::BTreeSet::new();
        for &a in agents {
            if a >= traj.n_agents() {
                return Err(Error::UnknownAgent(a));
            }
            if let Some(f) = self.collected(traj, a) {
                got.insert(f);
            }
        }
        Ok(got.len() >= self.required)
    }
}

/// `phi(n1 ∪ n2) ⟹ phi(n1) ∧ phi(n2)` on one trajectory.
pub fn check_ma_distributive<S: GroupSpec + ?Sized>(
    spec: &S,
    traj: &Trajectory,
    n1: &[usize],
    n2: &[usize],
) -> Result<bool> {
    if n1.iter().any(|a| n2.contains(a)) {
        return Err(Error::OverlappingAgents);
    }
    let union: Vec<usize> = n1.iter().chain(n2).copied().collect();
    if !spec.holds(traj, &union)? {
        return Ok(true);
    }
    Ok(spec.holds(traj, n1)? && spec.holds(traj, n2)?)
}

/// `phi(all groups) ⟹ phi(n_j)` for every group `n_j` of the partition.
pub fn check_decomposition<S: GroupSpec + ?Sized>(
    spec: &S,
    traj: &Trajectory,
    partition: &[Vec<usize>],
) -> Result<bool> {
    let mut all: Vec<usize> = partition.iter().flatten().copied().collect();
    all.sort_unstable();
    if all.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::OverlappingAgents);
    }
    if !spec.holds(traj, &all)? {
        return Ok(true);
    }
    for group in partition {
        if !spec.holds(traj, group)? {
            return Ok(false);
        }
    }
    Ok(true)
}
