//! Composite task monitors: finite automata with real-valued registers whose
//! transitions are guarded by local (one agent) or global (joint state)
//! predicates.

mod compile;
mod dot;
mod product;
mod structure;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spec_lang::{JointState, Predicate, Scope, HOLD_EPS};

pub use compile::compile;
pub use dot::{to_dot, DotOptions};
pub use product::{product, DEFAULT_STATE_CAP};
pub use structure::{validate_structure, StructureReport, StructureViolation};

pub type StateId = usize;
pub type TransitionId = usize;

/// Floor added to every final reward; a strictly positive lower bound on `rho`.
pub const RHO_EPSILON: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    Local,
    Global,
}

/// Reference to a monitor predicate. `agent` pins a local predicate to one
/// agent of the joint state; `None` reads the agent that owns the monitor copy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub pred: usize,
    pub agent: Option<usize>,
}

impl Atom {
    pub fn owner(pred: usize) -> Self {
        Atom { pred, agent: None }
    }
}

/// Conjunction of atoms; the empty guard is `true`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Guard {
    pub atoms: Vec<Atom>,
}

impl Guard {
    pub fn is_true(&self) -> bool {
        self.atoms.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum RegOp {
    /// `v[reg] = max(v[reg], quant(atom))`
    Max { reg: usize, atom: Atom },
    /// `v[reg] = quant(atom)`
    Reset { reg: usize, atom: Atom },
    /// `v[reg] = 1` when `atom` does not hold.
    Check { reg: usize, atom: Atom },
    /// `v[reg] = 0`
    Clear { reg: usize },
}

/// A transition is `Global` when its guard or its update reads a global
/// predicate. Self-loops have the true guard but may update global progress.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub id: TransitionId,
    pub source: StateId,
    pub target: StateId,
    pub guard: Guard,
    pub update: Vec<RegOp>,
    pub kind: Kind,
}

impl Transition {
    pub fn is_self_loop(&self) -> bool {
        self.source == self.target
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegisterKind {
    /// Best quantitative progress towards one `achieve` goal.
    Progress,
    /// Set to 1 once an `ensuring` constraint has failed.
    Violation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Register {
    pub kind: RegisterKind,
    pub scope: Scope,
}

/// One term of the final reward: `RHO_EPSILON + max(0, v[progress])`, or
/// unsatisfied when any of `flags` is set. A final state's reward is the
/// minimum over its terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalTerm {
    pub progress: usize,
    pub flags: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskMonitor {
    num_states: usize,
    pub predicates: Vec<Predicate>,
    pub registers: Vec<Register>,
    transitions: Vec<Transition>,
    pub initial: StateId,
    pub initial_registers: Vec<f64>,
    pub finals: BTreeSet<StateId>,
    /// States that need joint-state knowledge (`Q_g`): sources of global
    /// transitions, kept in sync with the transition list.
    global_states: BTreeSet<StateId>,
    pub final_terms: BTreeMap<StateId, Vec<FinalTerm>>,
    out: Vec<Vec<TransitionId>>,
}

impl TaskMonitor {
    pub(crate) fn from_parts(
        num_states: usize,
        predicates: Vec<Predicate>,
        registers: Vec<Register>,
        transitions: Vec<Transition>,
        finals: BTreeSet<StateId>,
        final_terms: BTreeMap<StateId, Vec<FinalTerm>>,
    ) -> Self {
        let initial_registers = vec![0.0; registers.len()];
        let mut m = TaskMonitor {
            num_states,
            predicates,
            registers,
            transitions,
            initial: 0,
            initial_registers,
            finals,
            global_states: BTreeSet::new(),
            final_terms,
            out: Vec::new(),
        };
        m.reindex();
        m
    }

    fn reindex(&mut self) {
        for (i, t) in self.transitions.iter_mut().enumerate() {
            t.id = i;
        }
        self.out = vec![Vec::new(); self.num_states];
        for t in &self.transitions {
            if t.source < self.num_states {
                self.out[t.source].push(t.id);
            }
        }
        self.global_states = self.global_sources();
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn states(&self) -> std::ops::Range<StateId> {
        0..self.num_states
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn transition(&self, id: TransitionId) -> Result<&Transition> {
        self.transitions
            .get(id)
            .ok_or(Error::UnknownTransition(id))
    }

    /// Append a transition (ids are reassigned densely).
    pub fn add_transition(
        &mut self,
        source: StateId,
        target: StateId,
        guard: Guard,
        update: Vec<RegOp>,
        kind: Kind,
    ) -> TransitionId {
        self.transitions.push(Transition {
            id: 0,
            source,
            target,
            guard,
            update,
            kind,
        });
        self.reindex();
        self.transitions.len() - 1
    }

    /// Remove a transition; later ids shift down by one.
    pub fn remove_transition(&mut self, id: TransitionId) -> Result<Transition> {
        if id >= self.transitions.len() {
            return Err(Error::UnknownTransition(id));
        }
        let t = self.transitions.remove(id);
        self.reindex();
        Ok(t)
    }

    /// All transitions leaving `q`, self-loop included, in id order.
    pub fn outgoing(&self, q: StateId) -> impl Iterator<Item = &Transition> + '_ {
        self.out
            .get(q)
            .into_iter()
            .flatten()
            .map(move |&i| &self.transitions[i])
    }

    /// Transitions leaving `q` to a different state.
    pub fn exits(&self, q: StateId) -> impl Iterator<Item = &Transition> + '_ {
        self.outgoing(q).filter(|t| !t.is_self_loop())
    }

    pub fn self_loop(&self, q: StateId) -> Option<&Transition> {
        self.outgoing(q)
            .find(|t| t.is_self_loop() && t.guard.is_true())
    }

    pub fn global_states(&self) -> &BTreeSet<StateId> {
        &self.global_states
    }

    pub fn is_final(&self, q: StateId) -> bool {
        self.finals.contains(&q)
    }

    /// Sources of global transitions.
    pub fn global_sources(&self) -> BTreeSet<StateId> {
        self.transitions
            .iter()
            .filter(|t| t.kind == Kind::Global)
            .map(|t| t.source)
            .collect()
    }

    pub fn local_registers(&self) -> Vec<usize> {
        self.register_indices(Scope::Local)
    }

    pub fn global_registers(&self) -> Vec<usize> {
        self.register_indices(Scope::Global)
    }

    fn register_indices(&self, scope: Scope) -> Vec<usize> {
        (0..self.registers.len())
            .filter(|&i| self.registers[i].scope == scope)
            .collect()
    }

    fn atom_quant(&self, atom: Atom, owner: usize, joint: &JointState) -> Result<f64> {
        let p = self
            .predicates
            .get(atom.pred)
            .ok_or(Error::Config(format!("unknown predicate {}", atom.pred)))?;
        match p.scope {
            Scope::Local => {
                let a = atom.agent.unwrap_or(owner);
                if a >= joint.n_agents() {
                    return Err(Error::UnknownAgent(a));
                }
                p.quant_agent(joint.agent(a))
            }
            Scope::Global => p.quant(joint),
        }
    }

    /// Quantitative value of a guard for the monitor copy of agent `owner`:
    /// the minimum over its atoms, `+inf` for the true guard.
    pub fn guard_quant(&self, guard: &Guard, owner: usize, joint: &JointState) -> Result<f64> {
        let mut q = f64::INFINITY;
        for &a in &guard.atoms {
            q = q.min(self.atom_quant(a, owner, joint)?);
        }
        Ok(q)
    }

    pub fn guard_holds(&self, guard: &Guard, owner: usize, joint: &JointState) -> Result<bool> {
        Ok(self.guard_quant(guard, owner, joint)? > HOLD_EPS)
    }

    /// Apply a transition's register update in place.
    pub fn apply_update(
        &self,
        t: &Transition,
        owner: usize,
        joint: &JointState,
        v: &mut [f64],
    ) -> Result<()> {
        for op in &t.update {
            match *op {
                RegOp::Max { reg, atom } => {
                    let q = self.atom_quant(atom, owner, joint)?;
                    v[reg] = v[reg].max(q);
                }
                RegOp::Reset { reg, atom } => v[reg] = self.atom_quant(atom, owner, joint)?,
                RegOp::Check { reg, atom } => {
                    if self.atom_quant(atom, owner, joint)? <= HOLD_EPS {
                        v[reg] = 1.0;
                    }
                }
                RegOp::Clear { reg } => v[reg] = 0.0,
            }
        }
        Ok(())
    }

    /// Final reward `rho(q, v)`; `None` stands for an unsatisfied outcome
    /// (a violated `ensuring` constraint).
    pub fn rho(&self, q: StateId, v: &[f64]) -> Result<Option<f64>> {
        let terms = self
            .final_terms
            .get(&q)
            .ok_or(Error::Config(format!("state {q} is not final")))?;
        let mut best = f64::INFINITY;
        for term in terms {
            if term.flags.iter().any(|&f| v[f] != 0.0) {
                return Ok(None);
            }
            best = best.min(RHO_EPSILON + v[term.progress].max(0.0));
        }
        Ok(Some(best))
    }

    /// Largest value `rho` can take given progress registers bounded by the
    /// largest predicate tolerance.
    pub fn rho_upper_bound(&self) -> f64 {
        let tol = self
            .predicates
            .iter()
            .map(|p| p.tolerance)
            .fold(0.0, f64::max);
        RHO_EPSILON + tol
    }

    /// Longest-path depth of every state from the initial state, ignoring
    /// self-loops. Fails on a non-self-loop cycle.
    pub fn depths(&self) -> Result<Vec<usize>> {
        let order = self.topological_order().ok_or_else(|| {
            Error::Config("monitor graph has a cycle besides self-loops".into())
        })?;
        let mut depth = vec![0usize; self.num_states];
        for q in order {
            for t in self.exits(q) {
                depth[t.target] = depth[t.target].max(depth[q] + 1);
            }
        }
        Ok(depth)
    }

    pub fn max_depth(&self) -> Result<usize> {
        Ok(self.depths()?.into_iter().max().unwrap_or(0))
    }

    pub(crate) fn topological_order(&self) -> Option<Vec<StateId>> {
        let mut indeg = vec![0usize; self.num_states];
        for t in self.transitions.iter().filter(|t| !t.is_self_loop()) {
            indeg[t.target] += 1;
        }
        let mut queue: VecDeque<StateId> = (0..self.num_states).filter(|&q| indeg[q] == 0).collect();
        let mut order = Vec::with_capacity(self.num_states);
        while let Some(q) = queue.pop_front() {
            order.push(q);
            for t in self.exits(q) {
                indeg[t.target] -= 1;
                if indeg[t.target] == 0 {
                    queue.push_back(t.target);
                }
            }
        }
        (order.len() == self.num_states).then_some(order)
    }

    /// Human-readable guard, e.g. `reach_gl(5, 0) & reach_lo@1(0, 0)`.
    pub fn describe_guard(&self, guard: &Guard) -> String {
        if guard.is_true() {
            return "true".into();
        }
        guard
            .atoms
            .iter()
            .map(|a| {
                let p = &self.predicates[a.pred];
                match a.agent {
                    Some(i) => p.to_string().replacen('(', &format!("@{i}("), 1),
                    None => p.to_string(),
                }
            })
            .collect::<Vec<_>>()
            .join(" & ")
    }

    /// Serializable summary: states, edges with readable guards, finals,
    /// global and synchronization states, depths.
    pub fn artifact(&self, sync: &BTreeSet<StateId>) -> Result<MonitorArtifact> {
        let depth = self.depths()?;
        Ok(MonitorArtifact {
            states: self.num_states,
            initial: self.initial,
            finals: self.finals.iter().copied().collect(),
            global_states: self.global_states.iter().copied().collect(),
            sync_states: sync.iter().copied().collect(),
            registers: self.registers.clone(),
            depth,
            transitions: self
                .transitions
                .iter()
                .map(|t| EdgeArtifact {
                    id: t.id,
                    source: t.source,
                    target: t.target,
                    kind: t.kind,
                    guard: self.describe_guard(&t.guard),
                    self_loop: t.is_self_loop(),
                })
                .collect(),
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgeArtifact {
    pub id: TransitionId,
    pub source: StateId,
    pub target: StateId,
    pub kind: Kind,
    pub guard: String,
    pub self_loop: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonitorArtifact {
    pub states: usize,
    pub initial: StateId,
    pub finals: Vec<StateId>,
    pub global_states: Vec<StateId>,
    pub sync_states: Vec<StateId>,
    pub registers: Vec<Register>,
    pub depth: Vec<usize>,
    pub transitions: Vec<EdgeArtifact>,
}

#[cfg(test)]
mod tests;
