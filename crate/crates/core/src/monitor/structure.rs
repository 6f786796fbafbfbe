use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use super::{StateId, TaskMonitor, TransitionId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StructureViolation {
    /// Property 1: a cycle other than a self-loop, listed in visiting order.
    Cycle(Vec<StateId>),
    /// Property 2: a final state with an exit.
    FinalExit { state: StateId, transition: TransitionId },
    /// Property 3: a state not reachable from the initial state.
    Unreachable(StateId),
    /// Property 3: a state from which no final state is reachable.
    NoFinalReachable(StateId),
    /// Property 4: two transitions between the same ordered pair.
    DuplicateEdge {
        source: StateId,
        target: StateId,
        transitions: (TransitionId, TransitionId),
    },
    /// Property 5: no self-loop with the true guard.
    MissingSelfLoop(StateId),
}

impl StructureViolation {
    pub fn property(&self) -> u8 {
        match self {
            StructureViolation::Cycle(_) => 1,
            StructureViolation::FinalExit { .. } => 2,
            StructureViolation::Unreachable(_) | StructureViolation::NoFinalReachable(_) => 3,
            StructureViolation::DuplicateEdge { .. } => 4,
            StructureViolation::MissingSelfLoop(_) => 5,
        }
    }
}

impl fmt::Display for StructureViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StructureViolation::Cycle(c) => write!(f, "property 1: cycle {c:?}"),
            StructureViolation::FinalExit { state, transition } => {
                write!(f, "property 2: final q{state} has exit t{transition}")
            }
            StructureViolation::Unreachable(q) => write!(f, "property 3: q{q} unreachable"),
            StructureViolation::NoFinalReachable(q) => {
                write!(f, "property 3: no final reachable from q{q}")
            }
            StructureViolation::DuplicateEdge {
                source,
                target,
                transitions,
            } => write!(
                f,
                "property 4: q{source}->q{target} appears twice (t{}, t{})",
                transitions.0, transitions.1
            ),
            StructureViolation::MissingSelfLoop(q) => {
                write!(f, "property 5: q{q} has no true self-loop")
            }
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct StructureReport {
    pub violations: Vec<StructureViolation>,
}

impl StructureReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn passes(&self, property: u8) -> bool {
        self.violations.iter().all(|v| v.property() != property)
    }
}

pub fn validate_structure(m: &TaskMonitor) -> StructureReport {
    let mut violations = Vec::new();
    let n = m.num_states();

    if let Some(cycle) = find_cycle(m) {
        violations.push(StructureViolation::Cycle(cycle));
    }

    for &q in &m.finals {
        if let Some(t) = m.exits(q).next() {
            violations.push(StructureViolation::FinalExit {
                state: q,
                transition: t.id,
            });
        }
    }

    let forward = reach(n, m.initial, |q| m.exits(q).map(|t| t.target).collect());
    let mut preds = vec![Vec::new(); n];
    for t in m.transitions().iter().filter(|t| !t.is_self_loop()) {
        preds[t.target].push(t.source);
    }
    let mut backward = vec![false; n];
    let mut queue: VecDeque<StateId> = m.finals.iter().copied().filter(|&f| f < n).collect();
    for &f in &queue {
        backward[f] = true;
    }
    while let Some(q) = queue.pop_front() {
        for &p in &preds[q] {
            if !backward[p] {
                backward[p] = true;
                queue.push_back(p);
            }
        }
    }
    for q in 0..n {
        if !forward[q] {
            violations.push(StructureViolation::Unreachable(q));
        }
        if !backward[q] {
            violations.push(StructureViolation::NoFinalReachable(q));
        }
    }

    let mut pairs: BTreeMap<(StateId, StateId), TransitionId> = BTreeMap::new();
    for t in m.transitions() {
        // The true self-loop is the structural one; a second guarded self-loop
        // still counts as a duplicate pair.
        if let Some(&first) = pairs.get(&(t.source, t.target)) {
            violations.push(StructureViolation::DuplicateEdge {
                source: t.source,
                target: t.target,
                transitions: (first, t.id),
            });
        } else {
            pairs.insert((t.source, t.target), t.id);
        }
    }

    for q in 0..n {
        if m.self_loop(q).is_none() {
            violations.push(StructureViolation::MissingSelfLoop(q));
        }
    }

    StructureReport { violations }
}

fn reach(n: usize, from: StateId, succ: impl Fn(StateId) -> Vec<StateId>) -> Vec<bool> {
    let mut seen = vec![false; n];
    if from >= n {
        return seen;
    }
    seen[from] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(q) = queue.pop_front() {
        for s in succ(q) {
            if !seen[s] {
                seen[s] = true;
                queue.push_back(s);
            }
        }
    }
    seen
}

/// Depth-first search for a non-self-loop cycle; returns its states.
fn find_cycle(m: &TaskMonitor) -> Option<Vec<StateId>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let n = m.num_states();
    let mut mark = vec![Mark::New; n];
    let mut stack: Vec<StateId> = Vec::new();

    fn visit(
        m: &TaskMonitor,
        q: StateId,
        mark: &mut [Mark],
        stack: &mut Vec<StateId>,
    ) -> Option<Vec<StateId>> {
        mark[q] = Mark::Active;
        stack.push(q);
        for t in m.exits(q) {
            match mark[t.target] {
                Mark::Active => {
                    let pos = stack.iter().position(|&s| s == t.target).unwrap();
                    return Some(stack[pos..].to_vec());
                }
                Mark::New => {
                    if let Some(c) = visit(m, t.target, mark, stack) {
                        return Some(c);
                    }
                }
                Mark::Done => {}
            }
        }
        stack.pop();
        mark[q] = Mark::Done;
        None
    }

    for q in 0..n {
        if mark[q] == Mark::New {
            if let Some(c) = visit(m, q, &mut mark, &mut stack) {
                return Some(c);
            }
        }
    }
    None
}
