//! Synchronization states and the majority vote that resolves transition
//! proposals at them.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::monitor::{Kind, StateId, TaskMonitor, TransitionId};

pub type SyncSet = BTreeSet<StateId>;

/// `Q_g` plus every branching state that survives refinement.
pub fn identify_sync_states(m: &TaskMonitor) -> SyncSet {
    let mut sync = m.global_states().clone();
    sync.extend(branching_states(m).into_iter().filter(|&b| !droppable(m, b)));
    sync
}

/// States with at least two distinct non-self-loop successors.
pub fn branching_states(m: &TaskMonitor) -> Vec<StateId> {
    m.states()
        .filter(|&q| {
            let succ: BTreeSet<StateId> = m.exits(q).map(|t| t.target).collect();
            succ.len() >= 2
        })
        .collect()
}

fn descendants(m: &TaskMonitor, from: StateId) -> BTreeSet<StateId> {
    let mut seen = BTreeSet::from([from]);
    let mut stack = vec![from];
    while let Some(q) = stack.pop() {
        for t in m.exits(q) {
            if seen.insert(t.target) {
                stack.push(t.target);
            }
        }
    }
    seen
}

/// A branching state can be dropped when its branches are purely local up
/// to where they rejoin or end, or when every pair of branches rejoins and
/// no state exclusive to one branch needs the joint state.
fn droppable(m: &TaskMonitor, b: StateId) -> bool {
    let succ: BTreeSet<StateId> = m.exits(b).map(|t| t.target).collect();
    let regions: Vec<BTreeSet<StateId>> = succ.iter().map(|&s| descendants(m, s)).collect();
    let mut count: BTreeMap<StateId, usize> = BTreeMap::new();
    for r in &regions {
        for &q in r {
            *count.entry(q).or_default() += 1;
        }
    }
    let exclusive: BTreeSet<StateId> = count
        .iter()
        .filter(|(_, &c)| c == 1)
        .map(|(&q, _)| q)
        .collect();

    let all_local = m.exits(b).all(|t| t.kind == Kind::Local)
        && exclusive
            .iter()
            .all(|&q| m.outgoing(q).all(|t| t.kind == Kind::Local));
    if all_local {
        return true;
    }

    let all_rejoin = regions.iter().enumerate().all(|(i, ri)| {
        regions
            .iter()
            .skip(i + 1)
            .all(|rj| ri.intersection(rj).next().is_some())
    });
    all_rejoin && exclusive.iter().all(|q| !m.global_states().contains(q))
}

/// Majority vote over per-agent proposals; ties go to the smallest id.
pub fn resolve_transition(
    proposals: &BTreeMap<usize, TransitionId>,
    available: &[TransitionId],
) -> Result<TransitionId> {
    if proposals.is_empty() {
        return Err(Error::NoProposals);
    }
    let mut votes: BTreeMap<TransitionId, usize> = BTreeMap::new();
    for &t in proposals.values() {
        if !available.contains(&t) {
            return Err(Error::UnavailableProposal(t));
        }
        *votes.entry(t).or_default() += 1;
    }
    let best = votes.values().copied().max().unwrap_or(0);
    Ok(votes
        .into_iter()
        .find(|&(_, v)| v == best)
        .map(|(t, _)| t)
        .expect("non-empty votes"))
}
