use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use super::{Atom, FinalTerm, Guard, Kind, RegOp, TaskMonitor, Transition};
use crate::error::{Error, Result};

pub const DEFAULT_STATE_CAP: usize = 1_000_000;

/// Synchronous product of per-agent monitors: component `i` tracks agent `i`.
/// A product transition moves any non-empty subset of components at once.
/// Fails with [`Error::StateCap`] once more than `cap` joint states are found.
pub fn product(monitors: &[TaskMonitor], cap: usize) -> Result<TaskMonitor> {
    if monitors.is_empty() {
        return Err(Error::AgentCount {
            expected: 1,
            got: 0,
        });
    }
    let n = monitors.len();
    let mut pred_off = Vec::with_capacity(n);
    let mut reg_off = Vec::with_capacity(n);
    let mut predicates = Vec::new();
    let mut registers = Vec::new();
    for m in monitors {
        pred_off.push(predicates.len());
        reg_off.push(registers.len());
        predicates.extend(m.predicates.iter().cloned());
        registers.extend(m.registers.iter().copied());
    }
    let bind = |c: usize, a: Atom| Atom {
        pred: a.pred + pred_off[c],
        agent: if n > 1 { a.agent.or(Some(c)) } else { a.agent },
    };
    let remap = |c: usize, op: &RegOp| match *op {
        RegOp::Max { reg, atom } => RegOp::Max {
            reg: reg + reg_off[c],
            atom: bind(c, atom),
        },
        RegOp::Reset { reg, atom } => RegOp::Reset {
            reg: reg + reg_off[c],
            atom: bind(c, atom),
        },
        RegOp::Check { reg, atom } => RegOp::Check {
            reg: reg + reg_off[c],
            atom: bind(c, atom),
        },
        RegOp::Clear { reg } => RegOp::Clear {
            reg: reg + reg_off[c],
        },
    };

    let start: Vec<usize> = monitors.iter().map(|m| m.initial).collect();
    let mut ids: HashMap<Vec<usize>, usize> = HashMap::from([(start.clone(), 0)]);
    let mut tuples = vec![start.clone()];
    let mut queue = VecDeque::from([start]);
    let mut transitions = Vec::new();

    while let Some(tuple) = queue.pop_front() {
        let src = ids[&tuple];
        // Per component: the self-loop first, then its exits.
        let choices: Vec<Vec<&Transition>> = monitors
            .iter()
            .zip(&tuple)
            .map(|(m, &q)| {
                let mut v: Vec<&Transition> = m.self_loop(q).into_iter().collect();
                v.extend(m.exits(q));
                v
            })
            .collect();
        let mut pick = vec![0usize; n];
        loop {
            let mut target = Vec::with_capacity(n);
            let mut atoms = Vec::new();
            let mut update = Vec::new();
            let mut kind = Kind::Local;
            for c in 0..n {
                let t = choices[c][pick[c]];
                target.push(t.target);
                atoms.extend(t.guard.atoms.iter().map(|&a| bind(c, a)));
                update.extend(t.update.iter().map(|op| remap(c, op)));
                // with several agents every atom is pinned to one of them
                if t.kind == Kind::Global || n > 1 {
                    kind = Kind::Global;
                }
            }
            let dst = match ids.get(&target) {
                Some(&id) => id,
                None => {
                    let id = tuples.len();
                    if id >= cap {
                        return Err(Error::StateCap(id));
                    }
                    ids.insert(target.clone(), id);
                    tuples.push(target.clone());
                    queue.push_back(target);
                    id
                }
            };
            transitions.push(Transition {
                id: 0,
                source: src,
                target: dst,
                guard: Guard { atoms },
                update,
                kind,
            });
            if !advance(&mut pick, &choices) {
                break;
            }
        }
    }

    let mut finals = BTreeSet::new();
    let mut final_terms = BTreeMap::new();
    for (id, tuple) in tuples.iter().enumerate() {
        if tuple.iter().zip(monitors).all(|(&q, m)| m.is_final(q)) {
            finals.insert(id);
            let terms: Vec<FinalTerm> = tuple
                .iter()
                .enumerate()
                .flat_map(|(c, q)| {
                    let off = reg_off[c];
                    monitors[c].final_terms[q].iter().map(move |t| FinalTerm {
                        progress: t.progress + off,
                        flags: t.flags.iter().map(|f| f + off).collect(),
                    })
                })
                .collect();
            final_terms.insert(id, terms);
        }
    }
    let mut m = TaskMonitor::from_parts(
        tuples.len(),
        predicates,
        registers,
        transitions,
        finals,
        final_terms,
    );
    m.initial_registers = monitors
        .iter()
        .flat_map(|m| m.initial_registers.iter().copied())
        .collect();
    Ok(m)
}

/// Odometer increment over the per-component choices; `false` after the last.
fn advance(pick: &mut [usize], choices: &[Vec<&Transition>]) -> bool {
    for c in (0..pick.len()).rev() {
        pick[c] += 1;
        if pick[c] < choices[c].len() {
            return true;
        }
        pick[c] = 0;
    }
    false
}
