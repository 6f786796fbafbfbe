use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{
    Atom, FinalTerm, Guard, Kind, RegOp, Register, RegisterKind, TaskMonitor, Transition,
};
use crate::error::{Error, Result};
use crate::spec_lang::{Predicate, Scope, Spec};

/// Compile a specification into a composite task monitor.
pub fn compile(spec: &Spec) -> Result<TaskMonitor> {
    let mut ctx = Ctx::default();
    let raw = ctx.build(spec)?;
    Ok(ctx.finish(raw.compact()))
}

#[derive(Default)]
struct Ctx {
    predicates: Vec<Predicate>,
    registers: Vec<Register>,
}

#[derive(Clone, Debug)]
struct Edge {
    src: usize,
    dst: usize,
    leaf_pred: usize,
    leaf_reg: usize,
    constraints: Vec<usize>,
    clears: Vec<usize>,
}

/// Monitor fragment under construction. Only non-self-loop edges are
/// stored. After `shift(off)` state ids start at `off` while `checks` stays
/// indexed from zero.
#[derive(Clone, Debug)]
struct Raw {
    n: usize,
    start: usize,
    finals: Vec<usize>,
    edges: Vec<Edge>,
    /// Per state: (violation register, constraint predicate) checked on every step.
    checks: Vec<Vec<(usize, usize)>>,
    /// Progress register of the leaf whose completion entered each final.
    final_reg: BTreeMap<usize, (usize, usize)>,
}

impl Raw {
    fn shift(mut self, off: usize) -> Raw {
        self.start += off;
        for f in &mut self.finals {
            *f += off;
        }
        for e in &mut self.edges {
            e.src += off;
            e.dst += off;
        }
        self.final_reg = self.final_reg.into_iter().map(|(k, v)| (k + off, v)).collect();
        self
    }

    /// Drop states unreachable from the start and renumber the rest in
    /// ascending order, start first.
    fn compact(self) -> Raw {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([self.start]);
        seen[self.start] = true;
        while let Some(q) = queue.pop_front() {
            for e in self.edges.iter().filter(|e| e.src == q) {
                if !seen[e.dst] {
                    seen[e.dst] = true;
                    queue.push_back(e.dst);
                }
            }
        }
        let mut order: Vec<usize> = (0..self.n).filter(|&q| seen[q] && q != self.start).collect();
        order.insert(0, self.start);
        let mut map = vec![usize::MAX; self.n];
        for (new, &old) in order.iter().enumerate() {
            map[old] = new;
        }
        Raw {
            n: order.len(),
            start: 0,
            finals: self
                .finals
                .iter()
                .filter(|&&f| seen[f])
                .map(|&f| map[f])
                .collect(),
            edges: self
                .edges
                .into_iter()
                .filter(|e| seen[e.src])
                .map(|mut e| {
                    e.src = map[e.src];
                    e.dst = map[e.dst];
                    e
                })
                .collect(),
            checks: order.iter().map(|&q| self.checks[q].clone()).collect(),
            final_reg: self
                .final_reg
                .into_iter()
                .filter(|(k, _)| seen[*k])
                .map(|(k, v)| (map[k], v))
                .collect(),
        }
    }
}

impl Ctx {
    fn pred(&mut self, p: &Predicate) -> usize {
        self.predicates.push(p.clone());
        self.predicates.len() - 1
    }

    fn register(&mut self, kind: RegisterKind, scope: Scope) -> usize {
        self.registers.push(Register { kind, scope });
        self.registers.len() - 1
    }

    fn build(&mut self, spec: &Spec) -> Result<Raw> {
        match spec {
            Spec::Achieve(b) => {
                let p = self.pred(b);
                let r = self.register(RegisterKind::Progress, b.scope);
                Ok(Raw {
                    n: 2,
                    start: 0,
                    finals: vec![1],
                    edges: vec![Edge {
                        src: 0,
                        dst: 1,
                        leaf_pred: p,
                        leaf_reg: r,
                        constraints: Vec::new(),
                        clears: Vec::new(),
                    }],
                    checks: vec![Vec::new(), Vec::new()],
                    final_reg: BTreeMap::from([(1, (r, p))]),
                })
            }
            Spec::Seq(a, b) => {
                let a = self.build(a)?;
                let b = self.build(b)?.shift(a.n);
                Ok(seq(a, b))
            }
            Spec::Or(a, b) => {
                let a = self.build(a)?.shift(1);
                let b = self.build(b)?.shift(1 + a.n);
                Ok(or(a, b))
            }
            Spec::Ensuring(a, c) => {
                if c.is_global() {
                    return Err(Error::GlobalEnsuring);
                }
                let mut a = self.build(a)?;
                let p = self.pred(c);
                let r = self.register(RegisterKind::Violation, Scope::Local);
                for e in &mut a.edges {
                    e.constraints.push(p);
                }
                for c in &mut a.checks {
                    c.push((r, p));
                }
                Ok(a)
            }
        }
    }

    fn finish(self, raw: Raw) -> TaskMonitor {
        let pred_scope = |p: usize| self.predicates[p].scope;
        let flags: Vec<usize> = (0..self.registers.len())
            .filter(|&r| self.registers[r].kind == RegisterKind::Violation)
            .collect();
        let mut transitions = Vec::new();
        for q in 0..raw.n {
            let exits: Vec<&Edge> = raw.edges.iter().filter(|e| e.src == q).collect();

            let mut update = Vec::new();
            let mut seen = BTreeSet::new();
            for e in &exits {
                if seen.insert(e.leaf_reg) {
                    update.push(RegOp::Max {
                        reg: e.leaf_reg,
                        atom: Atom::owner(e.leaf_pred),
                    });
                }
            }
            if let Some(&(r, p)) = raw.final_reg.get(&q) {
                if seen.insert(r) {
                    update.push(RegOp::Max {
                        reg: r,
                        atom: Atom::owner(p),
                    });
                }
            }
            for &(r, p) in &raw.checks[q] {
                update.push(RegOp::Check {
                    reg: r,
                    atom: Atom::owner(p),
                });
            }
            let kind = kind_of(&[], &update, &pred_scope);
            transitions.push(Transition {
                id: 0,
                source: q,
                target: q,
                guard: Guard::default(),
                update,
                kind,
            });

            for e in exits {
                let mut atoms = vec![Atom::owner(e.leaf_pred)];
                atoms.extend(e.constraints.iter().map(|&p| Atom::owner(p)));
                let mut update = vec![RegOp::Max {
                    reg: e.leaf_reg,
                    atom: Atom::owner(e.leaf_pred),
                }];
                let mut reset = BTreeSet::new();
                for next in raw.edges.iter().filter(|n| n.src == e.dst) {
                    if reset.insert(next.leaf_reg) {
                        update.push(RegOp::Reset {
                            reg: next.leaf_reg,
                            atom: Atom::owner(next.leaf_pred),
                        });
                    }
                }
                update.extend(e.clears.iter().map(|&reg| RegOp::Clear { reg }));
                let kind = kind_of(&atoms, &[], &pred_scope);
                transitions.push(Transition {
                    id: 0,
                    source: q,
                    target: e.dst,
                    guard: Guard { atoms },
                    update,
                    kind,
                });
            }
        }
        let finals: BTreeSet<usize> = raw.finals.iter().copied().collect();
        let final_terms = finals
            .iter()
            .map(|&f| {
                let (progress, _) = raw.final_reg[&f];
                (
                    f,
                    vec![FinalTerm {
                        progress,
                        flags: flags.clone(),
                    }],
                )
            })
            .collect();
        TaskMonitor::from_parts(
            raw.n,
            self.predicates,
            self.registers,
            transitions,
            finals,
            final_terms,
        )
    }
}

fn kind_of(atoms: &[Atom], update: &[RegOp], scope: &dyn Fn(usize) -> Scope) -> Kind {
    let reads = atoms.iter().map(|a| a.pred).chain(update.iter().filter_map(|op| match op {
        RegOp::Max { atom, .. } | RegOp::Reset { atom, .. } | RegOp::Check { atom, .. } => {
            Some(atom.pred)
        }
        RegOp::Clear { .. } => None,
    }));
    let mut kind = Kind::Local;
    for p in reads {
        if scope(p) == Scope::Global {
            kind = Kind::Global;
        }
    }
    kind
}

/// Serial composition: every final of `a` takes over the outgoing edges of
/// `b`'s start, which becomes unreachable.
fn seq(a: Raw, b: Raw) -> Raw {
    let mut edges = a.edges;
    let mut checks = a.checks;
    for &f in &a.finals {
        checks[f].clear();
    }
    for e in &b.edges {
        if e.src == b.start {
            for &f in &a.finals {
                let mut glued = e.clone();
                glued.src = f;
                edges.push(glued);
            }
        } else {
            edges.push(e.clone());
        }
    }
    checks.extend(b.checks);
    checks[b.start].clear();
    Raw {
        n: a.n + b.n,
        start: a.start,
        finals: b.finals,
        edges,
        checks,
        final_reg: b.final_reg,
    }
}

/// Choice: a fresh start state 0 takes over both starts' outgoing edges.
/// Inputs are already shifted so that state 0 is free.
fn or(a: Raw, b: Raw) -> Raw {
    let n = 1 + (a.n) + (b.n);
    let a_regs: BTreeSet<usize> = a.checks[a.start - 1].iter().map(|c| c.0).collect();
    let b_regs: BTreeSet<usize> = b.checks[b.start - 1 - a.n].iter().map(|c| c.0).collect();
    let mut edges = Vec::new();
    for (raw, other_only) in [
        (&a, b_regs.difference(&a_regs).copied().collect::<Vec<_>>()),
        (&b, a_regs.difference(&b_regs).copied().collect::<Vec<_>>()),
    ] {
        for e in &raw.edges {
            let mut e = e.clone();
            if e.src == raw.start {
                e.src = 0;
                e.clears.extend(&other_only);
            }
            edges.push(e);
        }
    }
    let mut start_checks = a.checks[a.start - 1].clone();
    for c in &b.checks[b.start - 1 - a.n] {
        if !start_checks.contains(c) {
            start_checks.push(*c);
        }
    }
    let mut checks = vec![start_checks];
    checks.extend(a.checks);
    checks.extend(b.checks);
    let mut finals = a.finals;
    finals.extend(b.finals);
    let mut final_reg = a.final_reg;
    final_reg.extend(b.final_reg);
    Raw {
        n,
        start: 0,
        finals,
        edges,
        checks,
        final_reg,
    }
}
