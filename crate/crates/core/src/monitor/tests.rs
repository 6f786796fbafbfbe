use super::*;
use crate::spec_lang::{parse, Spec};

fn monitor(text: &str) -> TaskMonitor {
    compile(&parse(text).unwrap()).unwrap()
}

fn exits_of(m: &TaskMonitor, q: StateId) -> Vec<StateId> {
    m.exits(q).map(|t| t.target).collect()
}

#[test]
fn phi1_is_a_global_chain() {
    let m = monitor("reach_gl(5, 0); reach_gl(0, 0)");
    assert_eq!(m.num_states(), 3);
    assert_eq!(exits_of(&m, 0), vec![1]);
    assert_eq!(exits_of(&m, 1), vec![2]);
    assert_eq!(m.finals, BTreeSet::from([2]));
    assert_eq!(m.global_states(), &BTreeSet::from([0, 1, 2]));
    assert_eq!(m.max_depth().unwrap(), 2);
    assert!(validate_structure(&m).ok());
}

#[test]
fn single_local_leaf() {
    let m = monitor("reach_lo(0, 0)");
    assert_eq!(m.num_states(), 2);
    assert!(m.global_states().is_empty());
    assert_eq!(m.max_depth().unwrap(), 1);
    assert!(m.transitions().iter().all(|t| t.kind == Kind::Local));
}

#[test]
fn example_figure_topology() {
    let m = monitor("reach_gl(1, 1) or [reach_lo(2, 2); [reach_lo(3, 3) or reach_gl(4, 4)]]");
    assert_eq!(m.num_states(), 5);
    assert_eq!(m.predicates.len(), 4);
    assert_eq!(m.finals.len(), 3);
    let first = exits_of(&m, 0);
    assert_eq!(first.len(), 2);
    let branch: Vec<StateId> = first.iter().copied().filter(|&q| !m.is_final(q)).collect();
    assert_eq!(branch.len(), 1);
    let second = exits_of(&m, branch[0]);
    assert_eq!(second.len(), 2);
    assert!(second.iter().all(|&q| m.is_final(q)));
    // two of the three finals complete a global goal
    let global_finals: Vec<_> = m.finals.iter().filter(|q| m.global_states().contains(q)).collect();
    assert_eq!(global_finals.len(), 2);
    assert!(m.global_states().contains(&0));
    assert!(m.global_states().contains(&branch[0]));
    assert_eq!(m.max_depth().unwrap(), 2);
    assert!(validate_structure(&m).ok());
}

#[test]
fn transitions_sorted_with_self_loop_first() {
    let m = monitor("[reach_lo(1, 0) or reach_lo(0, 1)]; reach_lo(2, 2) ensuring reach_lo(0, 0)");
    let mut last = 0;
    for q in m.states() {
        let out: Vec<_> = m.outgoing(q).collect();
        assert!(out[0].is_self_loop() && out[0].guard.is_true());
        assert!(out[0].id >= last);
        last = out.last().unwrap().id;
    }
    assert!(validate_structure(&m).ok());
}

#[test]
fn global_ensuring_rejected() {
    let spec = Spec::ensuring(
        Spec::achieve(Predicate::reach_lo(vec![0.0])),
        Predicate::reach_gl(vec![1.0]),
    );
    assert!(matches!(compile(&spec), Err(Error::GlobalEnsuring)));
}

#[test]
fn back_edge_reported_as_cycle() {
    let mut m = monitor("reach_gl(5, 0); reach_gl(0, 0)");
    m.add_transition(2, 1, Guard::default(), Vec::new(), Kind::Local);
    let report = validate_structure(&m);
    assert!(!report.passes(1));
    let cycle = report
        .violations
        .iter()
        .find_map(|v| match v {
            StructureViolation::Cycle(c) => Some(c.clone()),
            _ => None,
        })
        .unwrap();
    let mut sorted = cycle.clone();
    sorted.sort();
    assert_eq!(sorted, vec![1, 2]);
    assert!(!report.passes(2));
    assert!(m.depths().is_err());
}

#[test]
fn missing_self_loop_reported() {
    let mut m = monitor("reach_lo(0, 0)");
    let id = m.self_loop(1).unwrap().id;
    m.remove_transition(id).unwrap();
    let report = validate_structure(&m);
    assert_eq!(
        report.violations,
        vec![StructureViolation::MissingSelfLoop(1)]
    );
}

#[test]
fn duplicate_and_unreachable_reported() {
    let mut m = monitor("reach_lo(0, 0)");
    m.add_transition(0, 1, Guard::default(), Vec::new(), Kind::Local);
    let report = validate_structure(&m);
    assert!(!report.passes(4));
    assert!(report.passes(3));
}

#[test]
fn registers_track_best_progress() {
    let m = monitor("reach_lo(0, 0); reach_lo(10, 0)");
    let mut v = m.initial_registers.clone();
    let far = JointState::new(2, vec![3.0, 0.0]).unwrap();
    let near = JointState::new(2, vec![0.5, 0.0]).unwrap();
    let stay = m.self_loop(0).unwrap().clone();
    m.apply_update(&stay, 0, &far, &mut v).unwrap();
    assert_eq!(v[0], 0.0);
    m.apply_update(&stay, 0, &near, &mut v).unwrap();
    assert!((v[0] - 0.5).abs() < 1e-12);
    let go = m.exits(0).next().unwrap().clone();
    assert!(m.guard_holds(&go.guard, 0, &near).unwrap());
    m.apply_update(&go, 0, &near, &mut v).unwrap();
    // entering q1 resets the next goal's register to its current value
    assert!((v[1] - (1.0 - 9.5)).abs() < 1e-12);
    let at_goal = JointState::new(2, vec![10.0, 0.0]).unwrap();
    let go = m.exits(1).next().unwrap().clone();
    m.apply_update(&go, 0, &at_goal, &mut v).unwrap();
    assert!((m.rho(2, &v).unwrap().unwrap() - (RHO_EPSILON + 1.0)).abs() < 1e-12);
}

#[test]
fn violated_constraint_poisons_reward() {
    let m = monitor("reach_lo(2, 0) ensuring reach_lo(0, 0)");
    let mut v = m.initial_registers.clone();
    let stay = m.self_loop(0).unwrap().clone();
    let drift = JointState::new(2, vec![1.5, 0.0]).unwrap();
    m.apply_update(&stay, 0, &drift, &mut v).unwrap();
    let go = m.exits(0).next().unwrap().clone();
    let goal = JointState::new(2, vec![2.0, 0.0]).unwrap();
    // the constraint is part of the guard
    assert!(!m.guard_holds(&go.guard, 0, &goal).unwrap());
    assert_eq!(m.rho(1, &v).unwrap(), None);
    assert!(m.rho(0, &v).is_err());
}

#[test]
fn choice_exit_clears_other_branch_flags() {
    let m = monitor("[reach_lo(2, 0) ensuring reach_lo(0, 0)] or reach_lo(-5, 0)");
    let mut v = m.initial_registers.clone();
    let away = JointState::new(2, vec![-4.5, 0.0]).unwrap();
    let stay = m.self_loop(0).unwrap().clone();
    m.apply_update(&stay, 0, &away, &mut v).unwrap();
    let flag = m.registers.iter().position(|r| r.kind == RegisterKind::Violation).unwrap();
    assert_eq!(v[flag], 1.0);
    let go = m
        .exits(0)
        .find(|t| m.guard_holds(&t.guard, 0, &away).unwrap())
        .unwrap()
        .clone();
    m.apply_update(&go, 0, &away, &mut v).unwrap();
    assert_eq!(v[flag], 0.0);
    assert!(m.rho(go.target, &v).unwrap().is_some());
}

#[test]
fn product_counts() {
    let chain = monitor("reach_lo(1, 0); reach_lo(2, 0); reach_lo(3, 0)");
    assert_eq!(chain.num_states(), 4);
    let p = product(&vec![chain.clone(); 3], DEFAULT_STATE_CAP).unwrap();
    assert_eq!(p.num_states(), 64);
    assert!(3 * chain.num_states() < p.num_states());
    assert!(validate_structure(&p).ok());

    let k3 = monitor("reach_lo(1, 0); reach_lo(2, 0)");
    let p = product(&[k3.clone(), k3], DEFAULT_STATE_CAP).unwrap();
    assert_eq!(p.num_states(), 9);
    assert_eq!(p.finals.len(), 1);
}

#[test]
fn product_of_one_is_identity() {
    let m = monitor("reach_gl(1, 1) or [reach_lo(2, 2); reach_lo(3, 3)]");
    let p = product(std::slice::from_ref(&m), DEFAULT_STATE_CAP).unwrap();
    assert_eq!(p.num_states(), m.num_states());
    let edges = |m: &TaskMonitor| {
        m.transitions()
            .iter()
            .map(|t| (t.source, t.target, t.kind))
            .collect::<Vec<_>>()
    };
    assert_eq!(edges(&p), edges(&m));
    assert_eq!(p.finals, m.finals);
}

#[test]
fn product_cap() {
    let chain = monitor("reach_lo(1, 0); reach_lo(2, 0); reach_lo(3, 0)");
    match product(&vec![chain; 3], 10) {
        Err(Error::StateCap(n)) => assert_eq!(n, 10),
        other => panic!("{other:?}"),
    }
}

#[test]
fn dot_marks_finals_and_globals() {
    let m = monitor("reach_gl(5, 0); reach_gl(0, 0)");
    let dot = to_dot(&m, &DotOptions::default());
    assert_eq!(dot.matches("shape=circle").count(), 2);
    assert!(dot.contains("q2 [shape=doublecircle"));
    assert_eq!(dot.matches("palegreen").count(), 3);
    let hidden = to_dot(
        &m,
        &DotOptions {
            hide_self_loops: true,
            ..Default::default()
        },
    );
    assert!(!hidden.contains("q0 -> q0"));
    assert!(dot.contains("q0 -> q0"));
}

#[test]
fn artifact_round_trips_through_json() {
    let m = monitor("reach_gl(5, 0); reach_gl(0, 0)");
    let art = m.artifact(&BTreeSet::from([0])).unwrap();
    let text = serde_json::to_string(&art).unwrap();
    let back: MonitorArtifact = serde_json::from_str(&text).unwrap();
    assert_eq!(back.states, 3);
    assert_eq!(back.depth, vec![0, 1, 2]);
    assert!(back.transitions.iter().any(|t| t.guard == "reach_gl(5, 0)"));
}
