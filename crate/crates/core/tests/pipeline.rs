use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use specmarl::envs::{Environment, NavConfig, NavEnv};
use specmarl::game::Game;
use specmarl::monitor::{compile, MonitorArtifact};
use specmarl::trainer::{evaluate, train, Policy, TrainConfig};
use specmarl::parse;

fn bin(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specmarl"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn data(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel).display().to_string()
}

#[test]
fn compile_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["compile", &data("specs/phi1.spec")], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let artifact: MonitorArtifact =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("monitor.json")).unwrap()).unwrap();
    assert_eq!(artifact.states, 3);
    assert_eq!(artifact.sync_states, vec![0, 1, 2]);
    let dot = std::fs::read_to_string(dir.path().join("monitor.dot")).unwrap();
    assert!(dot.starts_with("digraph"));

    let out = bin(&["compile", &data("specs/branching.spec")], dir.path());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("sync states: {0, 1"), "{stdout}");

    let out = bin(&["compile", &data("specs/malformed.spec")], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("syntax error"));
}

#[test]
fn verify_passes_and_catches_a_wrong_monitor() {
    let dir = tempfile::tempdir().unwrap();
    let oracle = data("configs/oracle.toml");
    let out = bin(&["verify", "--oracle", &oracle, "--pairs", "500", &data("specs/phi3.spec")], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));

    let wrong = dir.path().join("wrong.spec");
    std::fs::write(&wrong, "reach_lo(1, 1)").unwrap();
    let out = bin(&["verify", "--oracle", &oracle, "--fault-spec", wrong.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert!(!report["oracle"][0]["report"]["witnesses"].as_array().unwrap().is_empty());
}

#[test]
fn train_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        format!(
            "spec_file = \"{}\"\nhorizon = 60\n[env]\ndim = 2\nagents = 2\n[train]\niterations = 15\neval_episodes = 20\n",
            data("specs/phi1.spec")
        ),
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let out = bin(&["train", c, "--seed", "4", "--workers", "2"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let curve = std::fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    assert!(curve.starts_with("iteration,best_score,mean_score,satisfaction,stage"));
    let first = std::fs::read_to_string(dir.path().join("eval.json")).unwrap();

    let params = dir.path().join("policy.json");
    let out = bin(&["eval", c, "--seed", "4", "--params", params.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(dir.path().join("eval.json")).unwrap(), first);

    std::fs::write(&cfg, "horizon = 60\n[env]\ndim = 2\nagents = 2\n").unwrap();
    assert_eq!(bin(&["train", c], dir.path()).status.code(), Some(1));
    assert_eq!(bin(&["nonsense"], dir.path()).status.code(), Some(1));
}

#[test]
fn library_pipeline() {
    let spec = parse("reach_lo(5, 0); reach_gl(0, 0); reach_gl(3, 0)").unwrap();
    let m = compile(&spec).unwrap();
    assert_eq!(m.num_states(), 4);
    let env: Arc<dyn Environment> = Arc::new(NavEnv::new(NavConfig::new(2, 3)).unwrap());
    let cfg = TrainConfig {
        iterations: 40,
        seed: 2,
        ..Default::default()
    };
    let result = train(env.clone(), &spec, 120, &cfg).unwrap();
    let game = Game::from_spec(env, &spec).unwrap();
    let report = evaluate(&result.policy, &game, &spec, 120, 50, 9, 0).unwrap();
    assert_eq!(report.unsound, 0);
    assert!(report.rate >= 0.9, "{report:?}");
    let json = serde_json::to_string(&result.policy).unwrap();
    assert_eq!(serde_json::from_str::<Policy>(&json).unwrap(), result.policy);
}

#[test]
fn split_branches_before_a_global_step_are_sound_but_not_certified() {
    use specmarl::envs::GridConfig;
    use specmarl::verify::{run_oracle, OracleCase};
    let case = OracleCase {
        name: "or_then_global".into(),
        spec: "[reach_lo(1, 0) or reach_lo(0, 1)]; reach_gl(1, 1)".into(),
        grid: GridConfig {
            width: 2,
            height: 2,
            horizon: 4,
            start: vec![[0, 0], [1, 1]],
        },
    };
    let r = &run_oracle(&[case], None).unwrap()[0].report;
    assert_eq!(r.unsound, 0);
    assert!(r.missed > 0);
    // witnesses are satisfying rollouts the monitors cannot certify
    for w in &r.witnesses {
        assert!(w.satisfied && !w.monitor);
    }
}
