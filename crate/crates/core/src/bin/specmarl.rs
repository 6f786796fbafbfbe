use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::Serialize;

use specmarl::config::ExperimentConfig;
use specmarl::envs::{Environment, NavEnv};
use specmarl::monitor::{compile, to_dot, validate_structure, DotOptions};
use specmarl::sync::identify_sync_states;
use specmarl::trainer::{build_game, evaluate, train, write_curve, EvalReport, Policy};
use specmarl::verify::{
    default_oracle_cases, fuzz_decomposition, fuzz_shaping, fuzz_structure, run_oracle, DecompositionFuzzReport,
    OracleCaseReport, OracleConfig, ShapingFuzzReport, StructureFuzzReport,
};
use specmarl::{parse, Error, Spec};

#[derive(Parser)]
#[command(name = "specmarl", version, about = "Distributed task monitors for multi-agent RL")]
struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compile a specification file; write the monitor, DOT graph and report.
    Compile { spec: PathBuf },
    /// Run the oracle, reward-ordering, decomposition and structure checks.
    Verify {
        /// Specifications for the reward-ordering fuzz.
        specs: Vec<PathBuf>,
        /// Grid oracle cases (TOML); the bundled cases otherwise.
        #[arg(long)]
        oracle: Option<PathBuf>,
        /// Build every oracle monitor from this specification instead.
        #[arg(long)]
        fault_spec: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        agents: usize,
        #[arg(long, default_value_t = 10_000)]
        pairs: usize,
    },
    /// Train on an experiment file.
    Train {
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Evaluate saved parameters on an experiment file.
    Eval {
        config: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
}

#[derive(clap::Args)]
struct RunFlags {
    #[arg(long)]
    stage: bool,
    #[arg(long)]
    no_mon: bool,
    #[arg(long)]
    centralized: bool,
    /// Evaluation episodes.
    #[arg(long)]
    episodes: Option<usize>,
}

enum Failure {
    Usage(String),
    Counterexample(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Counterexample(msg)) => {
            eprintln!("counterexample: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    fs::create_dir_all(&cli.out_dir)?;
    match cli.cmd {
        Cmd::Compile { ref spec } => cmd_compile(&cli, spec),
        Cmd::Verify {
            ref specs,
            ref oracle,
            ref fault_spec,
            agents,
            pairs,
        } => cmd_verify(&cli, specs, oracle.as_deref(), fault_spec.as_deref(), agents, pairs),
        Cmd::Train { ref config, ref flags } => cmd_train(&cli, config, flags),
        Cmd::Eval {
            ref config,
            ref params,
            ref flags,
        } => cmd_eval(&cli, config, params, flags),
    }
}

fn read_spec(path: &Path) -> Result<Spec, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    fs::write(path, text)?;
    Ok(())
}

fn cmd_compile(cli: &Cli, path: &Path) -> Result<(), Failure> {
    let spec = read_spec(path)?;
    let m = compile(&spec)?;
    let sync = identify_sync_states(&m);
    let structure = validate_structure(&m);
    write_json(&cli.out_dir.join("monitor.json"), &m.artifact(&sync)?)?;
    let dot = to_dot(&m, &DotOptions { sync: sync.clone(), ..Default::default() });
    fs::write(cli.out_dir.join("monitor.dot"), dot)?;
    println!("spec: {spec}");
    println!("states: {}  transitions: {}", m.num_states(), m.transitions().len());
    println!("global states: {:?}", m.global_states());
    println!("sync states: {sync:?}");
    if structure.ok() {
        println!("structure: ok");
    } else {
        for v in &structure.violations {
            println!("structure: property {} violated: {v}", v.property());
        }
        return Err(Failure::Counterexample("monitor structure".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct VerifyReport {
    oracle: Vec<OracleCaseReport>,
    shaping: Vec<(String, ShapingFuzzReport)>,
    decomposition: DecompositionFuzzReport,
    structure: StructureFuzzReport,
}

fn cmd_verify(
    cli: &Cli,
    specs: &[PathBuf],
    oracle: Option<&Path>,
    fault: Option<&Path>,
    agents: usize,
    pairs: usize,
) -> Result<(), Failure> {
    let cases = match oracle {
        Some(p) => OracleConfig::from_toml(&fs::read_to_string(p)?)?.cases,
        None => default_oracle_cases(),
    };
    let fault = fault.map(read_spec).transpose()?;
    let oracle = run_oracle(&cases, fault.as_ref())?;

    let mut shaping = Vec::new();
    for p in specs {
        let spec = read_spec(p)?;
        shaping.push((spec.to_string(), fuzz_shaping(&spec, agents, 2000, pairs, cli.seed)?));
    }
    let report = VerifyReport {
        oracle,
        shaping,
        decomposition: fuzz_decomposition(1000, cli.seed)?,
        structure: fuzz_structure(500, 4, cli.seed)?,
    };

    let mut problems = Vec::new();
    for c in &report.oracle {
        let r = &c.report;
        println!(
            "oracle {:<28} rollouts {:>9}  satisfied {:>8}  disagreements {}",
            c.name, r.rollouts, r.satisfied, r.disagreements
        );
        if r.disagreements > 0 {
            problems.push(format!("oracle case {} disagrees on {} rollouts", c.name, r.disagreements));
        }
    }
    for (spec, r) in &report.shaping {
        println!(
            "reward ordering {spec}: {} pairs, {} final-order and {} depth-order violations",
            r.pairs, r.violations_final, r.violations_depth
        );
        if r.violations_final + r.violations_depth > 0 {
            problems.push(format!("reward ordering violated for {spec}"));
        }
    }
    let d = &report.decomposition;
    println!(
        "decomposition: {} triples, {} violations; counting objective violations {}",
        d.triples, d.violations, d.capacity_violations
    );
    if d.violations > 0 {
        problems.push("decomposition violated by a reach specification".into());
    }
    println!("structure: {} specs, {} failures", report.structure.specs, report.structure.failures.len());
    if !report.structure.failures.is_empty() {
        problems.push("monitor structure".into());
    }
    let out = cli.out_dir.join("verify.json");
    write_json(&out, &report)?;
    if problems.is_empty() {
        println!("all checks passed");
        Ok(())
    } else {
        Err(Failure::Counterexample(format!("{}; witnesses in {}", problems.join("; "), out.display())))
    }
}

struct Experiment {
    cfg: ExperimentConfig,
    spec: Spec,
    env: Arc<dyn Environment>,
}

fn load_experiment(cli: &Cli, path: &Path, flags: &RunFlags) -> Result<Experiment, Failure> {
    let mut cfg = ExperimentConfig::load(path)?;
    let t = &mut cfg.train;
    t.seed = cli.seed;
    t.workers = cli.workers;
    t.stage |= flags.stage;
    t.no_mon |= flags.no_mon;
    t.centralized |= flags.centralized;
    if let Some(e) = flags.episodes {
        t.eval_episodes = e;
    }
    cfg.validate()?;
    let spec = cfg.load_spec()?;
    let env: Arc<dyn Environment> = Arc::new(NavEnv::new(cfg.env.clone())?);
    Ok(Experiment { cfg, spec, env })
}

fn report_eval(cli: &Cli, e: &Experiment, policy: &Policy) -> Result<EvalReport, Failure> {
    let t = &e.cfg.train;
    let game = build_game(e.env.clone(), &e.spec, t, None)?;
    let report = evaluate(policy, &game, &e.spec, e.cfg.horizon, t.eval_episodes, t.seed.wrapping_add(1), t.workers)?;
    write_json(&cli.out_dir.join("eval.json"), &report)?;
    let r = policy.rollout(&game, t.seed, e.cfg.horizon)?;
    let consts = specmarl::shaping::compute_constants(game.monitor_of(0), e.env.state_box())?;
    let rewards: Vec<f64> = game.shaped_rewards(&r, &consts)?.iter().map(|x| consts.clip_ctm(*x)).collect();
    game.write_trace(&r, &rewards, fs::File::create(cli.out_dir.join("trace.csv"))?)?;
    println!(
        "satisfaction {:.3} over {} episodes; depth histogram {:?}; monitor states {}",
        report.rate,
        report.episodes,
        report.depth_histogram,
        game.monitor_of(0).num_states()
    );
    if report.unsound > 0 {
        return Err(Failure::Counterexample(format!(
            "{} episodes where the monitors reported success without satisfaction",
            report.unsound
        )));
    }
    Ok(report)
}

fn cmd_train(cli: &Cli, path: &Path, flags: &RunFlags) -> Result<(), Failure> {
    let e = load_experiment(cli, path, flags)?;
    let result = train(e.env.clone(), &e.spec, e.cfg.horizon, &e.cfg.train)?;
    write_curve(&result.curve, fs::File::create(cli.out_dir.join("curve.csv"))?)?;
    write_json(&cli.out_dir.join("policy.json"), &result.policy)?;
    println!(
        "trained {} iterations; stages {:?}; monitor states {}",
        result.curve.len(),
        result.stages_visited,
        result.monitor_states
    );
    report_eval(cli, &e, &result.policy)?;
    Ok(())
}

fn cmd_eval(cli: &Cli, path: &Path, params: &Path, flags: &RunFlags) -> Result<(), Failure> {
    let e = load_experiment(cli, path, flags)?;
    let policy: Policy = serde_json::from_str(&fs::read_to_string(params)?).map_err(Error::from)?;
    let probe = build_game(e.env.clone(), &e.spec, &e.cfg.train, None)?;
    if policy.states != probe.monitor_of(0).num_states() || policy.dim != e.env.dim() {
        return Err(Failure::Usage("parameters do not match this experiment's monitor".into()));
    }
    report_eval(cli, &e, &policy)?;
    Ok(())
}
