//! Population search over a shared linear policy on the augmented game,
//! with optional group staging and a monitor-blind ablation.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::game::{AugmentedAction, Game, JointAugState};
use crate::monitor::DEFAULT_STATE_CAP;
use crate::scaling::{advance_if_satisfied, build_schedule, StageSchedule};
use crate::shaping::{compute_constants, staged_reward, FinalReward, ShapingConstants};
use crate::spec_lang::{satisfies, Spec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub population: usize,
    pub elites: usize,
    pub iterations: usize,
    /// Episodes per candidate evaluation.
    pub episodes: usize,
    /// Episodes for the final evaluation.
    pub eval_episodes: usize,
    pub seed: u64,
    pub stage: bool,
    pub no_mon: bool,
    pub centralized: bool,
    /// Per-group satisfaction needed to advance a stage.
    pub threshold: f64,
    /// Initial group size and growth factor for staging.
    pub k: usize,
    pub f: usize,
    pub init_std: f64,
    pub min_std: f64,
    /// Stop once every training episode of the best candidate succeeds on
    /// the last stage.
    pub early_stop: bool,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub state_cap: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            population: 48,
            elites: 8,
            iterations: 60,
            episodes: 8,
            eval_episodes: 100,
            seed: 0,
            stage: false,
            no_mon: false,
            centralized: false,
            threshold: crate::scaling::DEFAULT_THRESHOLD,
            k: 2,
            f: 2,
            init_std: 1.0,
            min_std: 0.05,
            early_stop: true,
            workers: 0,
            state_cap: DEFAULT_STATE_CAP,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("population", self.population),
            ("elites", self.elites),
            ("iterations", self.iterations),
            ("episodes", self.episodes),
            ("eval_episodes", self.eval_episodes),
            ("k", self.k),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.population < 2 * self.elites {
            return Err(Error::Config(format!(
                "population {} must be at least twice elites {}",
                self.population, self.elites
            )));
        }
        if self.f < 2 {
            return Err(Error::Config("growth factor f must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config("threshold must lie in [0, 1]".into()));
        }
        if !(self.init_std > 0.0) || !(self.min_std >= 0.0) {
            return Err(Error::Config("init_std must be positive and min_std non-negative".into()));
        }
        if self.stage && self.centralized {
            return Err(Error::Config("staging and centralized mode are exclusive".into()));
        }
        Ok(())
    }
}

/// `a = max_speed * tanh(W x)` with `x = [s, v, onehot(q), stage, 1]`, and a
/// preference score per monitor state used to pick among exits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub dim: usize,
    pub states: usize,
    pub registers: usize,
    pub max_speed: f64,
    pub no_mon: bool,
    /// Register values are divided by this before clamping to [-1, 1].
    pub v_scale: f64,
    /// Stage fed to the policy at deployment.
    pub stage: usize,
    pub weights: Vec<f64>,
    pub prefs: Vec<f64>,
}

impl Policy {
    pub fn zeros(dim: usize, states: usize, registers: usize, max_speed: f64, no_mon: bool, v_scale: f64) -> Self {
        let features = dim + registers + states + 2;
        Policy {
            dim,
            states,
            registers,
            max_speed,
            no_mon,
            v_scale,
            stage: 0,
            weights: vec![0.0; dim * features],
            prefs: vec![0.0; states],
        }
    }

    pub fn features(&self) -> usize {
        self.dim + self.registers + self.states + 2
    }

    pub fn n_params(&self) -> usize {
        self.weights.len() + self.prefs.len()
    }

    pub fn params(&self) -> Vec<f64> {
        self.weights.iter().chain(&self.prefs).copied().collect()
    }

    pub fn with_params(&self, p: &[f64]) -> Policy {
        let (w, b) = p.split_at(self.weights.len());
        Policy {
            weights: w.to_vec(),
            prefs: b.to_vec(),
            ..self.clone()
        }
    }

    pub fn with_stage(mut self, stage: usize) -> Policy {
        self.stage = stage;
        self
    }

    fn observe(&self, s: &JointAugState, agent: usize, x: &mut Vec<f64>) {
        x.clear();
        x.extend_from_slice(s.env.agent(agent));
        let v = &s.v[agent];
        for r in 0..self.registers {
            let val = if self.no_mon { 0.0 } else { v.get(r).copied().unwrap_or(0.0) };
            x.push((val / self.v_scale).clamp(-1.0, 1.0));
        }
        let q = s.q[agent];
        x.extend((0..self.states).map(|i| if !self.no_mon && i == q { 1.0 } else { 0.0 }));
        x.push(self.stage as f64);
        x.push(1.0);
    }

    pub fn act(&self, game: &Game, s: &JointAugState, agent: usize) -> Result<AugmentedAction> {
        let mut x = Vec::with_capacity(self.features());
        self.observe(s, agent, &mut x);
        let f = self.features();
        let env_action = self
            .weights
            .chunks(f)
            .map(|row| self.max_speed * row.iter().zip(&x).map(|(w, xi)| w * xi).sum::<f64>().tanh())
            .collect();
        let m = game.monitor_of(agent);
        let q = s.q[agent];
        let mut best: Option<(f64, usize)> = None;
        for t in m.exits(q) {
            let score = self.prefs.get(t.target).copied().unwrap_or(0.0);
            if best.is_none_or(|(b, _)| score > b) {
                best = Some((score, t.id));
            }
        }
        let delta = match best {
            Some((_, id)) => id,
            None => m.self_loop(q).ok_or(Error::FinalState(q))?.id,
        };
        Ok(AugmentedAction { env_action, delta })
    }

    pub fn rollout(&self, game: &Game, seed: u64, horizon: usize) -> Result<crate::game::AugmentedRollout> {
        let n = game.n_agents();
        game.rollout(game.reset(seed)?, horizon, |s, _| (0..n).map(|a| self.act(game, s, a)).collect())
    }
}

/// Game variant used for training and evaluation.
pub fn build_game(env: Arc<dyn Environment>, spec: &Spec, cfg: &TrainConfig, groups: Option<&[Vec<usize>]>) -> Result<Game> {
    if cfg.centralized {
        return Game::centralized(env, spec, Some(cfg.state_cap));
    }
    match groups {
        Some(g) => Game::grouped(env, spec, g),
        None => Game::from_spec(env, spec),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveRow {
    pub iteration: usize,
    pub best_score: f64,
    pub mean_score: f64,
    pub satisfaction: f64,
    pub stage: usize,
}

pub fn write_curve<W: Write>(rows: &[CurveRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct TrainResult {
    pub policy: Policy,
    pub curve: Vec<CurveRow>,
    pub schedule: Option<StageSchedule>,
    /// Minimum group size of every stage trained on, in order.
    pub stages_visited: Vec<usize>,
    /// Number of monitor states the policy was sized for.
    pub monitor_states: usize,
}

#[derive(Clone, Debug, Default)]
struct Score {
    total: f64,
    success: usize,
    group_success: Vec<usize>,
}

struct Stage {
    index: usize,
    game: Game,
    consts: ShapingConstants,
    seeds: Vec<u64>,
}

impl Stage {
    fn new(env: &Arc<dyn Environment>, spec: &Spec, cfg: &TrainConfig, index: usize, groups: Option<Vec<Vec<usize>>>) -> Result<Stage> {
        let game = build_game(env.clone(), spec, cfg, groups.as_deref())?;
        let consts = compute_constants(game.monitor_of(0), env.state_box())?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(index as u64 + 1)));
        let seeds = (0..cfg.episodes).map(|_| rng.random()).collect();
        Ok(Stage { index, game, consts, seeds })
    }

    fn score(&self, policy: &Policy, horizon: usize) -> Result<Score> {
        let groups = self.game.groups();
        let mut s = Score {
            group_success: vec![0; groups.len()],
            ..Default::default()
        };
        for &seed in &self.seeds {
            let r = policy.rollout(&self.game, seed, horizon)?;
            let shaped = self.game.shaped_rewards(&r, &self.consts)?;
            for x in &shaped {
                s.total += staged_reward(self.index, self.consts.clip_ctm(*x), &self.consts);
            }
            let finals = self.game.final_rewards(&r)?;
            let ok = |a: usize| matches!(finals[a], FinalReward::Value(v) if v > 0.0);
            for (g, group) in groups.iter().enumerate() {
                if group.agents.iter().all(|&a| ok(a)) {
                    s.group_success[g] += 1;
                }
            }
            if (0..finals.len()).all(ok) {
                s.success += 1;
            }
        }
        s.total /= self.seeds.len() as f64;
        if !s.total.is_finite() {
            return Err(Error::NonFinite(format!("episode score {} at stage {}", s.total, self.index)));
        }
        Ok(s)
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Cross-entropy search with elitism. Deterministic for a fixed seed.
pub fn train(env: Arc<dyn Environment>, spec: &Spec, horizon: usize, cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate()?;
    let n = env.n_agents();
    let mut schedule = if cfg.stage { Some(build_schedule(n, cfg.k, cfg.f)?) } else { None };
    let groups = schedule.as_ref().map(|s| s.groups());
    let mut stage = Stage::new(&env, spec, cfg, 0, groups)?;

    let full = build_game(env.clone(), spec, cfg, None)?;
    let m = full.monitor_of(0);
    let registers = (0..n).map(|a| full.monitor_of(a).registers.len()).max().unwrap_or(0);
    let template = Policy::zeros(env.dim(), m.num_states(), registers, env.action_bound(), cfg.no_mon, stage.consts.c_u);

    let workers = pool(cfg.workers)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dims = template.n_params();
    let mut mean = vec![0.0; dims];
    let mut std = vec![cfg.init_std; dims];
    let mut best: Option<(Vec<f64>, Score)> = None;
    let mut curve = Vec::with_capacity(cfg.iterations);
    let mut stages_visited = vec![schedule.as_ref().map_or(n, |s| s.group_size())];

    for iteration in 0..cfg.iterations {
        let fresh = cfg.population - usize::from(best.is_some());
        let mut candidates: Vec<Vec<f64>> = (0..fresh)
            .map(|_| {
                mean.iter()
                    .zip(&std)
                    .map(|(m, s)| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        m + s * z
                    })
                    .collect::<Vec<f64>>()
            })
            .collect();
        let mut scored: Vec<(Vec<f64>, Score)> = workers.install(|| {
            candidates
                .par_iter()
                .map(|p| stage.score(&template.with_params(p).with_stage(stage.index), horizon).map(|s| (p.clone(), s)))
                .collect::<Result<Vec<_>>>()
        })?;
        candidates.clear();
        if let Some(b) = best.take() {
            scored.push(b);
        }
        scored.sort_by(|a, b| b.1.total.total_cmp(&a.1.total));

        let elites = &scored[..cfg.elites];
        for k in 0..dims {
            let mu = elites.iter().map(|e| e.0[k]).sum::<f64>() / cfg.elites as f64;
            let var = elites.iter().map(|e| (e.0[k] - mu).powi(2)).sum::<f64>() / cfg.elites as f64;
            mean[k] = mu;
            std[k] = var.sqrt().max(cfg.min_std);
        }
        let mean_score = scored.iter().map(|s| s.1.total).sum::<f64>() / scored.len() as f64;
        let (bp, bs) = scored.swap_remove(0);
        let satisfaction = bs.success as f64 / stage.seeds.len() as f64;
        curve.push(CurveRow {
            iteration,
            best_score: bs.total,
            mean_score,
            satisfaction,
            stage: stage.index,
        });

        let mut last_stage = true;
        let mut kept = (bp, bs);
        if let Some(s) = schedule.as_mut() {
            let rates: Vec<f64> = kept.1.group_success.iter().map(|&c| c as f64 / stage.seeds.len() as f64).collect();
            if advance_if_satisfied(s, &rates, cfg.threshold)? {
                stage = Stage::new(&env, spec, cfg, s.stage, Some(s.groups()))?;
                stages_visited.push(s.group_size());
                let policy = template.with_params(&kept.0).with_stage(stage.index);
                kept.1 = stage.score(&policy, horizon)?;
                // widen the search again for the new stage
                for x in std.iter_mut() {
                    *x = x.max(cfg.init_std * 0.25);
                }
            }
            last_stage = s.is_final_stage();
        }
        let done = cfg.early_stop && last_stage && kept.1.success == stage.seeds.len();
        best = Some(kept);
        if done {
            break;
        }
    }

    let (params, _) = best.expect("at least one iteration ran");
    Ok(TrainResult {
        policy: template.with_params(&params).with_stage(stage.index),
        curve,
        schedule,
        stages_visited,
        monitor_states: m.num_states(),
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EvalReport {
    pub episodes: usize,
    /// Episodes whose projected rollout satisfies the specification.
    pub satisfied: usize,
    pub rate: f64,
    /// Episodes where every agent ended final with a positive reward.
    pub monitor_success: usize,
    /// Monitor success without satisfaction; must stay zero.
    pub unsound: usize,
    /// Satisfaction the monitors did not certify (a transition choice missed it).
    pub missed: usize,
    /// Count of agent-episodes ending at each monitor depth.
    pub depth_histogram: Vec<usize>,
    /// Mean of final depth over maximum depth.
    pub depth_fraction: f64,
}

/// Deployment episodes: each agent acts on its own state, registers and
/// monitor state; success is judged on the projected base rollout.
pub fn evaluate(policy: &Policy, game: &Game, spec: &Spec, horizon: usize, episodes: usize, seed: u64, workers: usize) -> Result<EvalReport> {
    let consts = compute_constants(game.monitor_of(0), game.env().state_box())?;
    let n = game.n_agents();
    let agents: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..episodes).map(|_| rng.random()).collect();
    let outcomes: Vec<(bool, bool, Vec<usize>)> = pool(workers)?.install(|| {
        seeds
            .par_iter()
            .map(|&s| {
                let r = policy.rollout(game, s, horizon)?;
                let sat = satisfies(spec, &r.project(), &agents)?;
                let mon = game.monitor_success(&r)?;
                let depths = r.last().q.iter().map(|&q| consts.depth[q]).collect();
                Ok((sat, mon, depths))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut report = EvalReport {
        episodes,
        depth_histogram: vec![0; consts.max_depth + 1],
        ..Default::default()
    };
    let mut depth_sum = 0.0;
    for (sat, mon, depths) in outcomes {
        report.satisfied += usize::from(sat);
        report.monitor_success += usize::from(mon);
        report.unsound += usize::from(mon && !sat);
        report.missed += usize::from(sat && !mon);
        for d in depths {
            report.depth_histogram[d] += 1;
            depth_sum += d as f64 / consts.max_depth.max(1) as f64;
        }
    }
    report.rate = report.satisfied as f64 / episodes.max(1) as f64;
    report.depth_fraction = depth_sum / (episodes * n).max(1) as f64;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{NavConfig, NavEnv};
    use crate::spec_lang::parse;

    fn nav(agents: usize) -> Arc<dyn Environment> {
        Arc::new(NavEnv::new(NavConfig::new(2, agents)).unwrap())
    }

    #[test]
    fn config_checks() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig { population: 10, elites: 6, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = TrainConfig { episodes: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn scripted_policy_solves_local_reach() {
        let spec = parse("reach_lo(5, 0)").unwrap();
        let env = nav(2);
        let game = Game::from_spec(env.clone(), &spec).unwrap();
        let m = game.monitor_of(0);
        let mut p = Policy::zeros(2, m.num_states(), m.registers.len(), 1.0, false, 42.0);
        let f = p.features();
        // a = tanh(5 (g - s)) toward g = (5, 0)
        p.weights[0] = -5.0;
        p.weights[f - 1] = 25.0;
        p.weights[f + 1] = -5.0;
        let r = evaluate(&p, &game, &spec, 30, 20, 4, 2).unwrap();
        assert_eq!(r.rate, 1.0);
        assert_eq!(r.unsound, 0);
        assert_eq!(r.depth_histogram, vec![0, 40]);
        let again = evaluate(&p, &game, &spec, 30, 20, 4, 1).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn untrained_policy_fails_hard_task() {
        let spec = parse("reach_gl(5, 0); reach_gl(0, 0); reach_gl(3, 0)").unwrap();
        let game = Game::from_spec(nav(2), &spec).unwrap();
        let m = game.monitor_of(0);
        let p = Policy::zeros(2, m.num_states(), m.registers.len(), 1.0, false, 42.0);
        assert_eq!(evaluate(&p, &game, &spec, 50, 10, 0, 1).unwrap().rate, 0.0);
    }

    #[test]
    fn short_training_is_deterministic_and_elitist() {
        let spec = parse("reach_gl(3, 0)").unwrap();
        let cfg = TrainConfig {
            population: 12,
            elites: 3,
            iterations: 5,
            episodes: 2,
            early_stop: false,
            workers: 2,
            seed: 9,
            ..Default::default()
        };
        let a = train(nav(2), &spec, 30, &cfg).unwrap();
        let b = train(nav(2), &spec, 30, &TrainConfig { workers: 1, ..cfg }).unwrap();
        assert_eq!(a.policy, b.policy);
        assert_eq!(a.curve, b.curve);
        assert!(a.curve.windows(2).all(|w| w[1].best_score >= w[0].best_score));
        let mut csv = Vec::new();
        write_curve(&a.curve, &mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("iteration,best_score,mean_score,satisfaction,stage\n"));
    }
}
