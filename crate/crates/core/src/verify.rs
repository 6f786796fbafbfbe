//! Executable checks of the framework's guarantees: exhaustive grid oracle,
//! shaped-reward ordering fuzz, group decomposition fuzz, and monitor
//! structure fuzz over random specifications.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{Environment, GridConfig, GridWorld, NavConfig, NavEnv, GRID_ACTIONS};
use crate::error::Result;
use crate::game::{AugmentedAction, AugmentedRollout, Game, JointAugState};
use crate::monitor::{compile, validate_structure, TaskMonitor};
use crate::scaling::{check_decomposition, set_groups, CapacitySpec, GroupSpec};
use crate::shaping::{compute_constants, FinalReward};
use crate::spec_lang::{satisfies, JointState, Predicate, Spec, Trajectory};
use crate::sync::{identify_sync_states, SyncSet};

// ---------------------------------------------------------------------------
// random specifications

#[derive(Clone, Debug)]
pub struct SpecGen {
    pub dim: usize,
    pub max_depth: usize,
    /// Candidate targets; coordinates are drawn from this set.
    pub points: Vec<Vec<f64>>,
    pub global: bool,
    pub ensuring: bool,
    pub tolerance: f64,
}

impl SpecGen {
    pub fn new(dim: usize, max_depth: usize) -> Self {
        let points = (0..6)
            .map(|i| (0..dim).map(|k| ((i * (k + 2)) % 7) as f64 - 3.0).collect())
            .collect();
        SpecGen {
            dim,
            max_depth,
            points,
            global: true,
            ensuring: true,
            tolerance: Predicate::DEFAULT_TOLERANCE,
        }
    }

    fn predicate<R: Rng>(&self, rng: &mut R, global: bool) -> Predicate {
        let target = self.points.choose(rng).expect("points are not empty").clone();
        let p = if global {
            Predicate::reach_gl(target)
        } else {
            Predicate::reach_lo(target)
        };
        p.with_tolerance(self.tolerance)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Spec {
        self.sample_depth(rng, self.max_depth.max(1))
    }

    fn sample_depth<R: Rng>(&self, rng: &mut R, depth: usize) -> Spec {
        if depth <= 1 || rng.random_bool(0.25) {
            let global = self.global && rng.random_bool(0.4);
            return Spec::Achieve(self.predicate(rng, global));
        }
        let choices = if self.ensuring { 3 } else { 2 };
        match rng.random_range(0..choices) {
            0 => Spec::seq(self.sample_depth(rng, depth - 1), self.sample_depth(rng, depth - 1)),
            1 => Spec::or(self.sample_depth(rng, depth - 1), self.sample_depth(rng, depth - 1)),
            _ => Spec::ensuring(self.sample_depth(rng, depth - 1), self.predicate(rng, false)),
        }
    }
}

// ---------------------------------------------------------------------------
// monitor structure

#[derive(Clone, Debug, Default, Serialize)]
pub struct StructureFuzzReport {
    pub specs: usize,
    pub failures: Vec<String>,
}

/// Compile random specs and check the structural properties plus
/// `Q_g ⊆ Sync`.
pub fn fuzz_structure(count: usize, max_depth: usize, seed: u64) -> Result<StructureFuzzReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let generator = SpecGen::new(2, max_depth);
    let mut report = StructureFuzzReport::default();
    for _ in 0..count {
        let spec = generator.sample(&mut rng);
        let m = compile(&spec)?;
        let structure = validate_structure(&m);
        for v in &structure.violations {
            report.failures.push(format!("{spec}: {v}"));
        }
        let sync = identify_sync_states(&m);
        if !m.global_states().is_subset(&sync) {
            report.failures.push(format!("{spec}: global states outside the sync set"));
        }
        if m.global_sources() != *m.global_states() {
            report.failures.push(format!("{spec}: global states differ from global sources"));
        }
        report.specs += 1;
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// exhaustive grid oracle

#[derive(Clone, Debug, Serialize)]
pub struct OracleWitness {
    pub states: Vec<Vec<f64>>,
    pub satisfied: bool,
    pub monitor: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct OracleReport {
    /// Joint action sequences covered.
    pub rollouts: u64,
    /// Distinct state sequences checked.
    pub distinct: u64,
    /// Action sequences whose rollout satisfies the spec.
    pub satisfied: u64,
    pub disagreements: u64,
    /// Monitor success without satisfaction.
    pub unsound: u64,
    /// Satisfaction with no certifying monitor run.
    pub missed: u64,
    pub witnesses: Vec<OracleWitness>,
}

type ConfigKey = (Vec<usize>, Vec<u64>, Vec<(usize, usize, usize)>);

fn config_key(s: &JointAugState) -> ConfigKey {
    (
        s.q.clone(),
        s.v.iter().flatten().map(|x| x.to_bits()).collect(),
        s.commitments.iter().map(|(&(g, q), &t)| (g, q, t)).collect(),
    )
}

/// Enumerate every joint action sequence on the grid. For each base rollout,
/// compare the satisfaction oracle with the existence of monitor transition
/// choices that leave every agent in a final state with positive reward.
pub fn grid_enumerate(world: &GridWorld, spec: &Spec, monitor: &TaskMonitor) -> Result<OracleReport> {
    grid_enumerate_with_sync(world, spec, monitor, identify_sync_states(monitor))
}

pub fn grid_enumerate_with_sync(
    world: &GridWorld,
    spec: &Spec,
    monitor: &TaskMonitor,
    sync: SyncSet,
) -> Result<OracleReport> {
    let env: Arc<dyn Environment> = Arc::new(world.clone());
    let game = Game::new(env, monitor.clone(), sync);
    let start = game.reset(0)?;
    let mut report = OracleReport::default();
    let mut prefix = vec![start.env.clone()];
    let mut walker = Walker {
        world,
        game: &game,
        spec,
        horizon: world.config().horizon,
        agents: (0..world.n_agents()).collect(),
        report: &mut report,
    };
    walker.walk(vec![start], &mut prefix, 1)?;
    Ok(report)
}

struct Walker<'a> {
    world: &'a GridWorld,
    game: &'a Game,
    spec: &'a Spec,
    horizon: usize,
    agents: Vec<usize>,
    report: &'a mut OracleReport,
}

impl Walker<'_> {
    fn walk(&mut self, configs: Vec<JointAugState>, prefix: &mut Vec<JointState>, weight: u64) -> Result<()> {
        if prefix.len() == self.horizon + 1 {
            return self.judge(&configs, prefix, weight);
        }
        let n = self.agents.len();
        let current = prefix.last().expect("prefix starts with the initial state").clone();
        let mut children: BTreeMap<Vec<u64>, (JointState, u64)> = BTreeMap::new();
        for code in 0..GRID_ACTIONS.len().pow(n as u32) {
            let mut c = code;
            let actions: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let a = GridWorld::action(c % GRID_ACTIONS.len());
                    c /= GRID_ACTIONS.len();
                    a
                })
                .collect();
            let next = self.world.step(&current, &actions)?;
            let key = next.coords().iter().map(|x| x.to_bits()).collect();
            children.entry(key).or_insert((next, 0)).1 += 1;
        }
        for (_, (next, mult)) in children {
            let mut seen = HashSet::new();
            let mut successors = Vec::new();
            for c in &configs {
                for deltas in self.delta_choices(c) {
                    let (s, _) = self.game.advance_monitors(c, &deltas, next.clone())?;
                    if seen.insert(config_key(&s)) {
                        successors.push(s);
                    }
                }
            }
            prefix.push(next);
            self.walk(successors, prefix, weight * mult)?;
            prefix.pop();
        }
        Ok(())
    }

    fn delta_choices(&self, c: &JointAugState) -> Vec<Vec<usize>> {
        let per_agent: Vec<Vec<usize>> = self
            .agents
            .iter()
            .map(|&a| self.game.monitor_of(a).outgoing(c.q[a]).map(|t| t.id).collect())
            .collect();
        let mut out = vec![Vec::new()];
        for options in per_agent {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    options.iter().map(move |&o| {
                        let mut p = prefix.clone();
                        p.push(o);
                        p
                    })
                })
                .collect();
        }
        out
    }

    fn judge(&mut self, configs: &[JointAugState], prefix: &[JointState], weight: u64) -> Result<()> {
        let traj = Trajectory::new(prefix.to_vec())?;
        let satisfied = satisfies(self.spec, &traj, &self.agents)?;
        let mut monitor = false;
        for c in configs {
            let ok = self.agents.iter().all(|&a| {
                let m = self.game.monitor_of(a);
                matches!(
                    crate::shaping::final_reward(m, c.q[a], &c.v[a]),
                    Ok(FinalReward::Value(r)) if r > 0.0
                )
            });
            if ok {
                monitor = true;
                break;
            }
        }
        self.report.rollouts += weight;
        self.report.distinct += 1;
        if satisfied {
            self.report.satisfied += weight;
        }
        if satisfied != monitor {
            self.report.disagreements += weight;
            if monitor {
                self.report.unsound += weight;
            } else {
                self.report.missed += weight;
            }
            if self.report.witnesses.len() < 5 {
                self.report.witnesses.push(OracleWitness {
                    states: prefix.iter().map(|s| s.coords().to_vec()).collect(),
                    satisfied,
                    monitor,
                });
            }
        }
        Ok(())
    }
}

/// One exhaustive check: a specification over grid cells and a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleCase {
    pub name: String,
    pub spec: String,
    pub grid: GridConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(rename = "case")]
    pub cases: Vec<OracleCase>,
}

impl OracleConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: OracleConfig = toml::from_str(text)?;
        for c in &cfg.cases {
            c.grid.validate()?;
        }
        Ok(cfg)
    }
}

fn grid(width: usize, height: usize, horizon: usize, start: &[[i64; 2]]) -> GridConfig {
    GridConfig {
        width,
        height,
        horizon,
        start: start.to_vec(),
    }
}

/// Local and global achieve, sequence and choice on grids of at most 3x3.
pub fn default_oracle_cases() -> Vec<OracleCase> {
    let case = |name: &str, spec: &str, g: GridConfig| OracleCase {
        name: name.into(),
        spec: spec.into(),
        grid: g,
    };
    vec![
        case("achieve_local_1", "reach_lo(2, 2)", grid(3, 3, 4, &[[0, 0]])),
        case("achieve_local_out_of_reach", "reach_lo(2, 2)", grid(3, 3, 3, &[[0, 0]])),
        case("achieve_local_2", "reach_lo(2, 1)", grid(3, 3, 4, &[[0, 0], [2, 2]])),
        case("achieve_global_2x2", "reach_gl(1, 1)", grid(2, 2, 3, &[[0, 0], [1, 0]])),
        case("achieve_global_3x3", "reach_gl(1, 1)", grid(3, 3, 5, &[[0, 0], [2, 2]])),
        case("seq_local", "reach_lo(2, 0); reach_lo(0, 2)", grid(3, 3, 6, &[[0, 0]])),
        case("seq_global", "reach_gl(1, 0); reach_lo(0, 1)", grid(2, 2, 5, &[[0, 0], [1, 1]])),
        case("seq_mixed_3x3", "reach_lo(2, 2); reach_gl(1, 1)", grid(3, 3, 5, &[[1, 1], [2, 1]])),
        case("or_local", "reach_lo(2, 2) or reach_lo(0, 2)", grid(3, 3, 6, &[[1, 0]])),
        case("or_global", "reach_gl(1, 1) or reach_lo(0, 1)", grid(3, 3, 5, &[[0, 0], [2, 2]])),
    ]
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleCaseReport {
    pub name: String,
    pub spec: String,
    pub report: OracleReport,
}

/// Run every case; `monitor_spec` replaces the compiled monitor (fault
/// injection).
pub fn run_oracle(cases: &[OracleCase], monitor_spec: Option<&Spec>) -> Result<Vec<OracleCaseReport>> {
    cases
        .iter()
        .map(|c| {
            let spec = crate::spec_lang::parse(&c.spec)?;
            let m = compile(monitor_spec.unwrap_or(&spec))?;
            let world = GridWorld::new(c.grid.clone())?;
            Ok(OracleCaseReport {
                name: c.name.clone(),
                spec: c.spec.clone(),
                report: grid_enumerate(&world, &spec, &m)?,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// shaped reward ordering

#[derive(Clone, Debug, Default, Serialize)]
pub struct ShapingFuzzReport {
    pub rollouts: usize,
    pub pairs: usize,
    pub finals: usize,
    /// Pairs where the final reward ordering was not preserved.
    pub violations_final: usize,
    /// Pairs of incomplete rollouts where a deeper end state scored lower.
    pub violations_depth: usize,
    pub depth_pairs: usize,
}

/// Random goal-seeking rollouts on 2D navigation, compared pairwise.
pub fn fuzz_shaping(spec: &Spec, agents: usize, rollouts: usize, pairs: usize, seed: u64) -> Result<ShapingFuzzReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let env: Arc<dyn Environment> = Arc::new(NavEnv::new(NavConfig::new(2, agents))?);
    let game = Game::from_spec(env.clone(), spec)?;
    let consts = compute_constants(game.monitor_of(0), env.state_box())?;
    let mut scored: Vec<(FinalReward, FinalReward, usize, bool)> = Vec::with_capacity(rollouts * agents);
    for _ in 0..rollouts {
        let horizon = rng.random_range(2..40);
        let greed: f64 = rng.random();
        let start = game.reset(rng.random())?;
        let r = random_rollout(&game, start, horizon, greed, &mut rng)?;
        let finals = game.final_rewards(&r)?;
        let shaped = game.shaped_rewards(&r, &consts)?;
        for a in 0..agents {
            let q = r.last().q[a];
            let m = game.monitor_of(a);
            scored.push((finals[a], shaped[a], consts.depth[q], m.is_final(q)));
        }
    }
    let mut report = ShapingFuzzReport {
        rollouts,
        finals: scored.iter().filter(|s| s.3).count(),
        ..Default::default()
    };
    for _ in 0..pairs {
        let a = scored[rng.random_range(0..scored.len())];
        let b = scored[rng.random_range(0..scored.len())];
        report.pairs += 1;
        if a.0 > b.0 && a.1 <= b.1 {
            report.violations_final += 1;
        }
        if !a.3 && !b.3 && a.2 > b.2 {
            report.depth_pairs += 1;
            if a.1 < b.1 {
                report.violations_depth += 1;
            }
        }
    }
    Ok(report)
}

/// Agents head for the target of their first exit with probability `greed`
/// per step and move randomly otherwise; transition choices are random.
pub fn random_rollout<R: Rng>(
    game: &Game,
    start: JointAugState,
    horizon: usize,
    greed: f64,
    rng: &mut R,
) -> Result<AugmentedRollout> {
    let n = game.n_agents();
    let dim = game.env().dim();
    game.rollout(start, horizon, |s, _| {
        (0..n)
            .map(|a| {
                let m = game.monitor_of(a);
                let exits: Vec<_> = m.exits(s.q[a]).collect();
                let delta = match exits.choose(rng) {
                    Some(t) => t.id,
                    None => m.self_loop(s.q[a]).map(|t| t.id).unwrap_or(0),
                };
                let here = s.env.agent(a);
                let goal = exits.first().and_then(|t| t.guard.atoms.first()).map(|atom| {
                    let p = &m.predicates[atom.pred];
                    p.agent_target(a, dim, n).map(|t| t.to_vec()).unwrap_or_else(|_| p.target[..dim].to_vec())
                });
                let env_action = match goal {
                    Some(g) if rng.random_bool(greed) => {
                        here.iter().zip(&g).map(|(x, y)| (y - x).clamp(-1.0, 1.0)).collect()
                    }
                    _ => (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
                };
                Ok(AugmentedAction { env_action, delta })
            })
            .collect()
    })
}

// ---------------------------------------------------------------------------
// group decomposition

#[derive(Clone, Debug, Default, Serialize)]
pub struct DecompositionFuzzReport {
    pub triples: usize,
    /// Triples whose trajectory satisfies the spec for all agents.
    pub union_satisfied: usize,
    pub violations: usize,
    /// Violations found for the counting objective on the same trajectories.
    pub capacity_violations: usize,
}

/// Random (reach spec, trajectory, partition) triples.
pub fn fuzz_decomposition(count: usize, seed: u64) -> Result<DecompositionFuzzReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut generator = SpecGen::new(2, 3);
    generator.points = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 2.0], vec![2.0, 2.0]];
    let mut report = DecompositionFuzzReport::default();
    for _ in 0..count {
        let spec = generator.sample(&mut rng);
        let n = rng.random_range(2..=6);
        let horizon = rng.random_range(2..=10);
        let mut states = Vec::with_capacity(horizon + 1);
        for _ in 0..=horizon {
            let together = rng.random_bool(0.6);
            let shared = generator.points.choose(&mut rng).expect("points").clone();
            let agents: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    if together {
                        shared.clone()
                    } else {
                        generator.points.choose(&mut rng).expect("points").clone()
                    }
                })
                .collect();
            states.push(JointState::from_agents(&agents)?);
        }
        let traj = Trajectory::new(states)?;
        let k = rng.random_range(1..=n);
        let mut agents: Vec<usize> = (0..n).collect();
        if rng.random_bool(0.5) {
            agents.shuffle(&mut rng);
        }
        let partition = set_groups(k, &agents)?;
        let all: Vec<usize> = (0..n).collect();
        report.triples += 1;
        if spec.holds(&traj, &all)? {
            report.union_satisfied += 1;
        }
        if !check_decomposition(&spec, &traj, &partition)? {
            report.violations += 1;
        }
        let capacity = CapacitySpec {
            fruits: generator.points.clone(),
            tolerance: 1.0,
            required: n.min(generator.points.len()),
        };
        if !check_decomposition(&capacity, &traj, &partition)? {
            report.capacity_violations += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec_lang::parse;

    #[test]
    fn generated_specs_respect_depth() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = SpecGen::new(2, 4);
        for _ in 0..200 {
            assert!(g.sample(&mut rng).depth() <= 4);
        }
    }

    #[test]
    fn small_oracle_run_agrees() {
        let world = GridWorld::new(GridConfig {
            width: 2,
            height: 2,
            horizon: 3,
            start: vec![[0, 0], [1, 1]],
        })
        .unwrap();
        let spec = parse("reach_gl(1, 0)").unwrap();
        let m = compile(&spec).unwrap();
        let report = grid_enumerate(&world, &spec, &m).unwrap();
        assert_eq!(report.rollouts, 5u64.pow(6));
        assert!(report.satisfied > 0);
        assert_eq!(report.disagreements, 0);
    }

    #[test]
    fn broken_monitor_is_caught() {
        let world = GridWorld::new(GridConfig {
            width: 3,
            height: 1,
            horizon: 3,
            start: vec![[0, 0]],
        })
        .unwrap();
        let spec = parse("reach_lo(2, 0)").unwrap();
        // monitor for the wrong goal
        let wrong = compile(&parse("reach_lo(1, 0)").unwrap()).unwrap();
        let report = grid_enumerate(&world, &spec, &wrong).unwrap();
        assert!(report.disagreements > 0);
        assert!(!report.witnesses.is_empty());
    }
}


#[cfg(test)]
mod oracle_tests {
    use super::*;

    #[test]
    fn default_cases_are_valid_and_parse() {
        for c in default_oracle_cases() {
            c.grid.validate().unwrap();
            assert!(c.grid.width <= 3 && c.grid.height <= 3, "{}", c.name);
            crate::spec_lang::parse(&c.spec).unwrap();
        }
    }

    #[test]
    fn oracle_config_round_trip() {
        let cfg = OracleConfig {
            cases: default_oracle_cases()[..2].to_vec(),
        };
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(OracleConfig::from_toml(&text).unwrap(), cfg);
    }
}
