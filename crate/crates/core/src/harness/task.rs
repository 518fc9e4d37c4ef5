//! Training tasks: stage-specific scenario initialization, reward and
//! termination rules wrapped as a learner environment.

use serde::{Deserialize, Serialize};

use crate::aircraft::ControlAction;
use crate::error::{Error, Result};
use crate::harness::scenario::{mix_seed, sample_scenario, CurriculumWeights, ScenarioBounds, ScenarioSpec};
use crate::harness::sim::{SimConfig, Simulation, TEST_MAX_STEPS, TRAIN_MAX_STEPS};
use crate::learner::observation::Observation;
use crate::learner::train::{EnvStep, Environment};
use crate::rewards::{
    reward_baseline_step, reward_baseline_terminal, reward_large_azimuth, reward_short_distance, reward_small_azimuth,
    reward_steep_turn, BaselineParams, LargeAzimuthParams, RewardBreakdown, ShortDistanceParams, SmallAzimuthParams,
    SteepTurnParams,
};

const DEG: f64 = std::f64::consts::PI / 180.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    SteepTurn,
    ShortDistance,
    SmallAzimuth,
    LargeAzimuth,
    Baseline,
}

impl Task {
    pub const ALL: [Task; 5] = [
        Task::SteepTurn,
        Task::ShortDistance,
        Task::SmallAzimuth,
        Task::LargeAzimuth,
        Task::Baseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::SteepTurn => "steep-turn",
            Task::ShortDistance => "short-distance",
            Task::SmallAzimuth => "small-azimuth",
            Task::LargeAzimuth => "large-azimuth",
            Task::Baseline => "baseline",
        }
    }

    /// Scenario bounds used to initialize training episodes.
    pub fn bounds(self) -> ScenarioBounds {
        match self {
            Task::SteepTurn | Task::ShortDistance => ScenarioBounds::short_distance_training(),
            Task::SmallAzimuth | Task::LargeAzimuth | Task::Baseline => ScenarioBounds::default(),
        }
    }

    pub fn weights(self) -> Option<CurriculumWeights> {
        match self {
            Task::SmallAzimuth => Some(CurriculumWeights::small_azimuth()),
            Task::LargeAzimuth => Some(CurriculumWeights::large_azimuth()),
            _ => None,
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown task {s:?}")))
    }
}

/// Reward parameters of every task.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub steep_turn: SteepTurnParams,
    pub short_distance: ShortDistanceParams,
    pub small_azimuth: SmallAzimuthParams,
    pub large_azimuth: LargeAzimuthParams,
    pub baseline: BaselineParams,
}

impl RewardConfig {
    /// Per-step reward of `task` at the current simulation state.
    pub fn step_reward(&self, task: Task, sim: &Simulation) -> RewardBreakdown {
        let input = sim.reward_input();
        match task {
            Task::SteepTurn => reward_steep_turn(&self.steep_turn, &input),
            Task::ShortDistance => reward_short_distance(&self.short_distance, &input),
            Task::SmallAzimuth => reward_small_azimuth(&self.small_azimuth, &input),
            Task::LargeAzimuth => reward_large_azimuth(&self.large_azimuth, &input),
            Task::Baseline => reward_baseline_step(&self.baseline, &input),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TerminationRules {
    pub max_steps: usize,
    /// End when range drops below this value.
    pub min_range: Option<f64>,
    /// End when |azimuth| drops below this value (radians).
    pub min_abs_azimuth: Option<f64>,
    pub stop_on_hit: bool,
    /// End when the missile's flight time is used up.
    pub stop_on_expiry: bool,
}

impl TerminationRules {
    pub fn for_task(task: Task) -> Self {
        let base = Self {
            max_steps: TRAIN_MAX_STEPS,
            min_range: None,
            min_abs_azimuth: None,
            stop_on_hit: true,
            stop_on_expiry: false,
        };
        match task {
            Task::SteepTurn | Task::ShortDistance => base,
            Task::SmallAzimuth => Self {
                min_range: Some(5000.0),
                ..base
            },
            Task::LargeAzimuth => Self {
                min_range: Some(5000.0),
                min_abs_azimuth: Some(15.0 * DEG),
                ..base
            },
            Task::Baseline => Self {
                stop_on_hit: false,
                stop_on_expiry: true,
                ..base
            },
        }
    }

    /// Evaluation rules: the episode lasts the missile's flight time and
    /// ends early on a hit or ground impact.
    pub fn test() -> Self {
        Self {
            max_steps: TEST_MAX_STEPS,
            min_range: None,
            min_abs_azimuth: None,
            stop_on_hit: true,
            stop_on_expiry: true,
        }
    }

    pub fn check(&self, sim: &Simulation) -> Option<EndReason> {
        if self.stop_on_hit && sim.hit {
            return Some(EndReason::Hit);
        }
        if sim.aircraft.ground_impact || sim.aircraft.position.z < sim.config().min_altitude {
            return Some(EndReason::GroundImpact);
        }
        if let Some(r) = self.min_range {
            if sim.geometry.range < r {
                return Some(EndReason::RangeBelowThreshold);
            }
        }
        if let Some(a) = self.min_abs_azimuth {
            if sim.geometry.azimuth.abs() < a {
                return Some(EndReason::AzimuthBelowThreshold);
            }
        }
        if self.stop_on_expiry && sim.missile.elapsed >= sim.config().max_flight_time - 1e-9 {
            return Some(EndReason::Expired);
        }
        if sim.step_count >= self.max_steps {
            return Some(EndReason::StepCap);
        }
        None
    }
}

impl Default for TerminationRules {
    fn default() -> Self {
        Self::for_task(Task::SteepTurn)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskConfig {
    pub rewards: RewardConfig,
    pub sim: SimConfig,
    /// Simulation steps per policy decision.
    pub decision_interval: usize,
    /// Overrides the task's default scenario bounds.
    pub bounds: Option<ScenarioBounds>,
    pub termination: Option<TerminationRules>,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            rewards: RewardConfig::default(),
            sim: SimConfig::default(),
            decision_interval: 1,
            bounds: None,
            termination: None,
        }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.decision_interval == 0 {
            return Err(Error::Config("task.decision_interval must be positive".into()));
        }
        self.sim.aircraft.validate()?;
        if let Some(b) = &self.bounds {
            b.validate()?;
        }
        Ok(())
    }
}

/// Why a training episode ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndReason {
    Hit,
    GroundImpact,
    RangeBelowThreshold,
    AzimuthBelowThreshold,
    Expired,
    StepCap,
}

pub struct TaskEnv {
    pub task: Task,
    pub config: TaskConfig,
    pub seed: u64,
    bounds: ScenarioBounds,
    weights: Option<CurriculumWeights>,
    rules: TerminationRules,
    sim: Option<Simulation>,
    pub last_spec: Option<ScenarioSpec>,
    pub last_end: Option<EndReason>,
}

impl TaskEnv {
    pub fn new(task: Task, config: TaskConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let bounds = config.bounds.clone().unwrap_or_else(|| task.bounds());
        let rules = config
            .termination
            .clone()
            .unwrap_or_else(|| TerminationRules::for_task(task));
        Ok(Self {
            task,
            weights: task.weights(),
            bounds,
            rules,
            config,
            seed,
            sim: None,
            last_spec: None,
            last_end: None,
        })
    }

    pub fn simulation(&self) -> Option<&Simulation> {
        self.sim.as_ref()
    }

    pub fn scenario(&self, episode: u64) -> ScenarioSpec {
        sample_scenario(mix_seed(self.seed, episode, 0), &self.bounds, self.weights.as_ref())
    }

    /// Starts an episode from an explicit scenario.
    pub fn reset_to(&mut self, spec: &ScenarioSpec) -> Result<Observation> {
        let mut sim = Simulation::new(spec, &self.config.sim)?;
        sim.continue_after_hit = !self.rules.stop_on_hit;
        let obs = sim.observation();
        self.sim = Some(sim);
        self.last_spec = Some(*spec);
        self.last_end = None;
        Ok(obs)
    }
}

impl Environment for TaskEnv {
    fn reset(&mut self, episode: u64) -> Result<Observation> {
        let spec = self.scenario(episode);
        self.reset_to(&spec)
    }

    fn step(&mut self, action: ControlAction) -> Result<EnvStep> {
        let task = self.task;
        let interval = self.config.decision_interval;
        let mut sim = self
            .sim
            .take()
            .ok_or_else(|| Error::Config("environment stepped before reset".into()))?;
        let mut reward = RewardBreakdown::default();
        let mut sim_steps = 0;
        let mut end = None;
        for _ in 0..interval {
            sim.step(action)?;
            sim_steps += 1;
            reward.accumulate(&self.config.rewards.step_reward(task, &sim));
            end = self.rules.check(&sim);
            if end.is_some() {
                break;
            }
        }
        if task == Task::Baseline && end.is_some() {
            // A pass inside the lethal radius counts as caught even though the
            // missile has flown on since.
            let final_range = if sim.hit { sim.min_range } else { sim.geometry.range };
            reward.accumulate(&reward_baseline_terminal(
                &self.config.rewards.baseline,
                final_range,
                sim.min_range,
            ));
        }
        let terminal = matches!(
            end,
            Some(
                EndReason::Hit
                    | EndReason::GroundImpact
                    | EndReason::RangeBelowThreshold
                    | EndReason::AzimuthBelowThreshold
                    | EndReason::Expired
            )
        );
        let observation = sim.observation();
        self.last_end = end;
        self.sim = Some(sim);
        Ok(EnvStep {
            observation,
            reward,
            done: end.is_some(),
            terminal,
            sim_steps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_constant(env: &mut TaskEnv, action: ControlAction) -> (usize, EndReason, f64) {
        env.reset(0).unwrap();
        let mut steps = 0;
        let mut total = 0.0;
        loop {
            let s = env.step(action).unwrap();
            steps += s.sim_steps;
            total += s.reward.total();
            if s.done {
                return (steps, env.last_end.unwrap(), total);
            }
        }
    }

    #[test]
    fn task_names_round_trip() {
        for t in Task::ALL {
            assert_eq!(t.name().parse::<Task>().unwrap(), t);
        }
        assert!("bogus".parse::<Task>().is_err());
    }

    #[test]
    fn steep_turn_episode_ends_by_hit_or_cap() {
        let mut env = TaskEnv::new(Task::SteepTurn, TaskConfig::default(), 1).unwrap();
        let (steps, end, _) = run_constant(&mut env, ControlAction::new(0.0, 0.0, 0.0, 0.8));
        assert!(steps <= TRAIN_MAX_STEPS);
        assert!(matches!(
            end,
            EndReason::Hit | EndReason::StepCap | EndReason::GroundImpact
        ));
    }

    #[test]
    fn small_azimuth_stops_below_5000() {
        let mut env = TaskEnv::new(Task::SmallAzimuth, TaskConfig::default(), 2).unwrap();
        let (_, end, _) = run_constant(&mut env, ControlAction::new(0.0, 0.0, 0.0, 0.8));
        assert_eq!(end, EndReason::RangeBelowThreshold);
        assert!(env.simulation().unwrap().geometry.range < 5000.0);
    }

    #[test]
    fn large_azimuth_scenarios_start_outside_thirty_degrees() {
        let env = TaskEnv::new(Task::LargeAzimuth, TaskConfig::default(), 3).unwrap();
        for ep in 0..200 {
            let s = env.scenario(ep);
            assert!(s.missile_azimuth.abs() >= 30.0 * DEG - 1e-12);
        }
    }

    #[test]
    fn baseline_runs_to_expiry_with_terminal_reward() {
        let config = TaskConfig {
            decision_interval: 4,
            ..TaskConfig::default()
        };
        let mut env = TaskEnv::new(Task::Baseline, config, 4).unwrap();
        let (steps, end, _) = run_constant(&mut env, ControlAction::new(0.0, 0.0, 0.0, 0.8));
        let sim = env.simulation().unwrap();
        if end == EndReason::Expired {
            assert_eq!(steps, 5000);
            // Still integrating after a pass inside the lethal radius.
            assert!(sim.hit || sim.min_range >= 10.0);
        } else {
            assert_eq!(end, EndReason::GroundImpact);
        }
    }

    #[test]
    fn action_repeat_preserves_total_steps() {
        let a = ControlAction::new(0.1, 0.3, 0.0, 0.9);
        let mut one = TaskEnv::new(Task::SteepTurn, TaskConfig::default(), 5).unwrap();
        let mut four = TaskEnv::new(
            Task::SteepTurn,
            TaskConfig {
                decision_interval: 4,
                ..TaskConfig::default()
            },
            5,
        )
        .unwrap();
        let (s1, e1, r1) = run_constant(&mut one, a);
        let (s4, e4, r4) = run_constant(&mut four, a);
        assert_eq!(s1, s4);
        assert_eq!(e1, e4);
        assert!((r1 - r4).abs() < 1e-6 * r1.abs().max(1.0));
    }
}
