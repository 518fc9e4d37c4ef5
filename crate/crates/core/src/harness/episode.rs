//! Single-episode execution with optional per-step recording.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aircraft::{AircraftState, ControlAction};
use crate::error::Result;
use crate::harness::scenario::ScenarioSpec;
use crate::harness::sim::{SimConfig, Simulation, DT};
use crate::harness::task::{EndReason, RewardConfig, Task, TerminationRules};
use crate::missile::MissileState;
use crate::report::{sig9, CsvTable};
use crate::rewards::RewardBreakdown;
use crate::strategy::{Controller, Stage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Hit,
    Survived,
    GroundImpact,
    /// Non-finite state or other runtime failure.
    Aborted,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Hit => "hit",
            Outcome::Survived => "survived",
            Outcome::GroundImpact => "ground-impact",
            Outcome::Aborted => "aborted",
        }
    }

    pub fn is_success(self) -> bool {
        self == Outcome::Survived
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub sim: SimConfig,
    pub termination: TerminationRules,
    /// Simulation steps per controller decision.
    pub decision_interval: usize,
    /// Evaluate this task's reward on every step.
    pub reward: Option<(Task, RewardConfig)>,
    /// Keep per-step rows.
    pub record: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            termination: TerminationRules::test(),
            decision_interval: 1,
            reward: None,
            record: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub t: f64,
    pub aircraft: AircraftState,
    pub missile: MissileState,
    pub stage: Option<Stage>,
    pub action: ControlAction,
    pub reward: RewardBreakdown,
    pub range: f64,
    pub azimuth: f64,
    pub los_rate: f64,
    pub missile_overload_g: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub spec: ScenarioSpec,
    pub spec_digest: String,
    pub strategy: String,
    pub outcome: Outcome,
    pub end_reason: Option<EndReason>,
    pub steps: usize,
    pub min_range: f64,
    pub final_range: f64,
    pub max_missile_overload_g: f64,
    pub accumulated_reward: f64,
    /// Stages used, in order of first activation.
    pub stages_visited: Vec<Stage>,
    pub error: Option<String>,
    pub rows: Vec<StepRow>,
}

fn row(sim: &Simulation, stage: Option<Stage>, action: ControlAction, reward: RewardBreakdown) -> StepRow {
    StepRow {
        t: sim.time(),
        aircraft: sim.aircraft,
        missile: sim.missile,
        stage,
        action,
        reward,
        range: sim.geometry.range,
        azimuth: sim.geometry.azimuth,
        los_rate: sim.geometry.los_rate,
        missile_overload_g: sim.command.overload_g,
    }
}

/// Runs `controller` against the scenario until a termination rule fires.
/// Runtime failures produce an `Aborted` record carrying the diagnostic.
pub fn run_episode(spec: &ScenarioSpec, controller: &mut dyn Controller, options: &RunOptions) -> EpisodeRecord {
    let mut record = EpisodeRecord {
        spec: *spec,
        spec_digest: spec.digest(),
        strategy: controller.name().to_string(),
        outcome: Outcome::Aborted,
        end_reason: None,
        steps: 0,
        min_range: f64::NAN,
        final_range: f64::NAN,
        max_missile_overload_g: 0.0,
        accumulated_reward: 0.0,
        stages_visited: Vec::new(),
        error: None,
        rows: Vec::new(),
    };
    if let Err(e) = drive(spec, controller, options, &mut record) {
        record.outcome = Outcome::Aborted;
        record.error = Some(e.to_string());
    }
    record
}

fn drive(
    spec: &ScenarioSpec,
    controller: &mut dyn Controller,
    options: &RunOptions,
    record: &mut EpisodeRecord,
) -> Result<()> {
    let interval = options.decision_interval.max(1);
    let mut sim = Simulation::new(spec, &options.sim)?;
    sim.continue_after_hit = !options.termination.stop_on_hit;
    controller.reset();
    record.min_range = sim.min_range;
    record.final_range = sim.geometry.range;
    if options.record {
        record
            .rows
            .push(row(&sim, None, ControlAction::default(), RewardBreakdown::default()));
    }
    let mut decision = None;
    let end = loop {
        if sim.step_count % interval == 0 || decision.is_none() {
            let d = controller.act(&sim)?;
            if let Some(stage) = d.stage {
                if !record.stages_visited.contains(&stage) {
                    record.stages_visited.push(stage);
                }
            }
            decision = Some(d);
        }
        let d = decision.expect("decision set above");
        sim.step(d.action)?;
        let reward = match &options.reward {
            Some((task, cfg)) => cfg.step_reward(*task, &sim),
            None => RewardBreakdown::default(),
        };
        record.accumulated_reward += reward.total();
        let reward_total = record.accumulated_reward;
        if !reward_total.is_finite() {
            return Err(crate::Error::NonFinite("reward"));
        }
        record.steps = sim.step_count;
        record.min_range = sim.min_range;
        record.final_range = sim.geometry.range;
        record.max_missile_overload_g = sim.max_overload_g;
        if options.record {
            record.rows.push(row(&sim, d.stage, d.action, reward));
        }
        if let Some(end) = options.termination.check(&sim) {
            break end;
        }
    };
    record.end_reason = Some(end);
    record.outcome = match end {
        EndReason::Hit => Outcome::Hit,
        EndReason::GroundImpact => Outcome::GroundImpact,
        _ => Outcome::Survived,
    };
    Ok(())
}

pub const TRAJECTORY_COLUMNS: [&str; 36] = [
    "t",
    "aircraft_x",
    "aircraft_y",
    "aircraft_z",
    "aircraft_speed",
    "aircraft_roll",
    "aircraft_pitch",
    "aircraft_heading",
    "aircraft_load_factor",
    "missile_x",
    "missile_y",
    "missile_z",
    "missile_speed",
    "missile_heading",
    "missile_pitch",
    "stage",
    "elevator",
    "aileron",
    "rudder",
    "throttle",
    "range",
    "azimuth",
    "los_rate",
    "missile_overload_g",
    "reward_total",
    "r_roll",
    "r_pitch",
    "r_azimuth",
    "r_velocity",
    "r_los",
    "r_overload",
    "r_constraint_roll",
    "r_constraint_pitch",
    "r_constraint_azimuth",
    "r_constraint_velocity",
    "r_distance_terminal",
];

/// One row per recorded step. Angles in radians, distances in metres.
pub fn write_trajectory_csv(path: &Path, record: &EpisodeRecord) -> Result<()> {
    let mut table = CsvTable::create(path, &TRAJECTORY_COLUMNS)?;
    for r in &record.rows {
        let a = &r.aircraft;
        let m = &r.missile;
        let mut fields: Vec<String> = [
            r.t,
            a.position.x,
            a.position.y,
            a.position.z,
            a.speed,
            a.roll,
            a.pitch,
            a.heading,
            a.load_factor,
            m.position.x,
            m.position.y,
            m.position.z,
            m.speed,
            m.heading,
            m.pitch,
        ]
        .iter()
        .map(|&v| sig9(v))
        .collect();
        fields.push(r.stage.map(|s| s.name()).unwrap_or("").to_string());
        fields.extend(
            [
                r.action.elevator,
                r.action.aileron,
                r.action.rudder,
                r.action.throttle,
                r.range,
                r.azimuth,
                r.los_rate,
                r.missile_overload_g,
                r.reward.total(),
            ]
            .iter()
            .map(|&v| sig9(v)),
        );
        fields.extend(r.reward.terms().iter().map(|&v| sig9(v)));
        table.row(fields)?;
    }
    table.finish()
}

/// Steps between decisions corresponding to the simulation rate.
pub fn steps_for_rate(hz: f64) -> usize {
    ((1.0 / DT) / hz).round().max(1.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenario::{sample_scenario, ScenarioBounds};
    use crate::missile::GuidanceLaw;
    use crate::strategy::{Decision, NoOp};

    fn head_on_spec(range: f64, missile_speed: f64) -> ScenarioSpec {
        ScenarioSpec {
            aircraft_altitude: 5000.0,
            aircraft_speed: 300.0,
            aircraft_heading: 0.0,
            aircraft_roll: 0.0,
            missile_azimuth: std::f64::consts::PI,
            missile_elevation: 0.0,
            range,
            missile_speed,
            max_overload_g: 45.0,
            law: GuidanceLaw::Pn,
            nav_coefficient: 4.0,
            accel_correction: 0.0,
            seed: 0,
        }
    }

    #[test]
    fn no_op_head_on_is_hit() {
        let rec = run_episode(&head_on_spec(8000.0, 1000.0), &mut NoOp, &RunOptions::default());
        assert_eq!(rec.outcome, Outcome::Hit);
        assert!(rec.min_range < 10.0);
    }

    #[test]
    fn stationary_threat_survives_full_test() {
        let mut spec = head_on_spec(8000.0, 0.0);
        // Fly away from the missile.
        spec.missile_azimuth = 0.0;
        let opts = RunOptions {
            record: true,
            ..RunOptions::default()
        };
        let rec = run_episode(&spec, &mut NoOp, &opts);
        assert_eq!(rec.outcome, Outcome::Survived);
        assert_eq!(rec.steps, 5000);
        assert_eq!(rec.rows.len(), 5001);
        assert_eq!(rec.rows.last().unwrap().range, rec.final_range);
    }

    #[test]
    fn deterministic_record() {
        let spec = sample_scenario(11, &ScenarioBounds::default(), None);
        let opts = RunOptions {
            record: true,
            reward: Some((Task::Baseline, RewardConfig::default())),
            ..RunOptions::default()
        };
        assert_eq!(
            run_episode(&spec, &mut NoOp, &opts),
            run_episode(&spec, &mut NoOp, &opts)
        );
    }

    #[derive(Clone)]
    struct Broken;

    impl Controller for Broken {
        fn name(&self) -> &str {
            "broken"
        }
        fn act(&mut self, _sim: &Simulation) -> Result<Decision> {
            Ok(Decision {
                action: ControlAction::new(f64::NAN, 0.0, 0.0, 1.0),
                stage: None,
            })
        }
        fn box_clone(&self) -> Box<dyn Controller> {
            Box::new(self.clone())
        }
    }

    #[test]
    fn nan_aborts_with_diagnostic() {
        let rec = run_episode(&head_on_spec(8000.0, 1000.0), &mut Broken, &RunOptions::default());
        assert_eq!(rec.outcome, Outcome::Aborted);
        assert!(rec.error.unwrap().contains("non-finite"));
    }

    #[test]
    fn trajectory_csv_has_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let opts = RunOptions {
            record: true,
            ..RunOptions::default()
        };
        let rec = run_episode(&head_on_spec(3000.0, 1000.0), &mut NoOp, &opts);
        write_trajectory_csv(&path, &rec).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap().split(',').count(), TRAJECTORY_COLUMNS.len());
        assert_eq!(lines.count(), rec.rows.len());
    }

    #[test]
    fn rate_to_interval() {
        assert_eq!(steps_for_rate(200.0), 1);
        assert_eq!(steps_for_rate(50.0), 4);
    }
}
