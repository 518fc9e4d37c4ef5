//! Coupled aircraft/missile integration at the simulation rate.

use serde::{Deserialize, Serialize};

use crate::aircraft::{step_aircraft, AircraftParams, AircraftState, ControlAction};
use crate::error::{Error, Result};
use crate::geometry::{LosSmoother, RelativeGeometry, Vec3};
use crate::harness::scenario::ScenarioSpec;
use crate::learner::observation::Observation;
use crate::missile::{step_missile, Guidance, GuidanceCommand, MissileState, MAX_FLIGHT_TIME};
use crate::rewards::RewardInput;

pub const SIM_RATE_HZ: f64 = 200.0;
pub const DT: f64 = 1.0 / SIM_RATE_HZ;
/// Test episodes last the missile's 25 s of flight.
pub const TEST_MAX_STEPS: usize = 5000;
pub const TRAIN_MAX_STEPS: usize = 7500;
pub const MIN_ALTITUDE: f64 = 1000.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub aircraft: AircraftParams,
    pub min_altitude: f64,
    pub max_flight_time: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            aircraft: AircraftParams::default(),
            min_altitude: MIN_ALTITUDE,
            max_flight_time: MAX_FLIGHT_TIME,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimStatus {
    Ongoing,
    Hit,
    /// The missile has used up its flight time.
    Expired,
    GroundImpact,
}

/// Minimum distance between two points moving linearly from `a0`/`b0` to
/// `a1`/`b1` over one step.
fn segment_min_distance(a0: Vec3, a1: Vec3, b0: Vec3, b1: Vec3) -> f64 {
    let d0 = b0 - a0;
    let dd = (b1 - a1) - d0;
    let denom = dd.norm_squared();
    let s = if denom > 0.0 {
        (-d0.dot(dd) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (d0 + dd * s).norm()
}

#[derive(Clone, Debug)]
pub struct Simulation {
    pub aircraft: AircraftState,
    pub missile: MissileState,
    pub geometry: RelativeGeometry,
    pub command: GuidanceCommand,
    pub smoothed_signed_los_rate: f64,
    pub step_count: usize,
    pub min_range: f64,
    pub max_overload_g: f64,
    pub status: SimStatus,
    /// Set once the missile has passed within the lethal radius.
    pub hit: bool,
    /// Keep integrating after a hit (the missile keeps guiding).
    pub continue_after_hit: bool,
    guidance: Guidance,
    smoother: LosSmoother,
    config: SimConfig,
}

impl Simulation {
    pub fn new(spec: &ScenarioSpec, config: &SimConfig) -> Result<Self> {
        Self::from_states(
            spec.aircraft_state(),
            spec.missile_state(),
            Guidance::new(spec.guidance()),
            config,
        )
    }

    pub fn from_states(
        aircraft: AircraftState,
        missile: MissileState,
        guidance: Guidance,
        config: &SimConfig,
    ) -> Result<Self> {
        config.aircraft.validate()?;
        let geometry = RelativeGeometry::compute(
            aircraft.position,
            aircraft.velocity(),
            aircraft.heading,
            missile.position,
            missile.velocity(),
            None,
            DT,
        )?;
        let mut smoother = LosSmoother::new();
        let smoothed = smoother.update(geometry.signed_los_rate);
        Ok(Self {
            aircraft,
            missile,
            min_range: geometry.range,
            geometry,
            command: GuidanceCommand::default(),
            smoothed_signed_los_rate: smoothed,
            step_count: 0,
            max_overload_g: 0.0,
            status: SimStatus::Ongoing,
            hit: false,
            continue_after_hit: false,
            guidance,
            smoother,
            config: config.clone(),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn time(&self) -> f64 {
        self.step_count as f64 * DT
    }

    /// True once the engagement is decided (hit, ground impact or missile
    /// expiry). Integration may still continue past expiry.
    pub fn is_over(&self) -> bool {
        self.status != SimStatus::Ongoing
    }

    fn halted(&self) -> bool {
        match self.status {
            SimStatus::GroundImpact => true,
            SimStatus::Hit => !self.continue_after_hit,
            _ => false,
        }
    }

    pub fn observation(&self) -> Observation {
        Observation::new(&self.aircraft, &self.missile)
    }

    pub fn reward_input(&self) -> RewardInput {
        RewardInput {
            roll: self.aircraft.roll,
            pitch: self.aircraft.pitch,
            speed: self.aircraft.speed,
            azimuth: self.geometry.azimuth,
            side: self.geometry.turn_sign(),
            range: self.geometry.range,
            smoothed_signed_los_rate: self.smoothed_signed_los_rate,
            los_rate: self.geometry.los_rate,
            missile_overload_g: self.command.overload_g,
        }
    }

    /// Advances one step: aircraft, then guidance on the new aircraft state,
    /// then the missile. Hits are detected on the closest approach within
    /// the step. After expiry the missile coasts unguided; after a ground
    /// impact (or a hit, unless `continue_after_hit`) the state is frozen.
    pub fn step(&mut self, action: ControlAction) -> Result<SimStatus> {
        if self.halted() {
            return Ok(self.status);
        }
        let aircraft = step_aircraft(&self.aircraft, action, &self.config.aircraft, DT)?;
        let guided = self.missile.elapsed < self.config.max_flight_time - 1e-9;
        let command = if guided {
            self.guidance
                .command(&self.missile, aircraft.position, aircraft.velocity(), DT)?
        } else {
            GuidanceCommand::default()
        };
        let missile = step_missile(&self.missile, command.truncated, DT)?;

        let closest = segment_min_distance(
            self.aircraft.position,
            aircraft.position,
            self.missile.position,
            missile.position,
        );
        if (missile.position - aircraft.position).norm() == 0.0 {
            return Err(Error::CoincidentPositions);
        }
        let geometry = RelativeGeometry::compute(
            aircraft.position,
            aircraft.velocity(),
            aircraft.heading,
            missile.position,
            missile.velocity(),
            Some(self.geometry.los_unit),
            DT,
        )?;
        self.smoothed_signed_los_rate = self.smoother.update(geometry.signed_los_rate);
        if !self.smoothed_signed_los_rate.is_finite() {
            return Err(Error::NonFinite("smoothed LOS rate"));
        }

        self.aircraft = aircraft;
        self.missile = missile;
        self.geometry = geometry;
        self.command = command;
        self.step_count += 1;
        self.max_overload_g = self.max_overload_g.max(command.overload_g);
        if guided {
            self.min_range = self.min_range.min(closest);
        }

        if guided && closest < self.guidance.config.lethal_radius {
            self.hit = true;
        }
        self.status = if self.hit {
            SimStatus::Hit
        } else if aircraft.ground_impact || aircraft.position.z < self.config.min_altitude {
            SimStatus::GroundImpact
        } else if missile.elapsed >= self.config.max_flight_time - 1e-9 {
            SimStatus::Expired
        } else {
            SimStatus::Ongoing
        };
        Ok(self.status)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::missile::{GuidanceConfig, GuidanceLaw};

    fn head_on(range: f64, missile_speed: f64) -> (AircraftState, MissileState) {
        let a = AircraftState::level(Vec3::new(0.0, 0.0, 5000.0), 300.0, 0.0);
        let m = MissileState::pointed_at(Vec3::new(0.0, range, 5000.0), a.position, missile_speed);
        (a, m)
    }

    fn trim(config: &SimConfig, speed: f64) -> ControlAction {
        ControlAction::new(0.0, 0.0, 0.0, config.aircraft.trim_throttle(speed))
    }

    #[test]
    fn head_on_no_op_is_hit() {
        let config = SimConfig::default();
        let (a, m) = head_on(8000.0, 1000.0);
        let mut sim = Simulation::from_states(a, m, Guidance::new(GuidanceConfig::default()), &config).unwrap();
        let act = trim(&config, 300.0);
        while !sim.is_over() {
            sim.step(act).unwrap();
        }
        assert_eq!(sim.status, SimStatus::Hit);
        assert!(sim.min_range < 10.0);
    }

    #[test]
    fn stationary_threat_expires() {
        let config = SimConfig::default();
        let (a, m) = head_on(8000.0, 0.0);
        let mut sim = Simulation::from_states(a, m, Guidance::new(GuidanceConfig::default()), &config).unwrap();
        let act = trim(&config, 300.0);
        // The aircraft flies away from the stationary missile.
        sim.aircraft.heading = std::f64::consts::PI;
        while !sim.is_over() {
            sim.step(act).unwrap();
        }
        assert_eq!(sim.status, SimStatus::Expired);
        assert_eq!(sim.step_count, TEST_MAX_STEPS);
    }

    #[test]
    fn coasts_after_expiry() {
        let config = SimConfig::default();
        let (a, m) = head_on(30_000.0, 800.0);
        let mut sim = Simulation::from_states(a, m, Guidance::new(GuidanceConfig::default()), &config).unwrap();
        sim.aircraft.heading = std::f64::consts::PI;
        let act = trim(&config, 300.0);
        for _ in 0..TRAIN_MAX_STEPS {
            sim.step(act).unwrap();
        }
        assert_eq!(sim.status, SimStatus::Expired);
        assert_eq!(sim.step_count, TRAIN_MAX_STEPS);
        assert_eq!(sim.command, GuidanceCommand::default());
    }

    #[test]
    fn deterministic() {
        let config = SimConfig::default();
        let run = || {
            let (a, m) = head_on(9000.0, 1200.0);
            let g = GuidanceConfig {
                law: GuidanceLaw::Apn,
                accel_correction: 2.0,
                ..GuidanceConfig::default()
            };
            let mut sim = Simulation::from_states(a, m, Guidance::new(g), &config).unwrap();
            let act = ControlAction::new(0.2, 0.5, 0.0, 1.0);
            let mut trace = Vec::new();
            while !sim.is_over() {
                sim.step(act).unwrap();
                trace.push(sim.missile.position);
            }
            trace
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn closest_approach_between_samples() {
        let d = segment_min_distance(
            Vec3::ZERO,
            Vec3::ZERO,
            Vec3::new(-5.0, 3.0, 0.0),
            Vec3::new(5.0, 3.0, 0.0),
        );
        assert!((d - 3.0).abs() < 1e-12);
    }
}
