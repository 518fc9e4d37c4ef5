//! Point-mass fixed-wing model with attitude kinematics.
//!
//! The four normalized inputs are mapped to rate commands: aileron drives
//! roll rate, elevator drives flight-path-angle rate, bank produces a
//! coordinated-turn heading rate and rudder adds a small direct yaw rate.
//! The combined normal load is capped at `max_load_factor` by scaling the
//! turn and pitch rates together.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_pi, wrap_two_pi, Vec3};

pub const GRAVITY: f64 = 9.81;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AircraftState {
    pub position: Vec3,
    pub speed: f64,
    pub roll: f64,
    /// Flight-path angle.
    pub pitch: f64,
    /// Clockwise from north, in [0, 2pi).
    pub heading: f64,
    /// Load factor realized on the last integration step.
    pub load_factor: f64,
    /// Set once the altitude drops below zero.
    pub ground_impact: bool,
}

impl AircraftState {
    pub fn level(position: Vec3, speed: f64, heading: f64) -> Self {
        Self {
            position,
            speed,
            roll: 0.0,
            pitch: 0.0,
            heading: wrap_two_pi(heading),
            load_factor: 1.0,
            ground_impact: false,
        }
    }

    pub fn velocity(&self) -> Vec3 {
        Vec3::from_heading_pitch(self.heading, self.pitch) * self.speed
    }

    pub fn altitude(&self) -> f64 {
        self.position.z
    }

    fn is_finite(&self) -> bool {
        self.position.is_finite()
            && self.speed.is_finite()
            && self.roll.is_finite()
            && self.pitch.is_finite()
            && self.heading.is_finite()
    }
}

/// Normalized control inputs. Surfaces in [-1, 1], throttle in [0, 1].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlAction {
    pub elevator: f64,
    pub aileron: f64,
    pub rudder: f64,
    pub throttle: f64,
}

impl ControlAction {
    pub const DIM: usize = 4;

    pub fn new(elevator: f64, aileron: f64, rudder: f64, throttle: f64) -> Self {
        Self {
            elevator,
            aileron,
            rudder,
            throttle,
        }
    }

    pub fn clamped(self) -> Self {
        Self {
            elevator: self.elevator.clamp(-1.0, 1.0),
            aileron: self.aileron.clamp(-1.0, 1.0),
            rudder: self.rudder.clamp(-1.0, 1.0),
            throttle: self.throttle.clamp(0.0, 1.0),
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.elevator, self.aileron, self.rudder, self.throttle]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AircraftParams {
    /// rad/s at full aileron.
    pub max_roll_rate: f64,
    /// rad/s of flight-path-angle rate at full elevator.
    pub max_pitch_rate: f64,
    /// rad/s of direct heading rate at full rudder.
    pub max_yaw_rate: f64,
    /// g.
    pub max_load_factor: f64,
    /// N at full throttle.
    pub max_thrust: f64,
    /// kg.
    pub mass: f64,
    /// Parasitic drag coefficient, N/(m/s)^2.
    pub parasitic_drag: f64,
    /// Induced drag coefficient, N (m/s)^2 per g^2.
    pub induced_drag: f64,
    pub gravity: f64,
    pub min_speed: f64,
    pub max_speed: f64,
}

impl Default for AircraftParams {
    // The 3.14 rad/s roll rate is a control limit, not an approximation of pi.
    #[allow(clippy::approx_constant)]
    fn default() -> Self {
        // Calibrated so full-throttle level flight settles near 470 m/s and
        // a sustained 9 g pull at 300 m/s bleeds roughly 10 m/s^2.
        let max_thrust = 130_000.0;
        let induced_drag = 2.4e8;
        let top_speed: f64 = 470.0;
        let parasitic_drag = (max_thrust - induced_drag / top_speed.powi(2)) / top_speed.powi(2);
        Self {
            max_roll_rate: 3.14,
            max_pitch_rate: 0.52,
            max_yaw_rate: 0.10,
            max_load_factor: 9.0,
            max_thrust,
            mass: 12_000.0,
            parasitic_drag,
            induced_drag,
            gravity: GRAVITY,
            min_speed: 150.0,
            max_speed: 510.0,
        }
    }
}

impl AircraftParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("max_roll_rate", self.max_roll_rate),
            ("max_pitch_rate", self.max_pitch_rate),
            ("max_yaw_rate", self.max_yaw_rate),
            ("max_thrust", self.max_thrust),
            ("mass", self.mass),
            ("parasitic_drag", self.parasitic_drag),
            ("induced_drag", self.induced_drag),
            ("gravity", self.gravity),
            ("min_speed", self.min_speed),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("aircraft.{name} must be positive")));
            }
        }
        if self.max_load_factor < 1.0 {
            return Err(Error::Config("aircraft.max_load_factor must be >= 1".into()));
        }
        if self.max_speed <= self.min_speed {
            return Err(Error::Config("aircraft.max_speed must exceed min_speed".into()));
        }
        Ok(())
    }

    /// Throttle that holds `speed` in straight and level flight, clamped to
    /// [0, 1].
    pub fn trim_throttle(&self, speed: f64) -> f64 {
        let drag = self.parasitic_drag * speed * speed + self.induced_drag / (speed * speed);
        (drag / self.max_thrust).clamp(0.0, 1.0)
    }
}

/// Heading and flight-path-angle rates realized over a step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TurnRates {
    pub heading_rate: f64,
    pub pitch_rate: f64,
}

/// Load factor implied by the turn rates:
/// `sqrt((v psi' cos(theta) / g)^2 + (v theta' / g + cos(theta))^2)`.
pub fn load_factor(state: &AircraftState, rates: TurnRates, gravity: f64) -> f64 {
    let cos_pitch = state.pitch.cos();
    let lateral = state.speed * rates.heading_rate * cos_pitch / gravity;
    let normal = state.speed * rates.pitch_rate / gravity + cos_pitch;
    lateral.hypot(normal)
}

/// Scale in (0, 1] applied to both rate channels so that the load factor
/// equals `n_max`. Solves `k^2 (h^2 + w^2) + 2 k w c + c^2 = n_max^2`.
fn load_scale(lateral: f64, normal_cmd: f64, cos_pitch: f64, n_max: f64) -> f64 {
    let a = lateral * lateral + normal_cmd * normal_cmd;
    if a == 0.0 {
        return 1.0;
    }
    let b = 2.0 * normal_cmd * cos_pitch;
    let c = cos_pitch * cos_pitch - n_max * n_max;
    let disc = (b * b - 4.0 * a * c).max(0.0);
    let k = (-b + disc.sqrt()) / (2.0 * a);
    k.clamp(0.0, 1.0)
}

/// One semi-implicit Euler step. Roll is integrated first and the new bank
/// drives the turn rate; speed and attitude are updated before position.
pub fn step_aircraft(
    state: &AircraftState,
    action: ControlAction,
    params: &AircraftParams,
    dt: f64,
) -> Result<AircraftState> {
    if !state.is_finite() {
        return Err(Error::NonFinite("aircraft state"));
    }
    if !action.is_finite() {
        return Err(Error::NonFinite("control action"));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidTimeStep(dt));
    }
    let action = action.clamped();
    let g = params.gravity;

    let roll = wrap_pi(state.roll + params.max_roll_rate * action.aileron * dt);
    let cos_pitch = state.pitch.cos();
    let v = state.speed;

    let mut heading_rate = g * roll.tan() * cos_pitch / v + params.max_yaw_rate * action.rudder;
    let mut pitch_rate = params.max_pitch_rate * action.elevator;
    let lateral = v * heading_rate * cos_pitch / g;
    let normal_cmd = v * pitch_rate / g;
    let n = lateral.hypot(normal_cmd + cos_pitch);
    if n > params.max_load_factor {
        let k = load_scale(lateral, normal_cmd, cos_pitch, params.max_load_factor);
        heading_rate *= k;
        pitch_rate *= k;
    }
    let rates = TurnRates {
        heading_rate,
        pitch_rate,
    };
    let realized_load = load_factor(state, rates, g).min(params.max_load_factor);

    let pitch = (state.pitch + pitch_rate * dt).clamp(-FRAC_PI_2, FRAC_PI_2);
    let heading = wrap_two_pi(state.heading + heading_rate * dt);

    let drag = params.parasitic_drag * v * v + params.induced_drag * realized_load.powi(2) / (v * v);
    let accel = (params.max_thrust * action.throttle - drag) / params.mass - g * pitch.sin();
    let speed = (v + accel * dt).clamp(params.min_speed, params.max_speed);

    let position = state.position + Vec3::from_heading_pitch(heading, pitch) * (speed * dt);
    let next = AircraftState {
        position,
        speed,
        roll,
        pitch,
        heading,
        load_factor: realized_load,
        ground_impact: state.ground_impact || position.z < 0.0,
    };
    if !next.is_finite() {
        return Err(Error::NonFinite("aircraft state"));
    }
    Ok(next)
}

/// Roll wrapped into (-pi, pi] expressed in degrees, for reporting.
pub fn roll_degrees(state: &AircraftState) -> f64 {
    wrap_pi(state.roll) * 180.0 / PI
}
