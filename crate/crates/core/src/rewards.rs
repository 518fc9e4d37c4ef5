//! Per-step reward evaluators for the five training tasks.
//!
//! Angles are radians throughout, including the decay scales of the
//! exponential terms. Constraint penalties fire on strict inequalities.

use serde::{Deserialize, Serialize};

const DEG: f64 = std::f64::consts::PI / 180.0;

/// Per-term reward values for one step (or accumulated over an episode).
/// Terms a task does not use stay at zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub roll: f64,
    pub pitch: f64,
    pub azimuth: f64,
    pub velocity: f64,
    pub los: f64,
    pub overload: f64,
    pub constraint_roll: f64,
    pub constraint_pitch: f64,
    pub constraint_azimuth: f64,
    pub constraint_velocity: f64,
    pub distance_terminal: f64,
}

impl RewardBreakdown {
    pub const TERM_NAMES: [&'static str; 11] = [
        "roll",
        "pitch",
        "azimuth",
        "velocity",
        "los",
        "overload",
        "constraint_roll",
        "constraint_pitch",
        "constraint_azimuth",
        "constraint_velocity",
        "distance_terminal",
    ];

    pub fn terms(&self) -> [f64; 11] {
        [
            self.roll,
            self.pitch,
            self.azimuth,
            self.velocity,
            self.los,
            self.overload,
            self.constraint_roll,
            self.constraint_pitch,
            self.constraint_azimuth,
            self.constraint_velocity,
            self.distance_terminal,
        ]
    }

    pub fn total(&self) -> f64 {
        self.terms().iter().sum()
    }

    pub fn accumulate(&mut self, other: &RewardBreakdown) {
        self.roll += other.roll;
        self.pitch += other.pitch;
        self.azimuth += other.azimuth;
        self.velocity += other.velocity;
        self.los += other.los;
        self.overload += other.overload;
        self.constraint_roll += other.constraint_roll;
        self.constraint_pitch += other.constraint_pitch;
        self.constraint_azimuth += other.constraint_azimuth;
        self.constraint_velocity += other.constraint_velocity;
        self.distance_terminal += other.distance_terminal;
    }

    pub fn scaled(&self, k: f64) -> RewardBreakdown {
        RewardBreakdown {
            roll: self.roll * k,
            pitch: self.pitch * k,
            azimuth: self.azimuth * k,
            velocity: self.velocity * k,
            los: self.los * k,
            overload: self.overload * k,
            constraint_roll: self.constraint_roll * k,
            constraint_pitch: self.constraint_pitch * k,
            constraint_azimuth: self.constraint_azimuth * k,
            constraint_velocity: self.constraint_velocity * k,
            distance_terminal: self.distance_terminal * k,
        }
    }
}

/// Quantities the evaluators read from the current step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RewardInput {
    pub roll: f64,
    pub pitch: f64,
    pub speed: f64,
    pub azimuth: f64,
    /// Turn direction multiplier, +1 or -1.
    pub side: f64,
    pub range: f64,
    pub smoothed_signed_los_rate: f64,
    pub los_rate: f64,
    pub missile_overload_g: f64,
}

fn decay(weight: f64, error: f64, tau: f64) -> f64 {
    weight * (-error.abs() / tau).exp()
}

fn penalty_if(cond: bool, penalty: f64) -> f64 {
    if cond {
        penalty
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SteepTurnParams {
    pub roll_weight: f64,
    pub roll_tau: f64,
    pub target_roll: f64,
    pub pitch_weight: f64,
    pub pitch_tau: f64,
    pub target_pitch: f64,
}

impl Default for SteepTurnParams {
    fn default() -> Self {
        Self {
            roll_weight: 0.5,
            roll_tau: 0.2,
            target_roll: 85.0 * DEG,
            pitch_weight: 0.5,
            pitch_tau: 0.2,
            target_pitch: 0.0,
        }
    }
}

pub fn reward_steep_turn(p: &SteepTurnParams, input: &RewardInput) -> RewardBreakdown {
    RewardBreakdown {
        roll: decay(p.roll_weight, input.roll - input.side * p.target_roll, p.roll_tau),
        pitch: decay(p.pitch_weight, input.pitch - p.target_pitch, p.pitch_tau),
        ..Default::default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShortDistanceParams {
    pub turn: SteepTurnParams,
    pub los_weight: f64,
    pub los_tau: f64,
}

impl Default for ShortDistanceParams {
    fn default() -> Self {
        Self {
            turn: SteepTurnParams::default(),
            los_weight: 0.6,
            los_tau: 0.1,
        }
    }
}

pub fn reward_short_distance(p: &ShortDistanceParams, input: &RewardInput) -> RewardBreakdown {
    let mut r = reward_steep_turn(&p.turn, input);
    r.los = p.los_weight * (input.side * input.smoothed_signed_los_rate / p.los_tau).tanh();
    r
}

/// Acceptable speed band shared by the azimuth tasks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedBand {
    pub min: f64,
    pub max: f64,
}

impl Default for SpeedBand {
    fn default() -> Self {
        Self { min: 240.0, max: 510.0 }
    }
}

impl SpeedBand {
    fn violated(&self, v: f64) -> bool {
        v < self.min || v > self.max
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmallAzimuthParams {
    pub roll_weight: f64,
    pub roll_tau: f64,
    pub pitch_weight: f64,
    pub pitch_tau: f64,
    pub target_pitch: f64,
    pub azimuth_weight: f64,
    pub azimuth_tau: f64,
    pub velocity_weight: f64,
    pub velocity_ref: f64,
    pub velocity_tau: f64,
    pub max_roll: f64,
    pub max_pitch: f64,
    pub max_azimuth: f64,
    pub speed_band: SpeedBand,
    pub penalty: f64,
}

impl Default for SmallAzimuthParams {
    fn default() -> Self {
        Self {
            roll_weight: 0.5,
            roll_tau: 0.2,
            pitch_weight: 0.5,
            pitch_tau: 0.2,
            target_pitch: 0.0,
            azimuth_weight: 1.0,
            azimuth_tau: 0.2,
            velocity_weight: 0.2,
            velocity_ref: 350.0,
            velocity_tau: 80.0,
            max_roll: 135.0 * DEG,
            max_pitch: 22.5 * DEG,
            max_azimuth: 30.0 * DEG,
            speed_band: SpeedBand::default(),
            penalty: -20.0,
        }
    }
}

pub fn reward_small_azimuth(p: &SmallAzimuthParams, input: &RewardInput) -> RewardBreakdown {
    RewardBreakdown {
        roll: decay(p.roll_weight, input.roll, p.roll_tau),
        pitch: decay(p.pitch_weight, input.pitch - p.target_pitch, p.pitch_tau),
        azimuth: decay(p.azimuth_weight, input.azimuth, p.azimuth_tau),
        velocity: p.velocity_weight * ((input.speed - p.velocity_ref) / p.velocity_tau).tanh(),
        constraint_roll: penalty_if(input.roll.abs() > p.max_roll, p.penalty),
        constraint_pitch: penalty_if(input.pitch.abs() > p.max_pitch, p.penalty),
        constraint_azimuth: penalty_if(input.azimuth.abs() > p.max_azimuth, p.penalty),
        constraint_velocity: penalty_if(p.speed_band.violated(input.speed), p.penalty),
        ..Default::default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LargeAzimuthParams {
    pub critical_distance: f64,
    pub far_roll_weight: f64,
    pub far_roll_tau: f64,
    pub target_roll: f64,
    /// Roll bound for the close branch.
    pub close_max_roll: f64,
    pub close_penalty: f64,
    pub close_reward: f64,
    pub pitch_weight: f64,
    pub pitch_tau: f64,
    pub target_pitch: f64,
    pub velocity_weight: f64,
    pub velocity_ref: f64,
    pub velocity_tau: f64,
    pub max_roll: f64,
    pub max_pitch: f64,
    pub speed_band: SpeedBand,
    pub penalty: f64,
}

impl Default for LargeAzimuthParams {
    fn default() -> Self {
        Self {
            critical_distance: 8500.0,
            far_roll_weight: 0.5,
            far_roll_tau: 0.2,
            target_roll: 85.0 * DEG,
            close_max_roll: 30.0 * DEG,
            close_penalty: -20.0,
            close_reward: 0.5,
            pitch_weight: 0.5,
            pitch_tau: 0.2,
            target_pitch: 0.0,
            velocity_weight: 0.3,
            velocity_ref: 350.0,
            velocity_tau: 60.0,
            max_roll: 135.0 * DEG,
            max_pitch: 22.5 * DEG,
            speed_band: SpeedBand::default(),
            penalty: -20.0,
        }
    }
}

pub fn reward_large_azimuth(p: &LargeAzimuthParams, input: &RewardInput) -> RewardBreakdown {
    let roll = if input.range > p.critical_distance {
        decay(
            p.far_roll_weight,
            input.roll - input.side * p.target_roll,
            p.far_roll_tau,
        )
    } else if input.roll.abs() > p.close_max_roll {
        p.close_penalty
    } else {
        p.close_reward
    };
    RewardBreakdown {
        roll,
        pitch: decay(p.pitch_weight, input.pitch - p.target_pitch, p.pitch_tau),
        velocity: p.velocity_weight * ((input.speed - p.velocity_ref) / p.velocity_tau).tanh(),
        constraint_roll: penalty_if(input.roll.abs() > p.max_roll, p.penalty),
        constraint_pitch: penalty_if(input.pitch.abs() > p.max_pitch, p.penalty),
        constraint_velocity: penalty_if(p.speed_band.violated(input.speed), p.penalty),
        ..Default::default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineParams {
    pub los_weight: f64,
    /// Floor applied to |LOS rate| before the logarithm.
    pub los_floor: f64,
    pub overload_weight: f64,
    pub pitch_weight: f64,
    pub pitch_tau: f64,
    pub max_roll: f64,
    pub roll_penalty: f64,
    pub lethal_radius: f64,
    pub hit_weight: f64,
    pub miss_weight: f64,
    pub miss_bonus: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            los_weight: 2.4,
            los_floor: 1e-6,
            overload_weight: -0.01,
            pitch_weight: 0.5,
            pitch_tau: 0.2,
            max_roll: 135.0 * DEG,
            roll_penalty: -20.0,
            lethal_radius: 10.0,
            hit_weight: -200.0,
            miss_weight: 400.0,
            miss_bonus: 4000.0,
        }
    }
}

/// Per-step part of the baseline reward.
pub fn reward_baseline_step(p: &BaselineParams, input: &RewardInput) -> RewardBreakdown {
    RewardBreakdown {
        los: p.los_weight * input.los_rate.abs().max(p.los_floor).ln(),
        overload: p.overload_weight * input.missile_overload_g.powi(2),
        pitch: decay(p.pitch_weight, input.pitch, p.pitch_tau),
        constraint_roll: penalty_if(input.roll.abs() > p.max_roll, p.roll_penalty),
        ..Default::default()
    }
}

/// Terminal part of the baseline reward, evaluated once at episode end.
pub fn reward_baseline_terminal(p: &BaselineParams, final_range: f64, min_range: f64) -> RewardBreakdown {
    let margin = min_range - p.lethal_radius;
    let distance_terminal = if final_range < p.lethal_radius {
        p.hit_weight * margin * margin
    } else {
        p.miss_weight * margin + p.miss_bonus
    };
    RewardBreakdown {
        distance_terminal,
        ..Default::default()
    }
}

/// Summary of an episode consumed by the baseline terminal reward.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeSummary {
    pub final_range: f64,
    pub min_range: f64,
}

/// Baseline reward for a step; the terminal term is added when `summary`
/// is given (the last step of an episode).
pub fn reward_baseline(p: &BaselineParams, summary: Option<&EpisodeSummary>, input: &RewardInput) -> RewardBreakdown {
    let mut r = reward_baseline_step(p, input);
    if let Some(s) = summary {
        r.distance_terminal = reward_baseline_terminal(p, s.final_range, s.min_range).distance_terminal;
    }
    r
}
