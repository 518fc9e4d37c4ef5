//! Constant-speed missile with per-channel PN/APN guidance.
//!
//! Guidance runs in two channels: the horizontal plane, and the vertical
//! plane containing the line of sight. Each channel uses a signed chord
//! rate of its in-plane LOS angle. Horizontal rates are positive clockwise
//! (the heading convention) and vertical rates positive upward, so the
//! commanded accelerations map directly onto heading and pitch rates.

use serde::{Deserialize, Serialize};

use crate::aircraft::GRAVITY;
use crate::error::{Error, Result};
use crate::geometry::{closing_velocity, wrap_pi, wrap_two_pi, Vec3};

pub const LETHAL_RADIUS: f64 = 10.0;
pub const MAX_FLIGHT_TIME: f64 = 25.0;
/// Floor on `cos(pitch)` in the heading-rate equation.
pub const MIN_COS_PITCH: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissileState {
    pub position: Vec3,
    pub speed: f64,
    pub heading: f64,
    pub pitch: f64,
    pub elapsed: f64,
}

impl MissileState {
    pub fn velocity(&self) -> Vec3 {
        Vec3::from_heading_pitch(self.heading, self.pitch) * self.speed
    }

    /// Missile at `position` flying straight at `target`.
    pub fn pointed_at(position: Vec3, target: Vec3, speed: f64) -> Self {
        let d = target - position;
        Self {
            position,
            speed,
            heading: wrap_two_pi(d.x.atan2(d.y)),
            pitch: d.z.atan2(d.horizontal_norm()),
            elapsed: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuidanceLaw {
    #[default]
    Pn,
    Apn,
}

impl std::str::FromStr for GuidanceLaw {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pn" => Ok(GuidanceLaw::Pn),
            "apn" => Ok(GuidanceLaw::Apn),
            other => Err(Error::Config(format!("unknown guidance law {other:?}"))),
        }
    }
}

impl std::fmt::Display for GuidanceLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GuidanceLaw::Pn => "pn",
            GuidanceLaw::Apn => "apn",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuidanceConfig {
    pub law: GuidanceLaw,
    pub nav_coefficient: f64,
    /// APN target-acceleration gain; ignored under PN.
    pub accel_correction: f64,
    pub max_overload_g: f64,
    pub lethal_radius: f64,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            law: GuidanceLaw::Pn,
            nav_coefficient: 4.0,
            accel_correction: 0.0,
            max_overload_g: 45.0,
            lethal_radius: LETHAL_RADIUS,
        }
    }
}

/// Pair of channel quantities (LOS rates, accelerations).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Channels {
    pub horizontal: f64,
    pub vertical: f64,
}

impl Channels {
    pub fn new(horizontal: f64, vertical: f64) -> Self {
        Self { horizontal, vertical }
    }

    pub fn magnitude(&self) -> f64 {
        self.horizontal.hypot(self.vertical)
    }
}

pub fn pn_channel_accels(los_rates: Channels, nav_coefficient: f64, closing_velocity: f64) -> Channels {
    let k = nav_coefficient * closing_velocity;
    Channels::new(k * los_rates.horizontal, k * los_rates.vertical)
}

pub fn apn_channel_accels(
    los_rates: Channels,
    nav_coefficient: f64,
    accel_correction: f64,
    closing_velocity: f64,
    aircraft_accel_perp: Channels,
) -> Channels {
    let pn = pn_channel_accels(los_rates, nav_coefficient, closing_velocity);
    Channels::new(
        pn.horizontal + accel_correction * aircraft_accel_perp.horizontal,
        pn.vertical + accel_correction * aircraft_accel_perp.vertical,
    )
}

/// Scales both channels down together when the command exceeds the cap.
pub fn truncate_overload(accel: Channels, max_overload_g: f64) -> Channels {
    let n = accel.magnitude() / GRAVITY;
    if n > max_overload_g {
        let k = max_overload_g / n;
        Channels::new(accel.horizontal * k, accel.vertical * k)
    } else {
        accel
    }
}

pub fn step_missile(state: &MissileState, accel: Channels, dt: f64) -> Result<MissileState> {
    if !(accel.horizontal.is_finite() && accel.vertical.is_finite()) {
        return Err(Error::NonFinite("missile acceleration"));
    }
    if !(state.position.is_finite() && state.heading.is_finite() && state.pitch.is_finite()) {
        return Err(Error::NonFinite("missile state"));
    }
    let v = state.speed;
    let (heading_rate, pitch_rate) = if v > 0.0 {
        let cos_pitch = state.pitch.cos().max(MIN_COS_PITCH);
        (accel.horizontal / (v * cos_pitch), accel.vertical / v)
    } else {
        (0.0, 0.0)
    };
    let heading = wrap_two_pi(state.heading + heading_rate * dt);
    let pitch = wrap_pi(state.pitch + pitch_rate * dt).clamp(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2);
    let position = state.position + Vec3::from_heading_pitch(heading, pitch) * (v * dt);
    Ok(MissileState {
        position,
        speed: v,
        heading,
        pitch,
        elapsed: state.elapsed + dt,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Ongoing,
    Hit,
    Expired,
}

pub fn check_outcome(aircraft_pos: Vec3, missile: &MissileState, lethal_radius: f64, max_flight_time: f64) -> Outcome {
    let range = (missile.position - aircraft_pos).norm();
    if range < lethal_radius {
        Outcome::Hit
    } else if missile.elapsed >= max_flight_time - 1e-9 {
        Outcome::Expired
    } else {
        Outcome::Ongoing
    }
}

/// Horizontal LOS angle (clockwise from north) and vertical LOS angle of the
/// missile-to-target vector.
fn los_angles(r: Vec3) -> (Vec3, f64) {
    let h = r.horizontal_norm();
    let unit_h = if h > 0.0 {
        Vec3::new(r.x / h, r.y / h, 0.0)
    } else {
        Vec3::ZERO
    };
    (unit_h, r.z.atan2(h))
}

/// Per-channel signed chord rates between two consecutive LOS samples.
pub fn channel_los_rates(prev: Vec3, curr: Vec3, dt: f64) -> Channels {
    let (uh0, g0) = los_angles(prev);
    let (uh1, g1) = los_angles(curr);
    let chord_h = (uh1 - uh0).norm();
    // cross.z > 0 is counter-clockwise seen from above.
    let cross_z = uh0.x * uh1.y - uh0.y * uh1.x;
    let horizontal = if cross_z > 0.0 {
        -chord_h / dt
    } else if cross_z < 0.0 {
        chord_h / dt
    } else {
        0.0
    };
    let dg = g1 - g0;
    let vertical = (2.0 * (0.5 * dg).sin()) / dt;
    Channels::new(horizontal, vertical)
}

/// Components of `a` perpendicular to the LOS `r`, in the same channel frame
/// as [`channel_los_rates`].
pub fn perpendicular_channels(r: Vec3, a: Vec3) -> Channels {
    let (uh, gamma) = los_angles(r);
    // Clockwise-positive horizontal normal.
    let perp_h = Vec3::new(uh.y, -uh.x, 0.0);
    let (sg, cg) = gamma.sin_cos();
    let perp_v = Vec3::new(-sg * uh.x, -sg * uh.y, cg);
    Channels::new(a.dot(perp_h), a.dot(perp_v))
}

/// Acceleration command issued on one guidance step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GuidanceCommand {
    pub raw: Channels,
    pub truncated: Channels,
    pub los_rates: Channels,
    pub closing_velocity: f64,
    /// Realized load factor in g.
    pub overload_g: f64,
}

/// Discrete-time seeker and autopilot. Holds the previous LOS sample and the
/// previous target velocity (for the APN acceleration estimate).
#[derive(Clone, Debug, PartialEq)]
pub struct Guidance {
    pub config: GuidanceConfig,
    prev_los: Option<Vec3>,
    prev_target_vel: Option<Vec3>,
}

impl Guidance {
    pub fn new(config: GuidanceConfig) -> Self {
        Self {
            config,
            prev_los: None,
            prev_target_vel: None,
        }
    }

    /// Computes the truncated command. On the first call there is no LOS
    /// history and the command is zero.
    pub fn command(
        &mut self,
        missile: &MissileState,
        target_pos: Vec3,
        target_vel: Vec3,
        dt: f64,
    ) -> Result<GuidanceCommand> {
        let r = target_pos - missile.position;
        if !(r.is_finite() && target_vel.is_finite()) {
            return Err(Error::NonFinite("guidance input"));
        }
        let vc = if r.norm() > 0.0 {
            // Relative state of the missile with respect to the target.
            closing_velocity(-r, missile.velocity() - target_vel)?
        } else {
            0.0
        };
        let los_rates = match self.prev_los {
            Some(prev) => channel_los_rates(prev, r, dt),
            None => Channels::default(),
        };
        let raw = match self.config.law {
            GuidanceLaw::Pn => pn_channel_accels(los_rates, self.config.nav_coefficient, vc),
            GuidanceLaw::Apn => {
                let accel = match self.prev_target_vel {
                    Some(prev) => (target_vel - prev) * (1.0 / dt),
                    None => Vec3::ZERO,
                };
                apn_channel_accels(
                    los_rates,
                    self.config.nav_coefficient,
                    self.config.accel_correction,
                    vc,
                    perpendicular_channels(r, accel),
                )
            }
        };
        let truncated = truncate_overload(raw, self.config.max_overload_g);
        self.prev_los = Some(r);
        self.prev_target_vel = Some(target_vel);
        Ok(GuidanceCommand {
            raw,
            truncated,
            los_rates,
            closing_velocity: vc,
            overload_g: truncated.magnitude() / GRAVITY,
        })
    }
}
