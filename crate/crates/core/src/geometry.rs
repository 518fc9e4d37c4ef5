//! ENU-frame vector kinematics shared by the aircraft, the missile and the
//! reward evaluators.
//!
//! Conventions: x east, y north, z up. Headings are measured clockwise from
//! north, so a heading `psi` corresponds to the horizontal direction
//! `(sin psi, cos psi)`. All angles are radians.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upward unit vector of the world frame.
pub const UP: Vec3 = Vec3::new(0.0, 0.0, 1.0);

/// Tolerance on the norm of vectors that must be unit length.
pub const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Unit vector for a heading (clockwise from north) and a climb angle.
    pub fn from_heading_pitch(heading: f64, pitch: f64) -> Self {
        let (sp, cp) = pitch.sin_cos();
        let (sh, ch) = heading.sin_cos();
        Self::new(cp * sh, cp * ch, sp)
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn horizontal(self) -> Vec3 {
        Vec3::new(self.x, self.y, 0.0)
    }

    pub fn horizontal_norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Unit vector in the same direction, `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            Some(self * (1.0 / n))
        } else {
            None
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, rhs: Vec3) {
        *self = *self + rhs;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, rhs: Vec3) {
        *self = *self - rhs;
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, rhs: f64) -> Vec3 {
        Vec3::new(self.x * rhs, self.y * rhs, self.z * rhs)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_pi(angle: f64) -> f64 {
    // In-range values pass through untouched so that wrapping is exact
    // and odd there.
    if angle > -PI && angle <= PI {
        return angle;
    }
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Wraps an angle into [0, 2pi).
pub fn wrap_two_pi(angle: f64) -> f64 {
    let a = angle.rem_euclid(2.0 * PI);
    if a >= 2.0 * PI {
        0.0
    } else {
        a
    }
}

/// Returns true when `delta_pos` has no horizontal extent, in which case
/// [`azimuth_of`] falls back to zero.
pub fn horizontal_degenerate(delta_pos: Vec3) -> bool {
    delta_pos.horizontal_norm() == 0.0
}

/// Signed azimuth of the missile, measured from the reverse of the aircraft
/// heading; positive when the missile is on the aircraft's right. Dead ahead
/// maps to `+pi`. A purely vertical `delta_pos` yields zero and logs a warning.
pub fn azimuth_of(aircraft_heading: f64, delta_pos: Vec3) -> f64 {
    if horizontal_degenerate(delta_pos) {
        log::warn!("azimuth requested for a purely vertical line of sight; using 0");
        return 0.0;
    }
    let (sh, ch) = aircraft_heading.sin_cos();
    // Reverse-heading axis and the aircraft's right-hand axis.
    let back = -(delta_pos.x * sh + delta_pos.y * ch);
    let right = delta_pos.x * ch - delta_pos.y * sh;
    // atan2(-0, negative) is -pi; dead ahead must stay +pi.
    if right == 0.0 && back < 0.0 {
        return PI;
    }
    let az = right.atan2(back);
    if az <= -PI {
        PI
    } else {
        az
    }
}

/// Elevation of the missile above the aircraft's horizontal plane.
pub fn elevation_of(delta_pos: Vec3) -> Result<f64> {
    let r = delta_pos.norm();
    if r == 0.0 {
        return Err(Error::CoincidentPositions);
    }
    Ok((delta_pos.z / r).clamp(-1.0, 1.0).asin())
}

/// `sgn((delta_pos x aircraft_vel) . up)`: +1 when the missile is on the
/// right of the velocity vector, -1 on the left, 0 on exact collinearity.
pub fn side_sign(delta_pos: Vec3, aircraft_vel: Vec3) -> i8 {
    let s = delta_pos.cross(aircraft_vel).dot(UP);
    if s > 0.0 {
        1
    } else if s < 0.0 {
        -1
    } else {
        0
    }
}

/// [`side_sign`] as a multiplier, with the collinear case resolved to +1.
pub fn turn_sign(side: i8) -> f64 {
    if side < 0 {
        -1.0
    } else {
        1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LosRates {
    /// Magnitude of the line-of-sight angular rate.
    pub unsigned: f64,
    /// Rate signed by the rotation direction about the up axis.
    pub signed: f64,
}

fn check_unit(v: Vec3) -> Result<()> {
    let n = v.norm();
    if (n - 1.0).abs() > UNIT_TOLERANCE || !n.is_finite() {
        return Err(Error::NotUnit(n));
    }
    Ok(())
}

/// Chord-rate estimate of the LOS angular rate between two consecutive unit
/// vectors.
pub fn los_rates(prev_unit: Vec3, curr_unit: Vec3, dt: f64) -> Result<LosRates> {
    check_unit(prev_unit)?;
    check_unit(curr_unit)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidTimeStep(dt));
    }
    let unsigned = (curr_unit - prev_unit).norm() / dt;
    let turn = prev_unit.cross(curr_unit).dot(UP);
    let signed = if turn > 0.0 {
        unsigned
    } else if turn < 0.0 {
        -unsigned
    } else {
        0.0
    };
    Ok(LosRates { unsigned, signed })
}

/// First-order low-pass filter on the signed LOS rate.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LosSmoother {
    previous_smoothed: f64,
    initialized: bool,
}

impl LosSmoother {
    pub const NEW_WEIGHT: f64 = 0.25;
    pub const HISTORY_WEIGHT: f64 = 0.75;

    pub fn new() -> Self {
        Self::default()
    }

    /// Starts from a known previous output, as if it had already been seeded.
    pub fn with_previous(previous: f64) -> Self {
        Self {
            previous_smoothed: previous,
            initialized: true,
        }
    }

    pub fn previous(&self) -> Option<f64> {
        self.initialized.then_some(self.previous_smoothed)
    }

    /// Feeds one raw sample; the first sample passes through unchanged.
    pub fn update(&mut self, raw: f64) -> f64 {
        let out = if self.initialized {
            Self::NEW_WEIGHT * raw + Self::HISTORY_WEIGHT * self.previous_smoothed
        } else {
            self.initialized = true;
            raw
        };
        self.previous_smoothed = out;
        out
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

pub fn smooth_los_rate(smoother: &mut LosSmoother, raw: f64) -> f64 {
    smoother.update(raw)
}

/// Rate at which range shrinks: `-(dp . dv) / |dp|`.
pub fn closing_velocity(delta_pos: Vec3, delta_vel: Vec3) -> Result<f64> {
    let r = delta_pos.norm();
    if r == 0.0 {
        return Err(Error::CoincidentPositions);
    }
    Ok(-delta_pos.dot(delta_vel) / r)
}

/// Aircraft-centred view of the missile at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelativeGeometry {
    pub range: f64,
    pub azimuth: f64,
    pub elevation: f64,
    pub side_sign: i8,
    pub los_rate: f64,
    pub signed_los_rate: f64,
    pub closing_velocity: f64,
    /// Unit vector from aircraft to missile.
    pub los_unit: Vec3,
}

impl RelativeGeometry {
    /// Evaluates the geometry. `prev_los_unit` is the previous step's LOS
    /// unit vector; without it the LOS rates are zero.
    pub fn compute(
        aircraft_pos: Vec3,
        aircraft_vel: Vec3,
        aircraft_heading: f64,
        missile_pos: Vec3,
        missile_vel: Vec3,
        prev_los_unit: Option<Vec3>,
        dt: f64,
    ) -> Result<Self> {
        let delta_pos = missile_pos - aircraft_pos;
        let delta_vel = missile_vel - aircraft_vel;
        let range = delta_pos.norm();
        let los_unit = delta_pos.normalized().ok_or(Error::CoincidentPositions)?;
        let rates = match prev_los_unit {
            Some(prev) => los_rates(prev, los_unit, dt)?,
            None => LosRates {
                unsigned: 0.0,
                signed: 0.0,
            },
        };
        Ok(Self {
            range,
            azimuth: azimuth_of(aircraft_heading, delta_pos),
            elevation: elevation_of(delta_pos)?,
            side_sign: side_sign(delta_pos, aircraft_vel),
            los_rate: rates.unsigned,
            signed_los_rate: rates.signed,
            closing_velocity: closing_velocity(delta_pos, delta_vel)?,
            los_unit,
        })
    }

    pub fn turn_sign(&self) -> f64 {
        turn_sign(self.side_sign)
    }
}
