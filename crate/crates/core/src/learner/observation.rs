//! Normalized 12-dimensional policy input.

use std::f64::consts::PI;

use crate::aircraft::AircraftState;
use crate::missile::MissileState;

pub const OBS_DIM: usize = 12;

const AIRCRAFT_SPEED_BOUND: f64 = 470.0;
const RELATIVE_POSITION_BOUND: f64 = 15_000.0;
const RELATIVE_SPEED_BOUND: f64 = 1_870.0;

/// Lower and upper bound of each component, in the order
/// velocity (3), pitch, roll, heading, relative position (3), relative velocity (3).
pub const OBS_BOUNDS: [(f64, f64); OBS_DIM] = [
    (-AIRCRAFT_SPEED_BOUND, AIRCRAFT_SPEED_BOUND),
    (-AIRCRAFT_SPEED_BOUND, AIRCRAFT_SPEED_BOUND),
    (-AIRCRAFT_SPEED_BOUND, AIRCRAFT_SPEED_BOUND),
    (-PI / 2.0, PI / 2.0),
    (-PI, PI),
    (0.0, 2.0 * PI),
    (-RELATIVE_POSITION_BOUND, RELATIVE_POSITION_BOUND),
    (-RELATIVE_POSITION_BOUND, RELATIVE_POSITION_BOUND),
    (-RELATIVE_POSITION_BOUND, RELATIVE_POSITION_BOUND),
    (-RELATIVE_SPEED_BOUND, RELATIVE_SPEED_BOUND),
    (-RELATIVE_SPEED_BOUND, RELATIVE_SPEED_BOUND),
    (-RELATIVE_SPEED_BOUND, RELATIVE_SPEED_BOUND),
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    /// Raw (unscaled) state vector.
    pub fn raw(aircraft: &AircraftState, missile: &MissileState) -> [f64; OBS_DIM] {
        let v = aircraft.velocity();
        let dp = missile.position - aircraft.position;
        let dv = missile.velocity() - v;
        [
            v.x,
            v.y,
            v.z,
            aircraft.pitch,
            aircraft.roll,
            aircraft.heading,
            dp.x,
            dp.y,
            dp.z,
            dv.x,
            dv.y,
            dv.z,
        ]
    }

    pub fn new(aircraft: &AircraftState, missile: &MissileState) -> Self {
        Self::from_raw(&Self::raw(aircraft, missile))
    }

    /// Clamps every component into its bound and maps it affinely onto [-1, 1].
    pub fn from_raw(raw: &[f64; OBS_DIM]) -> Self {
        let mut out = [0.0; OBS_DIM];
        for (i, (&x, &(lo, hi))) in raw.iter().zip(OBS_BOUNDS.iter()).enumerate() {
            out[i] = scale(x.clamp(lo, hi), lo, hi);
        }
        Observation(out)
    }

    pub fn to_raw(&self) -> [f64; OBS_DIM] {
        let mut out = [0.0; OBS_DIM];
        for (i, (&x, &(lo, hi))) in self.0.iter().zip(OBS_BOUNDS.iter()).enumerate() {
            out[i] = unscale(x, lo, hi);
        }
        out
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn scale(x: f64, lo: f64, hi: f64) -> f64 {
    2.0 * (x - lo) / (hi - lo) - 1.0
}

fn unscale(s: f64, lo: f64, hi: f64) -> f64 {
    lo + (s + 1.0) * 0.5 * (hi - lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use proptest::prelude::*;

    #[test]
    fn relative_position_is_truncated() {
        let a = AircraftState::level(Vec3::new(0.0, 0.0, 5097.0), 300.0, 0.0);
        let m = MissileState::pointed_at(Vec3::new(0.0, -21_000.0, 5097.0), a.position, 1000.0);
        let obs = Observation::new(&a, &m);
        assert_eq!(obs.0[7], -1.0);
        assert!(obs.0.iter().all(|x| (-1.0..=1.0).contains(x)));
    }

    proptest! {
        #[test]
        fn scaling_round_trips_inside_bounds(u in proptest::collection::vec(0.0f64..=1.0, OBS_DIM)) {
            let mut raw = [0.0; OBS_DIM];
            for i in 0..OBS_DIM {
                let (lo, hi) = OBS_BOUNDS[i];
                raw[i] = lo + u[i] * (hi - lo);
            }
            let back = Observation::from_raw(&raw).to_raw();
            for i in 0..OBS_DIM {
                let (lo, hi) = OBS_BOUNDS[i];
                prop_assert!((back[i] - raw[i]).abs() <= 1e-12 * (hi - lo).max(1.0));
            }
        }
    }
}
