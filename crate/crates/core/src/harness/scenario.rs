//! Scenario bounds, curriculum weighting and initial-state construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aircraft::AircraftState;
use crate::error::{Error, Result};
use crate::geometry::{Vec3, UP};
use crate::missile::{GuidanceConfig, GuidanceLaw, MissileState, LETHAL_RADIUS};

const DEG: f64 = std::f64::consts::PI / 180.0;

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.hi > self.lo {
            rng.gen_range(self.lo..self.hi)
        } else {
            self.lo
        }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Splits into consecutive sub-ranges of width `step`; the last one is
    /// truncated at `hi`.
    pub fn partition(&self, step: f64) -> Vec<Range> {
        let mut out = Vec::new();
        let mut lo = self.lo;
        while lo < self.hi - 1e-9 {
            let hi = (lo + step).min(self.hi);
            out.push(Range::new(lo, hi));
            lo = hi;
        }
        if out.is_empty() {
            out.push(*self);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioBounds {
    pub aircraft_altitude: Range,
    pub aircraft_speed: Range,
    pub aircraft_heading: Range,
    pub missile_azimuth: Range,
    pub missile_elevation: Range,
    pub range: Range,
    pub missile_speed: Range,
    pub max_overload_g: Range,
    pub nav_coefficient: Range,
    /// APN gain as a fraction of the navigation coefficient.
    pub accel_correction_ratio: Range,
    pub law: GuidanceLaw,
}

impl Default for ScenarioBounds {
    fn default() -> Self {
        Self {
            aircraft_altitude: Range::new(3000.0, 9000.0),
            aircraft_speed: Range::new(280.0, 470.0),
            aircraft_heading: Range::new(0.0, 360.0 * DEG),
            missile_azimuth: Range::new(-180.0 * DEG, 180.0 * DEG),
            missile_elevation: Range::new(-15.0 * DEG, 15.0 * DEG),
            range: Range::new(5000.0, 15000.0),
            missile_speed: Range::new(800.0, 1400.0),
            max_overload_g: Range::new(40.0, 50.0),
            nav_coefficient: Range::new(3.0, 5.0),
            accel_correction_ratio: Range::new(0.5, 1.0),
            law: GuidanceLaw::Pn,
        }
    }
}

impl ScenarioBounds {
    /// Bounds used when training the steep-turn and short-distance policies.
    pub fn short_distance_training() -> Self {
        Self {
            range: Range::new(5000.0, 12000.0),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("aircraft_altitude", self.aircraft_altitude),
            ("aircraft_speed", self.aircraft_speed),
            ("aircraft_heading", self.aircraft_heading),
            ("missile_azimuth", self.missile_azimuth),
            ("missile_elevation", self.missile_elevation),
            ("range", self.range),
            ("missile_speed", self.missile_speed),
            ("max_overload_g", self.max_overload_g),
            ("nav_coefficient", self.nav_coefficient),
            ("accel_correction_ratio", self.accel_correction_ratio),
        ];
        for (name, r) in all {
            if !(r.lo.is_finite() && r.hi.is_finite() && r.lo <= r.hi) {
                return Err(Error::Config(format!("bounds.{name}: lo must not exceed hi")));
            }
        }
        if self.range.lo <= LETHAL_RADIUS {
            return Err(Error::Config("bounds.range must start beyond the lethal radius".into()));
        }
        Ok(())
    }
}

/// Weighted list of sub-intervals: pick one with probability proportional
/// to its weight, then draw uniformly inside it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalWeights {
    pub intervals: Vec<(Range, f64)>,
}

impl IntervalWeights {
    pub fn new(intervals: Vec<(Range, f64)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::Config("interval weights must not be empty".into()));
        }
        if intervals.iter().any(|(_, w)| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::Config("interval weights must be positive".into()));
        }
        Ok(Self { intervals })
    }

    pub fn pick<R: Rng>(&self, rng: &mut R) -> usize {
        let total: f64 = self.intervals.iter().map(|(_, w)| w).sum();
        let mut u = rng.gen::<f64>() * total;
        for (i, (_, w)) in self.intervals.iter().enumerate() {
            if u < *w {
                return i;
            }
            u -= w;
        }
        self.intervals.len() - 1
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let i = self.pick(rng);
        self.intervals[i].0.sample(rng)
    }
}

/// Optional curriculum weighting per scenario dimension.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CurriculumWeights {
    pub aircraft_speed: Option<IntervalWeights>,
    pub range: Option<IntervalWeights>,
    pub missile_azimuth: Option<IntervalWeights>,
}

fn weighted(ranges: &[(f64, f64)], weights: &[f64], scale: f64) -> IntervalWeights {
    IntervalWeights {
        intervals: ranges
            .iter()
            .zip(weights)
            .map(|(&(lo, hi), &w)| (Range::new(lo * scale, hi * scale), w))
            .collect(),
    }
}

impl CurriculumWeights {
    fn speed_and_range() -> Self {
        Self {
            aircraft_speed: Some(weighted(
                &[
                    (280.0, 320.0),
                    (320.0, 360.0),
                    (360.0, 400.0),
                    (400.0, 440.0),
                    (440.0, 470.0),
                ],
                &[16.0, 8.0, 4.0, 2.0, 1.0],
                1.0,
            )),
            range: Some(weighted(
                &[
                    (5000.0, 7000.0),
                    (7000.0, 9000.0),
                    (9000.0, 11000.0),
                    (11000.0, 13000.0),
                    (13000.0, 15000.0),
                ],
                &[1.0, 2.0, 4.0, 8.0, 16.0],
                1.0,
            )),
            missile_azimuth: None,
        }
    }

    /// Weighting used for the small-azimuth policy.
    pub fn small_azimuth() -> Self {
        Self::speed_and_range()
    }

    /// Weighting used for the large-azimuth policy, including the azimuth
    /// sectors beyond 30 deg.
    pub fn large_azimuth() -> Self {
        Self {
            missile_azimuth: Some(weighted(
                &[
                    (30.0, 60.0),
                    (60.0, 90.0),
                    (90.0, 120.0),
                    (120.0, 150.0),
                    (150.0, 180.0),
                    (-180.0, -150.0),
                    (-150.0, -120.0),
                    (-120.0, -90.0),
                    (-90.0, -60.0),
                    (-60.0, -30.0),
                ],
                &[1.0, 2.0, 4.0, 8.0, 16.0, 16.0, 8.0, 4.0, 2.0, 1.0],
                DEG,
            )),
            ..Self::speed_and_range()
        }
    }
}

/// Fully specified initial condition of one engagement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub aircraft_altitude: f64,
    pub aircraft_speed: f64,
    pub aircraft_heading: f64,
    pub aircraft_roll: f64,
    pub missile_azimuth: f64,
    pub missile_elevation: f64,
    pub range: f64,
    pub missile_speed: f64,
    pub max_overload_g: f64,
    pub law: GuidanceLaw,
    pub nav_coefficient: f64,
    pub accel_correction: f64,
    pub seed: u64,
}

fn pick<R: Rng>(rng: &mut R, range: &Range, weights: Option<&IntervalWeights>) -> f64 {
    match weights {
        Some(w) => w.sample(rng),
        None => range.sample(rng),
    }
}

/// Draws a scenario. Every dimension consumes randomness in a fixed order,
/// so the same seed and bounds always give the same scenario.
pub fn sample_scenario(seed: u64, bounds: &ScenarioBounds, weights: Option<&CurriculumWeights>) -> ScenarioSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = weights.cloned().unwrap_or_default();
    let aircraft_altitude = bounds.aircraft_altitude.sample(&mut rng);
    let aircraft_speed = pick(&mut rng, &bounds.aircraft_speed, w.aircraft_speed.as_ref());
    let aircraft_heading = bounds.aircraft_heading.sample(&mut rng);
    let missile_azimuth = pick(&mut rng, &bounds.missile_azimuth, w.missile_azimuth.as_ref());
    let missile_elevation = bounds.missile_elevation.sample(&mut rng);
    let range = pick(&mut rng, &bounds.range, w.range.as_ref());
    let missile_speed = bounds.missile_speed.sample(&mut rng);
    let max_overload_g = bounds.max_overload_g.sample(&mut rng);
    let nav_coefficient = bounds.nav_coefficient.sample(&mut rng);
    let ratio = bounds.accel_correction_ratio.sample(&mut rng);
    ScenarioSpec {
        aircraft_altitude,
        aircraft_speed,
        aircraft_heading,
        aircraft_roll: 0.0,
        missile_azimuth,
        missile_elevation,
        range,
        missile_speed,
        max_overload_g,
        law: bounds.law,
        nav_coefficient,
        accel_correction: match bounds.law {
            GuidanceLaw::Pn => 0.0,
            GuidanceLaw::Apn => ratio * nav_coefficient,
        },
        seed,
    }
}

impl ScenarioSpec {
    /// Fixed tail-chase test for the steep-turn policy: a slow missile from
    /// 21 km so the aircraft can complete a full circle.
    pub fn steep_turn_validation() -> ScenarioSpec {
        ScenarioSpec {
            aircraft_altitude: 5097.0,
            aircraft_speed: 280.0,
            aircraft_heading: 0.0,
            aircraft_roll: 0.0,
            missile_azimuth: 0.0,
            missile_elevation: -6.27 * DEG,
            range: 21000.0,
            missile_speed: 800.0,
            max_overload_g: 42.97,
            law: GuidanceLaw::Pn,
            nav_coefficient: 3.82,
            accel_correction: 0.0,
            seed: 0,
        }
    }

    /// Same engagement flown against the other guidance law. The APN gain
    /// is re-derived from the scenario seed so paired PN/APN runs share
    /// every other dimension.
    pub fn with_law(&self, law: GuidanceLaw, bounds: &ScenarioBounds) -> ScenarioSpec {
        let mut out = *self;
        out.law = law;
        out.accel_correction = match law {
            GuidanceLaw::Pn => 0.0,
            GuidanceLaw::Apn => {
                let mut b = bounds.clone();
                b.law = GuidanceLaw::Apn;
                let ratio = sample_scenario(self.seed, &b, None).accel_correction
                    / sample_scenario(self.seed, &b, None).nav_coefficient;
                ratio * self.nav_coefficient
            }
        };
        out
    }

    pub fn aircraft_state(&self) -> AircraftState {
        let mut s = AircraftState::level(
            Vec3::new(0.0, 0.0, self.aircraft_altitude),
            self.aircraft_speed,
            self.aircraft_heading,
        );
        s.roll = self.aircraft_roll;
        s
    }

    /// Offset of the missile from the aircraft.
    pub fn missile_offset(&self) -> Vec3 {
        let (sh, ch) = self.aircraft_heading.sin_cos();
        let back = Vec3::new(-sh, -ch, 0.0);
        let right = Vec3::new(ch, -sh, 0.0);
        let (sa, ca) = self.missile_azimuth.sin_cos();
        let (se, ce) = self.missile_elevation.sin_cos();
        ((back * ca + right * sa) * ce + UP * se) * self.range
    }

    pub fn missile_state(&self) -> MissileState {
        let aircraft = self.aircraft_state().position;
        MissileState::pointed_at(aircraft + self.missile_offset(), aircraft, self.missile_speed)
    }

    pub fn guidance(&self) -> GuidanceConfig {
        GuidanceConfig {
            law: self.law,
            nav_coefficient: self.nav_coefficient,
            accel_correction: self.accel_correction,
            max_overload_g: self.max_overload_g,
            lethal_radius: LETHAL_RADIUS,
        }
    }

    /// SHA-256 over the scenario's canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("scenario serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn within(&self, bounds: &ScenarioBounds) -> bool {
        bounds.aircraft_altitude.contains(self.aircraft_altitude)
            && bounds.aircraft_speed.contains(self.aircraft_speed)
            && bounds.aircraft_heading.contains(self.aircraft_heading)
            && bounds.missile_azimuth.contains(self.missile_azimuth)
            && bounds.missile_elevation.contains(self.missile_elevation)
            && bounds.range.contains(self.range)
            && bounds.missile_speed.contains(self.missile_speed)
            && bounds.max_overload_g.contains(self.max_overload_g)
            && bounds.nav_coefficient.contains(self.nav_coefficient)
    }
}

/// SplitMix64 finalizer used to derive independent seeds.
pub fn mix_seed(master: u64, a: u64, b: u64) -> u64 {
    let mut z = master ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::azimuth_of;
    use crate::geometry::elevation_of;

    #[test]
    fn deterministic_and_in_bounds() {
        let b = ScenarioBounds::default();
        for seed in 0..200 {
            let s = sample_scenario(seed, &b, None);
            assert_eq!(s, sample_scenario(seed, &b, None));
            assert!(s.within(&b));
            assert_eq!(s.aircraft_roll, 0.0);
        }
    }

    #[test]
    fn weighted_first_interval_frequency() {
        let w = CurriculumWeights::small_azimuth();
        let speeds = w.aircraft_speed.as_ref().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let hits = (0..n).filter(|_| speeds.pick(&mut rng) == 0).count();
        let p: f64 = 16.0 / 31.0;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        let freq = hits as f64 / n as f64;
        assert!((freq - p).abs() < 3.0 * sigma, "freq {freq} vs {p}");
    }

    #[test]
    fn uniform_speed_mean() {
        let b = ScenarioBounds::default();
        let n = 100_000u64;
        let mean: f64 = (0..n).map(|s| sample_scenario(s, &b, None).aircraft_speed).sum::<f64>() / n as f64;
        let sigma = (190.0f64 / 12f64.sqrt()) / (n as f64).sqrt();
        assert!((mean - 375.0).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn missile_placement_matches_spec() {
        let b = ScenarioBounds::default();
        for seed in 0..100 {
            let s = sample_scenario(seed, &b, None);
            let d = s.missile_state().position - s.aircraft_state().position;
            assert!((d.norm() - s.range).abs() < 1e-6);
            assert!((azimuth_of(s.aircraft_heading, d) - s.missile_azimuth).abs() < 1e-9);
            assert!((elevation_of(d).unwrap() - s.missile_elevation).abs() < 1e-9);
        }
    }

    #[test]
    fn apn_pairing_keeps_other_dimensions() {
        let b = ScenarioBounds::default();
        let s = sample_scenario(11, &b, None);
        let apn = s.with_law(GuidanceLaw::Apn, &b);
        assert_eq!(apn.range, s.range);
        assert!(apn.accel_correction >= 0.5 * s.nav_coefficient - 1e-12);
        assert!(apn.accel_correction <= s.nav_coefficient + 1e-12);
        assert_eq!(apn.with_law(GuidanceLaw::Pn, &b), s);
    }

    #[test]
    fn partition_widths() {
        let parts = Range::new(280.0, 470.0).partition(40.0);
        assert_eq!(parts.len(), 5);
        assert_eq!(parts[4], Range::new(440.0, 470.0));
        assert_eq!(Range::new(-180.0, 180.0).partition(30.0).len(), 12);
    }

    #[test]
    fn weights_reject_non_positive() {
        assert!(IntervalWeights::new(vec![(Range::new(0.0, 1.0), 0.0)]).is_err());
        assert!(IntervalWeights::new(vec![]).is_err());
    }
}
