use evasion_core::strategy::{select_stage, Stage, SwitchThresholds};

const DEG: f64 = std::f64::consts::PI / 180.0;
const PREV: [Option<Stage>; 4] = [
    None,
    Some(Stage::LargeAzimuth),
    Some(Stage::SmallAzimuth),
    Some(Stage::ShortDistance),
];

fn ranges() -> Vec<f64> {
    let mut r: Vec<f64> = (0..=120).map(|i| i as f64 * 250.0).collect();
    r.extend([8000.0 - 1e-6, 8000.0, 8000.0 + 1e-6, 1.0, 50_000.0]);
    r
}

fn azimuths_deg() -> Vec<f64> {
    let mut a: Vec<f64> = (-720..=720).map(|i| i as f64 * 0.25).collect();
    for t in [15.0, 30.0] {
        for d in [-1e-6, 0.0, 1e-6] {
            a.push(t + d);
            a.push(-(t + d));
        }
    }
    a.extend([179.999, -179.999, 360.0 + 20.0, -360.0 - 10.0]);
    a
}

fn wrapped_abs_deg(a: f64) -> f64 {
    let w = (a + 180.0).rem_euclid(360.0) - 180.0;
    w.abs()
}

fn expected(prev: Option<Stage>, range: f64, az_deg: f64) -> Stage {
    let az = wrapped_abs_deg(az_deg);
    if prev == Some(Stage::ShortDistance) || range <= 8000.0 {
        Stage::ShortDistance
    } else if prev == Some(Stage::LargeAzimuth) {
        if az < 15.0 {
            Stage::SmallAzimuth
        } else {
            Stage::LargeAzimuth
        }
    } else if az <= 30.0 {
        Stage::SmallAzimuth
    } else {
        Stage::LargeAzimuth
    }
}

#[test]
fn exhaustive_grid_matches_thresholds() {
    let mut checked = 0usize;
    for prev in PREV {
        for &r in &ranges() {
            for &a in &azimuths_deg() {
                let got = select_stage(prev, r, a * DEG);
                // Values a hair from a threshold can land either side after the
                // degree/radian round trip.
                let near_edge = [15.0, 30.0].iter().any(|t| (wrapped_abs_deg(a) - t).abs() < 1e-9);
                if !near_edge {
                    assert_eq!(got, expected(prev, r, a), "prev {prev:?} range {r} az {a}");
                }
                checked += 1;
            }
        }
    }
    assert!(checked > 500_000);
}

#[test]
fn short_distance_is_absorbing() {
    for &r in &ranges() {
        for &a in &azimuths_deg() {
            assert_eq!(
                select_stage(Some(Stage::ShortDistance), r, a * DEG),
                Stage::ShortDistance
            );
        }
    }
    // Any trajectory that once closes inside 8000 m stays there.
    let mut stage = None;
    let path = [
        (20000.0, 150.0),
        (9000.0, 20.0),
        (7999.0, 40.0),
        (30000.0, 170.0),
        (9000.0, 5.0),
    ];
    let mut seen_short = false;
    for (r, a) in path {
        stage = Some(select_stage(stage, r, a * DEG));
        seen_short |= stage == Some(Stage::ShortDistance);
        if seen_short {
            assert_eq!(stage, Some(Stage::ShortDistance));
        }
    }
}

#[test]
fn no_single_step_oscillation() {
    // With inputs held fixed, one transition reaches a fixed point.
    for prev in PREV {
        for &r in &ranges() {
            for &a in &azimuths_deg() {
                let s1 = select_stage(prev, r, a * DEG);
                let s2 = select_stage(Some(s1), r, a * DEG);
                assert_eq!(s1, s2, "prev {prev:?} range {r} az {a}");
            }
        }
    }
    // Inside the hysteresis band both azimuth stages hold.
    for a in [15.5, 20.0, 29.5] {
        for sign in [1.0, -1.0] {
            let az = sign * a * DEG;
            assert_eq!(
                select_stage(Some(Stage::LargeAzimuth), 20000.0, az),
                Stage::LargeAzimuth
            );
            assert_eq!(
                select_stage(Some(Stage::SmallAzimuth), 20000.0, az),
                Stage::SmallAzimuth
            );
        }
    }
}

#[test]
fn symmetric_in_azimuth_sign() {
    for prev in PREV {
        for &r in &ranges() {
            for &a in &azimuths_deg() {
                assert_eq!(
                    select_stage(prev, r, a * DEG),
                    select_stage(prev, r, -a * DEG),
                    "prev {prev:?} r {r} az {a}"
                );
            }
        }
    }
}

#[test]
fn custom_thresholds_are_respected() {
    let t = SwitchThresholds {
        enter_short_range: 5000.0,
        split_azimuth_deg: 45.0,
        exit_large_azimuth_deg: 10.0,
    };
    t.validate().unwrap();
    assert_eq!(t.select(None, 6000.0, 40.0 * DEG), Stage::SmallAzimuth);
    assert_eq!(t.select(None, 6000.0, 50.0 * DEG), Stage::LargeAzimuth);
    assert_eq!(
        t.select(Some(Stage::LargeAzimuth), 6000.0, 12.0 * DEG),
        Stage::LargeAzimuth
    );
    assert_eq!(
        t.select(Some(Stage::LargeAzimuth), 6000.0, 9.0 * DEG),
        Stage::SmallAzimuth
    );
    assert_eq!(t.select(None, 5000.0, 90.0 * DEG), Stage::ShortDistance);
    let bad = SwitchThresholds {
        exit_large_azimuth_deg: 50.0,
        ..t
    };
    assert!(bad.validate().is_err());
}
