//! Diagnostic studies around the short-distance stage and the guidance law.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::episode::{EpisodeRecord, RunOptions};
use crate::harness::scenario::{mix_seed, sample_scenario, Range, ScenarioBounds, ScenarioSpec};
use crate::harness::sweep::{run_batch, CellStats};
use crate::missile::GuidanceLaw;
use crate::strategy::Controller;

const DEG: f64 = std::f64::consts::PI / 180.0;

/// Scenarios sharing `bounds` except for a fixed initial range.
pub fn scenarios_at_range(seed: u64, bounds: &ScenarioBounds, range: f64, n: usize) -> Vec<ScenarioSpec> {
    let b = ScenarioBounds {
        range: Range::new(range, range),
        ..bounds.clone()
    };
    (0..n)
        .map(|i| sample_scenario(mix_seed(seed, i as u64, 0), &b, None))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RollAtRange {
    pub start_range: f64,
    pub probe_range: f64,
    /// Bank angle (deg) when the range first drops to `probe_range`; `None`
    /// if the episode ended before that.
    pub rolls_deg: Vec<Option<f64>>,
    /// Counts per 10 deg bin from -180 to 180.
    pub histogram: Vec<usize>,
    /// Fraction of reached probes with |roll| within 15 deg of 85 deg.
    pub near_85_fraction: f64,
}

pub fn roll_at_range(
    controller: &dyn Controller,
    bounds: &ScenarioBounds,
    n: usize,
    seed: u64,
    options: &RunOptions,
    jobs: Option<usize>,
) -> Result<RollAtRange> {
    let (start_range, probe_range) = (12000.0, 8000.0);
    let specs = scenarios_at_range(seed, bounds, start_range, n);
    let opts = RunOptions {
        record: true,
        ..options.clone()
    };
    let records = run_batch(&specs, controller, &opts, jobs)?;
    let rolls: Vec<Option<f64>> = records
        .iter()
        .map(|r| {
            r.rows
                .iter()
                .find(|row| row.range <= probe_range)
                .map(|row| crate::geometry::wrap_pi(row.aircraft.roll) / DEG)
        })
        .collect();
    let mut histogram = vec![0; 36];
    for r in rolls.iter().flatten() {
        let bin = (((r + 180.0) / 10.0).floor() as usize).min(35);
        histogram[bin] += 1;
    }
    let reached: Vec<f64> = rolls.iter().flatten().copied().collect();
    let near = reached.iter().filter(|r| (r.abs() - 85.0).abs() <= 15.0).count();
    Ok(RollAtRange {
        start_range,
        probe_range,
        near_85_fraction: if reached.is_empty() {
            0.0
        } else {
            near as f64 / reached.len() as f64
        },
        rolls_deg: rolls,
        histogram,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RollConditionRow {
    pub initial_roll_deg: f64,
    pub stats: CellStats,
    pub success_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RollCondition {
    pub start_range: f64,
    pub rows: Vec<RollConditionRow>,
}

impl RollCondition {
    pub fn ratio(&self, roll_deg: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| (r.initial_roll_deg - roll_deg).abs() < 1e-9)
            .map(|r| r.success_ratio)
    }
}

/// Success ratio from an 8000 m start for each initial bank angle. Every
/// roll sees the same scenarios apart from the bank.
pub fn roll_condition(
    controller: &dyn Controller,
    bounds: &ScenarioBounds,
    rolls_deg: &[f64],
    n: usize,
    seed: u64,
    options: &RunOptions,
    jobs: Option<usize>,
) -> Result<RollCondition> {
    let start_range = 8000.0;
    let base = scenarios_at_range(seed, bounds, start_range, n);
    let mut rows = Vec::new();
    for &roll in rolls_deg {
        let specs: Vec<ScenarioSpec> = base
            .iter()
            .map(|s| ScenarioSpec {
                aircraft_roll: roll * DEG,
                ..*s
            })
            .collect();
        let stats = CellStats::from_records(&run_batch(&specs, controller, options, jobs)?);
        rows.push(RollConditionRow {
            initial_roll_deg: roll,
            success_ratio: stats.ratio(),
            stats,
        });
    }
    Ok(RollCondition { start_range, rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawComparison {
    pub n: usize,
    pub pn: CellStats,
    pub apn: CellStats,
    pub pn_ratio: f64,
    pub apn_ratio: f64,
    /// Scenarios survived under PN but not APN, and the reverse.
    pub pn_only: usize,
    pub apn_only: usize,
}

/// Runs the controller on `n` scenarios twice, once per guidance law, with
/// every other initial condition shared.
pub fn law_comparison(
    controller: &dyn Controller,
    bounds: &ScenarioBounds,
    n: usize,
    seed: u64,
    options: &RunOptions,
    jobs: Option<usize>,
) -> Result<LawComparison> {
    let base: Vec<ScenarioSpec> = (0..n)
        .map(|i| sample_scenario(mix_seed(seed, i as u64, 0), bounds, None))
        .collect();
    let run = |law| -> Result<Vec<EpisodeRecord>> {
        let specs: Vec<ScenarioSpec> = base.iter().map(|s| s.with_law(law, bounds)).collect();
        run_batch(&specs, controller, options, jobs)
    };
    let pn = run(GuidanceLaw::Pn)?;
    let apn = run(GuidanceLaw::Apn)?;
    let pn_only = pn
        .iter()
        .zip(&apn)
        .filter(|(a, b)| a.outcome.is_success() && !b.outcome.is_success())
        .count();
    let apn_only = pn
        .iter()
        .zip(&apn)
        .filter(|(a, b)| !a.outcome.is_success() && b.outcome.is_success())
        .count();
    let pn = CellStats::from_records(&pn);
    let apn = CellStats::from_records(&apn);
    Ok(LawComparison {
        n,
        pn_ratio: pn.ratio(),
        apn_ratio: apn.ratio(),
        pn,
        apn,
        pn_only,
        apn_only,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::sim::SimConfig;
    use crate::strategy::{NoOp, ScriptedTurn};

    #[test]
    fn instant_expiry_survives_every_roll() {
        // A missile with no flight time can never hit.
        let options = RunOptions {
            sim: SimConfig {
                max_flight_time: 0.05,
                ..SimConfig::default()
            },
            ..RunOptions::default()
        };
        let r = roll_condition(
            &NoOp,
            &ScenarioBounds::default(),
            &[-85.0, 0.0, 85.0],
            10,
            1,
            &options,
            None,
        )
        .unwrap();
        for row in &r.rows {
            assert_eq!(row.success_ratio, 1.0);
            assert_eq!(row.stats.n, 10);
        }
        assert_eq!(r.ratio(0.0), Some(1.0));
    }

    #[test]
    fn roll_conditions_share_scenarios() {
        let a = scenarios_at_range(3, &ScenarioBounds::default(), 8000.0, 5);
        assert!(a.iter().all(|s| s.range == 8000.0));
        assert_eq!(a, scenarios_at_range(3, &ScenarioBounds::default(), 8000.0, 5));
    }

    #[test]
    fn scripted_turn_reaches_85_at_probe() {
        let r = roll_at_range(
            &ScriptedTurn::new(85.0),
            &ScenarioBounds::default(),
            8,
            2,
            &RunOptions::default(),
            None,
        )
        .unwrap();
        assert_eq!(r.rolls_deg.len(), 8);
        assert_eq!(r.histogram.iter().sum::<usize>(), r.rolls_deg.iter().flatten().count());
        assert!(r.near_85_fraction > 0.9);
    }

    #[test]
    fn law_comparison_is_paired() {
        let r = law_comparison(&NoOp, &ScenarioBounds::default(), 6, 4, &RunOptions::default(), None).unwrap();
        assert_eq!(r.pn.n, 6);
        assert_eq!(r.apn.n, 6);
        assert_eq!(
            r.pn.successes as i64 - r.apn.successes as i64,
            r.pn_only as i64 - r.apn_only as i64
        );
    }
}
