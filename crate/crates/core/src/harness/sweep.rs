//! Interval-sweep success-ratio statistics over seeded scenario batches.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::harness::episode::{run_episode, EpisodeRecord, Outcome, RunOptions};
use crate::harness::scenario::{mix_seed, sample_scenario, Range, ScenarioBounds, ScenarioSpec};
use crate::report::{sig9, CsvTable};
use crate::strategy::Controller;

const DEG: f64 = std::f64::consts::PI / 180.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dimension {
    AircraftSpeed,
    MissileSpeed,
    Range,
    /// Partition bounds given in degrees.
    MissileAzimuth,
}

impl Dimension {
    pub fn name(self) -> &'static str {
        match self {
            Dimension::AircraftSpeed => "aircraft_speed",
            Dimension::MissileSpeed => "missile_speed",
            Dimension::Range => "range",
            Dimension::MissileAzimuth => "missile_azimuth_deg",
        }
    }

    fn apply(self, bounds: &mut ScenarioBounds, r: Range) {
        match self {
            Dimension::AircraftSpeed => bounds.aircraft_speed = r,
            Dimension::MissileSpeed => bounds.missile_speed = r,
            Dimension::Range => bounds.range = r,
            Dimension::MissileAzimuth => bounds.missile_azimuth = Range::new(r.lo * DEG, r.hi * DEG),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub dimension: Dimension,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Partition {
    pub fn intervals(&self) -> Vec<Range> {
        Range::new(self.lo, self.hi).partition(self.step)
    }
}

/// Cartesian product of partitions. Dimensions without a partition are
/// drawn from `bounds`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub partitions: Vec<Partition>,
    pub tests_per_cell: usize,
    #[serde(default)]
    pub bounds: ScenarioBounds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub index: usize,
    pub intervals: Vec<(Dimension, Range)>,
    pub bounds: ScenarioBounds,
}

impl SweepGrid {
    /// Every dimension at its published step: 5 aircraft-speed, 6
    /// missile-speed, 10 range and 12 azimuth intervals, 40 tests each.
    pub fn full() -> Self {
        Self {
            partitions: vec![
                Partition {
                    dimension: Dimension::AircraftSpeed,
                    lo: 280.0,
                    hi: 470.0,
                    step: 40.0,
                },
                Partition {
                    dimension: Dimension::MissileSpeed,
                    lo: 800.0,
                    hi: 1400.0,
                    step: 100.0,
                },
                Partition {
                    dimension: Dimension::Range,
                    lo: 5000.0,
                    hi: 15000.0,
                    step: 1000.0,
                },
                Partition {
                    dimension: Dimension::MissileAzimuth,
                    lo: -180.0,
                    hi: 180.0,
                    step: 30.0,
                },
            ],
            tests_per_cell: 40,
            bounds: ScenarioBounds::default(),
        }
    }

    /// Twelve 30 deg azimuth sectors with every other dimension drawn
    /// uniformly: 504 scenarios.
    pub fn desk() -> Self {
        Self {
            partitions: vec![Partition {
                dimension: Dimension::MissileAzimuth,
                lo: -180.0,
                hi: 180.0,
                step: 30.0,
            }],
            tests_per_cell: 42,
            bounds: ScenarioBounds::default(),
        }
    }

    /// `"desk"`, `"full"` or a path to a TOML grid file.
    pub fn resolve(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "full" => Ok(Self::full()),
            path => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let grid: Self = toml::from_str(&text).map_err(|e| Error::Config(format!("{path}: {e}")))?;
                grid.validate()?;
                Ok(grid)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tests_per_cell == 0 {
            return Err(Error::Config("grid.tests_per_cell must be at least 1".into()));
        }
        for p in &self.partitions {
            if !(p.step > 0.0 && p.lo < p.hi) {
                return Err(Error::Config(format!("grid partition {} is empty", p.dimension.name())));
            }
        }
        self.bounds.validate()
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = vec![Vec::new()];
        for p in &self.partitions {
            let mut next = Vec::new();
            for prefix in &cells {
                for r in p.intervals() {
                    let mut c: Vec<(Dimension, Range)> = prefix.clone();
                    c.push((p.dimension, r));
                    next.push(c);
                }
            }
            cells = next;
        }
        cells
            .into_iter()
            .enumerate()
            .map(|(index, intervals)| {
                let mut bounds = self.bounds.clone();
                for &(d, r) in &intervals {
                    d.apply(&mut bounds, r);
                }
                Cell {
                    index,
                    intervals,
                    bounds,
                }
            })
            .collect()
    }

    pub fn scenario_count(&self) -> usize {
        self.cells().len() * self.tests_per_cell
    }
}

/// Scenario of repetition `rep` in `cell`. `stream` separates unpaired
/// strategies; paired runs use stream 0 for everyone.
pub fn cell_scenario(master_seed: u64, stream: u64, cell: &Cell, rep: usize) -> ScenarioSpec {
    let base = if stream == 0 {
        master_seed
    } else {
        mix_seed(master_seed, u64::MAX, stream)
    };
    sample_scenario(mix_seed(base, cell.index as u64, rep as u64), &cell.bounds, None)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub n: usize,
    pub successes: usize,
    pub hits: usize,
    pub ground_impacts: usize,
    pub aborted: usize,
    pub mean_max_overload_g: f64,
    pub max_max_overload_g: f64,
}

impl CellStats {
    pub fn from_records(records: &[EpisodeRecord]) -> Self {
        let mut s = CellStats {
            n: records.len(),
            ..Default::default()
        };
        for r in records {
            match r.outcome {
                Outcome::Survived => s.successes += 1,
                Outcome::Hit => s.hits += 1,
                Outcome::GroundImpact => s.ground_impacts += 1,
                Outcome::Aborted => s.aborted += 1,
            }
            s.mean_max_overload_g += r.max_missile_overload_g;
            s.max_max_overload_g = s.max_max_overload_g.max(r.max_missile_overload_g);
        }
        if s.n > 0 {
            s.mean_max_overload_g /= s.n as f64;
        }
        s
    }

    pub fn ratio(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.successes as f64 / self.n as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyStats {
    pub name: String,
    pub cells: Vec<CellStats>,
    pub total: CellStats,
    /// SHA-256 over the ordered scenario digests this strategy faced.
    pub scenario_hash: String,
    /// Per-scenario success flags in (cell, repetition) order.
    pub successes: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub master_seed: u64,
    pub paired: bool,
    /// True when every strategy saw the identical scenario sequence.
    pub pairing_verified: bool,
    pub grid: SweepGrid,
    pub cells: Vec<Cell>,
    pub strategies: Vec<StrategyStats>,
}

/// Runs every controller on its scenarios. Work is split per scenario and
/// each scenario's seed derives from (master, cell, repetition), so results
/// do not depend on the worker count.
pub fn run_batch(
    specs: &[ScenarioSpec],
    controller: &dyn Controller,
    options: &RunOptions,
    jobs: Option<usize>,
) -> Result<Vec<EpisodeRecord>> {
    let work = || {
        specs
            .par_iter()
            .map(|spec| {
                let mut c = controller.box_clone();
                run_episode(spec, c.as_mut(), options)
            })
            .collect::<Vec<_>>()
    };
    match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(work))
        }
        None => Ok(work()),
    }
}

pub fn success_ratio_sweep(
    grid: &SweepGrid,
    strategies: &[Box<dyn Controller>],
    paired: bool,
    master_seed: u64,
    options: &RunOptions,
    jobs: Option<usize>,
) -> Result<SweepResult> {
    grid.validate()?;
    let cells = grid.cells();
    let mut out = Vec::new();
    for (i, strategy) in strategies.iter().enumerate() {
        let stream = if paired { 0 } else { i as u64 + 1 };
        let specs: Vec<ScenarioSpec> = cells
            .iter()
            .flat_map(|c| (0..grid.tests_per_cell).map(move |rep| cell_scenario(master_seed, stream, c, rep)))
            .collect();
        let records = run_batch(&specs, strategy.as_ref(), options, jobs)?;
        let mut hasher = Sha256::new();
        for r in &records {
            hasher.update(r.spec_digest.as_bytes());
        }
        let per_cell: Vec<CellStats> = records
            .chunks(grid.tests_per_cell)
            .map(CellStats::from_records)
            .collect();
        out.push(StrategyStats {
            name: strategy.name().to_string(),
            total: CellStats::from_records(&records),
            cells: per_cell,
            scenario_hash: hex::encode(hasher.finalize()),
            successes: records.iter().map(|r| r.outcome.is_success()).collect(),
        });
    }
    let pairing_verified = out.windows(2).all(|w| w[0].scenario_hash == w[1].scenario_hash);
    if paired && !pairing_verified {
        return Err(Error::Config("paired sweep saw differing scenario sequences".into()));
    }
    Ok(SweepResult {
        master_seed,
        paired,
        pairing_verified,
        grid: grid.clone(),
        cells,
        strategies: out,
    })
}

impl SweepResult {
    pub fn strategy(&self, name: &str) -> Option<&StrategyStats> {
        self.strategies.iter().find(|s| s.name == name)
    }

    /// One row per (strategy, cell).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut header = vec!["strategy".to_string(), "cell".to_string()];
        for p in &self.grid.partitions {
            header.push(format!("{}_lo", p.dimension.name()));
            header.push(format!("{}_hi", p.dimension.name()));
        }
        for h in [
            "n",
            "successes",
            "hits",
            "ground_impacts",
            "aborted",
            "ratio",
            "mean_max_overload_g",
            "max_max_overload_g",
        ] {
            header.push(h.to_string());
        }
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut table = CsvTable::create(path, &header_refs)?;
        for s in &self.strategies {
            for (cell, stats) in self.cells.iter().zip(&s.cells) {
                let mut row = vec![s.name.clone(), cell.index.to_string()];
                for (_, r) in &cell.intervals {
                    row.push(sig9(r.lo));
                    row.push(sig9(r.hi));
                }
                row.extend([
                    stats.n.to_string(),
                    stats.successes.to_string(),
                    stats.hits.to_string(),
                    stats.ground_impacts.to_string(),
                    stats.aborted.to_string(),
                    sig9(stats.ratio()),
                    sig9(stats.mean_max_overload_g),
                    sig9(stats.max_max_overload_g),
                ]);
                table.row(row)?;
            }
        }
        table.finish()
    }

    pub fn summary(&self) -> SweepSummary {
        SweepSummary {
            master_seed: self.master_seed,
            paired: self.paired,
            pairing_verified: self.pairing_verified,
            scenarios_per_strategy: self.cells.len() * self.grid.tests_per_cell,
            strategies: self
                .strategies
                .iter()
                .map(|s| StrategySummary {
                    name: s.name.clone(),
                    success_ratio: s.total.ratio(),
                    mean_cell_ratio: s.cells.iter().map(CellStats::ratio).sum::<f64>() / s.cells.len().max(1) as f64,
                    totals: s.total.clone(),
                    scenario_hash: s.scenario_hash.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub name: String,
    pub success_ratio: f64,
    pub mean_cell_ratio: f64,
    pub totals: CellStats,
    pub scenario_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub master_seed: u64,
    pub paired: bool,
    pub pairing_verified: bool,
    pub scenarios_per_strategy: usize,
    pub strategies: Vec<StrategySummary>,
}
