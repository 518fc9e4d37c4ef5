//! Runtime stage switching over the trained policies, and the single-policy
//! and scripted controllers it is compared against.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::aircraft::ControlAction;
use crate::error::{Error, Result};
use crate::geometry::wrap_pi;
use crate::harness::sim::Simulation;
use crate::learner::observation::Observation;
use crate::learner::policy::PolicyParameters;

const DEG: f64 = PI / 180.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    LargeAzimuth,
    SmallAzimuth,
    ShortDistance,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::LargeAzimuth, Stage::SmallAzimuth, Stage::ShortDistance];

    pub fn name(self) -> &'static str {
        match self {
            Stage::LargeAzimuth => "large-azimuth",
            Stage::SmallAzimuth => "small-azimuth",
            Stage::ShortDistance => "short-distance",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwitchThresholds {
    /// Range (m) at or below which the short-distance policy takes over.
    pub enter_short_range: f64,
    /// |azimuth| (deg) separating the small- and large-azimuth stages.
    pub split_azimuth_deg: f64,
    /// |azimuth| (deg) below which the large-azimuth stage hands over.
    pub exit_large_azimuth_deg: f64,
}

impl Default for SwitchThresholds {
    fn default() -> Self {
        Self {
            enter_short_range: 8000.0,
            split_azimuth_deg: 30.0,
            exit_large_azimuth_deg: 15.0,
        }
    }
}

impl SwitchThresholds {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.enter_short_range,
            self.split_azimuth_deg,
            self.exit_large_azimuth_deg,
        ];
        if !all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(Error::Config("switch thresholds must be positive".into()));
        }
        if self.exit_large_azimuth_deg >= self.split_azimuth_deg {
            return Err(Error::Config(
                "exit_large_azimuth_deg must be below split_azimuth_deg".into(),
            ));
        }
        Ok(())
    }

    pub fn select(&self, prev: Option<Stage>, range: f64, azimuth: f64) -> Stage {
        let az = wrap_pi(azimuth).abs();
        let split = self.split_azimuth_deg * DEG;
        let exit = self.exit_large_azimuth_deg * DEG;
        if range <= self.enter_short_range || prev == Some(Stage::ShortDistance) {
            return Stage::ShortDistance;
        }
        match prev {
            Some(Stage::LargeAzimuth) if az < exit => Stage::SmallAzimuth,
            Some(Stage::LargeAzimuth) => Stage::LargeAzimuth,
            _ if az <= split => Stage::SmallAzimuth,
            _ => Stage::LargeAzimuth,
        }
    }
}

/// Stage selection with the default thresholds.
pub fn select_stage(prev: Option<Stage>, range: f64, azimuth: f64) -> Stage {
    SwitchThresholds::default().select(prev, range, azimuth)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrategyBundle {
    pub large_azimuth: Arc<PolicyParameters>,
    pub small_azimuth: Arc<PolicyParameters>,
    pub short_distance: Arc<PolicyParameters>,
    pub thresholds: SwitchThresholds,
}

/// On-disk bundle description. Relative paths resolve against the manifest's
/// directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub large_azimuth: PathBuf,
    pub small_azimuth: PathBuf,
    pub short_distance: PathBuf,
    #[serde(default)]
    pub thresholds: SwitchThresholds,
}

impl BundleManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

impl StrategyBundle {
    pub fn new(
        large_azimuth: PolicyParameters,
        small_azimuth: PolicyParameters,
        short_distance: PolicyParameters,
        thresholds: SwitchThresholds,
    ) -> Result<Self> {
        thresholds.validate()?;
        Ok(Self {
            large_azimuth: Arc::new(large_azimuth),
            small_azimuth: Arc::new(small_azimuth),
            short_distance: Arc::new(short_distance),
            thresholds,
        })
    }

    pub fn load(manifest_path: &Path) -> Result<Self> {
        let manifest = BundleManifest::read(manifest_path)?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let load = |p: &Path| -> Result<PolicyParameters> {
            let full = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
            Ok(PolicyParameters::load(&full)?.0)
        };
        Self::new(
            load(&manifest.large_azimuth)?,
            load(&manifest.small_azimuth)?,
            load(&manifest.short_distance)?,
            manifest.thresholds,
        )
    }

    pub fn policy(&self, stage: Stage) -> &PolicyParameters {
        match stage {
            Stage::LargeAzimuth => &self.large_azimuth,
            Stage::SmallAzimuth => &self.small_azimuth,
            Stage::ShortDistance => &self.short_distance,
        }
    }

    /// Deterministic action of the stage's policy.
    pub fn act(&self, stage: Stage, obs: &Observation) -> ControlAction {
        self.policy(stage).forward(obs).action()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision {
    pub action: ControlAction,
    pub stage: Option<Stage>,
}

/// Per-episode decision maker. Cloned for every episode, so shared data
/// should sit behind an `Arc`.
pub trait Controller: Send + Sync {
    fn name(&self) -> &str;
    fn reset(&mut self) {}
    fn act(&mut self, sim: &Simulation) -> Result<Decision>;
    fn box_clone(&self) -> Box<dyn Controller>;
}

impl Clone for Box<dyn Controller> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

#[derive(Clone, Debug)]
pub struct MultiStage {
    pub bundle: Arc<StrategyBundle>,
    stage: Option<Stage>,
}

impl MultiStage {
    pub fn new(bundle: StrategyBundle) -> Self {
        Self {
            bundle: Arc::new(bundle),
            stage: None,
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        self.stage
    }
}

impl Controller for MultiStage {
    fn name(&self) -> &str {
        "multi-stage"
    }

    fn reset(&mut self) {
        self.stage = None;
    }

    fn act(&mut self, sim: &Simulation) -> Result<Decision> {
        let stage = self
            .bundle
            .thresholds
            .select(self.stage, sim.geometry.range, sim.geometry.azimuth);
        self.stage = Some(stage);
        Ok(Decision {
            action: self.bundle.act(stage, &sim.observation()),
            stage: Some(stage),
        })
    }

    fn box_clone(&self) -> Box<dyn Controller> {
        Box::new(self.clone())
    }
}

/// One policy for the whole episode (the steep-turn and baseline strategies).
#[derive(Clone, Debug)]
pub struct SinglePolicy {
    name: String,
    pub policy: Arc<PolicyParameters>,
}

impl SinglePolicy {
    pub fn new(name: impl Into<String>, policy: PolicyParameters) -> Self {
        Self {
            name: name.into(),
            policy: Arc::new(policy),
        }
    }

    pub fn load(name: impl Into<String>, path: &Path) -> Result<Self> {
        Ok(Self::new(name, PolicyParameters::load(path)?.0))
    }
}

impl Controller for SinglePolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn act(&mut self, sim: &Simulation) -> Result<Decision> {
        Ok(Decision {
            action: self.policy.forward(&sim.observation()).action(),
            stage: None,
        })
    }

    fn box_clone(&self) -> Box<dyn Controller> {
        Box::new(self.clone())
    }
}

/// Neutral surfaces with throttle trimmed to the current speed.
#[derive(Clone, Debug, Default)]
pub struct NoOp;

impl Controller for NoOp {
    fn name(&self) -> &str {
        "no-op"
    }

    fn act(&mut self, sim: &Simulation) -> Result<Decision> {
        let throttle = sim.config().aircraft.trim_throttle(sim.aircraft.speed);
        Ok(Decision {
            action: ControlAction::new(0.0, 0.0, 0.0, throttle),
            stage: None,
        })
    }

    fn box_clone(&self) -> Box<dyn Controller> {
        Box::new(self.clone())
    }
}

/// Hand-flown level turn at a fixed bank, full throttle. The turn direction
/// is fixed at the first step towards the missile's side.
#[derive(Clone, Debug)]
pub struct ScriptedTurn {
    pub bank_deg: f64,
    /// Aileron per radian of bank error.
    pub gain: f64,
    direction: Option<f64>,
}

impl ScriptedTurn {
    pub fn new(bank_deg: f64) -> Self {
        Self {
            bank_deg,
            gain: 4.0,
            direction: None,
        }
    }
}

impl Controller for ScriptedTurn {
    fn name(&self) -> &str {
        "scripted-turn"
    }

    fn reset(&mut self) {
        self.direction = None;
    }

    fn act(&mut self, sim: &Simulation) -> Result<Decision> {
        let dir = *self.direction.get_or_insert(sim.geometry.turn_sign());
        let error = wrap_pi(dir * self.bank_deg * DEG - sim.aircraft.roll);
        Ok(Decision {
            action: ControlAction::new(0.0, (self.gain * error).clamp(-1.0, 1.0), 0.0, 1.0),
            stage: None,
        })
    }

    fn box_clone(&self) -> Box<dyn Controller> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenario::{sample_scenario, ScenarioBounds};
    use crate::harness::sim::SimConfig;
    use crate::learner::policy::NetworkConfig;

    fn deg(d: f64) -> f64 {
        d * DEG
    }

    #[test]
    fn documented_examples() {
        assert_eq!(select_stage(None, 9000.0, deg(10.0)), Stage::SmallAzimuth);
        assert_eq!(select_stage(None, 7000.0, deg(170.0)), Stage::ShortDistance);
        assert_eq!(
            select_stage(Some(Stage::LargeAzimuth), 12000.0, deg(20.0)),
            Stage::LargeAzimuth
        );
        assert_eq!(select_stage(None, 12000.0, deg(31.0)), Stage::LargeAzimuth);
        assert_eq!(select_stage(None, 8000.0, deg(31.0)), Stage::ShortDistance);
        assert_eq!(
            select_stage(Some(Stage::LargeAzimuth), 12000.0, deg(14.9)),
            Stage::SmallAzimuth
        );
        assert_eq!(
            select_stage(Some(Stage::SmallAzimuth), 12000.0, deg(30.0)),
            Stage::SmallAzimuth
        );
        assert_eq!(
            select_stage(Some(Stage::SmallAzimuth), 12000.0, deg(30.1)),
            Stage::LargeAzimuth
        );
    }

    #[test]
    fn short_distance_is_absorbing() {
        for az in [-170.0, -20.0, 0.0, 45.0, 180.0] {
            assert_eq!(
                select_stage(Some(Stage::ShortDistance), 20000.0, deg(az)),
                Stage::ShortDistance
            );
        }
    }

    #[test]
    fn thresholds_validated() {
        let bad = SwitchThresholds {
            exit_large_azimuth_deg: 30.0,
            ..SwitchThresholds::default()
        };
        assert!(bad.validate().is_err());
        assert!(SwitchThresholds::default().validate().is_ok());
    }

    fn tiny(seed: u64) -> PolicyParameters {
        let cfg = NetworkConfig {
            hidden: vec![8],
            log_std_init: -0.5,
        };
        let mut p = PolicyParameters::new(&cfg, seed);
        // Break the small-gain output initialization so policies differ visibly.
        let flat: Vec<f64> = p.to_flat().iter().map(|v| v * 50.0).collect();
        p.set_flat(&flat).unwrap();
        p
    }

    fn sim() -> Simulation {
        let spec = sample_scenario(7, &ScenarioBounds::default(), None);
        Simulation::new(&spec, &SimConfig::default()).unwrap()
    }

    #[test]
    fn dispatch_uses_stage_policy() {
        let bundle = StrategyBundle::new(tiny(1), tiny(2), tiny(3), SwitchThresholds::default()).unwrap();
        let obs = sim().observation();
        assert_eq!(
            bundle.act(Stage::ShortDistance, &obs),
            bundle.short_distance.forward(&obs).action()
        );
        let a = bundle.act(Stage::LargeAzimuth, &obs);
        let b = bundle.act(Stage::SmallAzimuth, &obs);
        let c = bundle.act(Stage::ShortDistance, &obs);
        assert!(a != b && b != c && a != c);

        let same = StrategyBundle::new(tiny(4), tiny(4), tiny(4), SwitchThresholds::default()).unwrap();
        let acts: Vec<_> = Stage::ALL.iter().map(|&s| same.act(s, &obs)).collect();
        assert!(acts.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn multi_stage_tracks_stage_and_resets() {
        let bundle = StrategyBundle::new(tiny(1), tiny(2), tiny(3), SwitchThresholds::default()).unwrap();
        let mut ms = MultiStage::new(bundle);
        let s = sim();
        let d = ms.act(&s).unwrap();
        let expected = select_stage(None, s.geometry.range, s.geometry.azimuth);
        assert_eq!(d.stage, Some(expected));
        ms.reset();
        assert_eq!(ms.stage(), None);
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let meta = crate::learner::policy::CheckpointMeta {
            task: "t".into(),
            seed: 0,
            config_hash: String::new(),
            episodes: 0,
        };
        for (i, name) in ["l.json", "s.json", "d.json"].iter().enumerate() {
            tiny(i as u64).save(&dir.path().join(name), &meta).unwrap();
        }
        let manifest = BundleManifest {
            large_azimuth: "l.json".into(),
            small_azimuth: "s.json".into(),
            short_distance: "d.json".into(),
            thresholds: SwitchThresholds::default(),
        };
        let path = dir.path().join("bundle.toml");
        manifest.write(&path).unwrap();
        assert_eq!(BundleManifest::read(&path).unwrap(), manifest);
        let bundle = StrategyBundle::load(&path).unwrap();
        assert_eq!(*bundle.small_azimuth, tiny(1));

        std::fs::remove_file(dir.path().join("d.json")).unwrap();
        assert!(StrategyBundle::load(&path).is_err());
    }

    #[test]
    fn scripted_turn_banks_towards_missile_side() {
        let mut s = sim();
        let mut c = ScriptedTurn::new(85.0);
        let dir = s.geometry.turn_sign();
        for _ in 0..400 {
            let d = c.act(&s).unwrap();
            s.step(d.action).unwrap();
            if s.is_over() {
                break;
            }
        }
        assert!(
            (s.aircraft.roll - dir * deg(85.0)).abs() < deg(2.0),
            "roll {}",
            s.aircraft.roll
        );
    }
}
