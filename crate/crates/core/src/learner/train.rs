//! Episode-budget PPO training loop.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aircraft::ControlAction;
use crate::error::{Error, Result};
use crate::learner::gae::compute_gae;
use crate::learner::observation::Observation;
use crate::learner::policy::{NetworkConfig, PolicyParameters};
use crate::learner::ppo::{ppo_update, Adam, PpoConfig, RolloutBatch, UpdateStats};
use crate::report::{sig9, CsvTable};
use crate::rewards::RewardBreakdown;

/// Result of one decision step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvStep {
    pub observation: Observation,
    /// Reward accumulated over the simulation steps of this decision.
    pub reward: RewardBreakdown,
    pub done: bool,
    /// Episode ended in a terminal state; no value bootstrap.
    pub terminal: bool,
    pub sim_steps: usize,
}

pub trait Environment {
    fn reset(&mut self, episode: u64) -> Result<Observation>;
    fn step(&mut self, action: ControlAction) -> Result<EnvStep>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub episodes: u64,
    pub seed: u64,
    pub gamma: f64,
    pub gae_lambda: f64,
    /// Decisions collected per PPO update.
    pub batch_size: usize,
    /// Multiplier applied to rewards before advantage estimation; the
    /// learning curve reports unscaled rewards.
    pub reward_scale: f64,
    /// Environments stepped side by side while filling a batch.
    pub envs: usize,
    pub network: NetworkConfig,
    pub ppo: PpoConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 3000,
            seed: 0,
            gamma: 0.99,
            gae_lambda: 0.95,
            batch_size: 1024,
            reward_scale: 1.0,
            envs: 1,
            network: NetworkConfig::default(),
            ppo: PpoConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::Config("train.episodes must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::Config(
                "train.gamma and train.gae_lambda must lie in [0, 1]".into(),
            ));
        }
        if self.envs == 0 {
            return Err(Error::Config("train.envs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be positive".into()));
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return Err(Error::Config("train.reward_scale must be positive".into()));
        }
        self.network.validate()?;
        self.ppo.validate()
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub episode: u64,
    /// Simulation steps in the episode.
    pub steps: usize,
    pub accumulated_reward: f64,
    /// Per-term episode sums divided by `steps`.
    pub term_means: [f64; 11],
}

#[derive(Clone, Debug)]
pub struct TrainResult {
    pub params: PolicyParameters,
    pub curve: Vec<CurveRow>,
    pub updates: Vec<UpdateStats>,
}

/// Open trajectory segment awaiting its advantage computation.
#[derive(Default)]
struct Segment {
    rewards: Vec<f64>,
    values: Vec<f64>,
}

impl Segment {
    fn close(&mut self, batch: &mut RolloutBatch, terminal: bool, bootstrap: f64, config: &TrainConfig) -> Result<()> {
        if self.rewards.is_empty() {
            return Ok(());
        }
        if !terminal {
            self.values.push(bootstrap);
        }
        let adv = compute_gae(&self.rewards, &self.values, terminal, config.gamma, config.gae_lambda)?;
        batch.advantages.extend(adv.advantages);
        batch.returns.extend(adv.returns);
        self.rewards.clear();
        self.values.clear();
        Ok(())
    }
}

/// Per-environment rollout state.
struct Slot {
    obs: Observation,
    episode: u64,
    reward: RewardBreakdown,
    steps: usize,
    segment: Segment,
    part: RolloutBatch,
    active: bool,
}

/// Trains until `config.episodes` episodes have finished. Episodes run to
/// completion across update boundaries; a partial final batch is still
/// used for one last update.
///
/// Each environment in `envs` runs its own episode; they are stepped round
/// robin and episode indices are handed out in the order episodes start. The
/// returned curve is sorted by episode index.
pub fn train<E: Environment>(
    envs: &mut [E],
    config: &TrainConfig,
    init: Option<PolicyParameters>,
    mut on_episode: impl FnMut(&CurveRow),
) -> Result<TrainResult> {
    config.validate()?;
    if envs.is_empty() {
        return Err(Error::Config("training needs at least one environment".into()));
    }
    let mut params = init.unwrap_or_else(|| PolicyParameters::new(&config.network, config.seed));
    if !params.is_finite() {
        return Err(Error::Config("initial parameters are not finite".into()));
    }
    #[allow(clippy::unusual_byte_groupings)]
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0f_a11);
    let mut adam = Adam::new(params.parameter_count());
    let mut curve = Vec::new();
    let mut updates = Vec::new();

    let used = envs.len().min(config.episodes as usize);
    let envs = &mut envs[..used];
    let mut slots = Vec::with_capacity(used);
    for (i, env) in envs.iter_mut().enumerate() {
        slots.push(Slot {
            obs: env.reset(i as u64)?,
            episode: i as u64,
            reward: RewardBreakdown::default(),
            steps: 0,
            segment: Segment::default(),
            part: RolloutBatch::default(),
            active: true,
        });
    }
    let mut next_episode = used as u64;

    while slots.iter().any(|s| s.active) {
        let mut collected = 0;
        while collected < config.batch_size && slots.iter().any(|s| s.active) {
            for (slot, env) in slots.iter_mut().zip(envs.iter_mut()) {
                if !slot.active || collected >= config.batch_size {
                    continue;
                }
                let s = params.sample(&slot.obs, &mut rng);
                let step = env.step(s.action)?;
                let total = step.reward.total();
                if !total.is_finite() {
                    return Err(Error::Diverged(format!(
                        "non-finite reward in episode {}",
                        slot.episode
                    )));
                }
                slot.part.observations.push(slot.obs.0);
                slot.part.pre_squash.push(s.pre_squash);
                slot.part.old_log_probs.push(s.log_prob);
                slot.segment.rewards.push(total * config.reward_scale);
                slot.segment.values.push(s.value);
                slot.reward.accumulate(&step.reward);
                slot.steps += step.sim_steps;
                collected += 1;

                if step.done {
                    let bootstrap = if step.terminal {
                        0.0
                    } else {
                        params.value(&step.observation)
                    };
                    slot.segment.close(&mut slot.part, step.terminal, bootstrap, config)?;
                    let denom = slot.steps.max(1) as f64;
                    let row = CurveRow {
                        episode: slot.episode,
                        steps: slot.steps,
                        accumulated_reward: slot.reward.total(),
                        term_means: slot.reward.terms().map(|t| t / denom),
                    };
                    on_episode(&row);
                    curve.push(row);
                    slot.reward = RewardBreakdown::default();
                    slot.steps = 0;
                    if next_episode < config.episodes {
                        slot.episode = next_episode;
                        slot.obs = env.reset(next_episode)?;
                        next_episode += 1;
                    } else {
                        slot.active = false;
                    }
                } else {
                    slot.obs = step.observation;
                }
            }
        }
        let mut batch = RolloutBatch::default();
        for slot in &mut slots {
            if slot.active {
                let bootstrap = params.value(&slot.obs);
                slot.segment.close(&mut slot.part, false, bootstrap, config)?;
            }
            batch.append(&mut slot.part);
        }
        let stats = ppo_update(&mut params, &mut adam, &batch, &config.ppo, &mut rng)?;
        log::debug!(
            "update {}: policy {:.4} value {:.4} kl {:.5} clip {:.3}",
            updates.len(),
            stats.policy_loss,
            stats.value_loss,
            stats.approx_kl,
            stats.clip_fraction
        );
        updates.push(stats);
    }
    curve.sort_by_key(|r| r.episode);
    Ok(TrainResult { params, curve, updates })
}

pub fn write_curve_csv(path: &Path, curve: &[CurveRow]) -> Result<()> {
    let mut header = vec!["episode", "steps", "accumulated_reward"];
    header.extend(RewardBreakdown::TERM_NAMES);
    let mut table = CsvTable::create(path, &header)?;
    for row in curve {
        let mut fields = vec![
            row.episode.to_string(),
            row.steps.to_string(),
            sig9(row.accumulated_reward),
        ];
        fields.extend(row.term_means.iter().map(|&t| sig9(t)));
        table.row(fields)?;
    }
    table.finish()
}

/// Mean accumulated reward of the first and last `fraction` of episodes.
pub fn decile_means(curve: &[CurveRow], fraction: f64) -> Option<(f64, f64)> {
    let k = ((curve.len() as f64) * fraction).floor() as usize;
    if k == 0 {
        return None;
    }
    let mean = |rows: &[CurveRow]| rows.iter().map(|r| r.accumulated_reward).sum::<f64>() / rows.len() as f64;
    Some((mean(&curve[..k]), mean(&curve[curve.len() - k..])))
}
