//! Clipped-surrogate PPO loss with analytic gradients, Adam, and the
//! minibatch update loop.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::gae::normalize;
use crate::learner::policy::{log_prob, PolicyParameters, ACTION_DIM};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub clip: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            epochs: 10,
            minibatch_size: 256,
            clip: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.0,
            max_grad_norm: 0.5,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("ppo.{m}")));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be non-negative");
        }
        if self.epochs == 0 || self.minibatch_size == 0 {
            return bad("epochs and minibatch_size must be positive");
        }
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return bad("clip must lie in (0, 1)");
        }
        if !(self.max_grad_norm > 0.0) {
            return bad("max_grad_norm must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        Ok(())
    }
}

/// Transitions collected under the behaviour policy.
#[derive(Clone, Debug, Default)]
pub struct RolloutBatch {
    /// Normalized observations, one row per transition.
    pub observations: Vec<[f64; 12]>,
    /// Pre-squash action samples.
    pub pre_squash: Vec<[f64; ACTION_DIM]>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Moves every transition of `other` onto the end of `self`.
    pub fn append(&mut self, other: &mut RolloutBatch) {
        self.observations.append(&mut other.observations);
        self.pre_squash.append(&mut other.pre_squash);
        self.old_log_probs.append(&mut other.old_log_probs);
        self.advantages.append(&mut other.advantages);
        self.returns.append(&mut other.returns);
    }

    fn check(&self) -> Result<()> {
        let n = self.len();
        for (what, len) in [
            ("pre_squash", self.pre_squash.len()),
            ("old_log_probs", self.old_log_probs.len()),
            ("advantages", self.advantages.len()),
            ("returns", self.returns.len()),
        ] {
            if len != n {
                return Err(Error::LengthMismatch {
                    what,
                    left: len,
                    right: n,
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Loss over the transitions `idx` of `batch` and its gradient with
/// respect to [`PolicyParameters::to_flat`]. Advantages are used as given.
pub fn loss_and_grad(
    params: &PolicyParameters,
    batch: &RolloutBatch,
    idx: &[usize],
    config: &PpoConfig,
) -> (LossReport, Vec<f64>) {
    let b = idx.len();
    let nb = b as f64;
    let mut obs = Array2::<f64>::zeros((b, 12));
    for (r, &i) in idx.iter().enumerate() {
        obs.row_mut(r)
            .assign(&ndarray::ArrayView1::from(&batch.observations[i]));
    }

    let actor_cache = params.actor.forward(obs.view());
    let critic_cache = params.critic.forward(obs.view());
    let means = &actor_cache.output_preactivation;
    let values = critic_cache.output_preactivation.index_axis(Axis(1), 0);
    let inv_var: [f64; ACTION_DIM] = params.log_std.map(|s| (-2.0 * s).exp());

    let mut d_mean = Array2::<f64>::zeros((b, ACTION_DIM));
    let mut d_log_std = [0.0; ACTION_DIM];
    let mut d_value = Array2::<f64>::zeros((b, 1));
    let mut report = LossReport::default();
    let mut clipped = 0usize;

    for (r, &i) in idx.iter().enumerate() {
        let mean_row: Vec<f64> = means.row(r).to_vec();
        let u = &batch.pre_squash[i];
        let new_lp = log_prob(&mean_row, &params.log_std, u);
        let log_ratio = new_lp - batch.old_log_probs[i];
        let ratio = log_ratio.exp();
        let adv = batch.advantages[i];
        let clipped_ratio = ratio.clamp(1.0 - config.clip, 1.0 + config.clip);
        let unclipped_obj = ratio * adv;
        let clipped_obj = clipped_ratio * adv;
        report.policy_loss -= unclipped_obj.min(clipped_obj) / nb;
        report.approx_kl += ((ratio - 1.0) - log_ratio) / nb;
        if (ratio - 1.0).abs() > config.clip {
            clipped += 1;
        }
        if unclipped_obj <= clipped_obj {
            // d(-ratio * adv / B) / d(log prob)
            let d_lp = -adv * ratio / nb;
            for j in 0..ACTION_DIM {
                let diff = u[j] - mean_row[j];
                d_mean[[r, j]] = d_lp * diff * inv_var[j];
                d_log_std[j] += d_lp * (diff * diff * inv_var[j] - 1.0);
            }
        }
        let err = values[r] - batch.returns[i];
        report.value_loss += err * err / nb;
        d_value[[r, 0]] = 2.0 * config.value_coef * err / nb;
    }
    report.clip_fraction = clipped as f64 / nb;
    report.entropy = params
        .log_std
        .iter()
        .map(|s| s + 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln())
        .sum();
    report.total = report.policy_loss + config.value_coef * report.value_loss - config.entropy_coef * report.entropy;
    for d in d_log_std.iter_mut() {
        *d -= config.entropy_coef;
    }

    let na = params.actor.params().len();
    let nc = params.critic.params().len();
    let mut grad = vec![0.0; na + nc + ACTION_DIM];
    params.actor.backward(&actor_cache, d_mean, &mut grad[..na]);
    params.critic.backward(&critic_cache, d_value, &mut grad[na..na + nc]);
    grad[na + nc..].copy_from_slice(&d_log_std);
    (report, grad)
}

pub fn global_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], config: &PpoConfig) {
        self.t += 1;
        let (b1, b2) = (config.adam_beta1, config.adam_beta2);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * grad[i];
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.adam_epsilon);
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
    pub minibatches: usize,
}

/// Runs the epochs of minibatch Adam steps over `batch`. Advantages are
/// normalized over the whole batch first. A non-finite loss or gradient
/// aborts before the offending step is applied.
pub fn ppo_update<R: Rng>(
    params: &mut PolicyParameters,
    adam: &mut Adam,
    batch: &RolloutBatch,
    config: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats> {
    batch.check()?;
    if batch.is_empty() {
        return Ok(UpdateStats::default());
    }
    let mut normalized = batch.clone();
    normalize(&mut normalized.advantages);

    let mut flat = params.to_flat();
    let mut stats = UpdateStats::default();
    let mut order: Vec<usize> = (0..batch.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(config.minibatch_size) {
            let (report, mut grad) = loss_and_grad(params, &normalized, chunk, config);
            let norm = global_norm(&grad);
            if !(report.total.is_finite() && norm.is_finite()) {
                return Err(Error::Diverged(format!(
                    "non-finite PPO loss (policy {}, value {})",
                    report.policy_loss, report.value_loss
                )));
            }
            if norm > config.max_grad_norm {
                let k = config.max_grad_norm / norm;
                grad.iter_mut().for_each(|g| *g *= k);
            }
            adam.step(&mut flat, &grad, config);
            params.set_flat(&flat)?;
            stats.policy_loss += report.policy_loss;
            stats.value_loss += report.value_loss;
            stats.entropy += report.entropy;
            stats.approx_kl += report.approx_kl;
            stats.clip_fraction += report.clip_fraction;
            stats.grad_norm += norm;
            stats.minibatches += 1;
        }
    }
    let k = 1.0 / stats.minibatches as f64;
    stats.policy_loss *= k;
    stats.value_loss *= k;
    stats.entropy *= k;
    stats.approx_kl *= k;
    stats.clip_fraction *= k;
    stats.grad_norm *= k;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::observation::Observation;
    use crate::learner::policy::NetworkConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Uniform};

    fn toy() -> NetworkConfig {
        NetworkConfig {
            hidden: vec![3],
            log_std_init: -0.5,
        }
    }

    fn batch_for(params: &PolicyParameters, n: usize, seed: u64) -> RolloutBatch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit = Uniform::new(-1.0, 1.0);
        let mut b = RolloutBatch::default();
        for _ in 0..n {
            let mut o = [0.0; 12];
            o.iter_mut().for_each(|x| *x = unit.sample(&mut rng));
            let s = params.sample(&Observation(o), &mut rng);
            b.observations.push(o);
            b.pre_squash.push(s.pre_squash);
            b.old_log_probs.push(s.log_prob);
            b.advantages.push(unit.sample(&mut rng));
            b.returns.push(unit.sample(&mut rng));
        }
        b
    }

    #[test]
    fn same_params_give_unit_ratio() {
        let p = PolicyParameters::new(&toy(), 1);
        let b = batch_for(&p, 32, 2);
        let idx: Vec<usize> = (0..32).collect();
        let (r, _) = loss_and_grad(&p, &b, &idx, &PpoConfig::default());
        assert_eq!(r.clip_fraction, 0.0);
        assert!(r.approx_kl.abs() < 1e-12);
        let expected: f64 = -b.advantages.iter().sum::<f64>() / 32.0;
        assert!((r.policy_loss - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_advantage_has_no_actor_gradient() {
        let p = PolicyParameters::new(&toy(), 3);
        let mut b = batch_for(&p, 16, 4);
        b.advantages.iter_mut().for_each(|a| *a = 0.0);
        let idx: Vec<usize> = (0..16).collect();
        let (_, g) = loss_and_grad(&p, &b, &idx, &PpoConfig::default());
        let na = p.actor.params().len();
        let nc = p.critic.params().len();
        let actor: Vec<f64> = g[..na].iter().chain(&g[na + nc..]).copied().collect();
        assert!(global_norm(&actor) < 1e-8);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let behaviour = PolicyParameters::new(&toy(), 5);
        let b = batch_for(&behaviour, 10, 6);
        // Move away from the behaviour policy so ratios differ from one.
        let mut p = behaviour.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut flat = p.to_flat();
        flat.iter_mut()
            .for_each(|x| *x += 0.05 * Uniform::new(-1.0, 1.0).sample(&mut rng));
        p.set_flat(&flat).unwrap();
        let config = PpoConfig {
            entropy_coef: 0.01,
            ..PpoConfig::default()
        };
        let idx: Vec<usize> = (0..10).collect();
        let (_, grad) = loss_and_grad(&p, &b, &idx, &config);
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for i in 0..flat.len() {
            let mut q = p.clone();
            let mut f = flat.clone();
            f[i] += h;
            q.set_flat(&f).unwrap();
            let up = loss_and_grad(&q, &b, &idx, &config).0.total;
            f[i] -= 2.0 * h;
            q.set_flat(&f).unwrap();
            let down = loss_and_grad(&q, &b, &idx, &config).0.total;
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - grad[i]).abs() / (fd.abs() + grad[i].abs()).max(1e-6);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let mut p = PolicyParameters::new(&toy(), 8);
        let before = p.clone();
        let b = batch_for(&p, 40, 9);
        let config = PpoConfig {
            learning_rate: 0.0,
            minibatch_size: 16,
            ..PpoConfig::default()
        };
        let mut adam = Adam::new(p.parameter_count());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        ppo_update(&mut p, &mut adam, &b, &config, &mut rng).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn update_improves_surrogate() {
        let mut p = PolicyParameters::new(&toy(), 10);
        let b = batch_for(&p, 64, 11);
        let idx: Vec<usize> = (0..64).collect();
        let config = PpoConfig {
            minibatch_size: 64,
            epochs: 5,
            ..PpoConfig::default()
        };
        let mut normalized = b.clone();
        normalize(&mut normalized.advantages);
        let before = loss_and_grad(&p, &normalized, &idx, &config).0.total;
        let mut adam = Adam::new(p.parameter_count());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let stats = ppo_update(&mut p, &mut adam, &b, &config, &mut rng).unwrap();
        let after = loss_and_grad(&p, &normalized, &idx, &config).0.total;
        assert!(after < before);
        assert_eq!(stats.minibatches, 5);
    }

    #[test]
    fn nan_advantage_aborts() {
        let mut p = PolicyParameters::new(&toy(), 12);
        let mut b = batch_for(&p, 8, 13);
        b.returns[3] = f64::NAN;
        let mut adam = Adam::new(p.parameter_count());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let before = p.clone();
        assert!(matches!(
            ppo_update(&mut p, &mut adam, &b, &PpoConfig::default(), &mut rng),
            Err(Error::Diverged(_))
        ));
        assert_eq!(p, before);
    }
}
