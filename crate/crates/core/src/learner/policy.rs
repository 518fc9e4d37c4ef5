//! Actor-critic parameters, the tanh-squashed Gaussian policy and
//! checkpoint persistence.

use std::f64::consts::{LN_2, PI};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::aircraft::ControlAction;
use crate::error::{Error, Result};
use crate::learner::network::Mlp;
use crate::learner::observation::{Observation, OBS_DIM};

pub const ACTION_DIM: usize = ControlAction::DIM;
const THROTTLE: usize = 3;
const CHECKPOINT_FORMAT: &str = "evasion-policy/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    /// Hidden layer widths shared by actor and critic.
    pub hidden: Vec<usize>,
    pub log_std_init: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            log_std_init: -0.5,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config("network.hidden must list positive widths".into()));
        }
        if !self.log_std_init.is_finite() {
            return Err(Error::Config("network.log_std_init must be finite".into()));
        }
        Ok(())
    }

    fn sizes(&self, output: usize) -> Vec<usize> {
        let mut s = vec![OBS_DIM];
        s.extend(&self.hidden);
        s.push(output);
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyParameters {
    pub actor: Mlp,
    pub critic: Mlp,
    pub log_std: [f64; ACTION_DIM],
}

/// Maps a squashed sample in [-1, 1]^4 to control bounds.
pub fn squashed_to_action(s: [f64; ACTION_DIM]) -> ControlAction {
    ControlAction::new(s[0], s[1], s[2], 0.5 * (s[THROTTLE] + 1.0)).clamped()
}

/// `ln(1 - tanh(u)^2)`, evaluated without cancellation for large |u|.
fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (LN_2 - u - softplus(-2.0 * u))
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Log-density of the squashed action produced by pre-squash sample `u`
/// under mean `mean` (pre-squash) and `log_std`.
pub fn log_prob(mean: &[f64], log_std: &[f64; ACTION_DIM], u: &[f64; ACTION_DIM]) -> f64 {
    let mut lp = 0.0;
    for j in 0..ACTION_DIM {
        let std = log_std[j].exp();
        let z = (u[j] - mean[j]) / std;
        lp += -0.5 * z * z - log_std[j] - 0.5 * (2.0 * PI).ln();
        lp -= log_one_minus_tanh_sq(u[j]);
    }
    // Throttle is rescaled by 1/2 after squashing.
    lp + LN_2
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampledAction {
    pub action: ControlAction,
    /// Pre-squash Gaussian sample.
    pub pre_squash: [f64; ACTION_DIM],
    pub log_prob: f64,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolicyOutput {
    /// Deterministic action (squashed mean, throttle remapped to [0, 1]).
    pub mean: [f64; ACTION_DIM],
    /// Gaussian mean before squashing.
    pub pre_squash_mean: [f64; ACTION_DIM],
    pub value: f64,
}

impl PolicyOutput {
    pub fn action(&self) -> ControlAction {
        ControlAction::from_array(self.mean)
    }
}

impl PolicyParameters {
    pub fn new(config: &NetworkConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor = Mlp::init(&config.sizes(ACTION_DIM), true, 0.01, &mut rng);
        let critic = Mlp::init(&config.sizes(1), false, 1.0, &mut rng);
        Self {
            actor,
            critic,
            log_std: [config.log_std_init; ACTION_DIM],
        }
    }

    pub fn zeros(config: &NetworkConfig) -> Self {
        Self {
            actor: Mlp::zeros(&config.sizes(ACTION_DIM), true),
            critic: Mlp::zeros(&config.sizes(1), false),
            log_std: [config.log_std_init; ACTION_DIM],
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.actor.params().len() + self.critic.params().len() + ACTION_DIM
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.parameter_count());
        v.extend_from_slice(self.actor.params());
        v.extend_from_slice(self.critic.params());
        v.extend_from_slice(&self.log_std);
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.parameter_count() {
            return Err(Error::LengthMismatch {
                what: "flat parameters",
                left: flat.len(),
                right: self.parameter_count(),
            });
        }
        let na = self.actor.params().len();
        let nc = self.critic.params().len();
        self.actor.params_mut().copy_from_slice(&flat[..na]);
        self.critic.params_mut().copy_from_slice(&flat[na..na + nc]);
        self.log_std.copy_from_slice(&flat[na + nc..]);
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }

    pub fn forward(&self, obs: &Observation) -> PolicyOutput {
        // The actor's output pre-activation is the Gaussian mean; its tanh is
        // the deterministic action.
        let mut pre = [0.0; ACTION_DIM];
        self.actor.preactivation_one(obs.as_slice(), &mut pre);
        let mut value = [0.0];
        self.critic.predict_one(obs.as_slice(), &mut value);
        let mut mean = pre.map(f64::tanh);
        mean[THROTTLE] = 0.5 * (mean[THROTTLE] + 1.0);
        PolicyOutput {
            mean,
            pre_squash_mean: pre,
            value: value[0],
        }
    }

    pub fn value(&self, obs: &Observation) -> f64 {
        let mut value = [0.0];
        self.critic.predict_one(obs.as_slice(), &mut value);
        value[0]
    }

    pub fn sample<R: Rng>(&self, obs: &Observation, rng: &mut R) -> SampledAction {
        let out = self.forward(obs);
        let mut u = [0.0; ACTION_DIM];
        let mut s = [0.0; ACTION_DIM];
        for j in 0..ACTION_DIM {
            let eps: f64 = rng.sample(StandardNormal);
            u[j] = out.pre_squash_mean[j] + self.log_std[j].exp() * eps;
            s[j] = u[j].tanh();
        }
        SampledAction {
            action: squashed_to_action(s),
            pre_squash: u,
            log_prob: log_prob(&out.pre_squash_mean, &self.log_std, &u),
            value: out.value,
        }
    }

    pub fn save(&self, path: &Path, meta: &CheckpointMeta) -> Result<()> {
        let text = self.to_checkpoint_string(meta)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn to_checkpoint_string(&self, meta: &CheckpointMeta) -> Result<String> {
        let doc = CheckpointDoc {
            format: CHECKPOINT_FORMAT.to_string(),
            meta: meta.clone(),
            actor: LayerDoc::from_mlp(&self.actor),
            critic: LayerDoc::from_mlp(&self.critic),
            log_std: self.log_std.to_vec(),
        };
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<(Self, CheckpointMeta)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_str(&text).map_err(|e| match e {
            Error::Json(j) => Error::Checkpoint {
                path: path.to_path_buf(),
                reason: j.to_string(),
            },
            Error::Checkpoint { reason, .. } => Error::Checkpoint {
                path: path.to_path_buf(),
                reason,
            },
            other => Error::Checkpoint {
                path: path.to_path_buf(),
                reason: other.to_string(),
            },
        })
    }

    pub fn from_checkpoint_str(text: &str) -> Result<(Self, CheckpointMeta)> {
        let doc: CheckpointDoc = serde_json::from_str(text)?;
        let bad = |reason: String| Error::Checkpoint {
            path: Default::default(),
            reason,
        };
        if doc.format != CHECKPOINT_FORMAT {
            return Err(bad(format!("unsupported format {:?}", doc.format)));
        }
        let log_std: [f64; ACTION_DIM] = doc
            .log_std
            .as_slice()
            .try_into()
            .map_err(|_| bad("log_std must have 4 entries".into()))?;
        let actor = LayerDoc::to_mlp(doc.actor, true)?;
        let critic = LayerDoc::to_mlp(doc.critic, false)?;
        if actor.input_dim() != OBS_DIM || actor.output_dim() != ACTION_DIM {
            return Err(bad("actor must map 12 inputs to 4 outputs".into()));
        }
        if critic.input_dim() != OBS_DIM || critic.output_dim() != 1 {
            return Err(bad("critic must map 12 inputs to 1 output".into()));
        }
        let params = Self { actor, critic, log_std };
        if !params.is_finite() {
            return Err(bad("non-finite weights".into()));
        }
        Ok((params, doc.meta))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub task: String,
    pub seed: u64,
    pub config_hash: String,
    pub episodes: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointDoc {
    format: String,
    meta: CheckpointMeta,
    actor: Vec<LayerDoc>,
    critic: Vec<LayerDoc>,
    log_std: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerDoc {
    rows: usize,
    cols: usize,
    /// Row-major `(rows, cols)`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl LayerDoc {
    fn from_mlp(net: &Mlp) -> Vec<LayerDoc> {
        (0..net.sizes().len() - 1)
            .map(|l| {
                let (w, b) = net.layer(l);
                LayerDoc {
                    rows: w.nrows(),
                    cols: w.ncols(),
                    weights: w.iter().copied().collect(),
                    bias: b.to_vec(),
                }
            })
            .collect()
    }

    fn to_mlp(layers: Vec<LayerDoc>, tanh_output: bool) -> Result<Mlp> {
        let bad = |reason: String| Error::Checkpoint {
            path: Default::default(),
            reason,
        };
        if layers.is_empty() {
            return Err(bad("network has no layers".into()));
        }
        let mut sizes = vec![layers[0].cols];
        let mut params = Vec::new();
        for (i, l) in layers.into_iter().enumerate() {
            if l.cols != *sizes.last().unwrap() {
                return Err(bad(format!("layer {i} expects {} inputs", l.cols)));
            }
            if l.weights.len() != l.rows * l.cols || l.bias.len() != l.rows {
                return Err(bad(format!("layer {i} has inconsistent shape")));
            }
            sizes.push(l.rows);
            params.extend(l.weights);
            params.extend(l.bias);
        }
        Mlp::from_parts(sizes, tanh_output, params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> NetworkConfig {
        NetworkConfig {
            hidden: vec![16, 16],
            log_std_init: -0.5,
        }
    }

    #[test]
    fn zero_weights_give_zero_means() {
        let p = PolicyParameters::zeros(&small());
        let out = p.forward(&Observation([0.3; OBS_DIM]));
        assert_eq!(out.mean, [0.0, 0.0, 0.0, 0.5]);
        assert_eq!(out.value, 0.0);
    }

    #[test]
    fn deterministic_forward_and_sampling() {
        let p = PolicyParameters::new(&small(), 4);
        let obs = Observation([0.1; OBS_DIM]);
        assert_eq!(p.forward(&obs), p.forward(&obs));
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let mut r2 = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(p.sample(&obs, &mut r1), p.sample(&obs, &mut r2));
    }

    #[test]
    fn tiny_std_collapses_to_mean() {
        let mut p = PolicyParameters::new(&small(), 5);
        p.log_std = [-40.0; ACTION_DIM];
        let obs = Observation([-0.2; OBS_DIM]);
        let mean = p.forward(&obs).mean;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = p.sample(&obs, &mut rng).action.to_array();
        for j in 0..ACTION_DIM {
            assert!((a[j] - mean[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn log_prob_matches_change_of_variables() {
        // Density of a = tanh(u) under u ~ N(m, s): N(u) / (1 - a^2).
        let mean: [f64; 4] = [0.3, -0.2, 0.0, 0.5];
        let log_std: [f64; 4] = [-0.5, -0.1, 0.2, -1.0];
        let u: [f64; 4] = [0.4, -1.2, 2.5, 0.0];
        let mut expected = LN_2;
        for j in 0..ACTION_DIM {
            let s = log_std[j].exp();
            let n = (-(u[j] - mean[j]).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt());
            expected += (n / (1.0 - u[j].tanh().powi(2))).ln();
        }
        assert!((log_prob(&mean, &log_std, &u) - expected).abs() < 1e-10);
    }

    #[test]
    fn stable_log_jacobian_for_large_pre_squash() {
        let v = log_one_minus_tanh_sq(40.0);
        assert!(v.is_finite());
        assert!((v - (2.0 * LN_2 - 80.0)).abs() < 1e-9);
    }

    #[test]
    fn checkpoint_round_trip_bytes() {
        let p = PolicyParameters::new(&small(), 11);
        let meta = CheckpointMeta {
            task: "steep-turn".into(),
            seed: 11,
            config_hash: "abc".into(),
            episodes: 3,
        };
        let first = p.to_checkpoint_string(&meta).unwrap();
        let (back, meta_back) = PolicyParameters::from_checkpoint_str(&first).unwrap();
        assert_eq!(back, p);
        assert_eq!(meta_back, meta);
        assert_eq!(back.to_checkpoint_string(&meta_back).unwrap(), first);
    }

    #[test]
    fn checkpoint_rejects_wrong_shapes() {
        let p = PolicyParameters::new(&small(), 1);
        let text = p.to_checkpoint_string(&CheckpointMeta::default()).unwrap();
        let broken = text.replacen("\"rows\": 16", "\"rows\": 15", 1);
        assert!(PolicyParameters::from_checkpoint_str(&broken).is_err());
    }

    #[test]
    fn flat_round_trip() {
        let mut p = PolicyParameters::new(&small(), 2);
        let flat = p.to_flat();
        let mut q = PolicyParameters::zeros(&small());
        q.set_flat(&flat).unwrap();
        assert_eq!(p, q);
        assert!(p.set_flat(&flat[1..]).is_err());
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn seed_zero_golden_forward() {
        let p = PolicyParameters::new(&NetworkConfig::default(), 0);
        // Biases start at zero, so the all-zeros observation maps to zero.
        let zero = p.forward(&Observation([0.0; OBS_DIM]));
        assert_eq!(zero.mean, [0.0, 0.0, 0.0, 0.5]);
        assert_eq!(zero.value, 0.0);

        let mut obs = [0.0; OBS_DIM];
        for (i, v) in obs.iter_mut().enumerate() {
            *v = (i as f64 - 5.5) / 6.0;
        }
        let out = p.forward(&Observation(obs));
        let golden_pre = [
            -1.7559090007677227e-6,
            -0.0003712311854375943,
            -0.006519915273831102,
            -0.001936151473115375,
        ];
        for j in 0..ACTION_DIM {
            assert!(
                (out.pre_squash_mean[j] - golden_pre[j]).abs() < 1e-12,
                "{j}: {}",
                out.pre_squash_mean[j]
            );
        }
        assert!((out.mean[THROTTLE] - 0.49903192547311004).abs() < 1e-12);
        assert!((out.value - -0.010672816612932694).abs() < 1e-12);
    }

    /// E[tanh(u)] for u ~ N(m, s), by the trapezoid rule over +-10 s.
    fn expected_tanh(m: f64, s: f64) -> f64 {
        let n = 20_000;
        let h = 20.0 * s / n as f64;
        let mut acc = 0.0;
        for k in 0..=n {
            let u = m - 10.0 * s + k as f64 * h;
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            let z = (u - m) / s;
            acc += w * u.tanh() * (-0.5 * z * z).exp();
        }
        acc * h / (s * (2.0 * PI).sqrt())
    }

    #[test]
    fn sample_mean_matches_squashed_mean() {
        let n = 100_000;
        let obs = Observation([0.05; OBS_DIM]);
        for (policy, centred) in [(PolicyParameters::zeros(&small()), true), (biased(), false)] {
            let out = policy.forward(&obs);
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let mut sum = [0.0; ACTION_DIM];
            let mut sum_sq = [0.0; ACTION_DIM];
            for _ in 0..n {
                let a = policy.sample(&obs, &mut rng).action.to_array();
                for j in 0..ACTION_DIM {
                    sum[j] += a[j];
                    sum_sq[j] += a[j] * a[j];
                }
            }
            for j in 0..ACTION_DIM {
                let mean = sum[j] / n as f64;
                let sd = (sum_sq[j] / n as f64 - mean * mean).sqrt();
                let s = policy.log_std[j].exp();
                let mut expected = expected_tanh(out.pre_squash_mean[j], s);
                if j == THROTTLE {
                    expected = 0.5 * (expected + 1.0);
                }
                if centred {
                    // With a zero pre-squash mean the squashed mean is exact.
                    assert!((expected - out.mean[j]).abs() < 1e-9);
                }
                assert!(
                    (mean - expected).abs() < 3.0 * sd / (n as f64).sqrt(),
                    "dim {j}: {mean} vs {expected}"
                );
            }
        }
    }

    fn biased() -> PolicyParameters {
        let mut p = PolicyParameters::zeros(&small());
        let last = p.actor.params().len() - ACTION_DIM;
        p.actor.params_mut()[last..].copy_from_slice(&[0.8, -0.4, 0.0, 1.5]);
        p.log_std = [-0.5, 0.0, -1.0, -0.3];
        p
    }
}
