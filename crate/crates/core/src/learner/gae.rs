//! Generalized advantage estimation.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Advantages {
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

/// GAE over one trajectory segment. `values` carries one entry per reward,
/// plus the bootstrap value of the state after the last reward unless the
/// segment ends in a terminal state.
pub fn compute_gae(rewards: &[f64], values: &[f64], terminal: bool, gamma: f64, lambda: f64) -> Result<Advantages> {
    let expected = rewards.len() + usize::from(!terminal);
    if values.len() != expected {
        return Err(Error::LengthMismatch {
            what: "gae values",
            left: values.len(),
            right: expected,
        });
    }
    let n = rewards.len();
    let mut advantages = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let next = if t + 1 < n {
            values[t + 1]
        } else if terminal {
            0.0
        } else {
            values[n]
        };
        let delta = rewards[t] + gamma * next - values[t];
        acc = delta + gamma * lambda * acc;
        advantages[t] = acc;
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok(Advantages { advantages, returns })
}

/// Shifts and scales to zero mean and unit variance. Batches with (near)
/// zero spread are only centred.
pub fn normalize(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    for v in values.iter_mut() {
        *v -= mean;
        if std > 1e-8 {
            *v /= std;
        }
    }
}
