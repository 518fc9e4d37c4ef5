//! Fully connected tanh network stored as one flat parameter vector.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layer widths from input to output; parameters are laid out layer by
/// layer as a row-major `(out, in)` weight matrix followed by the bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    /// Whether the output layer is squashed by tanh.
    tanh_output: bool,
    params: Vec<f64>,
}

/// Activations retained by [`Mlp::forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct MlpCache {
    /// `activations[0]` is the input; `activations[l]` the output of layer `l`
    /// after its nonlinearity (for hidden layers).
    activations: Vec<Array2<f64>>,
    /// Output layer before any squashing.
    pub output_preactivation: Array2<f64>,
}

impl MlpCache {
    /// Network output after the optional tanh.
    pub fn output(&self, tanh_output: bool) -> Array2<f64> {
        if tanh_output {
            self.output_preactivation.mapv(f64::tanh)
        } else {
            self.output_preactivation.clone()
        }
    }
}

pub fn parameter_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    pub fn zeros(sizes: &[usize], tanh_output: bool) -> Self {
        assert!(sizes.len() >= 2, "network needs input and output widths");
        Self {
            sizes: sizes.to_vec(),
            tanh_output,
            params: vec![0.0; parameter_count(sizes)],
        }
    }

    /// Glorot-uniform weights, zero biases; the last layer is scaled by
    /// `output_gain`.
    pub fn init<R: Rng>(sizes: &[usize], tanh_output: bool, output_gain: f64, rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes, tanh_output);
        let layers = net.sizes.len() - 1;
        let mut offset = 0;
        for l in 0..layers {
            let (n_in, n_out) = (net.sizes[l], net.sizes[l + 1]);
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            let gain = if l + 1 == layers { output_gain } else { 1.0 };
            let dist = Uniform::new_inclusive(-limit, limit);
            for w in &mut net.params[offset..offset + n_in * n_out] {
                *w = gain * dist.sample(rng);
            }
            offset += n_in * n_out + n_out;
        }
        net
    }

    pub fn from_parts(sizes: Vec<usize>, tanh_output: bool, params: Vec<f64>) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config("network widths must be positive".into()));
        }
        let expected = parameter_count(&sizes);
        if params.len() != expected {
            return Err(Error::LengthMismatch {
                what: "network parameters",
                left: params.len(),
                right: expected,
            });
        }
        Ok(Self {
            sizes,
            tanh_output,
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn tanh_output(&self) -> bool {
        self.tanh_output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    /// `(weights, bias)` views of layer `l`.
    pub fn layer(&self, l: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let offset = self.layer_offset(l);
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let w =
            ArrayView2::from_shape((n_out, n_in), &self.params[offset..offset + n_in * n_out]).expect("layer shape");
        let b = ArrayView1::from(&self.params[offset + n_in * n_out..offset + n_in * n_out + n_out]);
        (w, b)
    }

    fn layer_offset(&self, l: usize) -> usize {
        parameter_count(&self.sizes[..=l])
    }

    pub fn forward(&self, input: ArrayView2<'_, f64>) -> MlpCache {
        let layers = self.sizes.len() - 1;
        let mut activations = Vec::with_capacity(layers);
        let mut x = input.to_owned();
        for l in 0..layers {
            let (w, b) = self.layer(l);
            let mut z = x.dot(&w.t());
            z += &b;
            activations.push(x);
            if l + 1 == layers {
                return MlpCache {
                    activations,
                    output_preactivation: z,
                };
            }
            z.mapv_inplace(f64::tanh);
            x = z;
        }
        unreachable!("network has at least one layer")
    }

    /// Batched output, with the output squashing applied.
    pub fn predict(&self, input: ArrayView2<'_, f64>) -> Array2<f64> {
        self.forward(input).output(self.tanh_output)
    }

    /// Single-sample forward pass without a batch cache.
    pub fn predict_one(&self, input: &[f64], out: &mut [f64]) {
        self.single(input, out, self.tanh_output)
    }

    /// Single-sample output pre-activation (no output squashing).
    pub fn preactivation_one(&self, input: &[f64], out: &mut [f64]) {
        self.single(input, out, false)
    }

    fn single(&self, input: &[f64], out: &mut [f64], squash_output: bool) {
        let layers = self.sizes.len() - 1;
        let mut x = input.to_vec();
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let offset = self.layer_offset(l);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let last = l + 1 == layers;
            let mut y = vec![0.0; n_out];
            for (o, yo) in y.iter_mut().enumerate() {
                let row = &w[o * n_in..(o + 1) * n_in];
                let mut acc = b[o];
                for (wi, xi) in row.iter().zip(&x) {
                    acc += wi * xi;
                }
                *yo = if !last || squash_output { acc.tanh() } else { acc };
            }
            x = y;
        }
        out.copy_from_slice(&x);
    }

    /// Accumulates parameter gradients into `grad` given the gradient of the
    /// loss with respect to the output pre-activation.
    pub fn backward(&self, cache: &MlpCache, d_output_pre: Array2<f64>, grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.params.len());
        let layers = self.sizes.len() - 1;
        let mut dz = d_output_pre;
        for l in (0..layers).rev() {
            let a_prev = &cache.activations[l];
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let offset = self.layer_offset(l);
            let dw = dz.t().dot(a_prev);
            let db = dz.sum_axis(Axis(0));
            for (g, d) in grad[offset..offset + n_in * n_out].iter_mut().zip(dw.iter()) {
                *g += d;
            }
            for (g, d) in grad[offset + n_in * n_out..offset + n_in * n_out + n_out]
                .iter_mut()
                .zip(db.iter())
            {
                *g += d;
            }
            if l == 0 {
                break;
            }
            let (w, _) = self.layer(l);
            let mut da = dz.dot(&w);
            // a_prev is a tanh output for every hidden layer.
            ndarray::Zip::from(&mut da)
                .and(a_prev)
                .for_each(|d, &a| *d *= 1.0 - a * a);
            dz = da;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[12, 8, 8, 4], true);
        let out = net.predict(Array2::<f64>::ones((3, 12)).view());
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_and_batched_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::init(&[5, 7, 6, 2], false, 1.0, &mut rng);
        let x = array![[0.1, -0.4, 0.9, 0.0, 0.3]];
        let batched = net.predict(x.view());
        let mut one = [0.0; 2];
        net.predict_one(x.row(0).as_slice().unwrap(), &mut one);
        for i in 0..2 {
            assert!((batched[[0, i]] - one[i]).abs() < 1e-14);
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut net = Mlp::init(&[3, 4, 2], true, 1.0, &mut rng);
        let x = array![[0.2, -0.7, 0.5], [0.9, 0.1, -0.3]];
        // Loss: sum of squared output pre-activations / 2.
        let loss = |n: &Mlp| {
            let c = n.forward(x.view());
            c.output_preactivation.iter().map(|v| 0.5 * v * v).sum::<f64>()
        };
        let cache = net.forward(x.view());
        let mut grad = vec![0.0; net.params().len()];
        net.backward(&cache, cache.output_preactivation.clone(), &mut grad);
        let h = 1e-6;
        for i in 0..grad.len() {
            let orig = net.params()[i];
            net.params_mut()[i] = orig + h;
            let up = loss(&net);
            net.params_mut()[i] = orig - h;
            let down = loss(&net);
            net.params_mut()[i] = orig;
            let fd = (up - down) / (2.0 * h);
            assert!(
                (fd - grad[i]).abs() < 1e-7 * (1.0 + fd.abs()),
                "param {i}: {fd} vs {}",
                grad[i]
            );
        }
    }

    #[test]
    fn from_parts_checks_length() {
        assert!(Mlp::from_parts(vec![2, 2], false, vec![0.0; 5]).is_err());
        assert!(Mlp::from_parts(vec![2, 2], false, vec![0.0; 6]).is_ok());
    }
}
