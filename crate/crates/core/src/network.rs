//! A small fully connected network: leaky-ReLU hidden layers and a
//! sigmoid or identity output head. Forward and backward passes run on
//! whole batches (rows = samples); the backward pass also produces the
//! gradient with respect to the network input so trainable encoders
//! can continue the chain.

use crate::error::{Error, Result};
use crate::numerics::{real, DenseMatrix, Pcg32, Real};

/// How the last layer's pre-activations are squashed. Image tasks use
/// `Sigmoid` to pin outputs into `[0,1]`; distance fields keep raw
/// values with `Identity`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Identity,
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq)]
struct Layer<T> {
    /// `fan_in x fan_out`, so a batch maps through as `x * weights`.
    weights: DenseMatrix<T>,
    bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    layers: Vec<Layer<T>>,
    dims: Vec<usize>,
    leaky_slope: T,
    output_activation: OutputActivation,
}

/// Post-activation values of every layer for one forward pass; the
/// backward pass consumes them together with the original input.
#[derive(Debug)]
pub struct ForwardCache<T> {
    activations: Vec<DenseMatrix<T>>,
}

impl<T: Real> ForwardCache<T> {
    pub fn output(&self) -> &DenseMatrix<T> {
        self.activations.last().expect("cache is never empty")
    }

    /// Post-activation values of every layer, hidden layers first and the
    /// output last. Diagnostics use this to see how close the hidden units
    /// sit to the leaky-ReLU corner, where finite differences misbehave.
    pub fn activations(&self) -> &[DenseMatrix<T>] {
        &self.activations
    }
}

/// Parameter and input gradients of one backward pass.
#[derive(Debug)]
pub struct MlpGradients<T> {
    pub weights: Vec<DenseMatrix<T>>,
    pub biases: Vec<Vec<T>>,
    /// Gradient of the loss with respect to the network input, one row
    /// per sample; feeds the encoder's parameter gradients.
    pub input: DenseMatrix<T>,
}

impl<T: Real> MlpGradients<T> {
    /// Gradient groups in the same order as [`Mlp::param_slices`].
    pub fn param_slices(&self) -> Vec<&[T]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.data(), b.as_slice()])
            .collect()
    }
}

impl<T: Real> Mlp<T> {
    /// Builds a network with the given layer dims (input, hidden...,
    /// output). Weights are Xavier-uniform, `+-sqrt(6 / (fan_in +
    /// fan_out))`, drawn row-major layer by layer; biases start at
    /// zero.
    pub fn init(
        dims: &[usize],
        leaky_slope: f64,
        output_activation: OutputActivation,
        rng: &mut Pcg32,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::config(
                "network needs at least an input and an output dimension".to_string(),
            ));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::config("network layer dims must be positive"));
        }
        if !(leaky_slope.is_finite() && leaky_slope >= 0.0 && leaky_slope < 1.0) {
            return Err(Error::config(format!(
                "leaky slope {leaky_slope} must lie in [0, 1)"
            )));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data: Vec<T> = (0..fan_in * fan_out)
                .map(|_| real(rng.uniform(-bound, bound)))
                .collect();
            layers.push(Layer {
                weights: DenseMatrix::from_vec(fan_in, fan_out, data)?,
                bias: vec![T::zero(); fan_out],
            });
        }
        Ok(Mlp {
            layers,
            dims: dims.to_vec(),
            leaky_slope: real(leaky_slope),
            output_activation,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn leaky_slope(&self) -> T {
        self.leaky_slope
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output_activation
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.data().len() + l.bias.len())
            .sum()
    }

    /// Trainable parameter groups: weights then bias, layer by layer.
    pub fn param_slices(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.data(), l.bias.as_slice()])
            .collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                let Layer { weights, bias } = l;
                [weights.data_mut(), bias.as_mut_slice()]
            })
            .collect()
    }

    /// Runs a batch through the network; rows are samples.
    pub fn forward(&self, input: &DenseMatrix<T>) -> Result<ForwardCache<T>> {
        if input.cols() != self.input_dim() {
            return Err(Error::config(format!(
                "network expects {} inputs, batch has {}",
                self.input_dim(),
                input.cols()
            )));
        }
        let mut activations = Vec::with_capacity(self.layers.len());
        let mut current = input;
        for (idx, layer) in self.layers.iter().enumerate() {
            let mut z = current.matmul(&layer.weights)?;
            for r in 0..z.rows() {
                let row = z.row_mut(r);
                for (v, &b) in row.iter_mut().zip(&layer.bias) {
                    *v = *v + b;
                }
            }
            let last = idx + 1 == self.layers.len();
            if last {
                match self.output_activation {
                    OutputActivation::Identity => {}
                    OutputActivation::Sigmoid => {
                        for v in z.data_mut() {
                            *v = sigmoid(*v);
                        }
                    }
                }
            } else {
                let slope = self.leaky_slope;
                for v in z.data_mut() {
                    if *v < T::zero() {
                        *v = *v * slope;
                    }
                }
            }
            activations.push(z);
            current = activations.last().unwrap();
        }
        Ok(ForwardCache { activations })
    }

    /// Backpropagates `upstream = dL/d(output)` through the pass
    /// recorded in `cache`, returning parameter gradients and the
    /// gradient with respect to `input`. The network itself is
    /// untouched.
    pub fn backward(
        &self,
        input: &DenseMatrix<T>,
        cache: &ForwardCache<T>,
        upstream: &DenseMatrix<T>,
    ) -> Result<MlpGradients<T>> {
        let output = cache.output();
        if upstream.rows() != output.rows() || upstream.cols() != output.cols() {
            return Err(Error::config(format!(
                "upstream gradient is {}x{}, output was {}x{}",
                upstream.rows(),
                upstream.cols(),
                output.rows(),
                output.cols()
            )));
        }

        // dz of the output layer.
        let mut delta = upstream.clone();
        match self.output_activation {
            OutputActivation::Identity => {}
            OutputActivation::Sigmoid => {
                // sigma' = a * (1 - a), from the cached post-activation.
                for (d, &a) in delta.data_mut().iter_mut().zip(output.data()) {
                    *d = *d * a * (T::one() - a);
                }
            }
        }

        let n_layers = self.layers.len();
        let mut weights = vec![DenseMatrix::zeros(0, 0); n_layers];
        let mut biases = vec![Vec::new(); n_layers];
        for l in (0..n_layers).rev() {
            let below: &DenseMatrix<T> = if l == 0 {
                input
            } else {
                &cache.activations[l - 1]
            };
            weights[l] = below.matmul_transpose_lhs(&delta)?;
            let mut db = vec![T::zero(); delta.cols()];
            for r in 0..delta.rows() {
                for (b, &d) in db.iter_mut().zip(delta.row(r)) {
                    *b = *b + d;
                }
            }
            biases[l] = db;

            let mut below_grad = delta.matmul_transpose_rhs(&self.layers[l].weights)?;
            if l > 0 {
                // Through the hidden leaky ReLU. The cached
                // post-activation has the sign of the pre-activation,
                // and a stored zero only arises from a zero input,
                // where the derivative is defined as the slope.
                let slope = self.leaky_slope;
                for (g, &a) in below_grad.data_mut().iter_mut().zip(below.data()) {
                    if a <= T::zero() {
                        *g = *g * slope;
                    }
                }
            }
            delta = below_grad;
        }
        Ok(MlpGradients {
            weights,
            biases,
            input: delta,
        })
    }
}

/// Numerically stable logistic function: never exponentiates a large
/// positive argument.
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::check_gradient;

    fn batch(rows: usize, cols: usize, rng: &mut Pcg32) -> DenseMatrix<f64> {
        let data = (0..rows * cols).map(|_| rng.uniform(-1.0, 1.0)).collect();
        DenseMatrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn xavier_bounds_and_zero_biases() {
        let mut rng = Pcg32::new(61, 0);
        let net =
            Mlp::<f32>::init(&[16, 64, 64, 64, 3], 0.01, OutputActivation::Sigmoid, &mut rng)
                .unwrap();
        let bounds: [f64; 4] = [
            (6.0f64 / 80.0).sqrt(),
            (6.0f64 / 128.0).sqrt(),
            (6.0f64 / 128.0).sqrt(),
            (6.0f64 / 67.0).sqrt(),
        ];
        for (layer, bound) in net.layers.iter().zip(bounds) {
            let max = layer
                .weights
                .data()
                .iter()
                .fold(0.0f32, |m, w| m.max(w.abs()));
            assert!(f64::from(max) <= bound, "weight {max} above {bound}");
            // Xavier draws should actually use the range, not hug zero.
            assert!(f64::from(max) > bound * 0.8);
            assert!(layer.bias.iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn init_is_seed_deterministic() {
        let a = Mlp::<f32>::init(&[4, 8, 2], 0.01, OutputActivation::Identity, &mut Pcg32::new(1, 7))
            .unwrap();
        let b = Mlp::<f32>::init(&[4, 8, 2], 0.01, OutputActivation::Identity, &mut Pcg32::new(1, 7))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_weights_yield_the_activation_of_zero() {
        let mut rng = Pcg32::new(62, 0);
        let mut net =
            Mlp::<f64>::init(&[3, 4, 2], 0.01, OutputActivation::Sigmoid, &mut rng).unwrap();
        for slice in net.param_slices_mut() {
            for v in slice {
                *v = 0.0;
            }
        }
        let x = batch(5, 3, &mut rng);
        let out = net.forward(&x).unwrap();
        assert!(out.output().data().iter().all(|&v| v == 0.5));

        let mut id_net =
            Mlp::<f64>::init(&[3, 4, 2], 0.01, OutputActivation::Identity, &mut rng).unwrap();
        for slice in id_net.param_slices_mut() {
            for v in slice {
                *v = 0.0;
            }
        }
        let out = id_net.forward(&x).unwrap();
        assert!(out.output().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_computed_single_unit_network() {
        // 1 -> 1 -> 1, w0 = 2, b0 = 0.5, w1 = 3, b1 = -1, slope 0.01.
        let mut rng = Pcg32::new(63, 0);
        let mut net =
            Mlp::<f64>::init(&[1, 1, 1], 0.01, OutputActivation::Identity, &mut rng).unwrap();
        let slices = net.param_slices_mut();
        let mut it = slices.into_iter();
        it.next().unwrap()[0] = 2.0;
        it.next().unwrap()[0] = 0.5;
        it.next().unwrap()[0] = 3.0;
        it.next().unwrap()[0] = -1.0;

        let x = DenseMatrix::from_vec(2, 1, vec![1.0, -1.0]).unwrap();
        let out = net.forward(&x).unwrap();
        // x=1: 3 * leaky(2.5) - 1 = 6.5; x=-1: 3 * (0.01 * -1.5) - 1.
        assert!((out.output().get(0, 0) - 6.5).abs() < 1e-12);
        assert!((out.output().get(1, 0) - (-1.045)).abs() < 1e-12);
    }

    #[test]
    fn leaky_derivative_at_exactly_zero_uses_the_slope() {
        // Zero input with zero bias puts the hidden pre-activation at
        // exactly 0; the input gradient must then carry the slope.
        let mut rng = Pcg32::new(64, 0);
        let mut net =
            Mlp::<f64>::init(&[1, 1, 1], 0.25, OutputActivation::Identity, &mut rng).unwrap();
        let slices = net.param_slices_mut();
        let mut it = slices.into_iter();
        it.next().unwrap()[0] = 2.0; // w0
        it.next().unwrap()[0] = 0.0; // b0
        it.next().unwrap()[0] = 3.0; // w1
        it.next().unwrap()[0] = 0.0; // b1

        let x = DenseMatrix::from_vec(1, 1, vec![0.0]).unwrap();
        let cache = net.forward(&x).unwrap();
        let upstream = DenseMatrix::from_vec(1, 1, vec![1.0]).unwrap();
        let grads = net.backward(&x, &cache, &upstream).unwrap();
        // dL/dx = w1 * slope * w0 = 3 * 0.25 * 2.
        assert!((grads.input.get(0, 0) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn rows_are_independent() {
        let mut rng = Pcg32::new(65, 0);
        let net = Mlp::<f64>::init(&[3, 8, 2], 0.01, OutputActivation::Sigmoid, &mut rng).unwrap();
        let x = batch(4, 3, &mut rng);
        let joint = net.forward(&x).unwrap();
        for r in 0..4 {
            let single = DenseMatrix::from_vec(1, 3, x.row(r).to_vec()).unwrap();
            let out = net.forward(&single).unwrap();
            for (a, b) in out.output().row(0).iter().zip(joint.output().row(r)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_and_backward_leave_parameters_untouched() {
        let mut rng = Pcg32::new(66, 0);
        let net = Mlp::<f64>::init(&[3, 6, 2], 0.01, OutputActivation::Sigmoid, &mut rng).unwrap();
        let snapshot = net.clone();
        let x = batch(4, 3, &mut rng);
        let cache = net.forward(&x).unwrap();
        let upstream = batch(4, 2, &mut rng);
        let _ = net.backward(&x, &cache, &upstream).unwrap();
        assert_eq!(net, snapshot);
    }

    #[test]
    fn single_linear_layer_has_closed_form_gradients() {
        // Identity output, no hidden layer: dW = x^T * upstream.
        let mut rng = Pcg32::new(67, 0);
        let net = Mlp::<f64>::init(&[3, 2], 0.01, OutputActivation::Identity, &mut rng).unwrap();
        let x = batch(5, 3, &mut rng);
        let upstream = batch(5, 2, &mut rng);
        let cache = net.forward(&x).unwrap();
        let grads = net.backward(&x, &cache, &upstream).unwrap();
        let expect = x.matmul_transpose_lhs(&upstream).unwrap();
        for (a, b) in grads.weights[0].data().iter().zip(expect.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        // Bias gradient is the column sum of upstream.
        for c in 0..2 {
            let want: f64 = (0..5).map(|r| upstream.get(r, c)).sum();
            assert!((grads.biases[0][c] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        for output in [OutputActivation::Identity, OutputActivation::Sigmoid] {
            let mut rng = Pcg32::new(68, 0);
            let net = Mlp::<f64>::init(&[3, 5, 4, 2], 0.01, output, &mut rng).unwrap();
            let x = batch(4, 3, &mut rng);
            // Fixed linear functional of the outputs as the loss.
            let probe: Vec<f64> = (0..4 * 2).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let loss_of = |net: &Mlp<f64>, x: &DenseMatrix<f64>| {
                let out = net.forward(x).unwrap();
                out.output()
                    .data()
                    .iter()
                    .zip(&probe)
                    .map(|(o, p)| o * p)
                    .sum::<f64>()
            };

            let cache = net.forward(&x).unwrap();
            let upstream = DenseMatrix::from_vec(4, 2, probe.clone()).unwrap();
            let grads = net.backward(&x, &cache, &upstream).unwrap();

            // All parameters jointly.
            let flat: Vec<f64> = net
                .param_slices()
                .iter()
                .flat_map(|s| s.iter().copied())
                .collect();
            let flat_grad: Vec<f64> = grads
                .param_slices()
                .iter()
                .flat_map(|s| s.iter().copied())
                .collect();
            let f = |params: &[f64]| {
                let mut candidate = net.clone();
                let mut offset = 0;
                for slice in candidate.param_slices_mut() {
                    slice.copy_from_slice(&params[offset..offset + slice.len()]);
                    offset += slice.len();
                }
                loss_of(&candidate, &x)
            };
            let err = check_gradient(f, &flat, &flat_grad, 1e-5).unwrap();
            assert!(err <= 1e-6, "parameter gradient error {err} ({output:?})");

            // And the input gradient.
            let f_in = |coords: &[f64]| {
                let xm = DenseMatrix::from_vec(4, 3, coords.to_vec()).unwrap();
                loss_of(&net, &xm)
            };
            let err = check_gradient(f_in, x.data(), grads.input.data(), 1e-5).unwrap();
            assert!(err <= 1e-6, "input gradient error {err} ({output:?})");
        }
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(1000.0f64), 1.0);
        assert_eq!(sigmoid(-1000.0f64), 0.0);
        assert!((sigmoid(0.0f64) - 0.5).abs() < 1e-15);
        assert!(sigmoid(-87.0f32) > 0.0);
        let v = sigmoid(0.3f64);
        assert!((v - 1.0 / (1.0 + (-0.3f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut rng = Pcg32::new(69, 0);
        assert!(Mlp::<f32>::init(&[4], 0.01, OutputActivation::Identity, &mut rng).is_err());
        assert!(Mlp::<f32>::init(&[4, 0, 2], 0.01, OutputActivation::Identity, &mut rng).is_err());
        assert!(Mlp::<f32>::init(&[4, 8, 2], 1.5, OutputActivation::Identity, &mut rng).is_err());
        let net = Mlp::<f32>::init(&[4, 8, 2], 0.01, OutputActivation::Identity, &mut rng).unwrap();
        let bad = DenseMatrix::<f32>::zeros(2, 3);
        assert!(net.forward(&bad).is_err());
    }
}
