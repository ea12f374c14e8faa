//! A trainable field regressor: a coordinate encoder feeding the MLP.
//! Owns the canonical parameter-group ordering (network layers first,
//! then encoder storage) used by the optimizer and the checkpoint
//! format alike.

use crate::encoding::{Encoder, EncodingConfig};
use crate::error::{Error, Result};
use crate::fields::ImageField;
use crate::network::{ForwardCache, Mlp, OutputActivation};
use crate::numerics::{to_f64, DenseMatrix, Pcg32, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct FieldModel<T> {
    pub encoder: Encoder<T>,
    pub mlp: Mlp<T>,
}

impl<T: Real> FieldModel<T> {
    pub fn new(encoder: Encoder<T>, mlp: Mlp<T>) -> Result<Self> {
        if encoder.output_dim() != mlp.input_dim() {
            return Err(Error::config(format!(
                "encoder produces {} features but the network expects {}",
                encoder.output_dim(),
                mlp.input_dim()
            )));
        }
        Ok(FieldModel { encoder, mlp })
    }

    /// Initializes both halves from one generator, network first, so a
    /// seed fully determines every parameter.
    pub fn init(
        encoding: EncodingConfig,
        hidden: &[usize],
        output_dim: usize,
        leaky_slope: f64,
        output_activation: OutputActivation,
        rng: &mut Pcg32,
    ) -> Result<Self> {
        encoding.validate()?;
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(encoding.output_dim());
        dims.extend_from_slice(hidden);
        dims.push(output_dim);
        let mlp = Mlp::init(&dims, leaky_slope, output_activation, rng)?;
        let encoder = Encoder::init(encoding, rng)?;
        FieldModel::new(encoder, mlp)
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.mlp.output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.mlp.param_count() + self.encoder.param_count()
    }

    /// All trainable groups: network weights and biases layer by
    /// layer, then encoder grids and tables in storage order.
    pub fn param_slices(&self) -> Vec<&[T]> {
        let mut slices = self.mlp.param_slices();
        slices.extend(self.encoder.param_slices());
        slices
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut slices = self.mlp.param_slices_mut();
        slices.extend(self.encoder.param_slices_mut());
        slices
    }

    /// Encodes a coordinate batch and runs the network; returns the
    /// encoded features (needed for backpropagation) with the forward
    /// cache.
    pub fn predict(&self, coords: &DenseMatrix<T>) -> Result<(DenseMatrix<T>, ForwardCache<T>)> {
        let mut encoded = DenseMatrix::zeros(coords.rows(), self.encoder.output_dim());
        self.encoder.encode_batch(coords, &mut encoded)?;
        let cache = self.mlp.forward(&encoded)?;
        Ok((encoded, cache))
    }

    /// A thread-safe point evaluator for 3D models; the first output
    /// channel is interpreted as the signed distance. The model is
    /// only defined on the unit cube, so exterior queries (rays start
    /// outside it) are clamped to the boundary and padded with the
    /// distance to the cube — a conservative bound that keeps sphere
    /// tracing sound.
    pub fn sdf_oracle(&self) -> Result<impl Fn([f64; 3]) -> f64 + Sync + '_> {
        if self.input_dim() != 3 {
            return Err(Error::config(format!(
                "distance evaluation needs a 3D model, this one takes {} inputs",
                self.input_dim()
            )));
        }
        Ok(move |p: [f64; 3]| {
            let q = [
                p[0].clamp(0.0, 1.0),
                p[1].clamp(0.0, 1.0),
                p[2].clamp(0.0, 1.0),
            ];
            let outside = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)
                + (p[2] - q[2]).powi(2))
            .sqrt();
            let coords = DenseMatrix::from_vec(
                1,
                3,
                q.iter().map(|&v| crate::numerics::real::<T>(v)).collect(),
            )
            .expect("fixed 1x3 shape");
            let (_, cache) = self.predict(&coords).expect("valid model dims");
            to_f64(cache.output().get(0, 0)) + outside
        })
    }

    /// Evaluates the model at every pixel center of a `width` x
    /// `height` canvas; only valid for 2D → RGB models. Outputs are
    /// clamped into `[0,1]`.
    pub fn predict_image(&self, width: usize, height: usize) -> Result<ImageField> {
        if self.input_dim() != 2 || self.output_dim() != 3 {
            return Err(Error::config(format!(
                "image prediction needs a 2D->RGB model, this one is {}D->{}",
                self.input_dim(),
                self.output_dim()
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::config("image dimensions must be positive"));
        }
        let mut pixels = Vec::with_capacity(width * height);
        // Chunk by rows, about 65,536 pixels per forward pass, to keep
        // the activation buffers modest.
        let rows_per_chunk = (65_536 / width).max(1);
        let mut j0 = 0;
        while j0 < height {
            let j1 = (j0 + rows_per_chunk).min(height);
            let mut coords = DenseMatrix::zeros((j1 - j0) * width, 2);
            for (r, (j, i)) in (j0..j1)
                .flat_map(|j| (0..width).map(move |i| (j, i)))
                .enumerate()
            {
                coords.row_mut(r)[0] = crate::numerics::real((i as f64 + 0.5) / width as f64);
                coords.row_mut(r)[1] = crate::numerics::real((j as f64 + 0.5) / height as f64);
            }
            let (_, cache) = self.predict(&coords)?;
            for r in 0..coords.rows() {
                let row = cache.output().row(r);
                pixels.push([
                    to_f64(row[0]).clamp(0.0, 1.0) as f32,
                    to_f64(row[1]).clamp(0.0, 1.0) as f32,
                    to_f64(row[2]).clamp(0.0, 1.0) as f32,
                ]);
            }
            j0 = j1;
        }
        ImageField::new(width, height, pixels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::real;

    fn small_model(seed: u64) -> FieldModel<f64> {
        FieldModel::init(
            EncodingConfig::Local {
                dims: 2,
                cells: 4,
                frequencies: 2,
                shared_sin_cos: false,
            },
            &[8],
            3,
            0.01,
            OutputActivation::Sigmoid,
            &mut Pcg32::new(seed, 0),
        )
        .unwrap()
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut rng = Pcg32::new(30, 0);
        let enc = Encoder::<f64>::init(
            EncodingConfig::Positional {
                dims: 2,
                frequencies: 4,
                offset: 0,
            },
            &mut rng,
        )
        .unwrap();
        let mlp = Mlp::init(&[10, 8, 3], 0.01, OutputActivation::Sigmoid, &mut rng).unwrap();
        assert!(FieldModel::new(enc, mlp).is_err());
    }

    #[test]
    fn init_is_deterministic_and_counts_all_parameters() {
        let a = small_model(31);
        let b = small_model(31);
        assert_eq!(a, b);
        let from_groups: usize = a.param_slices().iter().map(|s| s.len()).sum();
        assert_eq!(from_groups, a.param_count());
        assert_eq!(
            a.param_count(),
            a.mlp.param_count() + a.encoder.param_count()
        );
    }

    #[test]
    fn parameter_groups_list_network_layers_before_encoder_storage() {
        let model = small_model(32);
        let groups = model.param_slices();
        let mlp_groups = model.mlp.param_slices();
        let enc_groups = model.encoder.param_slices();
        assert_eq!(groups.len(), mlp_groups.len() + enc_groups.len());
        for (a, b) in groups.iter().zip(mlp_groups.iter().chain(enc_groups.iter())) {
            assert!(std::ptr::eq(*a, *b));
        }
    }

    #[test]
    fn predict_matches_manual_encode_and_forward() {
        let model = small_model(33);
        let coords = DenseMatrix::from_vec(2, 2, vec![0.2, 0.7, 0.55, 0.1]).unwrap();
        let (encoded, cache) = model.predict(&coords).unwrap();

        let mut manual = DenseMatrix::zeros(2, model.encoder.output_dim());
        model.encoder.encode_batch(&coords, &mut manual).unwrap();
        assert_eq!(encoded.data(), manual.data());
        let manual_cache = model.mlp.forward(&manual).unwrap();
        assert_eq!(cache.output().data(), manual_cache.output().data());
    }

    #[test]
    fn point_oracle_agrees_with_batch_prediction() {
        let model = FieldModel::<f64>::init(
            EncodingConfig::Grid {
                dims: 3,
                cells: 4,
                features: 4,
            },
            &[8],
            1,
            0.01,
            OutputActivation::Identity,
            &mut Pcg32::new(34, 0),
        )
        .unwrap();
        let oracle = model.sdf_oracle().unwrap();
        let mut rng = Pcg32::new(34, 1);
        for _ in 0..20 {
            let p = [rng.next_f64(), rng.next_f64(), rng.next_f64()];
            let coords =
                DenseMatrix::from_vec(1, 3, vec![real(p[0]), real(p[1]), real(p[2])]).unwrap();
            let (_, cache) = model.predict(&coords).unwrap();
            assert_eq!(oracle(p), cache.output().get(0, 0));
        }
        // Outside the cube the oracle pads the boundary value with the
        // distance back to the domain.
        let outside = oracle([0.5, 0.5, -1.5]);
        assert!((outside - (oracle([0.5, 0.5, 0.0]) + 1.5)).abs() < 1e-12);

        // 2D models have no distance interpretation.
        assert!(small_model(35).sdf_oracle().is_err());
    }

    #[test]
    fn zeroed_sigmoid_model_paints_mid_gray() {
        let mut model = small_model(36);
        for slice in model.param_slices_mut() {
            for v in slice {
                *v = 0.0;
            }
        }
        let img = model.predict_image(7, 5).unwrap();
        assert_eq!(img.width(), 7);
        assert_eq!(img.height(), 5);
        assert!(img.pixels().iter().flatten().all(|&c| c == 0.5));
    }
}
