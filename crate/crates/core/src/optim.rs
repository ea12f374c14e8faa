//! Losses, the Adam optimizer, and the joint training loop that drives
//! encoder and network parameters from the same backward pass.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::fields::FieldTask;
use crate::model::FieldModel;
use crate::numerics::{real, to_f64, DenseMatrix, Pcg32, Real};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Mean squared error; the image-fitting default (learning rate
    /// 0.02).
    L2,
    /// Mean absolute percentage error with an epsilon floor on the
    /// target magnitude; the distance-fitting default (learning rate
    /// 1e-4).
    Mape,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub seed: u64,
    pub mape_epsilon: f64,
    /// Emit a checkpoint every this many iterations; 0 disables
    /// periodic checkpoints.
    pub checkpoint_every: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // A zero rate is accepted here as an explicit no-op run (the
        // loop still samples and records losses); front ends that only
        // make sense with progress require a strictly positive rate.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "training.learning_rate {} must not be negative",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::config("training.batch_size must be >= 1"));
        }
        if self.iterations == 0 {
            return Err(Error::config("training.iterations must be >= 1"));
        }
        if !(self.mape_epsilon > 0.0) {
            return Err(Error::config(format!(
                "training.mape_epsilon {} must be positive",
                self.mape_epsilon
            )));
        }
        Ok(())
    }
}

/// Mean of `(pred - target)^2` over every entry, and its gradient
/// `2 (pred - target) / count` with respect to the predictions.
pub fn l2_loss<T: Real>(
    pred: &DenseMatrix<T>,
    target: &DenseMatrix<T>,
) -> Result<(T, DenseMatrix<T>)> {
    check_congruent(pred, target)?;
    let count = real::<T>((pred.rows() * pred.cols()) as f64);
    let mut grad = DenseMatrix::zeros(pred.rows(), pred.cols());
    let mut loss = T::zero();
    for ((g, &p), &t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let d = p - t;
        loss = loss + d * d;
        *g = (d + d) / count;
    }
    Ok((loss / count, grad))
}

/// Mean of `|pred - target| / (|target| + eps)` and its gradient
/// `sign(pred - target) / ((|target| + eps) * count)`, with
/// `sign(0) = 0`.
pub fn mape_loss<T: Real>(
    pred: &DenseMatrix<T>,
    target: &DenseMatrix<T>,
    eps: f64,
) -> Result<(T, DenseMatrix<T>)> {
    check_congruent(pred, target)?;
    if !(eps > 0.0) {
        return Err(Error::config(format!(
            "percentage-error epsilon {eps} must be positive"
        )));
    }
    let eps = real::<T>(eps);
    let count = real::<T>((pred.rows() * pred.cols()) as f64);
    let mut grad = DenseMatrix::zeros(pred.rows(), pred.cols());
    let mut loss = T::zero();
    for ((g, &p), &t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let denom = t.abs() + eps;
        let d = p - t;
        loss = loss + d.abs() / denom;
        let sign = if d > T::zero() {
            T::one()
        } else if d < T::zero() {
            -T::one()
        } else {
            T::zero()
        };
        *g = sign / (denom * count);
    }
    Ok((loss / count, grad))
}

fn check_congruent<T: Real>(pred: &DenseMatrix<T>, target: &DenseMatrix<T>) -> Result<()> {
    if pred.rows() != target.rows() || pred.cols() != target.cols() {
        return Err(Error::config(format!(
            "prediction batch {}x{} does not match target batch {}x{}",
            pred.rows(),
            pred.cols(),
            target.rows(),
            target.cols()
        )));
    }
    Ok(())
}

/// First and second moment estimates for every parameter group, plus
/// the global step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: u64,
}

impl<T: Real> AdamState<T> {
    /// Fresh zeroed state shaped like the given parameter groups.
    pub fn for_groups(groups: &[&[T]]) -> Self {
        AdamState {
            m: groups.iter().map(|g| vec![T::zero(); g.len()]).collect(),
            v: groups.iter().map(|g| vec![T::zero(); g.len()]).collect(),
            step: 0,
        }
    }

    /// Rebuilds a state from stored moments (checkpoint loading).
    pub fn from_parts(m: Vec<Vec<T>>, v: Vec<Vec<T>>, step: u64) -> Result<Self> {
        if m.len() != v.len() || m.iter().zip(&v).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::format(
                "optimizer moment buffers have mismatched shapes",
            ));
        }
        Ok(AdamState { m, v, step })
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Vec<T>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Vec<T>] {
        &self.v
    }

    fn check_congruent(&self, params: &[&mut [T]], grads: &[&[T]]) -> Result<()> {
        let ok = params.len() == grads.len()
            && params.len() == self.m.len()
            && params
                .iter()
                .zip(grads)
                .zip(&self.m)
                .all(|((p, g), m)| p.len() == g.len() && p.len() == m.len());
        if ok {
            Ok(())
        } else {
            Err(Error::config(
                "parameter, gradient, and optimizer-state groups must be congruent",
            ))
        }
    }
}

/// One Adam update with bias correction:
/// `theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)`. A non-finite
/// gradient aborts before any state is touched.
pub fn adam_step<T: Real>(
    params: &mut [&mut [T]],
    grads: &[&[T]],
    state: &mut AdamState<T>,
    lr: f64,
) -> Result<()> {
    state.check_congruent(params, grads)?;
    for group in grads {
        if group.iter().any(|g| !g.is_finite()) {
            return Err(Error::numeric(
                "non-finite gradient; optimizer step aborted",
            ));
        }
    }
    let t = state.step + 1;
    let c1 = real::<T>(1.0 - ADAM_BETA1.powi(t as i32));
    let c2 = real::<T>(1.0 - ADAM_BETA2.powi(t as i32));
    let b1 = real::<T>(ADAM_BETA1);
    let b2 = real::<T>(ADAM_BETA2);
    let eps = real::<T>(ADAM_EPSILON);
    let lr = real::<T>(lr);
    for ((group, grad), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for (((p, &g), m), v) in group.iter_mut().zip(*grad).zip(m).zip(v) {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    state.step = t;
    Ok(())
}

/// One row of the loss history.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    /// Global iteration index (continues across resumed runs).
    pub iteration: u64,
    pub loss: f64,
    /// Wall-clock time of this iteration; excluded from determinism
    /// comparisons.
    pub wall_clock_ms: f64,
}

/// Runs `cfg.iterations` optimization steps, continuing from the
/// optimizer's current step count so a reloaded checkpoint picks up
/// exactly where it stopped. Each iteration draws its batch from its
/// own generator stream (`1 + global step`; stream 0 is reserved for
/// initialization), which makes the whole run a pure function of the
/// seed and step range — no sampler state needs to be stored.
pub fn train<T: Real>(
    model: &mut FieldModel<T>,
    task: &FieldTask,
    cfg: &TrainConfig,
    opt: &mut AdamState<T>,
    mut on_checkpoint: impl FnMut(u64, &FieldModel<T>, &AdamState<T>) -> Result<()>,
) -> Result<Vec<TrainRecord>> {
    cfg.validate()?;
    if task.input_dim() != model.input_dim() || task.output_dim() != model.output_dim() {
        return Err(Error::config(format!(
            "task is {}D->{} but the model is {}D->{}",
            task.input_dim(),
            task.output_dim(),
            model.input_dim(),
            model.output_dim()
        )));
    }

    let mut coords = DenseMatrix::zeros(cfg.batch_size, task.input_dim());
    let mut targets = DenseMatrix::zeros(cfg.batch_size, task.output_dim());
    let mut history = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        let step = opt.step();
        let started = Instant::now();
        let at = |e: Error| Error::numeric(format!("iteration {step}: {e}"));

        let mut rng = Pcg32::new(cfg.seed, 1 + step);
        task.sample_batch(&mut rng, &mut coords, &mut targets)?;
        let (encoded, cache) = model.predict(&coords).map_err(at)?;
        let (loss, dpred) = match cfg.loss {
            LossKind::L2 => l2_loss(cache.output(), &targets)?,
            LossKind::Mape => mape_loss(cache.output(), &targets, cfg.mape_epsilon)?,
        };
        let net_grads = model.mlp.backward(&encoded, &cache, &dpred).map_err(at)?;
        let mut enc_grads = model.encoder.gradient_buffers();
        for r in 0..coords.rows() {
            model
                .encoder
                .accumulate_gradients(coords.row(r), net_grads.input.row(r), &mut enc_grads)
                .map_err(at)?;
        }

        let mut grad_slices = net_grads.param_slices();
        grad_slices.extend(enc_grads.iter().map(|g| g.as_slice()));
        let mut param_slices = model.param_slices_mut();
        adam_step(&mut param_slices, &grad_slices, opt, cfg.learning_rate).map_err(at)?;
        drop(param_slices);

        history.push(TrainRecord {
            iteration: step,
            loss: to_f64(loss),
            wall_clock_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        if cfg.checkpoint_every > 0 && opt.step() % cfg.checkpoint_every as u64 == 0 {
            on_checkpoint(opt.step(), model, opt)?;
        }
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::EncodingConfig;
    use crate::fields::ImageField;
    use crate::network::OutputActivation;
    use crate::numerics::check_gradient;

    fn mat(rows: usize, cols: usize, data: Vec<f64>) -> DenseMatrix<f64> {
        DenseMatrix::from_vec(rows, cols, data).unwrap()
    }

    fn random_mat(rows: usize, cols: usize, rng: &mut Pcg32) -> DenseMatrix<f64> {
        mat(rows, cols, (0..rows * cols).map(|_| rng.uniform(-1.0, 1.0)).collect())
    }

    fn config(loss: LossKind, lr: f64, iters: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            loss,
            learning_rate: lr,
            batch_size: 64,
            iterations: iters,
            seed,
            mape_epsilon: 0.01,
            checkpoint_every: 0,
        }
    }

    #[test]
    fn squared_loss_matches_hand_values() {
        let (loss, grad) = l2_loss(&mat(1, 1, vec![1.0]), &mat(1, 1, vec![0.0])).unwrap();
        assert_eq!(loss, 1.0);
        assert_eq!(grad.data(), &[2.0]);

        let p = mat(2, 2, vec![0.1, 0.2, 0.3, 0.4]);
        let (loss, grad) = l2_loss(&p, &p).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn squared_loss_matches_a_scalar_loop() {
        let mut rng = Pcg32::new(40, 0);
        let p = random_mat(7, 3, &mut rng);
        let t = random_mat(7, 3, &mut rng);
        let (loss, grad) = l2_loss(&p, &t).unwrap();
        let mut want = 0.0;
        for (i, (&pi, &ti)) in p.data().iter().zip(t.data()).enumerate() {
            want += (pi - ti) * (pi - ti) / 21.0;
            assert!((grad.data()[i] - 2.0 * (pi - ti) / 21.0).abs() < 1e-12);
        }
        assert!((loss - want).abs() < 1e-7);
    }

    #[test]
    fn percentage_loss_matches_hand_values() {
        let (loss, _) = mape_loss(&mat(1, 1, vec![0.2]), &mat(1, 1, vec![0.1]), 0.01).unwrap();
        assert!((loss - 0.1 / 0.11).abs() < 1e-12);

        let p = mat(1, 3, vec![0.3, -0.2, 0.0]);
        let (loss, grad) = mape_loss(&p, &p, 0.01).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&g| g == 0.0));

        // Gradient sign follows the prediction error; ties give zero.
        let t = mat(1, 3, vec![0.1, 0.1, 0.1]);
        let p = mat(1, 3, vec![0.3, -0.2, 0.1]);
        let (_, grad) = mape_loss(&p, &t, 0.01).unwrap();
        assert!(grad.data()[0] > 0.0 && grad.data()[1] < 0.0 && grad.data()[2] == 0.0);
        let scale = 1.0 / (0.11 * 3.0);
        assert!((grad.data()[0] - scale).abs() < 1e-12);

        assert!(mape_loss(&p, &t, 0.0).is_err());
        assert!(l2_loss(&p, &mat(3, 1, vec![0.0; 3])).is_err());
    }

    #[test]
    fn percentage_loss_gradient_matches_central_differences() {
        let mut rng = Pcg32::new(41, 0);
        let t = random_mat(4, 2, &mut rng);
        // Keep predictions away from the |.| kink at pred == target.
        let p = mat(
            4,
            2,
            t.data().iter().map(|&v| v + 0.3 * rng.uniform(0.2, 1.0)).collect(),
        );
        let (_, grad) = mape_loss(&p, &t, 0.01).unwrap();
        let f = |x: &[f64]| {
            let xm = mat(4, 2, x.to_vec());
            to_f64(mape_loss(&xm, &t, 0.01).unwrap().0)
        };
        let err = check_gradient(f, p.data(), grad.data(), 1e-6).unwrap();
        assert!(err <= 1e-8, "gradient error {err}");
    }

    #[test]
    fn zero_gradient_leaves_parameters_but_advances_the_step() {
        let mut a = vec![0.5, -0.25, 3.0];
        let grads = vec![0.0; 3];
        let mut state = AdamState::for_groups(&[&a]);
        adam_step(&mut [&mut a], &[&grads], &mut state, 0.02).unwrap();
        assert_eq!(a, vec![0.5, -0.25, 3.0]);
        assert_eq!(state.step(), 1);
    }

    #[test]
    fn first_step_moves_by_the_learning_rate_against_the_gradient() {
        for &g in &[3.0f64, -0.004, 1e-8] {
            let mut p = vec![1.0];
            let mut state = AdamState::for_groups(&[&p]);
            adam_step(&mut [&mut p], &[&[g]], &mut state, 0.02).unwrap();
            let delta = p[0] - 1.0;
            assert!(delta.signum() == -g.signum());
            assert!(
                (delta.abs() - 0.02).abs() < 1e-8,
                "first-step size {delta} for gradient {g}"
            );
        }
    }

    #[test]
    fn two_steps_match_a_scalar_oracle() {
        let g = 0.37;
        let lr = 0.02;
        let mut p = vec![0.8];
        let mut state = AdamState::for_groups(&[&p]);
        adam_step(&mut [&mut p], &[&[g]], &mut state, lr).unwrap();
        adam_step(&mut [&mut p], &[&[g]], &mut state, lr).unwrap();

        // The same two updates unrolled by hand.
        let (b1, b2, eps) = (ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON);
        let mut theta = 0.8;
        let (mut m, mut v) = (0.0, 0.0);
        for t in 1..=2 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - b1.powi(t));
            let v_hat = v / (1.0 - b2.powi(t));
            theta -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        assert!((p[0] - theta).abs() < 1e-7, "{} vs {theta}", p[0]);
        assert_eq!(state.step(), 2);
    }

    #[test]
    fn non_finite_gradients_abort_without_touching_state() {
        let mut p = vec![1.0, 2.0];
        let mut state = AdamState::for_groups(&[&p]);
        adam_step(&mut [&mut p], &[&[0.1, 0.2]], &mut state, 0.02).unwrap();
        let before = (p.clone(), state.clone());
        let err = adam_step(&mut [&mut p], &[&[f64::NAN, 0.0]], &mut state, 0.02);
        assert!(matches!(err, Err(crate::Error::Numeric(_))));
        assert_eq!((p, state), before);
    }

    #[test]
    fn mismatched_groups_are_rejected() {
        let mut p = vec![1.0, 2.0];
        let mut state = AdamState::for_groups(&[&p]);
        assert!(adam_step(&mut [&mut p], &[&[0.1]], &mut state, 0.02).is_err());
        assert!(AdamState::from_parts(vec![vec![0.0]], vec![vec![0.0, 1.0]], 3).is_err());
    }

    fn tiny_image_model(seed: u64) -> FieldModel<f32> {
        FieldModel::init(
            EncodingConfig::Local {
                dims: 2,
                cells: 4,
                frequencies: 2,
                shared_sin_cos: false,
            },
            &[16],
            3,
            0.01,
            OutputActivation::Sigmoid,
            &mut Pcg32::new(seed, 0),
        )
        .unwrap()
    }

    #[test]
    fn zero_rate_records_loss_but_changes_nothing() {
        let task = FieldTask::Image(ImageField::constant(4, 4, [0.25; 3]).unwrap());
        let mut model = tiny_image_model(50);
        let before = model.clone();
        let mut opt = AdamState::for_groups(&model.param_slices());
        let cfg = config(LossKind::L2, 0.0, 1, 51);
        let history = train(&mut model, &task, &cfg, &mut opt, |_, _, _| Ok(())).unwrap();
        assert_eq!(history.len(), 1);
        assert!(history[0].loss > 0.0);
        assert_eq!(opt.step(), 1);
        for (a, b) in model.param_slices().iter().zip(before.param_slices()) {
            assert_eq!(*a, b);
        }
    }

    #[test]
    fn constant_image_is_learned_quickly() {
        let task = FieldTask::Image(ImageField::constant(8, 8, [0.5; 3]).unwrap());
        let mut model = tiny_image_model(52);
        let mut opt = AdamState::for_groups(&model.param_slices());
        let cfg = config(LossKind::L2, 0.02, 200, 53);
        let history = train(&mut model, &task, &cfg, &mut opt, |_, _, _| Ok(())).unwrap();
        let last = history.last().unwrap().loss;
        assert!(last < 1e-4, "loss after 200 iterations: {last}");
    }

    #[test]
    fn identical_seeds_reproduce_the_loss_history_bit_for_bit() {
        let task = FieldTask::Image(ImageField::test_pattern(16, 16).unwrap());
        let run = |_: ()| {
            let mut model = tiny_image_model(54);
            let mut opt = AdamState::for_groups(&model.param_slices());
            let cfg = config(LossKind::L2, 0.02, 25, 55);
            train(&mut model, &task, &cfg, &mut opt, |_, _, _| Ok(())).unwrap()
        };
        let (a, b) = (run(()), run(()));
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.iteration, rb.iteration);
            assert_eq!(ra.loss.to_bits(), rb.loss.to_bits());
        }
    }

    #[test]
    fn split_runs_match_one_long_run_exactly() {
        let task = FieldTask::Image(ImageField::test_pattern(16, 16).unwrap());
        let long = {
            let mut model = tiny_image_model(56);
            let mut opt = AdamState::for_groups(&model.param_slices());
            let cfg = config(LossKind::L2, 0.02, 30, 57);
            let history = train(&mut model, &task, &cfg, &mut opt, |_, _, _| Ok(())).unwrap();
            (model, history)
        };
        let split = {
            let mut model = tiny_image_model(56);
            let mut opt = AdamState::for_groups(&model.param_slices());
            let cfg = config(LossKind::L2, 0.02, 15, 57);
            let mut history = train(&mut model, &task, &cfg, &mut opt, |_, _, _| Ok(())).unwrap();
            history.extend(train(&mut model, &task, &cfg, &mut opt, |_, _, _| Ok(())).unwrap());
            (model, history)
        };
        assert_eq!(long.0, split.0);
        for (ra, rb) in long.1.iter().zip(&split.1) {
            assert_eq!((ra.iteration, ra.loss.to_bits()), (rb.iteration, rb.loss.to_bits()));
        }
    }

    #[test]
    fn one_small_step_decreases_the_loss_on_a_frozen_batch() {
        for seed in [60u64, 61, 62] {
            let mut model = FieldModel::<f64>::init(
                EncodingConfig::Local {
                    dims: 2,
                    cells: 3,
                    frequencies: 2,
                    shared_sin_cos: false,
                },
                &[8],
                3,
                0.01,
                OutputActivation::Sigmoid,
                &mut Pcg32::new(seed, 0),
            )
            .unwrap();
            let task = FieldTask::Image(ImageField::test_pattern(8, 8).unwrap());
            let mut coords = DenseMatrix::zeros(32, 2);
            let mut targets = DenseMatrix::zeros(32, 3);
            task.sample_batch(&mut Pcg32::new(seed, 9), &mut coords, &mut targets)
                .unwrap();

            let loss_now = |m: &FieldModel<f64>| {
                let (_, cache) = m.predict(&coords).unwrap();
                to_f64(l2_loss(cache.output(), &targets).unwrap().0)
            };
            let before = loss_now(&model);

            let (encoded, cache) = model.predict(&coords).unwrap();
            let (_, dpred) = l2_loss(cache.output(), &targets).unwrap();
            let net_grads = model.mlp.backward(&encoded, &cache, &dpred).unwrap();
            let mut enc_grads = model.encoder.gradient_buffers();
            for r in 0..coords.rows() {
                model
                    .encoder
                    .accumulate_gradients(coords.row(r), net_grads.input.row(r), &mut enc_grads)
                    .unwrap();
            }
            let mut grad_slices = net_grads.param_slices();
            grad_slices.extend(enc_grads.iter().map(|g| g.as_slice()));
            let mut opt = AdamState::for_groups(&model.param_slices());
            let mut params = model.param_slices_mut();
            adam_step(&mut params, &grad_slices, &mut opt, 1e-5).unwrap();
            drop(params);

            let after = loss_now(&model);
            assert!(after < before, "seed {seed}: {after} !< {before}");
        }
    }

    #[test]
    fn joint_network_and_grid_gradients_pass_central_differences() {
        let mut model = FieldModel::<f64>::init(
            EncodingConfig::Local {
                dims: 2,
                cells: 2,
                frequencies: 2,
                shared_sin_cos: false,
            },
            &[6],
            2,
            0.01,
            OutputActivation::Sigmoid,
            &mut Pcg32::new(63, 0),
        )
        .unwrap();
        // Nudge coefficients off their tiny init so grid gradients are
        // exercised at realistic magnitudes.
        for slice in model.encoder.param_slices_mut() {
            for (i, value) in slice.iter_mut().enumerate() {
                *value += 0.1 * ((i % 7) as f64 - 3.0);
            }
        }
        let mut rng = Pcg32::new(63, 9);
        let coords = mat(5, 2, (0..10).map(|_| rng.uniform(0.1, 0.9)).collect());
        let targets = mat(5, 2, (0..10).map(|_| rng.uniform(0.2, 0.8)).collect());

        let (encoded, cache) = model.predict(&coords).unwrap();
        let (_, dpred) = l2_loss(cache.output(), &targets).unwrap();
        let net_grads = model.mlp.backward(&encoded, &cache, &dpred).unwrap();
        let mut enc_grads = model.encoder.gradient_buffers();
        for r in 0..coords.rows() {
            model
                .encoder
                .accumulate_gradients(coords.row(r), net_grads.input.row(r), &mut enc_grads)
                .unwrap();
        }
        let mut grads: Vec<f64> = Vec::new();
        for s in net_grads.param_slices() {
            grads.extend_from_slice(s);
        }
        for g in &enc_grads {
            grads.extend_from_slice(g);
        }

        let flat: Vec<f64> = model
            .param_slices()
            .iter()
            .flat_map(|s| s.iter().copied())
            .collect();
        let f = |params: &[f64]| {
            let mut candidate = model.clone();
            let mut offset = 0;
            for slice in candidate.param_slices_mut() {
                slice.copy_from_slice(&params[offset..offset + slice.len()]);
                offset += slice.len();
            }
            let (_, cache) = candidate.predict(&coords).unwrap();
            to_f64(l2_loss(cache.output(), &targets).unwrap().0)
        };
        let err = check_gradient(f, &flat, &grads, 1e-5).unwrap();
        assert!(err <= 1e-6, "joint gradient error {err}");
    }

    #[test]
    fn checkpoints_fire_on_schedule_and_dimension_clashes_fail() {
        let task = FieldTask::Image(ImageField::constant(4, 4, [0.3; 3]).unwrap());
        let mut model = tiny_image_model(64);
        let mut opt = AdamState::for_groups(&model.param_slices());
        let mut cfg = config(LossKind::L2, 0.02, 10, 65);
        cfg.checkpoint_every = 4;
        let mut fired = Vec::new();
        train(&mut model, &task, &cfg, &mut opt, |step, _, _| {
            fired.push(step);
            Ok(())
        })
        .unwrap();
        assert_eq!(fired, vec![4, 8]);

        let sdf_task = FieldTask::Sdf(crate::fields::SdfTarget::Scene(
            crate::fields::make_demo_scene("sphere").unwrap(),
        ));
        let err = train(&mut model, &sdf_task, &cfg, &mut opt, |_, _, _| Ok(()));
        assert!(err.is_err());
    }
}
