use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::batch::BatchWorkspace;
use super::{AdamConfig, AdamState, LstmError, LstmModel, Params};
use crate::corpus::TaskCategory;
use crate::matrix::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub shuffle_seed: u64,
    /// Global L2 norm bound on each batch gradient; `<= 0` disables clipping.
    pub grad_clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 70,
            batch_size: 50,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            shuffle_seed: 0,
            grad_clip_norm: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LstmError> {
        if self.epochs == 0 {
            return Err(LstmError::BadConfig("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(LstmError::BadConfig("batch_size must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(LstmError::BadConfig("lr must be > 0".into()));
        }
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(LstmError::BadConfig(format!("{name} must lie in [0, 1)")));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(LstmError::BadConfig("epsilon must be > 0".into()));
        }
        if self.grad_clip_norm.is_nan() {
            return Err(LstmError::BadConfig("grad_clip_norm must be a number".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainHistory {
    /// Mean training cross-entropy of each epoch, measured on the batches as
    /// they were presented.
    pub epoch_loss: Vec<f64>,
}

/// Minibatch Adam over seeded per-epoch shuffles. The trailing partial batch
/// of each epoch is kept.
pub fn train(
    model: &mut LstmModel,
    windows: &[(&Matrix, TaskCategory)],
    config: &TrainConfig,
) -> Result<TrainHistory, LstmError> {
    config.validate()?;
    let first = windows.first().ok_or(LstmError::Empty)?.0;
    let (steps, width) = (first.rows(), first.cols());
    if windows
        .iter()
        .any(|(m, _)| m.rows() != steps || m.cols() != width)
    {
        return Err(LstmError::MixedShapes);
    }
    if width != model.dims().input {
        return Err(LstmError::ShapeMismatch(format!(
            "windows have {width} channels, model expects {}",
            model.dims().input
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
    let shapes: Vec<usize> = model.params.tensors().iter().map(|t| t.len()).collect();
    let mut adam = AdamState::new(config.adam(), &shapes);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut ws = BatchWorkspace::default();
    let mut grads = Params::zeros(model.dims());
    let mut batch: Vec<(&Matrix, usize)> = Vec::with_capacity(config.batch_size);
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| (windows[i].0, windows[i].1.index())));
            grads.scale(0.0);
            let loss = model.accumulate_batch(&batch, &mut ws, &mut grads)?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(LstmError::NonFiniteLoss { epoch, batch: b });
            }
            epoch_loss += loss * chunk.len() as f64;
            if config.grad_clip_norm > 0.0 {
                let norm = grads.norm();
                if norm > config.grad_clip_norm {
                    grads.scale(config.grad_clip_norm / norm);
                }
            }
            let g = grads.tensors();
            adam.step(&mut model.params.tensors_mut(), &g)?;
            if !model.params.is_finite() {
                return Err(LstmError::NonFiniteLoss { epoch, batch: b });
            }
        }
        history.push(epoch_loss / windows.len() as f64);
    }
    Ok(TrainHistory {
        epoch_loss: history,
    })
}
