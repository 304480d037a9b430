use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use windcast_nn::{AdamState, Graph, Tensor, Var};

use super::{predict, ModelError, Stage1Model};
use crate::data::{InputWindow, WindowSet};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Power-loss weight for multiple-output models.
    pub alpha: f64,
    /// Speed-loss weight for multiple-output models.
    pub beta: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub learning_rate: f64,
    /// Shuffle seed.
    pub seed: u64,
    /// Use every k-th training window (1 = all).
    pub window_stride: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.9,
            batch_size: 32,
            max_epochs: 100,
            patience: 10,
            learning_rate: 1e-3,
            seed: 0,
            window_stride: 1,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), ModelError> {
        if self.batch_size == 0 || self.max_epochs == 0 || self.window_stride == 0 || self.patience == 0 {
            return Err(ModelError::Config(
                "batch_size, max_epochs, patience and window_stride must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0) || !(self.alpha > 0.0) || !(self.beta >= 0.0) {
            return Err(ModelError::Config("need learning_rate > 0, alpha > 0, beta >= 0".into()));
        }
        Ok(())
    }
}

/// Training loss on `batch`: squared error on normalised power, plus the
/// weighted speed term for multiple-output models.
pub(crate) fn batch_loss(
    model: &Stage1Model,
    g: &mut Graph,
    batch: &[&InputWindow],
    cfg: &TrainConfig,
) -> Result<Var, ModelError> {
    let (p, s) = model.forward(g, batch)?;
    let b = batch.len();
    let tp = g.input(Tensor::new(&[b, 1], batch.iter().map(|w| w.target_power_norm).collect())?);
    let lp = g.mse(p, tp)?;
    match s {
        None => Ok(lp),
        Some(s) => {
            let ts = g.input(Tensor::new(&[b, 1], batch.iter().map(|w| w.target_speed_norm).collect())?);
            let ls = g.mse(s, ts)?;
            Ok(g.weighted_sum(&[(lp, cfg.alpha), (ls, cfg.beta)])?)
        }
    }
}

/// Scalar training loss of `model` on `batch`.
pub fn loss_on(model: &Stage1Model, batch: &[&InputWindow], cfg: &TrainConfig) -> Result<f64, ModelError> {
    let mut g = Graph::new();
    let l = batch_loss(model, &mut g, batch, cfg)?;
    Ok(g.value(l).data()[0])
}

pub(crate) fn rmse_mw(model: &Stage1Model, set: &WindowSet) -> Result<f64, ModelError> {
    let f = predict(model, set)?;
    let se: f64 = f
        .power
        .iter()
        .zip(&set.windows)
        .map(|(p, w)| (p - w.target_power).powi(2))
        .sum();
    Ok((se / set.len() as f64).sqrt())
}

/// Mini-batch Adam on `train` with early stopping on validation power RMSE
/// (MW). Returns the snapshot with the best validation RMSE.
pub fn train_stage1(
    model: &Stage1Model,
    train: &WindowSet,
    val: &WindowSet,
    cfg: &TrainConfig,
) -> Result<Stage1Model, ModelError> {
    train_stage1_observed(model, train, val, cfg, |_, _, _| {})
}

/// [`train_stage1`] that calls `observe(epoch, weights, val_rmse)` after
/// every epoch with the current (not best) weights.
pub fn train_stage1_observed(
    model: &Stage1Model,
    train: &WindowSet,
    val: &WindowSet,
    cfg: &TrainConfig,
    mut observe: impl FnMut(usize, &Stage1Model, f64),
) -> Result<Stage1Model, ModelError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(ModelError::EmptyWindows("training"));
    }
    if val.is_empty() {
        return Err(ModelError::EmptyWindows("validation"));
    }
    if train.stats != model.norm_stats || val.stats != model.norm_stats {
        return Err(ModelError::NormMismatch);
    }
    let mut current = model.clone();
    let mut adam = AdamState::for_params(&current.tensors(), cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).step_by(cfg.window_stride).collect();

    let mut best = current.clone();
    best.meta.best_val_rmse = f64::INFINITY;
    let mut since_best = 0;
    let mut epochs = 0;
    while epochs < cfg.max_epochs {
        order.shuffle(&mut rng);
        for idx in order.chunks(cfg.batch_size) {
            let batch: Vec<&InputWindow> = idx.iter().map(|&i| &train.windows[i]).collect();
            let mut g = Graph::new();
            let loss = batch_loss(&current, &mut g, &batch, cfg)?;
            g.backward(loss)?;
            let grads = g.param_grads()?;
            adam.step(&mut current.tensors_mut(), &grads)?;
        }
        epochs += 1;
        let score = rmse_mw(&current, val)?;
        observe(epochs, &current, score);
        if score < best.meta.best_val_rmse {
            best = current.clone();
            best.meta.best_val_rmse = score;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    best.meta.epochs_run = epochs;
    best.meta.seed = model.meta.seed;
    Ok(best)
}
