use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use windcast_nn::{AdamState, FcParams, Graph, Tensor, Var};

use super::{check_width, BlendDataset, Result};

pub const MLP_HIDDEN: [usize; 2] = [64, 128];

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub seed: u64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Minimum training-loss improvement that resets the stall counter.
    pub tol: f64,
    /// Stop after this many epochs without improvement.
    pub n_iter_no_change: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_epochs: 200,
            batch_size: 200,
            learning_rate: 1e-3,
            tol: 1e-4,
            n_iter_no_change: 10,
        }
    }
}

/// `d → 64 → 128 → 1` ReLU network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: [FcParams; 3],
    pub epochs_run: usize,
}

impl MlpModel {
    pub fn init(input_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            layers: [
                FcParams::init(&mut rng, input_dim, MLP_HIDDEN[0]),
                FcParams::init(&mut rng, MLP_HIDDEN[0], MLP_HIDDEN[1]),
                FcParams::init(&mut rng, MLP_HIDDEN[1], 1),
            ],
            epochs_run: 0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let vars: Vec<_> = self.layers.iter().map(|l| l.bind(g)).collect();
        let h = vars[0].run(g, x)?;
        let h = g.relu(h);
        let h = vars[1].run(g, h)?;
        let h = g.relu(h);
        Ok(vars[2].run(g, h)?)
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.tensors_mut()).collect()
    }
}

fn batch_tensor(rows: &[&Vec<f64>]) -> Result<Tensor> {
    let d = rows[0].len();
    Ok(Tensor::new(&[rows.len(), d], rows.iter().flat_map(|r| r.iter().copied()).collect())?)
}

/// Adam on `½·MSE + decay/(2·batch)·‖W‖²` (biases not decayed). Stops when
/// the epoch loss fails to improve by `tol` for `n_iter_no_change` epochs.
pub fn mlp_fit(data: &BlendDataset, weight_decay: f64, cfg: &MlpConfig) -> Result<MlpModel> {
    if !(weight_decay >= 0.0) {
        return Err(super::EnsembleError::Hyper(format!("weight decay must be >= 0, got {weight_decay}")));
    }
    if cfg.batch_size == 0 || cfg.max_epochs == 0 {
        return Err(super::EnsembleError::Hyper("batch_size and max_epochs must be positive".into()));
    }
    let mut model = MlpModel::init(data.width(), cfg.seed);
    train(&mut model, data, weight_decay, cfg)?;
    Ok(model)
}

pub(crate) fn train(model: &mut MlpModel, data: &BlendDataset, weight_decay: f64, cfg: &MlpConfig) -> Result<()> {
    let n = data.len();
    let params: Vec<&Tensor> = model.layers.iter().flat_map(|l| l.tensors()).collect();
    let mut adam = AdamState::for_params(&params, cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..n).collect();
    let batch = cfg.batch_size.min(n);
    let mut best = f64::INFINITY;
    let mut stall = 0;
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for idx in order.chunks(batch) {
            let rows: Vec<&Vec<f64>> = idx.iter().map(|&i| &data.features[i]).collect();
            let mut g = Graph::new();
            let x = g.input(batch_tensor(&rows)?);
            let out = model.forward(&mut g, x)?;
            let t = g.input(Tensor::new(&[idx.len(), 1], idx.iter().map(|&i| data.targets[i]).collect())?);
            let mse = g.mse(out, t)?;
            let loss = g.weighted_sum(&[(mse, 0.5)])?;
            g.backward(loss)?;
            let mut grads = g.param_grads()?;
            let b = idx.len() as f64;
            let mut penalty = 0.0;
            // Tensor order per layer is (weights, biases).
            for (li, layer) in model.layers.iter().enumerate() {
                let w = layer.weights.data();
                penalty += w.iter().map(|v| v * v).sum::<f64>();
                for (gv, wv) in grads[2 * li].iter_mut().zip(w) {
                    *gv += weight_decay * wv / b;
                }
            }
            epoch_loss += (g.value(loss).data()[0] + 0.5 * weight_decay * penalty / b) * b;
            adam.step(&mut model.tensors_mut(), &grads)?;
        }
        epoch_loss /= n as f64;
        model.epochs_run = epoch + 1;
        if epoch_loss > best - cfg.tol {
            stall += 1;
        } else {
            stall = 0;
        }
        best = best.min(epoch_loss);
        if stall >= cfg.n_iter_no_change {
            break;
        }
    }
    Ok(())
}

pub fn mlp_predict(model: &MlpModel, features: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_width(features, model.input_dim())?;
    if features.is_empty() {
        return Ok(Vec::new());
    }
    let rows: Vec<&Vec<f64>> = features.iter().collect();
    let mut g = Graph::new();
    let x = g.input(batch_tensor(&rows)?);
    let out = model.forward(&mut g, x)?;
    Ok(g.value(out).data().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_data(n: usize) -> BlendDataset {
        let x: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..4).map(|j| ((i * 7 + j * 13) % 23) as f64 / 2.0 + j as f64).collect())
            .collect();
        let y = x.iter().map(|r| r.iter().sum::<f64>() * 0.25).collect();
        BlendDataset::new(x, y).unwrap()
    }

    #[test]
    fn zero_output_layer_predicts_zero() {
        let mut m = MlpModel::init(4, 3);
        m.layers[2] = FcParams::zeros(MLP_HIDDEN[1], 1);
        let p = mlp_predict(&m, &linear_data(5).features).unwrap();
        assert!(p.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn seeded_fit_is_reproducible() {
        let d = linear_data(40);
        let cfg = MlpConfig {
            max_epochs: 5,
            ..MlpConfig::default()
        };
        let a = mlp_fit(&d, 1e-3, &cfg).unwrap();
        let b = mlp_fit(&d, 1e-3, &cfg).unwrap();
        assert_eq!(mlp_predict(&a, &d.features).unwrap(), mlp_predict(&b, &d.features).unwrap());
    }

    #[test]
    fn learns_linear_targets() {
        let d = linear_data(120);
        let cfg = MlpConfig {
            max_epochs: 2000,
            batch_size: 32,
            ..MlpConfig::default()
        };
        let m = mlp_fit(&d, 1e-4, &cfg).unwrap();
        let p = mlp_predict(&m, &d.features).unwrap();
        let mean = d.targets.iter().sum::<f64>() / d.len() as f64;
        let var = d.targets.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / d.len() as f64;
        let mse = p.iter().zip(&d.targets).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / d.len() as f64;
        assert!(mse <= 1e-2 * var, "mse {mse}, var {var}, epochs {}", m.epochs_run);
    }
}
