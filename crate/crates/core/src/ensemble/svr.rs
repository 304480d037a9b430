//! ε-SVR with an RBF kernel, solved by SMO with second-order working-set
//! selection on the 2n-variable dual.

use super::{check_width, BlendDataset, EnsembleError, Result};

const TAU: f64 = 1e-12;
const KKT_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel {
    pub gamma: f64,
    pub epsilon: f64,
    pub c: f64,
    pub support: Vec<Vec<f64>>,
    /// `α_i − α*_i` for each support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
    /// Dual objective `½θᵀKθ + εΣ|θ| − yᵀθ` at the solution.
    pub objective: f64,
    pub iterations: usize,
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// `1 / (width · variance of all feature values)`, or 1 for constant features.
pub fn default_gamma(data: &BlendDataset) -> f64 {
    let vals: Vec<f64> = data.features.iter().flatten().copied().collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var > 0.0 {
        1.0 / (data.width() as f64 * var)
    } else {
        1.0
    }
}

/// Dual objective in `θ = α − α*` form.
pub fn svr_dual_objective(data: &BlendDataset, epsilon: f64, gamma: f64, theta: &[f64]) -> f64 {
    let x = &data.features;
    let mut quad = 0.0;
    for i in 0..x.len() {
        for j in 0..x.len() {
            quad += theta[i] * theta[j] * rbf(&x[i], &x[j], gamma);
        }
    }
    0.5 * quad + epsilon * theta.iter().map(|t| t.abs()).sum::<f64>()
        - theta.iter().zip(&data.targets).map(|(t, y)| t * y).sum::<f64>()
}

pub fn svr_fit(data: &BlendDataset, c: f64, epsilon: f64, gamma: f64) -> Result<SvrModel> {
    if data.len() < 2 {
        return Err(EnsembleError::Dataset("SVR needs at least 2 samples".into()));
    }
    if !(c > 0.0) || !(epsilon >= 0.0) || !(gamma > 0.0) {
        return Err(EnsembleError::Hyper(format!(
            "need C > 0, epsilon >= 0, gamma > 0, got {c}, {epsilon}, {gamma}"
        )));
    }
    let n = data.len();
    let l = 2 * n;
    let x = &data.features;
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = rbf(&x[i], &x[j], gamma);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let q = |a: usize, b: usize| sign(a) * sign(b) * k[(a % n) * n + b % n];
    let qd = |a: usize| k[(a % n) * n + a % n];

    let mut alpha = vec![0.0; l];
    let mut grad: Vec<f64> = (0..l)
        .map(|t| {
            if t < n {
                epsilon - data.targets[t]
            } else {
                epsilon + data.targets[t - n]
            }
        })
        .collect();
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;

    let max_iter = (100 * l).max(10_000_000);
    let mut iter = 0;
    loop {
        // Pick i by maximal violation, j by second-order gain.
        let mut gmax = f64::NEG_INFINITY;
        let mut gmax_idx = None;
        for t in 0..l {
            if sign(t) > 0.0 {
                if !upper(alpha[t]) && -grad[t] >= gmax {
                    gmax = -grad[t];
                    gmax_idx = Some(t);
                }
            } else if !lower(alpha[t]) && grad[t] >= gmax {
                gmax = grad[t];
                gmax_idx = Some(t);
            }
        }
        let Some(i) = gmax_idx else { break };
        let mut gmax2 = f64::NEG_INFINITY;
        let mut gmin_idx = None;
        let mut obj_min = f64::INFINITY;
        for j in 0..l {
            let (diff, eligible) = if sign(j) > 0.0 {
                if !lower(alpha[j]) {
                    gmax2 = gmax2.max(grad[j]);
                }
                (gmax + grad[j], !lower(alpha[j]))
            } else {
                if !upper(alpha[j]) {
                    gmax2 = gmax2.max(-grad[j]);
                }
                (gmax - grad[j], !upper(alpha[j]))
            };
            if eligible && diff > 0.0 {
                let quad = qd(i) + qd(j) - 2.0 * sign(i) * q(i, j) * sign(j);
                let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= obj_min {
                    obj_min = obj;
                    gmin_idx = Some(j);
                }
            }
        }
        if gmax + gmax2 < KKT_TOL {
            break;
        }
        let Some(j) = gmin_idx else { break };
        if iter >= max_iter {
            return Err(EnsembleError::NoConvergence(max_iter));
        }
        iter += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = q(i, j);
        if sign(i) != sign(j) {
            let quad = (qd(i) + qd(j) + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (qd(i) + qd(j) - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(i, t) * di + q(j, t) * dj;
        }
    }

    // Bias from free variables, else the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..l {
        let yg = sign(t) * grad[t];
        if upper(alpha[t]) {
            if sign(t) < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if sign(t) > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 { sum_free / free as f64 } else { (ub + lb) / 2.0 };

    let theta: Vec<f64> = (0..n).map(|t| alpha[t] - alpha[t + n]).collect();
    let objective = svr_dual_objective(data, epsilon, gamma, &theta);
    let (support, coef) = theta
        .iter()
        .enumerate()
        .filter(|(_, t)| **t != 0.0)
        .map(|(i, t)| (x[i].clone(), *t))
        .unzip();
    Ok(SvrModel {
        gamma,
        epsilon,
        c,
        support,
        coef,
        bias: -rho,
        objective,
        iterations: iter,
    })
}

pub fn svr_predict(model: &SvrModel, features: &[Vec<f64>]) -> Result<Vec<f64>> {
    if let Some(s) = model.support.first() {
        check_width(features, s.len())?;
    }
    Ok(features
        .iter()
        .map(|x| {
            model
                .support
                .iter()
                .zip(&model.coef)
                .map(|(s, c)| c * rbf(s, x, model.gamma))
                .sum::<f64>()
                + model.bias
        })
        .collect())
}
