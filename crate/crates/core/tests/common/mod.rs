#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use windcast::ensemble::{svr_dual_objective, BlendDataset};

/// Gaussian elimination with partial pivoting on a dense copy.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, v)| r.iter().copied().chain([*v]).collect()).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..=n {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    x
}

/// Ridge weights from the explicitly formed normal equations.
pub fn ridge_oracle(x: &[Vec<f64>], y: &[f64], alpha: f64) -> Vec<f64> {
    let d = x[0].len();
    let a: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| x.iter().map(|r| r[i] * r[j]).sum::<f64>() + if i == j { alpha } else { 0.0 })
                .collect()
        })
        .collect();
    let b: Vec<f64> = (0..d).map(|i| x.iter().zip(y).map(|(r, v)| r[i] * v).sum()).collect();
    solve_dense(&a, &b)
}

pub fn rbf(a: &[f64], b: &[f64], ell: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum();
    (-d2 / (2.0 * ell * ell)).exp()
}

/// Zero-mean GP posterior mean on already-standardised inputs.
pub fn gpr_oracle(x: &[Vec<f64>], y: &[f64], noise: f64, ell: f64, query: &[Vec<f64>]) -> Vec<f64> {
    let n = x.len();
    let k: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| rbf(&x[i], &x[j], ell) + if i == j { noise } else { 0.0 }).collect())
        .collect();
    let coef = solve_dense(&k, y);
    query
        .iter()
        .map(|q| x.iter().zip(&coef).map(|(t, c)| c * rbf(t, q, ell)).sum())
        .collect()
}

/// Population standardisation, constant columns left unscaled.
pub fn standardize(x: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = (x.len() as f64, x[0].len());
    let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let sd = (0..d)
        .map(|j| {
            let v = x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
            if v > 0.0 {
                v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    (mean, sd)
}

/// Minimum of the SVR dual over `Σθ = 0, |θ_i| ≤ C` by shrinking-grid
/// search on the first n−1 coordinates.
pub fn svr_brute_force(data: &BlendDataset, c: f64, eps: f64, gamma: f64) -> f64 {
    let n = data.len();
    let free = n - 1;
    let steps = 9usize;
    let mut center = vec![0.0; free];
    let mut radius = c;
    let mut best = svr_dual_objective(data, eps, gamma, &vec![0.0; n]);
    let mut theta = vec![0.0; n];
    let mut idx = vec![0usize; free];
    for _ in 0..60 {
        let mut best_point = center.clone();
        loop {
            let mut sum = 0.0;
            let mut ok = true;
            for k in 0..free {
                let v = center[k] - radius + 2.0 * radius * idx[k] as f64 / (steps - 1) as f64;
                if v.abs() > c {
                    ok = false;
                }
                theta[k] = v;
                sum += v;
            }
            theta[free] = -sum;
            if ok && sum.abs() <= c {
                let f = svr_dual_objective(data, eps, gamma, &theta);
                if f < best {
                    best = f;
                    best_point.copy_from_slice(&theta[..free]);
                }
            }
            let mut k = 0;
            while k < free {
                idx[k] += 1;
                if idx[k] < steps {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == free {
                break;
            }
        }
        center = best_point;
        radius *= 0.6;
    }
    best
}

pub fn random_blend(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> BlendDataset {
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-scale..scale)).collect()).collect();
    let y = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    BlendDataset::new(x, y).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
