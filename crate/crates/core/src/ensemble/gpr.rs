use nalgebra::{DMatrix, DVector};

use super::{check_width, BlendDataset, EnsembleError, Result};

/// Zero-mean GP with an RBF kernel on standardised features.
#[derive(Debug, Clone, PartialEq)]
pub struct GprModel {
    pub length_scale: f64,
    pub noise_alpha: f64,
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    /// Standardised training inputs.
    pub train: Vec<Vec<f64>>,
    /// `(K + αI)⁻¹ y`.
    pub dual_coef: Vec<f64>,
}

impl GprModel {
    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.feature_mean)
            .zip(&self.feature_scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        rbf(a, b, self.length_scale)
    }
}

fn rbf(a: &[f64], b: &[f64], ell: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-d2 / (2.0 * ell * ell)).exp()
}

pub fn gpr_fit(data: &BlendDataset, noise_alpha: f64, length_scale: f64) -> Result<GprModel> {
    if !(noise_alpha >= 0.0) || !(length_scale > 0.0) {
        return Err(EnsembleError::Hyper(format!(
            "need noise_alpha >= 0 and length_scale > 0, got {noise_alpha}, {length_scale}"
        )));
    }
    let (n, d) = (data.len(), data.width());
    let mut mean = vec![0.0; d];
    for r in &data.features {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n as f64;
        }
    }
    let scale: Vec<f64> = (0..d)
        .map(|j| {
            let var = data.features.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n as f64;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut model = GprModel {
        length_scale,
        noise_alpha,
        feature_mean: mean,
        feature_scale: scale,
        train: Vec::new(),
        dual_coef: Vec::new(),
    };
    model.train = data.features.iter().map(|r| model.standardize(r)).collect();
    let k = DMatrix::from_fn(n, n, |i, j| {
        let v = rbf(&model.train[i], &model.train[j], length_scale);
        if i == j {
            v + noise_alpha
        } else {
            v
        }
    });
    let chol = k.cholesky().ok_or(EnsembleError::NotPositiveDefinite)?;
    let coef = chol.solve(&DVector::from_column_slice(&data.targets));
    model.dual_coef = coef.iter().copied().collect();
    Ok(model)
}

/// Posterior mean `k*ᵀ(K + αI)⁻¹y`.
pub fn gpr_predict(model: &GprModel, features: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_width(features, model.feature_mean.len())?;
    Ok(features
        .iter()
        .map(|x| {
            let z = model.standardize(x);
            model
                .train
                .iter()
                .zip(&model.dual_coef)
                .map(|(t, c)| c * model.kernel(t, &z))
                .sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_posterior() {
        let d = BlendDataset::new(vec![vec![0.0]], vec![1.0]).unwrap();
        let m = gpr_fit(&d, 1.0, 1.0).unwrap();
        let p = gpr_predict(&m, &[vec![0.0]]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn far_queries_revert_to_zero() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, (i * i) as f64 % 5.0]).collect();
        let y: Vec<f64> = (0..8).map(|i| 10.0 + i as f64).collect();
        let d = BlendDataset::new(x, y.clone()).unwrap();
        let m = gpr_fit(&d, 0.1, 1.0).unwrap();
        let far = m
            .feature_mean
            .iter()
            .zip(&m.feature_scale)
            .map(|(mu, s)| mu + 40.0 * s)
            .collect::<Vec<_>>();
        let p = gpr_predict(&m, &[far]).unwrap()[0];
        let ymax = y.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        assert!(p.abs() <= 1e-6 * ymax);
    }

    #[test]
    fn huge_noise_shrinks_to_zero() {
        let d = BlendDataset::new(vec![vec![0.0], vec![1.0], vec![2.0]], vec![5.0, 6.0, 7.0]).unwrap();
        let m = gpr_fit(&d, 1e12, 1.0).unwrap();
        let p = gpr_predict(&m, &d.features).unwrap();
        assert!(p.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn duplicate_points_without_noise_fail() {
        let d = BlendDataset::new(vec![vec![1.0], vec![1.0]], vec![1.0, 1.0]).unwrap();
        assert!(matches!(gpr_fit(&d, 0.0, 1.0), Err(EnsembleError::NotPositiveDefinite)));
    }
}
