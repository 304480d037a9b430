use nalgebra::{DMatrix, DVector};

use super::{check_width, BlendDataset, EnsembleError, Result};

/// `w = (XᵀX + αI)⁻¹ Xᵀy` by Cholesky. No intercept.
pub fn ridge_fit(data: &BlendDataset, alpha: f64) -> Result<Vec<f64>> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(EnsembleError::Hyper(format!("ridge alpha must be >= 0, got {alpha}")));
    }
    let d = data.width();
    let x = DMatrix::from_fn(data.len(), d, |i, j| data.features[i][j]);
    let y = DVector::from_column_slice(&data.targets);
    let mut a = x.tr_mul(&x);
    for i in 0..d {
        a[(i, i)] += alpha;
    }
    let b = x.tr_mul(&y);
    let chol = a.cholesky().ok_or(EnsembleError::Singular)?;
    let w = chol.solve(&b);
    if w.iter().any(|v| !v.is_finite()) {
        return Err(EnsembleError::Singular);
    }
    Ok(w.iter().copied().collect())
}

pub fn ridge_predict(w: &[f64], features: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_width(features, w.len())?;
    Ok(features
        .iter()
        .map(|r| r.iter().zip(w).map(|(a, b)| a * b).sum())
        .collect())
}
