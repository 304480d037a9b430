use crate::NnError;

/// `(1/m)·Σ(predᵢ − targetᵢ)²`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64, NnError> {
    if pred.is_empty() {
        return Err(NnError::EmptyInput("mse_loss"));
    }
    if pred.len() != target.len() {
        return Err(NnError::ShapeMismatch {
            op: "mse_loss",
            expected: format!("{} targets", pred.len()),
            got: format!("{}", target.len()),
        });
    }
    let sum: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / pred.len() as f64)
}

/// Power/speed multi-output loss: `alpha·mse(power) + beta·mse(speed)`.
pub fn combined_loss(
    pred_power: &[f64],
    target_power: &[f64],
    pred_speed: &[f64],
    target_speed: &[f64],
    alpha: f64,
    beta: f64,
) -> Result<f64, NnError> {
    if pred_power.len() != pred_speed.len() {
        return Err(NnError::ShapeMismatch {
            op: "combined_loss",
            expected: format!("{} speed predictions", pred_power.len()),
            got: format!("{}", pred_speed.len()),
        });
    }
    Ok(alpha * mse_loss(pred_power, target_power)? + beta * mse_loss(pred_speed, target_speed)?)
}
