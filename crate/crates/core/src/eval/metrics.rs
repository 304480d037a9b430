use statrs::function::gamma::ln_gamma;

use super::EvalError;

fn check(y: &[f64], yhat: &[f64]) -> Result<(), EvalError> {
    if y.is_empty() {
        return Err(EvalError::Empty);
    }
    if y.len() != yhat.len() {
        return Err(EvalError::Length(y.len(), yhat.len()));
    }
    Ok(())
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64, EvalError> {
    check(y, yhat)?;
    let se: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((se / y.len() as f64).sqrt())
}

pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64, EvalError> {
    check(y, yhat)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Sample mean and unbiased variance of `|y − ŷ|`.
pub fn abs_diff_stats(y: &[f64], yhat: &[f64]) -> Result<(f64, f64), EvalError> {
    check(y, yhat)?;
    if y.len() < 2 {
        return Err(EvalError::TooShort(y.len()));
    }
    let d: Vec<f64> = y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).collect();
    Ok(mean_var(&d))
}

/// Regularised incomplete beta `I_x(a, b)` by Lentz's continued fraction.
pub fn incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front = (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln()).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(x, a, b) / a
    } else {
        1.0 - front * beta_cf(1.0 - x, b, a) / b
    }
}

fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = f64::from(m);
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Two-sided tail `P(|T| ≥ |t|)` of Student's t with `dof` degrees of freedom.
pub fn student_t_two_tail(t: f64, dof: f64) -> f64 {
    incomplete_beta(dof / (dof + t * t), dof / 2.0, 0.5)
}

/// `q` such that `P(T ≤ q) = p` for `p ∈ (0.5, 1)`, by bisection.
pub fn student_t_quantile(p: f64, dof: f64) -> f64 {
    let tail = 2.0 * (1.0 - p);
    let (mut lo, mut hi) = (0.0, 1.0);
    while student_t_two_tail(hi, dof) > tail {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if student_t_two_tail(mid, dof) > tail {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestResult {
    pub t_stat: f64,
    pub p_value: f64,
    pub dof: usize,
    pub mean_diff: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Two-tailed paired t-test on `a − b` with a 95% CI on the mean difference.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTestResult, EvalError> {
    check(a, b)?;
    if a.len() < 2 {
        return Err(EvalError::TooShort(a.len()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (mean, var) = mean_var(&d);
    if var <= 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    let n = d.len() as f64;
    let se = (var / n).sqrt();
    let dof = d.len() - 1;
    let t = mean / se;
    let q = student_t_quantile(0.975, dof as f64);
    Ok(TTestResult {
        t_stat: t,
        p_value: student_t_two_tail(t, dof as f64),
        dof,
        mean_diff: mean,
        ci_low: mean - q * se,
        ci_high: mean + q * se,
    })
}

/// Mean and Student-t 95% interval of `values`.
pub fn ci95(values: &[f64]) -> Result<(f64, f64, f64), EvalError> {
    if values.len() < 2 {
        return Err(EvalError::TooShort(values.len()));
    }
    let (mean, var) = mean_var(values);
    if var <= 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    let half = student_t_quantile(0.975, (values.len() - 1) as f64) * (var / values.len() as f64).sqrt();
    Ok((mean, mean - half, mean + half))
}
