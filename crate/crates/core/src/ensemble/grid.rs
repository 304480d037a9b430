use super::{
    gpr_fit, mlp_fit, ridge_fit, svr::default_gamma, svr_fit, BlendDataset, BlendMethod, Blender, EnsembleError,
    FittedBlender, MlpConfig, Result,
};

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub folds: usize,
    pub svr_epsilon: f64,
    pub gpr_length_scale: f64,
    pub mlp: MlpConfig,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            svr_epsilon: 0.1,
            gpr_length_scale: 1.0,
            mlp: MlpConfig::default(),
        }
    }
}

/// Search grid per method: ridge alpha 1..=100, SVR C 0.5..=20 (step 0.5),
/// MLP decay {1e-4, 3e-4, 1e-3, 3e-3, 1e-2}, GPR alpha 0.1..=1.0 (step 0.1).
pub fn default_grid(method: BlendMethod) -> Vec<f64> {
    match method {
        BlendMethod::Rr => (1..=100).map(f64::from).collect(),
        BlendMethod::Svr => (1..=40).map(|i| f64::from(i) / 2.0).collect(),
        BlendMethod::Ann => vec![1e-4, 3e-4, 1e-3, 3e-3, 1e-2],
        BlendMethod::Gpr => (1..=10).map(|i| f64::from(i) / 10.0).collect(),
    }
}

fn fit(method: BlendMethod, data: &BlendDataset, hyper: f64, cfg: &GridConfig) -> Result<FittedBlender> {
    Ok(match method {
        BlendMethod::Rr => FittedBlender::Ridge(ridge_fit(data, hyper)?),
        BlendMethod::Svr => FittedBlender::Svr(svr_fit(data, hyper, cfg.svr_epsilon, default_gamma(data))?),
        BlendMethod::Ann => FittedBlender::Mlp(mlp_fit(data, hyper, &cfg.mlp)?),
        BlendMethod::Gpr => FittedBlender::Gpr(gpr_fit(data, hyper, cfg.gpr_length_scale)?),
    })
}

/// Larger value = stronger regularisation, except for SVR's C.
fn regularisation_order(method: BlendMethod, grid: &[f64]) -> Vec<f64> {
    let mut g = grid.to_vec();
    g.sort_by(|a, b| a.total_cmp(b));
    if method == BlendMethod::Svr {
        g.reverse();
    }
    g
}

fn fold_bounds(n: usize, folds: usize, k: usize) -> (usize, usize) {
    (k * n / folds, (k + 1) * n / folds)
}

/// Mean held-out RMSE over contiguous folds.
pub(crate) fn cv_score(method: BlendMethod, data: &BlendDataset, hyper: f64, cfg: &GridConfig) -> Result<f64> {
    let n = data.len();
    let mut total = 0.0;
    for k in 0..cfg.folds {
        let (lo, hi) = fold_bounds(n, cfg.folds, k);
        let train = data.subset((0..lo).chain(hi..n));
        let test = data.subset(lo..hi);
        let pred = fit(method, &train, hyper, cfg)?.predict(&test.features)?;
        let se: f64 = pred.iter().zip(&test.targets).map(|(p, y)| (p - y).powi(2)).sum();
        total += (se / test.len() as f64).sqrt();
    }
    Ok(total / cfg.folds as f64)
}

/// Picks the grid value with the lowest mean fold RMSE (ties go to the more
/// regularised value) and refits it on all of `data`.
pub fn grid_search(method: BlendMethod, data: &BlendDataset, grid: &[f64], cfg: &GridConfig) -> Result<Blender> {
    if cfg.folds < 2 {
        return Err(EnsembleError::Hyper(format!("need at least 2 folds, got {}", cfg.folds)));
    }
    if data.len() < cfg.folds {
        return Err(EnsembleError::TooFewSamples {
            folds: cfg.folds,
            n: data.len(),
        });
    }
    if grid.is_empty() {
        return Err(EnsembleError::Hyper("empty grid".into()));
    }
    let mut best: Option<(f64, f64)> = None;
    for h in regularisation_order(method, grid) {
        let s = cv_score(method, data, h, cfg)?;
        if best.is_none_or(|(_, b)| s <= b) {
            best = Some((h, s));
        }
    }
    let (hyper, cv_score) = best.expect("non-empty grid");
    Ok(Blender {
        model: fit(method, data, hyper, cfg)?,
        hyper,
        cv_score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_match_published_ranges() {
        let rr = default_grid(BlendMethod::Rr);
        assert_eq!((rr.len(), rr[0], rr[99]), (100, 1.0, 100.0));
        let svr = default_grid(BlendMethod::Svr);
        assert_eq!((svr.len(), svr[0], svr[39]), (40, 0.5, 20.0));
        let gpr = default_grid(BlendMethod::Gpr);
        assert_eq!((gpr.len(), gpr[2], gpr[9]), (10, 0.3, 1.0));
    }

    #[test]
    fn folds_cover_everything_once() {
        let n = 23;
        let mut seen = vec![0; n];
        for k in 0..5 {
            let (lo, hi) = fold_bounds(n, 5, k);
            for s in &mut seen[lo..hi] {
                *s += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn tie_goes_to_stronger_regularisation() {
        // Zero features: every alpha gives w = 0 and identical fold scores.
        let d = BlendDataset::new(vec![vec![0.0]; 10], (0..10).map(f64::from).collect()).unwrap();
        let b = grid_search(BlendMethod::Rr, &d, &[3.0, 1.0, 2.0], &GridConfig::default()).unwrap();
        assert_eq!(b.hyper, 3.0);
    }

    #[test]
    fn single_value_grid() {
        let d = BlendDataset::new((0..10).map(|i| vec![f64::from(i)]).collect(), (0..10).map(f64::from).collect())
            .unwrap();
        let b = grid_search(BlendMethod::Gpr, &d, &[0.4], &GridConfig::default()).unwrap();
        assert_eq!(b.hyper, 0.4);
        assert!(matches!(
            grid_search(BlendMethod::Rr, &d.subset(0..3), &[1.0], &GridConfig::default()),
            Err(EnsembleError::TooFewSamples { .. })
        ));
    }
}
