//! Stage-2 blenders: ridge regression plus SVR, GPR and MLP benchmarks,
//! each tuned by contiguous-block cross-validation.

mod gpr;
mod grid;
mod io;
mod mlp;
mod ridge;
mod svr;

use std::fmt;
use std::str::FromStr;

pub use gpr::{gpr_fit, gpr_predict, GprModel};
pub use grid::{default_grid, grid_search, GridConfig};
pub use io::{load_blender, save_blender};
pub use mlp::{mlp_fit, mlp_predict, MlpConfig, MlpModel};
pub use ridge::{ridge_fit, ridge_predict};
pub use svr::{default_gamma, svr_dual_objective, svr_fit, svr_predict, SvrModel};

#[derive(Debug, thiserror::Error)]
pub enum EnsembleError {
    #[error("blend dataset: {0}")]
    Dataset(String),
    #[error("feature width {got}, expected {expected}")]
    Width { expected: usize, got: usize },
    #[error("normal equations are singular (alpha = 0 on rank-deficient features)")]
    Singular,
    #[error("kernel matrix plus noise is not positive definite")]
    NotPositiveDefinite,
    #[error("SMO did not reach KKT tolerance within {0} iterations")]
    NoConvergence(usize),
    #[error("invalid hyperparameter: {0}")]
    Hyper(String),
    #[error("need at least {folds} samples for {folds}-fold CV, got {n}")]
    TooFewSamples { folds: usize, n: usize },
    #[error("unknown blender `{0}` (expected rr, svr, ann or gpr)")]
    UnknownMethod(String),
    #[error("network: {0}")]
    Nn(#[from] windcast_nn::NnError),
    #[error("blender file: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EnsembleError>;

/// Stage-1 forecasts (one row per origin, columns MIMO, MISO, SIMO, SISO in
/// MW) and the real power they are blended towards.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendDataset {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl BlendDataset {
    pub fn new(features: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if features.is_empty() {
            return Err(EnsembleError::Dataset("no samples".into()));
        }
        if features.len() != targets.len() {
            return Err(EnsembleError::Dataset(format!(
                "{} feature rows but {} targets",
                features.len(),
                targets.len()
            )));
        }
        let d = features[0].len();
        if d == 0 {
            return Err(EnsembleError::Dataset("zero-width features".into()));
        }
        if let Some(i) = features.iter().position(|r| r.len() != d) {
            return Err(EnsembleError::Dataset(format!("row {i} has {} features, row 0 has {d}", features[i].len())));
        }
        if features.iter().flatten().chain(&targets).any(|v| !v.is_finite()) {
            return Err(EnsembleError::Dataset("non-finite value".into()));
        }
        Ok(Self { features, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn width(&self) -> usize {
        self.features[0].len()
    }

    pub(crate) fn subset(&self, idx: impl Iterator<Item = usize>) -> Self {
        let (features, targets) = idx.map(|i| (self.features[i].clone(), self.targets[i])).unzip();
        Self { features, targets }
    }
}

pub(crate) fn check_width(features: &[Vec<f64>], expected: usize) -> Result<()> {
    match features.iter().find(|r| r.len() != expected) {
        Some(r) => Err(EnsembleError::Width {
            expected,
            got: r.len(),
        }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlendMethod {
    Rr,
    Svr,
    Ann,
    Gpr,
}

impl BlendMethod {
    pub const ALL: [BlendMethod; 4] = [Self::Rr, Self::Svr, Self::Ann, Self::Gpr];

    pub fn tag(self) -> &'static str {
        match self {
            Self::Rr => "rr",
            Self::Svr => "svr",
            Self::Ann => "ann",
            Self::Gpr => "gpr",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Self::Rr => 0,
            Self::Svr => 1,
            Self::Ann => 2,
            Self::Gpr => 3,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }
}

impl fmt::Display for BlendMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag().to_uppercase())
    }
}

impl FromStr for BlendMethod {
    type Err = EnsembleError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rr" => Ok(Self::Rr),
            "svr" => Ok(Self::Svr),
            "ann" | "mlp" => Ok(Self::Ann),
            "gpr" => Ok(Self::Gpr),
            _ => Err(EnsembleError::UnknownMethod(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedBlender {
    Ridge(Vec<f64>),
    Svr(SvrModel),
    Mlp(MlpModel),
    Gpr(GprModel),
}

impl FittedBlender {
    pub fn method(&self) -> BlendMethod {
        match self {
            Self::Ridge(_) => BlendMethod::Rr,
            Self::Svr(_) => BlendMethod::Svr,
            Self::Mlp(_) => BlendMethod::Ann,
            Self::Gpr(_) => BlendMethod::Gpr,
        }
    }

    pub fn predict(&self, features: &[Vec<f64>]) -> Result<Vec<f64>> {
        match self {
            Self::Ridge(w) => ridge_predict(w, features),
            Self::Svr(m) => svr_predict(m, features),
            Self::Mlp(m) => mlp_predict(m, features),
            Self::Gpr(m) => gpr_predict(m, features),
        }
    }
}

/// A tuned, refitted stage-2 model.
#[derive(Debug, Clone, PartialEq)]
pub struct Blender {
    pub model: FittedBlender,
    /// The selected grid value (ridge/GPR alpha, SVR C or MLP decay).
    pub hyper: f64,
    /// Mean fold RMSE of the selected value.
    pub cv_score: f64,
}

impl Blender {
    pub fn method(&self) -> BlendMethod {
        self.model.method()
    }

    pub fn predict(&self, features: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.model.predict(features)
    }
}
