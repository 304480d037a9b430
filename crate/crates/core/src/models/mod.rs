//! The four stage-1 feature learners.
//!
//! Single-input models (SISO, SIMO) read the 7×n window matrix as a
//! length-7 sequence of n-dimensional rows: LSTM → conv(4) → conv(8) →
//! FC stack. Multiple-input models (MISO, MIMO) run the same LSTM+conv trunk
//! on the 5 NWP rows only and give measured speed and measured power an
//! LSTM each; the three feature vectors are concatenated before the FC
//! stack. Multiple-output models add a linear speed head next to the power
//! head.

mod io;
mod train;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use windcast_nn::{Conv2dParams, FcParams, Graph, LstmParams, NnError, Tensor, Var};

use crate::data::{denorm_power, denorm_speed, InputWindow, NormStats, WindowSet};

pub use io::{load_model, save_model};
pub use train::{loss_on, train_stage1, train_stage1_observed, TrainConfig};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("unknown architecture `{0}` (expected siso, simo, miso or mimo)")]
    UnknownArchitecture(String),
    #[error("windows were normalised with different statistics than the model")]
    NormMismatch,
    #[error("windows have {got} history columns, model expects {expected}")]
    HistoryMismatch { expected: usize, got: usize },
    #[error("{0} window set is empty")]
    EmptyWindows(&'static str),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("network: {0}")]
    Nn(#[from] NnError),
    #[error("model file: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Input/output structure of a stage-1 network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Architecture {
    Mimo,
    Miso,
    Simo,
    Siso,
}

impl Architecture {
    /// Blend-feature column order.
    pub const ALL: [Architecture; 4] = [Self::Mimo, Self::Miso, Self::Simo, Self::Siso];

    pub fn multi_input(self) -> bool {
        matches!(self, Self::Mimo | Self::Miso)
    }

    pub fn multi_output(self) -> bool {
        matches!(self, Self::Mimo | Self::Simo)
    }

    pub fn outputs(self) -> usize {
        if self.multi_output() {
            2
        } else {
            1
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Self::Mimo => "mimo",
            Self::Miso => "miso",
            Self::Simo => "simo",
            Self::Siso => "siso",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Self::Mimo => 0,
            Self::Miso => 1,
            Self::Simo => 2,
            Self::Siso => 3,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag().to_uppercase())
    }
}

impl FromStr for Architecture {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mimo" => Ok(Self::Mimo),
            "miso" => Ok(Self::Miso),
            "simo" => Ok(Self::Simo),
            "siso" => Ok(Self::Siso),
            _ => Err(ModelError::UnknownArchitecture(s.to_string())),
        }
    }
}

/// Layer sizes. The default is the full-size network; tests shrink it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub history: usize,
    pub lstm_hidden: usize,
    pub conv1_kernels: usize,
    pub conv2_kernels: usize,
    pub fc: [usize; 3],
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            history: crate::data::DEFAULT_HISTORY,
            lstm_hidden: 64,
            conv1_kernels: 4,
            conv2_kernels: 8,
            fc: [256, 64, 16],
        }
    }
}

impl ModelDims {
    fn conv_features(&self, rows: usize) -> usize {
        self.conv2_kernels * (rows - 4) * (self.lstm_hidden - 4)
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.history == 0 || self.lstm_hidden < 5 || self.conv1_kernels == 0 || self.conv2_kernels == 0 {
            return Err(ModelError::Config(format!("degenerate dims {self:?}")));
        }
        if self.fc.contains(&0) {
            return Err(ModelError::Config("zero-width FC layer".into()));
        }
        Ok(())
    }
}

/// Feature extractor in front of the FC stack.
#[derive(Debug, Clone, PartialEq)]
pub enum Trunk {
    /// LSTM over all 7 rows, then two conv layers.
    Single {
        lstm: LstmParams,
        conv1: Conv2dParams,
        conv2: Conv2dParams,
    },
    /// LSTM+conv on the NWP rows; one LSTM each for speed and power history.
    Multi {
        nwp_lstm: LstmParams,
        conv1: Conv2dParams,
        conv2: Conv2dParams,
        speed_lstm: LstmParams,
        power_lstm: LstmParams,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingMeta {
    pub epochs_run: usize,
    pub best_val_rmse: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Model {
    pub architecture: Architecture,
    pub dims: ModelDims,
    pub trunk: Trunk,
    pub fc: [FcParams; 3],
    pub power_head: FcParams,
    pub speed_head: Option<FcParams>,
    pub norm_stats: NormStats,
    pub meta: TrainingMeta,
}

/// Forecasts for a window set, in window order.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    /// MW, clipped to `[0, capacity]`.
    pub power: Vec<f64>,
    /// m/s, non-negative; present for multiple-output models.
    pub speed: Option<Vec<f64>>,
    /// Unclipped normalised power-head output.
    pub raw_power: Vec<f64>,
}

pub fn build_model(architecture: Architecture, seed: u64, norm_stats: NormStats) -> Stage1Model {
    build_model_with_dims(architecture, seed, norm_stats, ModelDims::default()).expect("default dims are valid")
}

/// Seeded construction. Parameters are drawn in a fixed order (trunk, FC
/// stack, power head, speed head), so architectures that share a trunk type
/// share its initial weights for the same seed.
pub fn build_model_with_dims(
    architecture: Architecture,
    seed: u64,
    norm_stats: NormStats,
    dims: ModelDims,
) -> Result<Stage1Model, ModelError> {
    dims.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = dims.lstm_hidden;
    let (trunk, features) = if architecture.multi_input() {
        let nwp_lstm = LstmParams::init(&mut rng, dims.history, h);
        let conv1 = Conv2dParams::init(&mut rng, 1, dims.conv1_kernels);
        let conv2 = Conv2dParams::init(&mut rng, dims.conv1_kernels, dims.conv2_kernels);
        let speed_lstm = LstmParams::init(&mut rng, dims.history, h);
        let power_lstm = LstmParams::init(&mut rng, dims.history, h);
        (
            Trunk::Multi {
                nwp_lstm,
                conv1,
                conv2,
                speed_lstm,
                power_lstm,
            },
            dims.conv_features(5) + 2 * h,
        )
    } else {
        let lstm = LstmParams::init(&mut rng, dims.history, h);
        let conv1 = Conv2dParams::init(&mut rng, 1, dims.conv1_kernels);
        let conv2 = Conv2dParams::init(&mut rng, dims.conv1_kernels, dims.conv2_kernels);
        (Trunk::Single { lstm, conv1, conv2 }, dims.conv_features(7))
    };
    let fc = [
        FcParams::init(&mut rng, features, dims.fc[0]),
        FcParams::init(&mut rng, dims.fc[0], dims.fc[1]),
        FcParams::init(&mut rng, dims.fc[1], dims.fc[2]),
    ];
    let power_head = FcParams::init(&mut rng, dims.fc[2], 1);
    let speed_head = architecture
        .multi_output()
        .then(|| FcParams::init(&mut rng, dims.fc[2], 1));
    Ok(Stage1Model {
        architecture,
        dims,
        trunk,
        fc,
        power_head,
        speed_head,
        norm_stats,
        meta: TrainingMeta {
            seed,
            best_val_rmse: f64::INFINITY,
            ..TrainingMeta::default()
        },
    })
}

/// Rows `rows` of every window, one `(batch, n)` tensor per row.
fn row_inputs(g: &mut Graph, batch: &[&InputWindow], rows: std::ops::Range<usize>, n: usize) -> Vec<Var> {
    rows.map(|r| {
        let mut data = Vec::with_capacity(batch.len() * n);
        for w in batch {
            data.extend_from_slice(w.matrix.row(r));
        }
        g.input(Tensor::new(&[batch.len(), n], data).expect("row batch"))
    })
    .collect()
}

impl Stage1Model {
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out: Vec<&Tensor> = match &self.trunk {
            Trunk::Single { lstm, conv1, conv2 } => {
                let mut v = lstm.tensors();
                v.extend(conv1.tensors());
                v.extend(conv2.tensors());
                v
            }
            Trunk::Multi {
                nwp_lstm,
                conv1,
                conv2,
                speed_lstm,
                power_lstm,
            } => {
                let mut v = nwp_lstm.tensors();
                v.extend(conv1.tensors());
                v.extend(conv2.tensors());
                v.extend(speed_lstm.tensors());
                v.extend(power_lstm.tensors());
                v
            }
        };
        for f in &self.fc {
            out.extend(f.tensors());
        }
        out.extend(self.power_head.tensors());
        if let Some(s) = &self.speed_head {
            out.extend(s.tensors());
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = match &mut self.trunk {
            Trunk::Single { lstm, conv1, conv2 } => {
                let mut v = lstm.tensors_mut();
                v.extend(conv1.tensors_mut());
                v.extend(conv2.tensors_mut());
                v
            }
            Trunk::Multi {
                nwp_lstm,
                conv1,
                conv2,
                speed_lstm,
                power_lstm,
            } => {
                let mut v = nwp_lstm.tensors_mut();
                v.extend(conv1.tensors_mut());
                v.extend(conv2.tensors_mut());
                v.extend(speed_lstm.tensors_mut());
                v.extend(power_lstm.tensors_mut());
                v
            }
        };
        for f in &mut self.fc {
            out.extend(f.tensors_mut());
        }
        out.extend(self.power_head.tensors_mut());
        if let Some(s) = &mut self.speed_head {
            out.extend(s.tensors_mut());
        }
        out
    }

    pub fn output_arity(&self) -> usize {
        1 + usize::from(self.speed_head.is_some())
    }

    /// Records the forward pass for `batch` on `g`. Parameters are
    /// registered in [`Stage1Model::tensors`] order. Returns the
    /// `(batch, 1)` power head and, for multi-output models, the speed head.
    pub fn forward(&self, g: &mut Graph, batch: &[&InputWindow]) -> Result<(Var, Option<Var>), ModelError> {
        let n = self.dims.history;
        if let Some(w) = batch.first() {
            if w.columns() != n {
                return Err(ModelError::HistoryMismatch {
                    expected: n,
                    got: w.columns(),
                });
            }
        }
        let b = batch.len();
        let hd = self.dims.lstm_hidden;
        let conv_stack = |g: &mut Graph, hs: &[Var], c1: &Conv2dParams, c2: &Conv2dParams| -> Result<Var, ModelError> {
            let c1v = c1.bind(g);
            let c2v = c2.bind(g);
            let rows = hs.len();
            let stacked = g.stack_steps(hs)?;
            let map = g.reshape(stacked, &[b, 1, rows, hd])?;
            let y1 = c1v.run(g, map)?;
            let y1 = g.elu(y1);
            let y2 = c2v.run(g, y1)?;
            let y2 = g.elu(y2);
            let flat = self.dims.conv_features(rows);
            Ok(g.reshape(y2, &[b, flat])?)
        };
        let zeros = |g: &mut Graph| g.input(Tensor::zeros(&[b, hd]));

        let features = match &self.trunk {
            Trunk::Single { lstm, conv1, conv2 } => {
                let lv = lstm.bind(g)?;
                let xs = row_inputs(g, batch, 0..7, n);
                let (h0, c0) = (zeros(g), zeros(g));
                let hs = lv.run(g, &xs, h0, c0)?;
                conv_stack(g, &hs, conv1, conv2)?
            }
            Trunk::Multi {
                nwp_lstm,
                conv1,
                conv2,
                speed_lstm,
                power_lstm,
            } => {
                let lv = nwp_lstm.bind(g)?;
                let xs = row_inputs(g, batch, 0..5, n);
                let (h0, c0) = (zeros(g), zeros(g));
                let hs = lv.run(g, &xs, h0, c0)?;
                let nwp_feat = conv_stack(g, &hs, conv1, conv2)?;
                let mut history_feats = Vec::with_capacity(2);
                for (params, row) in [(speed_lstm, 5), (power_lstm, 6)] {
                    let v = params.bind(g)?;
                    let x = row_inputs(g, batch, row..row + 1, n);
                    let (h0, c0) = (zeros(g), zeros(g));
                    let hs = v.run(g, &x, h0, c0)?;
                    history_feats.push(hs[0]);
                }
                g.concat_cols(&[nwp_feat, history_feats[0], history_feats[1]])?
            }
        };
        let fcv: Vec<_> = self.fc.iter().map(|f| f.bind(g)).collect();
        let pv = self.power_head.bind(g);
        let sv = self.speed_head.as_ref().map(|s| s.bind(g));
        let mut x = features;
        for f in &fcv {
            let y = f.run(g, x)?;
            x = g.elu(y);
        }
        let power = pv.run(g, x)?;
        let speed = match sv {
            Some(s) => Some(s.run(g, x)?),
            None => None,
        };
        Ok((power, speed))
    }

    /// Normalised head outputs for `windows`, without clipping.
    pub fn predict_normalized(&self, windows: &[&InputWindow]) -> Result<(Vec<f64>, Option<Vec<f64>>), ModelError> {
        const CHUNK: usize = 256;
        let mut power = Vec::with_capacity(windows.len());
        let mut speed = self.speed_head.as_ref().map(|_| Vec::with_capacity(windows.len()));
        for chunk in windows.chunks(CHUNK) {
            let mut g = Graph::new();
            let (p, s) = self.forward(&mut g, chunk)?;
            power.extend_from_slice(g.value(p).data());
            if let (Some(s), Some(out)) = (s, speed.as_mut()) {
                out.extend_from_slice(g.value(s).data());
            }
        }
        Ok((power, speed))
    }
}

/// Power (and speed) forecasts in physical units. Power is clipped to
/// `[0, capacity]`.
pub fn predict(model: &Stage1Model, windows: &WindowSet) -> Result<Forecast, ModelError> {
    if windows.stats != model.norm_stats {
        return Err(ModelError::NormMismatch);
    }
    let refs: Vec<&InputWindow> = windows.windows.iter().collect();
    let (raw_power, raw_speed) = model.predict_normalized(&refs)?;
    let cap = model.norm_stats.capacity_mw;
    let power = denorm_power(&raw_power, &model.norm_stats)
        .into_iter()
        .map(|p| p.clamp(0.0, cap))
        .collect();
    let speed = raw_speed.map(|s| {
        denorm_speed(&s, &model.norm_stats)
            .into_iter()
            .map(|v| v.max(0.0))
            .collect()
    });
    Ok(Forecast {
        power,
        speed,
        raw_power,
    })
}
