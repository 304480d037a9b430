use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use windcast::ensemble::{BlendMethod, GridConfig, MlpConfig};
use windcast::eval::{quarter_seasons, ExperimentConfig};
use windcast::models::{Architecture, ModelDims, TrainConfig};
use windcast::pipeline::{PipelineConfig, PlanConfig};

use crate::error::CliError;

/// Declares the run configuration once: the serde struct read from the
/// config file, the matching `--key value` overrides and the sectioned
/// manifest writer.
macro_rules! run_config {
    ($( [$sec:ident] $( $(#[doc = $doc:literal])* $name:ident : [$($ty:tt)+] = $default:expr; )* )*) => {
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct RunConfig {
            $($( $(#[doc = $doc])* pub $name: $($ty)+, )*)*
        }

        impl Default for RunConfig {
            fn default() -> Self {
                Self { $($( $name: $default, )*)* }
            }
        }

        #[derive(Debug, Clone, Default, clap::Args)]
        pub struct Overrides {
            $($(
                $(#[doc = $doc])*
                #[arg(long = stringify!($name), global = true, value_delimiter = ',', help_heading = stringify!($sec))]
                pub $name: Option<$($ty)+>,
            )*)*
        }

        impl Overrides {
            pub fn apply(&self, c: &mut RunConfig) {
                $($( if let Some(v) = &self.$name { c.$name = v.clone(); } )*)*
            }
        }

        impl RunConfig {
            /// Sectioned TOML; reading it back gives the same config.
            pub fn to_toml(&self) -> String {
                let mut root = toml::Table::new();
                $(
                    let mut t = toml::Table::new();
                    $( t.insert(stringify!($name).into(), toml::Value::try_from(&self.$name).expect("config value serialises")); )*
                    root.insert(stringify!($sec).into(), toml::Value::Table(t));
                )*
                toml::to_string(&root).expect("config serialises")
            }
        }
    };
}

run_config! {
    [run]
    /// Run seed.
    seed: [u64] = 0;
    /// Output directory.
    out: [PathBuf] = PathBuf::from("out");
    /// Worker threads (stage-1 trainings or experiment cases).
    threads: [usize] = 1;
    [data]
    /// Farm CSV files.
    data: [Vec<PathBuf>] = Vec::new();
    /// Installed capacity for CSV input; 0 picks the wf1/wf2/wf3 preset from the file name.
    capacity_mw: [f64] = 0.0;
    [synth]
    /// Synthetic farms to generate.
    farms: [usize] = 3;
    /// Days per synthetic farm.
    days: [usize] = 400;
    [plan]
    start_day: [usize] = 0;
    stage1_days: [usize] = 365;
    val_days: [usize] = 10;
    stage2_days: [usize] = 10;
    test_days: [usize] = 10;
    l_c1_days: [usize] = 10;
    l_c2_days: [usize] = 1;
    [model]
    /// Stage-1 architecture for `train`: mimo, miso, simo or siso.
    arch: [String] = "siso".into();
    /// Steps between origin and target.
    horizon: [usize] = 8;
    /// History and NWP rows per window.
    history: [usize] = 15;
    lstm_hidden: [usize] = 64;
    conv1_kernels: [usize] = 4;
    conv2_kernels: [usize] = 8;
    /// Fully connected widths.
    fc: [Vec<usize>] = vec![256, 64, 16];
    [train]
    alpha: [f64] = 1.0;
    beta: [f64] = 0.9;
    batch_size: [usize] = 32;
    max_epochs: [usize] = 100;
    patience: [usize] = 10;
    learning_rate: [f64] = 1e-3;
    /// Use every k-th training window per epoch.
    window_stride: [usize] = 1;
    [stage2]
    /// Blender: rr, svr, ann or gpr.
    blender: [String] = "rr".into();
    folds: [usize] = 5;
    svr_epsilon: [f64] = 0.1;
    gpr_length_scale: [f64] = 1.0;
    mlp_max_epochs: [usize] = 200;
    /// Search grid; empty uses the blender's default grid.
    grid: [Vec<f64>] = Vec::new();
    [experiment]
    /// Seeds of the experiment runs.
    seeds: [Vec<u64>] = vec![0, 1, 2];
    /// Quarter-spaced seasonal test epochs.
    seasons: [usize] = 4;
    scenario_threshold: [f64] = 38.0;
    scenario_search_days: [usize] = 60;
}

/// Reads a `key = value` file; sections only group keys, so every key
/// must be unique across sections.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn parse_config(text: &str) -> Result<RunConfig, String> {
    let root: toml::Table = text.parse().map_err(|e: toml::de::Error| e.message().to_string())?;
    let mut flat = toml::Table::new();
    for (k, v) in root {
        let entries = match v {
            toml::Value::Table(t) => t.into_iter().collect(),
            other => vec![(k, other)],
        };
        for (key, value) in entries {
            if flat.insert(key.clone(), value).is_some() {
                return Err(format!("key `{key}` appears twice"));
            }
        }
    }
    toml::Value::Table(flat)
        .try_into()
        .map_err(|e: toml::de::Error| e.message().to_string())
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("threads", self.threads),
            ("stage1_days", self.stage1_days),
            ("val_days", self.val_days),
            ("stage2_days", self.stage2_days),
            ("test_days", self.test_days),
            ("l_c1_days", self.l_c1_days),
            ("l_c2_days", self.l_c2_days),
            ("horizon", self.horizon),
            ("history", self.history),
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
            ("patience", self.patience),
            ("window_stride", self.window_stride),
            ("folds", self.folds),
            ("mlp_max_epochs", self.mlp_max_epochs),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(CliError::Usage(format!("{k} must be positive")));
        }
        if self.l_c1_days % self.l_c2_days != 0 {
            return Err(CliError::Usage(format!(
                "l_c1_days ({}) must be a multiple of l_c2_days ({})",
                self.l_c1_days, self.l_c2_days
            )));
        }
        if self.fc.len() != 3 {
            return Err(CliError::Usage(format!("fc needs 3 widths, got {}", self.fc.len())));
        }
        self.architecture()?;
        self.method()?;
        Ok(())
    }

    pub fn architecture(&self) -> Result<Architecture, CliError> {
        self.arch.parse().map_err(|_| CliError::Usage(format!("unknown architecture `{}`", self.arch)))
    }

    pub fn method(&self) -> Result<BlendMethod, CliError> {
        self.blender
            .parse()
            .map_err(|_| CliError::Usage(format!("unknown blender `{}`", self.blender)))
    }

    pub fn plan(&self) -> PlanConfig {
        PlanConfig {
            start_day: self.start_day,
            stage1_days: self.stage1_days,
            val_days: self.val_days,
            stage2_days: self.stage2_days,
            test_days: self.test_days,
            l_c1_days: self.l_c1_days,
            l_c2_days: self.l_c2_days,
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            alpha: self.alpha,
            beta: self.beta,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            learning_rate: self.learning_rate,
            seed: self.seed,
            window_stride: self.window_stride,
        }
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            history: self.history,
            lstm_hidden: self.lstm_hidden,
            conv1_kernels: self.conv1_kernels,
            conv2_kernels: self.conv2_kernels,
            fc: [self.fc[0], self.fc[1], self.fc[2]],
        }
    }

    pub fn pipeline(&self, threads: usize) -> PipelineConfig {
        PipelineConfig {
            horizon: self.horizon,
            history: self.history,
            train: self.train(),
            dims: self.dims(),
            grid: GridConfig {
                folds: self.folds,
                svr_epsilon: self.svr_epsilon,
                gpr_length_scale: self.gpr_length_scale,
                mlp: MlpConfig {
                    max_epochs: self.mlp_max_epochs,
                    ..MlpConfig::default()
                },
            },
            grid_values: (!self.grid.is_empty()).then(|| self.grid.clone()),
            threads,
        }
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            plan: self.plan(),
            seasons: quarter_seasons(self.seasons),
            seeds: self.seeds.clone(),
            pipeline: self.pipeline(1),
            threads: self.threads,
            scenario_threshold: self.scenario_threshold,
            scenario_search_days: self.scenario_search_days,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips() {
        let mut c = RunConfig::default();
        c.seeds = vec![4, 5];
        c.grid = vec![0.5, 2.0];
        c.data = vec!["a.csv".into()];
        assert_eq!(parse_config(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn flat_keys_and_duplicates() {
        let c = parse_config("seed = 3\n[plan]\ntest_days = 20\n").unwrap();
        assert_eq!((c.seed, c.test_days), (3, 20));
        assert!(parse_config("[a]\nseed = 1\n[b]\nseed = 2\n").unwrap_err().contains("twice"));
        assert!(parse_config("[plan]\nbogus = 1\n").is_err());
    }
}
