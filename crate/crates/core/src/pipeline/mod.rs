//! Dual moving-window backtest: stage-1 networks retrained every `l_c1`,
//! the stage-2 blender refitted every `l_c2` on the most recent days.

mod output;
mod plan;

use std::collections::HashMap;
use std::ops::Range;

pub use output::{write_manifest, write_records_csv, RECORDS_HEADER};
pub use plan::{make_plan, BacktestPlan, CyclePlan, DayPlan, PlanConfig};

use crate::data::{apply_norm, build_windows, fit_norm, DataError, WindSeries, WindowSet};
use crate::ensemble::{default_grid, grid_search, BlendDataset, BlendMethod, EnsembleError, GridConfig};
use crate::models::{
    build_model_with_dims, predict, train_stage1, Architecture, ModelDims, ModelError, Stage1Model, TrainConfig,
};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("series too short: need {required} steps, have {available}")]
    TooShort { required: usize, available: usize },
    #[error("plan: {0}")]
    Plan(String),
    #[error("data: {0}")]
    Data(#[from] DataError),
    #[error("stage 1: {0}")]
    Model(#[from] ModelError),
    #[error("stage 2: {0}")]
    Ensemble(#[from] EnsembleError),
    #[error("cycle {cycle}: {source}")]
    InCycle {
        cycle: usize,
        #[source]
        source: Box<PipelineError>,
    },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub horizon: usize,
    pub history: usize,
    pub train: TrainConfig,
    pub dims: ModelDims,
    pub grid: GridConfig,
    /// Overrides the default search grid of the chosen blender.
    pub grid_values: Option<Vec<f64>>,
    /// Parallel stage-1 trainings per cycle.
    pub threads: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            horizon: crate::data::DEFAULT_HORIZON,
            history: crate::data::DEFAULT_HISTORY,
            train: TrainConfig::default(),
            dims: ModelDims::default(),
            grid: GridConfig::default(),
            grid_values: None,
            threads: 1,
        }
    }
}

/// Index sets behind one forecast day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordWindows {
    pub s_t1: Range<usize>,
    pub s_v1: Range<usize>,
    /// Validation targets actually scored (observable before the period).
    pub val_used: Range<usize>,
    pub s_t2: Range<usize>,
    /// Stage-2 targets actually fitted (observable at the day's first origin).
    pub stage2_used: Range<usize>,
    pub test: Range<usize>,
}

/// Forecasts for one test day. Stage-1 columns follow [`Architecture::ALL`].
#[derive(Debug, Clone, PartialEq)]
pub struct BacktestRecord {
    pub cycle: usize,
    pub day_index: usize,
    pub targets: Vec<usize>,
    pub origins: Vec<usize>,
    pub y_real: Vec<f64>,
    pub stage1: [Vec<f64>; 4],
    pub blend: Option<Vec<f64>>,
    pub method: Option<BlendMethod>,
    pub hyper: Option<f64>,
    pub cv_score: Option<f64>,
    pub windows: RecordWindows,
    /// Stage-1 training seeds, in [`Architecture::ALL`] order.
    pub seeds: [u64; 4],
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Independent stream per (run seed, cycle, architecture).
pub fn stage1_seed(seed: u64, cycle: usize, arch: Architecture) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ cycle as u64) ^ u64::from(arch.code()))
}

fn in_cycle(cycle: usize) -> impl Fn(PipelineError) -> PipelineError {
    move |e| PipelineError::InCycle {
        cycle,
        source: Box::new(e),
    }
}

fn train_all(
    train: &WindowSet,
    val: &WindowSet,
    seeds: [u64; 4],
    cfg: &PipelineConfig,
) -> Result<Vec<Stage1Model>, PipelineError> {
    let job = |k: usize| -> Result<Stage1Model, PipelineError> {
        let arch = Architecture::ALL[k];
        let model = build_model_with_dims(arch, seeds[k], train.stats.clone(), cfg.dims)?;
        let tc = TrainConfig {
            seed: splitmix(seeds[k]),
            ..cfg.train.clone()
        };
        Ok(train_stage1(&model, train, val, &tc)?)
    };
    if cfg.threads <= 1 {
        return (0..4).map(job).collect();
    }
    let threads = cfg.threads.min(4);
    let ks: Vec<usize> = (0..4).collect();
    let mut slots: Vec<Option<Result<Stage1Model, PipelineError>>> = (0..4).map(|_| None).collect();
    std::thread::scope(|s| {
        let job = &job;
        let handles: Vec<_> = ks
            .chunks(4usize.div_ceil(threads))
            .map(|chunk| s.spawn(move || chunk.iter().map(|&k| (k, job(k))).collect::<Vec<_>>()))
            .collect();
        for handle in handles {
            for (k, r) in handle.join().expect("training thread panicked") {
                slots[k] = Some(r);
            }
        }
    });
    slots.into_iter().map(|r| r.expect("every architecture trained")).collect()
}

/// Stage-1 forecasts for every target in `span`, keyed by target index.
struct Stage1Table {
    windows: WindowSet,
    row_of: HashMap<usize, usize>,
    power: [Vec<f64>; 4],
}

impl Stage1Table {
    fn build(
        models: &[Stage1Model],
        norm: &crate::data::NormalizedSeries,
        span: Range<usize>,
        cfg: &PipelineConfig,
    ) -> Result<Self, PipelineError> {
        let windows = build_windows(norm, span, cfg.horizon, cfg.history)?;
        let row_of = windows
            .target_indices()
            .into_iter()
            .enumerate()
            .map(|(r, t)| (t, r))
            .collect();
        let mut power: [Vec<f64>; 4] = Default::default();
        for (slot, m) in power.iter_mut().zip(models) {
            *slot = predict(m, &windows)?.power;
        }
        Ok(Self {
            windows,
            row_of,
            power,
        })
    }

    fn rows(&self, targets: Range<usize>) -> Vec<usize> {
        targets.filter_map(|t| self.row_of.get(&t).copied()).collect()
    }

    fn features(&self, rows: &[usize]) -> Vec<Vec<f64>> {
        rows.iter().map(|&r| self.power.iter().map(|p| p[r]).collect()).collect()
    }
}

fn check_plan(series: &WindSeries, plan: &BacktestPlan) -> Result<(), PipelineError> {
    if plan.series_len != series.len() {
        return Err(PipelineError::Plan(format!(
            "plan built for {} steps, series has {}",
            plan.series_len,
            series.len()
        )));
    }
    Ok(())
}

struct TrainedCycle {
    models: Vec<Stage1Model>,
    norm: crate::data::NormalizedSeries,
    val_used: Range<usize>,
    seeds: [u64; 4],
}

fn train_cycle(
    series: &WindSeries,
    cycle: &CyclePlan,
    seed: u64,
    cfg: &PipelineConfig,
) -> Result<TrainedCycle, PipelineError> {
    let h = cfg.horizon;
    let first_day = cycle.days[0].test.start;
    let stats = fit_norm(series, cycle.s_t1.clone())?;
    let norm = apply_norm(series, &stats);
    let train = build_windows(&norm, cycle.s_t1.clone(), h, cfg.history)?;
    // Validation targets must be observed by the period's first origin.
    let val_used = cycle.s_v1.start..cycle.s_v1.end.min(first_day + 1 - h);
    let val = build_windows(&norm, val_used.clone(), h, cfg.history)?;
    let seeds = Architecture::ALL.map(|a| stage1_seed(seed, cycle.index, a));
    let models = train_all(&train, &val, seeds, cfg)?;
    Ok(TrainedCycle {
        models,
        norm,
        val_used,
        seeds,
    })
}

fn run(
    series: &WindSeries,
    plan: &BacktestPlan,
    methods: &[Option<BlendMethod>],
    seed: u64,
    cfg: &PipelineConfig,
) -> Result<Vec<Vec<BacktestRecord>>, PipelineError> {
    check_plan(series, plan)?;
    let h = cfg.horizon;
    let mut out: Vec<Vec<BacktestRecord>> = vec![Vec::new(); methods.len()];
    for cycle in plan.cycles() {
        let wrap = in_cycle(cycle.index);
        let trained = train_cycle(series, &cycle, seed, cfg).map_err(&wrap)?;
        let span = cycle.days[0].s_t2.start..cycle.days.last().expect("non-empty cycle").test.end;
        let table = Stage1Table::build(&trained.models, &trained.norm, span, cfg).map_err(&wrap)?;

        for day in &cycle.days {
            let test_rows = table.rows(day.test.clone());
            let stage2_used = day.s_t2.start..day.s_t2.end.min(day.test.start + 1 - h);
            let targets: Vec<usize> = test_rows
                .iter()
                .map(|&r| table.windows.windows[r].origin + h)
                .collect();
            let stage1: [Vec<f64>; 4] =
                std::array::from_fn(|k| test_rows.iter().map(|&r| table.power[k][r]).collect());
            let fit_rows = table.rows(stage2_used.clone());
            for (slot, &method) in out.iter_mut().zip(methods) {
                let (blend, hyper, cv) = match method {
                    None => (None, None, None),
                    Some(m) => {
                        let data = BlendDataset::new(
                            table.features(&fit_rows),
                            fit_rows.iter().map(|&r| table.windows.windows[r].target_power).collect(),
                        )
                        .map_err(|e| wrap(e.into()))?;
                        let grid = cfg.grid_values.clone().unwrap_or_else(|| default_grid(m));
                        let blender = grid_search(m, &data, &grid, &cfg.grid).map_err(|e| wrap(e.into()))?;
                        let pred = if test_rows.is_empty() {
                            Vec::new()
                        } else {
                            blender.predict(&table.features(&test_rows)).map_err(|e| wrap(e.into()))?
                        };
                        (Some(pred), Some(blender.hyper), Some(blender.cv_score))
                    }
                };
                slot.push(BacktestRecord {
                    cycle: cycle.index,
                    day_index: day.day_index,
                    origins: targets.iter().map(|t| t - h).collect(),
                    y_real: targets.iter().map(|&t| series.power[t]).collect(),
                    targets: targets.clone(),
                    stage1: stage1.clone(),
                    blend,
                    method,
                    hyper,
                    cv_score: cv,
                    windows: RecordWindows {
                        s_t1: cycle.s_t1.clone(),
                        s_v1: cycle.s_v1.clone(),
                        val_used: trained.val_used.clone(),
                        s_t2: day.s_t2.clone(),
                        stage2_used: stage2_used.clone(),
                        test: day.test.clone(),
                    },
                    seeds: trained.seeds,
                });
            }
        }
    }
    Ok(out)
}

/// Stage-1 forecasts of one cycle's models over an arbitrary target span.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanForecasts {
    pub targets: Vec<usize>,
    pub y_real: Vec<f64>,
    /// Columns follow [`Architecture::ALL`].
    pub power: [Vec<f64>; 4],
}

/// Trains the models of cycle `cycle` and forecasts every target in `span`.
/// `span` must lie after the cycle's validation window for the forecasts
/// to be out of sample.
pub fn cycle_forecasts(
    series: &WindSeries,
    plan: &BacktestPlan,
    cycle: usize,
    span: Range<usize>,
    seed: u64,
    cfg: &PipelineConfig,
) -> Result<SpanForecasts, PipelineError> {
    check_plan(series, plan)?;
    let cycles = plan.cycles();
    let c = cycles
        .get(cycle)
        .ok_or_else(|| PipelineError::Plan(format!("cycle {cycle} out of range ({} cycles)", cycles.len())))?;
    let wrap = in_cycle(cycle);
    let trained = train_cycle(series, c, seed, cfg).map_err(&wrap)?;
    let table = Stage1Table::build(&trained.models, &trained.norm, span, cfg).map_err(&wrap)?;
    let targets: Vec<usize> = table.windows.windows.iter().map(|w| w.origin + cfg.horizon).collect();
    Ok(SpanForecasts {
        y_real: table.windows.target_power(),
        targets,
        power: table.power,
    })
}

/// Full two-stage backtest with the given blender.
pub fn run_backtest(
    series: &WindSeries,
    plan: &BacktestPlan,
    method: BlendMethod,
    seed: u64,
    cfg: &PipelineConfig,
) -> Result<Vec<BacktestRecord>, PipelineError> {
    Ok(run(series, plan, &[Some(method)], seed, cfg)?.remove(0))
}

/// One stage-1 training per cycle shared by several blenders; the outer
/// vector follows `methods`.
pub fn run_backtest_methods(
    series: &WindSeries,
    plan: &BacktestPlan,
    methods: &[BlendMethod],
    seed: u64,
    cfg: &PipelineConfig,
) -> Result<Vec<Vec<BacktestRecord>>, PipelineError> {
    let m: Vec<Option<BlendMethod>> = methods.iter().copied().map(Some).collect();
    run(series, plan, &m, seed, cfg)
}

/// Stage-1 models only: no blender and no Moving Window 2.
pub fn run_stage1_only(
    series: &WindSeries,
    plan: &BacktestPlan,
    seed: u64,
    cfg: &PipelineConfig,
) -> Result<Vec<BacktestRecord>, PipelineError> {
    Ok(run(series, plan, &[None], seed, cfg)?.remove(0))
}
