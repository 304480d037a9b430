use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::{abs_diff_stats, mae, paired_ttest, persistence_forecast, rmse, EvalError, TTestResult};
use crate::data::{format_timestamp, WindSeries, STEPS_PER_DAY};
use crate::ensemble::{default_grid, grid_search, BlendDataset, BlendMethod, Blender};
use crate::models::Architecture;
use crate::pipeline::{
    cycle_forecasts, make_plan, run_backtest_methods, run_stage1_only, BacktestRecord, PipelineConfig, PlanConfig,
};

/// A seasonal test epoch: the plan is shifted to start on `start_day`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Season {
    pub name: String,
    pub start_day: usize,
}

/// `count` epochs a quarter-year (91 days) apart, named `q1`, `q2`, ...
pub fn quarter_seasons(count: usize) -> Vec<Season> {
    (0..count)
        .map(|k| Season {
            name: format!("q{}", k + 1),
            start_day: 91 * k,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Window lengths; `start_day` is replaced by each season's.
    pub plan: PlanConfig,
    pub seasons: Vec<Season>,
    pub seeds: Vec<u64>,
    pub pipeline: PipelineConfig,
    /// Cases run in parallel.
    pub threads: usize,
    /// Extrapolation scenario cap in MW.
    pub scenario_threshold: f64,
    /// Days searched after the first stage-2 window for a scenario day.
    pub scenario_search_days: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            plan: PlanConfig::default(),
            seasons: quarter_seasons(4),
            seeds: vec![0, 1, 2],
            pipeline: PipelineConfig::default(),
            threads: 1,
            scenario_threshold: 38.0,
            scenario_search_days: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRow {
    pub farm: String,
    pub season: String,
    pub method: String,
    pub rmse: f64,
    pub mae: f64,
    pub n: usize,
}

/// Rows keyed by (farm, season, method); seeds are pooled within a row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AccuracyTable {
    pub rows: Vec<AccuracyRow>,
}

impl AccuracyTable {
    pub fn get(&self, farm: &str, season: &str, method: &str) -> Option<&AccuracyRow> {
        self.rows
            .iter()
            .find(|r| r.farm == farm && r.season == season && r.method == method)
    }

    pub fn methods(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.method) {
                out.push(r.method.clone());
            }
        }
        out
    }

    pub fn cases(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        for r in &self.rows {
            let k = (r.farm.clone(), r.season.clone());
            if !out.contains(&k) {
                out.push(k);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbsDiffRow {
    pub farm: String,
    pub season: String,
    pub method: String,
    pub mean: f64,
    pub variance: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TTestRow {
    pub a: String,
    pub b: String,
    /// Paired samples: one RMSE per (farm, season, seed) run.
    pub n: usize,
    pub result: TTestResult,
}

/// One plotted value: `method` is `REAL` for observations.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotPoint {
    pub farm: String,
    pub season: String,
    pub seed: u64,
    pub day_index: usize,
    pub timestamp: String,
    pub method: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment1Output {
    pub accuracy: AccuracyTable,
    pub absdiff: Vec<AbsDiffRow>,
    pub ttests: Vec<TTestRow>,
    pub points: Vec<PlotPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRow {
    pub method: String,
    pub rmse_out: f64,
    pub mae_out: f64,
    pub rmse_day: f64,
}

/// Stage-2 fit restricted to targets `<= threshold`, tested on a day that
/// exceeds it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub farm: String,
    pub threshold: f64,
    pub day_start: String,
    pub max_stage2_target: f64,
    pub max_test_target: f64,
    pub stage2: BlendDataset,
    pub test_features: Vec<Vec<f64>>,
    pub test_targets: Vec<f64>,
    pub test_timestamps: Vec<String>,
    pub stage2_timestamps: Vec<String>,
    pub blenders: Vec<Blender>,
    pub predictions: Vec<Vec<f64>>,
    pub rows: Vec<ScenarioRow>,
}

impl ScenarioReport {
    pub fn row(&self, method: &str) -> Option<&ScenarioRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn blender(&self, method: BlendMethod) -> Option<&Blender> {
        self.blenders.iter().find(|b| b.method() == method)
    }

    /// Indices of test points above the threshold.
    pub fn out_of_range(&self) -> Vec<usize> {
        (0..self.test_targets.len())
            .filter(|&i| self.test_targets[i] > self.threshold)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment2Output {
    pub accuracy: AccuracyTable,
    pub points: Vec<PlotPoint>,
    pub scenarios: Vec<ScenarioReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment3Output {
    /// TSF and persistence.
    pub accuracy: AccuracyTable,
    /// The four stage-1 networks of the same runs.
    pub stage1: AccuracyTable,
    /// Pooled over every case and seed; farm and season are `all`.
    pub pooled: Vec<AbsDiffRow>,
    pub points: Vec<PlotPoint>,
}

pub const REAL: &str = "REAL";
pub const TSF: &str = "TSF";
pub const PERSISTENCE: &str = "P";

pub fn arch_name(a: Architecture) -> String {
    a.tag().to_uppercase()
}

pub fn method_name(m: BlendMethod) -> String {
    m.tag().to_uppercase()
}

/// Forecasts of one (farm, season, seed) run, aligned on `origins`.
struct CaseRun {
    farm: String,
    season: String,
    seed: u64,
    day_index: Vec<usize>,
    timestamps: Vec<String>,
    y: Vec<f64>,
    methods: Vec<(String, Vec<f64>)>,
}

fn check_inputs(series: &[WindSeries], cfg: &ExperimentConfig) -> Result<(), EvalError> {
    if series.len() < 2 || cfg.seasons.len() < 2 {
        return Err(EvalError::Config(format!(
            "need at least 2 farms and 2 seasons, got {} and {}",
            series.len(),
            cfg.seasons.len()
        )));
    }
    if cfg.seeds.is_empty() {
        return Err(EvalError::Config("no seeds".into()));
    }
    Ok(())
}

/// Runs `job` over every (farm, season, seed), `threads` at a time; results
/// come back in case order whatever the scheduling.
fn for_cases<F>(series: &[WindSeries], cfg: &ExperimentConfig, job: F) -> Result<Vec<CaseRun>, EvalError>
where
    F: Fn(&WindSeries, &Season, u64) -> Result<CaseRun, EvalError> + Sync,
{
    let mut keys = Vec::new();
    for s in series {
        for season in &cfg.seasons {
            for &seed in &cfg.seeds {
                keys.push((s, season, seed));
            }
        }
    }
    let threads = cfg.threads.clamp(1, keys.len());
    if threads == 1 {
        return keys.iter().map(|&(s, season, seed)| job(s, season, seed)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<CaseRun, EvalError>>>> = Mutex::new((0..keys.len()).map(|_| None).collect());
    std::thread::scope(|sc| {
        for _ in 0..threads {
            sc.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(s, season, seed)) = keys.get(i) else { break };
                let r = job(s, season, seed);
                slots.lock().expect("slot lock")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("slot lock")
        .into_iter()
        .map(|r| r.expect("every case ran"))
        .collect()
}

fn season_plan(series: &WindSeries, cfg: &ExperimentConfig, season: &Season) -> Result<crate::pipeline::BacktestPlan, EvalError> {
    let pc = PlanConfig {
        start_day: season.start_day,
        ..cfg.plan.clone()
    };
    Ok(make_plan(series.len(), &pc)?)
}

fn case_frame(series: &WindSeries, season: &Season, seed: u64, records: &[BacktestRecord]) -> CaseRun {
    let mut c = CaseRun {
        farm: series.farm_id.clone(),
        season: season.name.clone(),
        seed,
        day_index: Vec::new(),
        timestamps: Vec::new(),
        y: Vec::new(),
        methods: Vec::new(),
    };
    for r in records {
        for (&o, &y) in r.origins.iter().zip(&r.y_real) {
            c.day_index.push(r.day_index);
            c.timestamps.push(format_timestamp(&series.timestamps[o]));
            c.y.push(y);
        }
    }
    c
}

fn concat<F: Fn(&BacktestRecord) -> &[f64]>(records: &[BacktestRecord], f: F) -> Vec<f64> {
    records.iter().flat_map(|r| f(r).iter().copied()).collect()
}

fn stage1_columns(records: &[BacktestRecord]) -> Vec<(String, Vec<f64>)> {
    Architecture::ALL
        .iter()
        .enumerate()
        .map(|(k, &a)| (arch_name(a), concat(records, |r| &r.stage1[k])))
        .collect()
}

fn plot_points(runs: &[CaseRun]) -> Vec<PlotPoint> {
    let mut out = Vec::new();
    for c in runs {
        let cols = std::iter::once((REAL.to_string(), &c.y)).chain(c.methods.iter().map(|(m, v)| (m.clone(), v)));
        for (m, v) in cols {
            for i in 0..v.len() {
                out.push(PlotPoint {
                    farm: c.farm.clone(),
                    season: c.season.clone(),
                    seed: c.seed,
                    day_index: c.day_index[i],
                    timestamp: c.timestamps[i].clone(),
                    method: m.clone(),
                    value: v[i],
                });
            }
        }
    }
    out
}

/// Concatenated (y, ŷ) per (farm, season, method), seeds pooled, in first-seen order.
fn pooled_by_case(runs: &[CaseRun]) -> Vec<((String, String, String), (Vec<f64>, Vec<f64>))> {
    let mut order = Vec::new();
    let mut acc: BTreeMap<(String, String, String), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for c in runs {
        for (m, v) in &c.methods {
            let key = (c.farm.clone(), c.season.clone(), m.clone());
            let e = acc.entry(key.clone()).or_insert_with(|| {
                order.push(key);
                (Vec::new(), Vec::new())
            });
            e.0.extend_from_slice(&c.y);
            e.1.extend_from_slice(v);
        }
    }
    order
        .into_iter()
        .map(|k| {
            let v = acc.remove(&k).expect("key recorded");
            (k, v)
        })
        .collect()
}

fn accuracy(runs: &[CaseRun], keep: impl Fn(&str) -> bool) -> Result<AccuracyTable, EvalError> {
    let mut rows = Vec::new();
    for ((farm, season, method), (y, yhat)) in pooled_by_case(runs) {
        if !keep(&method) {
            continue;
        }
        rows.push(AccuracyRow {
            rmse: rmse(&y, &yhat)?,
            mae: mae(&y, &yhat)?,
            n: y.len(),
            farm,
            season,
            method,
        });
    }
    Ok(AccuracyTable { rows })
}

fn run_rmse(c: &CaseRun, method: &str) -> Result<f64, EvalError> {
    let v = &c.methods.iter().find(|(m, _)| m == method).expect("method present").1;
    rmse(&c.y, v)
}

/// Stage-1-only backtests: accuracy of each architecture, absolute-error
/// variances and the six pooled pairwise t-tests.
pub fn run_experiment1(series: &[WindSeries], cfg: &ExperimentConfig) -> Result<Experiment1Output, EvalError> {
    check_inputs(series, cfg)?;
    let runs = for_cases(series, cfg, |s, season, seed| {
        let plan = season_plan(s, cfg, season)?;
        let recs = run_stage1_only(s, &plan, seed, &cfg.pipeline)?;
        let mut c = case_frame(s, season, seed, &recs);
        c.methods = stage1_columns(&recs);
        Ok(c)
    })?;
    let accuracy = accuracy(&runs, |_| true)?;
    let mut absdiff = Vec::new();
    for ((farm, season, method), (y, yhat)) in pooled_by_case(&runs) {
        let (mean, variance) = abs_diff_stats(&y, &yhat)?;
        absdiff.push(AbsDiffRow {
            farm,
            season,
            method,
            mean,
            variance,
            n: y.len(),
        });
    }
    let names: Vec<String> = Architecture::ALL.iter().map(|&a| arch_name(a)).collect();
    let mut ttests = Vec::new();
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            let a = runs.iter().map(|c| run_rmse(c, &names[i])).collect::<Result<Vec<_>, _>>()?;
            let b = runs.iter().map(|c| run_rmse(c, &names[j])).collect::<Result<Vec<_>, _>>()?;
            ttests.push(TTestRow {
                a: names[i].clone(),
                b: names[j].clone(),
                n: a.len(),
                result: paired_ttest(&a, &b)?,
            });
        }
    }
    Ok(Experiment1Output {
        accuracy,
        absdiff,
        ttests,
        points: plot_points(&runs),
    })
}

pub const EXPERIMENT2_METHODS: [BlendMethod; 4] = [BlendMethod::Rr, BlendMethod::Svr, BlendMethod::Ann, BlendMethod::Gpr];

/// Two-stage backtests with every blender against SIMO, plus one
/// extrapolation scenario per farm.
pub fn run_experiment2(series: &[WindSeries], cfg: &ExperimentConfig) -> Result<Experiment2Output, EvalError> {
    check_inputs(series, cfg)?;
    let runs = for_cases(series, cfg, |s, season, seed| {
        let plan = season_plan(s, cfg, season)?;
        let per_method = run_backtest_methods(s, &plan, &EXPERIMENT2_METHODS, seed, &cfg.pipeline)?;
        let mut c = case_frame(s, season, seed, &per_method[0]);
        let simo = Architecture::ALL.iter().position(|&a| a == Architecture::Simo).expect("simo");
        c.methods.push((arch_name(Architecture::Simo), concat(&per_method[0], |r| &r.stage1[simo])));
        for (m, recs) in EXPERIMENT2_METHODS.iter().zip(&per_method) {
            c.methods
                .push((method_name(*m), concat(recs, |r| r.blend.as_deref().expect("blended record"))));
        }
        Ok(c)
    })?;
    let mut scenarios = Vec::new();
    for s in series {
        scenarios.push(extrapolation_scenario(s, cfg)?);
    }
    Ok(Experiment2Output {
        accuracy: accuracy(&runs, |_| true)?,
        points: plot_points(&runs),
        scenarios,
    })
}

/// Fits every blender on a stage-2 window whose targets are capped at
/// `cfg.scenario_threshold` and scores them on the following day's points
/// above the cap. Uses the first season and seed; the day is the searched
/// day with the most points above the cap.
pub fn extrapolation_scenario(series: &WindSeries, cfg: &ExperimentConfig) -> Result<ScenarioReport, EvalError> {
    let season = cfg.seasons.first().ok_or_else(|| EvalError::Config("no seasons".into()))?;
    let seed = *cfg.seeds.first().ok_or_else(|| EvalError::Config("no seeds".into()))?;
    let plan = season_plan(series, cfg, season)?;
    let h = cfg.pipeline.horizon;
    let cap = cfg.scenario_threshold;
    let d = STEPS_PER_DAY;
    let first_day = plan.t_e;
    let last_day = (first_day + cfg.scenario_search_days * d).min(series.len() / d * d);
    let day_over = |start: usize| series.power[start..start + d].iter().filter(|&&p| p > cap).count();
    let day = (first_day..last_day)
        .step_by(d)
        .filter(|&t| t + d <= series.len())
        .max_by_key(|&t| (day_over(t), std::cmp::Reverse(t)))
        .filter(|&t| day_over(t) > 0)
        .ok_or_else(|| {
            EvalError::Scenario(format!(
                "{}: no day above {cap} MW within {} days of the test epoch",
                series.farm_id, cfg.scenario_search_days
            ))
        })?;
    let fc = cycle_forecasts(series, &plan, 0, day - plan.stage2_len..day + d, seed, &cfg.pipeline)?;
    let feats = |i: usize| -> Vec<f64> { fc.power.iter().map(|c| c[i]).collect() };
    let (mut s2x, mut s2y, mut s2ts) = (Vec::new(), Vec::new(), Vec::new());
    let (mut tx, mut ty, mut tts) = (Vec::new(), Vec::new(), Vec::new());
    for (i, &t) in fc.targets.iter().enumerate() {
        if t + h <= day && fc.y_real[i] <= cap {
            s2x.push(feats(i));
            s2y.push(fc.y_real[i]);
            s2ts.push(format_timestamp(&series.timestamps[t]));
        } else if t >= day {
            tx.push(feats(i));
            ty.push(fc.y_real[i]);
            tts.push(format_timestamp(&series.timestamps[t]));
        }
    }
    let max_stage2_target = s2y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_test_target = ty.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max_stage2_target <= cap && max_test_target > cap) {
        return Err(EvalError::Scenario(format!(
            "construction failed: stage-2 max {max_stage2_target}, test max {max_test_target}, cap {cap}"
        )));
    }
    let stage2 = BlendDataset::new(s2x, s2y)?;
    let out: Vec<usize> = (0..ty.len()).filter(|&i| ty[i] > cap).collect();
    let y_out: Vec<f64> = out.iter().map(|&i| ty[i]).collect();
    let (mut blenders, mut predictions, mut rows) = (Vec::new(), Vec::new(), Vec::new());
    for m in EXPERIMENT2_METHODS {
        let grid = cfg.pipeline.grid_values.clone().unwrap_or_else(|| default_grid(m));
        let b = grid_search(m, &stage2, &grid, &cfg.pipeline.grid)?;
        let p = b.predict(&tx)?;
        let p_out: Vec<f64> = out.iter().map(|&i| p[i]).collect();
        rows.push(ScenarioRow {
            method: method_name(m),
            rmse_out: rmse(&y_out, &p_out)?,
            mae_out: mae(&y_out, &p_out)?,
            rmse_day: rmse(&ty, &p)?,
        });
        blenders.push(b);
        predictions.push(p);
    }
    Ok(ScenarioReport {
        farm: series.farm_id.clone(),
        threshold: cap,
        day_start: format_timestamp(&series.timestamps[day]),
        max_stage2_target,
        max_test_target,
        stage2,
        test_features: tx,
        test_targets: ty,
        test_timestamps: tts,
        stage2_timestamps: s2ts,
        blenders,
        predictions,
        rows,
    })
}

/// The full pipeline with the ridge blender against persistence on the
/// same origins.
pub fn run_experiment3(series: &[WindSeries], cfg: &ExperimentConfig) -> Result<Experiment3Output, EvalError> {
    check_inputs(series, cfg)?;
    let runs = for_cases(series, cfg, |s, season, seed| {
        let plan = season_plan(s, cfg, season)?;
        let recs = run_backtest_methods(s, &plan, &[BlendMethod::Rr], seed, &cfg.pipeline)?.remove(0);
        let mut c = case_frame(s, season, seed, &recs);
        let origins = concat_idx(&recs);
        c.methods.push((TSF.into(), concat(&recs, |r| r.blend.as_deref().expect("blended record"))));
        c.methods.push((
            PERSISTENCE.into(),
            persistence_forecast(&s.power, &origins, cfg.pipeline.horizon)?,
        ));
        c.methods.extend(stage1_columns(&recs));
        Ok(c)
    })?;
    let main = |m: &str| m == TSF || m == PERSISTENCE;
    let mut pooled = Vec::new();
    for m in [TSF, PERSISTENCE] {
        let (mut y, mut yhat) = (Vec::new(), Vec::new());
        for c in &runs {
            y.extend_from_slice(&c.y);
            yhat.extend_from_slice(&c.methods.iter().find(|(k, _)| k == m).expect("method present").1);
        }
        let (mean, variance) = abs_diff_stats(&y, &yhat)?;
        pooled.push(AbsDiffRow {
            farm: "all".into(),
            season: "all".into(),
            method: m.into(),
            mean,
            variance,
            n: y.len(),
        });
    }
    Ok(Experiment3Output {
        accuracy: accuracy(&runs, main)?,
        stage1: accuracy(&runs, |m| !main(m))?,
        pooled,
        points: plot_points(&runs),
    })
}

fn concat_idx(records: &[BacktestRecord]) -> Vec<usize> {
    records.iter().flat_map(|r| r.origins.iter().copied()).collect()
}

/// Pooled RMSE of `method` over every row's error vector, weighting rows by `n`.
pub fn pooled_rmse(table: &AccuracyTable, method: &str) -> Option<f64> {
    let rows: Vec<&AccuracyRow> = table.rows.iter().filter(|r| r.method == method).collect();
    if rows.is_empty() {
        return None;
    }
    let n: usize = rows.iter().map(|r| r.n).sum();
    let se: f64 = rows.iter().map(|r| r.rmse * r.rmse * r.n as f64).sum();
    Some((se / n as f64).sqrt())
}
