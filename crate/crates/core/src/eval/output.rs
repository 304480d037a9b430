use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::experiments::{
    AbsDiffRow, AccuracyTable, Experiment1Output, Experiment2Output, Experiment3Output, PlotPoint, ScenarioReport,
    TTestRow, REAL,
};
use super::EvalError;

pub const RESULTS_CSV: &str = "results.csv";
pub const STAGE1_RESULTS_CSV: &str = "results_stage1.csv";
pub const TTESTS_CSV: &str = "ttests.csv";
pub const ABSDIFF_CSV: &str = "absdiff.csv";
pub const POINTS_CSV: &str = "plot_points.csv";
pub const SCENARIO_CSV: &str = "scenario.csv";
pub const SCENARIO_POINTS_CSV: &str = "plot_scenario.csv";

pub const RESULTS_HEADER: [&str; 7] = ["experiment", "farm", "season", "method", "rmse", "mae", "n"];
pub const TTESTS_HEADER: [&str; 8] = ["pair", "t", "p", "dof", "ci_low", "ci_high", "mean_diff", "n"];
pub const ABSDIFF_HEADER: [&str; 6] = ["farm", "season", "method", "mean", "variance", "n"];
pub const POINTS_HEADER: [&str; 7] = ["farm", "season", "seed", "day_index", "timestamp", "method", "value"];
pub const SCENARIO_HEADER: [&str; 10] = [
    "farm",
    "method",
    "rmse_out",
    "mae_out",
    "rmse_day",
    "threshold",
    "max_stage2_target",
    "max_test_target",
    "n_stage2",
    "n_out",
];
pub const SCENARIO_POINTS_HEADER: [&str; 5] = ["farm", "set", "timestamp", "method", "value"];

type Csv<W> = csv::Writer<W>;

fn csv_err(e: csv::Error) -> EvalError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => EvalError::Io(io),
        other => EvalError::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn writer<W: Write>(out: W, header: &[&str]) -> Result<Csv<W>, EvalError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    Ok(w)
}

fn done<W: Write>(mut w: Csv<W>) -> Result<(), EvalError> {
    w.flush()?;
    Ok(())
}

pub fn write_accuracy_csv<W: Write>(table: &AccuracyTable, experiment: &str, out: W) -> Result<(), EvalError> {
    let mut w = writer(out, &RESULTS_HEADER)?;
    for r in &table.rows {
        w.write_record([
            experiment,
            &r.farm,
            &r.season,
            &r.method,
            &r.rmse.to_string(),
            &r.mae.to_string(),
            &r.n.to_string(),
        ])
        .map_err(csv_err)?;
    }
    done(w)
}

pub fn write_ttests_csv<W: Write>(rows: &[TTestRow], out: W) -> Result<(), EvalError> {
    let mut w = writer(out, &TTESTS_HEADER)?;
    for r in rows {
        let t = &r.result;
        w.write_record([
            format!("{}-{}", r.a, r.b),
            t.t_stat.to_string(),
            t.p_value.to_string(),
            t.dof.to_string(),
            t.ci_low.to_string(),
            t.ci_high.to_string(),
            t.mean_diff.to_string(),
            r.n.to_string(),
        ])
        .map_err(csv_err)?;
    }
    done(w)
}

pub fn write_absdiff_csv<W: Write>(rows: &[AbsDiffRow], out: W) -> Result<(), EvalError> {
    let mut w = writer(out, &ABSDIFF_HEADER)?;
    for r in rows {
        w.write_record([
            r.farm.clone(),
            r.season.clone(),
            r.method.clone(),
            r.mean.to_string(),
            r.variance.to_string(),
            r.n.to_string(),
        ])
        .map_err(csv_err)?;
    }
    done(w)
}

pub fn write_points_csv<W: Write>(points: &[PlotPoint], out: W) -> Result<(), EvalError> {
    let mut w = writer(out, &POINTS_HEADER)?;
    for p in points {
        w.write_record([
            p.farm.clone(),
            p.season.clone(),
            p.seed.to_string(),
            p.day_index.to_string(),
            p.timestamp.clone(),
            p.method.clone(),
            p.value.to_string(),
        ])
        .map_err(csv_err)?;
    }
    done(w)
}

pub fn write_scenario_csv<W: Write>(reports: &[ScenarioReport], out: W) -> Result<(), EvalError> {
    let mut w = writer(out, &SCENARIO_HEADER)?;
    for s in reports {
        let n_out = s.out_of_range().len();
        for r in &s.rows {
            w.write_record([
                s.farm.clone(),
                r.method.clone(),
                r.rmse_out.to_string(),
                r.mae_out.to_string(),
                r.rmse_day.to_string(),
                s.threshold.to_string(),
                s.max_stage2_target.to_string(),
                s.max_test_target.to_string(),
                s.stage2.len().to_string(),
                n_out.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    done(w)
}

/// Stage-2 targets, test targets and every blender's test forecasts.
pub fn write_scenario_points_csv<W: Write>(reports: &[ScenarioReport], out: W) -> Result<(), EvalError> {
    let mut w = writer(out, &SCENARIO_POINTS_HEADER)?;
    for s in reports {
        for (ts, y) in s.stage2_timestamps.iter().zip(&s.stage2.targets) {
            w.write_record([&s.farm, "stage2", ts, REAL, &y.to_string()]).map_err(csv_err)?;
        }
        for (i, ts) in s.test_timestamps.iter().enumerate() {
            w.write_record([&s.farm, "test", ts, REAL, &s.test_targets[i].to_string()])
                .map_err(csv_err)?;
            for (row, p) in s.rows.iter().zip(&s.predictions) {
                w.write_record([&s.farm, "test", ts, &row.method, &p[i].to_string()])
                    .map_err(csv_err)?;
            }
        }
    }
    done(w)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, EvalError> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

impl Experiment1Output {
    pub fn write_dir(&self, dir: &Path) -> Result<(), EvalError> {
        write_accuracy_csv(&self.accuracy, "1", create(dir, RESULTS_CSV)?)?;
        write_ttests_csv(&self.ttests, create(dir, TTESTS_CSV)?)?;
        write_absdiff_csv(&self.absdiff, create(dir, ABSDIFF_CSV)?)?;
        write_points_csv(&self.points, create(dir, POINTS_CSV)?)
    }
}

impl Experiment2Output {
    pub fn write_dir(&self, dir: &Path) -> Result<(), EvalError> {
        write_accuracy_csv(&self.accuracy, "2", create(dir, RESULTS_CSV)?)?;
        write_points_csv(&self.points, create(dir, POINTS_CSV)?)?;
        write_scenario_csv(&self.scenarios, create(dir, SCENARIO_CSV)?)?;
        write_scenario_points_csv(&self.scenarios, create(dir, SCENARIO_POINTS_CSV)?)
    }
}

impl Experiment3Output {
    pub fn write_dir(&self, dir: &Path) -> Result<(), EvalError> {
        write_accuracy_csv(&self.accuracy, "3", create(dir, RESULTS_CSV)?)?;
        write_accuracy_csv(&self.stage1, "3", create(dir, STAGE1_RESULTS_CSV)?)?;
        write_absdiff_csv(&self.pooled, create(dir, ABSDIFF_CSV)?)?;
        write_points_csv(&self.points, create(dir, POINTS_CSV)?)
    }
}
