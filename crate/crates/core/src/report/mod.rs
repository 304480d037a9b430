//! Text/CSV tables and plot-ready CSVs rendered from experiment outputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub use crate::eval::ci95;
use crate::eval::{
    ABSDIFF_CSV, POINTS_CSV, RESULTS_CSV, SCENARIO_CSV, SCENARIO_POINTS_CSV, STAGE1_RESULTS_CSV, TTESTS_CSV,
};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{file}: required file is missing")]
    Missing { file: String },
    #[error("{file}: column `{column}`: {detail}")]
    Schema { file: String, column: String, detail: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Rendered files keyed by path relative to the output directory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportBundle {
    pub files: BTreeMap<String, String>,
}

impl ReportBundle {
    pub fn get(&self, path: &str) -> Option<&str> {
        self.files.get(path).map(String::as_str)
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
        let mut written = Vec::new();
        for (rel, body) in &self.files {
            let p = dir.join(rel);
            if let Some(parent) = p.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&p, body)?;
            written.push(p);
        }
        Ok(written)
    }
}

/// A parsed CSV with named-column access.
struct Table {
    file: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(dir: &Path, name: &str, required: &[&str]) -> Result<Option<Self>, ReportError> {
        let path = dir.join(name);
        if !path.exists() {
            return Ok(None);
        }
        let schema = |column: &str, detail: String| ReportError::Schema {
            file: name.to_string(),
            column: column.to_string(),
            detail,
        };
        let mut rdr = csv::Reader::from_path(&path).map_err(|e| schema("*", e.to_string()))?;
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| schema("*", e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        for c in required {
            if !header.iter().any(|h| h == c) {
                return Err(schema(c, "missing from header".into()));
            }
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| schema("*", format!("row {}: {e}", i + 1)))?;
            if rec.len() != header.len() {
                return Err(schema(
                    "*",
                    format!("row {} has {} fields, header has {}", i + 1, rec.len(), header.len()),
                ));
            }
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(Some(Self {
            file: name.to_string(),
            header,
            rows,
        }))
    }

    fn col(&self, name: &str) -> usize {
        self.header.iter().position(|h| h == name).expect("checked column")
    }

    fn text(&self, row: usize, name: &str) -> &str {
        &self.rows[row][self.col(name)]
    }

    fn num(&self, row: usize, name: &str) -> Result<f64, ReportError> {
        let v = self.text(row, name);
        v.trim().parse::<f64>().map_err(|_| ReportError::Schema {
            file: self.file.clone(),
            column: name.to_string(),
            detail: format!("row {}: `{v}` is not a number", row + 1),
        })
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

/// Indices of every minimal value; NaNs never win.
fn best_of(values: &[f64]) -> Vec<usize> {
    let min = values.iter().copied().filter(|v| !v.is_nan()).fold(f64::INFINITY, f64::min);
    (0..values.len()).filter(|&i| values[i] == min).collect()
}

/// Fixed-width text table; the first `key_cols` columns are left-aligned.
fn render_text(title: &str, header: &[String], rows: &[Vec<String>], key_cols: usize) -> String {
    let mut width: Vec<usize> = header.iter().map(String::len).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: &[String]| -> String {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if i < key_cols {
                    format!("{c:<w$}", w = width[i])
                } else {
                    format!("{c:>w$}", w = width[i])
                }
            })
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    let mut out = format!("{title}\n");
    out.push_str(&line(header));
    out.push('\n');
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * width.len().saturating_sub(1)));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
        out.push('\n');
    }
    out.push_str("* best in row\n");
    out
}

struct AccRow {
    farm: String,
    season: String,
    method: String,
    rmse: f64,
    mae: f64,
    n: f64,
}

fn accuracy_rows(t: &Table) -> Result<Vec<AccRow>, ReportError> {
    (0..t.rows.len())
        .map(|i| {
            Ok(AccRow {
                farm: t.text(i, "farm").to_string(),
                season: t.text(i, "season").to_string(),
                method: t.text(i, "method").to_string(),
                rmse: t.num(i, "rmse")?,
                mae: t.num(i, "mae")?,
                n: t.num(i, "n")?,
            })
        })
        .collect()
}

fn ordered<T: Clone + PartialEq>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out = Vec::new();
    for x in items {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

/// Per-case rows plus an `all/all` row pooled over the raw error counts.
fn accuracy_tables(rows: &[AccRow], name: &str, title: &str, files: &mut BTreeMap<String, String>) {
    let methods = ordered(rows.iter().map(|r| r.method.clone()));
    let mut cases = ordered(rows.iter().map(|r| (r.farm.clone(), r.season.clone())));
    let mut pooled: Vec<AccRow> = Vec::new();
    for m in &methods {
        let rs: Vec<&AccRow> = rows.iter().filter(|r| &r.method == m).collect();
        let n: f64 = rs.iter().map(|r| r.n).sum();
        pooled.push(AccRow {
            farm: "all".into(),
            season: "all".into(),
            method: m.clone(),
            rmse: (rs.iter().map(|r| r.rmse * r.rmse * r.n).sum::<f64>() / n).sqrt(),
            mae: rs.iter().map(|r| r.mae * r.n).sum::<f64>() / n,
            n,
        });
    }
    cases.push(("all".into(), "all".into()));
    let lookup = |farm: &str, season: &str, m: &str| -> Option<&AccRow> {
        rows.iter()
            .chain(&pooled)
            .find(|r| r.farm == farm && r.season == season && r.method == m)
    };
    let mut csv = String::from("farm,season,metric,method,value,best\n");
    let mut text_rows = Vec::new();
    for (farm, season) in &cases {
        for metric in ["RMSE", "MAE"] {
            let vals: Vec<f64> = methods
                .iter()
                .map(|m| {
                    lookup(farm, season, m).map_or(f64::NAN, |r| if metric == "RMSE" { r.rmse } else { r.mae })
                })
                .collect();
            let best = best_of(&vals);
            let mut cells = vec![farm.clone(), season.clone(), metric.to_string()];
            for (k, m) in methods.iter().enumerate() {
                let mark = best.contains(&k);
                if !vals[k].is_nan() {
                    let _ = writeln!(csv, "{farm},{season},{metric},{m},{},{}", vals[k], u8::from(mark));
                }
                cells.push(if vals[k].is_nan() {
                    "-".into()
                } else {
                    format!("{}{}", fmt(vals[k]), if mark { "*" } else { " " })
                });
            }
            text_rows.push(cells);
        }
    }
    let mut header = vec!["farm".to_string(), "season".into(), "metric".into()];
    header.extend(methods.iter().map(|m| format!("{m} ")));
    files.insert(format!("tables/{name}.csv"), csv);
    files.insert(format!("tables/{name}.txt"), render_text(title, &header, &text_rows, 3));
}

/// Student-t 95% interval of each method's per-case accuracies.
fn ci_plot(rows: &[AccRow]) -> String {
    let mut out = String::from("method,metric,mean,ci_low,ci_high,n\n");
    for m in ordered(rows.iter().map(|r| r.method.clone())) {
        for metric in ["RMSE", "MAE"] {
            let v: Vec<f64> = rows
                .iter()
                .filter(|r| r.method == m)
                .map(|r| if metric == "RMSE" { r.rmse } else { r.mae })
                .collect();
            match ci95(&v) {
                Ok((mean, lo, hi)) => {
                    let _ = writeln!(out, "{m},{metric},{mean},{lo},{hi},{}", v.len());
                }
                Err(_) => {
                    let mean = v.iter().sum::<f64>() / v.len() as f64;
                    let _ = writeln!(out, "{m},{metric},{mean},,,{}", v.len());
                }
            }
        }
    }
    out
}

fn ttest_tables(t: &Table, files: &mut BTreeMap<String, String>) -> Result<(), ReportError> {
    let mut csv = String::from("pair,t,p,dof,ci_low,ci_high,significant\n");
    let mut rows = Vec::new();
    for i in 0..t.rows.len() {
        let pair = t.text(i, "pair");
        let (tv, p, dof, lo, hi) = (
            t.num(i, "t")?,
            t.num(i, "p")?,
            t.num(i, "dof")?,
            t.num(i, "ci_low")?,
            t.num(i, "ci_high")?,
        );
        let sig = p < 0.05;
        let _ = writeln!(csv, "{pair},{tv},{p},{dof},{lo},{hi},{}", u8::from(sig));
        rows.push(vec![
            pair.to_string(),
            fmt(tv),
            fmt(p),
            dof.to_string(),
            format!("[{}, {}]", fmt(lo), fmt(hi)),
            if sig { "yes".into() } else { "no".into() },
        ]);
    }
    let header: Vec<String> = ["pair", "t", "p", "dof", "95% CI", "p<0.05"].map(String::from).to_vec();
    files.insert("tables/ttests.csv".into(), csv);
    let mut text = render_text("Paired t-tests on per-run RMSE", &header, &rows, 1);
    text = text.replace("* best in row\n", "");
    files.insert("tables/ttests.txt".into(), text);
    Ok(())
}

fn absdiff_tables(t: &Table, files: &mut BTreeMap<String, String>) -> Result<(), ReportError> {
    let methods = ordered((0..t.rows.len()).map(|i| t.text(i, "method").to_string()));
    let cases = ordered((0..t.rows.len()).map(|i| (t.text(i, "farm").to_string(), t.text(i, "season").to_string())));
    let mut csv = String::from("farm,season,stat,method,value,best\n");
    let mut rows = Vec::new();
    for (farm, season) in &cases {
        for stat in ["mean", "variance"] {
            let mut vals = Vec::new();
            for m in &methods {
                let i = (0..t.rows.len())
                    .find(|&i| t.text(i, "farm") == farm && t.text(i, "season") == season && t.text(i, "method") == m);
                vals.push(match i {
                    Some(i) => t.num(i, stat)?,
                    None => f64::NAN,
                });
            }
            let best = best_of(&vals);
            let mut cells = vec![farm.clone(), season.clone(), stat.to_string()];
            for (k, m) in methods.iter().enumerate() {
                if !vals[k].is_nan() {
                    let _ = writeln!(csv, "{farm},{season},{stat},{m},{},{}", vals[k], u8::from(best.contains(&k)));
                }
                cells.push(if vals[k].is_nan() {
                    "-".into()
                } else {
                    format!("{}{}", fmt(vals[k]), if best.contains(&k) { "*" } else { " " })
                });
            }
            rows.push(cells);
        }
    }
    let mut header = vec!["farm".to_string(), "season".into(), "stat".into()];
    header.extend(methods.iter().map(|m| format!("{m} ")));
    files.insert("tables/absdiff.csv".into(), csv);
    files.insert(
        "tables/absdiff.txt".into(),
        render_text("Absolute difference |y - yhat| (MW, MW^2)", &header, &rows, 3),
    );
    Ok(())
}

fn scenario_tables(t: &Table, files: &mut BTreeMap<String, String>) -> Result<(), ReportError> {
    let methods = ordered((0..t.rows.len()).map(|i| t.text(i, "method").to_string()));
    let farms = ordered((0..t.rows.len()).map(|i| t.text(i, "farm").to_string()));
    let mut csv = String::from("farm,metric,method,value,best\n");
    let mut rows = Vec::new();
    for farm in &farms {
        for metric in ["rmse_out", "mae_out", "rmse_day"] {
            let mut vals = Vec::new();
            for m in &methods {
                let i = (0..t.rows.len()).find(|&i| t.text(i, "farm") == farm && t.text(i, "method") == m);
                vals.push(match i {
                    Some(i) => t.num(i, metric)?,
                    None => f64::NAN,
                });
            }
            let best = best_of(&vals);
            let mut cells = vec![farm.clone(), metric.to_string()];
            for (k, m) in methods.iter().enumerate() {
                if !vals[k].is_nan() {
                    let _ = writeln!(csv, "{farm},{metric},{m},{},{}", vals[k], u8::from(best.contains(&k)));
                }
                cells.push(if vals[k].is_nan() {
                    "-".into()
                } else {
                    format!("{}{}", fmt(vals[k]), if best.contains(&k) { "*" } else { " " })
                });
            }
            rows.push(cells);
        }
    }
    let mut header = vec!["farm".to_string(), "metric".into()];
    header.extend(methods.iter().map(|m| format!("{m} ")));
    files.insert("tables/scenario.csv".into(), csv);
    files.insert(
        "tables/scenario.txt".into(),
        render_text("Extrapolation scenario: error above the stage-2 target cap (MW)", &header, &rows, 2),
    );
    Ok(())
}

/// Observed target ranges of the scenario's stage-2 and test sets.
fn target_ranges(t: &Table) -> Result<String, ReportError> {
    let mut acc: Vec<((String, String), (f64, f64, usize))> = Vec::new();
    for i in 0..t.rows.len() {
        if t.text(i, "method") != crate::eval::REAL {
            continue;
        }
        let key = (t.text(i, "farm").to_string(), t.text(i, "set").to_string());
        let v = t.num(i, "value")?;
        match acc.iter_mut().find(|(k, _)| *k == key) {
            Some((_, (lo, hi, n))) => {
                *lo = lo.min(v);
                *hi = hi.max(v);
                *n += 1;
            }
            None => acc.push((key, (v, v, 1))),
        }
    }
    let mut out = String::from("farm,set,min,max,n\n");
    for ((farm, set), (lo, hi, n)) in acc {
        let _ = writeln!(out, "{farm},{set},{lo},{hi},{n}");
    }
    Ok(out)
}

/// Re-emits selected columns in a canonical order.
fn passthrough(t: &Table, cols: &[&str]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(cols).expect("in-memory write");
    for i in 0..t.rows.len() {
        w.write_record(cols.iter().map(|c| t.text(i, c))).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// Renders every table and plot series derivable from the CSVs in `dir`.
/// Only the results file is required.
pub fn render_report(dir: &Path) -> Result<ReportBundle, ReportError> {
    let acc_cols = ["farm", "season", "method", "rmse", "mae", "n"];
    let results = Table::read(dir, RESULTS_CSV, &acc_cols)?.ok_or_else(|| ReportError::Missing {
        file: RESULTS_CSV.to_string(),
    })?;
    let mut files = BTreeMap::new();
    let rows = accuracy_rows(&results)?;
    accuracy_tables(&rows, "accuracy", "Forecast accuracy (MW)", &mut files);
    files.insert("plots/ci95.csv".into(), ci_plot(&rows));
    if let Some(t) = Table::read(dir, STAGE1_RESULTS_CSV, &acc_cols)? {
        let rows = accuracy_rows(&t)?;
        accuracy_tables(&rows, "accuracy_stage1", "Stage-1 network accuracy (MW)", &mut files);
        files.insert("plots/ci95_stage1.csv".into(), ci_plot(&rows));
    }
    if let Some(t) = Table::read(dir, TTESTS_CSV, &["pair", "t", "p", "dof", "ci_low", "ci_high"])? {
        ttest_tables(&t, &mut files)?;
    }
    if let Some(t) = Table::read(dir, ABSDIFF_CSV, &["farm", "season", "method", "mean", "variance"])? {
        absdiff_tables(&t, &mut files)?;
    }
    if let Some(t) = Table::read(dir, SCENARIO_CSV, &["farm", "method", "rmse_out", "mae_out", "rmse_day"])? {
        scenario_tables(&t, &mut files)?;
    }
    let point_cols = ["farm", "season", "seed", "day_index", "timestamp", "method", "value"];
    if let Some(t) = Table::read(dir, POINTS_CSV, &point_cols)? {
        for i in 0..t.rows.len() {
            t.num(i, "value")?;
        }
        files.insert("plots/forecast_vs_real.csv".into(), passthrough(&t, &point_cols));
    }
    let sc_cols = ["farm", "set", "timestamp", "method", "value"];
    if let Some(t) = Table::read(dir, SCENARIO_POINTS_CSV, &sc_cols)? {
        files.insert("plots/target_ranges.csv".into(), target_ranges(&t)?);
        files.insert("plots/scenario_series.csv".into(), passthrough(&t, &sc_cols));
    }
    Ok(ReportBundle { files })
}

/// Renders the report for `dir` and writes it under `dir/tables` and `dir/plots`.
pub fn build_report(dir: &Path) -> Result<ReportBundle, ReportError> {
    let bundle = render_report(dir)?;
    bundle.write(dir)?;
    Ok(bundle)
}
