use std::io::Write;

use super::{BacktestPlan, BacktestRecord, PipelineConfig};
use crate::data::{format_timestamp, WindSeries};

pub const RECORDS_HEADER: &str = "day_index,origin_timestamp,y_real,y_mimo,y_miso,y_simo,y_siso,y_blend";

/// One row per forecast origin; `y_blend` is empty for stage-1-only runs.
pub fn write_records_csv<W: Write>(records: &[BacktestRecord], series: &WindSeries, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{RECORDS_HEADER}")?;
    for r in records {
        for i in 0..r.targets.len() {
            let blend = r.blend.as_ref().map(|b| b[i].to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.day_index,
                format_timestamp(&series.timestamps[r.origins[i]]),
                r.y_real[i],
                r.stage1[0][i],
                r.stage1[1][i],
                r.stage1[2][i],
                r.stage1[3][i],
                blend
            )?;
        }
    }
    out.flush()
}

fn range(r: &std::ops::Range<usize>) -> String {
    format!("{}..{}", r.start, r.end)
}

/// Plain `key = value` manifest: plan, configuration, seeds and the
/// hyperparameter chosen on every forecast day.
pub fn write_manifest<W: Write>(
    records: &[BacktestRecord],
    series: &WindSeries,
    plan: &BacktestPlan,
    cfg: &PipelineConfig,
    seed: u64,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "[run]")?;
    writeln!(out, "version = {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(out, "farm_id = {}", series.farm_id)?;
    writeln!(out, "capacity_mw = {}", series.capacity_mw)?;
    writeln!(out, "series_len = {}", series.len())?;
    writeln!(out, "seed = {seed}")?;
    let method = records.iter().find_map(|r| r.method).map_or("none".to_string(), |m| m.tag().to_string());
    writeln!(out, "blender = {method}")?;
    writeln!(out, "\n[plan]")?;
    for (k, v) in [
        ("t_1", plan.t_1),
        ("t_v", plan.t_v),
        ("t_2", plan.t_2),
        ("t_e", plan.t_e),
        ("stage1_len", plan.stage1_len),
        ("val_len", plan.val_len),
        ("stage2_len", plan.stage2_len),
        ("test_len", plan.test_len),
        ("l_c1", plan.l_c1),
        ("l_c2", plan.l_c2),
    ] {
        writeln!(out, "{k} = {v}")?;
    }
    writeln!(out, "\n[config]")?;
    let t = &cfg.train;
    writeln!(out, "horizon = {}", cfg.horizon)?;
    writeln!(out, "history = {}", cfg.history)?;
    writeln!(out, "alpha = {}", t.alpha)?;
    writeln!(out, "beta = {}", t.beta)?;
    writeln!(out, "batch_size = {}", t.batch_size)?;
    writeln!(out, "max_epochs = {}", t.max_epochs)?;
    writeln!(out, "patience = {}", t.patience)?;
    writeln!(out, "learning_rate = {}", t.learning_rate)?;
    writeln!(out, "window_stride = {}", t.window_stride)?;
    writeln!(out, "dims = {:?}", cfg.dims)?;
    writeln!(out, "folds = {}", cfg.grid.folds)?;
    writeln!(out, "svr_epsilon = {}", cfg.grid.svr_epsilon)?;
    writeln!(out, "gpr_length_scale = {}", cfg.grid.gpr_length_scale)?;
    writeln!(out, "mlp_max_epochs = {}", cfg.grid.mlp.max_epochs)?;
    if let Some(g) = &cfg.grid_values {
        writeln!(out, "grid = {g:?}")?;
    }
    writeln!(out, "\n[days]")?;
    for r in records {
        let w = &r.windows;
        writeln!(
            out,
            "day {} = cycle {}, s_t1 {}, s_v1 {}, s_t2 {}, stage2_used {}, test {}, hyper {}, cv_rmse {}, seeds {:?}",
            r.day_index,
            r.cycle,
            range(&w.s_t1),
            range(&w.s_v1),
            range(&w.s_t2),
            range(&w.stage2_used),
            range(&w.test),
            r.hyper.map_or("-".into(), |v| v.to_string()),
            r.cv_score.map_or("-".into(), |v| v.to_string()),
            r.seeds
        )?;
    }
    out.flush()
}
