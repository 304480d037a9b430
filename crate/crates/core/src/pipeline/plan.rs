use std::ops::Range;

use super::PipelineError;
use crate::data::STEPS_PER_DAY;

/// Window lengths in days.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanConfig {
    /// Day at which the first stage-1 window starts.
    pub start_day: usize,
    pub stage1_days: usize,
    pub val_days: usize,
    pub stage2_days: usize,
    pub test_days: usize,
    /// Moving Window 1 shift.
    pub l_c1_days: usize,
    /// Moving Window 2 shift.
    pub l_c2_days: usize,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            start_day: 0,
            stage1_days: 365,
            val_days: 10,
            stage2_days: 10,
            test_days: 10,
            l_c1_days: 10,
            l_c2_days: 1,
        }
    }
}

/// Initial window starts and lengths, in grid steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BacktestPlan {
    pub t_1: usize,
    pub t_v: usize,
    pub t_2: usize,
    pub t_e: usize,
    pub stage1_len: usize,
    pub val_len: usize,
    pub stage2_len: usize,
    pub test_len: usize,
    pub l_c1: usize,
    pub l_c2: usize,
    pub series_len: usize,
}

/// One Moving Window 1 period: a stage-1 training set, its validation set
/// and the forecast days served by the models trained on them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CyclePlan {
    pub index: usize,
    pub s_t1: Range<usize>,
    pub s_v1: Range<usize>,
    pub days: Vec<DayPlan>,
}

/// One Moving Window 2 step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DayPlan {
    /// Position within the test epoch (0-based).
    pub day_index: usize,
    pub s_t2: Range<usize>,
    pub test: Range<usize>,
}

pub fn make_plan(series_len: usize, cfg: &PlanConfig) -> Result<BacktestPlan, PipelineError> {
    let d = STEPS_PER_DAY;
    let lens = [
        ("stage1_days", cfg.stage1_days),
        ("val_days", cfg.val_days),
        ("stage2_days", cfg.stage2_days),
        ("test_days", cfg.test_days),
        ("l_c1_days", cfg.l_c1_days),
        ("l_c2_days", cfg.l_c2_days),
    ];
    if let Some((name, _)) = lens.iter().find(|(_, v)| *v == 0) {
        return Err(PipelineError::Plan(format!("{name} must be positive")));
    }
    if cfg.l_c1_days % cfg.l_c2_days != 0 {
        return Err(PipelineError::Plan(format!(
            "l_c1 ({} days) must be a multiple of l_c2 ({} days)",
            cfg.l_c1_days, cfg.l_c2_days
        )));
    }
    if cfg.test_days % cfg.l_c2_days != 0 {
        return Err(PipelineError::Plan(format!(
            "test length ({} days) must be a multiple of l_c2 ({} days)",
            cfg.test_days, cfg.l_c2_days
        )));
    }
    if cfg.stage2_days != cfg.val_days {
        return Err(PipelineError::Plan(format!(
            "stage-2 window ({} days) must equal the validation window ({} days) so they coincide on the first day",
            cfg.stage2_days, cfg.val_days
        )));
    }
    let needed_days = cfg.start_day + cfg.stage1_days + cfg.val_days + cfg.test_days;
    if series_len < needed_days * d {
        return Err(PipelineError::TooShort {
            required: needed_days * d,
            available: series_len,
        });
    }
    let t_1 = cfg.start_day * d;
    let t_v = t_1 + cfg.stage1_days * d;
    let t_e = t_v + cfg.val_days * d;
    Ok(BacktestPlan {
        t_1,
        t_v,
        t_2: t_v,
        t_e,
        stage1_len: cfg.stage1_days * d,
        val_len: cfg.val_days * d,
        stage2_len: cfg.stage2_days * d,
        test_len: cfg.test_days * d,
        l_c1: cfg.l_c1_days * d,
        l_c2: cfg.l_c2_days * d,
        series_len,
    })
}

impl BacktestPlan {
    /// Moving Window 1 periods, each with its daily Moving Window 2 steps.
    pub fn cycles(&self) -> Vec<CyclePlan> {
        let mut out = Vec::new();
        let mut shift = 0;
        let mut day_index = 0;
        while shift < self.test_len {
            let period_end = (shift + self.l_c1).min(self.test_len);
            let mut days = Vec::new();
            let mut off = shift;
            while off < period_end {
                let start = self.t_e + off;
                days.push(DayPlan {
                    day_index,
                    s_t2: start - self.stage2_len..start,
                    test: start..start + self.l_c2,
                });
                day_index += 1;
                off += self.l_c2;
            }
            out.push(CyclePlan {
                index: out.len(),
                s_t1: self.t_1 + shift..self.t_1 + shift + self.stage1_len,
                s_v1: self.t_v + shift..self.t_v + shift + self.val_len,
                days,
            });
            shift += self.l_c1;
        }
        out
    }

    pub fn test_range(&self) -> Range<usize> {
        self.t_e..self.t_e + self.test_len
    }
}
