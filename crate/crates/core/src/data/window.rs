use std::ops::Range;

use windcast_nn::Tensor;

use super::{Channel, DataError, NormStats, NormalizedSeries};

/// 2 hours ahead at 15-minute resolution.
pub const DEFAULT_HORIZON: usize = 8;
/// History columns per input row.
pub const DEFAULT_HISTORY: usize = 15;

/// Model input for one forecast origin `t`.
///
/// Matrix rows 0..5 hold the NWP channels for `t+1 ..= t+n`, rows 5 and 6
/// hold measured speed and power for `t−n+1 ..= t` (n = history length).
#[derive(Debug, Clone, PartialEq)]
pub struct InputWindow {
    pub origin: usize,
    pub matrix: Tensor,
    pub target_power: f64,
    pub target_speed: f64,
    pub target_power_norm: f64,
    pub target_speed_norm: f64,
}

/// The same window split per data type.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelView {
    pub nwp: Tensor,
    pub speed: Tensor,
    pub power: Tensor,
}

impl InputWindow {
    pub fn columns(&self) -> usize {
        self.matrix.shape()[1]
    }

    pub fn channel_view(&self) -> ChannelView {
        let n = self.columns();
        let d = self.matrix.data();
        ChannelView {
            nwp: Tensor::new(&[5, n], d[..5 * n].to_vec()).expect("5 rows"),
            speed: Tensor::new(&[1, n], d[5 * n..6 * n].to_vec()).expect("1 row"),
            power: Tensor::new(&[1, n], d[6 * n..].to_vec()).expect("1 row"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct WindowSet {
    pub windows: Vec<InputWindow>,
    /// Targets in the requested range whose inputs fall off the series.
    pub skipped: usize,
    pub stats: NormStats,
    pub horizon: usize,
    pub history: usize,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn target_power(&self) -> Vec<f64> {
        self.windows.iter().map(|w| w.target_power).collect()
    }

    pub fn target_indices(&self) -> Vec<usize> {
        self.windows.iter().map(|w| w.origin + self.horizon).collect()
    }

    /// Subset with the same statistics and geometry.
    pub fn select(&self, keep: impl Fn(&InputWindow) -> bool) -> WindowSet {
        WindowSet {
            windows: self.windows.iter().filter(|w| keep(w)).cloned().collect(),
            skipped: 0,
            stats: self.stats.clone(),
            horizon: self.horizon,
            history: self.history,
        }
    }
}

/// Builds one window per target index in `targets` (target = origin +
/// `horizon`). Targets whose history or NWP columns fall outside the series
/// are skipped and counted.
pub fn build_windows(
    series: &NormalizedSeries,
    targets: Range<usize>,
    horizon: usize,
    history: usize,
) -> Result<WindowSet, DataError> {
    if horizon == 0 || history == 0 || horizon > history {
        return Err(DataError::Geometry(format!(
            "need 1 <= horizon <= history, got horizon {horizon}, history {history}"
        )));
    }
    let len = series.len();
    let mut windows = Vec::new();
    let mut skipped = 0;
    for target in targets.clone() {
        let valid = target >= horizon && target - horizon + 1 >= history && target - horizon + history < len;
        if !valid {
            skipped += 1;
            continue;
        }
        let t = target - horizon;
        let mut m = Vec::with_capacity(7 * history);
        for c in &Channel::ALL[..5] {
            m.extend_from_slice(&series.channel(*c)[t + 1..=t + history]);
        }
        m.extend_from_slice(&series.channel(Channel::Speed)[t + 1 - history..=t]);
        m.extend_from_slice(&series.channel(Channel::Power)[t + 1 - history..=t]);
        windows.push(InputWindow {
            origin: t,
            matrix: Tensor::new(&[7, history], m).expect("7 x history"),
            target_power: series.power_mw[target],
            target_speed: series.speed_ms[target],
            target_power_norm: series.channel(Channel::Power)[target],
            target_speed_norm: series.channel(Channel::Speed)[target],
        });
    }
    if windows.is_empty() {
        return Err(DataError::TooShort {
            start: targets.start,
            end: targets.end,
            needed: history + history,
            len,
        });
    }
    Ok(WindowSet {
        windows,
        skipped,
        stats: series.stats.clone(),
        horizon,
        history,
    })
}
