use std::ops::Range;

use chrono::{DateTime, Utc};

use super::{DataError, WindSeries};

/// Model input channels in matrix row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    NwpSpeed = 0,
    NwpDirection = 1,
    NwpHumidity = 2,
    NwpPressure = 3,
    NwpTemperature = 4,
    Speed = 5,
    Power = 6,
}

impl Channel {
    pub const ALL: [Channel; 7] = [
        Channel::NwpSpeed,
        Channel::NwpDirection,
        Channel::NwpHumidity,
        Channel::NwpPressure,
        Channel::NwpTemperature,
        Channel::Speed,
        Channel::Power,
    ];

    pub fn values(self, s: &WindSeries) -> &[f64] {
        match self {
            Channel::NwpSpeed => &s.nwp.speed,
            Channel::NwpDirection => &s.nwp.direction,
            Channel::NwpHumidity => &s.nwp.humidity,
            Channel::NwpPressure => &s.nwp.pressure,
            Channel::NwpTemperature => &s.nwp.temperature,
            Channel::Speed => &s.speed,
            Channel::Power => &s.power,
        }
    }
}

/// Per-channel min/max fitted on a training range.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub min: [f64; 7],
    pub max: [f64; 7],
    pub capacity_mw: f64,
}

impl NormStats {
    pub fn is_constant(&self, c: Channel) -> bool {
        self.max[c as usize] == self.min[c as usize]
    }

    pub fn normalize(&self, c: Channel, v: f64) -> f64 {
        let i = c as usize;
        if self.is_constant(c) {
            0.5
        } else {
            (v - self.min[i]) / (self.max[i] - self.min[i])
        }
    }

    pub fn denormalize(&self, c: Channel, v: f64) -> f64 {
        let i = c as usize;
        if self.is_constant(c) {
            self.min[i]
        } else {
            v * (self.max[i] - self.min[i]) + self.min[i]
        }
    }
}

pub fn fit_norm(series: &WindSeries, range: Range<usize>) -> Result<NormStats, DataError> {
    if range.is_empty() || range.end > series.len() {
        return Err(DataError::EmptyRange);
    }
    let mut min = [0.0; 7];
    let mut max = [0.0; 7];
    for c in Channel::ALL {
        let vals = &c.values(series)[range.clone()];
        min[c as usize] = vals.iter().copied().fold(f64::INFINITY, f64::min);
        max[c as usize] = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
    Ok(NormStats {
        min,
        max,
        capacity_mw: series.capacity_mw,
    })
}

/// A whole series mapped through fixed statistics. Values outside the
/// fitting range may leave `[0, 1]`; they are not clipped.
#[derive(Debug, Clone)]
pub struct NormalizedSeries {
    pub stats: NormStats,
    pub channels: [Vec<f64>; 7],
    pub power_mw: Vec<f64>,
    pub speed_ms: Vec<f64>,
    pub timestamps: Vec<DateTime<Utc>>,
}

impl NormalizedSeries {
    pub fn len(&self) -> usize {
        self.power_mw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power_mw.is_empty()
    }

    pub fn channel(&self, c: Channel) -> &[f64] {
        &self.channels[c as usize]
    }
}

pub fn apply_norm(series: &WindSeries, stats: &NormStats) -> NormalizedSeries {
    let channels = Channel::ALL.map(|c| c.values(series).iter().map(|&v| stats.normalize(c, v)).collect());
    NormalizedSeries {
        stats: stats.clone(),
        channels,
        power_mw: series.power.clone(),
        speed_ms: series.speed.clone(),
        timestamps: series.timestamps.clone(),
    }
}

/// Maps normalised power back to MW.
pub fn denorm_power(values: &[f64], stats: &NormStats) -> Vec<f64> {
    values.iter().map(|&v| stats.denormalize(Channel::Power, v)).collect()
}

pub fn denorm_speed(values: &[f64], stats: &NormStats) -> Vec<f64> {
    values.iter().map(|&v| stats.denormalize(Channel::Speed, v)).collect()
}
