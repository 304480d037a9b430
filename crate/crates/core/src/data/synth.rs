use std::f64::consts::PI;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{power_curve, DataError, NwpChannels, TurbineCurve, WindSeries, RESOLUTION_MINUTES, STEPS_PER_DAY};

/// Generator settings for one synthetic farm.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub farm_id: String,
    pub seed: u64,
    pub days: usize,
    pub start: DateTime<Utc>,
    pub curve: TurbineCurve,
    /// Long-run mean wind speed, m/s.
    pub baseline_speed: f64,
    /// Lag-one coefficient of the 15-minute AR(1) speed anomaly.
    pub ar_coeff: f64,
    /// Stationary standard deviation of the AR(1) anomaly, m/s.
    pub ar_sd: f64,
    pub diurnal_amp: f64,
    pub seasonal_amp: f64,
    /// Additive observation noise on power before clipping, MW.
    pub power_noise_sd: f64,
    pub nwp_speed_bias: f64,
    /// Stationary sd of the (autocorrelated) NWP speed error, m/s.
    pub nwp_speed_noise_sd: f64,
    pub nwp_noise_ar: f64,
    /// Scales the noise on direction, humidity, pressure and temperature.
    pub nwp_aux_noise: f64,
}

impl SynthParams {
    /// Farm presets `1..=3` follow the three reference farms: curve,
    /// capacity and wind-speed spread as published, mean hub-height speed
    /// set so that mean output lands near each farm's published mean power.
    /// Other ids cycle through the three.
    pub fn farm(farm: usize, seed: u64, days: usize) -> Self {
        let (curve, mean, sd): (TurbineCurve, f64, f64) = match (farm.max(1) - 1) % 3 {
            0 => (TurbineCurve::wf1(), 6.7, 2.85),
            1 => (TurbineCurve::wf2(), 8.45, 3.33),
            _ => (TurbineCurve::wf3(), 5.8, 3.53),
        };
        let (diurnal_amp, seasonal_amp) = (1.2, 1.5);
        let ar_sd = (sd * sd - (diurnal_amp * diurnal_amp + seasonal_amp * seasonal_amp) / 2.0).sqrt();
        Self {
            farm_id: format!("wf{farm}"),
            seed,
            days,
            start: Utc.with_ymd_and_hms(2019, 1, 1, 0, 0, 0).unwrap(),
            curve,
            baseline_speed: mean,
            ar_coeff: 0.98,
            ar_sd,
            diurnal_amp,
            seasonal_amp,
            power_noise_sd: 0.6,
            nwp_speed_bias: 0.3,
            nwp_speed_noise_sd: 0.9,
            nwp_noise_ar: 0.95,
            nwp_aux_noise: 1.0,
        }
    }
}

struct Ar1 {
    coeff: f64,
    innovation_sd: f64,
    state: f64,
}

impl Ar1 {
    fn new(coeff: f64, stationary_sd: f64, rng: &mut ChaCha8Rng) -> Self {
        let z: f64 = StandardNormal.sample(rng);
        Self {
            coeff,
            innovation_sd: stationary_sd * (1.0 - coeff * coeff).max(0.0).sqrt(),
            state: z * stationary_sd,
        }
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.state = self.coeff * self.state + self.innovation_sd * z;
        self.state
    }
}

fn wrap_degrees(d: f64) -> f64 {
    let w = d.rem_euclid(360.0);
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Generates a farm series: AR(1) + diurnal + seasonal wind speed, power
/// from the turbine curve plus clipped noise, and NWP channels that are
/// noisy, biased views of the same weather. Deterministic in `seed`.
pub fn synth_windfarm(p: &SynthParams) -> Result<WindSeries, DataError> {
    if p.days == 0 {
        return Err(DataError::Empty);
    }
    let n = p.days * STEPS_PER_DAY;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };

    let mut anomaly = Ar1::new(p.ar_coeff, p.ar_sd, &mut rng);
    let mut nwp_err = Ar1::new(p.nwp_noise_ar, p.nwp_speed_noise_sd, &mut rng);
    let mut humid_err = Ar1::new(0.97, 5.0 * p.nwp_aux_noise, &mut rng);
    let mut press_err = Ar1::new(0.99, 2.0 * p.nwp_aux_noise, &mut rng);
    let mut temp_err = Ar1::new(0.97, 1.5 * p.nwp_aux_noise, &mut rng);
    let mut direction = 360.0 * (0.5 + 0.5 * (normal(&mut rng)).tanh());

    let step = Duration::minutes(RESOLUTION_MINUTES);
    let mut s = WindSeries {
        farm_id: p.farm_id.clone(),
        capacity_mw: p.curve.capacity,
        timestamps: Vec::with_capacity(n),
        power: Vec::with_capacity(n),
        speed: Vec::with_capacity(n),
        nwp: NwpChannels::default(),
    };
    for i in 0..n {
        let day_phase = 2.0 * PI * (i % STEPS_PER_DAY) as f64 / STEPS_PER_DAY as f64;
        let year_phase = 2.0 * PI * i as f64 / (365.0 * STEPS_PER_DAY as f64);
        let diurnal = (day_phase - PI / 2.0).sin();
        let seasonal = year_phase.cos();

        let speed = (p.baseline_speed + anomaly.next(&mut rng) + p.diurnal_amp * diurnal + p.seasonal_amp * seasonal)
            .max(0.0);
        let power_noise = p.power_noise_sd * normal(&mut rng);
        let power = (power_curve(&p.curve, speed)? + power_noise).clamp(0.0, p.curve.capacity);

        let nwp_speed = (speed + p.nwp_speed_bias + nwp_err.next(&mut rng)).max(0.0);
        direction = wrap_degrees(direction + 4.0 * normal(&mut rng));
        let nwp_dir = wrap_degrees(direction + 5.0 * p.nwp_aux_noise * normal(&mut rng));
        let humidity = (65.0 - 15.0 * diurnal + humid_err.next(&mut rng)).clamp(5.0, 100.0);
        let pressure = 1012.0 - 6.0 * seasonal - 0.4 * (speed - p.baseline_speed) + press_err.next(&mut rng);
        let temperature = 10.0 - 12.0 * seasonal + 4.0 * diurnal + temp_err.next(&mut rng);

        s.timestamps.push(p.start + step * i as i32);
        s.speed.push(speed);
        s.power.push(power);
        s.nwp.speed.push(nwp_speed);
        s.nwp.direction.push(nwp_dir);
        s.nwp.humidity.push(humidity);
        s.nwp.pressure.push(pressure);
        s.nwp.temperature.push(temperature);
    }
    s.validate()?;
    Ok(s)
}
